"""Published per-task measurements used as golden data.

BASELINE_ROWS: per-task totals at the 1,000 W default cap
(task, total_time_s, calls, total_energy_j, avg_power_w).

COMPARISON_ROWS: selected caps and percent changes vs 1,000 W
(task, sed_cap, ed_cap, sed_energy_red, ed_energy_red, sed_runtime_inc, ed_runtime_inc).
Energy is printed as a positive reduction, runtime as a positive increase.
"""

BASELINE_CAP = 1000

BASELINE_ROWS = [
    ("sm90_gemm_ts64x64x32", 77.89, 21632, 35361.83, 454.02),
    ("buildKKRMatrix", 34.90, 128, 12867.73, 368.74),
    ("sm90_gemm_ts32x32x32", 8.03, 94208, 4076.98, 507.51),
    ("getrf_pivot(1)", 4.07, 16384, 2694.54, 662.05),
    ("getrf_pivot(2)", 4.07, 30720, 2670.36, 656.11),
    ("trsm_left_kernel", 3.57, 150272, 2328.26, 651.57),
    ("getrf_pivot(3)", 1.82, 8192, 1146.70, 630.06),
    ("gpu compute idle", 8.83, 601345, 2425.49, 274.80),
]

COMPARISON_ROWS = [
    ("sm90_gemm_ts64x64x32", 900, 600, 0.85, 3.42, 0.00, 10.3),
    ("buildKKRMatrix", 300, 300, 22.92, 22.92, 11.30, 11.30),
    ("sm90_gemm_ts32x32x32", 400, 400, 31.40, 31.40, 28.42, 28.42),
    ("getrf_pivot(1)", 500, 400, 20.61, 28.50, 19.16, 37.67),
    ("getrf_pivot(2)", 600, 400, 10.05, 24.48, 7.37, 38.41),
    ("trsm_left_kernel", 600, 400, 9.02, 25.53, 7.74, 36.85),
    ("getrf_pivot(3)", 600, 400, 9.10, 24.15, 6.59, 38.46),
    ("gpu compute idle", 200, 300, 46.58, 39.69, 9.25, 1.17),
]

# column sums of COMPARISON_ROWS, quoted rounded as ~151/~90 and ~200/~203
SED_PROJECTION = (150.53, 89.83)
ED_PROJECTION = (200.09, 202.58)

# speedup-energy-delay of the idle phase at 200 W
IDLE_SED_AT_200 = 1.71


def baseline_csv_text() -> str:
    lines = ["task,cap_w,total_runtime_s,total_energy_j,call_count,avg_power_w"]
    for task, t, calls, e, p in BASELINE_ROWS:
        lines.append(f"{task},{BASELINE_CAP},{t},{e},{calls},{p}")
    return "\n".join(lines) + "\n"


def back_derived(value: float, pct: float, decimals: int = 4) -> float:
    """Candidate value implied by a signed percent change, rounded like a measurement."""
    return round(value * (1.0 + pct / 100.0), decimals)
