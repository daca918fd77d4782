"""Print FLOPs and parameter counts of every estimator at full scale and at desk scale.

Run:  python demos/complexity_table.py
"""

from mimoce.analysis import FULL_SCALE_CONSTANTS, complexity_report

DESK = {**FULL_SCALE_CONSTANTS, "N": 64, "M": 16, "N_B": 2, "F": 32, "F_fnn": 8, "C_fnn": 128}

for title, consts in (("full scale (N=128, M=32)", FULL_SCALE_CONSTANTS), ("desk scale (N=64, M=16)", DESK)):
    print(title)
    print(f"  {'algorithm':>14} {'FLOPs':>11} {'params':>11} {'vs reference':>14}")
    for alg in ("ls", "cnn", "cnn-att", "mmse-single", "mmse-regional", "fnn-att", "svbi"):
        r = complexity_report(alg, consts)
        d = r.discrepancy()
        note = "" if d is None else f"{d['flops_rel']:+.2%}"
        print(f"  {alg:>14} {r.total_flops:11.4e} {r.total_params:11.4e} {note:>14}")
    print()

# The networks grow linearly in N while MMSE and S-VBI grow cubically, so the
# gap widens with the array size.
for n in (32, 64, 128, 256):
    c = {**FULL_SCALE_CONSTANTS, "N": n, "M": n // 4}
    print(f"N={n:4d}  cnn-att {complexity_report('cnn-att', c).total_flops:.3e}"
          f"  mmse {complexity_report('mmse-regional', c).total_flops:.3e}"
          f"  svbi {complexity_report('svbi', c).total_flops:.3e}")
