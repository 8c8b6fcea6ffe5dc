#!/usr/bin/env python3
"""
Weak-strong uniqueness, numerically.

A fine-grid run (4x cells, tau/4) with strictly interior data stands in
for the strong solution; coarse runs start from initial data perturbed by
an interior bump of size delta.  The relative (Bregman) entropy between
the coarse run and the restricted reference then behaves like the
Gronwall bound predicts: for delta = 0 it stays at the discretization
floor, and the growth ratios max_t RE(t)/RE(0) are insensitive to delta.

Run:  python3 demos/04_weak_strong_uniqueness.py    (writes out/demo_ws/)
"""

from pathlib import Path

from pnpfermi.app import read_config, run_weak_strong

config = read_config(
    Path(__file__).resolve().parents[1] / "configs" / "weak_strong.cfg"
)
deltas = [0.0, 1e-2, 1e-3]
_, report = run_weak_strong(config, deltas, out_dir=Path("out/demo_ws"),
                            quiet=True)

print("delta      RE(0)         max_t RE(t)   ratio")
for key, entry in sorted(report["deltas"].items(), key=lambda kv: -float(kv[0])):
    ratio = entry.get("gronwall_ratio")
    print(f"{float(key):8.0e}  {entry['re_initial']:.6e}  {entry['re_max']:.6e}"
          f"  {'' if ratio is None else f'{ratio:.3f}'}")

print()
print(f"discretization floor (delta = 0): {report['floor_max']:.3e}")
print(f"ratio spread across deltas      : {report['ratio_spread']:.3f} "
      "(Gronwall constant independent of the perturbation size)")
