"""Regenerate src/fieldport/data/bessel_reference.csv with mpmath at 50 digits."""

import csv
from pathlib import Path

import mpmath

mpmath.mp.dps = 50
ARGS = ["0.001", "0.01", "0.1", "0.5", "1", "1.5", "2", "3", "4.5", "7", "10", "15", "25", "40"]
FUNCS = {"J1": lambda x: mpmath.besselj(1, x), "Y1": lambda x: mpmath.bessely(1, x), "K1": lambda x: mpmath.besselk(1, x)}

out = Path(__file__).resolve().parents[1] / "src" / "fieldport" / "data" / "bessel_reference.csv"
with out.open("w", newline="") as fh:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["kind", "arg", "value"])
    for kind, fn in FUNCS.items():
        for a in ARGS:
            w.writerow([kind, a, mpmath.nstr(fn(mpmath.mpf(a)), 25, min_fixed=-5, max_fixed=5)])
print(out)
