"""Scores manifest pairs with the `pesq` package (wideband mode).

Usage: external_pesq.py MANIFEST OUT_JSON. Exits 3 when the package is
missing so callers can tell "unavailable" from "failed".
"""
import csv
import json
import os
import sys

try:
    import numpy as np
    import scipy.io.wavfile as wavfile
    from pesq import pesq
except ImportError:
    sys.exit(3)


def main():
    manifest, out = sys.argv[1], sys.argv[2]
    base = os.path.dirname(os.path.abspath(manifest))
    scores = {}
    with open(manifest, newline="") as f:
        for row in csv.DictReader(f):
            fs, ref = wavfile.read(os.path.join(base, row["reference"]))
            _, deg = wavfile.read(os.path.join(base, row["degraded"]))
            scores[row["id"]] = float(pesq(fs, ref.astype(np.float64), deg.astype(np.float64), "wb"))
    with open(out, "w") as f:
        json.dump(scores, f)


if __name__ == "__main__":
    main()
