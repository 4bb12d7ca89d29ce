"""Regenerate golden_planes.json from the test oracle: python3 tests/data/make_golden.py"""

import json
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, os.path.dirname(HERE))

from oracles import encode_weight  # noqa: E402


def main():
    cases = []
    for bit_width, bpcs in ((8, (1, 2, 3, 4)), (4, (1, 2))):
        lo, hi = -(2 ** (bit_width - 1)), 2 ** (bit_width - 1)
        for bpc in bpcs:
            for kind in ("conventional", "vecom"):
                for w in range(lo, hi):
                    digits, weights, bias, clipped = encode_weight(w, kind, bpc, bit_width)
                    cases.append({"w": w, "bit_width": bit_width, "bits_per_cell": bpc, "kind": kind,
                                  "digits": digits, "plane_weights": weights, "bias": bias,
                                  "clipped": clipped})
    with open(os.path.join(HERE, "golden_planes.json"), "w") as fh:
        json.dump(cases, fh, separators=(",", ":"))
        fh.write("\n")


if __name__ == "__main__":
    main()
