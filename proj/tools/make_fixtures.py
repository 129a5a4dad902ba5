#!/usr/bin/env python3
"""Regenerate the bundled data fixtures.

- digits-images.idx3-ubyte / digits-labels.idx1-ubyte: scikit-learn's 8x8
  digits (1797 examples, 10 classes) repacked in IDX format with pixel values
  rescaled from 0..16 to 0..240.
- synthetic_heteroscedastic.csv: 1500 rows of
      y | x ~ N(x0 + 0.5*x1*x2, (0.5 + 0.6*|x0|)^2),  x ~ U(-2,2)^3
  the stand-in regression benchmark used when no real CSV is supplied.

Both files are committed; rerunning this script reproduces them byte for byte.
"""

import struct
from pathlib import Path

import numpy as np
from sklearn.datasets import load_digits

OUT = Path(__file__).resolve().parent.parent / "data"


def write_idx() -> None:
    digits = load_digits()
    images = np.round(digits.images * 15.0).astype(np.uint8)  # 0..16 -> 0..240
    labels = digits.target.astype(np.uint8)
    n, rows, cols = images.shape

    with open(OUT / "digits-images.idx3-ubyte", "wb") as f:
        f.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        f.write(images.tobytes())
    with open(OUT / "digits-labels.idx1-ubyte", "wb") as f:
        f.write(struct.pack(">II", 0x00000801, n))
        f.write(labels.tobytes())
    print(f"digits: {n} images of {rows}x{cols}")


def write_csv() -> None:
    rng = np.random.default_rng(20240817)
    n = 1500
    x = rng.uniform(-2.0, 2.0, size=(n, 3))
    mean = x[:, 0] + 0.5 * x[:, 1] * x[:, 2]
    sd = 0.5 + 0.6 * np.abs(x[:, 0])
    y = mean + sd * rng.standard_normal(n)

    with open(OUT / "synthetic_heteroscedastic.csv", "w", newline="\n") as f:
        f.write("x0,x1,x2,y\n")
        for i in range(n):
            row = (float(x[i, 0]), float(x[i, 1]), float(x[i, 2]), float(y[i]))
            f.write(",".join(repr(v) for v in row) + "\n")
    print(f"synthetic_heteroscedastic: {n} rows")


if __name__ == "__main__":
    OUT.mkdir(exist_ok=True)
    write_idx()
    write_csv()
