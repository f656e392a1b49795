"""Regenerate the bundled datasets under crates/core/data/.

fourclass.csv  - 682 x 2 synthetic set with interlocking class regions
moons.csv      - 300 x 2 two-moons set
wine.csv       - 178 x 13 UCI wine, cultivar 1 vs the rest

Run from the repository root: python3 scripts/gen_data.py
"""
import csv
import numpy as np
from sklearn.datasets import load_wine, make_moons

OUT = "crates/core/data"


def fourclass(n=682, seed=20240615):
    rng = np.random.default_rng(seed)
    pts, labels = [], []

    def label(x, y):
        # +1: a wavy left band with a -1 hole cut out, plus an island on the right
        left = x < 60 + 35 * np.sin(y / 15.0)
        hole = (x - 35) ** 2 + (y - 150) ** 2 <= 22**2
        island = (x - 160) ** 2 + (y - 150) ** 2 <= 30**2
        return 1 if (left and not hole) or island else -1

    while len(pts) < n:
        x, y = rng.uniform(0, 200, size=2)
        pts.append((round(x, 3), round(y, 3)))
        labels.append(label(x, y))
    return np.array(pts), np.array(labels)


def write(path, x, y, header):
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for row, lab in zip(x, y):
            w.writerow([repr(float(v)) for v in row] + [int(lab)])


def main():
    x, y = fourclass()
    write(f"{OUT}/fourclass.csv", x, y, ["x1", "x2", "label"])

    x, y = make_moons(n_samples=300, noise=0.25, random_state=7)
    x = np.round(x, 5)
    write(f"{OUT}/moons.csv", x, np.where(y == 1, 1, -1), ["x1", "x2", "label"])

    wine = load_wine()
    y = np.where(wine.target == 0, 1, -1)
    names = [n.replace(" ", "_").replace("/", "_") for n in wine.feature_names]
    write(f"{OUT}/wine.csv", wine.data, y, names + ["label"])


if __name__ == "__main__":
    main()
