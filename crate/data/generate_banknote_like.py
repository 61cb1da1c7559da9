"""Writes banknote_like.csv: a seeded two-class correlated Gaussian sample
shaped like the banknote authentication data (4 wavelet statistics,
762 genuine / 610 forged rows)."""

from pathlib import Path

import numpy as np

FEATURES = ["variance", "skewness", "curtosis", "entropy"]

CLASSES = {
    0: dict(
        rows=762,
        mean=[2.277, 4.257, 0.797, -1.148],
        sd=[2.019, 5.139, 3.239, 2.125],
        corr=[
            [1.0, -0.3, 0.1, 0.3],
            [-0.3, 1.0, -0.7, -0.4],
            [0.1, -0.7, 1.0, 0.2],
            [0.3, -0.4, 0.2, 1.0],
        ],
    ),
    1: dict(
        rows=610,
        mean=[-1.868, -0.993, 2.149, -1.247],
        sd=[1.881, 5.404, 5.262, 2.070],
        corr=[
            [1.0, 0.2, -0.3, 0.3],
            [0.2, 1.0, -0.8, -0.5],
            [-0.3, -0.8, 1.0, 0.3],
            [0.3, -0.5, 0.3, 1.0],
        ],
    ),
}


def main() -> None:
    rng = np.random.default_rng(20240513)
    rows = []
    for label, spec in CLASSES.items():
        sd = np.array(spec["sd"])
        cov = np.array(spec["corr"]) * np.outer(sd, sd)
        sample = rng.multivariate_normal(spec["mean"], cov, size=spec["rows"])
        rows.extend((x, label) for x in sample)
    out = Path(__file__).with_name("banknote_like.csv")
    with out.open("w") as f:
        f.write(",".join(FEATURES + ["class"]) + "\n")
        for x, label in rows:
            f.write(",".join(f"{v:.5f}" for v in x) + f",{label}\n")


if __name__ == "__main__":
    main()
