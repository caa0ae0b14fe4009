"""Write the iris and adult fixtures used by the test-suite into ``data/``.

iris comes from the copy bundled with scikit-learn.  adult needs the raw UCI
files ``adult.data`` and ``adult.test``; point ``--adult-dir`` at a directory
holding them (they also ship inside the ``responsibly`` wheel under
``responsibly/dataset/adult``).

    python scripts/prepare_data.py --adult-dir /path/to/uci/adult
"""

import argparse
import csv
import gzip
from pathlib import Path

ADULT_COLUMNS = [
    "age", "workclass", "fnlwgt", "education", "education-num",
    "marital-status", "occupation", "relationship", "race", "sex",
    "capital-gain", "capital-loss", "hours-per-week", "native-country",
    "income",
]
IRIS_COLUMNS = ["sepal_length", "sepal_width", "petal_length", "petal_width", "species"]


def write_iris(out):
    from sklearn.datasets import load_iris

    bunch = load_iris()
    with open(out, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(IRIS_COLUMNS)
        for row, label in zip(bunch.data, bunch.target):
            w.writerow([f"{v:g}" for v in row] + [bunch.target_names[label]])


def _adult_rows(path):
    with open(path) as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("|"):
                continue
            cells = [c.strip() for c in line.split(",")]
            # the test split writes labels as ">50K." / "<=50K."
            cells[-1] = cells[-1].rstrip(".")
            yield cells


def write_adult(adult_dir, out):
    adult_dir = Path(adult_dir)
    n = 0
    with gzip.open(out, "wt", newline="") as f:
        w = csv.writer(f)
        w.writerow(ADULT_COLUMNS)
        for name in ("adult.data", "adult.test"):
            for cells in _adult_rows(adult_dir / name):
                w.writerow(cells)
                n += 1
    return n


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--adult-dir", default=None)
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_iris(out / "iris.csv")
    print("wrote", out / "iris.csv")
    if args.adult_dir:
        n = write_adult(args.adult_dir, out / "adult.csv.gz")
        print("wrote", out / "adult.csv.gz", n, "rows")


if __name__ == "__main__":
    main()
