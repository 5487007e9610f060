"""Write the benchmark CSV files under data/ from the KEEL copies shipped in keel-ds.

Usage: pip install keel-ds && python scripts/prepare_datasets.py [outdir]

Seeds is not part of the KEEL collection; place a seeds.csv (header row,
label column ``class``) in the same directory to include it.
"""

import csv
import sys
from importlib import resources
from pathlib import Path

# output name -> KEEL file name
DATASETS = {
    "wine": "wine",
    "liver": "bupa",
    "sonar": "sonar",
    "vehicle": "vehicle",
    "heart": "heart",
}


def read_keel(name):
    raw = resources.files("keel_ds").joinpath(f"data/balanced/raw/{name}.dat").read_text()
    rows = []
    for line in raw.splitlines():
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        rows.append([cell.strip() for cell in line.split(",")])
    return rows


def main(outdir="data"):
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    for target, source in DATASETS.items():
        rows = read_keel(source)
        d = len(rows[0]) - 1
        with open(out / f"{target}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"f{i + 1}" for i in range(d)] + ["class"])
            writer.writerows(rows)
        print(f"{target}: {len(rows)} rows, {d} features")


if __name__ == "__main__":
    main(*sys.argv[1:])
