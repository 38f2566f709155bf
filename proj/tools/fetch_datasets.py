#!/usr/bin/env python3
"""Build data/banana.csv and data/pendigits.csv from the KEEL copies shipped in
the keel-ds wheel.

Output is label-first CSV without a header. The pendigits file is a seeded,
class-stratified subset of 3498 samples drawn from the 10992-sample KEEL
penbased set.

    python3 tools/fetch_datasets.py            # downloads the wheel with pip
    python3 tools/fetch_datasets.py --wheel W  # uses a local wheel
"""

import argparse
import glob
import io
import os
import random
import subprocess
import sys
import tempfile
import zipfile

MEMBERS = {
    "banana": "keel_ds/data/balanced/raw/banana.dat",
    "penbased": "keel_ds/data/balanced/raw/penbased.dat",
}
PENDIGITS_SIZE = 3498


def fetch_wheel(dest):
    subprocess.check_call(
        [sys.executable, "-m", "pip", "download", "--no-deps", "--only-binary=:all:",
         "keel-ds==0.2.5", "-d", dest])
    wheels = glob.glob(os.path.join(dest, "keel_ds-*.whl"))
    if not wheels:
        sys.exit("keel-ds wheel not found after download")
    return wheels[0]


def read_rows(text):
    rows = []
    for line in io.StringIO(text):
        line = line.strip()
        if not line or line.startswith("@"):
            continue
        fields = [f.strip() for f in line.split(",")]
        rows.append(fields)
    return rows


def to_label(text):
    value = float(text)
    if value != int(value):
        raise ValueError(f"non-integer label {text}")
    return int(value)


def write_csv(path, rows):
    with open(path, "w") as out:
        for label, features in rows:
            out.write(",".join([str(label)] + features) + "\n")


def stratified_subset(rows, size, seed):
    by_class = {}
    for i, row in enumerate(rows):
        by_class.setdefault(row[0], []).append(i)
    rng = random.Random(seed)
    total = len(rows)
    labels = sorted(by_class)
    quotas = {c: (len(by_class[c]) * size) // total for c in labels}
    remainder = size - sum(quotas.values())
    for c in sorted(labels, key=lambda c: -((len(by_class[c]) * size) % total))[:remainder]:
        quotas[c] += 1
    picked = []
    for c in labels:
        members = list(by_class[c])
        rng.shuffle(members)
        picked.extend(members[:quotas[c]])
    return [rows[i] for i in sorted(picked)]


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--wheel", help="path to keel_ds-0.2.5-py3-none-any.whl")
    parser.add_argument("--out", default=os.path.join(os.path.dirname(__file__), "..", "data"))
    parser.add_argument("--seed", type=int, default=20200101)
    args = parser.parse_args()

    with tempfile.TemporaryDirectory() as tmp:
        wheel = args.wheel or fetch_wheel(tmp)
        with zipfile.ZipFile(wheel) as zf:
            texts = {name: zf.read(member).decode() for name, member in MEMBERS.items()}

    os.makedirs(args.out, exist_ok=True)

    banana = [(to_label(r[-1]), r[:-1]) for r in read_rows(texts["banana"])]
    write_csv(os.path.join(args.out, "banana.csv"), banana)

    pen = [(to_label(r[-1]), r[:-1]) for r in read_rows(texts["penbased"])]
    write_csv(os.path.join(args.out, "pendigits.csv"), stratified_subset(pen, PENDIGITS_SIZE, args.seed))

    print(f"banana: {len(banana)} rows, pendigits: {PENDIGITS_SIZE} of {len(pen)} rows -> {args.out}")


if __name__ == "__main__":
    main()
