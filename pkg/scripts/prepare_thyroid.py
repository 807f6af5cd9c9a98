#!/usr/bin/env python3
"""Convert the UCI ann-thyroid data files into pipeline CSV + schema.

Best-effort reconstruction: the source distribution has 21 attributes
(15 binary flags followed by 6 continuous measurements) and a class in
{1, 2, 3} with 3 = normal. The published feature count for this dataset
is 13; this script keeps the 6 continuous measurements plus the 7 binary
flags with the most variation in the supplied files, and records the kept
columns in the schema. Classes 1 and 2 are anomalies by default.

Usage:
    python3 scripts/prepare_thyroid.py ann-train.data [ann-test.data ...] \
        --out data/thyroid
"""

import argparse
import os
import sys

import numpy as np

N_BINARY = 15
N_CONTINUOUS = 6
N_KEPT_BINARY = 7


def read_ann_file(path):
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if len(parts) != N_BINARY + N_CONTINUOUS + 1:
                raise SystemExit(f"{path}: expected 22 fields, got {len(parts)}")
            rows.append([float(v) for v in parts])
    return np.array(rows)


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("inputs", nargs="+", help="ann-*.data files")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--anomaly-classes",
        default="1,2",
        help="comma-separated class values treated as anomalous (default 1,2)",
    )
    args = parser.parse_args(argv)

    data = np.vstack([read_ann_file(p) for p in args.inputs])
    binaries = data[:, :N_BINARY]
    continuous = data[:, N_BINARY : N_BINARY + N_CONTINUOUS]
    classes = data[:, -1].astype(int)
    anomaly_classes = {int(v) for v in args.anomaly_classes.split(",")}

    variances = binaries.var(axis=0)
    kept = np.argsort(-variances)[:N_KEPT_BINARY]
    kept = np.sort(kept)

    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "thyroid.csv")
    schema_path = os.path.join(args.out, "thyroid.schema")

    header = [f"m{j}" for j in range(N_CONTINUOUS)] + [f"flag{j}" for j in kept]
    header.append("class")
    with open(csv_path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for i in range(len(data)):
            row = [repr(float(v)) for v in continuous[i]]
            row += [str(int(binaries[i, j])) for j in kept]
            row.append("anomaly" if classes[i] in anomaly_classes else "normal")
            fh.write(",".join(row) + "\n")

    with open(schema_path, "w", encoding="utf-8") as fh:
        fh.write("# kept binary flags (by source index): " + " ".join(str(j) for j in kept) + "\n")
        for j in range(N_CONTINUOUS):
            fh.write(f"column m{j} continuous\n")
        for j in kept:
            fh.write(f"column flag{j} discrete 0 1\n")
        fh.write("label class\n")
        fh.write("anomaly anomaly\n")

    n_anom = int(np.sum(np.isin(classes, list(anomaly_classes))))
    print(f"wrote {len(data)} rows ({n_anom} anomalies) to {csv_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
