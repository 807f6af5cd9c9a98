"""Synthetic datasets with planted collective anomalies.

Both generators produce rows whose anomalies are invisible marginally:
every anomalous value is drawn from the same per-column distribution as
the normal rows, and only the cross-feature correlation is broken. The
tabular generator builds two factor-driven column groups (continuous plus
correlated discrete columns) and decouples one group per anomalous row;
the time-series generator phase-shifts one channel of a correlated
sinusoid pair inside planted windows.
"""

import argparse
import os

import numpy as np

from .schema import Column, FeatureSchema, save_schema

NORMAL_VALUE = "normal"
ANOMALY_VALUE = "anomaly"


def _quantile_bin(values, edges, categories):
    codes = np.searchsorted(edges, values)
    return [categories[c] for c in codes]


def make_static_dataset(n_samples=19016, anomaly_rate=0.05, noise=0.35, seed=0):
    """Factor-structured tabular data, 13 feature columns plus a label.

    Columns c0..c4 load on one latent factor, c5..c9 on another; three
    discrete columns bin the factors into categories. Anomalous rows
    redraw one group's factor independently per column, which preserves
    every marginal but severs the within-group correlation.
    """
    rng = np.random.default_rng(seed)
    n_anom = int(np.floor(anomaly_rate * n_samples))
    is_anomaly = np.zeros(n_samples, dtype=bool)
    is_anomaly[rng.choice(n_samples, size=n_anom, replace=False)] = True

    load1 = np.array([1.0, 0.9, 0.8, 1.1, 0.7])
    load2 = np.array([1.0, 0.85, 1.05, 0.75, 0.95])
    f1 = rng.standard_normal(n_samples)
    f2 = rng.standard_normal(n_samples)
    # per-column private factor copies; anomalous rows use these instead
    f1_broken = rng.standard_normal((n_samples, 5))
    f2_broken = rng.standard_normal((n_samples, 5))
    break_group1 = is_anomaly & (rng.random(n_samples) < 0.5)
    break_group2 = is_anomaly & ~break_group1

    cont = np.empty((n_samples, 10))
    for j in range(5):
        factor = np.where(break_group1, f1_broken[:, j], f1)
        cont[:, j] = load1[j] * factor + noise * rng.standard_normal(n_samples)
    for j in range(5):
        factor = np.where(break_group2, f2_broken[:, j], f2)
        cont[:, 5 + j] = load2[j] * factor + noise * rng.standard_normal(n_samples)

    # discrete columns follow their group's factor; broken rows follow a
    # private draw so the category marginals stay untouched
    d1_source = np.where(break_group1, rng.standard_normal(n_samples), f1)
    d2_source = np.where(break_group2, rng.standard_normal(n_samples), f2)
    d3_source = np.where(is_anomaly, rng.standard_normal(n_samples), (f1 + f2) / np.sqrt(2.0))
    d1_cats = ("low", "mid", "high")
    d2_cats = ("a", "b", "c", "d")
    d3_cats = ("neg", "pos")
    d1 = _quantile_bin(d1_source + 0.3 * rng.standard_normal(n_samples), [-0.6, 0.6], d1_cats)
    d2 = _quantile_bin(d2_source + 0.3 * rng.standard_normal(n_samples), [-0.8, 0.0, 0.8], d2_cats)
    d3 = _quantile_bin(d3_source + 0.3 * rng.standard_normal(n_samples), [0.0], d3_cats)

    columns = tuple(
        [Column(f"c{j}", "continuous") for j in range(10)]
        + [
            Column("d0", "discrete", d1_cats),
            Column("d1", "discrete", d2_cats),
            Column("d2", "discrete", d3_cats),
        ]
    )
    schema = FeatureSchema(columns, label_column="class", anomaly_value=ANOMALY_VALUE)
    header = [c.name for c in columns] + ["class"]
    rows = []
    for i in range(n_samples):
        row = [repr(float(v)) for v in cont[i]]
        row += [d1[i], d2[i], d3[i]]
        row.append(ANOMALY_VALUE if is_anomaly[i] else NORMAL_VALUE)
        rows.append(row)
    return header, rows, schema, is_anomaly


def make_timeseries_dataset(
    n_steps=4000,
    n_windows=12,
    window_len=25,
    period=50,
    noise=0.1,
    seed=0,
):
    """Two phase-locked sinusoid channels plus two noise channels.

    Inside each planted window the second channel keeps its sinusoid
    marginal but jumps to an independent phase, so the pair decorrelates
    while each channel still looks normal alone.
    """
    rng = np.random.default_rng(seed)
    t = np.arange(n_steps)
    base = np.sin(2.0 * np.pi * t / period)
    ch0 = base + noise * rng.standard_normal(n_steps)
    ch1 = base + noise * rng.standard_normal(n_steps)
    ch2 = 0.5 * rng.standard_normal(n_steps)
    ch3 = 0.5 * rng.standard_normal(n_steps)

    is_anomaly = np.zeros(n_steps, dtype=bool)
    # spread windows over the series with room between them
    gap = n_steps // (n_windows + 1)
    for w in range(n_windows):
        start = gap * (w + 1) + int(rng.integers(0, max(gap - window_len, 1)))
        stop = min(start + window_len, n_steps)
        phase = np.pi * rng.uniform(0.5, 1.5)
        span = slice(start, stop)
        ch1[span] = np.sin(2.0 * np.pi * t[span] / period + phase)
        ch1[span] += noise * rng.standard_normal(stop - start)
        is_anomaly[span] = True

    columns = tuple(Column(f"ch{j}", "continuous") for j in range(4))
    schema = FeatureSchema(columns, label_column="class", anomaly_value=ANOMALY_VALUE)
    header = [c.name for c in columns] + ["class"]
    rows = []
    for i in range(n_steps):
        row = [repr(float(v)) for v in (ch0[i], ch1[i], ch2[i], ch3[i])]
        row.append(ANOMALY_VALUE if is_anomaly[i] else NORMAL_VALUE)
        rows.append(row)
    return header, rows, schema, is_anomaly


def save_dataset_csv(path, header, rows):
    lines = [",".join(header)]
    lines.extend(",".join(row) for row in rows)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_static_fixture(out_dir, **kwargs):
    header, rows, schema, _ = make_static_dataset(**kwargs)
    csv_path = os.path.join(out_dir, "tabular.csv")
    schema_path = os.path.join(out_dir, "tabular.schema")
    save_dataset_csv(csv_path, header, rows)
    save_schema(schema, schema_path)
    return csv_path, schema_path


def write_timeseries_fixture(out_dir, **kwargs):
    header, rows, schema, _ = make_timeseries_dataset(**kwargs)
    csv_path = os.path.join(out_dir, "timeseries.csv")
    schema_path = os.path.join(out_dir, "timeseries.schema")
    save_dataset_csv(csv_path, header, rows)
    save_schema(schema, schema_path)
    return csv_path, schema_path


def main(argv=None):
    parser = argparse.ArgumentParser(
        description="write the synthetic benchmark datasets to a directory"
    )
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--samples", type=int, default=19016)
    parser.add_argument("--steps", type=int, default=4000)
    args = parser.parse_args(argv)
    os.makedirs(args.out, exist_ok=True)
    write_static_fixture(args.out, n_samples=args.samples, seed=args.seed)
    write_timeseries_fixture(args.out, n_steps=args.steps, seed=args.seed)
    print(f"wrote tabular and timeseries fixtures to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
