"""Extended mutual information between feature pairs.

For time series, each column is whitened three ways: against its own lags,
and jointly against the lags of both pair members. The EMI is the average
log-likelihood ratio between the joint residual density and the product of
the marginal residual densities. Static data skips whitening (the residual
is the raw value), which reduces the estimate to sample-average mutual
information over i.i.d. rows.

Pairs are canonicalized by content before any fitting, so swapping the
arguments returns the bit-identical value, and per-pair seeds make the
matrix independent of computation order.
"""

from dataclasses import dataclass

import numpy as np

from .dataset import raw_feature_columns
from .density import Frequency, JointFrequency, Kde1d, Kde2d, estimate_density
from .exceptions import AsymmetricInput, LengthMismatch, SchemaError, SeriesTooShort
from .schema import CONTINUOUS, DISCRETE
from .tree import ResidualSeries, fit_tree_predictor, whiten

FIT_CAP = 2000
EVAL_CAP = 4000


@dataclass
class EmiMatrix:
    """Symmetric EMI values over raw (pre-one-hot) feature columns."""

    values: np.ndarray
    column_names: tuple

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise AsymmetricInput(f"EMI matrix must be square, got {v.shape}")
        if len(self.column_names) != v.shape[0]:
            raise AsymmetricInput("EMI matrix size does not match column names")
        if not np.all(np.isfinite(v)):
            raise AsymmetricInput("EMI matrix contains non-finite entries")
        if not np.allclose(v, v.T, atol=1e-9, rtol=0.0):
            raise AsymmetricInput("EMI matrix is not symmetric within 1e-9")
        self.values = v
        self.column_names = tuple(self.column_names)


def _take(res, idx):
    return ResidualSeries(res.kind, res.values[idx], res.alphabet_size)


def _static_residual(values, kind, cardinality):
    if kind == CONTINUOUS:
        return ResidualSeries(CONTINUOUS, np.asarray(values, dtype=np.float64))
    return ResidualSeries(
        DISCRETE, np.asarray(values, dtype=np.int64), cardinality
    )


def _marginal_logpdf(model, res):
    if isinstance(model, Kde1d):
        return np.log(model.pdf(res.values))
    return np.log(model.pmf(res.values))


def _joint_logpdf(model, res_a, res_b):
    if isinstance(model, Kde2d):
        return np.log(model.pdf(res_a.values, res_b.values))
    if isinstance(model, JointFrequency):
        return np.log(model.pmf(res_a.values, res_b.values))
    # mixed model keys on the continuous side
    if res_a.kind == CONTINUOUS:
        return np.log(model.pdf(res_a.values, res_b.values))
    return np.log(model.pdf(res_b.values, res_a.values))


def _canonical_order(x, y, kind_x, kind_y):
    # content-keyed ordering so emi_pair(x, y) == emi_pair(y, x) exactly
    key_x = (kind_x, x.tobytes())
    key_y = (kind_y, y.tobytes())
    return key_y < key_x


def emi_pair(
    x,
    y,
    w=5,
    is_timeseries=False,
    kinds=(CONTINUOUS, CONTINUOUS),
    cardinalities=(0, 0),
    seed=0,
    fit_cap=FIT_CAP,
    eval_cap=EVAL_CAP,
    max_depth=6,
    min_leaf=5,
):
    """EMI between two raw columns, in nats.

    Returns (1/N) * sum_t [log p(joint residuals_t) - log p(eps_x_t)
    - log p(eps_y_t)] with the density floor applied inside each log.
    Density fitting and the average are taken over seeded subsamples once a
    pair exceeds fit_cap/eval_cap residual steps, keeping large static
    tables tractable without breaking determinism.
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"columns have shapes {x.shape} and {y.shape}")
    kind_x, kind_y = kinds
    m_x, m_y = cardinalities
    if _canonical_order(x, y, kind_x, kind_y):
        x, y = y, x
        kind_x, kind_y = kind_y, kind_x
        m_x, m_y = m_y, m_x

    if is_timeseries:
        if x.size <= w:
            raise SeriesTooShort(f"{x.size} steps cannot feed a window of {w}")
        pair = np.stack([x, y], axis=1)
        joint = fit_tree_predictor(
            pair, w, (kind_x, kind_y), (m_x, m_y), max_depth=max_depth, min_leaf=min_leaf
        )
        res_jx, res_jy = whiten(pair, joint)
        res_x = whiten(
            x, fit_tree_predictor(x, w, kind_x, (m_x,), max_depth=max_depth, min_leaf=min_leaf)
        )
        res_y = whiten(
            y, fit_tree_predictor(y, w, kind_y, (m_y,), max_depth=max_depth, min_leaf=min_leaf)
        )
    else:
        if x.size < 2:
            raise SeriesTooShort(f"static EMI needs >= 2 rows, got {x.size}")
        res_jx = res_x = _static_residual(x, kind_x, m_x)
        res_jy = res_y = _static_residual(y, kind_y, m_y)

    n = len(res_jx)
    rng = np.random.default_rng(seed)
    fit_idx = np.sort(rng.choice(n, size=min(fit_cap, n), replace=False))
    eval_idx = np.sort(rng.choice(n, size=min(eval_cap, n), replace=False))

    joint_model = estimate_density(_take(res_jx, fit_idx), _take(res_jy, fit_idx))
    model_x = estimate_density(_take(res_x, fit_idx))
    model_y = estimate_density(_take(res_y, fit_idx))

    log_joint = _joint_logpdf(joint_model, _take(res_jx, eval_idx), _take(res_jy, eval_idx))
    log_x = _marginal_logpdf(model_x, _take(res_x, eval_idx))
    log_y = _marginal_logpdf(model_y, _take(res_y, eval_idx))
    return float(np.mean(log_joint - log_x - log_y))


def pair_seed(seed, i, j):
    """Stable per-pair seed so the matrix is schedule-independent."""
    lo, hi = (i, j) if i <= j else (j, i)
    return np.random.SeedSequence(seed, spawn_key=(lo, hi))


def build_emi_matrix(
    matrix,
    schema,
    w=5,
    is_timeseries=False,
    seed=0,
    fit_cap=FIT_CAP,
    eval_cap=EVAL_CAP,
    max_depth=6,
    min_leaf=5,
):
    """Pairwise EMI over every raw feature column, including the diagonal.

    Discrete columns enter as single categorical variables (state codes),
    not as their one-hot groups.
    """
    cols = raw_feature_columns(matrix, schema)
    if len(cols) < 2:
        raise SchemaError(f"EMI matrix needs >= 2 feature columns, got {len(cols)}")
    m = len(cols)
    values = np.zeros((m, m))
    for i in range(m):
        for j in range(i, m):
            name_i, kind_i, card_i, x = cols[i]
            name_j, kind_j, card_j, y = cols[j]
            value = emi_pair(
                x,
                y,
                w=w,
                is_timeseries=is_timeseries,
                kinds=(kind_i, kind_j),
                cardinalities=(card_i, card_j),
                seed=pair_seed(seed, i, j),
                fit_cap=fit_cap,
                eval_cap=eval_cap,
                max_depth=max_depth,
                min_leaf=min_leaf,
            )
            values[i, j] = value
            values[j, i] = value
    return EmiMatrix(values, tuple(c[0] for c in cols))


def save_emi_csv(emi, path):
    lines = ["," + ",".join(emi.column_names)]
    for name, row in zip(emi.column_names, emi.values):
        lines.append(name + "," + ",".join(repr(float(v)) for v in row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_emi_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    names = tuple(lines[0].split(",")[1:])
    values = np.array(
        [[float(v) for v in ln.split(",")[1:]] for ln in lines[1:]], dtype=np.float64
    )
    return EmiMatrix(values, names)


def save_edge_list(emi, path):
    lines = []
    for i, a in enumerate(emi.column_names):
        for j in range(i, len(emi.column_names)):
            lines.append(f"{a},{emi.column_names[j]},{float(emi.values[i, j])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
