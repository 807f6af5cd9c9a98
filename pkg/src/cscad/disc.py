"""Discriminating network and the self-labeling selection strategy.

Samples are ranked by the norms of their two anomalous-degree measures
(reconstruction error d and latent standard deviation sigma_z); the lowest
half become positive (normal) training samples and a small top fraction
become negative (anomalous) ones. The discriminator compresses d and
sigma_z through separate stacks, concatenates, and emits a two-way softmax
whose second component is the anomaly probability. Ground-truth anomaly
ids, when available, replace self-labeled negatives one for one so the
negative set size stays fixed.
"""

import json
from dataclasses import asdict, dataclass

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import (
    ConfigError,
    EmptyClass,
    IdMismatch,
    NonFiniteLoss,
    OverlappingSelection,
    TooFewSamples,
)
from .nn import Adam, BatchNorm1d, Linear, Tensor, concat
from .nn.checkpoint import dump_arrays, parse_arrays
from .validation import check_is_fitted

COMBINE_MAX = "max"
COMBINE_SUM = "sum"
COMBINE_D_ONLY = "d_only"
COMBINE_RULES = (COMBINE_MAX, COMBINE_SUM, COMBINE_D_ONLY)

SELF_LABELED = "self_labeled"
GROUND_TRUTH = "ground_truth"

ROLE_POSITIVE = "positive"
ROLE_NEGATIVE = "negative"
ROLE_EXCLUDED = "excluded"

DECISION_THRESHOLD = 0.5


@dataclass(frozen=True)
class LabelingPolicy:
    """How training samples are chosen from the anomalous-degree ranking."""

    positive_fraction: float = 0.5
    negative_fraction: float = 0.05
    combine_rule: str = COMBINE_MAX
    known_anomaly_ids: tuple = None

    def __post_init__(self):
        if not 0.0 < self.positive_fraction:
            raise ConfigError(f"positive fraction {self.positive_fraction} must be > 0")
        if not 0.0 < self.negative_fraction:
            raise ConfigError(f"negative fraction {self.negative_fraction} must be > 0")
        if self.positive_fraction + self.negative_fraction > 1.0:
            raise ConfigError(
                f"fractions {self.positive_fraction} + {self.negative_fraction} exceed 1"
            )
        if self.combine_rule not in COMBINE_RULES:
            raise ConfigError(f"unknown combine rule {self.combine_rule!r}")
        if self.known_anomaly_ids is not None:
            object.__setattr__(
                self, "known_anomaly_ids", tuple(int(i) for i in self.known_anomaly_ids)
            )


@dataclass
class TrainingSelection:
    """Audit record of one labeling pass over a measure set.

    The per-sample arrays cover every sample (role says where it landed);
    provenance is aligned with negative_ids.
    """

    positive_ids: np.ndarray
    negative_ids: np.ndarray
    provenance: list
    sample_ids: np.ndarray
    d_norms: np.ndarray
    sigma_norms: np.ndarray
    rank_d: np.ndarray
    rank_sigma: np.ndarray
    combined_rank: np.ndarray
    roles: list


def _rank_ascending(values, ids):
    """Rank 1 = smallest value; ties broken by sample id."""
    order = np.lexsort((ids, values))
    ranks = np.empty(len(values), dtype=np.int64)
    ranks[order] = np.arange(1, len(values) + 1)
    return ranks


def select_training_samples(measures, policy):
    """Split samples into positives, negatives, and an excluded middle band.

    Combined anomalous rank r = max(rank by ||d||, rank by ||sigma_z||)
    (or sum / d-only per the policy); positives are the floor(pos_frac*N)
    samples of smallest r, negatives the floor(neg_frac*N) of largest r.
    Known anomaly ids displace the lowest-ranked self-labeled negatives.
    """
    d_norms = measures.d_norm
    sigma_norms = measures.sigma_norm
    n = len(d_norms)
    ids = measures.ids if measures.ids is not None else np.arange(n)
    ids = np.asarray(ids, dtype=np.int64)

    n_pos = int(np.floor(policy.positive_fraction * n))
    n_neg = int(np.floor(policy.negative_fraction * n))
    if n_pos < 1 or n_neg < 1:
        raise TooFewSamples(
            f"{n} samples leave {n_pos} positives / {n_neg} negatives"
        )

    rank_d = _rank_ascending(d_norms, ids)
    rank_sigma = _rank_ascending(sigma_norms, ids)
    if policy.combine_rule == COMBINE_MAX:
        combined = np.maximum(rank_d, rank_sigma)
    elif policy.combine_rule == COMBINE_SUM:
        combined = rank_d + rank_sigma
    else:
        combined = rank_d.copy()

    order = np.lexsort((ids, combined))
    position = {int(ids[j]): k for k, j in enumerate(order)}

    negative_ids = [int(ids[j]) for j in order[n - n_neg :]]
    provenance = [SELF_LABELED] * n_neg
    known = policy.known_anomaly_ids
    if known:
        id_set = set(int(i) for i in ids)
        missing = [i for i in known if i not in id_set]
        if missing:
            raise IdMismatch(f"known anomaly ids not in the measure set: {missing}")
        # most anomalous known ids first, then displace the least anomalous
        # self-labeled negatives so the set size never changes
        known_sorted = sorted(set(known), key=lambda i: -position[i])[:n_neg]
        kept = [i for i in negative_ids if i not in set(known_sorted)]
        kept = kept[len(kept) - (n_neg - len(known_sorted)) :]
        negative_ids = sorted(
            known_sorted + kept, key=lambda i: position[i]
        )
        known_set = set(known_sorted)
        provenance = [
            GROUND_TRUTH if i in known_set else SELF_LABELED for i in negative_ids
        ]

    negative_set = set(negative_ids)
    positive_ids = []
    for j in order:
        if len(positive_ids) == n_pos:
            break
        sid = int(ids[j])
        if sid not in negative_set:
            positive_ids.append(sid)
    if len(positive_ids) < n_pos:
        raise TooFewSamples("not enough samples outside the negative set")
    positive_set = set(positive_ids)
    if positive_set & negative_set:
        raise OverlappingSelection("positive and negative sets intersect")

    roles = []
    for sid in ids:
        sid = int(sid)
        if sid in positive_set:
            roles.append(ROLE_POSITIVE)
        elif sid in negative_set:
            roles.append(ROLE_NEGATIVE)
        else:
            roles.append(ROLE_EXCLUDED)
    return TrainingSelection(
        positive_ids=np.array(positive_ids, dtype=np.int64),
        negative_ids=np.array(negative_ids, dtype=np.int64),
        provenance=provenance,
        sample_ids=ids,
        d_norms=d_norms,
        sigma_norms=sigma_norms,
        rank_d=rank_d,
        rank_sigma=rank_sigma,
        combined_rank=combined,
        roles=roles,
    )


@dataclass
class DiscConfig:
    m: int
    m_sigma: int = 5
    use_sigma: bool = True
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.m < 4:
            raise ConfigError(f"measure dimension {self.m} must be >= 4")
        if self.m_sigma < 1:
            raise ConfigError(f"latent dimension {self.m_sigma} must be >= 1")


class DiscModel:
    """Two compression stacks (d and sigma_z) joined by a softmax head."""

    def __init__(self, config, seed):
        self.config = config
        rng = np.random.default_rng(seed)
        m = config.m

        def width(v):
            return max(v, 1)

        self.d_bn = BatchNorm1d(m, name="d_bn")
        d_widths = (m, width(m // 2), width(m // 4), 10, 5)
        self.d_stack = [
            Linear(d_widths[i], d_widths[i + 1], activation="elu", rng=rng, name=f"d_fc{i}")
            for i in range(len(d_widths) - 1)
        ]
        if config.use_sigma:
            ms = config.m_sigma
            self.sigma_bn = BatchNorm1d(ms, name="sigma_bn")
            s_widths = (ms, width(ms // 2), 2)
            self.sigma_stack = [
                Linear(s_widths[i], s_widths[i + 1], activation="elu", rng=rng, name=f"sigma_fc{i}")
                for i in range(len(s_widths) - 1)
            ]
            head_in = 5 + 2
        else:
            self.sigma_bn = None
            self.sigma_stack = []
            head_in = 5
        self.head_bn = BatchNorm1d(head_in, name="head_bn")
        self.head = [
            Linear(head_in, 4, activation="elu", rng=rng, name="head_fc0"),
            Linear(4, 2, rng=rng, name="head_fc1"),
        ]
        self.history_ = []

    def _modules(self):
        mods = [self.d_bn] + self.d_stack
        if self.sigma_bn is not None:
            mods += [self.sigma_bn] + self.sigma_stack
        return mods + [self.head_bn] + self.head

    def parameters(self):
        out = []
        for mod in self._modules():
            out.extend(mod.parameters())
        return out

    def param_tensors(self):
        return [t for _, t in self.parameters()]

    def state_arrays(self):
        out = []
        for mod in self._modules():
            if isinstance(mod, BatchNorm1d):
                out.extend(mod.state_arrays())
        return out

    def set_mode(self, training):
        for mod in self._modules():
            mod.set_mode(training)

    def logits(self, d, sigma=None):
        h = self.d_bn(d if isinstance(d, Tensor) else Tensor(d)).elu()
        for layer in self.d_stack:
            h = layer(h)
        if self.sigma_bn is not None:
            hs = self.sigma_bn(sigma if isinstance(sigma, Tensor) else Tensor(sigma)).elu()
            for layer in self.sigma_stack:
                hs = layer(hs)
            h = concat([h, hs], axis=1)
        h = self.head_bn(h).elu()
        h = self.head[0](h)
        return self.head[1](h)


def build_disc(m, m_sigma=5, seed=0, use_sigma=True):
    """Stack widths follow the compression pattern with floors at 1."""
    config = DiscConfig(m=m, m_sigma=m_sigma, use_sigma=use_sigma, seed=seed)
    return DiscModel(config, seed)


def _selection_arrays(measures, selection):
    index = {int(i): k for k, i in enumerate(selection.sample_ids)}
    pos_rows = [index[int(i)] for i in selection.positive_ids]
    neg_rows = [index[int(i)] for i in selection.negative_ids]
    rows = np.array(pos_rows + neg_rows, dtype=np.int64)
    y = np.array([0] * len(pos_rows) + [1] * len(neg_rows), dtype=np.int64)
    return measures.d[rows], measures.sigma_z[rows], y


def train_disc(model, measures, selection, config=None):
    """Weighted cross-entropy over the selected samples only.

    Class weights are inversely proportional to class sizes, so the small
    negative set is not drowned out. Batch norm statistics accumulate in
    training mode and are frozen before returning.
    """
    config = config or model.config
    x_d, x_sigma, y = _selection_arrays(measures, selection)
    n_pos = int((y == 0).sum())
    n_neg = int((y == 1).sum())
    if n_pos == 0 or n_neg == 0:
        raise EmptyClass(f"{n_pos} positives, {n_neg} negatives")
    n = len(y)
    class_w = np.array([n / (2.0 * n_pos), n / (2.0 * n_neg)])
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(13,)))
    opt = Adam(model.param_tensors(), lr=config.lr)
    model.set_mode(True)
    history = []
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        hit_sum = 0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            logits = model.logits(
                x_d[idx], x_sigma[idx] if model.config.use_sigma else None
            )
            logp = logits.log_softmax()
            weights = class_w[y[idx]]
            picked = logp * Tensor(_one_hot(y[idx]))
            loss = (picked.sum(axis=1) * Tensor(-weights)).sum() * (
                1.0 / weights.sum()
            )
            if not np.isfinite(loss.data):
                raise NonFiniteLoss(f"non-finite loss at epoch {epoch}")
            opt.zero_grad()
            loss.backward()
            opt.step()
            loss_sum += float(loss.data) * weights.sum()
            hit_sum += int((logits.data.argmax(axis=1) == y[idx]).sum())
        history.append((epoch, loss_sum / n, hit_sum / n))
    model.set_mode(False)
    model.history_ = history
    return model


def _one_hot(y):
    out = np.zeros((len(y), 2))
    out[np.arange(len(y)), y] = 1.0
    return out


def predict(model, measures):
    """Anomaly probability per sample (second softmax component)."""
    model.set_mode(False)
    logits = model.logits(
        measures.d, measures.sigma_z if model.config.use_sigma else None
    )
    probs = logits.softmax()
    return probs.data[:, 1].copy()


def predict_labels(model, measures, threshold=DECISION_THRESHOLD):
    return predict(model, measures) > threshold


# -- artifacts -------------------------------------------------------------


def save_selection_csv(selection, path):
    lines = ["sample_id,d_norm,sigma_norm,rank_d,rank_sigma,combined_rank,role,provenance"]
    prov = {int(i): p for i, p in zip(selection.negative_ids, selection.provenance)}
    for k, sid in enumerate(selection.sample_ids):
        sid = int(sid)
        lines.append(
            ",".join(
                [
                    str(sid),
                    repr(float(selection.d_norms[k])),
                    repr(float(selection.sigma_norms[k])),
                    str(int(selection.rank_d[k])),
                    str(int(selection.rank_sigma[k])),
                    str(int(selection.combined_rank[k])),
                    selection.roles[k],
                    prov.get(sid, ""),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_selection_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    sample_ids, d_norms, sigma_norms = [], [], []
    rank_d, rank_sigma, combined, roles = [], [], [], []
    positives, negatives, provenance = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        sid = int(parts[0])
        sample_ids.append(sid)
        d_norms.append(float(parts[1]))
        sigma_norms.append(float(parts[2]))
        rank_d.append(int(parts[3]))
        rank_sigma.append(int(parts[4]))
        combined.append(int(parts[5]))
        roles.append(parts[6])
        if parts[6] == ROLE_POSITIVE:
            positives.append(sid)
        elif parts[6] == ROLE_NEGATIVE:
            negatives.append(sid)
            provenance.append(parts[7])
    return TrainingSelection(
        positive_ids=np.array(positives, dtype=np.int64),
        negative_ids=np.array(negatives, dtype=np.int64),
        provenance=provenance,
        sample_ids=np.array(sample_ids, dtype=np.int64),
        d_norms=np.array(d_norms),
        sigma_norms=np.array(sigma_norms),
        rank_d=np.array(rank_d, dtype=np.int64),
        rank_sigma=np.array(rank_sigma, dtype=np.int64),
        combined_rank=np.array(combined, dtype=np.int64),
        roles=roles,
    )


def save_predictions_csv(ids, probabilities, d_norms, sigma_norms, path):
    lines = ["id,probability,label,d_norm,sigma_norm"]
    for i in range(len(ids)):
        lines.append(
            ",".join(
                [
                    str(int(ids[i])),
                    repr(float(probabilities[i])),
                    str(int(probabilities[i] > DECISION_THRESHOLD)),
                    repr(float(d_norms[i])),
                    repr(float(sigma_norms[i])),
                ]
            )
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_predictions_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    ids, probs, labels = [], [], []
    for ln in lines[1:]:
        parts = ln.split(",")
        ids.append(int(parts[0]))
        probs.append(float(parts[1]))
        labels.append(bool(int(parts[2])))
    return np.array(ids, dtype=np.int64), np.array(probs), np.array(labels, dtype=bool)


DISC_CHECKPOINT_HEADER = "discckpt v1"


def save_disc_checkpoint(model, path):
    cfg = asdict(model.config)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(DISC_CHECKPOINT_HEADER + "\n")
        fh.write("config " + json.dumps(cfg, sort_keys=True) + "\n")
        fh.write(dump_arrays(model.parameters() + model.state_arrays()))


def load_disc_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != DISC_CHECKPOINT_HEADER:
        raise ConfigError(f"{path}: not a discriminator checkpoint")
    if not lines[1].startswith("config "):
        raise ConfigError(f"{path}: missing config header")
    config = DiscConfig(**json.loads(lines[1][len("config ") :]))
    arrays = parse_arrays("\n".join(lines[2:]), source=str(path))
    model = DiscModel(config, seed=config.seed)
    named = dict(model.parameters())
    states = dict(model.state_arrays())
    expected = set(named) | set(states)
    if expected != set(arrays):
        raise ConfigError(f"{path}: checkpoint arrays do not match the config")
    for name, tensor in named.items():
        if tensor.data.shape != arrays[name].shape:
            raise ConfigError(f"{path}: shape mismatch for {name}")
        tensor.data = arrays[name]
    for mod in model._modules():
        if isinstance(mod, BatchNorm1d):
            mod.running_mean = arrays[f"{mod.name}.running_mean"]
            mod.running_var = arrays[f"{mod.name}.running_var"]
    return model


class SelfLabelingDiscriminator(BaseEstimator):
    """Select labels from anomalous-degree measures, then train and apply
    the discriminating network. Fitted attributes: selection_, model_."""

    def __init__(
        self,
        positive_fraction=0.5,
        negative_fraction=0.05,
        combine_rule=COMBINE_MAX,
        known_anomaly_ids=None,
        use_sigma=True,
        epochs=100,
        batch_size=256,
        lr=1e-3,
        seed=0,
    ):
        self.positive_fraction = positive_fraction
        self.negative_fraction = negative_fraction
        self.combine_rule = combine_rule
        self.known_anomaly_ids = known_anomaly_ids
        self.use_sigma = use_sigma
        self.epochs = epochs
        self.batch_size = batch_size
        self.lr = lr
        self.seed = seed

    def fit(self, measures, y=None):
        policy = LabelingPolicy(
            positive_fraction=self.positive_fraction,
            negative_fraction=self.negative_fraction,
            combine_rule=self.combine_rule if self.use_sigma else COMBINE_D_ONLY,
            known_anomaly_ids=self.known_anomaly_ids,
        )
        self.selection_ = select_training_samples(measures, policy)
        config = DiscConfig(
            m=measures.d.shape[1],
            m_sigma=measures.sigma_z.shape[1],
            use_sigma=self.use_sigma,
            epochs=self.epochs,
            batch_size=self.batch_size,
            lr=self.lr,
            seed=self.seed,
        )
        self.model_ = train_disc(
            DiscModel(config, self.seed), measures, self.selection_, config
        )
        return self

    def predict_proba(self, measures):
        check_is_fitted(self, "model_")
        return predict(self.model_, measures)

    def predict(self, measures):
        check_is_fitted(self, "model_")
        return predict_labels(self.model_, measures)
