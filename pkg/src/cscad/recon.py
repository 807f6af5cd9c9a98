"""Graph-convolutional variational autoencoder and the anomalous-degree
measures it emits.

The encoder filters each sample through the correlation graph, compresses it
through fully connected layers to a latent Gaussian (mu_z, sigma_z), and the
decoder mirrors the stack back out through a final graph filter. Training
minimizes mean squared reconstruction error plus a weighted closed-form KL
term. After training, decoding from the latent mean (no sampling) yields the
per-feature squared reconstruction error d; together with sigma_z these are
the two per-sample anomalous-degree measures.

The time-series variant filters every window step through the input graph
filter, runs a stacked LSTM across the steps, applies the VAE to the final
hidden state, and reconstructs the sample one step past the window.
"""

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .dataset import WindowedSeries
from .exceptions import (
    ConfigError,
    DimensionMismatch,
    NonFiniteActivation,
    NonFiniteLoss,
    TooFewSamples,
)
from .nn import Adam, GcnLayer, Linear, Lstm, Tensor
from .nn.checkpoint import dump_arrays, parse_arrays

STATIC = "static"
TIMESERIES = "timeseries"


@dataclass
class ReconConfig:
    m: int
    gcn_order: int = 2
    encoder_widths: tuple = (60, 30, 10)
    latent: int = 5
    kl_weight: float = 1.0
    kl_warmup: int = 0
    epochs: int = 100
    batch_size: int = 256
    lr: float = 1e-3
    seed: int = 0
    variant: str = STATIC
    window: int = 5
    lstm_hidden: int = None
    lstm_layers: int = 2
    use_gcn: bool = True

    def __post_init__(self):
        if self.m < 1:
            raise ConfigError(f"encoded dimension {self.m} must be >= 1")
        if any(w < 1 for w in self.encoder_widths) or self.latent < 1:
            raise ConfigError("layer widths must be positive")
        if self.kl_weight < 0:
            raise ConfigError(f"KL weight {self.kl_weight} must be >= 0")
        if self.kl_warmup < 0:
            raise ConfigError(f"KL warmup {self.kl_warmup} must be >= 0")
        if self.variant not in (STATIC, TIMESERIES):
            raise ConfigError(f"unknown variant {self.variant!r}")
        if self.variant == TIMESERIES and self.lstm_hidden is None:
            self.lstm_hidden = self.m
        self.encoder_widths = tuple(self.encoder_widths)


@dataclass
class AnomalyMeasures:
    """Per-sample anomalous-degree measures."""

    d: np.ndarray
    mu_z: np.ndarray
    sigma_z: np.ndarray
    ids: np.ndarray = None
    labels: np.ndarray = None

    @property
    def d_norm(self):
        return np.linalg.norm(self.d, axis=1)

    @property
    def sigma_norm(self):
        return np.linalg.norm(self.sigma_z, axis=1)

    @property
    def n_samples(self):
        return self.d.shape[0]


class ReconModel:
    """Layer stack per the configuration; use build_model to construct."""

    def __init__(self, config, laplacian, seed):
        laplacian = np.asarray(laplacian, dtype=np.float64)
        m = config.m
        if laplacian.shape != (m, m):
            raise DimensionMismatch(
                f"Laplacian {laplacian.shape} does not match encoded dimension {m}"
            )
        self.config = config
        self.laplacian = laplacian
        rng = np.random.default_rng(seed)
        if config.use_gcn:
            self.input_gcn = GcnLayer(
                config.gcn_order, activation="relu", rng=rng, name="gcn_in"
            )
        else:
            self.input_gcn = None
        enc_in = config.lstm_hidden if config.variant == TIMESERIES else m
        widths = (enc_in,) + config.encoder_widths
        self.encoder = [
            Linear(widths[i], widths[i + 1], activation="relu", rng=rng, name=f"enc{i}")
            for i in range(len(widths) - 1)
        ]
        self.mu_head = Linear(widths[-1], config.latent, rng=rng, name="mu")
        self.logvar_head = Linear(widths[-1], config.latent, rng=rng, name="logvar")
        dec_widths = (config.latent,) + config.encoder_widths[::-1] + (m,)
        self.decoder = []
        for i in range(len(dec_widths) - 1):
            last = i == len(dec_widths) - 2
            # the reconstruction head must reach the negative side of
            # z-scored targets; rectifying it starves the output filter
            # (positive-only input forces degenerate negative weights)
            act = "none" if last else "relu"
            self.decoder.append(
                Linear(dec_widths[i], dec_widths[i + 1], activation=act, rng=rng, name=f"dec{i}")
            )
        if config.use_gcn:
            self.output_gcn = GcnLayer(config.gcn_order, rng=rng, name="gcn_out")
        else:
            self.output_gcn = None
        if config.variant == TIMESERIES:
            self.lstm = Lstm(m, config.lstm_hidden, config.lstm_layers, rng=rng)
        else:
            self.lstm = None
        self.history_ = []

    def parameters(self):
        layers = []
        if self.input_gcn is not None:
            layers.append(self.input_gcn)
        if self.lstm is not None:
            layers.append(self.lstm)
        layers.extend(self.encoder)
        layers.extend([self.mu_head, self.logvar_head])
        layers.extend(self.decoder)
        if self.output_gcn is not None:
            layers.append(self.output_gcn)
        out = []
        for layer in layers:
            out.extend(layer.parameters())
        return out

    def param_tensors(self):
        return [t for _, t in self.parameters()]

    def _embed(self, batch):
        """batch: (n, m) samples or (n, k, m) windows -> encoder input."""
        if self.config.variant == TIMESERIES:
            steps = []
            for t in range(batch.shape[1]):
                x = Tensor(batch[:, t, :])
                if self.input_gcn is not None:
                    x = self.input_gcn.forward_batch(x, self.laplacian)
                steps.append(x)
            return self.lstm(steps).relu()
        x = Tensor(batch)
        if self.input_gcn is not None:
            x = self.input_gcn.forward_batch(x, self.laplacian)
        return x

    def encode_tensors(self, batch):
        h = self._embed(batch)
        for layer in self.encoder:
            h = layer(h)
        mu = self.mu_head(h)
        logvar = self.logvar_head(h)
        sigma = (logvar * 0.5).exp()
        return mu, sigma

    def decode_tensors(self, z):
        h = z
        for layer in self.decoder:
            h = layer(h)
        if self.output_gcn is not None:
            h = self.output_gcn.forward_batch(h, self.laplacian)
        return h


def build_model(config, graph, seed=None):
    """Construct the model against a correlation graph (or a bare Laplacian
    array); initialization is deterministic under the seed."""
    laplacian = getattr(graph, "laplacian", graph)
    return ReconModel(config, laplacian, config.seed if seed is None else seed)


def encode(model, X):
    """Numpy-facing encoder: returns (mu_z, sigma_z) arrays."""
    mu, sigma = model.encode_tensors(np.asarray(X, dtype=np.float64))
    if not (np.all(np.isfinite(mu.data)) and np.all(np.isfinite(sigma.data))):
        raise NonFiniteActivation("encoder produced non-finite latent statistics")
    return mu.data.copy(), sigma.data.copy()


def reparameterize(mu, sigma, rng):
    """z = mu + sigma * eta with eta drawn standard normal."""
    eta = rng.standard_normal(mu.shape)
    if isinstance(mu, Tensor):
        return mu + sigma * Tensor(eta)
    return mu + sigma * eta


def vae_loss(x, x_hat, mu, sigma, kl_weight):
    """Mean squared reconstruction error plus weighted closed-form KL.

    Returns (total, recon_term, kl_term) tensors; with kl_weight 0 the KL
    node is left out of the total entirely, so no gradient flows from it.
    """
    x = x if isinstance(x, Tensor) else Tensor(x)
    diff = x_hat - x
    recon = (diff * diff).sum(axis=1).mean()
    log_var = sigma.log() * 2.0
    kl = ((log_var + 1.0 - mu * mu - sigma * sigma).sum(axis=1) * -0.5).mean()
    if kl_weight == 0.0:
        return recon, recon, kl
    total = recon + kl_weight * kl
    return total, recon, kl


def _training_arrays(train):
    if isinstance(train, WindowedSeries):
        return train.windows, train.targets
    values = getattr(train, "values", None)
    if values is None:
        values = np.asarray(train, dtype=np.float64)
    return values, values


def train_recon(model, train, config=None):
    """Mini-batch Adam training; history rows are (epoch, total, recon, kl)."""
    config = config or model.config
    inputs, targets = _training_arrays(train)
    n = inputs.shape[0]
    if n == 0:
        raise TooFewSamples("training set is empty")
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(11,)))
    opt = Adam(model.param_tensors(), lr=config.lr)
    history = []
    for epoch in range(config.epochs):
        weight = config.kl_weight
        if config.kl_warmup > 0:
            # linear ramp: reconstruction settles before the prior bites
            weight *= min(1.0, (epoch + 1) / config.kl_warmup)
        perm = rng.permutation(n)
        sums = np.zeros(3)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            mu, sigma = model.encode_tensors(inputs[idx])
            z = reparameterize(mu, sigma, rng)
            x_hat = model.decode_tensors(z)
            total, recon, kl = vae_loss(targets[idx], x_hat, mu, sigma, weight)
            if not np.isfinite(total.data):
                raise NonFiniteLoss(
                    f"non-finite loss at epoch {epoch}, batch start {start}"
                )
            opt.zero_grad()
            total.backward()
            opt.step()
            sums += idx.size * np.array(
                [float(total.data), float(recon.data), float(kl.data)]
            )
        history.append((epoch, *(sums / n)))
    model.history_ = history
    return model


def anomaly_measures(model, data):
    """Deterministic measures: decode from the latent mean, never a sample.

    `data` is an EncodedMatrix, array batch, or WindowedSeries (time-series
    variant); d compares the reconstruction against the sample itself or the
    step-after-window target respectively.
    """
    inputs, targets = _training_arrays(data)
    mu, sigma = model.encode_tensors(inputs)
    x_hat = model.decode_tensors(mu)
    d = (targets - x_hat.data) ** 2
    if isinstance(data, WindowedSeries):
        ids, labels = data.target_ids, data.target_labels
    else:
        ids = getattr(data, "ids", None)
        labels = getattr(data, "labels", None)
    return AnomalyMeasures(
        d=d,
        mu_z=mu.data.copy(),
        sigma_z=sigma.data.copy(),
        ids=None if ids is None else np.asarray(ids),
        labels=None if labels is None else np.asarray(labels),
    )


def save_history_csv(history, path):
    lines = ["epoch,total,recon,kl"]
    for epoch, total, recon, kl in history:
        lines.append(f"{epoch},{float(total)!r},{float(recon)!r},{float(kl)!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def save_measures_csv(measures, path):
    m = measures.d.shape[1]
    k = measures.sigma_z.shape[1]
    header = ["id", "label", "d_norm", "sigma_norm"]
    header += [f"d{j}" for j in range(m)]
    header += [f"mu{j}" for j in range(k)]
    header += [f"sigma{j}" for j in range(k)]
    lines = [",".join(header)]
    ids = measures.ids
    labels = measures.labels
    d_norm = measures.d_norm
    s_norm = measures.sigma_norm
    for i in range(measures.n_samples):
        row = [
            str(int(ids[i])) if ids is not None else str(i),
            "" if labels is None else str(int(labels[i])),
            repr(float(d_norm[i])),
            repr(float(s_norm[i])),
        ]
        row += [repr(float(v)) for v in measures.d[i]]
        row += [repr(float(v)) for v in measures.mu_z[i]]
        row += [repr(float(v)) for v in measures.sigma_z[i]]
        lines.append(",".join(row))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_measures_csv(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    header = lines[0].split(",")
    m = sum(1 for h in header if h.startswith("d") and h[1:].isdigit())
    k = sum(1 for h in header if h.startswith("mu"))
    ids, labels, ds, mus, sigmas = [], [], [], [], []
    has_labels = True
    for ln in lines[1:]:
        parts = ln.split(",")
        ids.append(int(parts[0]))
        if parts[1] == "":
            has_labels = False
        else:
            labels.append(bool(int(parts[1])))
        base = 4
        ds.append([float(v) for v in parts[base : base + m]])
        mus.append([float(v) for v in parts[base + m : base + m + k]])
        sigmas.append([float(v) for v in parts[base + m + k : base + m + 2 * k]])
    return AnomalyMeasures(
        d=np.array(ds),
        mu_z=np.array(mus),
        sigma_z=np.array(sigmas),
        ids=np.array(ids, dtype=np.int64),
        labels=np.array(labels, dtype=bool) if has_labels else None,
    )


CHECKPOINT_HEADER = "reconckpt v1"


def save_recon_checkpoint(model, path):
    """Config header plus the bit-exact tensor dump, one file."""
    cfg = asdict(model.config)
    body = dump_arrays(model.parameters())
    lap = dump_arrays([("laplacian", model.laplacian)])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(CHECKPOINT_HEADER + "\n")
        fh.write("config " + json.dumps(cfg, sort_keys=True) + "\n")
        fh.write(lap)
        fh.write(body)


def load_recon_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != CHECKPOINT_HEADER:
        raise ConfigError(f"{path}: not a reconstruction checkpoint")
    if not lines[1].startswith("config "):
        raise ConfigError(f"{path}: missing config header")
    cfg = json.loads(lines[1][len("config ") :])
    cfg["encoder_widths"] = tuple(cfg["encoder_widths"])
    config = ReconConfig(**cfg)
    # the laplacian dump holds exactly one array (header + one data line)
    lap_text = "\n".join(lines[2:5])
    laplacian = parse_arrays(lap_text, source=str(path))["laplacian"]
    arrays = parse_arrays("\n".join(lines[5:]), source=str(path))
    model = ReconModel(config, laplacian, seed=config.seed)
    named = dict(model.parameters())
    if set(named) != set(arrays):
        raise ConfigError(f"{path}: checkpoint parameters do not match the config")
    for name, tensor in named.items():
        if tensor.data.shape != arrays[name].shape:
            raise ConfigError(f"{path}: shape mismatch for {name}")
        tensor.data = arrays[name]
    return model
