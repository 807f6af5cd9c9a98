"""Staged pipeline: mine the correlation graph, train the reconstruction
and discriminating networks, detect, and evaluate.

Every stage writes its artifacts atomically (write to a temp name, then
rename) and records a hash of the stage-scoped configuration in
manifest.json. A stage consuming upstream artifacts verifies the stored
hash against the current configuration first, so artifacts from an edited
or reseeded config are rejected instead of silently mixed. Timing numbers
go to a separate timings.json so every other artifact is byte-identical
across reruns of the same config and seed.
"""

import hashlib
import json
import os
import time
from dataclasses import dataclass, field

from .dataset import MixedTypeEncoder, load_csv, make_windows
from .disc import (
    COMBINE_D_ONLY,
    COMBINE_MAX,
    DiscConfig,
    DiscModel,
    LabelingPolicy,
    load_disc_checkpoint,
    load_predictions_csv,
    predict,
    save_disc_checkpoint,
    save_predictions_csv,
    save_selection_csv,
    select_training_samples,
    train_disc,
)
from .emi import build_emi_matrix, save_edge_list, save_emi_csv
from .exceptions import ConfigError, CscadError, StageError, StaleArtifact
from .graph import (
    THRESHOLD,
    AdjacencyPolicy,
    build_graph,
    load_adjacency_csv,
    normalized_laplacian,
    save_adjacency_csv,
    save_graph_edge_list,
)
from .metrics import (
    evaluate_predictions,
    save_report_json,
    save_report_text,
    save_timings_json,
)
from .recon import (
    ReconConfig,
    anomaly_measures,
    build_model,
    load_recon_checkpoint,
    save_history_csv,
    save_recon_checkpoint,
    train_recon,
)
from .schema import load_schema

STATIC = "static"
TIMESERIES = "timeseries"

STAGE_MINE = "mine"
STAGE_TRAIN_RECON = "train-recon"
STAGE_TRAIN_DISC = "train-disc"
STAGE_DETECT = "detect"
STAGE_EVALUATE = "evaluate"
STAGE_ORDER = (STAGE_MINE, STAGE_TRAIN_RECON, STAGE_TRAIN_DISC, STAGE_DETECT, STAGE_EVALUATE)

MANIFEST_NAME = "manifest.json"


@dataclass
class PipelineConfig:
    dataset: str
    schema_path: str
    out_dir: str
    mode: str = STATIC
    window_k: int = 5
    seed: int = 0
    emi_w: int = 5
    emi_fit_cap: int = 2000
    emi_eval_cap: int = 4000
    adjacency_mode: str = THRESHOLD
    adjacency_tau: float = None
    adjacency_k: int = None
    adjacency_weighted: bool = True
    recon_epochs: int = 100
    recon_batch_size: int = 256
    recon_lr: float = 1e-3
    kl_weight: float = 1.0
    kl_warmup: int = 0
    gcn_order: int = 2
    latent: int = 5
    use_gcn: bool = True
    lstm_hidden: int = None
    lstm_layers: int = 2
    disc_epochs: int = 100
    disc_batch_size: int = 256
    disc_lr: float = 1e-3
    use_sigma: bool = True
    positive_fraction: float = 0.5
    negative_fraction: float = 0.05
    combine_rule: str = COMBINE_MAX
    labels_file: str = None

    def __post_init__(self):
        if self.mode not in (STATIC, TIMESERIES):
            raise ConfigError(f"unknown mode {self.mode!r}")

    def validate_files(self):
        for path in (self.dataset, self.schema_path):
            if not os.path.isfile(path):
                raise ConfigError(f"referenced file does not exist: {path}")
        if self.labels_file is not None and not os.path.isfile(self.labels_file):
            raise ConfigError(f"referenced file does not exist: {self.labels_file}")


_SECTION_KEYS = {
    "emi": {"w": "emi_w", "fit_cap": "emi_fit_cap", "eval_cap": "emi_eval_cap"},
    "adjacency": {
        "mode": "adjacency_mode",
        "tau": "adjacency_tau",
        "k": "adjacency_k",
        "weighted": "adjacency_weighted",
    },
    "recon": {
        "epochs": "recon_epochs",
        "batch_size": "recon_batch_size",
        "lr": "recon_lr",
        "kl_weight": "kl_weight",
        "kl_warmup": "kl_warmup",
        "gcn_order": "gcn_order",
        "latent": "latent",
        "use_gcn": "use_gcn",
        "lstm_hidden": "lstm_hidden",
        "lstm_layers": "lstm_layers",
    },
    "disc": {
        "epochs": "disc_epochs",
        "batch_size": "disc_batch_size",
        "lr": "disc_lr",
        "use_sigma": "use_sigma",
    },
    "labeling": {
        "positive_fraction": "positive_fraction",
        "negative_fraction": "negative_fraction",
        "combine_rule": "combine_rule",
        "labels_file": "labels_file",
    },
}

_TOP_KEYS = {
    "dataset": "dataset",
    "schema": "schema_path",
    "out_dir": "out_dir",
    "mode": "mode",
    "window_k": "window_k",
    "seed": "seed",
}


def config_from_dict(payload):
    kwargs = {}
    for key, value in payload.items():
        if key in _TOP_KEYS:
            kwargs[_TOP_KEYS[key]] = value
        elif key in _SECTION_KEYS:
            section = _SECTION_KEYS[key]
            for sub, subvalue in value.items():
                if sub not in section:
                    raise ConfigError(f"unknown config key {key}.{sub}")
                kwargs[section[sub]] = subvalue
        else:
            raise ConfigError(f"unknown config key {key!r}")
    missing = [k for k in ("dataset", "schema", "out_dir") if _TOP_KEYS.get(k) not in kwargs]
    if missing:
        raise ConfigError(f"config is missing required keys: {missing}")
    return PipelineConfig(**kwargs)


def load_config(path):
    if not os.path.isfile(path):
        raise ConfigError(f"config file does not exist: {path}")
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from None
    config = config_from_dict(payload)
    config.validate_files()
    return config


# -- stage-scoped hashing ----------------------------------------------------


def _file_digest(path):
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        digest.update(fh.read())
    return digest.hexdigest()


def stage_scope(config, stage):
    """The config subset that determines a stage's output, cumulatively."""
    scope = {
        "dataset": _file_digest(config.dataset),
        "schema": _file_digest(config.schema_path),
        "mode": config.mode,
        "seed": config.seed,
        "emi": [config.emi_w, config.emi_fit_cap, config.emi_eval_cap],
        "adjacency": [
            config.adjacency_mode,
            config.adjacency_tau,
            config.adjacency_k,
            config.adjacency_weighted,
        ],
    }
    if stage == STAGE_MINE:
        return scope
    scope["recon"] = [
        config.window_k,
        config.recon_epochs,
        config.recon_batch_size,
        config.recon_lr,
        config.kl_weight,
        config.kl_warmup,
        config.gcn_order,
        config.latent,
        config.use_gcn,
        config.lstm_hidden,
        config.lstm_layers,
    ]
    if stage == STAGE_TRAIN_RECON:
        return scope
    scope["disc"] = [
        config.disc_epochs,
        config.disc_batch_size,
        config.disc_lr,
        config.use_sigma,
        config.positive_fraction,
        config.negative_fraction,
        config.combine_rule,
        _file_digest(config.labels_file) if config.labels_file else None,
    ]
    return scope


def stage_hash(config, stage):
    canonical = json.dumps(stage_scope(config, stage), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _manifest_path(config):
    return os.path.join(config.out_dir, MANIFEST_NAME)


def load_manifest(config):
    path = _manifest_path(config)
    if not os.path.isfile(path):
        return {"stages": {}}
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _record_stage(config, stage, artifacts):
    manifest = load_manifest(config)
    manifest["stages"][stage] = {
        "hash": stage_hash(config, stage),
        "artifacts": sorted(artifacts),
    }
    # downstream artifacts are now stale; drop their records
    keep = STAGE_ORDER[: STAGE_ORDER.index(stage) + 1]
    manifest["stages"] = {s: manifest["stages"][s] for s in keep if s in manifest["stages"]}
    _atomic_write_text(
        _manifest_path(config), json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )


def stage_is_current(config, stage):
    manifest = load_manifest(config)
    entry = manifest["stages"].get(stage)
    if entry is None or entry["hash"] != stage_hash(config, stage):
        return False
    return all(
        os.path.isfile(os.path.join(config.out_dir, name)) for name in entry["artifacts"]
    )


def require_stage(config, stage, consumer):
    if not stage_is_current(config, stage):
        raise StaleArtifact(
            f"stage {consumer!r} needs up-to-date {stage!r} artifacts; "
            f"run `cscad {stage}` with this config first"
        )


# -- atomic artifact writes --------------------------------------------------


def _atomic_write_text(path, text):
    tmp = str(path) + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _atomic(path, writer):
    """Run writer against a temp path, then rename over the target."""
    tmp = str(path) + ".tmp"
    writer(tmp)
    os.replace(tmp, path)


# -- shared loading ----------------------------------------------------------


def _load_encoded(config, dataset_path=None):
    schema = load_schema(config.schema_path)
    table = load_csv(config.dataset, schema)
    encoder = MixedTypeEncoder(schema).fit(table)
    if dataset_path is None or dataset_path == config.dataset:
        matrix = encoder.transform(table)
    else:
        # detect on held-out data reuses the training normalization stats
        matrix = encoder.transform(load_csv(dataset_path, schema))
    return schema, matrix


def _model_data(config, matrix):
    if config.mode == TIMESERIES:
        return make_windows(matrix, config.window_k)
    return matrix


def _recon_config(config, m):
    return ReconConfig(
        m=m,
        gcn_order=config.gcn_order,
        latent=config.latent,
        kl_weight=config.kl_weight,
        kl_warmup=config.kl_warmup,
        epochs=config.recon_epochs,
        batch_size=config.recon_batch_size,
        lr=config.recon_lr,
        seed=config.seed,
        variant=config.mode,
        window=config.window_k,
        lstm_hidden=config.lstm_hidden,
        lstm_layers=config.lstm_layers,
        use_gcn=config.use_gcn,
    )


def _read_known_ids(path):
    ids = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                ids.append(int(line))
    return tuple(ids)


# -- stages -------------------------------------------------------------------


def run_mine(config):
    os.makedirs(config.out_dir, exist_ok=True)
    schema, matrix = _load_encoded(config)
    emi = build_emi_matrix(
        matrix,
        schema,
        w=config.emi_w,
        is_timeseries=config.mode == TIMESERIES,
        seed=config.seed,
        fit_cap=config.emi_fit_cap,
        eval_cap=config.emi_eval_cap,
    )
    policy = AdjacencyPolicy(
        config.adjacency_mode,
        tau=config.adjacency_tau,
        k=config.adjacency_k,
        weighted=config.adjacency_weighted,
    )
    graph = build_graph(emi, matrix.feature_map, policy)
    out = config.out_dir
    _atomic(os.path.join(out, "emi.csv"), lambda p: save_emi_csv(emi, p))
    _atomic(os.path.join(out, "emi-edges.csv"), lambda p: save_edge_list(emi, p))
    _atomic(os.path.join(out, "adjacency.csv"), lambda p: save_adjacency_csv(graph, p))
    _atomic(os.path.join(out, "graph-edges.csv"), lambda p: save_graph_edge_list(graph, p))
    _record_stage(
        config, STAGE_MINE, ["emi.csv", "emi-edges.csv", "adjacency.csv", "graph-edges.csv"]
    )
    return graph


def run_train_recon(config):
    if not stage_is_current(config, STAGE_MINE):
        run_mine(config)
    schema, matrix = _load_encoded(config)
    _, adjacency = load_adjacency_csv(os.path.join(config.out_dir, "adjacency.csv"))
    laplacian = normalized_laplacian(adjacency)
    rc = _recon_config(config, matrix.width)
    model = build_model(rc, laplacian)
    data = _model_data(config, matrix)
    train_recon(model, data, rc)
    out = config.out_dir
    _atomic(os.path.join(out, "recon.ckpt"), lambda p: save_recon_checkpoint(model, p))
    _atomic(
        os.path.join(out, "recon-history.csv"),
        lambda p: save_history_csv(model.history_, p),
    )
    _record_stage(config, STAGE_TRAIN_RECON, ["recon.ckpt", "recon-history.csv"])
    return model


def run_train_disc(config):
    require_stage(config, STAGE_TRAIN_RECON, STAGE_TRAIN_DISC)
    recon_model = load_recon_checkpoint(os.path.join(config.out_dir, "recon.ckpt"))
    schema, matrix = _load_encoded(config)
    measures = anomaly_measures(recon_model, _model_data(config, matrix))
    known = _read_known_ids(config.labels_file) if config.labels_file else None
    policy = LabelingPolicy(
        positive_fraction=config.positive_fraction,
        negative_fraction=config.negative_fraction,
        combine_rule=config.combine_rule if config.use_sigma else COMBINE_D_ONLY,
        known_anomaly_ids=known,
    )
    selection = select_training_samples(measures, policy)
    dc = DiscConfig(
        m=measures.d.shape[1],
        m_sigma=measures.sigma_z.shape[1],
        use_sigma=config.use_sigma,
        epochs=config.disc_epochs,
        batch_size=config.disc_batch_size,
        lr=config.disc_lr,
        seed=config.seed,
    )
    disc_model = train_disc(DiscModel(dc, config.seed), measures, selection, dc)
    out = config.out_dir
    _atomic(os.path.join(out, "disc.ckpt"), lambda p: save_disc_checkpoint(disc_model, p))
    _atomic(os.path.join(out, "selection.csv"), lambda p: save_selection_csv(selection, p))
    _record_stage(config, STAGE_TRAIN_DISC, ["disc.ckpt", "selection.csv"])
    return disc_model


def run_detect(config, input_path=None):
    require_stage(config, STAGE_TRAIN_DISC, STAGE_DETECT)
    recon_model = load_recon_checkpoint(os.path.join(config.out_dir, "recon.ckpt"))
    disc_model = load_disc_checkpoint(os.path.join(config.out_dir, "disc.ckpt"))
    schema, matrix = _load_encoded(config, dataset_path=input_path)
    measures = anomaly_measures(recon_model, _model_data(config, matrix))
    probabilities = predict(disc_model, measures)
    ids = measures.ids
    path = os.path.join(config.out_dir, "predictions.csv")
    _atomic(
        path,
        lambda p: save_predictions_csv(
            ids, probabilities, measures.d_norm, measures.sigma_norm, p
        ),
    )
    _record_stage(config, STAGE_DETECT, ["predictions.csv"])
    return probabilities


def run_evaluate(config):
    require_stage(config, STAGE_DETECT, STAGE_EVALUATE)
    ids, probabilities, labels = load_predictions_csv(
        os.path.join(config.out_dir, "predictions.csv")
    )
    schema, matrix = _load_encoded(config)
    if matrix.labels is None:
        raise ConfigError("dataset schema declares no label column to evaluate against")
    truth = matrix.labels[ids]
    report = evaluate_predictions(ids, labels, ids, truth)
    out = config.out_dir
    _atomic(os.path.join(out, "report.json"), lambda p: save_report_json(report, p))
    _atomic(os.path.join(out, "report.txt"), lambda p: save_report_text(report, p))
    _record_stage(config, STAGE_EVALUATE, ["report.json", "report.txt"])
    return report


_STAGE_RUNNERS = {
    STAGE_MINE: run_mine,
    STAGE_TRAIN_RECON: run_train_recon,
    STAGE_TRAIN_DISC: run_train_disc,
    STAGE_DETECT: run_detect,
    STAGE_EVALUATE: run_evaluate,
}


def run_all(config):
    """All stages in order; wall-clock per stage lands in timings.json."""
    os.makedirs(config.out_dir, exist_ok=True)
    timings = {}
    result = None
    for stage in STAGE_ORDER:
        started = time.perf_counter()
        try:
            result = _STAGE_RUNNERS[stage](config)
        except CscadError as exc:
            raise StageError(stage, exc) from exc
        timings[stage] = time.perf_counter() - started
    save_timings_json(timings, os.path.join(config.out_dir, "timings.json"))
    return result
