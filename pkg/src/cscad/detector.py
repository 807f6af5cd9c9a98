"""One-object API over the whole pipeline.

CollectiveAnomalyDetector takes a raw mixed-type table and runs every step
in memory: encoding, correlation mining, reconstruction training, measure
extraction, self-labeling, and the discriminating network. The staged file
pipeline (cscad CLI) is the same computation with artifacts on disk.
"""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .dataset import MixedTypeEncoder, make_windows
from .disc import (
    COMBINE_MAX,
    SelfLabelingDiscriminator,
    predict as disc_predict,
    predict_labels as disc_predict_labels,
)
from .graph import THRESHOLD, CorrelationGraphMiner
from .recon import ReconConfig, anomaly_measures, build_model, train_recon


class CollectiveAnomalyDetector(BaseEstimator):
    """Detect samples that break the dataset's correlation structure.

    Fitted attributes: encoder_, emi_matrix_, graph_, recon_model_,
    measures_, selection_, disc_model_, and labels_ (the self-labeled +
    discriminated verdict for the training table itself).
    """

    def __init__(
        self,
        schema=None,
        mode="static",
        window_k=5,
        emi_w=5,
        adjacency_mode=THRESHOLD,
        tau=None,
        k=None,
        weighted=True,
        gcn_order=2,
        latent=5,
        kl_weight=1.0,
        kl_warmup=0,
        recon_epochs=100,
        recon_batch_size=256,
        recon_lr=1e-3,
        use_gcn=True,
        lstm_hidden=None,
        lstm_layers=2,
        disc_epochs=100,
        disc_batch_size=256,
        disc_lr=1e-3,
        use_sigma=True,
        positive_fraction=0.5,
        negative_fraction=0.05,
        combine_rule=COMBINE_MAX,
        known_anomaly_ids=None,
        seed=0,
    ):
        self.schema = schema
        self.mode = mode
        self.window_k = window_k
        self.emi_w = emi_w
        self.adjacency_mode = adjacency_mode
        self.tau = tau
        self.k = k
        self.weighted = weighted
        self.gcn_order = gcn_order
        self.latent = latent
        self.kl_weight = kl_weight
        self.kl_warmup = kl_warmup
        self.recon_epochs = recon_epochs
        self.recon_batch_size = recon_batch_size
        self.recon_lr = recon_lr
        self.use_gcn = use_gcn
        self.lstm_hidden = lstm_hidden
        self.lstm_layers = lstm_layers
        self.disc_epochs = disc_epochs
        self.disc_batch_size = disc_batch_size
        self.disc_lr = disc_lr
        self.use_sigma = use_sigma
        self.positive_fraction = positive_fraction
        self.negative_fraction = negative_fraction
        self.combine_rule = combine_rule
        self.known_anomaly_ids = known_anomaly_ids
        self.seed = seed

    def _model_input(self, matrix):
        if self.mode == "timeseries":
            return make_windows(matrix, self.window_k)
        return matrix

    def fit(self, table, y=None):
        self.encoder_ = MixedTypeEncoder(self.schema).fit(table)
        matrix = self.encoder_.transform(table)
        miner = CorrelationGraphMiner(
            self.schema,
            mode=self.adjacency_mode,
            tau=self.tau,
            k=self.k,
            weighted=self.weighted,
            window=self.emi_w,
            is_timeseries=self.mode == "timeseries",
            seed=self.seed,
        ).fit(matrix)
        self.emi_matrix_ = miner.emi_matrix_
        self.graph_ = miner.graph_
        recon_config = ReconConfig(
            m=matrix.width,
            gcn_order=self.gcn_order,
            latent=self.latent,
            kl_weight=self.kl_weight,
            kl_warmup=self.kl_warmup,
            epochs=self.recon_epochs,
            batch_size=self.recon_batch_size,
            lr=self.recon_lr,
            seed=self.seed,
            variant=self.mode,
            window=self.window_k,
            lstm_hidden=self.lstm_hidden,
            lstm_layers=self.lstm_layers,
            use_gcn=self.use_gcn,
        )
        self.recon_model_ = build_model(recon_config, self.graph_.laplacian)
        train_recon(self.recon_model_, self._model_input(matrix), recon_config)
        self.measures_ = anomaly_measures(self.recon_model_, self._model_input(matrix))
        disc = SelfLabelingDiscriminator(
            positive_fraction=self.positive_fraction,
            negative_fraction=self.negative_fraction,
            combine_rule=self.combine_rule,
            known_anomaly_ids=self.known_anomaly_ids,
            use_sigma=self.use_sigma,
            epochs=self.disc_epochs,
            batch_size=self.disc_batch_size,
            lr=self.disc_lr,
            seed=self.seed,
        ).fit(self.measures_)
        self.selection_ = disc.selection_
        self.disc_model_ = disc.model_
        self.labels_ = disc_predict_labels(self.disc_model_, self.measures_)
        return self

    def _measures_for(self, table):
        check_is_fitted(self, "disc_model_")
        if table is None:
            return self.measures_
        matrix = self.encoder_.transform(table)
        return anomaly_measures(self.recon_model_, self._model_input(matrix))

    def predict_proba(self, table=None):
        """Anomaly probability per sample; defaults to the fitted table."""
        measures = self._measures_for(table)
        return disc_predict(self.disc_model_, measures)

    def predict(self, table=None):
        measures = self._measures_for(table)
        return disc_predict_labels(self.disc_model_, measures)

    def anomalous_degree(self, table=None):
        """Per-sample (||d||, ||sigma_z||) pairs backing the verdicts."""
        measures = self._measures_for(table)
        return np.column_stack([measures.d_norm, measures.sigma_norm])
