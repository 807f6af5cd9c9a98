"""Collective anomaly detection over mixed-type tabular and time-series data.

The pipeline mines pairwise feature correlations with an extended mutual
information estimate, builds a correlation graph and its normalized
Laplacian, trains a graph-convolutional variational autoencoder whose
reconstruction errors and latent scales act as per-feature anomalous-degree
measures, and finally trains a discriminating network on self-labeled
samples to separate anomalies from normal points.
"""

__version__ = "0.1.0"

from .detector import CollectiveAnomalyDetector
from .disc import SelfLabelingDiscriminator
from .graph import CorrelationGraphMiner

__all__ = [
    "__version__",
    "CollectiveAnomalyDetector",
    "CorrelationGraphMiner",
    "SelfLabelingDiscriminator",
]
