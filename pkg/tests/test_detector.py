"""Composite estimator: the whole pipeline behind fit/predict."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from cscad import CollectiveAnomalyDetector
from cscad.dataset import load_csv
from cscad.generators import write_static_fixture, write_timeseries_fixture
from cscad.schema import load_schema


@pytest.fixture(scope="module")
def static_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("det")
    write_static_fixture(str(root), n_samples=300, seed=5)
    schema = load_schema(str(root / "tabular.schema"))
    table = load_csv(str(root / "tabular.csv"), schema)
    return schema, table


@pytest.fixture(scope="module")
def fitted(static_data):
    schema, table = static_data
    det = CollectiveAnomalyDetector(
        schema=schema,
        recon_epochs=4,
        recon_batch_size=64,
        disc_epochs=8,
        disc_batch_size=64,
        seed=0,
    )
    return det.fit(table)


def test_unfitted_predict_raises(static_data):
    schema, table = static_data
    det = CollectiveAnomalyDetector(schema=schema)
    with pytest.raises(NotFittedError):
        det.predict(table)
    with pytest.raises(NotFittedError):
        det.predict_proba(table)


def test_fit_exposes_every_pipeline_product(fitted, static_data):
    _, table = static_data
    width = fitted.encoder_.transform(table).width
    assert fitted.emi_matrix_.values.shape[0] == len(fitted.schema.columns)
    assert fitted.graph_.laplacian.shape == (width, width)
    assert fitted.recon_model_.config.m == width
    assert fitted.measures_.d.shape == (table.n_rows, width)
    assert fitted.selection_.positive_ids.size > 0
    assert fitted.labels_.shape == (table.n_rows,)


def test_predict_defaults_to_fitted_table(fitted):
    np.testing.assert_array_equal(fitted.predict(), fitted.labels_)


def test_predict_proba_matches_threshold(fitted, static_data):
    _, table = static_data
    proba = fitted.predict_proba(table)
    labels = fitted.predict(table)
    assert proba.shape == (table.n_rows,)
    assert np.all((proba >= 0) & (proba <= 1))
    np.testing.assert_array_equal(labels, proba > 0.5)


def test_anomalous_degree_is_norm_pairs(fitted, static_data):
    _, table = static_data
    deg = fitted.anomalous_degree()
    assert deg.shape == (table.n_rows, 2)
    np.testing.assert_allclose(deg[:, 0], fitted.measures_.d_norm)
    np.testing.assert_allclose(deg[:, 1], fitted.measures_.sigma_norm)


def test_predict_on_held_out_rows(fitted, static_data):
    _, table = static_data
    subset = table.subset(list(range(50)))
    proba = fitted.predict_proba(subset)
    assert proba.shape == (50,)


def test_seeded_refit_is_deterministic(static_data):
    schema, table = static_data
    kwargs = dict(
        schema=schema,
        recon_epochs=3,
        recon_batch_size=64,
        disc_epochs=5,
        disc_batch_size=64,
        seed=11,
    )
    a = CollectiveAnomalyDetector(**kwargs).fit(table)
    b = CollectiveAnomalyDetector(**kwargs).fit(table)
    np.testing.assert_array_equal(a.predict_proba(), b.predict_proba())


def test_sklearn_clone_round_trip(static_data):
    schema, _ = static_data
    det = CollectiveAnomalyDetector(schema=schema, seed=4, negative_fraction=0.1)
    twin = clone(det)
    assert twin.get_params() == det.get_params()


def test_timeseries_mode_scores_targets_only(tmp_path):
    write_timeseries_fixture(str(tmp_path), n_steps=400, seed=7)
    schema = load_schema(str(tmp_path / "timeseries.schema"))
    table = load_csv(str(tmp_path / "timeseries.csv"), schema)
    det = CollectiveAnomalyDetector(
        schema=schema,
        mode="timeseries",
        window_k=5,
        recon_epochs=3,
        recon_batch_size=64,
        disc_epochs=5,
        disc_batch_size=64,
        seed=0,
    ).fit(table)
    # one verdict per window target, none for the first window_k rows
    assert det.labels_.shape == (400 - 5,)
    assert det.measures_.ids.min() == 5
