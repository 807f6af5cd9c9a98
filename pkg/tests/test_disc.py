import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cscad.disc import (
    COMBINE_D_ONLY,
    COMBINE_SUM,
    GROUND_TRUTH,
    ROLE_NEGATIVE,
    SELF_LABELED,
    DiscConfig,
    DiscModel,
    LabelingPolicy,
    SelfLabelingDiscriminator,
    build_disc,
    load_disc_checkpoint,
    load_predictions_csv,
    load_selection_csv,
    predict,
    predict_labels,
    save_disc_checkpoint,
    save_predictions_csv,
    save_selection_csv,
    select_training_samples,
    train_disc,
)
from cscad.exceptions import (
    ConfigError,
    EmptyClass,
    IdMismatch,
    TooFewSamples,
)
from cscad.recon import AnomalyMeasures


def measures_from_norms(d_norms, sigma_norms=None, ids=None):
    d_norms = np.asarray(d_norms, dtype=np.float64)
    if sigma_norms is None:
        sigma_norms = d_norms
    sigma_norms = np.asarray(sigma_norms, dtype=np.float64)
    return AnomalyMeasures(
        d=d_norms[:, None],
        mu_z=np.zeros((len(d_norms), 1)),
        sigma_z=sigma_norms[:, None],
        ids=np.arange(len(d_norms)) if ids is None else np.asarray(ids),
    )


def toy_measures(rng, n_near, n_far, m=8, k=5):
    """Positives cluster near the origin, negatives sit far out."""
    d = np.vstack(
        [
            0.1 * np.abs(rng.normal(size=(n_near, m))),
            5.0 + np.abs(rng.normal(size=(n_far, m))),
        ]
    )
    sigma = np.vstack(
        [
            0.5 + 0.05 * np.abs(rng.normal(size=(n_near, k))),
            3.0 + np.abs(rng.normal(size=(n_far, k))),
        ]
    )
    return AnomalyMeasures(
        d=d, mu_z=np.zeros((n_near + n_far, k)), sigma_z=sigma,
        ids=np.arange(n_near + n_far),
    )


# -- policy ---------------------------------------------------------------


def test_policy_validation():
    with pytest.raises(ConfigError):
        LabelingPolicy(negative_fraction=0.0)
    with pytest.raises(ConfigError):
        LabelingPolicy(positive_fraction=0.7, negative_fraction=0.4)
    with pytest.raises(ConfigError):
        LabelingPolicy(combine_rule="median")


# -- selection ------------------------------------------------------------


def test_selection_hand_case():
    norms = np.arange(1.0, 9.0)
    sel = select_training_samples(
        measures_from_norms(norms), LabelingPolicy(negative_fraction=0.25)
    )
    assert sorted(sel.positive_ids) == [0, 1, 2, 3]
    assert sorted(sel.negative_ids) == [6, 7]
    assert sel.provenance == [SELF_LABELED, SELF_LABELED]


def test_selection_all_ties_uses_ids():
    sel = select_training_samples(
        measures_from_norms(np.ones(10)), LabelingPolicy(negative_fraction=0.2)
    )
    assert sorted(sel.positive_ids) == [0, 1, 2, 3, 4]
    assert sorted(sel.negative_ids) == [8, 9]


def test_selection_max_rule_takes_worst_indicator():
    # sample 5: tiny reconstruction error but the largest sigma
    d = np.array([1.0, 2, 3, 4, 5, 0.5, 6, 7, 8, 9])
    s = np.array([1.0, 2, 3, 4, 5, 99.0, 6, 7, 8, 9])
    sel = select_training_samples(
        measures_from_norms(d, s), LabelingPolicy(negative_fraction=0.2)
    )
    # ids 5 and 9 share the top combined rank (10); both are selected
    assert sorted(sel.negative_ids) == [5, 9]


def test_selection_sum_and_d_only_rules():
    d = np.array([1.0, 2, 3, 4, 5, 0.5, 6, 7, 8, 9])
    s = np.array([1.0, 2, 3, 4, 5, 99.0, 6, 7, 8, 9])
    sel_sum = select_training_samples(
        measures_from_norms(d, s),
        LabelingPolicy(negative_fraction=0.1, combine_rule=COMBINE_SUM),
    )
    assert list(sel_sum.negative_ids) == [9]
    sel_d = select_training_samples(
        measures_from_norms(d, s),
        LabelingPolicy(negative_fraction=0.1, combine_rule=COMBINE_D_ONLY),
    )
    assert list(sel_d.negative_ids) == [9]


def test_selection_too_few_samples():
    with pytest.raises(TooFewSamples):
        select_training_samples(
            measures_from_norms(np.arange(4.0)), LabelingPolicy(negative_fraction=0.1)
        )


def test_selection_roles_cover_every_sample():
    sel = select_training_samples(
        measures_from_norms(np.arange(20.0)), LabelingPolicy(negative_fraction=0.1)
    )
    assert len(sel.roles) == 20
    assert sel.roles.count("positive") == 10
    assert sel.roles.count("negative") == 2
    assert sel.roles.count("excluded") == 8


@settings(max_examples=60, deadline=None)
@given(
    st.integers(min_value=10, max_value=120),
    st.floats(min_value=0.01, max_value=0.3),
    st.integers(min_value=0, max_value=2**31),
)
def test_selection_sizes_disjoint_property(n, p, seed):
    rng = np.random.default_rng(seed)
    sel = None
    try:
        sel = select_training_samples(
            measures_from_norms(rng.random(n), rng.random(n)),
            LabelingPolicy(negative_fraction=p),
        )
    except TooFewSamples:
        assert int(np.floor(p * n)) < 1
        return
    assert len(sel.positive_ids) == int(np.floor(0.5 * n))
    assert len(sel.negative_ids) == int(np.floor(p * n))
    assert not set(sel.positive_ids) & set(sel.negative_ids)


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=0, max_value=2**31))
def test_selection_monotone_in_both_norms(seed):
    rng = np.random.default_rng(seed)
    n = 40
    d = rng.random(n)
    s = rng.random(n)
    policy = LabelingPolicy(negative_fraction=0.1)
    sel = select_training_samples(measures_from_norms(d, s), policy)
    victim = int(sel.negative_ids[0])
    d2, s2 = d.copy(), s.copy()
    d2[victim] = d.max() + 1.0
    s2[victim] = s.max() + 1.0
    sel2 = select_training_samples(measures_from_norms(d2, s2), policy)
    assert victim not in sel2.positive_ids


def test_injection_replaces_self_labeled():
    norms = np.arange(40.0)
    policy = LabelingPolicy(negative_fraction=0.1, known_anomaly_ids=(3, 17))
    sel = select_training_samples(measures_from_norms(norms), policy)
    assert len(sel.negative_ids) == 4
    assert set((3, 17)) <= set(sel.negative_ids)
    assert sel.provenance.count(GROUND_TRUTH) == 2
    assert sel.provenance.count(SELF_LABELED) == 2
    # the most anomalous self-labeled survivors are kept
    assert set((38, 39)) <= set(sel.negative_ids)
    # injected ids never appear as positives
    assert not set((3, 17)) & set(sel.positive_ids)
    assert len(sel.positive_ids) == 20


def test_injection_of_existing_negative_changes_provenance_only():
    norms = np.arange(40.0)
    policy = LabelingPolicy(negative_fraction=0.1, known_anomaly_ids=(39,))
    sel = select_training_samples(measures_from_norms(norms), policy)
    assert sorted(sel.negative_ids) == [36, 37, 38, 39]
    prov = dict(zip(sel.negative_ids, sel.provenance))
    assert prov[39] == GROUND_TRUTH
    assert prov[36] == SELF_LABELED


def test_injection_unknown_id():
    with pytest.raises(IdMismatch):
        select_training_samples(
            measures_from_norms(np.arange(20.0)),
            LabelingPolicy(negative_fraction=0.1, known_anomaly_ids=(99,)),
        )


# -- model construction ----------------------------------------------------


def test_build_widths_m13():
    model = build_disc(13, m_sigma=5)
    assert [l.weight.shape for l in model.d_stack] == [(13, 6), (6, 3), (3, 10), (10, 5)]
    assert [l.weight.shape for l in model.sigma_stack] == [(5, 2), (2, 2)]
    assert [l.weight.shape for l in model.head] == [(7, 4), (4, 2)]


def test_build_width_floor_and_min_m():
    model = build_disc(5, m_sigma=2)
    assert [l.weight.shape for l in model.d_stack] == [(5, 2), (2, 1), (1, 10), (10, 5)]
    assert [l.weight.shape for l in model.sigma_stack] == [(2, 1), (1, 2)]
    with pytest.raises(ConfigError):
        build_disc(3)


def test_build_no_sigma_head():
    model = build_disc(8, use_sigma=False)
    assert model.sigma_bn is None and model.sigma_stack == []
    assert [l.weight.shape for l in model.head] == [(5, 4), (4, 2)]


def test_forward_softmax_rows():
    rng = np.random.default_rng(0)
    model = build_disc(8)
    model.set_mode(False)
    probs = model.logits(rng.normal(size=(6, 8)), rng.normal(size=(6, 5))).softmax()
    assert probs.data.shape == (6, 2)
    np.testing.assert_allclose(probs.data.sum(axis=1), 1.0, atol=1e-12)
    assert probs.data.min() >= 0.0


# -- training / prediction --------------------------------------------------


def separable_fixture(seed=0):
    rng = np.random.default_rng(seed)
    measures = toy_measures(rng, n_near=180, n_far=20)
    sel = select_training_samples(measures, LabelingPolicy(negative_fraction=0.075))
    return measures, sel


def test_training_separates_toy_measures():
    measures, sel = separable_fixture()
    config = DiscConfig(m=8, epochs=200, batch_size=64, seed=0)
    model = train_disc(DiscModel(config, 0), measures, sel, config)
    assert model.history_[-1][2] == 1.0
    probs = predict(model, measures)
    assert probs.shape == (200,)
    assert np.all(probs[180:] > 0.5)
    assert np.all(probs[:180][np.array(sel.roles[:180]) == "positive"] < 0.5)


def test_training_deterministic():
    measures, sel = separable_fixture()
    config = DiscConfig(m=8, epochs=20, batch_size=64, seed=4)
    a = train_disc(DiscModel(config, 4), measures, sel, config)
    b = train_disc(DiscModel(config, 4), measures, sel, config)
    for (na, ta), (nb, tb) in zip(a.parameters(), b.parameters()):
        assert na == nb
        np.testing.assert_array_equal(ta.data, tb.data)


def test_training_empty_class():
    measures, sel = separable_fixture()
    sel.negative_ids = np.array([], dtype=np.int64)
    config = DiscConfig(m=8, epochs=5)
    with pytest.raises(EmptyClass):
        train_disc(DiscModel(config, 0), measures, sel, config)


def test_predict_eval_mode_frozen():
    measures, sel = separable_fixture()
    config = DiscConfig(m=8, epochs=10, batch_size=64, seed=0)
    model = train_disc(DiscModel(config, 0), measures, sel, config)
    stats = [(m.running_mean.copy(), m.running_var.copy())
             for m in model._modules() if hasattr(m, "running_mean")]
    a = predict(model, measures)
    b = predict(model, measures)
    np.testing.assert_array_equal(a, b)
    for mod, (mean, var) in zip(
        [m for m in model._modules() if hasattr(m, "running_mean")], stats
    ):
        np.testing.assert_array_equal(mod.running_mean, mean)
        np.testing.assert_array_equal(mod.running_var, var)


def test_labels_are_thresholded_probabilities():
    measures, sel = separable_fixture()
    config = DiscConfig(m=8, epochs=10, batch_size=64, seed=0)
    model = train_disc(DiscModel(config, 0), measures, sel, config)
    probs = predict(model, measures)
    np.testing.assert_array_equal(predict_labels(model, measures), probs > 0.5)


def test_no_sigma_variant_trains():
    measures, sel = separable_fixture()
    config = DiscConfig(m=8, use_sigma=False, epochs=100, batch_size=64, seed=0)
    model = train_disc(DiscModel(config, 0), measures, sel, config)
    probs = predict(model, measures)
    assert np.all(probs[180:] > 0.5)


def test_estimator_roundtrip():
    rng = np.random.default_rng(1)
    measures = toy_measures(rng, n_near=90, n_far=10)
    est = SelfLabelingDiscriminator(
        negative_fraction=0.075, epochs=100, batch_size=32, seed=0
    )
    est.fit(measures)
    labels = est.predict(measures)
    assert labels.dtype == bool
    assert labels[90:].all()
    probs = est.predict_proba(measures)
    assert probs.shape == (100,)
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        SelfLabelingDiscriminator().predict(measures)


# -- artifacts --------------------------------------------------------------


def test_selection_csv_roundtrip(tmp_path):
    norms = np.arange(40.0)
    policy = LabelingPolicy(negative_fraction=0.1, known_anomaly_ids=(3,))
    sel = select_training_samples(measures_from_norms(norms), policy)
    path = tmp_path / "selection.csv"
    save_selection_csv(sel, path)
    back = load_selection_csv(path)
    np.testing.assert_array_equal(np.sort(back.positive_ids), np.sort(sel.positive_ids))
    np.testing.assert_array_equal(np.sort(back.negative_ids), np.sort(sel.negative_ids))
    assert back.roles == sel.roles
    assert sorted(back.provenance) == sorted(sel.provenance)
    np.testing.assert_array_equal(back.combined_rank, sel.combined_rank)
    np.testing.assert_array_equal(back.d_norms, sel.d_norms)


def test_predictions_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(2)
    ids = np.arange(7)
    probs = rng.random(7)
    path = tmp_path / "predictions.csv"
    save_predictions_csv(ids, probs, rng.random(7), rng.random(7), path)
    back_ids, back_probs, back_labels = load_predictions_csv(path)
    np.testing.assert_array_equal(back_ids, ids)
    np.testing.assert_array_equal(back_probs, probs)
    np.testing.assert_array_equal(back_labels, probs > 0.5)


def test_checkpoint_roundtrip(tmp_path):
    measures, sel = separable_fixture()
    config = DiscConfig(m=8, epochs=10, batch_size=64, seed=0)
    model = train_disc(DiscModel(config, 0), measures, sel, config)
    path = tmp_path / "disc.ckpt"
    save_disc_checkpoint(model, path)
    back = load_disc_checkpoint(path)
    assert back.config == model.config
    for (na, ta), (nb, tb) in zip(model.parameters(), back.parameters()):
        assert na == nb
        np.testing.assert_array_equal(ta.data, tb.data)
    for (na, sa), (nb, sb) in zip(model.state_arrays(), back.state_arrays()):
        assert na == nb
        np.testing.assert_array_equal(sa, sb)
    np.testing.assert_array_equal(predict(model, measures), predict(back, measures))
