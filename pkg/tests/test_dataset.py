import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cscad.dataset import (
    MixedTypeEncoder,
    RawTable,
    decode,
    encode,
    load_csv,
    make_windows,
    split,
    split_indices,
    split_indices_temporal,
)
from cscad.exceptions import (
    ConstantColumnWarning,
    DegenerateSplit,
    MissingColumn,
    SeriesTooShort,
    UnknownCategory,
    UnparsableNumber,
)
from cscad.schema import parse_schema

SCHEMA = parse_schema(
    """
column height continuous
column color discrete red green blue
label verdict
anomaly bad
"""
)


def table(heights, colors, verdicts=None):
    return RawTable(
        {"height": list(heights), "color": list(colors)},
        len(heights),
        list(verdicts) if verdicts is not None else None,
    )


def test_zscore_exact_values():
    # mean 2, sample std 1, so (1,2,3) -> (-1,0,1) exactly
    t = table([1.0, 2.0, 3.0], ["red", "green", "blue"])
    m = encode(t, SCHEMA)
    np.testing.assert_array_equal(m.values[:, 0], [-1.0, 0.0, 1.0])


def test_onehot_layout():
    t = table([1.0, 2.0, 3.0], ["red", "green", "blue"])
    m = encode(t, SCHEMA)
    assert m.width == 4
    np.testing.assert_array_equal(m.values[:, 1:], np.eye(3))
    assert m.feature_map == (
        ("height", None),
        ("color", "red"),
        ("color", "green"),
        ("color", "blue"),
    )


def test_labels_become_anomaly_mask():
    t = table([1.0, 2.0], ["red", "blue"], ["good", "bad"])
    m = encode(t, SCHEMA)
    np.testing.assert_array_equal(m.labels, [False, True])


def test_constant_column_warns_and_zeroes():
    t = table([5.0, 5.0, 5.0], ["red", "red", "red"])
    with pytest.warns(ConstantColumnWarning):
        m = encode(t, SCHEMA)
    np.testing.assert_array_equal(m.values[:, 0], 0.0)


def test_train_statistics_apply_to_test():
    enc = MixedTypeEncoder(SCHEMA).fit(table([1.0, 2.0, 3.0], ["red"] * 3))
    m = enc.transform(table([4.0], ["blue"]))
    # (4 - 2) / 1 with train stats
    assert m.values[0, 0] == pytest.approx(2.0)


def test_unfitted_encoder_raises():
    from sklearn.exceptions import NotFittedError

    with pytest.raises(NotFittedError):
        MixedTypeEncoder(SCHEMA).transform(table([1.0], ["red"]))


def test_decode_inverts_encode():
    t = table([1.5, -2.0, 0.25], ["blue", "red", "green"])
    m = encode(t, SCHEMA)
    back = decode(m, SCHEMA)
    np.testing.assert_allclose(back["height"], t.columns["height"], atol=1e-12)
    assert back["color"] == t.columns["color"]


@settings(max_examples=50, deadline=None)
@given(
    st.lists(
        st.tuples(
            st.floats(-1e6, 1e6),
            st.sampled_from(["red", "green", "blue"]),
        ),
        min_size=2,
        max_size=40,
    )
)
def test_onehot_rows_sum_to_one(rows):
    heights = [r[0] for r in rows]
    colors = [r[1] for r in rows]
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantColumnWarning)
        m = encode(table(heights, colors), SCHEMA)
    np.testing.assert_allclose(m.values[:, 1:].sum(axis=1), 1.0)


def test_load_csv(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("height,color,verdict\n1.0,red,good\n2.5,blue,bad\n")
    t = load_csv(path, SCHEMA)
    assert t.n_rows == 2
    assert t.columns["height"] == [1.0, 2.5]
    assert t.columns["color"] == ["red", "blue"]
    assert t.labels == ["good", "bad"]


def test_load_csv_missing_column(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("height,verdict\n1.0,good\n")
    with pytest.raises(MissingColumn):
        load_csv(path, SCHEMA)


def test_load_csv_unknown_category(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("height,color,verdict\n1.0,purple,good\n")
    with pytest.raises(UnknownCategory) as err:
        load_csv(path, SCHEMA)
    assert "purple" in str(err.value)


def test_load_csv_bad_number(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("height,color,verdict\ntall,red,good\n")
    with pytest.raises(UnparsableNumber):
        load_csv(path, SCHEMA)


def test_load_csv_rejects_nan(tmp_path):
    path = tmp_path / "data.csv"
    path.write_text("height,color,verdict\nnan,red,good\n")
    with pytest.raises(UnparsableNumber):
        load_csv(path, SCHEMA)


def test_split_sizes_and_disjointness():
    train, test = split_indices(10, 0.7, seed=0)
    assert len(train) == 7 and len(test) == 3
    assert set(train).isdisjoint(test)
    assert set(train) | set(test) == set(range(10))


def test_split_floor_rule():
    train, test = split_indices(7, 0.5, seed=1)
    assert len(train) == 3 and len(test) == 4


def test_split_deterministic_in_seed():
    a = split_indices(100, 0.8, seed=42)
    b = split_indices(100, 0.8, seed=42)
    np.testing.assert_array_equal(a[0], b[0])
    c = split_indices(100, 0.8, seed=43)
    assert not np.array_equal(a[0], c[0])


def test_split_degenerate():
    with pytest.raises(DegenerateSplit):
        split_indices(10, 0.0, seed=0)
    with pytest.raises(DegenerateSplit):
        split_indices(10, 1.0, seed=0)
    with pytest.raises(DegenerateSplit):
        split_indices(3, 0.1, seed=0)


def test_split_temporal_is_prefix():
    train, test = split_indices_temporal(10, 0.6)
    np.testing.assert_array_equal(train, np.arange(6))
    np.testing.assert_array_equal(test, np.arange(6, 10))


def test_split_carries_ids_and_labels():
    t = table([1.0, 2.0, 3.0, 4.0], ["red", "green", "blue", "red"],
              ["good", "bad", "good", "bad"])
    m = encode(t, SCHEMA)
    train, test = split(m, 0.5, seed=7)
    assert set(train.ids) | set(test.ids) == {0, 1, 2, 3}
    for part in (train, test):
        for row, sample_id in enumerate(part.ids):
            np.testing.assert_array_equal(part.values[row], m.values[sample_id])
            assert part.labels[row] == m.labels[sample_id]


def test_make_windows_counts_and_alignment():
    t = table([float(i) for i in range(8)], ["red"] * 8)
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConstantColumnWarning)
        m = encode(t, SCHEMA)
    ws = make_windows(m, k=3)
    assert ws.n_samples == 5
    # window i covers rows i..i+k-1, target is row i+k
    np.testing.assert_array_equal(ws.windows[0], m.values[0:3])
    np.testing.assert_array_equal(ws.targets[0], m.values[3])
    np.testing.assert_array_equal(ws.windows[4], m.values[4:7])
    np.testing.assert_array_equal(ws.targets[4], m.values[7])
    np.testing.assert_array_equal(ws.target_ids, np.arange(3, 8))


def test_make_windows_too_short():
    t = table([1.0, 2.0], ["red", "blue"])
    m = encode(t, SCHEMA)
    with pytest.raises(SeriesTooShort):
        make_windows(m, k=2)
    with pytest.raises(SeriesTooShort):
        make_windows(m, k=5)
