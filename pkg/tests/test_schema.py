import pytest

from cscad.exceptions import SchemaError
from cscad.schema import (
    CONTINUOUS,
    DISCRETE,
    Column,
    FeatureSchema,
    format_schema,
    parse_schema,
)

THYROID_LIKE = """\
# thyroid-shaped schema: 7 continuous, 2 discrete
column tsh continuous
column t3 continuous
column tt4 continuous
column t4u continuous
column fti continuous
column tbg continuous
column age continuous
column sex discrete F M
column referral discrete SVI SVHC STMW other
label outcome
anomaly hyperfunction
"""


def test_parse_roundtrip():
    schema = parse_schema(THYROID_LIKE)
    assert len(schema.columns) == 9
    assert schema.label_column == "outcome"
    assert schema.anomaly_value == "hyperfunction"
    again = parse_schema(format_schema(schema))
    assert again == schema


def test_encoded_width_counts_onehot_groups():
    schema = parse_schema(THYROID_LIKE)
    # 7 continuous + (2 + 4) one-hot slots
    assert schema.encoded_width == 13


def test_column_kinds():
    schema = parse_schema(THYROID_LIKE)
    assert schema.column("age").kind == CONTINUOUS
    assert schema.column("sex").kind == DISCRETE
    assert schema.column("sex").cardinality == 2
    assert schema.column("referral").categories == ("SVI", "SVHC", "STMW", "other")


def test_duplicate_column_rejected():
    text = "column a continuous\ncolumn a continuous\n"
    with pytest.raises(SchemaError):
        parse_schema(text)


def test_discrete_needs_two_categories():
    with pytest.raises(SchemaError):
        parse_schema("column a discrete only_one\n")


def test_duplicate_category_rejected():
    with pytest.raises(SchemaError):
        parse_schema("column a discrete x x\n")


def test_label_cannot_be_a_feature():
    text = "column a continuous\nlabel a\n"
    with pytest.raises(SchemaError):
        parse_schema(text)


def test_empty_schema_rejected():
    with pytest.raises(SchemaError):
        parse_schema("# nothing here\n")


def test_unknown_directive_rejected():
    with pytest.raises(SchemaError):
        parse_schema("row a continuous\n")


def test_wide_discrete_schema():
    # KDDCUP-shaped width: 38 continuous plus 3 discrete columns whose
    # cardinalities sum to 83 encode to 121 dimensions.
    lines = [f"column c{i} continuous" for i in range(38)]
    lines.append("column proto discrete " + " ".join(f"p{i}" for i in range(3)))
    lines.append("column service discrete " + " ".join(f"s{i}" for i in range(69)))
    lines.append("column flag discrete " + " ".join(f"f{i}" for i in range(11)))
    schema = parse_schema("\n".join(lines))
    assert schema.encoded_width == 121


def test_save_load(tmp_path):
    from cscad.schema import load_schema, save_schema

    schema = parse_schema(THYROID_LIKE)
    path = tmp_path / "schema.txt"
    save_schema(schema, path)
    assert load_schema(path) == schema
