"""Feature schema: column typing and the declarative schema file format.

A schema file is line based, one declaration per line::

    # comment lines and blank lines are ignored
    column <name> continuous
    column <name> discrete <category> <category> ...
    label <name>
    anomaly <value>

Discrete columns list their categories explicitly; the cardinality is the
number of listed categories. ``label`` names a non-feature column holding the
raw class value, and ``anomaly`` gives the label value treated as anomalous.
"""

from dataclasses import dataclass, field

from .exceptions import SchemaError

CONTINUOUS = "continuous"
DISCRETE = "discrete"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str
    categories: tuple = ()

    @property
    def cardinality(self):
        return len(self.categories)


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple
    label_column: str = None
    anomaly_value: str = None

    def __post_init__(self):
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names in schema")
        if not self.columns:
            raise SchemaError("schema declares no feature columns")
        for col in self.columns:
            if col.kind not in (CONTINUOUS, DISCRETE):
                raise SchemaError(f"column {col.name!r}: unknown kind {col.kind!r}")
            if col.kind == DISCRETE and col.cardinality < 2:
                raise SchemaError(
                    f"column {col.name!r}: discrete columns need at least 2 categories"
                )
            if col.kind == DISCRETE and len(set(col.categories)) != col.cardinality:
                raise SchemaError(f"column {col.name!r}: duplicate categories")
        if self.label_column is not None and self.label_column in names:
            raise SchemaError("label column must not be a feature column")

    @property
    def feature_names(self):
        return [c.name for c in self.columns]

    @property
    def encoded_width(self):
        """Width after one-hot expansion: continuous count plus total cardinality."""
        return sum(1 if c.kind == CONTINUOUS else c.cardinality for c in self.columns)

    def column(self, name):
        for c in self.columns:
            if c.name == name:
                return c
        raise SchemaError(f"no column named {name!r}")


def parse_schema(text):
    columns = []
    label = None
    anomaly = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        keyword = parts[0]
        if keyword == "column":
            if len(parts) < 3:
                raise SchemaError(f"line {lineno}: expected 'column <name> <kind> ...'")
            name, kind = parts[1], parts[2]
            if kind == CONTINUOUS:
                if len(parts) != 3:
                    raise SchemaError(f"line {lineno}: continuous columns take no categories")
                columns.append(Column(name, CONTINUOUS))
            elif kind == DISCRETE:
                cats = tuple(parts[3:])
                if len(cats) < 2:
                    raise SchemaError(f"line {lineno}: discrete column needs >= 2 categories")
                columns.append(Column(name, DISCRETE, cats))
            else:
                raise SchemaError(f"line {lineno}: unknown column kind {kind!r}")
        elif keyword == "label":
            if len(parts) != 2:
                raise SchemaError(f"line {lineno}: expected 'label <name>'")
            label = parts[1]
        elif keyword == "anomaly":
            if len(parts) < 2:
                raise SchemaError(f"line {lineno}: expected 'anomaly <value>'")
            anomaly = line.split(None, 1)[1]
        else:
            raise SchemaError(f"line {lineno}: unknown keyword {keyword!r}")
    return FeatureSchema(tuple(columns), label_column=label, anomaly_value=anomaly)


def load_schema(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_schema(fh.read())


def format_schema(schema):
    lines = []
    for col in schema.columns:
        if col.kind == CONTINUOUS:
            lines.append(f"column {col.name} continuous")
        else:
            lines.append(f"column {col.name} discrete " + " ".join(col.categories))
    if schema.label_column is not None:
        lines.append(f"label {schema.label_column}")
    if schema.anomaly_value is not None:
        lines.append(f"anomaly {schema.anomaly_value}")
    return "\n".join(lines) + "\n"


def save_schema(schema, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_schema(schema))
