"""Text checkpoint for named arrays.

Values are written as C99 hex floats, so a save/load cycle is bit-exact.
Format: a version line, then per array a header `array <name> <dims...>`
followed by one line of space-separated hex values in row-major order.
"""

import numpy as np

from ..exceptions import ConfigError

VERSION_LINE = "ckpt v1"


def dump_arrays(arrays):
    """Encode arrays to checkpoint text. `arrays` is a mapping or (name,
    array-or-tensor) pairs; order is preserved."""
    items = arrays.items() if hasattr(arrays, "items") else arrays
    lines = [VERSION_LINE]
    for name, value in items:
        data = np.asarray(getattr(value, "data", value), dtype=np.float64)
        dims = " ".join(str(d) for d in data.shape)
        lines.append(f"array {name} {dims}".rstrip())
        lines.append(" ".join(float(v).hex() for v in data.ravel()))
    return "\n".join(lines) + "\n"


def save_checkpoint(path, arrays):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_arrays(arrays))


def parse_arrays(text, source="checkpoint"):
    """Decode checkpoint text back to an ordered dict of name -> array."""
    lines = text.splitlines()
    if not lines or lines[0] != VERSION_LINE:
        raise ConfigError(f"{source}: not a recognized checkpoint file")
    out = {}
    i = 1
    while i < len(lines):
        if not lines[i].strip():
            i += 1
            continue
        parts = lines[i].split()
        if parts[0] != "array" or len(parts) < 2:
            raise ConfigError(f"{source}: malformed header {lines[i]!r}")
        name = parts[1]
        shape = tuple(int(d) for d in parts[2:])
        values = np.array([float.fromhex(v) for v in lines[i + 1].split()])
        expected = int(np.prod(shape)) if shape else 1
        if values.size != expected:
            raise ConfigError(
                f"{source}: array {name} has {values.size} values, expected {expected}"
            )
        out[name] = values.reshape(shape)
        i += 2
    return out


def load_checkpoint(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_arrays(fh.read(), source=str(path))
