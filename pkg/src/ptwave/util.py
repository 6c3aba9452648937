"""Small shared helpers."""
from __future__ import annotations

import json

import numpy as np


def min_gap(z) -> float:
    """Smallest pairwise distance between entries of ``z`` (inf for < 2 entries)."""
    z = np.asarray(z).ravel()
    if z.size < 2:
        return np.inf
    dist = np.abs(z[:, None] - z[None, :])
    return float(dist[~np.eye(z.size, dtype=bool)].min())


def fmt(x) -> str:
    """17 significant digits, the output convention for every report."""
    return f"{x:.17g}"


def richardson(values, ratio: float = 2.0, levels: int | None = None, first: int = 1):
    """Richardson table for a sequence with expansion in powers h^first, h^(first+1), ...

    ``values[k]`` belongs to h_k = h_0 / ratio^k.  Returns ``(best, error)``,
    the most extrapolated entry from the finest values and the difference
    to the previous column as its error estimate.
    """
    T = np.asarray(values)
    levels = T.size - 1 if levels is None else min(levels, T.size - 1)
    prev = T[-1]
    for j in range(levels):
        f = ratio ** (first + j)
        prev = T[-1]
        T = (f * T[1:] - T[:-1]) / (f - 1)
    best = T[-1]
    return best, abs(best - prev)


def _encode(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], indent, level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        obj = obj.tolist() if isinstance(obj, np.ndarray) else obj
        if not obj:
            return "[]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not np.isfinite(x):
            return json.dumps(str(x))
        return fmt(x)
    if isinstance(obj, (complex, np.complexfloating)):
        return _encode([obj.real, obj.imag], indent, level)
    return json.dumps(obj)


def dumps_json(obj, indent: int = 1) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(dumps_json(obj))
