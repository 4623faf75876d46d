"""JSON, DOT and CSV serialisation.

JSON output is compact and deterministic: keys in a fixed order, no
whitespace, one trailing newline.  Floats in CSV are written with 17
significant digits so that reruns are byte-identical.
"""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .graph import Graph, build_graph
from .spinal import SpinalGraph

FORMAT = "spinal-lab/graph-v1"


class FormatError(ValueError):
    pass


def _dump(obj: Any) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False) + "\n"


def graph_to_dict(g: Graph, provenance: dict | None = None) -> dict:
    out: dict[str, Any] = {
        "format": FORMAT,
        "vertex_count": g.vertex_count,
        "edges": g.edges().tolist(),
    }
    if g.boundary.size:
        out["boundary"] = g.boundary.tolist()
    if provenance is not None:
        out["provenance"] = provenance
    return out


def spinal_to_dict(sg: SpinalGraph, provenance: dict | None = None) -> dict:
    out = graph_to_dict(sg.graph)
    out.pop("provenance", None)
    out["spine"] = sg.spine.tolist()
    out["pi"] = sg.pi.tolist()
    if provenance is not None:
        out["provenance"] = provenance
    return out


def dumps_graph(g: Graph, provenance: dict | None = None) -> str:
    return _dump(graph_to_dict(g, provenance))


def dumps_spinal(sg: SpinalGraph, provenance: dict | None = None) -> str:
    return _dump(spinal_to_dict(sg, provenance))


def _graph_from_dict(d: dict) -> Graph:
    if d.get("format") != FORMAT:
        raise FormatError(f"expected format {FORMAT!r}, got {d.get('format')!r}")
    try:
        n = int(d["vertex_count"])
        edges = d["edges"]
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed graph document: {exc}") from exc
    return build_graph(edges, vertex_count=n, boundary=d.get("boundary", ()))


def load_document(text: str) -> dict:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(str(exc)) from exc
    if not isinstance(d, dict):
        raise FormatError("top level must be an object")
    return d


def loads_graph(text: str) -> Graph:
    return _graph_from_dict(load_document(text))


def loads_spinal(text: str, validate: bool = True) -> SpinalGraph:
    d = load_document(text)
    if "spine" not in d or "pi" not in d:
        raise FormatError("document has no spine/pi fields")
    return SpinalGraph(_graph_from_dict(d), d["spine"], d["pi"], validate=validate)


def read_document(path: str | Path) -> dict:
    return load_document(Path(path).read_text())


def write_text(path: str | Path, text: str) -> None:
    Path(path).write_text(text)


# -- DOT -------------------------------------------------------------------------------------


def to_dot(g: Graph, spine: Sequence[int] | None = None, name: str = "G") -> str:
    lines = [f"graph {name} {{"]
    if spine is not None:
        for s in sorted(int(v) for v in spine):
            lines.append(f"  {s} [shape=box];")
    for u, v in g.edges().tolist():
        lines.append(f"  {u} -- {v};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- CSV -------------------------------------------------------------------------------------


def format_value(v: Any) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def volumes_csv(volumes: Sequence[int]) -> str:
    return to_csv(("r", "volume"), enumerate(volumes))


def nash_csv(curve) -> str:
    return to_csv(("n", "norm1", "normp", "gradp", "ratio"),
                  ((e.n, e.norm1, e.normp, e.gradp, e.ratio) for e in curve.entries))


def walk_csv(series) -> str:
    return to_csv(("t", "p_return"), series.rows())


def edges_csv(g: Graph) -> str:
    return to_csv(("u", "v"), g.edges().tolist())


def json_number(v: Any) -> Any:
    """Convert numpy scalars/arrays and non-finite floats for JSON output."""
    if isinstance(v, dict):
        return {str(k): json_number(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [json_number(x) for x in v]
    if isinstance(v, np.ndarray):
        return json_number(v.tolist())
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if np.isfinite(f) else str(f)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def dumps_report(obj: Any) -> str:
    return json.dumps(json_number(obj), separators=(",", ":"), sort_keys=True) + "\n"
