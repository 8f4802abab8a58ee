"""JSON instance, centered-instance and assignment files.

Instance file fields: ``k``, ``n_facilities``, ``n_clients``, ``capacities``
and either ``dist`` (full row-major matrix over facilities then clients) or
``graph`` (edge list ``[u, v, w]``; the metric is its shortest-path closure).
A centered file additionally carries ``centers`` (point ids appended after the
base points), ``center_of`` (per base point) and ``sources``; its ``dist``
covers the centers too.
"""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .centered import CenteredInstance
from .errors import StructuralError
from .instance import Assignment, Instance, Metric, metric_from_weighted_graph


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2**53 else x


def _dumps(obj: dict[str, Any]) -> str:
    # one matrix row per line keeps files diff-able
    parts = []
    for key, val in obj.items():
        if key == "dist":
            rows = ",\n    ".join(json.dumps([_num(x) for x in row]) for row in val)
            parts.append(f'  "dist": [\n    {rows}\n  ]')
        elif key == "graph":
            rows = ",\n    ".join(json.dumps([int(u), int(v), _num(w)]) for u, v, w in val)
            parts.append(f'  "graph": [\n    {rows}\n  ]')
        else:
            parts.append(f"  {json.dumps(key)}: {json.dumps(val)}")
    return "{\n" + ",\n".join(parts) + "\n}\n"


def loads(text: str, source: str = "<input>") -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise StructuralError(f"{source}: line {e.lineno}, column {e.colno}: {e.msg}") from None
    if not isinstance(data, dict):
        raise StructuralError(f"{source}: top level must be an object")
    return data


def read_json(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise StructuralError(f"cannot read {path}: {e.strerror}") from None
    return loads(text, str(path))


def _int_field(data: dict, key: str, minimum: int = 0) -> int:
    if key not in data:
        raise StructuralError(f"missing field {key!r}")
    val = data[key]
    if isinstance(val, bool) or not isinstance(val, int) or val < minimum:
        raise StructuralError(f"field {key!r} must be an integer >= {minimum}, got {val!r}")
    return val


def instance_to_dict(inst: Instance) -> dict:
    return {
        "k": inst.k,
        "n_facilities": inst.n_facilities,
        "n_clients": inst.n_clients,
        "capacities": list(inst.capacities),
        "dist": inst.metric.dist.tolist(),
    }


def instance_from_dict(data: dict) -> Instance:
    k = _int_field(data, "k", 1)
    n_f = _int_field(data, "n_facilities", 0)
    n_c = _int_field(data, "n_clients", 0)
    caps = data.get("capacities")
    if not isinstance(caps, list) or len(caps) != n_f:
        raise StructuralError(f"field 'capacities' must list {n_f} integers")
    for i, u in enumerate(caps):
        if isinstance(u, bool) or not isinstance(u, int) or u < 0:
            raise StructuralError(f"capacities[{i}] must be a nonnegative integer, got {u!r}")
    n = n_f + n_c
    if "dist" in data:
        try:
            arr = np.array(data["dist"], dtype=float)
        except (TypeError, ValueError):
            raise StructuralError("field 'dist' must be a numeric matrix") from None
        if arr.shape != (n, n):
            raise StructuralError(f"field 'dist' must be {n}x{n}, got shape {arr.shape}")
        metric = Metric(arr)
    elif "graph" in data:
        edges = data["graph"]
        if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 3 for e in edges):
            raise StructuralError("field 'graph' must be a list of [u, v, w] triples")
        metric = metric_from_weighted_graph(edges, n)
    else:
        raise StructuralError("instance needs a 'dist' matrix or a 'graph' edge list")
    return Instance(metric, tuple(caps), n_c, k)


def centered_to_dict(centered: CenteredInstance) -> dict:
    out = instance_to_dict(centered.base)
    out["dist"] = centered.d_ell.dist.tolist()
    out["centers"] = list(centered.centers)
    out["center_of"] = [centered.center_of(v) for v in range(centered.n_base)]
    out["sources"] = list(centered.sources)
    return out


def centered_from_dict(data: dict) -> CenteredInstance:
    centers = data.get("centers")
    if not isinstance(centers, list) or not centers:
        raise StructuralError("field 'centers' must be a nonempty list")
    n_f = _int_field(data, "n_facilities")
    n_c = _int_field(data, "n_clients")
    n = n_f + n_c
    if centers != list(range(n, n + len(centers))):
        raise StructuralError(f"'centers' must be the consecutive ids {n}..{n + len(centers) - 1}")
    full = np.array(data.get("dist"), dtype=float)
    if full.shape != (n + len(centers),) * 2:
        raise StructuralError(f"centered 'dist' must cover {n + len(centers)} points")
    base = instance_from_dict({**data, "dist": full[:n, :n].tolist()})
    center_of = data.get("center_of")
    if not isinstance(center_of, list) or len(center_of) != n or any(c not in centers for c in center_of):
        raise StructuralError("field 'center_of' must give a center id for every base point")
    slots = [c - n for c in center_of]
    pendant = full[np.arange(n), center_of]
    sources = data.get("sources") or [-1] * len(centers)
    return CenteredInstance.from_parts(base, sources, slots, pendant, full[n:, n:])


def write_instance(inst: Instance, path) -> None:
    Path(path).write_text(_dumps(instance_to_dict(inst)))


def write_centered(centered: CenteredInstance, path) -> None:
    Path(path).write_text(_dumps(centered_to_dict(centered)))


def dumps_instance(inst: Instance) -> str:
    return _dumps(instance_to_dict(inst))


def read_instance(path) -> Instance | CenteredInstance:
    """Load an instance file; files with a ``centers`` field load as centered instances."""
    data = read_json(path)
    if "centers" in data:
        return centered_from_dict(data)
    return instance_from_dict(data)


def assignment_to_dict(phi: Assignment, inst: Instance, cost: float | None = None) -> dict:
    out = {"phi": phi.as_list(inst.clients), "open": sorted(phi.open)}
    if cost is not None:
        out["cost"] = _num(cost)
    return out


def write_assignment(phi: Assignment, inst: Instance, path, cost: float | None = None) -> None:
    Path(path).write_text(json.dumps(assignment_to_dict(phi, inst, cost)) + "\n")


def read_assignment(path, inst: Instance) -> Assignment:
    data = read_json(path)
    phi = data.get("phi")
    if not isinstance(phi, list) or len(phi) != inst.n_clients:
        raise StructuralError(f"field 'phi' must list {inst.n_clients} facility indices")
    opened = set(data.get("open", [])) | set(phi)
    return Assignment(frozenset(opened), dict(zip(inst.clients, phi)))
