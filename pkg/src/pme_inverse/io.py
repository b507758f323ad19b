"""Plain-text persistence: field files, curves, inversion reports, run manifests.

Field files are comma-separated with a ``#``-prefixed key: value header::

    # field: u_T
    # n: 10
    # nodes: 121
    # gamma: 3.5
    # T: 1000
    index,x,y,value
    0,0,0,0
    ...

Every float is written with 17 significant digits so values round-trip exactly.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .fem import ScalarField
from .mesh import build_unit_square_mesh


def fmt(x) -> str:
    return format(float(x), ".17g")


def _parse_value(text: str):
    text = text.strip()
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text in ("True", "False"):
        return text == "True"
    return text


def write_field(path, field: ScalarField, **meta) -> Path:
    path = Path(path)
    mesh = field.mesh
    lines = [f"# field: {field.name or 'field'}", f"# n: {mesh.n}", f"# nodes: {mesh.num_nodes}"]
    for key, val in meta.items():
        if val is not None:
            lines.append(f"# {key}: {fmt(val) if isinstance(val, float) else val}")
    lines.append("index,x,y,value")
    for i, ((x, y), v) in enumerate(zip(mesh.nodes, field.values)):
        lines.append(f"{i},{fmt(x)},{fmt(y)},{fmt(v)}")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_field_with_header(path) -> tuple[ScalarField, dict]:
    path = Path(path)
    header = {}
    body = []
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].partition(":")
                header[key.strip()] = _parse_value(val)
            elif line.strip():
                body.append(line)
    if "n" not in header or "nodes" not in header:
        raise ValueError(f"{path}: missing n/nodes header")
    rows = list(csv.DictReader(io.StringIO("".join(body))))
    mesh = build_unit_square_mesh(int(header["n"]))
    if len(rows) != header["nodes"] or len(rows) != mesh.num_nodes:
        raise ValueError(
            f"{path}: {len(rows)} records, header says {header['nodes']}, mesh n={header['n']} has {mesh.num_nodes}"
        )
    values = np.empty(len(rows))
    for row in rows:
        values[int(row["index"])] = float(row["value"])
    return ScalarField(mesh, values, str(header.get("field", ""))), header


def read_field(path) -> ScalarField:
    return read_field_with_header(path)[0]


def write_curve(path, curve) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["alpha", "value"])
        for a, v in curve:
            writer.writerow([fmt(a), fmt(v)])
    return path


def read_curve(path) -> list:
    with Path(path).open(encoding="utf-8") as fh:
        return [(float(r["alpha"]), float(r["value"])) for r in csv.DictReader(fh)]


def write_keyvalue(path, items: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, val in items.items():
        if isinstance(val, float):
            val = fmt(val)
        elif isinstance(val, (list, tuple)):
            val = ",".join(fmt(v) if isinstance(v, float) else str(v) for v in val)
        lines.append(f"{key}: {val}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_keyvalue(path) -> dict:
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.startswith("#"):
            continue
        key, _, val = line.partition(":")
        out[key.strip()] = val.strip()
    return out


def manifest_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".manifest")


def write_manifest(out, command: str, params: dict, inputs: dict, outputs: dict,
                   duration: float, extra: dict | None = None) -> Path:
    """Record a run; ``param.*`` keys hold every numeric flag as passed on the command line."""
    from . import __version__

    items = {"command": command, "version": __version__}
    for key, val in params.items():
        items[f"param.{key}"] = val
    for key, val in inputs.items():
        items[f"input.{key}"] = str(val)
    for key, val in outputs.items():
        items[f"output.{key}"] = str(val)
    for key, val in (extra or {}).items():
        items[f"result.{key}"] = val
    items["wall_clock_seconds"] = float(duration)
    return write_keyvalue(manifest_path(out), items)


def argv_from_manifest(path) -> list:
    """Rebuild the command line recorded in a manifest."""
    data = read_keyvalue(path)
    argv = [data["command"]]
    for key, val in data.items():
        prefix = key.split(".", 1)[0]
        if prefix in ("param", "input", "output"):
            flag = "--" + key.split(".", 1)[1].replace("_", "-")
            if val == "True":
                argv.append(flag)
            elif val == "False":
                continue
            else:
                argv += [flag, val]
    return argv
