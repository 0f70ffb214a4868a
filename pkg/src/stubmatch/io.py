"""Text formats for configurations, matchings and reports, with atomic writes."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import DomainError
from .matcher import Matching
from .spatial import Color, PointConfig, Window

__all__ = [
    "config_to_text",
    "config_from_text",
    "write_config",
    "read_config",
    "matching_to_text",
    "matching_from_text",
    "write_matching",
    "read_matching",
    "write_text",
    "write_json",
]


def _num(x: float) -> str:
    return format(float(x), ".17g")


def config_to_text(cfg: PointConfig) -> str:
    """JSON window header line, a column line, then ``id,color,x1,...,xd,stubs`` records."""
    d = cfg.window.dimension
    lines = ["# " + json.dumps(cfg.window.to_dict(), sort_keys=True),
             ",".join(["id", "color"] + [f"x{k + 1}" for k in range(d)] + ["stubs"])]
    for i in range(cfg.n):
        coords = ",".join(_num(x) for x in cfg.positions[i])
        lines.append(f"{i},{Color(cfg.colors[i]).name.lower()},{coords},{int(cfg.stubs[i])}")
    return "\n".join(lines) + "\n"


def config_from_text(text: str) -> PointConfig:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#"):
        raise DomainError("configuration file lacks its JSON window header")
    window = Window.from_dict(json.loads(lines[0][1:]))
    d = window.dimension
    pos, colors, stubs = [], [], []
    for k, line in enumerate(lines[2:]):
        if not line.strip():
            continue
        fields = line.split(",")
        if len(fields) != d + 3 or int(fields[0]) != k:
            raise DomainError(f"malformed configuration record {k}: {line!r}")
        colors.append(Color.parse(fields[1]))
        pos.append([float(x) for x in fields[2:2 + d]])
        stubs.append(int(fields[-1]))
    return PointConfig(window, np.array(pos, dtype=float).reshape(-1, d),
                       np.array(colors, dtype=np.int8), np.array(stubs, dtype=np.int64))


def matching_to_text(cfg: PointConfig, m: Matching) -> str:
    e = m.edge_array()
    lines = ["red_id,blue_id,length"]
    if e.size:
        for (r, b), length in zip(e.tolist(), cfg.distances(e[:, 0], e[:, 1])):
            lines.append(f"{r},{b},{_num(length)}")
    return "\n".join(lines) + "\n"


def matching_from_text(cfg: PointConfig, text: str) -> Matching:
    edges = []
    for line in text.splitlines()[1:]:
        if line.strip():
            r, b, _ = line.split(",")
            edges.append((int(r), int(b)))
    return Matching.from_edges(cfg, edges)


def write_text(path, text: str) -> None:
    """Write via a temporary file in the same directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path, data) -> None:
    write_text(path, json.dumps(data, indent=2, sort_keys=True) + "\n")


def write_config(path, cfg: PointConfig) -> None:
    write_text(path, config_to_text(cfg))


def read_config(path) -> PointConfig:
    return config_from_text(Path(path).read_text())


def write_matching(path, cfg: PointConfig, m: Matching) -> None:
    write_text(path, matching_to_text(cfg, m))


def read_matching(path, cfg: PointConfig) -> Matching:
    return matching_from_text(cfg, Path(path).read_text())
