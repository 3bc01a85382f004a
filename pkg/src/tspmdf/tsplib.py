"""TSPLIB reading/writing and uniform random instances."""
from __future__ import annotations

import math
import re
from pathlib import Path

import numpy as np

from .core import Tour, TspInstance

SUPPORTED_EDGE_WEIGHT_TYPES = ("EUC_2D", "CEIL_2D")

# sections whose content has no bearing on the instance
_SKIPPED_SECTIONS = ("DISPLAY_DATA_SECTION",)

_KEY = re.compile(r"^([A-Za-z_]+)\s*:?\s*(.*)$")


class TsplibError(ValueError):
    pass


def _fail(lineno: int, msg: str, line: str | None = None):
    where = f"line {lineno}" if lineno else "input"
    text = f"{where}: {msg}"
    if line is not None:
        text += f" ({line.strip()!r})"
    raise TsplibError(text)


def parse_tsplib(text: str) -> TspInstance:
    """Parse a TYPE TSP, EUC_2D/CEIL_2D problem with a NODE_COORD_SECTION."""
    header: dict[str, str] = {}
    coords: dict[int, tuple[float, float]] = {}
    in_coords = False
    skipping = False
    section_line = 0
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        if stripped == "EOF":
            break
        starts_keyword = stripped.split()[0].replace("_", "").rstrip(":").isalpha()
        if skipping and not starts_keyword:
            continue
        skipping = False
        if in_coords:
            parts = stripped.split()
            if starts_keyword:
                in_coords = False
            else:
                if len(parts) != 3:
                    _fail(lineno, "coordinate line must have 'index x y'", line)
                try:
                    idx = int(parts[0])
                    x, y = float(parts[1]), float(parts[2])
                except ValueError:
                    _fail(lineno, "malformed coordinate line", line)
                if not (math.isfinite(x) and math.isfinite(y)):
                    _fail(lineno, "non-finite coordinate", line)
                if idx in coords:
                    _fail(lineno, f"duplicate node index {idx}", line)
                coords[idx] = (x, y)
                continue
        m = _KEY.match(stripped)
        if not m:
            _fail(lineno, "unrecognised line", line)
        key, value = m.group(1).upper(), m.group(2).strip()
        if key == "NODE_COORD_SECTION":
            in_coords = True
            section_line = lineno
        elif key in _SKIPPED_SECTIONS:
            skipping = True
        elif key.endswith("_SECTION"):
            _fail(lineno, f"unsupported section {key}", line)
        else:
            header[key] = value

    ptype = (header.get("TYPE") or "TSP").split()[0].upper()
    if ptype != "TSP":
        _fail(0, f"unsupported TYPE {header['TYPE']!r}")
    ewt = header.get("EDGE_WEIGHT_TYPE")
    if ewt is None:
        _fail(0, "missing EDGE_WEIGHT_TYPE")
    if ewt.upper() not in SUPPORTED_EDGE_WEIGHT_TYPES:
        _fail(0, f"unsupported EDGE_WEIGHT_TYPE {ewt!r}")
    if "DIMENSION" not in header:
        _fail(0, "missing DIMENSION")
    try:
        dim = int(header["DIMENSION"])
    except ValueError:
        _fail(0, f"DIMENSION is not an integer: {header['DIMENSION']!r}")
    if not section_line:
        _fail(0, "missing NODE_COORD_SECTION")
    if len(coords) != dim:
        _fail(section_line, f"DIMENSION is {dim} but {len(coords)} coordinate lines follow")
    if sorted(coords) != list(range(1, dim + 1)):
        _fail(section_line, f"node indices must be 1..{dim}")
    return TspInstance(np.array([coords[i] for i in range(1, dim + 1)], dtype=np.float64))


def read_tsplib(path) -> TspInstance:
    return parse_tsplib(Path(path).read_text())


def serialize_tsplib(inst: TspInstance, name: str = "instance", comment: str | None = None) -> str:
    """Write EUC_2D TSPLIB text; coordinates keep 17 significant digits."""
    lines = [f"NAME : {name}"]
    if comment:
        lines.append(f"COMMENT : {comment}")
    lines += ["TYPE : TSP", f"DIMENSION : {inst.n}", "EDGE_WEIGHT_TYPE : EUC_2D", "NODE_COORD_SECTION"]
    lines += [f"{i + 1} {x:.17g} {y:.17g}" for i, (x, y) in enumerate(inst.nodes)]
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def parse_tour(text: str) -> Tour:
    """Read a TSPLIB ``TOUR_SECTION`` (1-based, ``-1`` terminated)."""
    nodes = []
    active = False
    for line in text.splitlines():
        s = line.strip()
        if s.startswith("TOUR_SECTION"):
            active = True
            continue
        if active:
            if s in ("-1", "EOF"):
                break
            nodes.extend(int(tok) - 1 for tok in s.split())
    return Tour(nodes)


def nint_tour_length(inst: TspInstance, tour: Tour) -> int:
    """TSPLIB's integer EUC_2D length (each edge rounded to nearest int)."""
    pts = inst.nodes[tour.perm]
    d = np.sqrt(np.sum((pts - np.roll(pts, -1, axis=0)) ** 2, axis=1))
    return int(np.sum(np.floor(d + 0.5)))


def generate_uniform(n: int, seed: int, index: int = 0) -> TspInstance:
    """``n`` i.i.d. points in ``[0, 1)^2``.

    Generator: numpy's Philox4x64-10 with key ``(seed, index)`` (two unsigned
    64-bit words) and zero counter; coordinates are ``Generator.random((n, 2))``
    (53-bit doubles, row-major x, y). Instance ``index`` of a set therefore
    does not depend on how many other instances are generated or in what order.
    """
    if n < 3:
        raise ValueError(f"n must be >= 3, got {n}")
    key = np.array([seed % 2**64, index % 2**64], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    return TspInstance(rng.random((n, 2)))
