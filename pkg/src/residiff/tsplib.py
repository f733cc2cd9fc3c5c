"""Reader for the EUC_2D subset of the TSPLIB text format.

Coordinates are rescaled by a single factor so the bounding box fits the
unit square; the factor is stored on the instance so reported lengths can
be mapped back to original units.
"""

from __future__ import annotations

import numpy as np

from .instances import TspInstance, build_tsp_instance


class ParseError(ValueError):
    """Malformed TSPLIB document; carries the offending line number."""

    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class UnsupportedFormatError(ValueError):
    """Document is valid TSPLIB but outside the EUC_2D subset."""


def parse_tsplib(text: str, k: int | None = None) -> TspInstance:
    """Parse a TYPE: TSP, EDGE_WEIGHT_TYPE: EUC_2D document.

    ``k`` sets the sparsification degree of the resulting instance;
    ``None`` keeps the complete graph.
    """
    lines = text.splitlines()
    header: dict[str, str] = {}
    coord_start = None
    for idx, raw in enumerate(lines):
        line = raw.strip()
        if not line:
            continue
        if line == "NODE_COORD_SECTION":
            coord_start = idx + 1
            break
        if line == "EOF":
            break
        if ":" in line:
            key, _, value = line.partition(":")
            header[key.strip().upper()] = value.strip()
        else:
            raise ParseError(idx + 1, f"unrecognized header line {line!r}")

    if header.get("TYPE", "").upper() != "TSP":
        raise UnsupportedFormatError(f"TYPE must be TSP, got {header.get('TYPE')!r}")
    weight_type = header.get("EDGE_WEIGHT_TYPE", "").upper()
    if weight_type != "EUC_2D":
        raise UnsupportedFormatError(
            f"EDGE_WEIGHT_TYPE must be EUC_2D, got {weight_type!r}"
        )
    try:
        n = int(header["DIMENSION"])
    except KeyError:
        raise ParseError(len(lines), "missing DIMENSION") from None
    except ValueError:
        raise ParseError(len(lines), "DIMENSION is not an integer") from None
    if coord_start is None:
        raise ParseError(len(lines), "missing NODE_COORD_SECTION")

    coords = np.empty((n, 2), dtype=np.float64)
    seen = np.zeros(n, dtype=bool)
    idx = coord_start
    for row in range(n):
        while idx < len(lines) and not lines[idx].strip():
            idx += 1
        if idx >= len(lines) or lines[idx].strip() == "EOF":
            raise ParseError(idx + 1, f"expected {n} coordinate lines, got {row}")
        parts = lines[idx].split()
        if len(parts) != 3:
            raise ParseError(idx + 1, f"expected 'id x y', got {lines[idx]!r}")
        try:
            node = int(parts[0]) - 1
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise ParseError(idx + 1, f"non-numeric coordinate line {lines[idx]!r}")
        if not 0 <= node < n or seen[node]:
            raise ParseError(idx + 1, f"bad or repeated node id {parts[0]}")
        coords[node] = (x, y)
        seen[node] = True
        idx += 1

    lo = coords.min(axis=0)
    span = float((coords.max(axis=0) - lo).max())
    scale = span if span > 0 else 1.0
    unit = (coords - lo) / scale
    if k is None:
        k = n - 1
    return build_tsp_instance(unit, k=k, scale=scale)
