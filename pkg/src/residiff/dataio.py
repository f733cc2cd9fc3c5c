"""Line-oriented dataset text format.

Each instance block is a header line, n body lines, and an optional label:

    tsp <n> <k>          mis <n>
    <x> <y>              <sorted neighbor ids of node i, possibly empty>
    ...                  ...
    label <±1 ...>       label <±1 ...>

TSP edge lists are not stored; they are rebuilt deterministically from the
coordinates and k, so a labeled TSP dataset is only valid when its labels
are representable in that rebuilt edge list (the labelers guarantee this).
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .instances import (
    MisInstance,
    SolutionVector,
    TspInstance,
    build_mis_instance,
    build_tsp_instance,
)

Item = tuple[TspInstance | MisInstance, SolutionVector | None]


def _format_float(x: float) -> str:
    return repr(float(x))


def write_dataset(path: str | Path, items: list[Item]) -> None:
    lines: list[str] = []
    for inst, label in items:
        if isinstance(inst, TspInstance):
            lines.append(f"tsp {inst.n} {inst.k}")
            for x, y in inst.coords:
                lines.append(f"{_format_float(x)} {_format_float(y)}")
        else:
            lines.append(f"mis {inst.n}")
            for v in range(inst.n):
                lines.append(" ".join(str(int(u)) for u in inst.neighbors(v)))
        if label is not None:
            lines.append("label " + " ".join(str(int(v)) for v in label.values))
    Path(path).write_text("\n".join(lines) + "\n")


def read_dataset(path: str | Path) -> list[Item]:
    lines = Path(path).read_text().splitlines()
    items: list[Item] = []
    idx = 0
    while idx < len(lines):
        line = lines[idx].strip()
        if not line:
            idx += 1
            continue
        head = line.split()
        if head[0] == "tsp":
            n, k = int(head[1]), int(head[2])
            coords = np.empty((n, 2), dtype=np.float64)
            for row in range(n):
                x, y = lines[idx + 1 + row].split()
                coords[row] = (float(x), float(y))
            inst: TspInstance | MisInstance = build_tsp_instance(coords, k=k)
            idx += 1 + n
        elif head[0] == "mis":
            n = int(head[1])
            pairs = []
            for v in range(n):
                for u in lines[idx + 1 + v].split():
                    pairs.append((v, int(u)))
            edges = np.array(pairs, dtype=np.int64) if pairs else np.empty((0, 2))
            inst = build_mis_instance(n, edges)
            idx += 1 + n
        else:
            raise ValueError(f"line {idx + 1}: unknown header {line!r}")
        label = None
        if idx < len(lines) and lines[idx].startswith("label "):
            values = np.array([float(v) for v in lines[idx].split()[1:]])
            label = SolutionVector(values)
            if label.values.shape[0] != inst.num_variables:
                raise ValueError(f"line {idx + 1}: label length mismatch")
            idx += 1
        items.append((inst, label))
    return items


def write_trajectory(path: str | Path, rows: list[tuple[float, np.ndarray]]) -> None:
    """Debug dump of sampler states: one `t x_1 ... x_N` line per step."""
    lines = [
        " ".join([_format_float(t)] + [_format_float(v) for v in x])
        for t, x in rows
    ]
    Path(path).write_text("\n".join(lines) + "\n")
