"""
CSV and JSON outputs.

Every CSV starts with ``# {json}`` carrying provenance and, for grids, the grid spec, then a
commented column line. Numbers are written with 17 significant digits so grids read back
bit-exactly.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from hybridqf import __version__
from hybridqf.errors import ConfigError
from hybridqf.states import CharFnGrid, GridSpec, WignerGrid

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


class Provenance(BaseModel):
    config_sha256: str
    command: str
    version: str = __version__
    seed: Optional[int] = None

    def header(self, **extra: Any) -> Dict[str, Any]:
        return {**self.model_dump(), **extra}


@dataclass(frozen=True)
class Table:
    meta: Dict[str, Any]
    columns: List[str]
    data: np.ndarray


def write_table(path: Path, columns: Sequence[str], data: np.ndarray, meta: Dict[str, Any]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = np.asarray(data, dtype=float).reshape(-1, len(columns))
    header = json.dumps({**meta, "columns": list(columns)}, sort_keys=True) + "\n" + ",".join(columns)
    np.savetxt(path, data, fmt=FLOAT_FORMAT, delimiter=",", header=header, comments="# ")
    logger.debug("Wrote table", extra={"output_path": str(path), "rows": int(data.shape[0])})
    return path


def read_table(path: Path) -> Table:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        first = handle.readline()
    if not first.startswith("# "):
        raise ConfigError("missing JSON header line", f"{path}:1")
    try:
        meta = json.loads(first[2:])
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON header: {exc.msg}", f"{path}:1") from exc
    columns = list(meta.pop("columns", []))
    data = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    if columns and data.size and data.shape[1] != len(columns):
        raise ConfigError(f"expected {len(columns)} columns, found {data.shape[1]}", str(path))
    return Table(meta=meta, columns=columns, data=data.reshape(-1, len(columns)) if columns else data)


def write_json(path: Path, model: BaseModel) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(model.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


def _axis_columns(prefix: str, d: int) -> List[str]:
    return [f"{prefix}_{i + 1}" for i in range(d)]


def write_charfn_grid(path: Path, grid: CharFnGrid, meta: Dict[str, Any]) -> Path:
    spec = grid.spec
    points = spec.mesh().reshape(-1, spec.d)
    values = grid.values.reshape(-1)
    data = np.column_stack([points, values.real, values.imag])
    grid_meta = {"kind": "charfn", "extents": list(spec.extents), "points": list(spec.points)}
    return write_table(path, _axis_columns("xi", spec.d) + ["re", "im"], data, {**meta, "grid": grid_meta})


def read_charfn_grid(path: Path) -> CharFnGrid:
    table = read_table(path)
    grid = table.meta.get("grid", {})
    if grid.get("kind") != "charfn":
        raise ConfigError("not a characteristic-function grid file", str(path))
    spec = GridSpec(extents=tuple(grid["extents"]), points=tuple(grid["points"]))
    values = (table.data[:, -2] + 1j * table.data[:, -1]).reshape(spec.points)
    return CharFnGrid(spec=spec, values=values)


def write_wigner_grid(path: Path, grid: WignerGrid, meta: Dict[str, Any]) -> Path:
    points = grid.mesh().reshape(-1, grid.d)
    data = np.column_stack([points, grid.values.reshape(-1)])
    grid_meta = {
        "kind": "wigner",
        "spacings": list(grid.spacings),
        "points": list(grid.values.shape),
        "aliasing_warning": grid.aliasing_warning,
    }
    return write_table(path, _axis_columns("z", grid.d) + ["value"], data, {**meta, "grid": grid_meta})


def read_wigner_grid(path: Path) -> WignerGrid:
    table = read_table(path)
    grid = table.meta.get("grid", {})
    if grid.get("kind") != "wigner":
        raise ConfigError("not a Wigner grid file", str(path))
    values = table.data[:, -1].reshape(tuple(grid["points"]))
    return WignerGrid(
        spacings=tuple(grid["spacings"]), values=values, aliasing_warning=bool(grid.get("aliasing_warning", False))
    )


__all__ = [
    "FLOAT_FORMAT",
    "Provenance",
    "Table",
    "write_table",
    "read_table",
    "write_json",
    "write_charfn_grid",
    "read_charfn_grid",
    "write_wigner_grid",
    "read_wigner_grid",
]
