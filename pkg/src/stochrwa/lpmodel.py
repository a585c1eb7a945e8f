"""Sparse constraint-system container shared by all formulations and solvers.

A model is a maximization over columns with bounds and optional integrality,
subject to sparse rows with sense <=, =, or >=.  Columns and rows are keyed
by structured keys that record their meaning (which pair, arc, wavelength,
scenario), so solutions and dual vectors can be mapped back to network
semantics without positional bookkeeping.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Mapping

import numpy as np
import scipy.sparse as sp

INF = math.inf


@dataclass(frozen=True)
class VarKey:
    """Structured column identity.

    kinds: ``x`` first-stage assignment (pair, arc, wavelength); ``y``
    recourse assignment (pair, arc, wavelength, scenario); ``z`` granted
    count (pair, scenario); ``eta`` recourse value (scenario); ``beta``
    first-stage link load (arc).
    """

    kind: str
    pair: tuple[int, int] | None = None
    arc: int | None = None
    wavelength: int | None = None
    scenario: int | None = None


@dataclass(frozen=True)
class RowKey:
    """Structured row identity (constraint family plus its indices)."""

    kind: str
    pair: tuple[int, int] | None = None
    arc: int | None = None
    wavelength: int | None = None
    node: int | None = None
    scenario: int | None = None
    serial: int | None = None  # disambiguates cut rows


@dataclass
class Column:
    key: VarKey
    lower: float
    upper: float
    objective: float
    is_integer: bool


@dataclass
class Row:
    key: RowKey
    coeffs: tuple[tuple[int, float], ...]  # (column index, coefficient)
    sense: str  # '<=', '=', '>='
    rhs: float


class ModelError(ValueError):
    pass


_SENSES = ("<=", "=", ">=")


@dataclass
class LpModel:
    """Maximization model with bounded columns and sparse rows."""

    name: str = "model"
    cols: list[Column] = field(default_factory=list)
    rows: list[Row] = field(default_factory=list)
    _col_index: dict[VarKey, int] = field(default_factory=dict, repr=False)
    _row_index: dict[RowKey, int] = field(default_factory=dict, repr=False)

    # -- construction ------------------------------------------------------

    def add_col(
        self,
        key: VarKey,
        lower: float = 0.0,
        upper: float = INF,
        objective: float = 0.0,
        is_integer: bool = False,
    ) -> int:
        if key in self._col_index:
            raise ModelError(f"duplicate column key {key}")
        if lower > upper:
            raise ModelError(f"empty bound range [{lower}, {upper}] for {key}")
        if is_integer and not (math.isfinite(lower) and math.isfinite(upper)):
            raise ModelError(f"integer column {key} needs finite bounds")
        idx = len(self.cols)
        self.cols.append(Column(key, float(lower), float(upper), float(objective), is_integer))
        self._col_index[key] = idx
        return idx

    def add_row(
        self,
        key: RowKey,
        coeffs: Mapping[int, float] | Iterable[tuple[int, float]],
        sense: str,
        rhs: float,
    ) -> int:
        if key in self._row_index:
            raise ModelError(f"duplicate row key {key}")
        if sense not in _SENSES:
            raise ModelError(f"unknown row sense {sense!r}")
        items = tuple(coeffs.items()) if isinstance(coeffs, Mapping) else tuple(coeffs)
        for j, _ in items:
            if not (0 <= j < len(self.cols)):
                raise ModelError(f"row {key} references undeclared column {j}")
        idx = len(self.rows)
        self.rows.append(Row(key, items, sense, float(rhs)))
        self._row_index[key] = idx
        return idx

    # -- lookups -----------------------------------------------------------

    def var_index(self, key: VarKey) -> int:
        try:
            return self._col_index[key]
        except KeyError:
            raise ModelError(f"unknown variable key {key}") from None

    def var_key(self, index: int) -> VarKey:
        try:
            return self.cols[index].key
        except IndexError:
            raise ModelError(f"column index {index} out of range") from None

    def has_var(self, key: VarKey) -> bool:
        return key in self._col_index

    def row_index(self, key: RowKey) -> int:
        try:
            return self._row_index[key]
        except KeyError:
            raise ModelError(f"unknown row key {key}") from None

    def row_key(self, index: int) -> RowKey:
        return self.rows[index].key

    @property
    def num_cols(self) -> int:
        return len(self.cols)

    @property
    def num_rows(self) -> int:
        return len(self.rows)

    def cols_of_kind(self, kind: str) -> list[int]:
        return [j for j, c in enumerate(self.cols) if c.key.kind == kind]

    def set_rhs(self, row_index: int, rhs: float) -> None:
        self.rows[row_index].rhs = float(rhs)

    def set_objective(self, col_index: int, coefficient: float) -> None:
        self.cols[col_index].objective = float(coefficient)

    def relax_integrality(self, kinds: Iterable[str] | None = None) -> None:
        """Drop integrality, on all columns or just the given key kinds."""
        wanted = None if kinds is None else set(kinds)
        for col in self.cols:
            if wanted is None or col.key.kind in wanted:
                col.is_integer = False

    def copy(self) -> "LpModel":
        dup = LpModel(name=self.name)
        dup.cols = [Column(c.key, c.lower, c.upper, c.objective, c.is_integer) for c in self.cols]
        dup.rows = [Row(r.key, r.coeffs, r.sense, r.rhs) for r in self.rows]
        dup._col_index = dict(self._col_index)
        dup._row_index = dict(self._row_index)
        return dup

    # -- array views -------------------------------------------------------

    def objective_vector(self) -> np.ndarray:
        return np.array([c.objective for c in self.cols], dtype=float)

    def bound_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        lower = np.array([c.lower for c in self.cols], dtype=float)
        upper = np.array([c.upper for c in self.cols], dtype=float)
        return lower, upper

    def integer_mask(self) -> np.ndarray:
        return np.array([c.is_integer for c in self.cols], dtype=bool)

    def constraint_matrix(self) -> tuple[sp.csr_matrix, np.ndarray, list[str]]:
        """Rows as a CSR matrix plus rhs vector and sense list."""
        data: list[float] = []
        indices: list[int] = []
        indptr: list[int] = [0]
        for row in self.rows:
            for j, a in row.coeffs:
                indices.append(j)
                data.append(a)
            indptr.append(len(indices))
        mat = sp.csr_matrix(
            (np.array(data, dtype=float), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
            shape=(len(self.rows), len(self.cols)),
        )
        rhs = np.array([r.rhs for r in self.rows], dtype=float)
        senses = [r.sense for r in self.rows]
        return mat, rhs, senses

    def objective_value(self, values: np.ndarray) -> float:
        return float(self.objective_vector() @ values)

    # -- LP text export ----------------------------------------------------

    def write_lp(self, stream: IO[str]) -> None:
        """Emit standard LP text format for cross-checking with other solvers."""
        names = [_lp_name(c.key, j) for j, c in enumerate(self.cols)]
        stream.write(f"\\ {self.name}\nMaximize\n obj:")
        terms = [(c.objective, names[j]) for j, c in enumerate(self.cols) if c.objective != 0.0]
        stream.write(_lp_expr(terms) if terms else " 0 " + names[0] if names else " 0")
        stream.write("\nSubject To\n")
        for i, row in enumerate(self.rows):
            op = {"<=": "<=", "=": "=", ">=": ">="}[row.sense]
            expr = _lp_expr([(a, names[j]) for j, a in row.coeffs]) if row.coeffs else " 0 " + names[0]
            stream.write(f" r{i}:{expr} {op} {_num(row.rhs)}\n")
        stream.write("Bounds\n")
        for j, c in enumerate(self.cols):
            lo = "-inf" if c.lower == -INF else _num(c.lower)
            hi = "+inf" if c.upper == INF else _num(c.upper)
            stream.write(f" {lo} <= {names[j]} <= {hi}\n")
        generals = [names[j] for j, c in enumerate(self.cols) if c.is_integer]
        if generals:
            stream.write("Generals\n")
            for name in generals:
                stream.write(f" {name}\n")
        stream.write("End\n")


def _num(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _lp_expr(terms: list[tuple[float, str]]) -> str:
    parts = []
    for a, name in terms:
        sign = "+" if a >= 0 else "-"
        mag = abs(a)
        coef = "" if mag == 1.0 else f"{_num(mag)} "
        parts.append(f" {sign} {coef}{name}")
    return "".join(parts)


def _lp_name(key: VarKey, index: int) -> str:
    bits = [key.kind]
    if key.pair is not None:
        bits.append(f"p{key.pair[0]}.{key.pair[1]}")
    if key.arc is not None:
        bits.append(f"a{key.arc}")
    if key.wavelength is not None:
        bits.append(f"w{key.wavelength}")
    if key.scenario is not None:
        bits.append(f"s{key.scenario}")
    name = "_".join(bits)
    return name if name != key.kind else f"{key.kind}{index}"
