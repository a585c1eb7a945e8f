"""Pluggable solver backends.

A backend bundles an LP solver (with duals) and a MIP solver (with lazy-cut
callbacks) behind one small surface, so external solvers can be wrapped
without touching the decomposition code.  The in-tree reference backend
implements both capabilities; its node relaxations can run on either the
bounded-variable simplex or the HiGHS adapter.
"""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np

from ..lpmodel import LpModel
from . import bnb, highs, simplex
from .types import CapabilityError, LpSolution, MipSolution, SolverConfig

DUALS = "duals"
LAZY_CUTS = "lazy_cuts"


@runtime_checkable
class SolverBackend(Protocol):
    name: str

    def capabilities(self) -> frozenset[str]: ...

    def solve_lp(
        self,
        model: LpModel,
        config: SolverConfig | None = None,
        *,
        var_bounds: tuple[np.ndarray, np.ndarray] | None = None,
    ) -> LpSolution: ...

    def solve_mip(
        self,
        model: LpModel,
        config: SolverConfig | None = None,
        callback: bnb.CutCallback | None = None,
    ) -> MipSolution: ...


class ReferenceBackend:
    """In-tree backend: branch and bound over a selectable LP engine."""

    def __init__(self, lp_engine: str = "simplex"):
        if lp_engine not in ("simplex", "highs"):
            raise CapabilityError(f"unknown LP engine {lp_engine!r}")
        self.lp_engine = lp_engine
        self.name = f"reference-{lp_engine}"
        self._lp = simplex.solve_lp if lp_engine == "simplex" else highs.solve_lp

    def capabilities(self) -> frozenset[str]:
        return frozenset((DUALS, LAZY_CUTS))

    def solve_lp(self, model, config=None, *, var_bounds=None) -> LpSolution:
        return self._lp(model, config, var_bounds=var_bounds)

    def solve_mip(self, model, config=None, callback=None) -> MipSolution:
        return bnb.solve_mip(model, config, callback, lp_solve=self._lp)


def get_backend(name: str) -> SolverBackend:
    """Resolve a backend by name: ``simplex`` or ``highs``."""
    if name in ("simplex", "reference", "reference-simplex"):
        return ReferenceBackend("simplex")
    if name in ("highs", "reference-highs"):
        return ReferenceBackend("highs")
    raise CapabilityError(f"unknown solver backend {name!r}")


def require_capabilities(backend: SolverBackend, needed: frozenset[str]) -> None:
    missing = needed - backend.capabilities()
    if missing:
        raise CapabilityError(
            f"backend {backend.name!r} lacks required capabilities: {sorted(missing)}"
        )
