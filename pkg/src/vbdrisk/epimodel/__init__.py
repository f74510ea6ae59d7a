"""Seven-compartment host-vector metapopulation model over a patch graph.

Humans (S, E, I, A, R) move between patches at per-capita rates ``alpha``;
vectors (S_v, I_v) stay put and relax toward the patch carrying capacity.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .. import _backend
from ..errors import ConfigError, NotConvergedError, StiffnessError, ValidationError
from ..flux import FluxMatrix
from ..geo import Patch

COMPARTMENTS = ("S_h", "E_h", "I_h", "A_h", "R_h", "S_v", "I_v")
HUMAN = slice(0, 5)
SEASON_DAYS = 100.0
BASE_DT = 0.1
HOLD_DAYS = 10.0
MAX_HALVINGS = 40


@dataclass(frozen=True)
class EpiParams:
    b: float = 0.5
    beta_hv: float = 0.5
    beta_vh: float = 0.4
    delta: float = 1.0 / 5.0
    gamma: float = 0.25
    phi: float = 0.18
    mu: float = 1.0 / 14.0  # not tabulated; ~two-week Aedes lifespan

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"parameter {f.name} must be finite and >= 0, got {v}")
        if self.phi > 1:
            raise ValidationError("phi must lie in [0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.b, self.beta_hv, self.beta_vh, self.delta,
                         self.gamma, self.phi, self.mu], dtype=float)


@dataclass
class ModelConfig:
    """Parameter file contents: the rates plus source-pinning options."""

    params: EpiParams = field(default_factory=EpiParams)
    pin_source: bool = True
    source_prevalence: float = 1e-3

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelConfig":
        d = dict(d)
        pin = d.pop("pin_source", True)
        prev = d.pop("source_prevalence", 1e-3)
        names = {f.name for f in fields(EpiParams)}
        unknown = set(d) - names
        if unknown:
            raise ConfigError(f"unknown model parameters: {sorted(unknown)}")
        if not 0.0 <= float(prev) <= 1.0:
            raise ConfigError("source_prevalence must lie in [0, 1]")
        return cls(EpiParams(**{k: float(v) for k, v in d.items()}), bool(pin), float(prev))

    @classmethod
    def load(cls, path: str | Path) -> "ModelConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        d = asdict(self.params)
        d["pin_source"] = self.pin_source
        d["source_prevalence"] = self.source_prevalence
        return d


@dataclass
class EpiState:
    """Compartment array of shape (7, Z), rows ordered as ``COMPARTMENTS``."""

    y: np.ndarray

    def __post_init__(self):
        self.y = np.ascontiguousarray(self.y, dtype=float)
        if self.y.ndim != 2 or self.y.shape[0] != 7:
            raise ValidationError(f"state must have shape (7, Z), got {self.y.shape}")
        if not np.all(np.isfinite(self.y)) or np.any(self.y < 0):
            raise ValidationError("state compartments must be finite and non-negative")

    def __getitem__(self, name: str) -> np.ndarray:
        return self.y[COMPARTMENTS.index(name)]

    @property
    def n_patches(self) -> int:
        return self.y.shape[1]

    def humans(self) -> np.ndarray:
        return self.y[HUMAN].sum(axis=0)

    def vectors(self) -> np.ndarray:
        return self.y[5] + self.y[6]

    def copy(self) -> "EpiState":
        return EpiState(self.y.copy())


@dataclass
class PatchGraph:
    patches: list[Patch]
    alpha: FluxMatrix
    _edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        ids = [p.id for p in self.patches]
        if not ids:
            raise ValidationError("patch graph needs at least one patch")
        if len(set(ids)) != len(ids):
            raise ValidationError("patch ids must be unique")
        if list(self.alpha.ids) != ids:
            raise ValidationError("flux matrix ids do not match patch order")
        src, dst = np.nonzero(self.alpha.alpha)
        self._edges = (np.ascontiguousarray(src, dtype=np.int64),
                       np.ascontiguousarray(dst, dtype=np.int64),
                       np.ascontiguousarray(self.alpha.alpha[src, dst], dtype=float))

    @property
    def ids(self) -> list[str]:
        return [p.id for p in self.patches]

    def index(self, pid: str) -> int:
        try:
            return self.ids.index(pid)
        except ValueError:
            raise ValidationError(f"unknown patch {pid!r}") from None

    @property
    def nh(self) -> np.ndarray:
        return np.array([p.human_population for p in self.patches], dtype=float)

    @property
    def nv(self) -> np.ndarray:
        return np.array([p.vector_capacity for p in self.patches], dtype=float)

    def kernel_args(self, params: EpiParams):
        src, dst, rate = self._edges
        return src, dst, rate, self.nh, self.nv, params.as_array()


@dataclass
class SteadyState:
    state: EpiState
    residual: float
    t_elapsed: float
    converged: bool
    t_reached: float | None = None
    ids: list[str] = field(default_factory=list)


def initial_state(graph: PatchGraph, source: str | None = None,
                  source_prevalence: float = 0.0, params: EpiParams | None = None) -> EpiState:
    """Everyone susceptible and vectors at capacity; when ``source`` is given its
    humans start at the pinned prevalence split (E from the E->I/A balance)."""
    nh = graph.nh
    y = np.zeros((7, len(nh)))
    y[0] = nh
    y[5] = graph.nv
    if source is not None and source_prevalence > 0:
        p = params or EpiParams()
        s = graph.index(source)
        n = nh[s]
        inf = source_prevalence * n
        e = inf * p.gamma / p.delta if p.delta > 0 else 0.0
        y[:5, s] = [n - inf - e, e, (1 - p.phi) * inf, p.phi * inf, 0.0]
        if y[0, s] < 0:
            raise ValidationError("source prevalence too large for its population")
    return EpiState(y)


def _pinned(graph: PatchGraph, pinned: str | None) -> int:
    return -1 if pinned is None else graph.index(pinned)


def rhs(state: EpiState, graph: PatchGraph, params: EpiParams, pinned: str | None = None) -> np.ndarray:
    """Time derivative, shaped like ``state.y``; a pinned patch's humans are held fixed."""
    return np.asarray(_backend.kernels.rhs(state.y, *graph.kernel_args(params), _pinned(graph, pinned)))


def step_rk4(state: EpiState, graph: PatchGraph, params: EpiParams, dt: float,
             pinned: str | None = None) -> EpiState:
    """Classical RK4 over ``dt`` days; undershooting below -1e-9 halves the step."""
    if not dt > 0:
        raise ValidationError("dt must be positive")
    y, stiff = _backend.kernels.advance(state.y, dt, *graph.kernel_args(params),
                                        _pinned(graph, pinned), MAX_HALVINGS)
    if stiff:
        raise StiffnessError(f"step rejected after {MAX_HALVINGS} halvings", state=state.y.copy())
    return EpiState(y)


def integrate_to_steady(init: EpiState, graph: PatchGraph, params: EpiParams, tol: float = 1e-9,
                        t_max: float = 200_000.0, pinned: str | None = None, dt: float = BASE_DT,
                        hold_days: float = HOLD_DAYS) -> SteadyState:
    """Integrate until max |dx/dt| / max(x, 1) stays below ``tol`` for ``hold_days``."""
    if not tol > 0 or not t_max > 0:
        raise ValidationError("tol and t_max must be positive")
    if init.n_patches != len(graph.patches):
        raise ValidationError("state and graph disagree on patch count")
    y, t, res, reached, converged, stiff = _backend.kernels.integrate(
        init.y, dt, tol, t_max, hold_days, *graph.kernel_args(params),
        _pinned(graph, pinned), MAX_HALVINGS)
    if stiff:
        raise StiffnessError(f"stiffness at t={t:.3f} days", state=np.asarray(y).copy())
    return SteadyState(EpiState(y), float(res), float(t), bool(converged),
                       float(reached) if converged else None, graph.ids)


def risk_scores(ss: SteadyState) -> dict[str, float]:
    """Relative risk per patch: symptomatic count scaled to a 100-day season."""
    if not ss.converged:
        raise NotConvergedError(
            f"steady state not reached (residual {ss.residual:.3g} after {ss.t_elapsed:g} days)")
    ih = ss.state["I_h"]
    return {pid: SEASON_DAYS / 365.0 * float(v) for pid, v in zip(ss.ids, ih)}


def rank_patches(risks: Mapping[str, float], exclude: Sequence[str] = ()) -> list[tuple[str, float]]:
    """Descending risk, ties by patch id."""
    skip = set(exclude)
    return sorted(((k, v) for k, v in risks.items() if k not in skip), key=lambda kv: (-kv[1], kv[0]))


def backend_name() -> str:
    return _backend.NAME
