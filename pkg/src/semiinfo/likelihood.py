"""Model components: likelihoods built from a finite-dimensional parameter
and a discrete measure, with scores in both.

A model here is a log density of the form

    log p(o; theta, eta) = r(theta, o) + f(x(theta, eta, o), o) + L(log w, o)

where ``x = integral of g(u; theta, o) deta(u)`` is a d-vector of linear
functionals of eta, f is a smooth outer function, and L is a linear
functional of directions (for likelihoods with point-mass factors such as
hazard atoms; L may be absent). The parameter score is

    score_theta = r_dot + f_dot . (integral of g_dot deta)

and the measure score in a tangent direction a is

    (B a)(o) = f_dot . (integral of g a deta) + L(a, o).

On a probability measure the tangent space is the mean-zero subspace of
L2(eta) and directions fed to B must be centered; on a positive finite
measure it is all of L2(eta).

Component callables receive ``(theta, obs, points)`` for g and g_dot,
``(x, obs)`` for f and its derivatives, ``(values, obs)`` for L, and
``(theta, obs)`` for r and r_dot. Scalar models (d == 1) may work with
scalars and flat arrays; the accessors below normalize shapes.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError, DomainError, EvaluationError
from .measure import (
    DiscreteMeasure,
    MeasureKind,
    as_values,
    require_centered,
)


class TangentKind(enum.Enum):
    """Which subspace of L2(eta) perturbations may move along."""

    L2 = "l2"
    L2_ZERO = "l2_zero"


# The measure kind each tangent space presumes.
_KIND_FOR_TANGENT = {
    TangentKind.L2: MeasureKind.POSITIVE_FINITE,
    TangentKind.L2_ZERO: MeasureKind.PROBABILITY,
}


@dataclass(frozen=True)
class ModelComponents:
    """The six building blocks of a model likelihood plus dimensions.

    ``ell`` is the linear functional L (None when the likelihood has no
    point-mass factor). ``gdim`` is d, the number of integral functionals
    feeding f.
    """

    p: int
    tangent: TangentKind
    r: Callable
    r_dot: Callable
    g: Callable
    g_dot: Callable
    f: Callable
    f_dot: Callable
    f_ddot: Callable
    ell: Optional[Callable] = None
    gdim: int = 1
    label: str = ""

    def __post_init__(self):
        if self.p < 0:
            raise DomainError(f"parameter dimension must be >= 0, got {self.p}")
        if self.gdim < 1:
            raise DomainError(f"gdim must be >= 1, got {self.gdim}")
        if not isinstance(self.tangent, TangentKind):
            raise DomainError(f"tangent must be a TangentKind, got {self.tangent!r}")


@dataclass(frozen=True)
class ModelState:
    """A point (theta, eta) in the model's parameter space."""

    theta: np.ndarray
    eta: DiscreteMeasure

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float)
        if th.ndim != 1:
            raise DimensionError(f"theta must be 1-d, got shape {th.shape}")
        if not np.all(np.isfinite(th)):
            raise DomainError("theta has non-finite entries")
        th = th.copy()
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)


def check_state(components: ModelComponents, state: ModelState) -> None:
    """Validate that a state is usable with the given components:
    matching parameter dimension and measure kind consistent with the
    tangent space."""
    if state.theta.size != components.p:
        raise DimensionError(
            f"theta has length {state.theta.size}, model expects {components.p}"
        )
    expected = _KIND_FOR_TANGENT[components.tangent]
    if state.eta.kind is not expected:
        raise DomainError(
            f"tangent space {components.tangent.value} requires a "
            f"{expected.value} measure, got {state.eta.kind.value}"
        )


def g_values(components: ModelComponents, state: ModelState, obs) -> np.ndarray:
    """g on the grid as an (m, d) array."""
    pts = state.eta.grid.points
    arr = np.asarray(components.g(state.theta, obs, pts), dtype=float)
    m, d = pts.size, components.gdim
    if d == 1 and arr.shape == (m,):
        arr = arr[:, np.newaxis]
    if arr.shape != (m, d):
        raise DimensionError(
            f"g returned shape {arr.shape}, expected ({m}, {d})"
        )
    return arr


def g_dot_values(components: ModelComponents, state: ModelState, obs) -> np.ndarray:
    """dg/dtheta on the grid as an (m, d, p) array."""
    pts = state.eta.grid.points
    arr = np.asarray(components.g_dot(state.theta, obs, pts), dtype=float)
    m, d, p = pts.size, components.gdim, components.p
    if d == 1 and arr.shape == (m, p):
        arr = arr[:, np.newaxis, :]
    if arr.shape != (m, d, p):
        raise DimensionError(
            f"g_dot returned shape {arr.shape}, expected ({m}, {d}, {p})"
        )
    return arr


def _x_of(components: ModelComponents, state: ModelState, obs,
          gv: np.ndarray | None = None) -> np.ndarray:
    gv = g_values(components, state, obs) if gv is None else gv
    return state.eta.masses @ gv


def _f_args(components: ModelComponents, x: np.ndarray):
    return float(x[0]) if components.gdim == 1 else x


def f_dot_values(components: ModelComponents, x: np.ndarray, obs) -> np.ndarray:
    out = np.asarray(components.f_dot(_f_args(components, x), obs), dtype=float)
    d = components.gdim
    if out.shape == ():
        out = out.reshape(1)
    if out.shape != (d,):
        raise DimensionError(f"f_dot returned shape {out.shape}, expected ({d},)")
    return out


def f_ddot_values(components: ModelComponents, x: np.ndarray, obs) -> np.ndarray:
    out = np.asarray(components.f_ddot(_f_args(components, x), obs), dtype=float)
    d = components.gdim
    if out.shape == ():
        out = out.reshape(1, 1)
    if out.shape != (d, d):
        raise DimensionError(
            f"f_ddot returned shape {out.shape}, expected ({d}, {d})"
        )
    return out


def log_density(components: ModelComponents, state: ModelState, obs) -> float:
    """Log density of one observation. May be -inf (zero-probability
    outcome, for example an event at a zero-mass grid point); NaN raises
    :class:`EvaluationError`."""
    check_state(components, state)
    x = _x_of(components, state, obs)
    val = float(components.r(state.theta, obs))
    val += float(components.f(_f_args(components, x), obs))
    if components.ell is not None:
        with np.errstate(divide="ignore"):
            logw = np.log(state.eta.masses)
        val += float(components.ell(logw, obs))
    if np.isnan(val):
        raise EvaluationError(f"log density is NaN at observation {obs!r}")
    return val


def score_theta(components: ModelComponents, state: ModelState, obs) -> np.ndarray:
    """Parameter score, shape (p,)."""
    check_state(components, state)
    gv = g_values(components, state, obs)
    x = state.eta.masses @ gv
    gd = g_dot_values(components, state, obs)
    x_dot = np.einsum("ide,i->de", gd, state.eta.masses)
    fd = f_dot_values(components, x, obs)
    out = np.asarray(components.r_dot(state.theta, obs), dtype=float).reshape(
        components.p
    ) + fd @ x_dot
    if not np.all(np.isfinite(out)):
        raise EvaluationError(f"parameter score not finite at {obs!r}")
    return out


def score_operator(components: ModelComponents, state: ModelState, obs, a) -> float:
    """Measure score (B a)(o) in the tangent direction a.

    For a mean-zero tangent space the direction must be centered under
    the state's measure (checked numerically).
    """
    check_state(components, state)
    if components.tangent is TangentKind.L2_ZERO:
        av = require_centered(a, state.eta, "tangent direction")
    else:
        av = as_values(a, state.eta.size)
    gv = g_values(components, state, obs)
    x = state.eta.masses @ gv
    fd = f_dot_values(components, x, obs)
    val = float(fd @ ((state.eta.masses * av) @ gv))
    if components.ell is not None:
        val += float(components.ell(av, obs))
    if not np.isfinite(val):
        raise EvaluationError(f"measure score not finite at {obs!r}")
    return val


def ell_of_ones(components: ModelComponents, state: ModelState, obs) -> float:
    """L applied to the constant direction 1 (0 when L is absent)."""
    if components.ell is None:
        return 0.0
    return float(components.ell(np.ones(state.eta.size), obs))
