"""Expectation engines and assembly of the four structural functions.

Three engines share one interface: exact enumeration over a finite
outcome space (probabilities are the exponentiated log density, checked
to sum to one), Monte Carlo with a seeded generator and a fixed-order
compensated reduction (samples are grouped by outcome, so results are
bit-reproducible for a given seed), and closed-form dispatch for models
that register analytic handles.

The structural functions are the four expectations that assemble adjoints
and information operators. With x the vector of integral functionals:

    gamma(v)    = - E[ f_dot . (g(v) - x) ] + E[L(1)]   (mean-zero tangent)
    gamma(v)    = - E[ f_dot . g(v) ]                   (full L2 tangent)
    alpha(v)    = - E[ f_dot . g_dot(v) ]
    kappa(v, u) = - E[ g(v) . f_ddot . g(u) ]
    beta(v, u)  = - E[ g(v) . f_ddot . g_dot(u) ]

On a mean-zero tangent space, alpha, beta, and kappa are determined only
up to shifts that vanish against centered directions (constants for
alpha, separable kernels for kappa and beta); the values reported here
are the plain uncentered representatives. Everything assembled from them
downstream (adjoints, operator inner products, solves) is invariant to
that choice because it is evaluated against centered directions or
projected onto the mean-zero subspace.

The multiplier gamma has no such freedom: it is pinned by
``<(B*B) a, b>_eta = E[(Ba)(Bb)]``. On a mean-zero tangent that forces
the centered first slot plus the additive E[L(1)] term (the point-mass
functional applied to the constant direction 1); dropping either breaks
the identity by an O(1) amount, not by rounding.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, EngineError, NotAvailableError
from .likelihood import (
    ModelComponents,
    ModelState,
    TangentKind,
    ell_of_ones,
    f_ddot_values,
    f_dot_values,
    g_dot_values,
    g_values,
    log_density,
)

# Exact enumeration must normalize to this absolute accuracy.
ENGINE_TOTAL_MASS_TOL = 1e-10
# Monte Carlo standard errors below this floor are treated as exact zeros
# when deciding tolerances downstream.
SE_FLOOR = 1e-300


@dataclass(frozen=True)
class ExpectResult:
    """An expectation with its standard error (zero for exact engines)."""

    value: np.ndarray | float
    se: np.ndarray | float
    n: Optional[int] = None


class _KahanAccumulator:
    """Fixed-order compensated summation for scalars or arrays."""

    def __init__(self, shape):
        self._sum = np.zeros(shape)
        self._comp = np.zeros(shape)

    def add(self, term):
        y = np.asarray(term, dtype=float) - self._comp
        t = self._sum + y
        self._comp = (t - self._sum) - y
        self._sum = t

    @property
    def value(self):
        return self._sum


@dataclass(frozen=True)
class ExactEnumeration:
    """Expectation by exact enumeration of a finite outcome space."""

    outcomes: tuple

    def __init__(self, outcomes: Sequence):
        object.__setattr__(self, "outcomes", tuple(outcomes))
        if not self.outcomes:
            raise DomainError("outcome list is empty")

    def probabilities(self, components: ModelComponents,
                      state: ModelState) -> np.ndarray:
        probs = np.array(
            [np.exp(log_density(components, state, o)) for o in self.outcomes]
        )
        if not np.all(np.isfinite(probs)) or np.any(probs < 0.0):
            raise EngineError("outcome probabilities must be finite and >= 0")
        total = float(np.sum(probs))
        if abs(total - 1.0) > ENGINE_TOTAL_MASS_TOL:
            raise EngineError(
                f"outcome probabilities sum to {total!r}, off by more than "
                f"{ENGINE_TOTAL_MASS_TOL}"
            )
        return probs

    def normalization_deficit(self, components: ModelComponents,
                              state: ModelState) -> float:
        probs = [np.exp(log_density(components, state, o)) for o in self.outcomes]
        return abs(1.0 - float(np.sum(np.asarray(probs))))


@dataclass(frozen=True)
class MonteCarlo:
    """Expectation by simulation.

    ``sampler(state, rng, size)`` returns ``size`` hashable outcomes. The
    engine groups the draws by outcome and reduces in a canonical order,
    so two runs with the same seed agree bit for bit.
    """

    sampler: Callable
    n: int
    seed: int

    def __post_init__(self):
        if self.n <= 0:
            raise DomainError(f"sample size must be positive, got {self.n}")

    def draw_weights(self, state: ModelState) -> list:
        rng = np.random.default_rng(np.random.SeedSequence(self.seed))
        samples = self.sampler(state, rng, self.n)
        counts = Counter(samples)
        items = sorted(counts.items(), key=lambda kv: repr(kv[0]))
        return [(obs, cnt / self.n) for obs, cnt in items]


@dataclass(frozen=True)
class ClosedForm:
    """Dispatch engine for models that register analytic handles.

    ``handles`` maps names to callables. Recognized names:

    - ``"structural"``: ``fn(components, state) -> StructuralFunctions``
    - ``"expect:<name>"``: ``fn(components, state, functional) -> ExpectResult``
      for functionals carrying a matching ``name`` attribute.
    """

    handles: dict

    def handle(self, name: str):
        try:
            return self.handles[name]
        except KeyError:
            raise NotAvailableError(
                f"no closed-form handle registered for {name!r}"
            ) from None


def _weighted_moments(pairs, functional):
    """Mean and raw second moment of a functional over (obs, weight)
    pairs, each compensated in the given fixed order."""
    first = np.asarray(functional(pairs[0][0]), dtype=float)
    acc = _KahanAccumulator(first.shape)
    acc2 = _KahanAccumulator(first.shape)
    for obs, weight in pairs:
        val = np.asarray(functional(obs), dtype=float)
        acc.add(weight * val)
        acc2.add(weight * val * val)
    return acc.value, acc2.value


def _as_scalar(value, se):
    """0-d arrays come back as plain floats."""
    if np.ndim(value) == 0:
        return float(value), float(se)
    return value, se


def expect(engine, components: ModelComponents, state: ModelState,
           functional: Callable) -> ExpectResult:
    """Expectation of ``functional(obs)`` (scalar or array valued) under
    the model's outcome law at the given state."""
    if isinstance(engine, ExactEnumeration):
        probs = engine.probabilities(components, state)
        pairs = list(zip(engine.outcomes, probs))
        value, _ = _weighted_moments(pairs, functional)
        return ExpectResult(*_as_scalar(value, np.zeros_like(value)), None)
    if isinstance(engine, MonteCarlo):
        pairs = engine.draw_weights(state)
        value, second = _weighted_moments(pairs, functional)
        var = np.maximum(second - value * value, 0.0)
        return ExpectResult(*_as_scalar(value, np.sqrt(var / engine.n)),
                            engine.n)
    if isinstance(engine, ClosedForm):
        name = getattr(functional, "name", None)
        if name is None:
            raise NotAvailableError(
                "closed-form expectation needs a functional with a name"
            )
        return engine.handle(f"expect:{name}")(components, state, functional)
    raise DomainError(f"unknown engine {engine!r}")


def mc_convergence_probe(engine: MonteCarlo, components: ModelComponents,
                         state: ModelState, functional: Callable,
                         sizes: Sequence[int]) -> list:
    """Re-run a Monte Carlo expectation at several sample sizes with
    independent substreams; returns [(n, value, se), ...] so callers can
    verify the 1/sqrt(n) error decay."""
    if not isinstance(engine, MonteCarlo):
        raise DomainError("convergence probe requires a MonteCarlo engine")
    children = np.random.SeedSequence(engine.seed).spawn(len(sizes))
    out = []
    for size, child in zip(sizes, children):
        sub = MonteCarlo(engine.sampler, int(size), child.entropy)
        res = expect(sub, components, state, functional)
        out.append((int(size), res.value, res.se))
    return out


@dataclass(frozen=True)
class StructuralFunctions:
    """The four structural expectations on a grid of size m with p
    parameters, plus standard errors (zeros for exact engines)."""

    gamma: np.ndarray        # (m,)
    alpha: np.ndarray        # (m, p)
    kappa: np.ndarray        # (m, m)
    beta: np.ndarray         # (m, m, p)
    se_gamma: np.ndarray
    se_alpha: np.ndarray
    se_kappa: np.ndarray
    se_beta: np.ndarray
    engine: str = "exact"
    n: Optional[int] = None

    def max_se(self) -> float:
        parts = [self.se_gamma, self.se_alpha, self.se_kappa, self.se_beta]
        return float(max(np.max(np.abs(x)) if x.size else 0.0 for x in parts))

    def is_exact(self) -> bool:
        return self.engine != "mc"


def _structural_contrib(components: ModelComponents, state: ModelState, obs):
    """Per-outcome integrands of (gamma, alpha, kappa, beta)."""
    w = state.eta.masses
    gv = g_values(components, state, obs)
    gd = g_dot_values(components, state, obs)
    x = w @ gv
    fd = f_dot_values(components, x, obs)
    fdd = f_ddot_values(components, x, obs)
    if components.tangent is TangentKind.L2_ZERO:
        gamma = -((gv - x[np.newaxis, :]) @ fd) \
            + ell_of_ones(components, state, obs)
    else:
        gamma = -(gv @ fd)
    alpha = -np.einsum("vdj,d->vj", gd, fd)
    kappa = -np.einsum("vd,de,ue->vu", gv, fdd, gv)
    beta = -np.einsum("vd,de,uej->vuj", gv, fdd, gd)
    return gamma, alpha, kappa, beta


def structural_functions(engine, components: ModelComponents,
                         state: ModelState) -> StructuralFunctions:
    """Assemble the structural functions under the given engine."""
    if isinstance(engine, ClosedForm):
        return engine.handle("structural")(components, state)

    if isinstance(engine, ExactEnumeration):
        probs = engine.probabilities(components, state)
        pairs = list(zip(engine.outcomes, probs))
        mc = False
        n = None
        label = "exact"
    elif isinstance(engine, MonteCarlo):
        pairs = engine.draw_weights(state)
        mc = True
        n = engine.n
        label = "mc"
    else:
        raise DomainError(f"unknown engine {engine!r}")

    m = state.eta.size
    p = components.p
    shapes = [(m,), (m, p), (m, m), (m, m, p)]
    acc = [_KahanAccumulator(s) for s in shapes]
    acc2 = [_KahanAccumulator(s) for s in shapes] if mc else None
    for obs, weight in pairs:
        pieces = _structural_contrib(components, state, obs)
        for k, piece in enumerate(pieces):
            acc[k].add(weight * piece)
            if mc:
                acc2[k].add(weight * piece * piece)

    values = [a.value for a in acc]
    # Symmetrize kappa; it is symmetric in exact arithmetic.
    values[2] = 0.5 * (values[2] + values[2].T)
    if mc:
        ses = []
        for a, a2 in zip(acc, acc2):
            var = np.maximum(a2.value - a.value * a.value, 0.0)
            ses.append(np.sqrt(var / n))
    else:
        ses = [np.zeros(s) for s in shapes]
    return StructuralFunctions(
        gamma=values[0], alpha=values[1], kappa=values[2], beta=values[3],
        se_gamma=ses[0], se_alpha=ses[1], se_kappa=ses[2], se_beta=ses[3],
        engine=label, n=n,
    )


def make_categorical_sampler(exact: ExactEnumeration,
                             components: ModelComponents) -> Callable:
    """Sampler over a finite outcome space driven by the exact engine's
    probabilities at the sampled state (renormalized; tiny-mass designs
    carry a deficit far below sampling noise)."""

    def sampler(state: ModelState, rng: np.random.Generator, size: int):
        probs = exact.probabilities(components, state)
        probs = probs / probs.sum()
        idx = rng.choice(len(exact.outcomes), size=size, p=probs)
        return [exact.outcomes[int(i)] for i in idx]

    return sampler
