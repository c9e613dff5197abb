"""Shared container for the bundled example models.

Each model module exposes ``build(**overrides) -> ZooModel``. A ZooModel
packages the likelihood components, a default state, an exact enumeration
engine over the finite outcome space, a sampler for Monte Carlo runs, and
independently derived reference quantities used by the test suite. The
references are computed from simplified closed forms, never through the
structural-function pipeline, so agreement between the two is evidence
rather than tautology.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ..calculus import Category
from ..engines import ExactEnumeration, make_categorical_sampler
from ..likelihood import ModelComponents, ModelState
from ..measure import DiscreteMeasure, Grid, MeasureKind


@dataclass(frozen=True)
class ZooModel:
    """A ready-to-run example model with reference answers."""

    model_id: str
    components: ModelComponents
    state: ModelState
    exact: ExactEnumeration
    sampler: Callable
    references: dict
    expected_category: Category
    adjoint_tol: float
    notes: str = ""
    extras: dict = field(default_factory=dict)


def positive_measure(points, masses, tau) -> DiscreteMeasure:
    return DiscreteMeasure(Grid(np.asarray(points, dtype=float), float(tau)),
                           np.asarray(masses, dtype=float),
                           MeasureKind.POSITIVE_FINITE)


def probability_measure(points, masses, tau) -> DiscreteMeasure:
    return DiscreteMeasure(Grid(np.asarray(points, dtype=float), float(tau)),
                           np.asarray(masses, dtype=float),
                           MeasureKind.PROBABILITY)


def finish(model_id: str, components: ModelComponents, state: ModelState,
           outcomes, references: dict, expected_category: Category,
           adjoint_tol: float, notes: str = "",
           extras: Optional[dict] = None) -> ZooModel:
    """Wire the exact engine and default sampler around a model."""
    exact = ExactEnumeration(outcomes)
    sampler = make_categorical_sampler(exact, components)
    return ZooModel(
        model_id=model_id, components=components, state=state, exact=exact,
        sampler=sampler, references=references,
        expected_category=expected_category, adjoint_tol=adjoint_tol,
        notes=notes, extras=dict(extras or {}),
    )
