import dataclasses

import numpy as np
import pytest

from semiinfo import (
    PropertyResult,
    check_adjoint_identity,
    check_centering_construction,
    check_score_fd,
    run_suite,
    suite_for_model,
    zoo,
)
from semiinfo.errors import DomainError
from semiinfo.measure import center
from semiinfo.validate import FD_ORDER_WINDOW, fd_order_ok


def test_property_result_pass_rule():
    assert PropertyResult("x", 1e-12, 1e-10).passed
    assert PropertyResult("x", 1e-10, 1e-10).passed
    assert not PropertyResult("x", 2e-10, 1e-10).passed


def test_fd_order_ok_window():
    assert fd_order_ok(4e-6, 1e-6)
    assert not fd_order_ok(2e-6, 1e-6)
    assert not fd_order_ok(8e-6, 1e-6)
    # both errors at rounding level: the probe is vacuous, not failed
    assert fd_order_ok(3e-12, 1e-12)
    # a measured exact-pair gap lifts the floor
    assert fd_order_ok(3e-9, 3e-9, exact_pair=1e-9)


def test_adjoint_identity_on_toy_models():
    for model_id in ("cox_rc", "mixture"):
        model = zoo.build(model_id)
        eta = model.state.eta
        b = np.ones(eta.size)
        if model_id == "mixture":
            b = center(np.arange(eta.size, dtype=float), eta).values
        res = check_adjoint_identity(model.exact, model.components,
                                     model.state, 0, b)
        assert res.passed
        assert res.context["exact_pair"] < 1e-10
        assert abs(res.context["t1_adjoint_pairing"]
                   - res.context["t2_expectation"]) < 1e-10


def test_adjoint_identity_rejects_uncentered_pairing():
    model = zoo.build("mixture")
    with pytest.raises(DomainError):
        check_adjoint_identity(model.exact, model.components, model.state,
                               0, np.ones(model.state.eta.size))


def test_score_fd_converges_at_second_order():
    model = zoo.build("missing_cov")
    eta = model.state.eta
    a = center(np.linspace(-1.0, 1.0, eta.size), eta).values
    o = model.exact.outcomes[0]
    res = check_score_fd(model.components, model.state, o, a)
    assert res.passed
    lo, hi = FD_ORDER_WINDOW
    assert lo < res.context["richardson_ratio"] < hi


def test_centering_construction_needs_mean_zero_tangent():
    model = zoo.build("cox_rc")
    with pytest.raises(DomainError):
        check_centering_construction(model.exact, model.components,
                                     model.state,
                                     np.ones(model.state.eta.size), 0.1)


def test_centering_construction_at_zero_step():
    model = zoo.build("mixture")
    eta = model.state.eta
    a = center(np.linspace(0.0, 1.0, eta.size), eta).values
    at_zero = check_centering_construction(model.exact, model.components,
                                           model.state, a, 0.0,
                                           n_pair=3, seed=4)
    moved = check_centering_construction(model.exact, model.components,
                                         model.state, a, 0.1,
                                         n_pair=3, seed=4)
    assert at_zero.passed and moved.passed


def test_suite_passes_and_is_deterministic():
    first = suite_for_model(zoo.build("mixture"), seed=11)
    second = suite_for_model(zoo.build("mixture"), seed=11)
    assert all(r.passed for r in first)
    assert [r.name for r in first] == [r.name for r in second]
    assert [r.max_discrepancy for r in first] == [r.max_discrepancy for r in second]
    shifted = suite_for_model(zoo.build("mixture"), seed=12)
    assert [r.max_discrepancy for r in first] != [r.max_discrepancy for r in shifted]


def test_run_suite_accepts_params():
    results = run_suite(["cox_rc"], params={"cox_rc": {"theta": 0.0}}, seed=2)
    assert all(r.passed for r in results)
    assert all(r.name.startswith("cox_rc:") for r in results)


def test_suite_catches_injected_sign_error():
    model = zoo.build("mixture")
    c = model.components
    broken = dataclasses.replace(
        model, components=dataclasses.replace(
            c, f_ddot=lambda x, o: -c.f_ddot(x, o)))
    results = suite_for_model(broken, seed=11)
    failed = {r.name.split(":", 1)[1] for r in results if not r.passed}
    assert "kappa_reference" in failed
    assert "adjoint_exact_pair" in failed
    assert len(failed) >= 3


def test_suite_covers_expected_checks():
    results = suite_for_model(zoo.build("missing_cov"), seed=5)
    names = {r.name.split(":", 1)[1] for r in results}
    for expected in ("normalization", "gamma_reference", "kappa_symmetry",
                     "category", "adjoint_exact_pair", "adjoint_identity_fd",
                     "adjoint_identity_order", "score_fd",
                     "centering_construction", "efficient_info_routes"):
        assert expected in names, expected
