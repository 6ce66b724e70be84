import csv
import math
from importlib import resources

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fieldport.numerics import (
    QuadratureError,
    bessel,
    compensated_sum,
    fit_line,
    integrate,
    integrate_oscillatory,
    wynn_epsilon,
)


def test_integrate_polynomial_exact():
    r = integrate(lambda k: 3 * k**2, 0.0, 2.0)
    assert r.value == pytest.approx(8.0, abs=1e-13)
    assert r.est_error < 1e-10


def test_integrate_half_line():
    r = integrate(lambda k: np.exp(-k), 0.0, math.inf)
    assert abs(r.value - 1.0) < 1e-11


def test_integrate_breakpoint_kink():
    r = integrate(lambda k: np.abs(k - 0.3), 0.0, 1.0, breakpoints=(0.3,))
    assert abs(r.value - (0.3**2 + 0.7**2) / 2) < 1e-13


def test_integrate_budget_raises_with_best_estimate():
    with pytest.raises(QuadratureError) as info:
        integrate(lambda k: np.sin(1 / k), 1e-6, 1.0, max_panels=10)
    assert info.value.best is not None


def test_oscillatory_finite_matches_closed_form():
    # int_0^10 cos(5k) dk = sin(50)/5
    r = integrate_oscillatory(lambda k: np.exp(5j * k), 0.0, 10.0, phase=lambda k: 5 * k)
    assert abs(r.value - (np.exp(50j) - 1) / 5j) < 1e-11


def test_oscillatory_tail_against_rotated_contour():
    # int_0^inf e^{ik}/(1+k) dk equals int_0^inf i e^{-s}/(1+is) ds
    r = integrate_oscillatory(lambda k: np.exp(1j * k) / (1 + k), 0.0, phase=lambda k: k)
    rot = integrate(lambda s: 1j * np.exp(-s) / (1 + 1j * s), 0.0, math.inf)
    assert abs(r.value - rot.value) < 1e-8


def test_wynn_accelerates_alternating_series():
    partial = np.cumsum([(-1) ** n / (n + 1) for n in range(14)])
    val, err = wynn_epsilon(partial)
    assert abs(val - math.log(2)) < 1e-9


def test_bessel_reference_table():
    text = resources.files("fieldport").joinpath("data/bessel_reference.csv").read_text()
    rows = list(csv.DictReader(text.splitlines()))
    assert len(rows) >= 40
    worst = 0.0
    for r in rows:
        ref = float(r["value"])
        worst = max(worst, abs(bessel(r["kind"], float(r["arg"])) - ref) / abs(ref))
    assert worst < 1e-12


def test_bessel_rejects_nonpositive():
    with pytest.raises(ValueError):
        bessel("K1", 0.0)
    with pytest.raises(ValueError):
        bessel("I1", 1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_compensated_sum_is_order_independent(xs):
    assert compensated_sum(xs) == compensated_sum(list(reversed(xs)))


@given(st.floats(-5, 5), st.floats(-5, 5))
def test_fit_line_recovers_exact_line(a, b):
    x = np.linspace(0, 3, 7)
    slope, icpt, res = fit_line(x, a * x + b)
    assert slope == pytest.approx(a, abs=1e-9)
    assert icpt == pytest.approx(b, abs=1e-9)
    assert res < 1e-9
