from fractions import Fraction

import numpy as np
import pytest

from fieldport.amplitude import (
    CoverageError,
    Scenario,
    TERM_ORDER,
    conformance_report,
    outcome_probability_density,
    parasitic_fraction,
    symbolic_amplitude,
    term_value_momentum,
    term_value_position,
    total_amplitude,
)
from fieldport.conventions import default_conventions
from fieldport.measurement import Outcome
from fieldport.states import EPRFamily, GaussianPacket


def scenario(m=1.0, sigma_epr=0.125):
    c = default_conventions(spatial_dims=1, mass=m)
    packet = GaussianPacket((0.3,), 0.5, (0.5,), 0.0).normalized(c)
    return Scenario(packet, EPRFamily(sigma_epr, (0.0,), 0.0), 1.0, 1.5, c)


def test_symbolic_structure():
    full = symbolic_amplitude(ideal=False)
    ideal = symbolic_amplitude()
    assert len(full.terms) == 6
    assert sorted(t.tag for t in ideal.terms) == sorted(TERM_ORDER)
    assert parasitic_fraction(ideal) == Fraction(1, 2)
    assert parasitic_fraction(ideal, intra_pair_doubling=False) == Fraction(1, 3)


def test_scenario_time_order():
    s = scenario()
    assert s.time_order_typical
    assert s.to_dict()["t_out"] == 1.5


def test_total_is_weighted_sum():
    s = scenario()
    b = total_amplitude(s, Outcome((0.5,), (0.2,)), 0.3)
    assert not b.partial
    w = {"teleport_direct": 2, "teleport_exchange": 2, "parasitic": 4}
    assert b.total == pytest.approx(sum(w[t.tag] * t.value for t in b.terms), abs=1e-15)


def test_drop_parasitic():
    s = scenario()
    o = Outcome((0.5,), (0.2,))
    b = total_amplitude(s, o, 0.3, drop_parasitic=True)
    assert b.term("parasitic").weight == 0
    full = total_amplitude(s, o, 0.3)
    assert b.total == pytest.approx(full.total - 4 * full.term("parasitic").value, abs=1e-15)


def test_exchange_is_direct_at_reflected_X():
    s = scenario()
    a = term_value_momentum("teleport_direct", s, Outcome((0.5,), (0.2,)), 0.3).value
    b = term_value_momentum("teleport_exchange", s, Outcome((-0.5,), (0.2,)), 0.3).value
    # relabelling xi -> xi - X swaps the two measurement points up to e^{iPX}
    assert a == pytest.approx(np.exp(1j * 0.2 * 0.5) * b, rel=1e-10)


def test_momentum_nodes_converged():
    s = scenario()
    o = Outcome((0.5,), (0.2,))
    lo = term_value_momentum("teleport_direct", s, o, 0.3, n=64)
    hi = term_value_momentum("teleport_direct", s, o, 0.3, n=96)
    assert abs(lo.value - hi.value) < 1e-8 * abs(hi.value)


@pytest.mark.parametrize("tag", ["parasitic", "teleport_direct"])
def test_position_route_oracle(tag):
    s = scenario()
    o = Outcome((0.5,), (0.0,))
    a = term_value_momentum(tag, s, o, 0.3).value
    b = term_value_position(tag, s, o, 0.3, epsrel=1e-4).value
    assert abs(a - b) <= 1e-3 * max(abs(a), abs(b))


def test_coverage_error():
    s = scenario()
    with pytest.raises(CoverageError) as info:
        outcome_probability_density(s, Outcome((0.5,), (0.2,)), np.linspace(-2, 2, 9))
    assert info.value.report["peak"] > 0


def test_conformance_report_shape():
    rep = {r["tag"]: r for r in conformance_report()}
    assert set(rep) == set(TERM_ORDER)
    for r in rep.values():
        assert len(r["factors"]) == 3
    # printed parasitic factors agree up to one reflected argument
    assert [f["status"] for f in rep["parasitic"]["factors"]] == ["reflected", "match", "match"]
    for tag in ("teleport_direct", "teleport_exchange"):
        assert [f["status"] for f in rep[tag]["factors"]].count("match") == 1
        assert not rep[tag]["conforms"]


def _flatness(m, include):
    s = scenario(m)
    xs = np.linspace(-16, 16, 65)
    v = np.array(
        [
            outcome_probability_density(s, Outcome((X,), (P,)), xs, include=include, threshold=1e-3)
            for X in (-1.0, 1.0)
            for P in (-0.5, 0.5)
        ]
    )
    return float(np.ptp(v) / v.mean())


def test_flatness_heavy_mass_direct_term():
    # the direct term alone flattens as the mass grows (NR regime)
    assert _flatness(20.0, ("teleport_direct",)) <= 0.10


@pytest.mark.xfail(
    strict=True,
    reason="at m = 1 the teleport terms alone give an (X, P)-dependent density; "
    "retardation and the exchange interference spoil flatness (about 50% spread)",
)
def test_flatness_light_mass_without_parasitic():
    assert _flatness(1.0, ("teleport_direct", "teleport_exchange")) <= 1e-3
