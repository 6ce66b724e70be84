"""Relativistic teleportation amplitude A(x; X, P).

Each pairing of the three-particle word is a product of three contractions
integrated over the packet point x', the pair point x1 and the measurement
point xi with weights g(x'), the pair envelope E(x1) and exp(i P.xi).

Two independent routes evaluate a term in 1+1 dimensions:

* momentum route: every contraction is replaced by its mass-shell integral
  and the spatial integrals are done in closed form, leaving a
  two-dimensional Gaussian-limited momentum integral (teleport terms) or a
  product of two one-dimensional integrals (parasitic term);
* position route: nested adaptive quadrature over x', x1 and xi of the
  closed-form 1+1 contraction, used as an oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .conventions import Conventions
from .measurement import Outcome
from .numerics import QuadratureError, integrate, integrate_oscillatory
from .propagator import PropagatorValue, contraction_1d
from .states import EPRFamily, GaussianPacket
from .wick import (
    PairingTerm,
    WickExpansion,
    classify_terms,
    collapse_repeated_labels,
    tagged_weights,
    teleportation_word,
    vacuum_expectation_symbolic,
)

__all__ = [
    "Scenario",
    "AmplitudeTerm",
    "AmplitudeBreakdown",
    "symbolic_amplitude",
    "parasitic_fraction",
    "term_value_momentum",
    "term_value_position",
    "total_amplitude",
    "outcome_probability_density",
    "CoverageError",
    "conformance_report",
    "TERM_ORDER",
]

TERM_ORDER = ("teleport_direct", "teleport_exchange", "parasitic")


@dataclass(frozen=True)
class Scenario:
    """Packet, pair and measurement/output times of one teleportation run."""

    packet: GaussianPacket
    epr: EPRFamily
    xi0: float = 1.0
    t_out: float = 1.5
    conv: Conventions = field(default_factory=lambda: Conventions(spatial_dims=1))

    def __post_init__(self):
        times = (self.packet.t0, self.epr.pair_time, self.xi0, self.t_out)
        if not all(map(math.isfinite, times)):
            raise ValueError("scenario times must be finite")
        if not (self.packet.dims == self.epr.dims == self.conv.spatial_dims):
            raise ValueError("packet, pair and conventions must share one spatial dimension")

    @property
    def time_order_typical(self) -> bool:
        """Whether pair_time <= t0 <= xi0 <= t_out (recorded, never enforced)."""
        return self.epr.pair_time <= self.packet.t0 <= self.xi0 <= self.t_out

    def to_dict(self) -> dict:
        p, e = self.packet, self.epr
        return {
            "packet": {"k_center": list(p.k_center), "sigma_k": p.sigma_k, "x_center": list(p.x_center), "t0": p.t0},
            "epr": {"sigma": e.sigma_epr, "q_total": list(e.q_total), "pair_time": e.pair_time},
            "xi0": self.xi0,
            "t_out": self.t_out,
            "time_order_typical": self.time_order_typical,
        }


@dataclass(frozen=True)
class AmplitudeTerm:
    tag: str
    weight: int
    raw_multiplicity: int
    value: complex
    est_error: float


@dataclass(frozen=True)
class AmplitudeBreakdown:
    terms: tuple
    total: complex
    est_error: float
    partial: bool = False
    failures: tuple = ()

    def term(self, tag: str) -> AmplitudeTerm:
        for t in self.terms:
            if t.tag == tag:
                return t
        raise KeyError(tag)


def symbolic_amplitude(scenario: Scenario | None = None, ideal: bool = True) -> WickExpansion:
    """Expand, optionally collapse the two pair creators onto x1, and classify."""
    if scenario is None:
        word, roles = teleportation_word()
    else:
        word, roles = teleportation_word(scenario.xi0, scenario.t_out, scenario.epr.pair_time, scenario.packet.t0)
    exp = vacuum_expectation_symbolic(word)
    if ideal:
        x1, x2 = roles["epr_labels"]
        exp = collapse_repeated_labels(exp, {x2: x1})
    return classify_terms(exp, **roles)


def parasitic_fraction(exp: WickExpansion, intra_pair_doubling: bool = True) -> Fraction:
    """Weighted share of parasitic pairings as an exact rational."""
    w = tagged_weights(exp, intra_pair_doubling)
    return Fraction(w.get("parasitic", 0), sum(w.values()))


def _tag(term) -> str:
    tag = term.tag if isinstance(term, PairingTerm) else str(term)
    if tag not in TERM_ORDER:
        raise ValueError(f"cannot evaluate a term tagged {tag!r}")
    return tag


def _require_1d(scenario: Scenario):
    if scenario.conv.spatial_dims != 1:
        raise NotImplementedError("amplitude evaluation is implemented in 1+1 dimensions")


def _gl_box(center, half, n):
    x, w = np.polynomial.legendre.leggauss(n)
    return center + half * x, half * w


# ----------------------------------------------------------------------------
# momentum route


def _teleport_momentum(tag, s: Scenario, X, P, x, n):
    m, C = s.conv.mass, s.conv.contraction_norm
    f, e = s.packet, s.epr
    tp, te, tm, to = f.t0, e.pair_time, s.xi0, s.t_out
    q = e.q_total[0]
    ka, wa = _gl_box(f.k_center[0], 9.0 * f.sigma_k, n)
    u, wu = _gl_box(q, 9.0 * e.sigma_epr, n)
    KA, U = np.meshgrid(ka, u, indexing="ij")
    W = np.outer(wa, wu)
    kb = U + KA - P  # total momentum of the pair is k_b + k_c = u
    kc = P - KA
    om = lambda k: np.sqrt(k * k + m * m)  # noqa: E731
    oa, ob, oc = om(KA), om(kb), om(kc)
    amp = f.amplitude(KA[..., None], s.conv) * e.pair_profile_ft(U[..., None])
    phase = -kb * x - oa * (tp - tm) - ob * (te - to) - oc * (te - tm)
    phase = phase + (kc * X if tag == "teleport_direct" else KA * X)
    vals = amp * np.exp(1j * phase) / (8 * oa * ob * oc)
    return C**3 * 2 * math.pi * np.sum(vals * W)


def _pair_loop(s: Scenario, X, P, accuracy):
    """C^2 (2 pi) int dk_b e^{i k_c X} e^{-i (k0_b + k0_c) T} / (4 k0_b k0_c), k_c = P - k_b."""
    m, C = s.conv.mass, s.conv.contraction_norm
    T = s.epr.pair_time - s.xi0
    h = 0.5 * P

    def S(v):
        return np.sqrt((h + v) ** 2 + m * m) + np.sqrt((h - v) ** 2 + m * m)

    def amp(v):
        return 1.0 / (4 * np.sqrt((h + v) ** 2 + m * m) * np.sqrt((h - v) ** 2 + m * m))

    total = 0j
    err = 0.0
    for sgn in (1.0, -1.0):
        # k_b = h + v, e^{i k_c X} = e^{i h X} e^{-i v X}; the two signs fold v < 0
        def phase(v, sgn=sgn):
            return sgn * v * X - S(v) * T

        def fn(v, sgn=sgn):
            return amp(v) * np.exp(1j * phase(v))

        rate = sgn * X - 2 * T
        if abs(rate) < 1e-9:
            res = integrate(fn, 0.0, math.inf, epsabs=accuracy, epsrel=1e-10)
        else:
            L = 4.0 * (m + abs(h) + 1.0)
            dphi = lambda v: sgn * X - T * ((h + v) / np.sqrt((h + v) ** 2 + m * m) + (v - h) / np.sqrt((h - v) ** 2 + m * m))  # noqa: E731
            while abs(dphi(L)) < 0.5 * abs(rate) and L < 1e7:
                L *= 2
            res = integrate_oscillatory(fn, 0.0, math.inf, phase=phase, accuracy=accuracy, tail_start=L)
        total += res.value
        err += res.est_error
    pref = C**2 * 2 * math.pi * np.exp(1j * h * X)
    return pref * total, abs(pref) * err


def _packet_free(s: Scenario, x, n):
    """C int dk/(2k0) f(k) e^{-i k x} e^{-i k0 (t0 - t_out)}."""
    m, C = s.conv.mass, s.conv.contraction_norm
    f = s.packet
    k, w = _gl_box(f.k_center[0], 9.0 * f.sigma_k, n)
    om = np.sqrt(k * k + m * m)
    vals = f.amplitude(k[:, None], s.conv) * np.exp(-1j * (k * x + om * (f.t0 - s.t_out))) / (2 * om)
    return C * np.sum(vals * w)


def term_value_momentum(term, scenario: Scenario, outcome: Outcome, x, n: int = 96) -> PropagatorValue:
    """Momentum-route value of one pairing (1+1 dimensions).

    The estimated error is the change between n and 2n/3 Gauss nodes per
    momentum axis plus the quadrature error of the pair loop.
    """
    _require_1d(scenario)
    tag = _tag(term)
    X, P = float(outcome.X[0]), float(outcome.P[0])
    x = float(np.atleast_1d(x)[0])
    if tag == "parasitic":
        a_hi, a_lo = _packet_free(scenario, x, n), _packet_free(scenario, x, (2 * n) // 3)
        loop, loop_err = _pair_loop(scenario, X, P, 1e-11)
        e_hat = float(scenario.epr.pair_profile_ft(np.array([P]))[()])
        value = a_hi * e_hat * loop
        err = abs(a_hi - a_lo) * abs(e_hat * loop) + abs(a_hi * e_hat) * loop_err
        return PropagatorValue(complex(value), float(err))
    hi = _teleport_momentum(tag, scenario, X, P, x, n)
    lo = _teleport_momentum(tag, scenario, X, P, x, (2 * n) // 3)
    return PropagatorValue(complex(hi), float(abs(hi - lo)))


# ----------------------------------------------------------------------------
# position route (oracle)


_DECAY = 34.0  # K0(m rho) ~ e^{-34} beyond this many Compton lengths


def _cquad(fn, a, b, points, what, epsrel=1e-9, epsabs=1e-15):
    try:
        return integrate(fn, a, b, epsabs=epsabs, epsrel=epsrel, breakpoints=points, max_panels=6000)
    except QuadratureError as exc:
        raise QuadratureError(f"position route: {what} did not converge: {exc}", exc.best) from exc


def _cone(center, dt):
    return [center - abs(dt), center, center + abs(dt)] if dt != 0 else [center]


def term_value_position(term, scenario: Scenario, outcome: Outcome, x, epsrel: float = 1e-5) -> PropagatorValue:
    """Position-route value of one pairing by nested quadrature (1+1 dimensions).

    The packet enters through its smearing profile, the pair through its
    envelope; both pair creators sit at x1.
    """
    _require_1d(scenario)
    tag = _tag(term)
    s, conv = scenario, scenario.conv
    f, e = s.packet, s.epr
    tp, te, tm, to = f.t0, e.pair_time, s.xi0, s.t_out
    X, P = float(outcome.X[0]), float(outcome.P[0])
    x = float(np.atleast_1d(x)[0])
    lc = _DECAY / conv.mass
    g = lambda y: f.smearing_profile(np.asarray(y)[..., None])  # noqa: E731
    E = lambda y: e.pair_profile(np.asarray(y)[..., None])  # noqa: E731
    c = lambda dt, dx: contraction_1d(dt, dx, conv)  # noqa: E731
    g_center, g_half = -f.x_center[0], 12.0 / f.sigma_k
    err = 0.0

    def packet_to(point, dt):
        """int dx' g(x') c(dt, x' - point) over the packet support."""
        lo = max(g_center - g_half, point - abs(dt) - lc)
        hi = min(g_center + g_half, point + abs(dt) + lc)
        if hi <= lo:
            return 0j, 0.0
        r = _cquad(lambda y: g(y) * c(dt, y - point), lo, hi, _cone(point, dt), "packet integral", epsrel)
        return r.value, r.est_error

    if tag == "parasitic":
        a, ea = packet_to(x, tp - to)
        T = te - tm
        half = 12.0 / e.sigma_epr
        r1 = _cquad(lambda y: E(y) * np.exp(1j * P * y), -half, half, [0.0], "pair envelope", epsrel)
        lo, hi = min(0.0, -X) - abs(T) - lc, max(0.0, -X) + abs(T) + lc
        pts = _cone(0.0, T) + _cone(-X, T)
        r2 = _cquad(lambda u: np.exp(-1j * P * u) * c(T, u) * c(T, u + X), lo, hi, pts, "pair loop", epsrel)
        value = a * r1.value * r2.value
        err = ea * abs(r1.value * r2.value) + abs(a) * (r1.est_error * abs(r2.value) + r2.est_error * abs(r1.value))
        return PropagatorValue(complex(value), float(err))

    direct = tag == "teleport_direct"
    # direct: x' <-> xi, x1 <-> x, x1 <-> xi - X
    # exchange: x' <-> xi - X, x1 <-> xi, x1 <-> x
    shift_p = 0.0 if direct else X  # packet meets xi - shift_p
    shift_1 = X if direct else 0.0  # pair meets xi - shift_1

    def H(xi):
        lo = x - abs(te - to) - lc
        hi = x + abs(te - to) + lc
        a = xi - shift_1
        lo, hi = max(lo, a - abs(te - tm) - lc), min(hi, a + abs(te - tm) + lc)
        if hi <= lo:
            return 0j, 0.0
        pts = _cone(x, te - to) + _cone(a, te - tm)
        r = _cquad(lambda y: E(y) * c(te - to, y - x) * c(te - tm, y - a), lo, hi, pts, "pair integral", epsrel)
        return r.value, r.est_error

    def outer(xis):
        shape = np.shape(xis)
        xis = np.ravel(xis)
        out = np.empty(len(xis), dtype=complex)
        for i, xi in enumerate(xis):
            h, eh = H(xi)
            if h == 0:
                out[i] = 0
                continue
            gv, eg = packet_to(xi - shift_p, tp - tm)
            out[i] = np.exp(1j * P * xi) * gv * h
            outer.err += abs(eh * gv) + abs(eg * h)
        outer.calls += len(xis)
        return out.reshape(shape)

    outer.err, outer.calls = 0.0, 0
    # H is supported where the two cones around x and xi - shift_1 overlap
    reach = abs(te - to) + abs(te - tm) + 2 * lc
    lo, hi = x + shift_1 - reach, x + shift_1 + reach
    glo, ghi = g_center - g_half - abs(tp - tm) - lc + shift_p, g_center + g_half + abs(tp - tm) + lc + shift_p
    lo, hi = max(lo, glo), min(hi, ghi)
    if hi <= lo:
        return PropagatorValue(0j, 0.0)
    pts = []
    for s1 in (-1, 0, 1):
        for s2 in (-1, 0, 1):
            pts.append(x + shift_1 + s1 * abs(te - to) + s2 * abs(te - tm))
    r = _cquad(outer, lo, hi, pts, "measurement integral", epsrel=epsrel * 10, epsabs=1e-13)
    # inner errors are summed over all nodes; scale by mean node weight
    err = r.est_error + outer.err * (hi - lo) / max(outer.calls, 1)
    return PropagatorValue(complex(r.value), float(err))


# ----------------------------------------------------------------------------
# assembly


def total_amplitude(
    scenario: Scenario, outcome: Outcome, x, drop_parasitic: bool = False, n: int = 96, include=TERM_ORDER
) -> AmplitudeBreakdown:
    """Weighted sum of the three pairings via the momentum route.

    Weights include the intra-pair doubling of the parasitic term (2, 2, 4).
    Terms outside ``include`` (or the parasitic one when ``drop_parasitic``)
    are listed with weight 0. A failing term is reported and the breakdown
    marked partial.
    """
    exp = symbolic_amplitude(scenario)
    weights = tagged_weights(exp, intra_pair_doubling=True)
    raw = exp.weights_by_tag()
    terms, failures = [], []
    total, err = 0j, 0.0
    for tag in TERM_ORDER:
        if tag not in include or (drop_parasitic and tag == "parasitic"):
            terms.append(AmplitudeTerm(tag, 0, raw[tag], 0j, 0.0))
            continue
        try:
            v = term_value_momentum(tag, scenario, outcome, x, n=n)
        except (QuadratureError, FloatingPointError) as exc:
            failures.append(f"{tag}: {exc}")
            continue
        terms.append(AmplitudeTerm(tag, weights[tag], raw[tag], v.value, v.est_error))
        total += weights[tag] * v.value
        err += weights[tag] * v.est_error
    return AmplitudeBreakdown(tuple(terms), complex(total), float(err), bool(failures), tuple(failures))


class CoverageError(ValueError):
    """The x grid does not cover the support of |A|^2."""

    def __init__(self, message, report):
        super().__init__(message)
        self.report = report


def outcome_probability_density(
    scenario: Scenario,
    outcome: Outcome,
    x_grid,
    drop_parasitic: bool = False,
    cell=None,
    threshold: float = 1e-6,
    include=TERM_ORDER,
) -> float:
    """(sum_x dx |A(x)|^2) / (2 pi)^D, times the cell volume dX dP when given.

    Raises
    ------
    CoverageError
        When the density on either end of ``x_grid`` exceeds ``threshold``
        times its peak.
    """
    xs = np.asarray(x_grid, dtype=float).ravel()
    if xs.size < 3 or np.any(np.diff(xs) <= 0):
        raise ValueError("x_grid must be increasing with at least 3 points")
    dens = np.array([abs(total_amplitude(scenario, outcome, xv, drop_parasitic, include=include).total) ** 2 for xv in xs])
    peak = float(dens.max())
    edge = max(dens[0], dens[-1])
    if peak > 0 and edge > threshold * peak:
        raise CoverageError(
            f"x grid [{xs[0]:g}, {xs[-1]:g}] does not cover the support: boundary/peak = {edge / peak:.2e}",
            {"left": float(dens[0]), "right": float(dens[-1]), "peak": peak},
        )
    dx = np.gradient(xs)
    D = scenario.conv.spatial_dims
    value = float(np.sum(dens * dx)) / (2 * math.pi) ** D
    if cell is not None:
        value *= float(np.prod(cell))
    return value


# ----------------------------------------------------------------------------
# conformance of printed argument orders


_PRINTED = {
    "teleport_direct": ["x1 - x'", "x - xi", "x1 - xi + X"],
    "teleport_exchange": ["x1 - x'", "x1 - xi", "x - xi + X"],
    "parasitic": ["x - x'", "x1 - xi", "x1 - xi + X"],
}

_POINT_SYMBOL = {"x'": {"x'": 1}, "x1": {"x1": 1}, "x2": {"x2": 1}, "x": {"x": 1}, "xi": {"xi": 1}, "xi-X": {"xi": 1, "X": -1}}


def _parse_linear(expr: str) -> dict:
    out: dict = {}
    for sign, tok in _tokens(expr):
        out[tok] = out.get(tok, 0) + sign
    return {k: v for k, v in out.items() if v}


def _tokens(expr):
    sign = 1
    for raw in expr.replace("-", " - ").replace("+", " + ").split():
        if raw == "-":
            sign = -1
        elif raw == "+":
            sign = 1
        else:
            yield sign, raw
            sign = 1


def _format_linear(d: dict) -> str:
    order = ["x'", "x1", "x2", "x", "xi", "X"]
    parts = []
    for k in sorted(d, key=order.index):
        v = d[k]
        parts.append(("- " if v < 0 else "+ ") + k)
    s = " ".join(parts)
    return s[2:] if s.startswith("+ ") else "-" + s[1:]


def _derived_arguments(term: PairingTerm) -> list[dict]:
    args = []
    for c, a in term.pairs:
        d = dict(_POINT_SYMBOL[c.base])
        for k, v in _POINT_SYMBOL[a.base].items():
            d[k] = d.get(k, 0) - v
        args.append({k: v for k, v in d.items() if v})
    return args


def conformance_report(exp: WickExpansion | None = None) -> list[dict]:
    """Compare contraction arguments derived from the pairings with the printed ones.

    A derived argument (creator - annihilator) is 'match' when it appears
    verbatim among the printed factors of the same term, 'reflected' when
    its negative does (D+(-x) = -conj D+(x)) and 'unmatched' otherwise.
    """
    exp = exp if exp is not None else symbolic_amplitude()
    report = []
    for term in exp.terms:
        printed = [_parse_linear(p) for p in _PRINTED[term.tag]]
        left = list(printed)
        factors = []
        for d in _derived_arguments(term):
            neg = {k: -v for k, v in d.items()}
            if d in left:
                status = "match"
                left.remove(d)
            elif neg in left:
                status = "reflected"
                left.remove(neg)
            else:
                status = "unmatched"
            factors.append({"derived": _format_linear(d), "status": status})
        report.append(
            {
                "tag": term.tag,
                "printed": list(_PRINTED[term.tag]),
                "factors": factors,
                "unmatched_printed": [_format_linear(p) for p in left],
                "conforms": all(f["status"] == "match" for f in factors),
            }
        )
    return report
