"""Shared numerical kernel.

Adaptive Gauss-Legendre quadrature with phase-bounded panels and Wynn-epsilon
tail acceleration for oscillatory integrals on half lines, compensated
summation, line fitting and the cylinder functions J1, Y1, K1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import special

__all__ = [
    "QuadratureResult",
    "QuadratureError",
    "integrate",
    "integrate_oscillatory",
    "wynn_epsilon",
    "compensated_sum",
    "bessel",
    "fit_line",
]

_LOW_X, _LOW_W = np.polynomial.legendre.leggauss(10)
_HIGH_X, _HIGH_W = np.polynomial.legendre.leggauss(20)
_BOTH_X = np.concatenate([_HIGH_X, _LOW_X])
MAX_PHASE_STEP = math.pi / 4


@dataclass(frozen=True)
class QuadratureResult:
    value: complex
    est_error: float
    panels_used: int


class QuadratureError(RuntimeError):
    """Raised when a quadrature cannot meet its accuracy within budget.

    ``best`` holds the last available estimate so callers can report it.
    """

    def __init__(self, message: str, best: QuadratureResult | None = None):
        super().__init__(message)
        self.best = best


def compensated_sum(values) -> complex:
    """Exactly rounded sum in a fixed order (real and imaginary parts separately)."""
    arr = np.asarray(values, dtype=complex).ravel()
    return complex(math.fsum(arr.real.tolist()), math.fsum(arr.imag.tolist()))


def _panels(f, lefts: np.ndarray, rights: np.ndarray):
    """Evaluate every panel [lefts[i], rights[i]] with a 10/20 point Gauss pair.

    Returns per-panel high-order values and |high - low| as error estimates.
    """
    half = 0.5 * (rights - lefts)[:, None]
    mid = 0.5 * (rights + lefts)[:, None]
    vals = f(mid + half * _BOTH_X)  # one call for both rules
    hi = (vals[:, : _HIGH_X.size] * _HIGH_W).sum(axis=1) * half[:, 0]
    lo = (vals[:, _HIGH_X.size :] * _LOW_W).sum(axis=1) * half[:, 0]
    return np.asarray(hi, dtype=complex), np.abs(hi - lo)


def _adaptive(f, edges, epsabs, epsrel, max_panels) -> QuadratureResult:
    edges = np.asarray(edges, dtype=float)
    lefts, rights = edges[:-1].copy(), edges[1:].copy()
    vals, errs = _panels(f, lefts, rights)
    while True:
        total = compensated_sum(vals)
        err = float(errs.sum())
        tol = max(epsabs, epsrel * abs(total))
        if err <= tol:
            return QuadratureResult(total, err, len(vals))
        if len(vals) >= max_panels:
            raise QuadratureError(
                f"panel budget {max_panels} exhausted (error {err:.3e} > {tol:.3e})",
                QuadratureResult(total, err, len(vals)),
            )
        bad = errs > max(tol / (4 * len(vals)), 0.05 * errs.max())
        mids = 0.5 * (lefts[bad] + rights[bad])
        new_l = np.concatenate([lefts[bad], mids])
        new_r = np.concatenate([mids, rights[bad]])
        nv, ne = _panels(f, new_l, new_r)
        keep = ~bad
        lefts = np.concatenate([lefts[keep], new_l])
        rights = np.concatenate([rights[keep], new_r])
        vals = np.concatenate([vals[keep], nv])
        errs = np.concatenate([errs[keep], ne])
        order = np.argsort(lefts, kind="stable")
        lefts, rights, vals, errs = lefts[order], rights[order], vals[order], errs[order]


def integrate(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    epsabs: float = 1e-13,
    epsrel: float = 1e-11,
    breakpoints=(),
    max_panels: int = 4000,
) -> QuadratureResult:
    """Adaptive integral of a vectorised smooth integrand over [a, b].

    ``b`` may be ``inf``; the half line is then mapped onto [0, 1) by
    k = a + t / (1 - t), which suits integrands decaying at least like 1/k^2.
    """
    if math.isinf(b):
        def g(t):
            with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
                return f(a + t / (1.0 - t)) / (1.0 - t) ** 2

        return _adaptive(g, np.linspace(0.0, 1.0, 9), epsabs, epsrel, max_panels)
    pts = sorted({a, b, *[p for p in breakpoints if a < p < b]})
    edges = []
    for lo, hi in zip(pts[:-1], pts[1:]):
        edges.extend(np.linspace(lo, hi, 5)[:-1])
    edges.append(b)
    return _adaptive(f, edges, epsabs, epsrel, max_panels)


def wynn_epsilon(seq) -> tuple[complex, float]:
    """Wynn epsilon extrapolation of a sequence of partial sums.

    Returns the estimate from the highest complete even column and the
    distance to the previous even-column estimate as a crude error.
    """
    s = [complex(v) for v in seq]
    n = len(s)
    if n < 3:
        return s[-1], math.inf
    prev = [0j] * (n + 1)
    cur = s[:]
    estimates = [s[-1]]
    for k in range(1, n):
        nxt = []
        for i in range(len(cur) - 1):
            diff = cur[i + 1] - cur[i]
            if diff == 0:
                # exact convergence of this column
                return cur[i + 1], abs(estimates[-1] - cur[i + 1]) if len(estimates) > 1 else 0.0
            nxt.append(prev[i + 1] + 1.0 / diff)
        prev, cur = cur, nxt
        if k % 2 == 0 and cur:
            estimates.append(cur[-1])
        if len(cur) < 2:
            break
    best = estimates[-1]
    err = abs(best - estimates[-2]) if len(estimates) > 1 else math.inf
    return best, err


def _phase_edges(phase, a, b, h_max):
    """Panel edges on [a, b] so that |phase| changes by at most pi/4 per panel."""
    edges = [a]
    k = a
    pk = phase(np.array([k]))[0]
    while k < b:
        h = min(h_max, b - k)
        while True:
            pn = phase(np.array([k + h]))[0]
            if abs(pn - pk) <= MAX_PHASE_STEP or h < 1e-9 * max(1.0, abs(k)):
                break
            h *= 0.5
        k += h
        pk = pn
        edges.append(k)
        if len(edges) > 200000:
            raise QuadratureError("phase panelling did not terminate")
    return np.array(edges)


def _next_crossing(phase, k, target, direction, step):
    """Smallest k' > k with phase(k') == target, for a monotone phase."""
    lo = k
    hi = k + step
    while direction * (phase(np.array([hi]))[0] - target) < 0:
        lo, hi = hi, hi + 2 * (hi - lo)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if direction * (phase(np.array([mid]))[0] - target) < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, abs(hi)):
            break
    return 0.5 * (lo + hi)


def integrate_oscillatory(
    f: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float = math.inf,
    phase: Callable[[np.ndarray], np.ndarray] | None = None,
    accuracy: float = 1e-10,
    tail_start: float | None = None,
    h_max: float = 1.0,
    max_blocks: int = 400,
    max_panels: int = 20000,
) -> QuadratureResult:
    """Integrate an oscillatory integrand ``f`` over [a, b] (b may be infinite).

    Parameters
    ----------
    f : callable
        Vectorised integrand, including its oscillatory factor.
    phase : callable, optional
        Phase of the oscillatory factor. Panels are bounded so that the phase
        advances by at most pi/4 across each one. Without a phase the call
        falls back to :func:`integrate`.
    accuracy : float
        Absolute accuracy request.
    tail_start : float, optional
        Point beyond which ``phase`` is strictly monotone. On an infinite
        domain the range past it is cut at successive half-period crossings
        and the partial sums are accelerated by the epsilon algorithm, which
        also assigns an Abel-type value to integrals whose amplitude does not
        decay. Defaults to ``a``.

    Raises
    ------
    QuadratureError
        If the panel or block budget is exhausted, e.g. for a divergent
        integrand.
    """
    if phase is None:
        return integrate(f, a, b, epsabs=accuracy, epsrel=0.0, max_panels=max_panels)
    if not math.isinf(b):
        edges = _phase_edges(phase, a, b, h_max)
        return _adaptive(f, edges, accuracy, 0.0, max_panels)

    c = a if tail_start is None else max(a, tail_start)
    head = QuadratureResult(0j, 0.0, 0)
    if c > a:
        head = _adaptive(f, _phase_edges(phase, a, c, h_max), accuracy / 4, 0.0, max_panels)

    def dphase(k):
        h = 1e-6 * max(1.0, abs(k))
        return (phase(np.array([k + h]))[0] - phase(np.array([k - h]))[0]) / (2 * h)

    direction = 1.0 if dphase(c + 1e-9) > 0 else -1.0
    # align block ends with multiples of pi so blocks are half periods
    p0 = phase(np.array([c]))[0]
    target = math.floor(p0 / math.pi) * math.pi if direction > 0 else math.ceil(p0 / math.pi) * math.pi
    partial = [head.value]
    block_err = head.est_error
    panels = head.panels_used
    k = c
    history = []
    best = None
    for n in range(max_blocks):
        target += direction * math.pi
        if direction * (target - p0) <= 0:
            target += direction * math.pi
        step = min(h_max, math.pi / max(abs(dphase(k)), 1e-12))
        k_next = _next_crossing(phase, k, target, direction, step)
        blk = _adaptive(f, _phase_edges(phase, k, k_next, h_max), accuracy / 50, 0.0, max_panels)
        block_err += blk.est_error
        panels += blk.panels_used
        partial.append(partial[-1] + blk.value)
        k = k_next
        if len(partial) >= 8:
            est, werr = wynn_epsilon(partial[-min(len(partial), 40):])
            history.append(est)
            if len(history) >= 3:
                spread = max(abs(history[-1] - history[-2]), abs(history[-1] - history[-3]))
                best = QuadratureResult(history[-1], spread + werr + block_err, panels)
                if spread + block_err <= accuracy and werr <= accuracy:
                    return QuadratureResult(history[-1], max(spread, werr) + block_err, panels)
    raise QuadratureError(
        f"tail acceleration did not converge after {max_blocks} half periods", best
    )


def bessel(kind: str, arg: float) -> float:
    """J1, Y1 (= N1) or K1 at a positive real argument."""
    x = float(arg)
    if not x > 0:
        raise ValueError(f"bessel argument must be positive, got {arg!r}")
    if kind == "J1":
        return float(special.j1(x))
    if kind in ("Y1", "N1"):
        return float(special.y1(x))
    if kind == "K1":
        return float(special.k1(x))
    raise ValueError(f"unknown Bessel kind {kind!r}")


def fit_line(xs, ys) -> tuple[float, float, float]:
    """Least-squares line through (xs, ys); returns slope, intercept, RMS residual."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.size < 3:
        raise ValueError("fit_line needs at least 3 points")
    if np.ptp(x) == 0:
        raise ValueError("fit_line: all abscissae are equal")
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))
