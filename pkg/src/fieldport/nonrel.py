"""Non-relativistic teleportation.

Finite-dimensional qudit teleportation with generalized Bell projectors,
the delta-replacement limit of the field expansion, lattice packet
teleportation and the zero-measure overlap of a fixed EPR pair.

Delta functions are Kronecker deltas divided by the cell volume, on the
momentum grid and on its dual position lattice.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .measurement import MomentumGrid, Outcome
from .states import NRPacket
from .wick import WickExpansion, tagged_weights

__all__ = [
    "QuditState",
    "BellOutcome",
    "NRTerm",
    "bell_basis",
    "teleport_qudit",
    "random_qudit",
    "nr_limit_expansion",
    "nr_teleport_amplitude",
    "nr_direct_term_lattice",
    "nr_three_term_amplitude",
    "nr_outcome_probability",
    "nr_epr_overlap",
    "nonzero_overlap_fraction",
]


@dataclass(frozen=True)
class QuditState:
    vector: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vector, dtype=complex).ravel()
        if v.size < 2:
            raise ValueError("qudit dimension must be at least 2")
        if abs(np.vdot(v, v).real - 1.0) > 1e-12:
            raise ValueError("qudit state must be normalised")
        object.__setattr__(self, "vector", v)

    @property
    def dim(self) -> int:
        return self.vector.size


@dataclass(frozen=True)
class BellOutcome:
    index: int
    probability: float
    post_state: np.ndarray
    correction: np.ndarray
    fidelity: float


def random_qudit(d: int, rng: np.random.Generator) -> QuditState:
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    return QuditState(v / np.linalg.norm(v))


def bell_basis(d: int) -> np.ndarray:
    """Rows are the d^2 generalized Bell vectors (Z^b X^a x I)|Phi+> on C^d x C^d."""
    w = np.exp(2j * math.pi / d)
    phi = np.eye(d).reshape(-1) / math.sqrt(d)
    shift = np.roll(np.eye(d), 1, axis=0)
    clock = np.diag(w ** np.arange(d))
    out = []
    for a in range(d):
        for b in range(d):
            U = np.linalg.matrix_power(clock, b) @ np.linalg.matrix_power(shift, a)
            out.append(np.kron(U, np.eye(d)) @ phi)
    return np.array(out)


def teleport_qudit(psi: QuditState) -> list[BellOutcome]:
    """Teleport ``psi`` through a maximally entangled pair.

    Subsystems are ordered (s, 2, 1): the unknown state s, the pair member 2
    measured with it, and the receiver 1. The correction U_i is derived
    from the state-independent transfer map K_i = (<B_i|_{s2} x I_1)(I_s x |Phi+>_{21}),
    which is 1/d times a unitary.
    """
    d = psi.dim
    if d > 16:
        raise ValueError("qudit dimension limited to 16")
    bell = bell_basis(d)
    pair = np.eye(d) / math.sqrt(d)  # [2, 1]
    state = np.kron(psi.vector, pair.reshape(-1)).reshape(d * d, d)
    outcomes = []
    for i, b in enumerate(bell):
        # K[r, s] = sum_2 conj(B_i[s, 2]) Phi+[2, r]
        K = (b.conj().reshape(d, d) @ pair).T
        U = np.linalg.inv(d * K)
        post = b.conj() @ state
        prob = float(np.vdot(post, post).real)
        post = post / math.sqrt(prob)
        corrected = U @ post
        fid = float(abs(np.vdot(psi.vector, corrected)) ** 2)
        outcomes.append(BellOutcome(i, prob, post, U, fid))
    return outcomes


@dataclass(frozen=True)
class NRTerm:
    """One term of the delta-replaced amplitude."""

    tag: str
    weight: int
    packet_argument: str
    phase: str
    delta: str

    def render(self) -> str:
        return f"{self.weight}*f({self.packet_argument})*{self.phase}*{self.delta}"


_NR_FORMS = {
    "teleport_direct": ("x", "exp(i P.x)", "delta(x - x' + X)"),
    "teleport_exchange": ("x", "exp(i P.(x + X))", "delta(x - x' + X)"),
    "parasitic": ("x", "1", "delta(X) delta(P)"),
}


def nr_limit_expansion(exp: WickExpansion) -> list[NRTerm]:
    """Replace every contraction by a spatial delta, keeping the pairing weights.

    Input is the classified ideal-pair expansion. Temporal phases are dropped
    (no bound on propagation speed). Weights include the intra-pair exchange
    doubling of the parasitic term, matching the relativistic assembly.
    """
    weights = tagged_weights(exp, intra_pair_doubling=True)
    out = []
    for tag in ("teleport_direct", "teleport_exchange", "parasitic"):
        if tag not in weights:
            raise ValueError(f"expansion has no {tag} term; classify it first")
        arg, phase, delta = _NR_FORMS[tag]
        out.append(NRTerm(tag, weights[tag], arg, phase, delta))
    return out


def _x_index(grid: MomentumGrid, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    j = x / grid.x_spacing
    if not np.allclose(j, np.rint(j), atol=1e-9) or np.any(np.abs(np.rint(j)) > grid.half):
        raise ValueError(f"x = {x} is not a point of the position lattice")
    return np.rint(j).astype(int)


def _shifted(values: np.ndarray, grid: MomentumGrid, j: np.ndarray) -> complex:
    """Periodic lattice value at integer coordinate j (the lattice transform is periodic)."""
    idx = tuple(int((jj + grid.half) % grid.n_points) for jj in j)
    return complex(values[idx])


def nr_teleport_amplitude(f: NRPacket, outcome: Outcome, x) -> complex:
    """f(x - X) exp(i P.(x - X)) on the position lattice."""
    grid = f.grid
    jx = _x_index(grid, x)
    jX = _x_index(grid, outcome.X)
    pos = f.position_values()
    shift = (jx - jX) * grid.x_spacing
    return _shifted(pos, grid, jx - jX) * complex(np.exp(1j * np.dot(outcome.P, shift)))


def _kron_delta(grid, a, b) -> float:
    """Lattice delta(a - b) (periodic)."""
    d = (np.asarray(a) - np.asarray(b)) % grid.n_points
    return float(np.all(d == 0)) / grid.x_spacing**grid.dims


def nr_direct_term_lattice(f: NRPacket, outcome: Outcome, x) -> complex:
    """Direct pairing with each contraction replaced by a lattice delta.

    sum over x', x1, xi of cell^3 f(x') exp(i P.xi) delta(x' - xi) delta(x1 - x)
    delta(x1 - xi + X), evaluated by explicit lattice sums (dims = 1).
    Resolves to f(x + X) exp(i P.(x + X)).
    """
    grid = f.grid
    if grid.dims != 1:
        raise ValueError("explicit lattice sum implemented for dims = 1")
    jx = int(_x_index(grid, x)[0])
    jX = int(_x_index(grid, outcome.X)[0])
    pos = f.position_values()
    js = np.arange(-grid.half, grid.half + 1)
    cell = grid.x_spacing
    total = 0j
    for jp in js:
        for j1 in js:
            d_out = _kron_delta(grid, j1, jx)
            if d_out == 0:
                continue
            for jxi in js:
                w = d_out * _kron_delta(grid, jp, jxi) * _kron_delta(grid, j1, jxi - jX)
                if w:
                    total += cell**3 * w * pos[jp + grid.half] * np.exp(1j * outcome.P[0] * jxi * cell)
    return complex(total)


def nr_three_term_amplitude(f: NRPacket, outcome: Outcome, x, weights=(2, 2, 4)) -> complex:
    """Weighted sum of the three delta-replaced terms after integrating x'.

    Direct and exchange terms are f(x) exp(i P.x) and f(x) exp(i P.(x + X))
    with x' fixed by delta(x - x' + X); the parasitic term is
    f(x) delta(X) delta(P).
    """
    grid = f.grid
    jx = _x_index(grid, x)
    pos = f.position_values()
    fx = _shifted(pos, grid, jx)
    xv = jx * grid.x_spacing
    X = np.asarray(outcome.X)
    P = np.asarray(outcome.P)
    direct = fx * np.exp(1j * P @ xv)
    exchange = fx * np.exp(1j * P @ (xv + X))
    on_origin = np.allclose(X, 0) and np.allclose(P, 0)
    parasitic = fx / (grid.x_spacing * grid.spacing) ** grid.dims if on_origin else 0j
    return complex(weights[0] * direct + weights[1] * exchange + weights[2] * parasitic)


def nr_outcome_probability(f: NRPacket, outcomes=None) -> dict:
    """sum_x dx |A(x; X, P)|^2 dX dP / (2 pi)^D for each lattice outcome."""
    grid = f.grid
    pos = f.position_values()
    dens = float(np.sum(np.abs(pos) ** 2) * grid.x_spacing**grid.dims)  # periodic shifts keep this
    if outcomes is None:
        outcomes = [Outcome(tuple(X), tuple(P)) for P in grid.points() for X in grid.x_points()]
    out = {}
    xs = grid.x_points()
    for o in outcomes:
        _x_index(grid, o.X)
        if grid.dims == 1 and len(xs) <= 129:
            amps = np.array([nr_teleport_amplitude(f, o, x) for x in xs])
            dens_o = float(np.sum(np.abs(amps) ** 2) * grid.x_spacing)
        else:
            dens_o = dens
        out[o] = dens_o * grid.outcome_weight
    return out


def nr_epr_overlap(q, X, P, grid: MomentumGrid) -> complex:
    """<Phi_XP|psi_q> with both states written as |k>|k + .> sums on the grid.

    Phi_XP = sum_k dk e^{i k.X}|k>|k + P> and psi_q = sum_k dk |k>|k + q>;
    pairs leaving the grid are dropped.
    """
    q = np.broadcast_to(np.asarray(q, dtype=float), (grid.dims,))
    X = np.broadcast_to(np.asarray(X, dtype=float), (grid.dims,))
    P = np.broadcast_to(np.asarray(P, dtype=float), (grid.dims,))
    if not (grid.on_lattice(q) and grid.on_lattice(P)):
        raise ValueError("q and P must lie on the momentum lattice")
    if not np.allclose(P, q, atol=1e-9 * grid.spacing):
        return 0j
    k = grid.points()
    ok = grid.contains(k + q)
    phases = np.exp(-1j * (k[ok] @ X))
    # Kronecker delta on the partner momentum carries 1/dk
    return complex(grid.cell_volume * phases.sum())


def nonzero_overlap_fraction(grid: MomentumGrid, q=0.0, rtol: float = 1e-9) -> Fraction:
    """Fraction of lattice outcomes (X, P) with a nonzero overlap."""
    vals = [
        abs(nr_epr_overlap(q, X, P, grid)) for P in grid.points() for X in grid.x_points()
    ]
    top = max(vals)
    hits = sum(v > rtol * top for v in vals)
    return Fraction(hits, len(vals))
