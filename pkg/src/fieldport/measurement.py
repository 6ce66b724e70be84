"""Teleportation measurements on truncated momentum grids.

The outcome space (X, P) is discretised so that the completeness sums become
discrete Fourier orthogonality relations: P runs over the momentum lattice
itself and X over the dual lattice of spacing 2 pi / (n dk). One outcome
cell carries the weight dX dP / (2 pi)^D = 1 / n^D.

Operators are stored in the measure-whitened basis: one basis vector per
grid pair (k1, k2), scaled by the square root of the cell measure, so that
the discretised identity resolution is the identity matrix. For the flat
measure this is the usual orthonormal grid basis; on the mass shell the
cell measure is the exact invariant measure int_cell d^Dk / (2 k0).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .conventions import Conventions

__all__ = [
    "MomentumGrid",
    "Outcome",
    "DiscretizedOperator",
    "POVMFamily",
    "phi_kernel",
    "kernel_completeness_defect",
    "build_povm_nr",
    "build_povm_rel",
    "extend_three_particle",
    "completeness_defect",
    "completeness_report",
    "outcome_probabilities",
]


@dataclass(frozen=True)
class MomentumGrid:
    dims: int
    n_points: int
    spacing: float

    def __post_init__(self):
        if self.n_points < 1 or self.n_points % 2 == 0:
            raise ValueError("n_points must be odd so the grid is symmetric about 0")
        if not self.spacing > 0:
            raise ValueError("spacing must be positive")
        if self.dims not in (1, 2, 3):
            raise ValueError("dims must be 1, 2 or 3")

    @property
    def half(self) -> int:
        return (self.n_points - 1) // 2

    @property
    def k_max(self) -> float:
        return self.n_points * self.spacing / 2

    @property
    def shape(self) -> tuple:
        return (self.n_points,) * self.dims

    @property
    def size(self) -> int:
        return self.n_points**self.dims

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dims

    @property
    def x_spacing(self) -> float:
        return 2 * math.pi / (self.n_points * self.spacing)

    @property
    def outcome_weight(self) -> float:
        """dX dP / (2 pi)^D for one lattice cell."""
        return (self.x_spacing * self.spacing / (2 * math.pi)) ** self.dims

    def axis(self) -> np.ndarray:
        return self.spacing * np.arange(-self.half, self.half + 1)

    def x_axis(self) -> np.ndarray:
        return self.x_spacing * np.arange(-self.half, self.half + 1)

    def points(self) -> np.ndarray:
        """All grid momenta, shape (size, dims), C order."""
        ax = self.axis()
        return np.array(list(itertools.product(ax, repeat=self.dims))).reshape(-1, self.dims)

    def x_points(self) -> np.ndarray:
        ax = self.x_axis()
        return np.array(list(itertools.product(ax, repeat=self.dims))).reshape(-1, self.dims)

    def integer_coords(self, k) -> np.ndarray:
        return np.rint(np.asarray(k, dtype=float) / self.spacing).astype(int)

    def on_lattice(self, k) -> bool:
        k = np.asarray(k, dtype=float)
        return bool(np.allclose(k / self.spacing, np.rint(k / self.spacing), atol=1e-9))

    def contains(self, k) -> np.ndarray:
        j = self.integer_coords(k)
        return np.all(np.abs(j) <= self.half, axis=-1)

    def index(self, k) -> np.ndarray:
        """Flat index of grid momenta (assumed on the grid)."""
        j = self.integer_coords(k) + self.half
        return np.ravel_multi_index(tuple(np.moveaxis(np.atleast_2d(j), -1, 0)), self.shape)

    def to_position(self, values) -> np.ndarray:
        """(2 pi)^(-D/2) sum_k dk^D f(k) e^{i k.x} on the dual lattice (same shape)."""
        f = np.asarray(values, dtype=complex).reshape(-1)
        phase = np.exp(1j * self.x_points() @ self.points().T)
        out = (2 * math.pi) ** (-self.dims / 2) * self.cell_volume * (phase @ f)
        return out.reshape(self.shape)

    def refined(self) -> "MomentumGrid":
        """Half the spacing over the same cutoff."""
        return MomentumGrid(self.dims, 2 * self.n_points - 1, self.spacing / 2)

    def to_dict(self) -> dict:
        return {"dims": self.dims, "n_points": self.n_points, "spacing": self.spacing, "k_max": self.k_max}


@dataclass(frozen=True)
class Outcome:
    X: tuple
    P: tuple

    def __post_init__(self):
        X = tuple(float(v) for v in np.atleast_1d(self.X))
        P = tuple(float(v) for v in np.atleast_1d(self.P))
        if len(X) != len(P) or not all(map(math.isfinite, X + P)):
            raise ValueError("outcome components must be finite and of equal dimension")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "P", P)


@dataclass
class DiscretizedOperator:
    basis: str
    matrix: np.ndarray = field(repr=False)
    measure_weights: np.ndarray = field(repr=False)
    weight: float = 1.0

    def is_hermitian(self, tol=1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=tol * max(1.0, np.abs(self.matrix).max())))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())

    def rank(self, tol=1e-10) -> int:
        s = np.linalg.svd(self.matrix, compute_uv=False)
        return int(np.sum(s > tol * max(s.max(), 1e-300)))


def _cell_measure(grid: MomentumGrid, conv: Conventions | None) -> np.ndarray:
    """Per-point measure: dk^D (flat) or the exact int_cell d^Dk/(2k0)."""
    if conv is None:
        return np.full(grid.size, grid.cell_volume)
    m, h = conv.mass, grid.spacing / 2
    k = grid.points()
    if grid.dims == 1:
        return 0.5 * (np.arcsinh((k[:, 0] + h) / m) - np.arcsinh((k[:, 0] - h) / m))
    x, w = np.polynomial.legendre.leggauss(6)
    nodes = np.array(list(itertools.product(x, repeat=grid.dims)))
    wts = np.prod(np.array(list(itertools.product(w, repeat=grid.dims))), axis=1) * h**grid.dims
    pts = k[:, None, :] + h * nodes[None, :, :]
    return np.sum(wts / (2 * np.sqrt(np.sum(pts * pts, axis=-1) + m * m)), axis=1)


def _pair_vector(outcome: Outcome, grid: MomentumGrid, conv=None, xi0=0.0):
    """Rank-1 measurement vector restricted to its support.

    Returns flat pair indices (i1 * N + i2) and whitened coefficients.
    """
    X = np.asarray(outcome.X)
    P = np.asarray(outcome.P)
    if len(X) != grid.dims:
        raise ValueError("outcome dimension differs from grid")
    if not grid.on_lattice(P):
        raise ValueError(f"P = {outcome.P} is not on the momentum lattice")
    k = grid.points()
    kp = k + P
    ok = grid.contains(kp)  # hard truncation, no periodic wrap
    k, kp = k[ok], kp[ok]
    i1, i2 = grid.index(k), grid.index(kp)
    coeff = np.exp(1j * (k @ X))
    mu = _cell_measure(grid, conv)
    if conv is not None:
        w1 = conv.energy(k if grid.dims > 1 else k[:, 0])
        w2 = conv.energy(kp if grid.dims > 1 else kp[:, 0])
        coeff = coeff * np.exp(-1j * (w1 + w2) * xi0) / np.sqrt(2 * w1 * 2 * w2)
    coeff = coeff * grid.cell_volume / np.sqrt(mu[i1] * mu[i2])
    return i1 * grid.size + i2, coeff


def _dense(idx, coeff, grid, conv, weight, basis):
    n2 = grid.size**2
    v = np.zeros(n2, dtype=complex)
    v[idx] = coeff
    mu = _cell_measure(grid, conv)
    return DiscretizedOperator(basis, np.outer(v, v.conj()), mu, weight)


def phi_kernel(outcome: Outcome, xi1, xi2, grid: MomentumGrid, t1: float = 0.0, t2: float = 0.0) -> complex:
    """Measurement kernel delta(xi1 - xi2) e^{i P.xi1} on the position lattice.

    The delta is a Kronecker delta divided by the position-cell volume.
    """
    if t1 != t2:
        raise ValueError("both measurement points must lie on one time slice")
    xi1 = np.atleast_1d(np.asarray(xi1, dtype=float))
    xi2 = np.atleast_1d(np.asarray(xi2, dtype=float))
    if not np.allclose(xi1, xi2, atol=1e-9 * grid.x_spacing):
        return 0j
    return complex(np.exp(1j * np.dot(outcome.P, xi1)) / grid.x_spacing**grid.dims)


def kernel_completeness_defect(grid: MomentumGrid) -> float:
    """Max deviation of sum_P dP/(2 pi)^D Phi Phi* from its Kronecker form.

    Per unit X (the kernel does not depend on X) the sum must equal
    delta(xi1 - xi2) delta(xi1' - xi2') delta(xi1 - xi1') on the lattice.
    Only implemented for dims = 1.
    """
    if grid.dims != 1:
        raise ValueError("kernel completeness check is implemented for dims = 1")
    xs = grid.x_axis()
    dv = grid.x_spacing
    n = len(xs)
    total = np.zeros((n, n, n, n), dtype=complex)
    eye = np.eye(n) / dv
    for P in grid.axis():
        phase = np.exp(1j * P * xs)
        phi = eye * phase[:, None]  # phi[xi1, xi2]
        total += grid.spacing / (2 * math.pi) * np.einsum("ab,cd->abcd", phi, phi.conj())
    expected = np.einsum("ab,cd,ac->abcd", np.eye(n), np.eye(n), np.eye(n)) / dv**3
    return float(np.abs(total - expected).max() * dv**3)


def build_povm_nr(outcome: Outcome, grid: MomentumGrid) -> DiscretizedOperator:
    """|Phi_XP><Phi_XP| with <k1, k2|Phi_XP> = e^{i k1.X} delta_{k2, k1 + P}.

    The outcome weight dX dP / (2 pi)^D is kept in ``weight``.
    """
    idx, coeff = _pair_vector(outcome, grid)
    return _dense(idx, coeff, grid, None, grid.outcome_weight, "two-particle flat")


def build_povm_rel(outcome: Outcome, grid: MomentumGrid, xi0: float, conv: Conventions) -> DiscretizedOperator:
    """Relativistic measurement element on the two-particle mass-shell basis.

    Kernel 1/sqrt(2k0(k) 2k0(k+P)) and phase e^{i k.X - i (k0(k) + k0(k+P)) xi0},
    Riemann-summed on the grid; the basis carries exact invariant cell measures.
    """
    idx, coeff = _pair_vector(outcome, grid, conv, xi0)
    return _dense(idx, coeff, grid, conv, grid.outcome_weight, "two-particle mass-shell")


def extend_three_particle(op: DiscretizedOperator, grid: MomentumGrid) -> DiscretizedOperator:
    """Tensor the two-particle element with the one-particle identity (unobserved particle).

    Dense, so only for small grids.
    """
    n = grid.size
    if (op.matrix.shape[0] * n) ** 2 > 2e7:
        raise ValueError("three-particle extension is only built for small grids")
    return DiscretizedOperator(
        op.basis + " x one-particle", np.kron(op.matrix, np.eye(n)), op.measure_weights, op.weight
    )


@dataclass(frozen=True)
class POVMFamily:
    """All lattice outcomes of one measurement (``kind`` is 'nr' or 'rel')."""

    kind: str
    grid: MomentumGrid
    conv: Conventions | None = None
    xi0: float = 0.0
    exclude: tuple = ()

    def __post_init__(self):
        if self.kind not in ("nr", "rel"):
            raise ValueError("kind must be 'nr' or 'rel'")
        if self.kind == "rel" and self.conv is None:
            raise ValueError("relativistic family needs conventions")

    def outcomes(self):
        Xs = self.grid.x_points()
        Ps = self.grid.points()
        skip = set(self.exclude)
        for P in Ps:
            for X in Xs:
                o = Outcome(tuple(X), tuple(P))
                if o not in skip:
                    yield o

    def vector(self, outcome):
        conv = self.conv if self.kind == "rel" else None
        return _pair_vector(outcome, self.grid, conv, self.xi0)

    def element(self, outcome) -> DiscretizedOperator:
        if self.kind == "nr":
            return build_povm_nr(outcome, self.grid)
        return build_povm_rel(outcome, self.grid, self.xi0, self.conv)

    @property
    def n_outcomes(self) -> int:
        return self.grid.size**2 - len(self.exclude)


def _blocks(family: POVMFamily):
    """Sum of weighted elements, block by block (each P acts on its own pair set)."""
    grid = family.grid
    w = grid.outcome_weight
    skip = set(family.exclude)
    Xs = grid.x_points()
    for P in grid.points():
        vecs = []
        idx = None
        for X in Xs:
            o = Outcome(tuple(X), tuple(P))
            if o in skip:
                continue
            i, c = family.vector(o)
            idx = i
            vecs.append(c)
        if idx is None:
            idx, _ = family.vector(Outcome(tuple(Xs[0]), tuple(P)))
            vecs = [np.zeros(len(idx), complex)]
        U = np.array(vecs).T
        yield idx, w * (U @ U.conj().T)


def completeness_report(family: POVMFamily) -> dict:
    """Operator-norm defect of sum_theta M(theta) - I.

    ``defect_interior`` is taken over the pairs reached by some P in the
    lattice; pairs with |k2 - k1| beyond the cutoff get no weight at all and
    only enter ``defect_full``.
    """
    grid = family.grid
    interior = 0.0
    covered = np.zeros(grid.size**2, dtype=bool)
    for idx, block in _blocks(family):
        covered[idx] = True
        interior = max(interior, float(np.linalg.norm(block - np.eye(len(idx)), 2)))
    boundary = int((~covered).sum())
    return {
        "grid": grid.to_dict(),
        "lattice_sizes": {"X": grid.size, "P": grid.size, "outcomes": family.n_outcomes},
        "defect_interior": interior,
        "defect_full": max(interior, 1.0 if boundary else 0.0),
        "boundary_rows": boundary,
    }


def completeness_defect(family: POVMFamily, interior: bool = True) -> float:
    rep = completeness_report(family)
    return rep["defect_interior"] if interior else rep["defect_full"]


def outcome_probabilities(family: POVMFamily, state) -> np.ndarray:
    """w |<Phi_theta|psi>|^2 over the outcome lattice for a whitened two-particle state vector."""
    psi = np.asarray(state, dtype=complex).ravel()
    w = family.grid.outcome_weight
    probs = []
    for o in family.outcomes():
        i, c = family.vector(o)
        probs.append(w * abs(np.vdot(c, psi[i])) ** 2)
    return np.array(probs)
