"""One-particle packets and regularised EPR pairs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .conventions import Conventions
from .numerics import compensated_sum, integrate

__all__ = [
    "GaussianPacket",
    "EPRFamily",
    "NRPacket",
    "massshell_norm",
    "flat_norm",
    "position_shape",
    "epr_overlap_with_povm_state",
]


def _vec(v):
    return tuple(float(c) for c in np.atleast_1d(np.asarray(v, dtype=float)))


def _last_axis(k, dims):
    k = np.asarray(k, dtype=float)
    if dims == 1 and (k.ndim == 0 or k.shape[-1] != 1):
        k = k[..., None]
    return k


@dataclass(frozen=True)
class GaussianPacket:
    """Gaussian mass-shell amplitude

    f(k) = norm * exp(-|k - k_center|^2 / (4 sigma_k^2)) * exp(-i k . x_center)

    specified at reference time ``t0``.
    """

    k_center: tuple = (0.0,)
    sigma_k: float = 0.5
    x_center: tuple = (0.0,)
    t0: float = 0.0
    norm: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "k_center", _vec(self.k_center))
        object.__setattr__(self, "x_center", _vec(self.x_center))
        if len(self.k_center) != len(self.x_center):
            raise ValueError("k_center and x_center must have the same dimension")
        if not self.sigma_k > 0:
            raise ValueError("sigma_k must be positive")

    @property
    def dims(self) -> int:
        return len(self.k_center)

    def amplitude(self, k, conv: Conventions | None = None):
        k = _last_axis(k, self.dims)
        d = k - np.asarray(self.k_center)
        return self.norm * np.exp(-np.sum(d * d, axis=-1) / (4 * self.sigma_k**2)) * np.exp(
            -1j * (k @ np.asarray(self.x_center))
        )

    def smearing_profile(self, x, conv: Conventions | None = None):
        """Test function g(x) on the t0 slice whose smeared field creates this packet.

        (2 pi)^-D int d^Dk f(k) e^{-i k.x}, so that int dx g(x) e^{i k.x} = f(k);
        it is centred at -x_center.
        """
        x = _last_axis(x, self.dims)
        D = self.dims
        y = x + np.asarray(self.x_center)
        pref = self.norm * (2 * math.pi) ** (-D) * (4 * math.pi * self.sigma_k**2) ** (D / 2)
        return pref * np.exp(-self.sigma_k**2 * np.sum(y * y, axis=-1)) * np.exp(
            -1j * (y @ np.asarray(self.k_center))
        )

    def scaled(self, c: float) -> "GaussianPacket":
        return replace(self, norm=self.norm * c)

    def normalized(self, conv: Conventions) -> "GaussianPacket":
        """Rescale so that int d^Dk/(2k0) |f|^2 = 1."""
        return replace(self, norm=self.norm / math.sqrt(massshell_norm(self, conv)))


def flat_norm(f: GaussianPacket) -> float:
    """int d^Dk |f(k)|^2 (closed form for the Gaussian)."""
    return f.norm**2 * (2 * math.pi * f.sigma_k**2) ** (f.dims / 2)


def massshell_norm(f: GaussianPacket, conv: Conventions) -> float:
    """int d^Dk/(2k0) |f(k)|^2 over the mass shell.

    In three dimensions the polar angle about k_center is integrated in
    closed form and the remaining radial integral is done numerically.
    """
    if f.dims != conv.spatial_dims:
        raise ValueError("packet dimension differs from conventions")
    m, s2 = conv.mass, f.sigma_k**2
    kc = np.asarray(f.k_center)
    if conv.spatial_dims == 1:
        c = float(kc[0])

        def g(k):
            return f.norm**2 * np.exp(-((k - c) ** 2) / (2 * s2)) / (2 * np.sqrt(k * k + m * m))

        half = 14 * f.sigma_k
        res = integrate(g, c - half, c + half, epsabs=0, epsrel=1e-13)
        return float(res.value.real)
    q = float(np.linalg.norm(kc))

    def radial(k):
        k = np.asarray(k, dtype=float)
        a = k * q / s2
        with np.errstate(divide="ignore", invalid="ignore"):
            ang = np.where(a > 1e-12, -np.expm1(-2 * a) / np.where(a > 0, a, 1.0), 2.0 - 2 * a)
        return (
            f.norm**2 * 2 * math.pi * k * k * np.exp(-((k - q) ** 2) / (2 * s2)) * ang / (2 * np.sqrt(k * k + m * m))
        )

    hi = q + 14 * f.sigma_k
    res = integrate(radial, max(0.0, q - 14 * f.sigma_k), hi, epsabs=0, epsrel=1e-13)
    return float(res.value.real)


def position_shape(f: GaussianPacket, t: float, x, conv: Conventions, n: int = 64) -> complex:
    """Spatial shape of the packet at time t,

    (2 pi)^(-D/2) int d^Dk f(k) exp(i[k.x - k0 (t - t0)]),

    a bump centred on x_center at t = t0 that drifts with the group velocity.
    """
    from .propagator import _box_nodes

    D = conv.spatial_dims
    x = np.atleast_1d(np.asarray(x, dtype=float))
    half = 9.0 * f.sigma_k
    k, w = _box_nodes(np.asarray(f.k_center), half, D, n if D == 1 else min(n, 36))
    k0 = conv.energy(k if D > 1 else k[:, 0])
    vals = f.amplitude(k, conv) * np.exp(1j * (k @ x - k0 * (t - f.t0)))
    return complex((2 * math.pi) ** (-D / 2) * compensated_sum(vals * w))


@dataclass(frozen=True)
class EPRFamily:
    """Regularised EPR pair.

    Two-particle amplitude
    F(k1, k2) = M exp(-|k1 + k2 - q_total|^2 / (4 sigma^2)) exp(-i (k1_0 + k2_0) pair_time)
    with M = (pi / sigma^2)^(D/2). In position space both particles are
    created at the same point x1 with envelope exp(-sigma^2 |x1|^2 - i q.x1),
    which tends to a constant as sigma -> 0.
    """

    sigma_epr: float = 0.1
    q_total: tuple = (0.0,)
    pair_time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "q_total", _vec(self.q_total))
        if not self.sigma_epr > 0:
            raise ValueError("sigma_epr must be positive (the ideal pair is only a limit)")

    @property
    def dims(self) -> int:
        return len(self.q_total)

    def pair_profile(self, x):
        x = _last_axis(x, self.dims)
        return np.exp(-self.sigma_epr**2 * np.sum(x * x, axis=-1) - 1j * (x @ np.asarray(self.q_total)))

    def pair_profile_ft(self, K):
        """int dx pair_profile(x) e^{i K.x}."""
        K = _last_axis(K, self.dims)
        d = K - np.asarray(self.q_total)
        D = self.dims
        return (math.pi / self.sigma_epr**2) ** (D / 2) * np.exp(-np.sum(d * d, axis=-1) / (4 * self.sigma_epr**2))

    def amplitude(self, k1, k2, conv: Conventions):
        k1 = _last_axis(k1, self.dims)
        k2 = _last_axis(k2, self.dims)
        w = conv.energy(k1 if self.dims > 1 else k1[..., 0]) + conv.energy(k2 if self.dims > 1 else k2[..., 0])
        return self.pair_profile_ft(k1 + k2) * np.exp(-1j * w * self.pair_time)


@dataclass(frozen=True)
class NRPacket:
    """Packet on a uniform momentum grid, normalised under the flat measure."""

    grid: object
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != self.grid.shape:
            raise ValueError(f"values shape {vals.shape} does not match grid {self.grid.shape}")
        object.__setattr__(self, "values", vals)

    @classmethod
    def gaussian(cls, grid, k_center=0.0, sigma_k=0.5, x_center=0.0, normalize=True) -> "NRPacket":
        k = grid.points()
        kc = np.broadcast_to(np.asarray(k_center, dtype=float), (grid.dims,))
        xc = np.broadcast_to(np.asarray(x_center, dtype=float), (grid.dims,))
        d = k - kc
        vals = np.exp(-np.sum(d * d, axis=-1) / (4 * sigma_k**2) - 1j * (k @ xc))
        p = cls(grid, vals.reshape(grid.shape))
        return p.normalized() if normalize else p

    def norm(self) -> float:
        return float(np.sum(np.abs(self.values) ** 2) * self.grid.cell_volume)

    def normalized(self) -> "NRPacket":
        return NRPacket(self.grid, self.values / math.sqrt(self.norm()))

    def position_values(self) -> np.ndarray:
        """Values on the dual position lattice with int dx |f(x)|^2 = int dk |f(k)|^2.

        f(x) = (2 pi)^(-D/2) sum_k dk^D f(k) e^{i k.x}.
        """
        return self.grid.to_position(self.values)


def epr_overlap_with_povm_state(epr: EPRFamily, X, P, grid, conv: Conventions, xi0: float | None = None) -> complex:
    """Fock-space overlap of the grid-ideal EPR pair with a measurement vector.

    The pair is taken in its sigma -> 0 grid limit (total momentum pinned
    to q_total by a Kronecker delta) and the measurement vector is the
    position-space one, int dxi e^{-i P.xi} phi+(xi) phi+(xi - X)|0>, i.e.
    total momentum P and relative displacement X; both are written with
    unit mass-shell weights. ``xi0`` defaults to the pair time.
    """
    if epr.dims != grid.dims:
        raise ValueError("EPR family and grid dimensions differ")
    xi0 = epr.pair_time if xi0 is None else xi0
    X = np.broadcast_to(np.asarray(X, dtype=float), (grid.dims,))
    P = np.broadcast_to(np.asarray(P, dtype=float), (grid.dims,))
    q = np.asarray(epr.q_total)
    if not (grid.on_lattice(P) and grid.on_lattice(q)):
        raise ValueError("P and q_total must lie on the momentum lattice")
    if not np.allclose(P, q, atol=1e-9 * grid.spacing):
        return 0j
    k = grid.points()
    partner = P - k
    ok = grid.contains(partner)
    k, partner = k[ok], partner[ok]
    w1 = conv.energy(k if grid.dims > 1 else k[:, 0])
    w2 = conv.energy(partner if grid.dims > 1 else partner[:, 0])
    time_phase = np.exp(-1j * (w1 + w2) * (epr.pair_time - xi0))
    # two contractions of the bosonic pair, conj of e^{-i k2.X} for each labelling
    direct = np.exp(1j * (partner @ X)) * time_phase
    swapped = np.exp(1j * (k @ X)) * time_phase
    return compensated_sum(direct + swapped)
