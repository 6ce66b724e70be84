import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate as sint

from fieldport.conventions import default_conventions
from fieldport.measurement import (
    MomentumGrid,
    Outcome,
    POVMFamily,
    _cell_measure,
    build_povm_nr,
    build_povm_rel,
    completeness_defect,
    completeness_report,
    extend_three_particle,
    kernel_completeness_defect,
    outcome_probabilities,
    phi_kernel,
)

C1 = default_conventions(spatial_dims=1)


def test_grid_geometry():
    g = MomentumGrid(1, 9, 0.5)
    assert g.half == 4 and g.size == 9
    assert g.x_spacing == pytest.approx(2 * math.pi / (9 * 0.5))
    assert g.outcome_weight == pytest.approx(1 / 9)
    # dX dP / 2 pi equals 1/n per outcome cell
    assert g.x_spacing * g.spacing / (2 * math.pi) == pytest.approx(g.outcome_weight)
    r = g.refined()
    assert (r.n_points, r.spacing) == (17, 0.25)


def test_grid_rejects_even():
    with pytest.raises(ValueError):
        MomentumGrid(1, 8, 0.5)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 3), st.integers(1, 6), st.data())
def test_index_roundtrip(dims, half, data):
    g = MomentumGrid(dims, 2 * half + 1, 0.3)
    j = data.draw(st.lists(st.integers(-half, half), min_size=dims, max_size=dims))
    k = np.array(j, float) * 0.3
    assert g.on_lattice(k) and g.contains(k[None])[0]
    assert np.allclose(g.points()[g.index(k[None])[0]], k)


def test_cell_measure_1d_exact():
    g = MomentumGrid(1, 7, 0.4)
    mu = _cell_measure(g, C1)
    for k, m in zip(g.axis(), mu):
        ref, _ = sint.quad(lambda q: 1 / (2 * math.sqrt(q * q + 1)), k - 0.2, k + 0.2, epsabs=1e-15)
        assert m == pytest.approx(ref, rel=1e-13)


def test_cell_measure_3d_gauss():
    conv = default_conventions(mass=1.0)
    g = MomentumGrid(3, 3, 0.5)
    mu = _cell_measure(g, conv)
    k = g.points()[5]
    ref, _ = sint.tplquad(
        lambda z, y, x: 1 / (2 * math.sqrt(x * x + y * y + z * z + 1)),
        k[0] - 0.25, k[0] + 0.25, k[1] - 0.25, k[1] + 0.25, k[2] - 0.25, k[2] + 0.25,
        epsabs=1e-13,
    )
    assert mu[5] == pytest.approx(ref, rel=1e-9)


def test_elements_are_rank_one_psd():
    g = MomentumGrid(1, 5, 0.5)
    o = Outcome((g.x_spacing,), (0.5,))
    for op in (build_povm_nr(o, g), build_povm_rel(o, g, 0.3, C1)):
        assert op.is_hermitian()
        assert op.min_eigenvalue() > -1e-12
        assert op.rank() == 1


def test_three_particle_extension_shape():
    g = MomentumGrid(1, 3, 0.5)
    op = extend_three_particle(build_povm_nr(Outcome((0.0,), (0.0,)), g), g)
    assert op.matrix.shape == (27, 27)


def test_nr_completeness_interior():
    for n in (9, 17):
        assert completeness_defect(POVMFamily("nr", MomentumGrid(1, n, 0.25))) <= 1e-10


def test_nr_completeness_2d():
    assert completeness_defect(POVMFamily("nr", MomentumGrid(2, 5, 0.5))) <= 1e-10


def test_boundary_pairs_reported():
    rep = completeness_report(POVMFamily("nr", MomentumGrid(1, 9, 0.25)))
    # pairs (k1, k2) whose difference is not a lattice P within the cutoff
    assert rep["boundary_rows"] > 0
    assert rep["defect_full"] == 1.0


def test_rel_completeness_converges():
    g = MomentumGrid(1, 33, 0.25)
    a = completeness_defect(POVMFamily("rel", g, C1, 0.0))
    b = completeness_defect(POVMFamily("rel", g.refined(), C1, 0.0))
    assert a / b >= 1.8


def test_excluding_outcomes_breaks_completeness():
    g = MomentumGrid(1, 9, 0.25)
    fam = POVMFamily("nr", g, exclude=(Outcome((0.0,), (0.0,)),))
    assert fam.n_outcomes == 80
    assert completeness_defect(fam) > 0.05


def test_kernel_completeness():
    assert kernel_completeness_defect(MomentumGrid(1, 9, 0.5)) <= 1e-12


def test_phi_kernel():
    g = MomentumGrid(1, 9, 0.5)
    o = Outcome((0.0,), (1.0,))
    assert phi_kernel(o, 0.0, g.x_spacing, g) == 0
    assert phi_kernel(o, g.x_spacing, g.x_spacing, g) == pytest.approx(np.exp(1j * g.x_spacing) / g.x_spacing)
    with pytest.raises(ValueError):
        phi_kernel(o, 0.0, 0.0, g, t1=0.0, t2=1.0)


def test_probabilities_sum_to_one_for_interior_state():
    g = MomentumGrid(1, 15, 0.25)
    rng = np.random.default_rng(3)
    psi = np.zeros((g.size, g.size), complex)
    # support well inside so every pair difference is a lattice P
    psi[5:10, 5:10] = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    psi /= np.linalg.norm(psi)
    p = outcome_probabilities(POVMFamily("nr", g), psi)
    assert p.sum() == pytest.approx(1.0, abs=1e-12)
    assert p.min() >= 0
