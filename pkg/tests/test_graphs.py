"""Spacelike-graph geometry tests: stencils, quadrature, relaxation, envelopes."""

import numpy as np
import pytest

from cmcflat import graphs, holonomy
from cmcflat.graphs import HeightField


def test_height_field_validation():
    with pytest.raises(ValueError):
        HeightField(np.zeros((8, 8)), 0.1, (0.0,))  # origin rank mismatch
    with pytest.raises(ValueError):
        HeightField(np.zeros((8, 8)), -0.1, (0.0, 0.0))
    with pytest.raises(ValueError):
        HeightField(np.zeros((4, 8)), 0.1, (0.0, 0.0))  # too thin for stencils


def test_hyperboloid_mean_curvature_second_order():
    # phi = sqrt(1 + |x|^2) has H = -2 exactly (n = 2); central differences
    # converge at order 2
    errs = []
    for nodes in (41, 81, 161):
        geom = graphs.graph_geometry(graphs.hyperboloid_field(1.0, 1.5, nodes))
        errs.append(float(np.max(np.abs(geom.mean_curvature + 2.0)[geom.interior])))
    assert errs[0] == pytest.approx(2.922081591395953e-3, rel=1e-9)
    orders = [np.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert all(1.8 < o < 2.2 for o in orders)


def test_three_dimensional_hyperboloid():
    geom = graphs.graph_geometry(graphs.hyperboloid_field(1.0, 1.0, 21, ndim=3))
    err = float(np.max(np.abs(geom.mean_curvature + 3.0)[geom.interior]))
    assert err < 0.01
    assert geom.det_identity_error() < 1e-12


def test_unit_normal_on_hyperboloid():
    geom = graphs.graph_geometry(graphs.hyperboloid_field(1.0, 1.0, 21, ndim=3))
    nu = geom.normal
    eta = np.diag([-1.0, 1.0, 1.0, 1.0])
    norms = np.einsum("...i,ij,...j->...", nu, eta, nu)
    assert np.max(np.abs(norms + 1.0)) < 1e-12
    assert np.all(nu[..., 0] > 0)  # future-pointing


def test_det_identity_generic_field():
    f = graphs.sample_height_field(
        lambda x, y: 0.3 * np.sin(x) * np.cos(2.0 * y), 2.0, 65
    )
    geom = graphs.graph_geometry(f)
    assert geom.det_identity_error() < 1e-12


def test_spacelike_guard():
    steep = graphs.sample_height_field(lambda x, y: 1.2 * x, 1.0, 33)
    with pytest.raises(graphs.SpacelikeError):
        graphs.graph_geometry(steep)
    geom = graphs.graph_geometry(steep, check=False)  # opt-out for diagnostics
    assert np.max(sum(g * g for g in geom.grads)) > 1.0


def test_convexity_classification():
    hyp = graphs.hyperboloid_field(1.0, 1.5, 41)
    report = graphs.convexity_check(hyp)
    assert report.classification == "negative definite"
    assert report.max_eigenvalue < 0
    saddle = graphs.sample_height_field(lambda x, y: 0.1 * (x * x - y * y), 1.0, 41)
    assert graphs.convexity_check(saddle).classification == "indefinite"
    plane = graphs.sample_height_field(lambda x, y: 0.2 * x, 1.0, 41)
    assert graphs.convexity_check(plane).classification == "semidefinite"


def test_filtered_quadrature_disk():
    # coordinate-disk region on the unit hyperboloid: area -> pi/4 and
    # volume -> 2 pi (sqrt(5)/2 - 1) as the grid refines (linear cuts, O(h^2))
    f = graphs.hyperboloid_field(1.0, 1.0, 101)

    def disk_level(g):
        x, y = g.field.meshgrid()
        return 0.25 - (x * x + y * y)

    rep = graphs.quotient_energy(f, disk_level)
    assert abs(rep.region_area - np.pi / 4.0) < 1e-3
    assert abs(rep.volume - 2.0 * np.pi * (np.sqrt(1.25) - 1.0)) < 1e-3
    assert rep.energy > 0
    assert rep.tau_mean == pytest.approx(-2.0, abs=1e-3)


def test_quadrature_shift_invariance():
    # a vertical translate is an isometry: same region, same integrals
    f = graphs.hyperboloid_field(1.0, 1.0, 101)

    def disk_level(g):
        x, y = g.field.meshgrid()
        return 0.25 - (x * x + y * y)

    rep = graphs.quotient_energy(f, disk_level)
    shifted = HeightField(f.values + 3.7, f.spacing, f.origin)
    rep_up = graphs.quotient_energy(shifted, disk_level)
    assert rep_up.volume == pytest.approx(rep.volume, abs=1e-13)
    assert rep_up.energy == pytest.approx(rep.energy, abs=1e-12)
    assert rep_up.region_area == pytest.approx(rep.region_area, abs=1e-13)


def test_filtered_region_guards():
    f = graphs.hyperboloid_field(1.0, 1.0, 33)
    with pytest.raises(ValueError):
        # region reaches the frame cells
        graphs.quotient_energy(f, lambda g: np.ones(g.field.shape))
    with pytest.raises(ValueError):
        # empty region
        graphs.quotient_energy(f, lambda g: -np.ones(g.field.shape))


def test_bolza_domain_level_consistency():
    geom = graphs.graph_geometry(graphs.hyperboloid_field(1.0, 1.0, 33))
    level = graphs.bolza_domain_level(geom)
    center = tuple(s // 2 for s in geom.field.shape)
    # Gauss map at the apex is the hyperboloid vertex -> disk origin
    assert level[center] == pytest.approx(float(holonomy.octagon_level(np.zeros(2))))
    assert level[center] > 0


def test_cmc_relax_pullback():
    def bumped(x, y):
        r2 = x * x + y * y
        return np.sqrt(1.0 + r2) + 0.03 * np.exp(-2.0 * r2)

    start = graphs.sample_height_field(bumped, 1.5, 81)
    result = graphs.cmc_relax(start, -2.0, tol=1e-8, max_iters=30)
    assert result.converged
    assert result.residual <= 1e-8
    assert result.iterations <= 10
    geom = graphs.graph_geometry(result.field)
    dev = np.abs(geom.mean_curvature + 2.0)[geom.interior]
    assert float(np.max(dev)) <= 1e-8


def test_cmc_relax_validation():
    f = graphs.hyperboloid_field(1.0, 1.0, 33)
    with pytest.raises(ValueError):
        graphs.cmc_relax(f, 2.0)
    with pytest.raises(ValueError):
        graphs.cmc_relax(graphs.hyperboloid_field(1.0, 1.0, 9, ndim=1), -2.0)


def test_envelope_zero_cocycle_is_shifted_hyperboloid():
    # with zero cocycle all orbit sheets coincide, so the soft minimum is the
    # hyperboloid minus smoothing*log(#sheets); 457 elements at word length 3
    env = graphs.orbit_envelope_field(holonomy.bolza_rep(), 3.0, 81, word_length=3)
    hyp = graphs.hyperboloid_field(1.0, 3.0, 81)
    expected = hyp.values - 0.08 * np.log(457.0)
    assert np.max(np.abs(env.values - expected)) < 1e-12
    # the shift is an isometry: same curvature up to ulp noise amplified by
    # the second-difference stencil (~eps/h^2)
    ge = graphs.graph_geometry(env)
    gh = graphs.graph_geometry(hyp)
    assert np.max(np.abs(ge.mean_curvature - gh.mean_curvature)) < 1e-10


def test_limit_experiment_small_grid():
    # deformation ham_ratio approaches 1 as the cocycle is scaled away;
    # values frozen from a 161-node run (the acceptance suite runs 321)
    rep = holonomy.bolza_rep(holonomy.bolza_nontrivial_cocycle(0.002))
    rows, base = graphs.limit_experiment(rep, (1.0, 2.0), extent=6.4, nodes=161)
    assert base == pytest.approx(12.551802406094048, abs=1e-9)
    assert len(rows) == 2
    assert len(rows[0]) == len(graphs.LIMIT_COLUMNS)
    devs = [abs(row[3] - 1.0) for row in rows]
    assert devs[1] < devs[0] < 1e-2
    assert devs[1] < 1e-4
    for row in rows:
        assert abs(row[1] + 2.0) < 1e-6  # tau_mean pinned by the relaxation
        assert row[4] <= 1e-8
