import numpy as np
import pytest

from cmcflat import models


def test_cone_slice_trace_and_rescaled_volume():
    # the cone slice at rho = s has tau = -n/s and |tau|^n Vol = n^n V exactly
    for n, expect in ((2, 4.0), (3, 27.0), (4, 256.0)):
        model = models.ConeModel(n, 1.0)
        for s in (0.3, 1.0, 5.0):
            slc = models.cone_slice(model, s)
            assert slc.tau == -n / s
            assert abs(slc.rescaled_volume - expect) < 1e-12 * expect
            (block,) = slc.blocks
            assert block.curvature == "hyperbolic"
            assert abs(block.k_eigenvalue - slc.tau / n) < 1e-15


def test_cone_rescaled_volume_scales_with_base_volume():
    slc = models.slice_at_tau(models.ConeModel(3, 2.5), -1.7)
    assert abs(slc.rescaled_volume - 27.0 * 2.5) < 1e-12 * 67.5


def test_kasner_slice_structure():
    model = models.KasnerModel(3, 1.0, 1.0)
    slc = models.slice_at_tau(model, -2.0)
    hyp, circ = slc.blocks
    assert hyp.curvature == "hyperbolic" and hyp.dim == 2
    assert circ.curvature == "flat" and circ.dim == 1
    # the flat direction does not expand: its k eigenvalue vanishes
    assert circ.k_eigenvalue == 0.0
    assert abs(hyp.k_eigenvalue - slc.tau / 2.0) < 1e-15


def test_kasner_closed_form_frozen_value():
    # (n-1)^(n-1) |tau| V R with n=3, tau=-2, V=R=1 gives 8
    model = models.KasnerModel(3, 1.0, 1.0)
    assert abs(models.ham_closed_form(model, -2.0) - 8.0) < 1e-14
    slc = models.slice_at_tau(model, -2.0)
    assert abs(slc.rescaled_volume - 8.0) < 1e-13


def test_ham_closed_form_matches_slices_along_tau():
    cone = models.ConeModel(4, 0.7)
    kasner = models.KasnerModel(4, 1.3, 2.0)
    for tau in (-10.0, -3.0, -0.25):
        for model in (cone, kasner):
            slc = models.slice_at_tau(model, tau)
            closed = models.ham_closed_form(model, tau)
            assert abs(slc.rescaled_volume - closed) < 1e-12 * abs(closed)


def test_slice_rejects_nonnegative_tau():
    with pytest.raises(ValueError):
        models.slice_at_tau(models.ConeModel(3, 1.0), 0.5)
    with pytest.raises(ValueError):
        models.cone_slice(models.ConeModel(3, 1.0), -1.0)


def test_model_dimension_bounds():
    with pytest.raises(ValueError):
        models.ConeModel(1, 1.0)
    with pytest.raises(ValueError):
        models.ConeModel(5, 1.0)
    with pytest.raises(ValueError):
        models.KasnerModel(2, 1.0, 1.0)  # needs a hyperbolic factor of dim >= 2


def test_riccati_closed_form_on_diagonal_oracle():
    # kappa -> kappa / (1 - t kappa): by hand for diag(-1, -2) at t = 0.5
    k0 = np.diag([-1.0, -2.0])
    out = models.riccati_propagate(k0, 0.5)
    assert np.max(np.abs(out - np.diag([-1.0 / 1.5, -1.0]))) < 1e-15


def test_riccati_semigroup_property():
    rng = np.random.default_rng(17)
    for _ in range(6):
        n = int(rng.integers(2, 5))
        a = rng.normal(size=(n, n))
        k0 = -(a @ a.T) - 0.05 * np.eye(n)
        s, t = 0.7, 0.9
        two = models.riccati_propagate(models.riccati_propagate(k0, s), t)
        one = models.riccati_propagate(k0, s + t)
        assert np.max(np.abs(two - one)) < 1e-10


def test_riccati_focal_crossing_raises():
    k0 = np.diag([0.5, -1.0])
    foc = models.focal_times(k0)
    assert np.allclose(foc, [-1.0, 2.0])
    models.riccati_propagate(k0, 1.9)  # inside the window
    with pytest.raises(ValueError):
        models.riccati_propagate(k0, 2.0)
    with pytest.raises(ValueError):
        models.riccati_propagate(k0, 2.5)


def test_riccati_numeric_integration_matches_closed_form():
    rng = np.random.default_rng(23)
    for _ in range(4):
        n = int(rng.integers(2, 5))
        a = rng.normal(size=(n, n))
        k0 = -(a @ a.T) - 0.1 * np.eye(n)
        t = float(rng.uniform(0.5, 2.0))
        num = models.riccati_integrate(k0, t, steps=1500)
        exact = models.riccati_propagate(k0, t)
        assert np.max(np.abs(num - exact)) < 1e-10


def test_riccati_integrate_converges_at_fourth_order():
    k0 = np.diag([-1.0, -3.0])
    exact = models.riccati_propagate(k0, 1.0)
    e_coarse = np.max(np.abs(models.riccati_integrate(k0, 1.0, steps=8) - exact))
    e_fine = np.max(np.abs(models.riccati_integrate(k0, 1.0, steps=16) - exact))
    assert 10.0 < e_coarse / e_fine < 24.0


def test_focal_times_ignore_zero_eigenvalues():
    k0 = np.diag([0.0, -2.0])
    foc = models.focal_times(k0)
    assert foc.shape == (1,)
    assert abs(foc[0] + 0.5) < 1e-14
