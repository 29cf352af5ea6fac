import numpy as np
import pytest

from cmcflat import holonomy as h
from cmcflat import minkowski as mk

SQRT2 = np.sqrt(2.0)


def test_translation_length_closed_form():
    # side-pairing boosts translate by l with cosh(l/2) = 1 + sqrt(2)
    ell = h.bolza_translation_length()
    assert abs(np.cosh(ell / 2.0) - (1.0 + SQRT2)) < 1e-15
    assert abs(ell - 3.0571418389619964) < 1e-15


def test_generators_are_lorentz_and_orthochronous():
    pres = h.bolza_presentation()
    assert pres.ndim == 2
    assert pres.n_generators == 8
    for g in pres.generators:
        assert mk.lorentz_defect(g) < 1e-13
        assert mk.is_orthochronous(g)


def test_relators_evaluate_to_identity():
    pres = h.bolza_presentation()
    assert len(pres.relators) == 5
    worst = max(
        float(np.max(np.abs(h.evaluate_word(pres, rel) - np.eye(3))))
        for rel in pres.relators
    )
    assert worst < 1e-9


def test_octagon_radii_closed_forms():
    # circumradius: cosh(R) = cot^2(pi/8) = 3 + 2 sqrt(2)
    assert abs(h.octagon_circumradius() - np.arccosh(3.0 + 2.0 * SQRT2)) < 1e-12
    assert abs(h.octagon_inradius() - 1.5285709194809982) < 1e-12
    assert h.octagon_inradius() < h.octagon_circumradius()


def test_octagon_area_is_gauss_bonnet_value():
    # regular right-angled octagon: area = (8-2)pi - 8*(pi/4) = 4pi
    assert abs(h.octagon_area() - 4.0 * np.pi) < 1e-6


def test_octagon_boundary_radius_extremes():
    ang = np.linspace(0.0, 2.0 * np.pi, 1441)
    r = h.octagon_boundary_radius(ang)
    assert abs(float(np.min(r)) - np.tanh(h.octagon_inradius() / 2.0)) < 1e-12
    assert abs(float(np.max(r)) - np.tanh(h.octagon_circumradius() / 2.0)) < 1e-12


def test_octagon_level_and_membership():
    assert h.octagon_contains(np.zeros(2))
    assert not h.octagon_contains(np.array([0.95, 0.0]))
    # level at the center equals the euclidean disk inradius
    assert abs(h.octagon_level(np.zeros(2)) - np.tanh(h.octagon_inradius() / 2.0)) < 1e-12
    # points marginally beyond a side are rejected
    rin = np.tanh(h.octagon_inradius() / 2.0)
    assert not h.octagon_contains(np.array([rin + 1e-6, 0.0]))


def test_cocycle_rule_on_random_words():
    pres = h.bolza_presentation()
    rng = np.random.default_rng(5)
    rep = h.HolonomyRep(pres, h.Cocycle(tuple(rng.normal(scale=0.2, size=3) for _ in range(8))))
    for _ in range(25):
        length = int(rng.integers(2, 6))
        word = [int(s) * int(i) for s, i in zip(rng.choice((-1, 1), size=length),
                                                rng.integers(1, 9, size=length))]
        split = int(rng.integers(1, length))
        lhs = h.extend_cocycle(rep, word)
        rhs = h.extend_cocycle(rep, word[:split]) + \
            h.evaluate_word(pres, word[:split]) @ h.extend_cocycle(rep, word[split:])
        assert np.max(np.abs(lhs - rhs)) < 1e-10


def test_coboundary_closed_form_and_relator_vanishing():
    pres = h.bolza_presentation()
    rng = np.random.default_rng(8)
    b = rng.normal(size=3)
    cob = h.coboundary_cocycle(pres, b)
    rep = h.HolonomyRep(pres, cob)
    # t(w) = b - f(w) b for every word
    for word in ([1], [2, -3], [4, 4, -1, 6]):
        f = h.evaluate_word(pres, word)
        assert np.max(np.abs(h.extend_cocycle(rep, word) - (b - f @ b))) < 1e-10
    worst = max(float(np.max(np.abs(h.extend_cocycle(rep, rel)))) for rel in pres.relators)
    assert worst < 1e-9


def test_cocycle_space_dimensions():
    pres = h.bolza_presentation()
    z, bnd = h.cocycle_space(pres)
    assert z.shape == (24, 9)
    assert bnd.shape == (24, 3)
    # coboundaries live inside the cocycle space
    proj = z @ np.linalg.lstsq(z, bnd, rcond=None)[0]
    assert np.max(np.abs(proj - bnd)) < 1e-9


def test_nontrivial_cocycle_is_valid_and_not_gauge():
    pres = h.bolza_presentation()
    coc = h.bolza_nontrivial_cocycle(1.0)
    rep = h.HolonomyRep(pres, coc)
    worst = max(float(np.max(np.abs(h.extend_cocycle(rep, rel)))) for rel in pres.relators)
    assert worst < 1e-9
    # distance from the coboundary subspace stays bounded away from zero
    _, bnd = h.cocycle_space(pres)
    vec = np.concatenate([t for t in coc.translations])
    resid = vec - bnd @ np.linalg.lstsq(bnd, vec, rcond=None)[0]
    assert np.linalg.norm(resid) > 0.5 * np.linalg.norm(vec)


def test_scale_structure_scales_translations_only():
    rep = h.bolza_rep(h.bolza_nontrivial_cocycle(0.4))
    scaled = h.scale_structure(rep, 0.25)
    for a, b in zip(rep.presentation.generators, scaled.presentation.generators):
        assert np.array_equal(a, b)
    for ta, tb in zip(rep.cocycle.translations, scaled.cocycle.translations):
        assert np.max(np.abs(tb - 0.25 * ta)) < 1e-15


def test_orbit_counts_by_word_length():
    rep = h.bolza_rep()
    assert len(h.orbit_isometries(rep, 1)) == 9
    assert len(h.orbit_isometries(rep, 2)) == 65
    assert len(h.orbit_isometries(rep, 3)) == 457
    # identity is always present
    isos = h.orbit_isometries(rep, 1)
    best = min(float(np.max(np.abs(i.linear - np.eye(3)))) for i in isos)
    assert best == 0.0


def test_deformed_holonomy_moves_points():
    rep = h.bolza_rep(h.bolza_nontrivial_cocycle(0.3))
    x = np.array([1.0, 0.0, 0.0])
    moved = h.apply_deformed_holonomy(rep, [1, 2], x)
    undeformed = h.evaluate_word(rep.presentation, [1, 2]) @ x
    assert np.max(np.abs(moved - undeformed - h.extend_cocycle(rep, [1, 2]))) < 1e-12


def test_rep_text_roundtrip_is_exact():
    rep = h.bolza_rep(h.bolza_nontrivial_cocycle(0.17))
    back = h.rep_from_text(h.rep_to_text(rep))
    for a, b in zip(rep.presentation.generators, back.presentation.generators):
        assert np.array_equal(a, b)
    for ta, tb in zip(rep.cocycle.translations, back.cocycle.translations):
        assert np.array_equal(ta, tb)
    assert rep.presentation.relators == back.presentation.relators


def test_word_evaluation_respects_inverses():
    pres = h.bolza_presentation()
    w = h.evaluate_word(pres, [2, -2])
    assert np.max(np.abs(w - np.eye(3))) < 1e-13
    with pytest.raises(IndexError):
        h.evaluate_word(pres, [9])
