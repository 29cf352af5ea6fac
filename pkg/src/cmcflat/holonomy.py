"""Surface-group holonomy: octagon generators, translation cocycles, deformations.

The linear holonomy used throughout is the genus-2 group generated by eight
hyperbolic translations of the hyperbolic plane pairing opposite sides of the
regular octagon with vertex angle pi/4 (all vertices identified, total angle
2*pi, quotient area 4*pi by Gauss-Bonnet).  Generator k translates along the
geodesic through the origin at angle k*pi/4 by the doubled inradius; opposite
generators are mutual inverses and the side pairing forces the single surface
relation  g1 g2^-1 g3 g4^-1 g1^-1 g2 g3^-1 g4 = e.

Affine deformations are described by a translation cocycle: one translation
vector per generator, extended to arbitrary words via

    t(alpha beta) = t(alpha) + f(alpha) t(beta)

where f is the linear holonomy.  Coboundaries t(g) = b - f(g) b correspond to
moving the base point and deform nothing geometrically.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import null_space
from scipy.optimize import brentq

from .minkowski import (
    REORTHO_EVERY,
    MinkIsometry,
    lorentz_project,
    make_boost,
    make_rotation,
    minkowski_metric,
)

#: octagon side-pairing relation in signed 1-based generator indices
BOLZA_RELATOR = (1, -2, 3, -4, -1, 2, -3, 4)
#: residual allowed when a relator word is evaluated numerically
RELATOR_TOL = 1e-9
#: membership tie tolerance: boundary points count as inside
MEMBERSHIP_TIE_TOL = 1e-12

Word = tuple  # signed 1-based generator indices, negative = inverse


@dataclass(frozen=True, eq=False)
class GroupPresentation:
    """Finitely presented subgroup of O(n,1): generator matrices + relator words."""

    ndim: int
    generators: tuple
    relators: tuple

    @property
    def n_generators(self) -> int:
        return len(self.generators)

    def generator(self, index: int) -> np.ndarray:
        """Matrix for a signed 1-based index (negative index means inverse)."""
        g = self.generators[abs(index) - 1]
        if index < 0:
            eta = minkowski_metric(self.ndim)
            g = eta @ g.T @ eta
        return g


@dataclass(frozen=True, eq=False)
class Cocycle:
    """One translation vector per generator of a presentation."""

    translations: tuple

    @staticmethod
    def zero(ndim: int, n_generators: int) -> "Cocycle":
        return Cocycle(tuple(np.zeros(ndim + 1) for _ in range(n_generators)))


@dataclass(frozen=True, eq=False)
class HolonomyRep:
    """Affine holonomy: a presentation together with a translation cocycle."""

    presentation: GroupPresentation
    cocycle: Cocycle

    def isometry(self, word) -> MinkIsometry:
        linear = evaluate_word(self.presentation, word)
        return MinkIsometry(linear, extend_cocycle(self, word))


def evaluate_word(presentation: GroupPresentation, word) -> np.ndarray:
    """Multiply out a word of signed generator indices.

    The running product is re-orthonormalized (polar projection back onto the
    Lorentz group) after every REORTHO_EVERY factors so that long chains keep
    the group-membership defect at the 1e-12 scale.
    """
    out = np.eye(presentation.ndim + 1)
    for count, index in enumerate(word, start=1):
        out = out @ presentation.generator(index)
        if count % REORTHO_EVERY == 0:
            out = lorentz_project(out)
    return out


def extend_cocycle(rep: HolonomyRep, word) -> np.ndarray:
    """Translation part of the affine holonomy of a word.

    Recursive use of t(alpha beta) = t(alpha) + f(alpha) t(beta); the
    translation of an inverse generator is -f(g)^-1 t(g).
    """
    pres = rep.presentation
    t = np.zeros(pres.ndim + 1)
    prefix = np.eye(pres.ndim + 1)
    for index in word:
        g = pres.generator(index)
        if index > 0:
            tg = rep.cocycle.translations[index - 1]
        else:
            tg = -(g @ rep.cocycle.translations[-index - 1])
        t = t + prefix @ tg
        prefix = prefix @ g
    return t


def apply_deformed_holonomy(rep: HolonomyRep, word, x) -> np.ndarray:
    """Image of a Minkowski point under the affine action of a word."""
    return rep.isometry(word).apply(x)


def coboundary_cocycle(presentation: GroupPresentation, base_point) -> Cocycle:
    """Cocycle t(g) = b - f(g) b; trivial in cohomology for any base point b."""
    b = np.asarray(base_point, dtype=float)
    return Cocycle(tuple(b - g @ b for g in presentation.generators))


def scale_structure(rep: HolonomyRep, factor: float) -> HolonomyRep:
    """Rescale the affine structure: translations scale, linear parts do not.

    Conjugating the developing map by x -> factor*x multiplies every cocycle
    translation by ``factor`` and leaves the linear holonomy unchanged.
    """
    scaled = Cocycle(tuple(factor * t for t in rep.cocycle.translations))
    return HolonomyRep(rep.presentation, scaled)


# ---------------------------------------------------------------------------
# octagon geometry
# ---------------------------------------------------------------------------


def octagon_inradius() -> float:
    """Hyperbolic distance from the octagon center to each side.

    Solved numerically from the vertex-angle condition: the regular octagon
    with interior angle pi/4 has cosh(r) sin(pi/8) = cos(pi/8).
    """
    return brentq(
        lambda r: np.cosh(r) * np.sin(np.pi / 8) - np.cos(np.pi / 8), 0.1, 5.0, xtol=1e-15
    )


def octagon_circumradius() -> float:
    """Hyperbolic distance from the octagon center to each vertex."""
    return float(np.arccosh(1.0 / np.tan(np.pi / 8) ** 2))


def bolza_translation_length() -> float:
    """Common translation length of the side-pairing generators (twice the inradius)."""
    return 2.0 * octagon_inradius()


def bolza_presentation() -> GroupPresentation:
    """Eight side-pairing translations of the regular pi/4 octagon.

    Generator k (0-based) translates along the geodesic at angle k*pi/4;
    generators k and k+4 are mutual inverses.  Relators: the four opposite
    pairs and the octagon side-pairing relation.
    """
    ell = bolza_translation_length()
    gens = []
    for k in range(8):
        rot = make_rotation(2, 0, 1, k * np.pi / 4)
        gens.append(rot @ make_boost([1.0, 0.0], ell) @ rot.T)
    relators = ((1, 5), (2, 6), (3, 7), (4, 8), BOLZA_RELATOR)
    return GroupPresentation(2, tuple(gens), relators)


def bolza_rep(cocycle: Cocycle | None = None) -> HolonomyRep:
    pres = bolza_presentation()
    if cocycle is None:
        cocycle = Cocycle.zero(pres.ndim, pres.n_generators)
    return HolonomyRep(pres, cocycle)


def _side_circle_data():
    """Euclidean centers and radii of the eight geodesic side circles in the disk."""
    rho0 = np.tanh(0.5 * octagon_inradius())
    radius = (1.0 - rho0 * rho0) / (2.0 * rho0)
    dist = (1.0 + rho0 * rho0) / (2.0 * rho0)
    angles = np.arange(8) * (np.pi / 4)
    centers = dist * np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    return centers, radius


def octagon_level(points) -> np.ndarray:
    """Signed level of Poincare-disk points against the octagon boundary.

    For ``points`` of shape (..., 2) returns min over the eight side circles
    of (distance to circle center - circle radius); the value is >= 0 exactly
    on the octagon (inside lies outside every side circle) and its zero set
    is the boundary, which makes it usable as a cut function in quadrature.
    """
    pts = np.asarray(points, dtype=float)
    centers, radius = _side_circle_data()
    level = None
    for c in centers:
        d = np.sqrt(np.sum((pts - c) ** 2, axis=-1)) - radius
        level = d if level is None else np.minimum(level, d)
    return level


def octagon_contains(points) -> np.ndarray:
    """Membership of Poincare-disk points in the centered fundamental octagon.

    ``points`` has shape (..., 2).  A point is inside when it lies on the
    center side of all eight side geodesics; boundary points (within
    MEMBERSHIP_TIE_TOL of a side circle) count as inside, so a point shared
    by two tiles is attributed to the smaller-index side's tile.
    """
    return octagon_level(points) >= -MEMBERSHIP_TIE_TOL


def octagon_boundary_radius(angle) -> np.ndarray:
    """Euclidean disk radius of the octagon boundary along a ray at ``angle``."""
    phi = np.abs(np.mod(np.asarray(angle, dtype=float) + np.pi / 8, np.pi / 4) - np.pi / 8)
    rho0 = np.tanh(0.5 * octagon_inradius())
    dist = (1.0 + rho0 * rho0) / (2.0 * rho0)
    # nearest intersection of the ray with the side circle (orthogonal to the unit circle)
    return dist * np.cos(phi) - np.sqrt((dist * np.cos(phi)) ** 2 - 1.0)


def octagon_area(n_panels: int = 128) -> float:
    """Hyperbolic area of the octagon by quadrature (Gauss-Bonnet value: 4*pi).

    The radial integral of the disk area element 4 r/(1-r^2)^2 is done in
    closed form; the angular integral uses composite Simpson over one of the
    sixteen symmetric sectors.
    """
    phi = np.linspace(0.0, np.pi / 8, 2 * n_panels + 1)
    rho = octagon_boundary_radius(phi)
    integrand = 2.0 / (1.0 - rho * rho) - 2.0
    h = phi[1] - phi[0]
    weights = np.ones_like(phi)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return float(16.0 * (h / 3.0) * np.dot(weights, integrand))


# ---------------------------------------------------------------------------
# cocycle space
# ---------------------------------------------------------------------------


def _relator_constraint_matrix(presentation: GroupPresentation) -> np.ndarray:
    """Linear map (t_1, ..., t_m) -> stacked relator translations.

    A cocycle must send every relator word to zero translation; the map is
    linear in the generator translations, with the block for letter j of a
    word weighted by the linear holonomy of the preceding prefix.
    """
    d = presentation.ndim + 1
    m = presentation.n_generators
    rows = []
    for word in presentation.relators:
        block = np.zeros((d, d * m))
        prefix = np.eye(d)
        for index in word:
            g = presentation.generator(index)
            j = abs(index) - 1
            if index > 0:
                block[:, d * j : d * (j + 1)] += prefix
            else:
                block[:, d * j : d * (j + 1)] -= prefix @ g
            prefix = prefix @ g
        rows.append(block)
    return np.vstack(rows)


def cocycle_space(presentation: GroupPresentation):
    """Orthonormal bases (cocycles, coboundaries) as columns of two matrices.

    Cocycles are the nullspace of the relator constraints; coboundaries are
    the image of b -> (b - f(g_k) b)_k.  Both live in R^{(n+1) * n_generators}
    with generator translations stacked in order.
    """
    z_basis = null_space(_relator_constraint_matrix(presentation))
    d = presentation.ndim + 1
    cob = np.vstack([np.eye(d) - g for g in presentation.generators])
    q, r = np.linalg.qr(cob)
    keep = np.abs(np.diag(r)) > 1e-12 * max(1.0, np.abs(r[0, 0]))
    return z_basis, q[:, keep]


def _stack_cocycle(presentation: GroupPresentation, vec: np.ndarray) -> Cocycle:
    d = presentation.ndim + 1
    return Cocycle(tuple(vec[d * k : d * (k + 1)].copy() for k in range(presentation.n_generators)))


def bolza_nontrivial_cocycle(scale: float = 1.0) -> Cocycle:
    """A canonical cocycle with nonzero cohomology class.

    First cocycle-space basis vector, projected orthogonal to the coboundary
    subspace and normalized so the largest translation norm equals ``scale``.
    Deterministic for a fixed platform (SVD-based bases).
    """
    pres = bolza_presentation()
    z_basis, b_basis = cocycle_space(pres)
    proj = np.eye(b_basis.shape[0]) - b_basis @ b_basis.T
    candidates = proj @ z_basis
    norms = np.linalg.norm(candidates, axis=0)
    vec = candidates[:, int(np.argmax(norms))]
    cocycle = _stack_cocycle(pres, vec)
    top = max(np.linalg.norm(t) for t in cocycle.translations)
    return Cocycle(tuple((scale / top) * t for t in cocycle.translations))


def orbit_isometries(rep: HolonomyRep, max_word_length: int = 3):
    """Deduplicated affine holonomies of all words up to a given length.

    Breadth-first over reduced words (no immediate backtracking), keeping the
    first representative of each group element; deterministic ordering.
    """
    pres = rep.presentation
    d = pres.ndim + 1
    seen = {}
    frontier = [((), MinkIsometry.identity(pres.ndim))]
    seen[_element_key(frontier[0][1])] = frontier[0][1]
    inverse_of = lambda i: i + 4 if i <= 4 else i - 4  # opposite generator
    for _ in range(max_word_length):
        nxt = []
        for word, iso in frontier:
            for index in range(1, pres.n_generators + 1):
                if word and index == inverse_of(word[-1]):
                    continue
                gen_iso = MinkIsometry(
                    pres.generator(index), rep.cocycle.translations[index - 1]
                )
                new = iso.compose(gen_iso)
                key = _element_key(new)
                if key not in seen:
                    seen[key] = new
                    nxt.append((word + (index,), new))
        frontier = nxt
    return list(seen.values())


def _element_key(iso: MinkIsometry):
    return tuple(np.round(np.concatenate([iso.linear.ravel(), iso.translation]), 9))


# ---------------------------------------------------------------------------
# plain-text serialization
# ---------------------------------------------------------------------------


def rep_to_text(rep: HolonomyRep) -> str:
    """Serialize a holonomy representation to a key=value block.

    Schema: ``format``, ``ndim``, ``n_generators`` headers; per generator k a
    row-major ``generator<k>`` line and a ``translation<k>`` line; one
    ``relator<j>`` line per relator.  Floats use shortest round-trip repr.
    """
    pres = rep.presentation
    lines = ["format = holonomy-rep v1", f"ndim = {pres.ndim}", f"n_generators = {pres.n_generators}"]
    for j, word in enumerate(pres.relators):
        lines.append(f"relator{j} = " + " ".join(str(i) for i in word))
    for k, g in enumerate(pres.generators):
        lines.append(f"generator{k} = " + " ".join(repr(float(v)) for v in g.ravel()))
    for k, t in enumerate(rep.cocycle.translations):
        lines.append(f"translation{k} = " + " ".join(repr(float(v)) for v in t))
    return "\n".join(lines) + "\n"


def rep_from_text(text: str) -> HolonomyRep:
    fields = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, value = line.partition("=")
        fields[key.strip()] = value.strip()
    if fields.get("format") != "holonomy-rep v1":
        raise ValueError("unrecognized holonomy serialization format")
    ndim = int(fields["ndim"])
    n_gen = int(fields["n_generators"])
    d = ndim + 1
    gens, trans, relators = [], [], []
    for k in range(n_gen):
        vals = np.array([float(v) for v in fields[f"generator{k}"].split()])
        gens.append(vals.reshape(d, d))
        trans.append(np.array([float(v) for v in fields[f"translation{k}"].split()]))
    j = 0
    while f"relator{j}" in fields:
        relators.append(tuple(int(v) for v in fields[f"relator{j}"].split()))
        j += 1
    pres = GroupPresentation(ndim, tuple(gens), tuple(relators))
    return HolonomyRep(pres, Cocycle(tuple(trans)))
