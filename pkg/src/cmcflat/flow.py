"""Zero-shift CMC Einstein flow in block-reduced form.

The evolved geometry is a product of homogeneous blocks (one hyperbolic
factor, optionally flat factors); fields may additionally vary along one flat
circle factor sampled on a uniform periodic grid, which is the smallest
setting where the lapse equation is a genuine two-point boundary problem.

Evolution system (CMC time t = tr K = τ, zero shift):

    ∂ₜ g_ab = -2 N K_ab
    ∂ₜ K_ab = -∇_a∇_b N - N K_ac K^c_b
    -ΔN + |K|² N = 1            (elliptic lapse; algebraic when homogeneous)

Solving the lapse equation makes ∂ₜ(tr K) = 1 pointwise, so the trace of K
stays glued to the time parameter; the residual drift measures integrator
error and a step whose drift exceeds DRIFT_TOL is retried at half step.

Per metric block the state is the pair (A, P): metric scale and covariant
second-fundamental-form eigenvalue, with mixed eigenvalue p = P/A.  The
monitored quantity is the rescaled volume Ham(τ) = |τ|ⁿ Vol(g), which is
non-increasing toward τ → 0⁻ with derivative -n |τ|^{n-1} ∫ N |K̂|² dμ
(K̂ the trace-free part of K).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from .models import SliceData

#: τ-drift above this triggers a retried step at dτ/2
DRIFT_TOL = 1e-9
#: |K|² at or below this makes the lapse equation degenerate
DEGENERATE_K2 = 1e-12
#: relative Ham increase above this is flagged by the monotonicity check
HAM_INCREASE_REL_TOL = 1e-10

TRACE_COLUMNS = (
    "tau",
    "volume",
    "ham",
    "n_khat2_integral",
    "gauss_residual",
    "codazzi_residual",
    "lapse_min",
    "lapse_max",
)


class DegenerateLapseError(RuntimeError):
    """Raised when -Δ + |K|² is not invertible (|K|² vanishes identically)."""


@dataclass(frozen=True)
class BlockGeometry:
    """Static structure of the spatial manifold: block dims, curvatures, grid.

    ``volume_factor`` is the volume of the unit-scale cross section; in grid
    mode it excludes the circle direction (the grid quadrature supplies it)
    while in homogeneous mode it includes every constant factor.
    """

    dims: tuple
    curvatures: tuple
    volume_factor: float
    grid_points: int | None = None
    circle_length: float | None = None
    grid_block: int | None = None

    def __post_init__(self):
        if len(self.dims) != len(self.curvatures):
            raise ValueError("dims and curvatures must align")
        for d, c in zip(self.dims, self.curvatures):
            if c not in ("hyperbolic", "flat"):
                raise ValueError(f"unknown curvature type {c!r}")
            if c == "hyperbolic" and d < 2:
                raise ValueError("hyperbolic blocks need dimension >= 2")
            if d < 1:
                raise ValueError("block dimensions must be positive")
        if not 2 <= self.dim <= 4:
            raise ValueError("total spatial dimension must satisfy 2 <= n <= 4")
        if self.volume_factor <= 0:
            raise ValueError("volume_factor must be positive")
        if self.grid_points is not None:
            if self.grid_points < 8:
                raise ValueError("periodic grid needs at least 8 points")
            if self.circle_length is None or self.circle_length <= 0:
                raise ValueError("grid mode needs a positive circle_length")
            gb = self.grid_block
            if gb is None or not (0 <= gb < len(self.dims)):
                raise ValueError("grid mode needs a valid grid_block index")
            if self.curvatures[gb] != "flat" or self.dims[gb] != 1:
                raise ValueError("the grid block must be a flat one-dimensional factor")

    @property
    def dim(self) -> int:
        return int(sum(self.dims))

    @property
    def spacing(self) -> float:
        return self.circle_length / self.grid_points


@dataclass(frozen=True, eq=False)
class FlowState:
    """Flow variables at one CMC time: metric scales A and covariant K values P.

    Arrays have shape (n_blocks,) in homogeneous mode and (n_blocks, m) in
    grid mode.  ``tau`` is the CMC time parameter; tr K of the fields tracks
    it up to integrator drift.
    """

    geometry: BlockGeometry
    tau: float
    scales: np.ndarray
    kcov: np.ndarray

    def mixed_k(self) -> np.ndarray:
        return self.kcov / self.scales

    def trace_k(self):
        p = self.mixed_k()
        return np.einsum("b,b...->...", np.asarray(self.geometry.dims, float), p)

    def k_norm2(self):
        p = self.mixed_k()
        return np.einsum("b,b...->...", np.asarray(self.geometry.dims, float), p * p)

    def khat_norm2(self):
        """Squared norm of the trace-free part of K (pointwise)."""
        p = self.mixed_k()
        dims = np.asarray(self.geometry.dims, float)
        dev = p - self.trace_k() / self.geometry.dim
        return np.einsum("b,b...->...", dims, dev * dev)


def state_from_slice(slc: SliceData) -> FlowState:
    """Homogeneous flow state from block-reduced slice data."""
    geom = BlockGeometry(
        tuple(b.dim for b in slc.blocks),
        tuple(b.curvature for b in slc.blocks),
        slc.volume_factor,
    )
    scales = np.array([b.metric_scale for b in slc.blocks])
    kcov = np.array([b.k_eigenvalue * b.metric_scale for b in slc.blocks])
    return FlowState(geom, slc.tau, scales, kcov)


def grid_state_from_slice(slc: SliceData, grid_points: int, circle_length: float) -> FlowState:
    """Grid-mode flow state: slice fields replicated along the circle factor.

    The slice must contain a flat one-dimensional block to carry the grid;
    ``volume_factor`` is reduced by the circle length, which the grid
    quadrature now supplies.
    """
    flat_blocks = [
        i for i, b in enumerate(slc.blocks) if b.curvature == "flat" and b.dim == 1
    ]
    if not flat_blocks:
        raise ValueError("grid mode needs a flat one-dimensional block in the slice")
    gb = flat_blocks[0]
    geom = BlockGeometry(
        tuple(b.dim for b in slc.blocks),
        tuple(b.curvature for b in slc.blocks),
        slc.volume_factor / circle_length,
        grid_points=grid_points,
        circle_length=circle_length,
        grid_block=gb,
    )
    ones = np.ones(grid_points)
    scales = np.stack([b.metric_scale * ones for b in slc.blocks])
    kcov = np.stack([b.k_eigenvalue * b.metric_scale * ones for b in slc.blocks])
    return FlowState(geom, slc.tau, scales, kcov)


# ---------------------------------------------------------------------------
# periodic finite differences and the lapse solve
# ---------------------------------------------------------------------------


def _ddr(f: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis=-1) - np.roll(f, 1, axis=-1)) / (2.0 * h)


def _d2dr(f: np.ndarray, h: float) -> np.ndarray:
    return (np.roll(f, -1, axis=-1) - 2.0 * f + np.roll(f, 1, axis=-1)) / (h * h)


def _solve_periodic_tridiag(lower, main, upper, rhs):
    """Solve a periodic tridiagonal system by rank-one correction.

    ``lower[j]`` couples row j to j-1, ``upper[j]`` to j+1 (indices mod m);
    the two corner entries are folded into a Sherman-Morrison update of a
    plain banded solve.
    """
    m = main.size
    corner_ul = lower[0]  # entry (0, m-1)
    corner_lr = upper[-1]  # entry (m-1, 0)
    gamma = -main[0]
    main_adj = main.copy()
    main_adj[0] -= gamma
    main_adj[-1] -= corner_ul * corner_lr / gamma
    ab = np.zeros((3, m))
    ab[0, 1:] = upper[:-1]
    ab[1, :] = main_adj
    ab[2, :-1] = lower[1:]
    u = np.zeros(m)
    u[0] = gamma
    u[-1] = corner_lr
    v = np.zeros(m)
    v[0] = 1.0
    v[-1] = corner_ul / gamma
    y = solve_banded((1, 1), ab, rhs)
    q = solve_banded((1, 1), ab, u)
    return y - q * (np.dot(v, y) / (1.0 + np.dot(v, q)))


def _laplacian_coefficients(geom: BlockGeometry, scales: np.ndarray):
    """Coefficients (c2, c1) with ΔN = c2 N'' + c1 N' on the periodic grid."""
    h = geom.spacing
    gb = geom.grid_block
    c = scales[gb]
    c1 = -_ddr(c, h) / (2.0 * c)
    for i, d in enumerate(geom.dims):
        if i == gb:
            continue
        c1 = c1 + d * _ddr(scales[i], h) / (2.0 * scales[i])
    return 1.0 / c, c1 / c


def _lapse_from_fields(geom: BlockGeometry, scales: np.ndarray, kcov: np.ndarray):
    p = kcov / scales
    dims = np.asarray(geom.dims, float)
    k2 = np.einsum("b,b...->...", dims, p * p)
    if geom.grid_points is None:
        k2 = float(k2)
        if k2 <= DEGENERATE_K2:
            raise DegenerateLapseError("homogeneous lapse needs |K|^2 > 0")
        return 1.0 / k2
    if float(np.max(k2)) <= DEGENERATE_K2:
        raise DegenerateLapseError("lapse operator -Δ + |K|^2 is singular: |K|^2 vanishes")
    h = geom.spacing
    c2, c1 = _laplacian_coefficients(geom, scales)
    main = 2.0 * c2 / (h * h) + k2
    upper = -c2 / (h * h) - c1 / (2.0 * h)
    lower = -c2 / (h * h) + c1 / (2.0 * h)
    lapse = _solve_periodic_tridiag(lower, main, upper, np.ones_like(k2))
    if float(np.min(lapse)) <= 0.0:
        raise DegenerateLapseError("lapse solve produced a non-positive lapse")
    return lapse


def solve_lapse(state: FlowState):
    """Solve -ΔN + |K|² N = 1 for the current state.

    Homogeneous mode is algebraic (N = 1/|K|²); grid mode solves the periodic
    two-point problem with second-order central differences via a banded
    solver plus rank-one periodic correction.
    """
    return _lapse_from_fields(state.geometry, state.scales, state.kcov)


def lapse_residual(state: FlowState, lapse) -> float:
    """max |-ΔN + |K|²N - 1| for a given lapse field (grid mode)."""
    geom = state.geometry
    k2 = state.k_norm2()
    if geom.grid_points is None:
        return float(abs(k2 * lapse - 1.0))
    h = geom.spacing
    c2, c1 = _laplacian_coefficients(geom, state.scales)
    lap = c2 * _d2dr(lapse, h) + c1 * _ddr(lapse, h)
    return float(np.max(np.abs(-lap + k2 * lapse - 1.0)))


# ---------------------------------------------------------------------------
# curvature and constraint residuals
# ---------------------------------------------------------------------------


def ricci_blocks(geom: BlockGeometry, scales: np.ndarray) -> np.ndarray:
    """Mixed Ricci eigenvalue per block (same shape as ``scales``).

    Homogeneous: -(d-1)/A on hyperbolic blocks, zero on flat ones.  With
    fields varying along the circle the blocks couple through the standard
    multiply-warped-product curvature, written below in terms of the proper
    circle coordinate (d/dr̃ = C^{-1/2} d/dr).
    """
    dims = np.asarray(geom.dims, float)
    curv = np.array([1.0 if c == "hyperbolic" else 0.0 for c in geom.curvatures])
    base = -curv * np.maximum(dims - 1.0, 0.0)
    if geom.grid_points is None:
        return base / scales
    h = geom.spacing
    gb = geom.grid_block
    sqrt_c = np.sqrt(scales[gb])
    out = np.zeros_like(scales)
    fs, fdot, fddot = {}, {}, {}
    for i in range(len(geom.dims)):
        if i == gb:
            continue
        f = np.sqrt(scales[i])
        fd = _ddr(f, h) / sqrt_c
        fs[i], fdot[i], fddot[i] = f, fd, _ddr(fd, h) / sqrt_c
    mix_sum = sum(dims[i] * fdot[i] / fs[i] for i in fs) if fs else 0.0
    for i in fs:
        ratio = fdot[i] / fs[i]
        out[i] = (
            (base[i] - (dims[i] - 1.0) * fdot[i] ** 2) / scales[i]
            - fddot[i] / fs[i]
            - ratio * (mix_sum - dims[i] * ratio)
        )
    out[gb] = -sum(dims[i] * fddot[i] / fs[i] for i in fs)
    return out


def block_gauss_residuals(state: FlowState) -> np.ndarray:
    """Per-block residual of the flat Gauss equation R - K² + (trK)K = 0 (mixed)."""
    p = state.mixed_k()
    trk = state.trace_k()
    ricci = ricci_blocks(state.geometry, state.scales)
    return ricci - p * p + trk * p


def block_codazzi_residuals(state: FlowState) -> np.ndarray:
    """Per-block Codazzi residual p' + (A'/2A)(p - q) along the circle direction.

    Identically zero in homogeneous mode; q is the mixed eigenvalue on the
    grid block.
    """
    p = state.mixed_k()
    if state.geometry.grid_points is None:
        return np.zeros_like(p)
    geom = state.geometry
    h = geom.spacing
    gb = geom.grid_block
    out = np.zeros_like(p)
    q = p[gb]
    for i in range(len(geom.dims)):
        if i == gb:
            continue
        out[i] = _ddr(p[i], h) + _ddr(state.scales[i], h) / (2.0 * state.scales[i]) * (
            p[i] - q
        )
    return out


def flat_constraint_residual(state: FlowState):
    """(max Gauss residual, max Codazzi residual) for flat vacuum data."""
    gauss = float(np.max(np.abs(block_gauss_residuals(state))))
    codazzi = float(np.max(np.abs(block_codazzi_residuals(state))))
    return gauss, codazzi


def vacuum_constraint_residual(state: FlowState):
    """(scalar, momentum) constraint residuals: the traces of Gauss and Codazzi.

    scalar   = R - |K|² + (trK)²   = Σ d_i · gauss_i
    momentum = Σ d_i · codazzi_i   (circle component; others vanish)
    """
    dims = np.asarray(state.geometry.dims, float)
    scalar = np.einsum("b,b...->...", dims, block_gauss_residuals(state))
    momentum = np.einsum("b,b...->...", dims, block_codazzi_residuals(state))
    return float(np.max(np.abs(scalar))), float(np.max(np.abs(momentum)))


# ---------------------------------------------------------------------------
# volume and integrals
# ---------------------------------------------------------------------------


def _volume_density(geom: BlockGeometry, scales: np.ndarray):
    dens = 1.0
    for i, d in enumerate(geom.dims):
        dens = dens * scales[i] ** (d / 2.0)
    return dens


def volume_of(geom: BlockGeometry, scales: np.ndarray) -> float:
    dens = _volume_density(geom, scales)
    if geom.grid_points is None:
        return geom.volume_factor * float(dens)
    return geom.volume_factor * geom.spacing * float(np.sum(dens))


def integrate_scalar(geom: BlockGeometry, scales: np.ndarray, values) -> float:
    """∫ f dμ_g for a pointwise scalar field (constant allowed)."""
    dens = _volume_density(geom, scales)
    if geom.grid_points is None:
        return geom.volume_factor * float(dens * values)
    return geom.volume_factor * geom.spacing * float(np.sum(dens * values))


# ---------------------------------------------------------------------------
# the flow proper
# ---------------------------------------------------------------------------


def _rhs(geom: BlockGeometry, scales: np.ndarray, kcov: np.ndarray):
    lapse = _lapse_from_fields(geom, scales, kcov)
    d_scales = -2.0 * lapse * kcov
    d_kcov = -lapse * kcov * kcov / scales
    if geom.grid_points is not None:
        h = geom.spacing
        gb = geom.grid_block
        dn = _ddr(lapse, h)
        c = scales[gb]
        hess = np.zeros_like(scales)
        for i in range(len(geom.dims)):
            if i == gb:
                continue
            hess[i] = _ddr(scales[i], h) / (2.0 * c) * dn
        hess[gb] = _d2dr(lapse, h) - _ddr(c, h) / (2.0 * c) * dn
        d_kcov = d_kcov - hess
    return d_scales, d_kcov


def flow_step(state: FlowState, dtau: float, drift_tol: float = DRIFT_TOL, _depth: int = 8) -> FlowState:
    """One classical RK4 step in CMC time, with drift-triggered halving.

    The lapse equation is solved at every stage.  After the step the trace of
    K is compared with the target time; if the step *added* more than
    ``drift_tol`` of drift it is retried as two half steps (up to 8 nested
    halvings).  No projection is applied — drift stays an honest error meter.
    """
    if dtau == 0.0:
        return state
    geom = state.geometry
    a0, p0 = state.scales, state.kcov
    da1, dp1 = _rhs(geom, a0, p0)
    da2, dp2 = _rhs(geom, a0 + 0.5 * dtau * da1, p0 + 0.5 * dtau * dp1)
    da3, dp3 = _rhs(geom, a0 + 0.5 * dtau * da2, p0 + 0.5 * dtau * dp2)
    da4, dp4 = _rhs(geom, a0 + dtau * da3, p0 + dtau * dp3)
    a1 = a0 + (dtau / 6.0) * (da1 + 2.0 * da2 + 2.0 * da3 + da4)
    p1 = p0 + (dtau / 6.0) * (dp1 + 2.0 * dp2 + 2.0 * dp3 + dp4)
    if np.any(a1 <= 0.0):
        raise RuntimeError("metric block scale became non-positive during a step")
    new = FlowState(geom, state.tau + dtau, a1, p1)
    drift_before = float(np.max(np.abs(state.trace_k() - state.tau)))
    drift_after = float(np.max(np.abs(new.trace_k() - new.tau)))
    if drift_after - drift_before > drift_tol:
        if _depth <= 0:
            raise RuntimeError(
                f"CMC drift increment {drift_after - drift_before:.3e} "
                "persists at minimal step size"
            )
        half = flow_step(state, 0.5 * dtau, drift_tol, _depth - 1)
        return flow_step(half, 0.5 * dtau, drift_tol, _depth - 1)
    return new


@dataclass
class HamTrace:
    """Record of a flow run: one row per τ grid point (columns TRACE_COLUMNS)."""

    ndim: int
    data: np.ndarray
    max_k2_over_tau2: float = 0.0
    max_ricci_over_tau4: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return self.data[:, TRACE_COLUMNS.index(name)]

    def __len__(self) -> int:
        return self.data.shape[0]


def _record(state: FlowState) -> tuple:
    lapse = solve_lapse(state)
    vol = volume_of(state.geometry, state.scales)
    ham = abs(state.tau) ** state.geometry.dim * vol
    nk2 = integrate_scalar(state.geometry, state.scales, lapse * state.khat_norm2())
    gauss, codazzi = flat_constraint_residual(state)
    n_min = float(np.min(lapse))
    n_max = float(np.max(lapse))
    return (state.tau, vol, ham, nk2, gauss, codazzi, n_min, n_max), lapse


def tau_grid(tau_start: float, tau_end: float, steps: int, spacing: str = "log") -> np.ndarray:
    """CMC time grid between two negative times.

    ``log`` spacing is uniform in log|τ| (steps shrink toward τ → 0⁻, where
    the solution varies fastest); ``uniform`` is equally spaced.
    """
    if tau_start >= 0 or tau_end >= 0:
        raise ValueError("CMC times must be negative")
    if steps < 0:
        raise ValueError("steps must be nonnegative")
    if steps == 0 or tau_start == tau_end:
        return np.array([tau_start])
    if spacing == "log":
        return -np.geomspace(-tau_start, -tau_end, steps + 1)
    if spacing == "uniform":
        return np.linspace(tau_start, tau_end, steps + 1)
    raise ValueError(f"unknown spacing {spacing!r}")


def run_flow(initial: FlowState, tau_end: float, steps: int, spacing: str = "log",
             drift_tol: float = DRIFT_TOL) -> HamTrace:
    """Integrate the CMC flow and record the Ham diagnostics at every grid time.

    drift_tol is forwarded to flow_step; pass numpy.inf to disable the
    per-step re-stepping (useful when measuring the raw integrator order).
    """
    grid = tau_grid(initial.tau, tau_end, steps, spacing)
    state = initial
    rows = []
    max_k2 = 0.0
    max_ric = 0.0
    for i, tau in enumerate(grid):
        row, _ = _record(state)
        rows.append(row)
        k2 = float(np.max(state.k_norm2()))
        max_k2 = max(max_k2, k2 / state.tau**2)
        ric = float(np.max(np.abs(ricci_blocks(state.geometry, state.scales))))
        max_ric = max(max_ric, ric / state.tau**4)
        if i + 1 < len(grid):
            state = flow_step(state, float(grid[i + 1] - grid[i]), drift_tol=drift_tol)
    return HamTrace(initial.geometry.dim, np.array(rows), max_k2, max_ric)


# ---------------------------------------------------------------------------
# trace diagnostics
# ---------------------------------------------------------------------------


@dataclass
class MonotonicityReport:
    ok: bool
    n_increases: int
    max_identity_mismatch: float
    first_increase_index: int = -1


def ham_monotonicity_check(trace: HamTrace, identity_tol: float = 1e-4) -> MonotonicityReport:
    """Check Ham is non-increasing and satisfies its derivative identity.

    Any relative increase beyond HAM_INCREASE_REL_TOL between consecutive
    records is flagged.  At interior records the three-point (nonuniform)
    central difference of Ham is compared with -n |τ|^{n-1} ∫ N|K̂|² dμ using
    a mixed absolute/relative tolerance.
    """
    tau = trace.column("tau")
    ham = trace.column("ham")
    nk2 = trace.column("n_khat2_integral")
    n = trace.ndim
    increases = np.nonzero(np.diff(ham) > HAM_INCREASE_REL_TOL * np.abs(ham[:-1]))[0]
    max_mismatch = 0.0
    for i in range(1, len(tau) - 1):
        h1 = tau[i] - tau[i - 1]
        h2 = tau[i + 1] - tau[i]
        deriv = (
            -h2 / (h1 * (h1 + h2)) * ham[i - 1]
            + (h2 - h1) / (h1 * h2) * ham[i]
            + h1 / (h2 * (h1 + h2)) * ham[i + 1]
        )
        rhs = -n * abs(tau[i]) ** (n - 1) * nk2[i]
        mismatch = abs(deriv - rhs) / max(1.0, abs(deriv), abs(rhs))
        max_mismatch = max(max_mismatch, mismatch)
    ok = bool(increases.size == 0 and max_mismatch <= identity_tol)
    first = int(increases[0]) if increases.size else -1
    return MonotonicityReport(ok, int(increases.size), float(max_mismatch), first)


def lapse_identity_check(state: FlowState, lapse=None):
    """Return (∫(1 - Nτ²/n)dμ, ∫N|K̂|²dμ); equal when N solves the lapse equation.

    Passing an explicit lapse field exercises the check on non-solutions.
    """
    if lapse is None:
        lapse = solve_lapse(state)
    geom = state.geometry
    n = geom.dim
    lhs = integrate_scalar(geom, state.scales, 1.0 - lapse * state.tau**2 / n)
    rhs = integrate_scalar(geom, state.scales, lapse * state.khat_norm2())
    return lhs, rhs
