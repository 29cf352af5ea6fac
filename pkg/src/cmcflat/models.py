"""Model flat spacetimes and their CMC slice data in block-reduced form.

Two families are covered, both written as cones/products over closed
hyperbolic manifolds:

* the Lorentz cone  -dρ² + ρ² g₀  over a hyperbolic n-manifold: the slice
  ρ = s has mean curvature trace τ = -n/s and every rescaled volume
  |τ|ⁿ Vol equals nⁿ · base_volume exactly;
* the Kasner-like product  -dρ² + ρ² h + dz²  over a hyperbolic
  (n-1)-manifold times a circle: the slice ρ = const has τ = -(n-1)/ρ and
  rescaled volume (n-1)^{n-1} |τ| · Vol(Σ) · circle_length, which decreases
  to zero in the expanding direction τ ↗ 0.

Slice data is stored per metric block as (dimension, curvature type, metric
scale a², mixed second-fundamental-form eigenvalue p); this is the exact
format consumed by the flow integrator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Block:
    """One homogeneous factor of a product slice metric.

    ``metric_scale`` multiplies the unit block metric (curvature -1 hyperbolic
    metric, or flat unit metric); ``k_eigenvalue`` is the mixed (trace-type)
    eigenvalue of the second fundamental form on this block.
    """

    dim: int
    curvature: str  # "hyperbolic" | "flat"
    metric_scale: float
    k_eigenvalue: float


@dataclass(frozen=True)
class SliceData:
    """CMC slice of a model spacetime in block-reduced form."""

    blocks: tuple
    tau: float
    volume_factor: float  # unit-scale volume of the cross-section (with circle length)

    @property
    def dim(self) -> int:
        return sum(b.dim for b in self.blocks)

    @property
    def volume(self) -> float:
        scale = 1.0
        for b in self.blocks:
            scale *= b.metric_scale ** (b.dim / 2.0)
        return self.volume_factor * scale

    @property
    def rescaled_volume(self) -> float:
        """|τ|ⁿ Vol of the slice."""
        return abs(self.tau) ** self.dim * self.volume


def _check_dim(n: int) -> None:
    if not 2 <= n <= 4:
        raise ValueError(f"spatial dimension must satisfy 2 <= n <= 4, got {n}")


@dataclass(frozen=True)
class ConeModel:
    """Lorentz cone over a closed hyperbolic n-manifold of given volume."""

    dim: int
    base_volume: float = 1.0

    def __post_init__(self):
        _check_dim(self.dim)
        if self.base_volume <= 0:
            raise ValueError("base_volume must be positive")


@dataclass(frozen=True)
class KasnerModel:
    """Product of a hyperbolic cone over Σ^{n-1} with a flat circle."""

    dim: int
    sigma_volume: float = 1.0
    circle_length: float = 1.0

    def __post_init__(self):
        _check_dim(self.dim)
        if self.dim < 3:
            raise ValueError("the product model needs a hyperbolic factor of dimension >= 2")
        if self.sigma_volume <= 0 or self.circle_length <= 0:
            raise ValueError("sigma_volume and circle_length must be positive")


def cone_slice(model: ConeModel, s: float) -> SliceData:
    """Slice ρ = s of the cone: metric s² g₀, K eigenvalue -1/s, τ = -n/s."""
    if s <= 0:
        raise ValueError("slice parameter s must be positive")
    n = model.dim
    block = Block(n, "hyperbolic", s * s, -1.0 / s)
    return SliceData((block,), -n / s, model.base_volume)


def kasner_slice(model: KasnerModel, rho: float) -> SliceData:
    """Slice ρ = const of the product model: τ = -(n-1)/ρ, flat factor static."""
    if rho <= 0:
        raise ValueError("slice parameter rho must be positive")
    n = model.dim
    hyp = Block(n - 1, "hyperbolic", rho * rho, -1.0 / rho)
    flat = Block(1, "flat", 1.0, 0.0)
    return SliceData((hyp, flat), -(n - 1) / rho, model.sigma_volume * model.circle_length)


def slice_at_tau(model, tau: float) -> SliceData:
    """Slice of either model at prescribed CMC time τ < 0."""
    if tau >= 0:
        raise ValueError("CMC time must be negative (expanding direction is tau -> 0-)")
    if isinstance(model, ConeModel):
        return cone_slice(model, model.dim / (-tau))
    if isinstance(model, KasnerModel):
        return kasner_slice(model, (model.dim - 1) / (-tau))
    raise TypeError(f"unsupported model {type(model).__name__}")


def ham_closed_form(model, tau: float) -> float:
    """Closed form of the rescaled volume |τ|ⁿ Vol(slice at τ).

    Cone: nⁿ · base_volume, independent of τ.  Product model:
    (n-1)^{n-1} |τ| · sigma_volume · circle_length.
    """
    if tau >= 0:
        raise ValueError("CMC time must be negative")
    n = model.dim
    if isinstance(model, ConeModel):
        return float(n**n) * model.base_volume
    if isinstance(model, KasnerModel):
        return float((n - 1) ** (n - 1)) * abs(tau) * model.sigma_volume * model.circle_length
    raise TypeError(f"unsupported model {type(model).__name__}")


# ---------------------------------------------------------------------------
# Riccati propagation of shape operators along normal geodesics
# ---------------------------------------------------------------------------


def riccati_propagate(k0, t: float) -> np.ndarray:
    """Propagate a symmetric shape operator by ∂ₜK = K².

    Closed form K(t) = (K(0)⁻¹ - t·Id)⁻¹ evaluated through the
    eigendecomposition κ ↦ κ/(1 - tκ), which also covers singular K(0)
    (zero eigenvalues stay zero).  Valid strictly before the first focal
    time; crossing one raises ValueError.
    """
    k0 = np.asarray(k0, dtype=float)
    vals, vecs = np.linalg.eigh(0.5 * (k0 + k0.T))
    denom = 1.0 - t * vals
    if np.any(denom <= 0.0):
        raise ValueError("propagation time reaches or crosses a focal time")
    return (vecs * (vals / denom)) @ vecs.T


def focal_times(k0) -> np.ndarray:
    """Focal times 1/κ for the nonzero eigenvalues κ of the shape operator."""
    k0 = np.asarray(k0, dtype=float)
    vals = np.linalg.eigvalsh(0.5 * (k0 + k0.T))
    cutoff = 1e-14 * max(1.0, float(np.max(np.abs(vals))) if vals.size else 1.0)
    nonzero = vals[np.abs(vals) > cutoff]
    return np.sort(1.0 / nonzero)


def riccati_integrate(k0, t: float, steps: int = 2000) -> np.ndarray:
    """Integrate ∂ₜK = K² numerically with fixed-step RK4.

    Direct ODE solution of the same initial value problem that
    riccati_propagate answers in closed form; the two should agree to
    O(steps⁻⁴) away from focal times.
    """
    k = np.array(np.asarray(k0, dtype=float))
    if steps < 1:
        raise ValueError("steps must be positive")
    h = t / steps
    for _ in range(steps):
        f1 = k @ k
        k2 = k + 0.5 * h * f1
        f2 = k2 @ k2
        k3 = k + 0.5 * h * f2
        f3 = k3 @ k3
        k4 = k + h * f3
        f4 = k4 @ k4
        k = k + (h / 6.0) * (f1 + 2.0 * f2 + 2.0 * f3 + f4)
    return k
