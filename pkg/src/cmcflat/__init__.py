"""Numerical laboratory for constant-mean-curvature analysis of flat spacetimes.

The package builds flat model spacetimes (Lorentz cones over hyperbolic
manifolds, and their Kasner-like siblings with a flat circle factor),
integrates the zero-shift CMC Einstein flow for them, solves the conformal
constraint equation, and studies spacelike graph surfaces in Minkowski space
up to the action of a genus-2 holonomy group.

Dimension conventions: spatial dimension ``n`` is a runtime parameter with
2 <= n <= 4; ambient Minkowski space has n+1 coordinates with signature
(-, +, ..., +) and index 0 reserved for time.
"""

__version__ = "0.1.0"
