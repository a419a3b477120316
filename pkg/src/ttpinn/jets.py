"""Second-order bivariate jets.

A Jet2 bundles a value with its first and pure second partial derivatives
w.r.t. the two spatial inputs: (v, dx, dy, dxx, dyy). Seeding the inputs and
propagating jets through the network yields u, u_x, u_y, u_xx, u_yy in a
single forward pass, which is all a Laplacian-based residual needs. Mixed
partials are not tracked.

Components may be python floats or numpy arrays of a common shape; all rules
are elementwise, so the same algebra drives scalar probes and batched sweeps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Jet2:
    v: float
    dx: float
    dy: float
    dxx: float
    dyy: float

    def as_tuple(self):
        return (self.v, self.dx, self.dy, self.dxx, self.dyy)


def jet_x(x0) -> Jet2:
    """Seed jet for the first spatial variable at x0."""
    z = np.zeros_like(np.asarray(x0, dtype=np.float64))
    if z.ndim == 0:
        return Jet2(float(x0), 1.0, 0.0, 0.0, 0.0)
    return Jet2(np.asarray(x0, dtype=np.float64), z + 1.0, z, z, z)


def jet_y(y0) -> Jet2:
    """Seed jet for the second spatial variable at y0."""
    z = np.zeros_like(np.asarray(y0, dtype=np.float64))
    if z.ndim == 0:
        return Jet2(float(y0), 0.0, 1.0, 0.0, 0.0)
    return Jet2(np.asarray(y0, dtype=np.float64), z, z + 1.0, z, z)


def jet_const(c) -> Jet2:
    z = np.zeros_like(np.asarray(c, dtype=np.float64))
    if z.ndim == 0:
        return Jet2(float(c), 0.0, 0.0, 0.0, 0.0)
    return Jet2(np.asarray(c, dtype=np.float64), z, z, z, z)


def jet_add(a: Jet2, b: Jet2) -> Jet2:
    return Jet2(a.v + b.v, a.dx + b.dx, a.dy + b.dy, a.dxx + b.dxx, a.dyy + b.dyy)


def jet_scale(a: Jet2, c) -> Jet2:
    return Jet2(c * a.v, c * a.dx, c * a.dy, c * a.dxx, c * a.dyy)


def jet_mul(a: Jet2, b: Jet2) -> Jet2:
    """Product rule through second order (per axis)."""
    return Jet2(
        a.v * b.v,
        a.dx * b.v + a.v * b.dx,
        a.dy * b.v + a.v * b.dy,
        a.dxx * b.v + 2.0 * a.dx * b.dx + a.v * b.dxx,
        a.dyy * b.v + 2.0 * a.dy * b.dy + a.v * b.dyy,
    )


def jet_sin(a: Jet2) -> Jet2:
    """Chain rule for sin through second order."""
    s = np.sin(a.v)
    c = np.cos(a.v)
    return Jet2(
        s,
        c * a.dx,
        c * a.dy,
        c * a.dxx - s * a.dx * a.dx,
        c * a.dyy - s * a.dy * a.dy,
    )
