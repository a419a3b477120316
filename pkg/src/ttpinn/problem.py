"""Benchmark problem and loss assembly.

The benchmark is the steady 2-D Helmholtz equation on the unit square,
(Lap + k^2) u = g with u = 0 on the boundary and wave number k = 4*pi. With
the source g(x, y) = -k^2 sin(kx) sin(ky), the exact solution is
u*(x, y) = sin(kx) sin(ky): substituting u* gives (Lap + k^2) u* = -k^2 u*.

The Dirichlet condition is enforced exactly by masking the network with
x(x-1) y(y-1), so the training loss needs no boundary or initial terms for
this problem; both are still assembled generically (mean-square data misfits)
and simply contribute zero when their point counts are zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tape as T
from .network import (
    Mlp,
    apply_hard_bc,
    boundary_mask_stack,
    boundary_mask_values,
    forward,
    forward_jets,
    mlp_values,
)


@dataclass(frozen=True)
class HelmholtzProblem:
    """(Lap + k^2) u = g on [0,1]^2 with homogeneous Dirichlet boundary."""

    wave_number: float = 4.0 * math.pi

    @property
    def k2(self) -> float:
        return self.wave_number**2

    def exact(self, x, y):
        k = self.wave_number
        return np.sin(k * x) * np.sin(k * y)

    def source(self, x, y):
        # Sign chosen so `exact` really solves the PDE.
        return -self.k2 * self.exact(x, y)


@dataclass(frozen=True)
class SamplingConfig:
    n_residual: int = 1200
    n_boundary: int = 0
    n_initial: int = 0
    seed: int = 0
    policy: str = "fixed"  # one placement per run

    def __post_init__(self):
        if self.n_residual < 1:
            raise ValueError("need at least one residual point")
        if self.policy != "fixed":
            raise ValueError(f"unsupported resampling policy {self.policy!r}")


@dataclass
class Samples:
    residual_points: np.ndarray  # (N_r, 2), strictly interior
    boundary_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    boundary_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    initial_points: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    initial_values: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass(frozen=True)
class LossTerms:
    total: float
    residual: float
    boundary: float
    initial: float


@dataclass(frozen=True)
class Metrics:
    mse: float
    rel_l2: float


def sample_collocation(config: SamplingConfig) -> np.ndarray:
    """N_r i.i.d. uniform points strictly inside (0,1)^2, fixed by the seed."""
    rng = np.random.default_rng([config.seed, 0xC011])
    pts = rng.uniform(0.0, 1.0, size=(config.n_residual, 2))
    while True:  # uniform() can return 0.0 exactly; the interior is open
        bad = np.nonzero((pts <= 0.0).any(axis=1) | (pts >= 1.0).any(axis=1))[0]
        if bad.size == 0:
            return pts
        pts[bad] = rng.uniform(0.0, 1.0, size=(bad.size, 2))


def predict_u(net: Mlp, points: np.ndarray) -> np.ndarray:
    """Masked prediction u_theta at a batch of points: (B, 2) -> (B,)."""
    f = mlp_values(net, points)[:, 0]
    return boundary_mask_values(points) * f


def residual(problem: HelmholtzProblem, net: Mlp, point) -> float:
    """PDE residual u_xx + u_yy + k^2 u - g at one interior point."""
    x, y = float(point[0]), float(point[1])
    u = apply_hard_bc(forward(net, point), x, y)
    return u.dxx + u.dyy + problem.k2 * u.v - float(problem.source(x, y))


def residual_batch(problem: HelmholtzProblem, net: Mlp, points: np.ndarray) -> np.ndarray:
    stack = forward_jets(net, points)
    u = T.jet_mul_const_fwd(stack, boundary_mask_stack(points))
    g = problem.source(points[:, 0], points[:, 1])
    return T.helmholtz_residual_fwd(u, problem.k2, g)


def loss(problem: HelmholtzProblem, net: Mlp, samples: Samples) -> LossTerms:
    """Composite PINN loss: mean-square residual plus mean-square boundary and
    initial misfits (terms with zero points contribute zero)."""
    r = residual_batch(problem, net, samples.residual_points)
    l_r = float(np.mean(r * r))
    l_b = _misfit(net, samples.boundary_points, samples.boundary_values)
    l_0 = _misfit(net, samples.initial_points, samples.initial_values)
    return LossTerms(l_r + l_b + l_0, l_r, l_b, l_0)


def _misfit(net: Mlp, points: np.ndarray, targets: np.ndarray) -> float:
    if len(points) == 0:
        return 0.0
    diff = predict_u(net, points) - targets
    return float(np.mean(diff * diff))


def loss_node(problem: HelmholtzProblem, net: Mlp, samples: Samples, tp: T.Tape):
    """Record the full loss on a tape; returns (total, l_r, l_b, l_0) node ids."""
    out = forward_jets(net, samples.residual_points, tp)
    u = tp.record("jet_mul_const", (out,), aux=boundary_mask_stack(samples.residual_points))
    pts = samples.residual_points
    g = problem.source(pts[:, 0], pts[:, 1])
    r = tp.record("helmholtz_residual", (u,), aux=(problem.k2, g))
    l_r = tp.mean_sq(r)
    total = l_r
    l_b = l_0 = None
    if len(samples.boundary_points) > 0:
        l_b = _misfit_node(net, samples.boundary_points, samples.boundary_values, tp)
        total = tp.add(total, l_b)
    if len(samples.initial_points) > 0:
        l_0 = _misfit_node(net, samples.initial_points, samples.initial_values, tp)
        total = tp.add(total, l_0)
    return total, l_r, l_b, l_0


def _misfit_node(net: Mlp, points: np.ndarray, targets: np.ndarray, tp: T.Tape):
    out = forward_jets(net, points, tp)
    u = tp.record("jet_mul_const", (out,), aux=boundary_mask_stack(points))
    vals = tp.record("jet_channel", (u,), aux=T.V)
    diff = tp.sub(vals, tp.const(targets[:, None]))
    return tp.mean_sq(diff)


def evaluation_grid(resolution: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Uniform (res x res) grid over [0,1]^2, boundary included."""
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    axis = np.linspace(0.0, 1.0, resolution)
    gx, gy = np.meshgrid(axis, axis, indexing="ij")
    points = np.column_stack([gx.ravel(), gy.ravel()])
    return points, gx, gy


def metrics_from_fields(pred: np.ndarray, truth: np.ndarray) -> Metrics:
    diff = pred - truth
    mse = float(np.mean(diff * diff))
    denom = float(np.linalg.norm(truth.ravel()))
    rel = float(np.linalg.norm(diff.ravel()) / denom) if denom > 0 else float("inf")
    return Metrics(mse=mse, rel_l2=rel)


def evaluate(problem: HelmholtzProblem, net: Mlp, resolution: int = 256):
    """Grid metrics plus the prediction / truth / absolute-error fields."""
    points, gx, gy = evaluation_grid(resolution)
    pred = predict_u(net, points).reshape(resolution, resolution)
    truth = problem.exact(gx, gy)
    fields = {"pred": pred, "truth": truth, "abserr": np.abs(pred - truth)}
    return metrics_from_fields(pred, truth), fields
