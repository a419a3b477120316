"""Self-contained verification suites behind the `check` CLI command.

Each suite pits an implementation path against an independent oracle:
factorized matvec vs dense reconstruction, taped gradients vs central finite
differences, the PDE residual vs the closed-form solution, and the parameter
accounting vs hand-computed totals. Failures are report content, not
exceptions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .jets import Jet2
from .network import MlpSpec, TTHidden, init
from .problem import (
    HelmholtzProblem,
    Samples,
    SamplingConfig,
    loss,
    loss_node,
    sample_collocation,
)
from .tape import Tape
from .tensor import SizeError
from .ttlinear import dense_matrix, tt_halves_forward, tt_init, tt_matvec


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def check_tt_matvec(n_configs: int = 60, seed: int = 0, layers=None) -> CheckResult:
    """Factorized matvec (stepwise and collapsed paths) vs dense reconstruction."""
    rng = np.random.default_rng(seed)
    if layers is None:
        layers = []
        for _ in range(n_configs):
            d = int(rng.integers(1, 5))
            mf = tuple(int(rng.integers(2, 5)) for _ in range(d))
            nf = tuple(int(rng.integers(2, 5)) for _ in range(d))
            ranks = [1] + [int(rng.integers(1, 9)) for _ in range(2 * d - 1)] + [1]
            layers.append(tt_init(mf, nf, ranks, int(rng.integers(0, 2**32))))
    worst = 0.0
    try:
        for layer in layers:
            layer.validate()
            z = rng.standard_normal(layer.n_dim)
            dense = dense_matrix(layer) @ z
            worst = max(worst, float(np.max(np.abs(tt_matvec(layer, z) - dense))))
            fast = tt_halves_forward(layer, z[None, :])[0][0]
            worst = max(worst, float(np.max(np.abs(fast - dense))))
    except SizeError as exc:
        return CheckResult("tt-matvec-oracle", False, f"shape error: {exc}")
    ok = worst <= 1e-10
    return CheckResult(
        "tt-matvec-oracle",
        ok,
        f"{len(layers)} configurations, max |tt - dense| = {worst:.2e} (limit 1e-10)",
    )


def _fd_gradient_check(net, h: float = 1e-6, tol: float = 1e-5) -> tuple[float, int]:
    problem = HelmholtzProblem()
    pts = sample_collocation(SamplingConfig(n_residual=24, seed=11))
    samples = Samples(residual_points=pts)
    tp = Tape(net.store)
    total, *_ = loss_node(problem, net, samples, tp)
    grads = tp.backward(total)

    def loss_value():
        return loss(problem, net, samples).total

    worst, checked = 0.0, 0
    for name in net.store.names():
        arr = net.store[name]
        for flat in range(arr.size):
            orig = arr.flat[flat]
            arr.flat[flat] = orig + h
            fp = loss_value()
            arr.flat[flat] = orig - h
            fm = loss_value()
            arr.flat[flat] = orig
            fd = (fp - fm) / (2.0 * h)
            ad = grads[name].flat[flat]
            rel = abs(ad - fd) / max(1.0, abs(ad), abs(fd))
            worst = max(worst, rel)
            checked += 1
    return worst, checked


def check_gradients() -> CheckResult:
    """Taped full-loss gradients vs central finite differences, dense and TT."""
    dense = init(MlpSpec(hidden_width=8, hidden_layers=2, hidden_kind="dense"), 3)
    tt = init(
        MlpSpec(
            hidden_width=16,
            hidden_layers=1,
            hidden_kind="tt",
            tt=TTHidden((4, 4), (4, 4), (1, 2, 2, 2, 1)),
        ),
        4,
    )
    w1, n1 = _fd_gradient_check(dense)
    w2, n2 = _fd_gradient_check(tt)
    worst = max(w1, w2)
    return CheckResult(
        "gradient-check",
        worst <= 1e-5,
        f"{n1 + n2} parameters, max rel err vs FD = {worst:.2e} (limit 1e-5)",
    )


class _ExactOracle:
    """Duck-typed net whose masked output reproduces the exact solution.

    Returns f = u* / m as jets so that apply_hard_bc(f) == u*; only usable at
    interior points where the mask m = x(x-1)y(y-1) is nonzero.
    """

    def __init__(self, problem: HelmholtzProblem):
        self.problem = problem

    def jets(self, points: np.ndarray):
        from .network import boundary_mask_jet

        k = self.problem.wave_number
        x, y = points[:, 0], points[:, 1]
        sx, cx = np.sin(k * x), np.cos(k * x)
        sy, cy = np.sin(k * y), np.cos(k * y)
        u = Jet2(sx * sy, k * cx * sy, k * sx * cy, -k * k * sx * sy, -k * k * sx * sy)
        m = boundary_mask_jet(x, y)
        # reciprocal jet of m, then f = u * (1/m)
        inv = 1.0 / m.v
        inv2 = inv * inv
        inv3 = inv2 * inv
        r = Jet2(
            inv,
            -m.dx * inv2,
            -m.dy * inv2,
            2.0 * m.dx * m.dx * inv3 - m.dxx * inv2,
            2.0 * m.dy * m.dy * inv3 - m.dyy * inv2,
        )
        from .jets import jet_mul

        return jet_mul(u, r)


def exact_oracle_stack(problem: HelmholtzProblem, points: np.ndarray) -> np.ndarray:
    """Jet stack (5, B, 1) of the exact-solution oracle f = u*/m."""
    f = _ExactOracle(problem).jets(points)
    return np.stack(f.as_tuple())[:, :, None]


def check_residual_exact(n_points: int = 10_000, seed: int = 1) -> CheckResult:
    """Substituting the closed-form solution must null the residual."""
    from . import tape as T
    from .network import boundary_mask_stack

    problem = HelmholtzProblem()
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0.0, 1.0, size=(n_points, 2))
    pts = np.clip(pts, 1e-3, 1.0 - 1e-3)  # oracle divides by the mask
    stack = exact_oracle_stack(problem, pts)
    u = T.jet_mul_const_fwd(stack, boundary_mask_stack(pts))
    g = problem.source(pts[:, 0], pts[:, 1])
    r = T.helmholtz_residual_fwd(u, problem.k2, g)
    worst = float(np.max(np.abs(r)))
    return CheckResult(
        "residual-exact-solution",
        worst <= 1e-8,
        f"{n_points} interior points, max |residual| = {worst:.2e} (limit 1e-8)",
    )


def build_network_config(width: int, kind: str, target: float | None = None):
    from .train import ExperimentConfig, ModelConfig, build_network

    model = ModelConfig(
        width=width,
        kind=kind,
        row_factors=(4, 4, 4, 4) if kind == "tt" else None,
        col_factors=(4, 4, 4, 4) if kind == "tt" else None,
        target_compression=target,
    )
    return build_network(ExperimentConfig(model=model))


def check_param_counts() -> CheckResult:
    """Hand-computed parameter totals for the benchmark architectures."""
    rows = []
    ok = True
    for width, expect in ((32, 3297), (64, 12737), (128, 50049), (256, 198401)):
        net, _ = build_network_config(width=width, kind="dense")
        got = net.store.total_count
        ok &= got == expect
        rows.append(f"dense {width}: {got} (expect {expect})")
    for target, expect in ((100.0, 3713), (40.0, 6593), (20.0, 12449)):
        net, comp = build_network_config(width=256, kind="tt", target=target)
        got = net.store.total_count
        ok &= got == expect
        rows.append(f"tt 256 @{target:g}x: {got} (expect {expect})")
    from .ttlinear import plan_ranks

    plan = plan_ranks(256, 256, (4, 4, 4, 4), (4, 4, 4, 4), 40.0)
    forty = plan.chosen_ranks == (1, 8, 8, 8, 8, 8, 8, 8, 1) and plan.per_layer_params == 1600
    ok &= forty
    rows.append(
        f"40x plan: ranks {plan.chosen_ranks}, {plan.per_layer_params} weight entries per layer"
        f" (expect 1600)"
    )
    return CheckResult("parameter-counts", bool(ok), "; ".join(rows))


def run_all_checks() -> list[CheckResult]:
    return [
        check_tt_matvec(),
        check_gradients(),
        check_residual_exact(),
        check_param_counts(),
    ]
