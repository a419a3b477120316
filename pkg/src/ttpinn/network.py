"""The PINN function approximator.

Architecture: a dense input layer, `hidden_layers` equal-width hidden layers
(dense or TT-factorized), and a dense output layer. A sine activation follows
the input layer and every hidden layer; the output layer is a plain affine
map. The input and output layers are never factorized.

The forward pass propagates the five jet channels through every layer: affine
maps act on each channel independently (bias only shifts the value channel),
the activation mixes channels via the second-order chain rule. A separate
value-only pass serves grid evaluation, where derivatives are not needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import tape as T
from .jets import Jet2, jet_add, jet_const, jet_mul, jet_x, jet_y
from .ttlinear import TTLinear, tt_halves_forward, tt_init


@dataclass(frozen=True)
class TTHidden:
    """Explicit TT structure for the hidden layers."""

    row_factors: tuple[int, ...]
    col_factors: tuple[int, ...]
    ranks: tuple[int, ...]


@dataclass(frozen=True)
class MlpSpec:
    input_dim: int = 2
    hidden_width: int = 256
    hidden_layers: int = 3
    output_dim: int = 1
    hidden_kind: str = "dense"  # "dense" | "tt"
    tt: TTHidden | None = None
    activation: str = "sine"

    def __post_init__(self):
        if self.activation != "sine":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.hidden_kind not in ("dense", "tt"):
            raise ValueError(f"unsupported hidden kind {self.hidden_kind!r}")
        if self.hidden_kind == "tt":
            if self.tt is None:
                raise ValueError("hidden_kind 'tt' needs a TTHidden structure")
            w = self.hidden_width
            if math.prod(self.tt.row_factors) != w or math.prod(self.tt.col_factors) != w:
                raise ValueError(
                    f"TT factorizations {self.tt} do not multiply to width {w}"
                )


def spec_param_count(spec: MlpSpec) -> int:
    """Closed-form n_theta for a spec (weights + biases, all layers)."""
    w, l = spec.hidden_width, spec.hidden_layers
    n = spec.input_dim * w + w  # input layer
    if spec.hidden_kind == "dense":
        hidden = w * w + w
    else:
        ranks, factors = spec.tt.ranks, spec.tt.row_factors + spec.tt.col_factors
        hidden = sum(ranks[k] * factors[k] * ranks[k + 1] for k in range(len(factors))) + w
    n += l * hidden
    n += w * spec.output_dim + spec.output_dim  # output layer
    return n


class ParamStore:
    """Ordered registry of trainable arrays; the order fixes checkpoint layout."""

    def __init__(self):
        self._arrays: dict[str, np.ndarray] = {}

    def register(self, name: str, arr: np.ndarray) -> np.ndarray:
        if name in self._arrays:
            raise KeyError(f"parameter {name!r} already registered")
        a = np.ascontiguousarray(arr, dtype=np.float64)
        self._arrays[name] = a
        return a

    def __getitem__(self, name: str) -> np.ndarray:
        return self._arrays[name]

    def __contains__(self, name: str) -> bool:
        return name in self._arrays

    def names(self) -> list[str]:
        return list(self._arrays)

    def items(self):
        return self._arrays.items()

    @property
    def total_count(self) -> int:
        return sum(a.size for a in self._arrays.values())


@dataclass
class DenseLayer:
    name: str
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)


@dataclass
class TTLayer:
    name: str
    tt: TTLinear


@dataclass
class Mlp:
    spec: MlpSpec
    store: ParamStore
    layers: list  # DenseLayer | TTLayer, input to output order


def _xavier(rng, n_out, n_in):
    return rng.normal(0.0, math.sqrt(2.0 / (n_in + n_out)), size=(n_out, n_in))


def init(spec: MlpSpec, seed: int) -> Mlp:
    """Deterministic Xavier init: dense weights N(0, 2/(fan_in+fan_out)),
    TT cores via their variance-matched per-core std, all biases zero."""
    rng = np.random.default_rng(seed)
    store = ParamStore()
    layers = []

    def add_dense(name, n_out, n_in):
        w = store.register(f"{name}.w", _xavier(rng, n_out, n_in))
        b = store.register(f"{name}.b", np.zeros(n_out))
        layers.append(DenseLayer(name, w, b))

    add_dense("in", spec.hidden_width, spec.input_dim)
    for k in range(spec.hidden_layers):
        name = f"h{k + 1}"
        if spec.hidden_kind == "dense":
            add_dense(name, spec.hidden_width, spec.hidden_width)
        else:
            layer = tt_init(spec.tt.row_factors, spec.tt.col_factors, spec.tt.ranks, rng)
            layer.cores = [
                store.register(f"{name}.core{j}", c) for j, c in enumerate(layer.cores)
            ]
            layer.bias = store.register(f"{name}.b", layer.bias)
            layers.append(TTLayer(name, layer))
    add_dense("out", spec.output_dim, spec.hidden_width)
    return Mlp(spec, store, layers)


def forward_jets(net: Mlp, points: np.ndarray, tp: T.Tape | None = None):
    """Propagate jet channels for a batch of points: (B, 2) -> (5, B, out_dim).

    With a tape, records the layer ops and returns the output node id instead.
    """
    stack = T.seed_jet_stack(np.asarray(points, dtype=np.float64))
    last = len(net.layers) - 1
    if tp is None:
        x = stack
        for i, layer in enumerate(net.layers):
            if isinstance(layer, DenseLayer):
                x = T.jet_affine_fwd(x, layer.w, layer.b)
            else:
                x = T.jet_tt_affine_fwd(x, layer.tt)
            if i != last:
                x = T.jet_sin_fwd(x)
        return x
    nid = tp.const(stack)
    for i, layer in enumerate(net.layers):
        if isinstance(layer, DenseLayer):
            nid = tp.record(
                "jet_affine",
                (nid, tp.param(f"{layer.name}.w"), tp.param(f"{layer.name}.b")),
            )
        else:
            cores = tuple(tp.param(f"{layer.name}.core{j}") for j in range(len(layer.tt.cores)))
            nid = tp.record(
                "jet_tt_affine",
                (nid, *cores, tp.param(f"{layer.name}.b")),
                aux=layer.tt,
            )
        if i != last:
            nid = tp.record("jet_sin", (nid,))
    return nid


def forward(net: Mlp, point) -> Jet2:
    """Network output and its input derivatives at one point."""
    stack = forward_jets(net, np.asarray(point, dtype=np.float64).reshape(1, 2))
    return Jet2(*(float(stack[c, 0, 0]) for c in range(5)))


def mlp_values(net: Mlp, points: np.ndarray) -> np.ndarray:
    """Value-only forward pass: (B, 2) -> (B, out_dim). No derivatives."""
    x = np.asarray(points, dtype=np.float64)
    last = len(net.layers) - 1
    for i, layer in enumerate(net.layers):
        if isinstance(layer, DenseLayer):
            x = x @ layer.w.T + layer.b
        else:
            x = tt_halves_forward(layer.tt, x)[0] + layer.tt.bias
        if i != last:
            x = np.sin(x)
    return x


def boundary_mask_jet(x, y) -> Jet2:
    """The hard-BC mask m(x, y) = x(x-1) y(y-1) as a jet (scalar or batched)."""
    xj, yj = jet_x(x), jet_y(y)
    mx = jet_mul(xj, jet_add(xj, jet_const(-1.0)))
    my = jet_mul(yj, jet_add(yj, jet_const(-1.0)))
    return jet_mul(mx, my)


def apply_hard_bc(f: Jet2, x, y) -> Jet2:
    """Multiply a network output jet by the boundary mask, so the Dirichlet
    condition holds exactly on the edges of the unit square."""
    return jet_mul(boundary_mask_jet(x, y), f)


def boundary_mask_stack(points: np.ndarray) -> np.ndarray:
    """Mask jets for a batch of points, stacked to (5, B, 1)."""
    m = boundary_mask_jet(points[:, 0], points[:, 1])
    return np.stack(m.as_tuple())[:, :, None]


def boundary_mask_values(points: np.ndarray) -> np.ndarray:
    x, y = points[:, 0], points[:, 1]
    return x * (x - 1.0) * y * (y - 1.0)
