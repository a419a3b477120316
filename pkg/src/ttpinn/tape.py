"""Reverse-mode differentiation over the jet-valued forward pass.

The tape records whole-layer operations (affine, factorized matvec, fused sine
activation) on "jet stacks": arrays of shape (5, B, n) whose leading axis holds
the five jet channels (value, d/dx, d/dy, d2/dx2, d2/dy2) for a batch of B
points. Input derivatives are carried by the jets; the tape differentiates
only w.r.t. parameters, so one reverse sweep yields every parameter gradient
of a scalar loss, including the pathways through the second-derivative
channels. TT layers are reverse-swept through their cached contraction
intermediates and never materialize a full weight matrix.

Generic elementwise ops (add, mul, sin, ...) are also provided so small
expression graphs can be taped and checked directly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .ttlinear import TTLinear, tt_halves_forward, tt_halves_vjp

V, DX, DY, DXX, DYY = range(5)  # jet channel indices


# --------------------------------------------------------------------------- #
# Forward implementations, usable with or without a tape.
# --------------------------------------------------------------------------- #


def seed_jet_stack(points: np.ndarray) -> np.ndarray:
    """Jet channels for a batch of input points: (B, 2) -> (5, B, 2)."""
    b = points.shape[0]
    x = np.zeros((5, b, 2))
    x[V] = points
    x[DX, :, 0] = 1.0
    x[DY, :, 1] = 1.0
    return x


def jet_affine_fwd(x, w, b):
    """x (5,B,i), w (o,i), b (o,): affine on every channel, bias on the value."""
    c, bb, i = x.shape
    out = (x.reshape(c * bb, i) @ w.T).reshape(c, bb, w.shape[0])
    out[V] += b
    return out


def jet_tt_affine_fwd(x, layer: TTLinear, with_caches=False):
    c, bb, n = x.shape
    out2, caches = tt_halves_forward(layer, x.reshape(c * bb, n))
    out = out2.reshape(c, bb, layer.m_dim)
    out[V] += layer.bias
    return (out, caches) if with_caches else out


def jet_sin_fwd(x, with_saved=False):
    out, s, c = kernels.jet_sin_forward(x)
    return (out, (s, c)) if with_saved else out


def jet_mul_const_fwd(x, m):
    """Jet product with a parameter-independent jet stack m (product rule)."""
    out = np.empty(np.broadcast_shapes(x.shape, m.shape))
    out[V] = m[V] * x[V]
    out[DX] = m[DX] * x[V] + m[V] * x[DX]
    out[DY] = m[DY] * x[V] + m[V] * x[DY]
    out[DXX] = m[DXX] * x[V] + 2.0 * m[DX] * x[DX] + m[V] * x[DXX]
    out[DYY] = m[DYY] * x[V] + 2.0 * m[DY] * x[DY] + m[V] * x[DYY]
    return out


def helmholtz_residual_fwd(u, k2, g):
    """u (5,B,1) -> residual (B,): u_xx + u_yy + k^2 u - g."""
    return u[DXX, :, 0] + u[DYY, :, 0] + k2 * u[V, :, 0] - g


# --------------------------------------------------------------------------- #
# Op table: op name -> (forward, vjp).
# forward(values, aux) -> (out, saved); vjp(values, saved, up, aux) -> grads,
# one entry per input (None for a non-differentiable slot).
# --------------------------------------------------------------------------- #


def _fwd_add(vals, aux):
    return vals[0] + vals[1], None


def _vjp_add(vals, saved, up, aux):
    return (up, up)


def _fwd_sub(vals, aux):
    return vals[0] - vals[1], None


def _vjp_sub(vals, saved, up, aux):
    return (up, -up)


def _fwd_mul(vals, aux):
    return vals[0] * vals[1], None


def _vjp_mul(vals, saved, up, aux):
    return (up * vals[1], up * vals[0])


def _fwd_scale(vals, aux):
    return aux * vals[0], None


def _vjp_scale(vals, saved, up, aux):
    return (aux * up,)


def _fwd_sin(vals, aux):
    return np.sin(vals[0]), None


def _vjp_sin(vals, saved, up, aux):
    return (np.cos(vals[0]) * up,)


def _fwd_square(vals, aux):
    return vals[0] * vals[0], None


def _vjp_square(vals, saved, up, aux):
    return (2.0 * vals[0] * up,)


def _fwd_mean(vals, aux):
    return float(np.mean(vals[0])), None


def _vjp_mean(vals, saved, up, aux):
    x = vals[0]
    return (np.full_like(np.asarray(x, dtype=np.float64), up / np.size(x)),)


def _fwd_sum(vals, aux):
    return float(np.sum(vals[0])), None


def _vjp_sum(vals, saved, up, aux):
    return (np.full_like(np.asarray(vals[0], dtype=np.float64), up),)


def _fwd_mean_sq(vals, aux):
    return float(np.mean(vals[0] * vals[0])), None


def _vjp_mean_sq(vals, saved, up, aux):
    x = vals[0]
    return ((2.0 * up / np.size(x)) * x,)


def _fwd_jet_affine(vals, aux):
    return jet_affine_fwd(vals[0], vals[1], vals[2]), None


def _vjp_jet_affine(vals, saved, up, aux):
    x, w, _ = vals
    c, bb, i = x.shape
    o = w.shape[0]
    up2 = up.reshape(c * bb, o)
    dx = (up2 @ w).reshape(x.shape)
    dw = up2.T @ x.reshape(c * bb, i)
    db = up[V].sum(axis=0)
    return (dx, dw, db)


def _fwd_jet_tt_affine(vals, aux):
    out, caches = jet_tt_affine_fwd(vals[0], aux, with_caches=True)
    return out, caches


def _vjp_jet_tt_affine(vals, saved, up, aux):
    layer: TTLinear = aux
    x = vals[0]
    c, bb, n = x.shape
    core_grads, dz2 = tt_halves_vjp(layer, saved, up.reshape(c * bb, layer.m_dim))
    dbias = up[V].sum(axis=0)
    return (dz2.reshape(x.shape), *core_grads, dbias)


def _fwd_jet_sin(vals, aux):
    out, saved = jet_sin_fwd(vals[0], with_saved=True)
    return out, saved


def _vjp_jet_sin(vals, saved, up, aux):
    s, c = saved
    return (kernels.jet_sin_vjp(vals[0], s, c, up),)


def _fwd_jet_mul_const(vals, aux):
    return jet_mul_const_fwd(vals[0], aux), None


def _vjp_jet_mul_const(vals, saved, up, aux):
    m = aux
    d = np.empty_like(vals[0])
    d[V] = m[V] * up[V] + m[DX] * up[DX] + m[DY] * up[DY] + m[DXX] * up[DXX] + m[DYY] * up[DYY]
    d[DX] = m[V] * up[DX] + 2.0 * m[DX] * up[DXX]
    d[DY] = m[V] * up[DY] + 2.0 * m[DY] * up[DYY]
    d[DXX] = m[V] * up[DXX]
    d[DYY] = m[V] * up[DYY]
    return (d,)


def _fwd_jet_channel(vals, aux):
    return vals[0][aux], None


def _vjp_jet_channel(vals, saved, up, aux):
    d = np.zeros_like(vals[0])
    d[aux] = up
    return (d,)


def _fwd_helm_residual(vals, aux):
    k2, g = aux
    return helmholtz_residual_fwd(vals[0], k2, g), None


def _vjp_helm_residual(vals, saved, up, aux):
    k2, _ = aux
    d = np.zeros_like(vals[0])
    d[V, :, 0] = k2 * up
    d[DXX, :, 0] = up
    d[DYY, :, 0] = up
    return (d,)


OPS = {
    "add": (_fwd_add, _vjp_add),
    "sub": (_fwd_sub, _vjp_sub),
    "mul": (_fwd_mul, _vjp_mul),
    "scale": (_fwd_scale, _vjp_scale),
    "sin": (_fwd_sin, _vjp_sin),
    "square": (_fwd_square, _vjp_square),
    "mean": (_fwd_mean, _vjp_mean),
    "sum": (_fwd_sum, _vjp_sum),
    "mean_sq": (_fwd_mean_sq, _vjp_mean_sq),
    "jet_affine": (_fwd_jet_affine, _vjp_jet_affine),
    "jet_tt_affine": (_fwd_jet_tt_affine, _vjp_jet_tt_affine),
    "jet_sin": (_fwd_jet_sin, _vjp_jet_sin),
    "jet_mul_const": (_fwd_jet_mul_const, _vjp_jet_mul_const),
    "jet_channel": (_fwd_jet_channel, _vjp_jet_channel),
    "helmholtz_residual": (_fwd_helm_residual, _vjp_helm_residual),
}


@dataclass
class Node:
    op: str  # "const", "param", or an OPS key
    inputs: tuple[int, ...]
    value: object
    saved: object = None
    aux: object = None
    param_name: str | None = None


class UnknownNode(KeyError):
    pass


class Tape:
    """Append-only record of a forward computation over a parameter registry.

    Nodes are appended in topological order (inputs must already be on the
    tape); `backward` makes one reverse sweep and returns a gradient per
    registered parameter (zero for parameters the loss never touched).
    """

    def __init__(self, params=None):
        self.params = params if params is not None else {}
        self.nodes: list[Node] = []
        self._param_nodes: dict[str, int] = {}

    def _push(self, node: Node) -> int:
        self.nodes.append(node)
        return len(self.nodes) - 1

    def const(self, value) -> int:
        return self._push(Node("const", (), value))

    def param(self, name: str) -> int:
        """Node for a registered parameter (one node per name per tape)."""
        if name not in self._param_nodes:
            self._param_nodes[name] = self._push(
                Node("param", (), self.params[name], param_name=name)
            )
        return self._param_nodes[name]

    def value(self, nid: int):
        return self.nodes[nid].value

    def record(self, op: str, inputs, aux=None) -> int:
        for nid in inputs:
            if not (0 <= nid < len(self.nodes)):
                raise UnknownNode(f"input node {nid} is not on the tape")
        fwd, _ = OPS[op]
        vals = [self.nodes[nid].value for nid in inputs]
        value, saved = fwd(vals, aux)
        return self._push(Node(op, tuple(inputs), value, saved=saved, aux=aux))

    # Thin wrappers, for readable call sites.
    def add(self, a, b):
        return self.record("add", (a, b))

    def sub(self, a, b):
        return self.record("sub", (a, b))

    def mul(self, a, b):
        return self.record("mul", (a, b))

    def scale(self, a, c):
        return self.record("scale", (a,), aux=c)

    def sin(self, a):
        return self.record("sin", (a,))

    def square(self, a):
        return self.record("square", (a,))

    def mean(self, a):
        return self.record("mean", (a,))

    def mean_sq(self, a):
        return self.record("mean_sq", (a,))

    def backward(self, loss_nid: int) -> dict[str, np.ndarray]:
        """Reverse sweep from a scalar loss node; returns parameter gradients."""
        loss_node = self.nodes[loss_nid]
        if np.ndim(loss_node.value) != 0:
            raise ValueError(
                f"loss node must be scalar, got shape {np.shape(loss_node.value)}"
            )
        grads = {name: np.zeros_like(np.asarray(arr, dtype=np.float64))
                 for name, arr in self.params.items()}
        adjoints: list = [None] * len(self.nodes)
        adjoints[loss_nid] = 1.0
        for nid in range(loss_nid, -1, -1):
            up = adjoints[nid]
            if up is None:
                continue
            node = self.nodes[nid]
            if node.op == "const":
                continue
            if node.op == "param":
                grads[node.param_name] += up
                continue
            _, vjp = OPS[node.op]
            vals = [self.nodes[i].value for i in node.inputs]
            for inp, g in zip(node.inputs, vjp(vals, node.saved, up, node.aux)):
                if g is None:
                    continue
                if adjoints[inp] is None:
                    adjoints[inp] = g
                else:
                    adjoints[inp] = adjoints[inp] + g
        return grads
