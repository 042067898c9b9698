"""Peephole convolutional LSTM head.

One cell step::

    i = sigmoid(W_xi * x + W_hi * H_prev + w_ci . C_prev + b_i)
    f = sigmoid(W_xf * x + W_hf * H_prev + w_cf . C_prev + b_f)
    C = f . C_prev + i . tanh(W_xc * x + W_hc * H_prev + b_c)
    o = sigmoid(W_xo * x + W_ho * H_prev + w_co . C + b_o)
    H = o . tanh(C)

``*`` is a same-size 3x3 convolution, ``.`` an elementwise product.  The output
gate peeks at the *current* cell state.
"""

from dataclasses import dataclass, fields, replace

import numpy as np
from scipy.special import expit

from ksora.errors import ConfigurationError, DimensionError
from ksora.tensor import (
    as_feature_map,
    correlate3x3,
    correlate3x3_grad_input,
    correlate3x3_grad_kernels,
)

GATES = ("i", "f", "o", "c")


@dataclass(frozen=True)
class ConvLSTMState:
    H: np.ndarray
    C: np.ndarray

    @classmethod
    def zeros(cls, channels, height, width):
        return cls(np.zeros((channels, height, width)), np.zeros((channels, height, width)))


@dataclass(frozen=True, eq=False)
class ConvLSTMParams:
    """All tensors of one cell.

    Input kernels ``w_x*`` are ``(hidden, in, 3, 3)``, recurrent kernels
    ``w_h*`` are ``(hidden, hidden, 3, 3)``, peephole maps ``w_c*`` are
    ``(hidden, height, width)`` and biases ``b_*`` are ``(hidden,)``.
    """

    w_xi: np.ndarray
    w_hi: np.ndarray
    w_xf: np.ndarray
    w_hf: np.ndarray
    w_xo: np.ndarray
    w_ho: np.ndarray
    w_xc: np.ndarray
    w_hc: np.ndarray
    w_ci: np.ndarray
    w_cf: np.ndarray
    w_co: np.ndarray
    b_i: np.ndarray
    b_f: np.ndarray
    b_o: np.ndarray
    b_c: np.ndarray

    def __post_init__(self):
        for f in fields(self):
            object.__setattr__(self, f.name, np.asarray(getattr(self, f.name), dtype=np.float64))
        hidden = self.b_i.shape[0]
        n_in = self.w_xi.shape[1]
        for g in GATES:
            wx, wh, b = getattr(self, "w_x" + g), getattr(self, "w_h" + g), getattr(self, "b_" + g)
            if wx.shape != (hidden, n_in, 3, 3):
                raise ConfigurationError(f"w_x{g} has shape {wx.shape}, expected {(hidden, n_in, 3, 3)}")
            if wh.shape != (hidden, hidden, 3, 3):
                raise ConfigurationError(f"w_h{g} has shape {wh.shape}, expected {(hidden, hidden, 3, 3)}")
            if b.shape != (hidden,):
                raise ConfigurationError(f"b_{g} has shape {b.shape}, expected {(hidden,)}")
        peep = self.w_ci.shape
        if len(peep) != 3 or peep[0] != hidden or self.w_cf.shape != peep or self.w_co.shape != peep:
            raise ConfigurationError("peephole maps must share shape (hidden, height, width)")

    @property
    def hidden(self):
        return self.b_i.shape[0]

    @property
    def in_channels(self):
        return self.w_xi.shape[1]

    @property
    def spatial(self):
        return self.w_ci.shape[1:]

    def tensors(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def replace(self, **changes):
        return replace(self, **changes)

    @classmethod
    def zeros(cls, in_channels, hidden, height, width):
        return cls(**_shaped(in_channels, hidden, height, width, lambda shape: np.zeros(shape)))

    @classmethod
    def random(cls, in_channels, hidden, height, width, rng, scale=0.3):
        return cls(**_shaped(in_channels, hidden, height, width, lambda shape: rng.normal(0.0, scale, size=shape)))


def _shaped(in_channels, hidden, height, width, make):
    out = {}
    for g in GATES:
        out["w_x" + g] = make((hidden, in_channels, 3, 3))
        out["w_h" + g] = make((hidden, hidden, 3, 3))
    for g in ("i", "f", "o"):
        out["w_c" + g] = make((hidden, height, width))
    for g in GATES:
        out["b_" + g] = make((hidden,))
    return out


def _check(x, prev, p):
    x = as_feature_map(x)
    if x.shape[0] != p.in_channels:
        raise DimensionError(f"input has {x.shape[0]} channels, params expect {p.in_channels}")
    want = (p.hidden,) + tuple(p.spatial)
    if x.shape[1:] != tuple(p.spatial):
        raise DimensionError(f"input spatial {x.shape[1:]} != peephole spatial {tuple(p.spatial)}")
    if prev.H.shape != want or prev.C.shape != want:
        raise DimensionError(f"state shapes {prev.H.shape}/{prev.C.shape}, expected {want}")
    return x


def _forward(x, prev, p):
    Hp, Cp = prev.H, prev.C

    def affine(g):
        return (
            correlate3x3(x, getattr(p, "w_x" + g))
            + correlate3x3(Hp, getattr(p, "w_h" + g))
            + getattr(p, "b_" + g)[:, None, None]
        )

    i = expit(affine("i") + p.w_ci * Cp)
    f = expit(affine("f") + p.w_cf * Cp)
    g = np.tanh(affine("c"))
    C = f * Cp + i * g
    o = expit(affine("o") + p.w_co * C)
    tC = np.tanh(C)
    H = o * tC
    cache = {"i": i, "f": f, "o": o, "g": g, "tC": tC}
    return ConvLSTMState(H, C), cache


def cell_step(x, prev, p):
    """Advance one time step; returns the new :class:`ConvLSTMState`."""
    x = _check(x, prev, p)
    return _forward(x, prev, p)[0]


def cell_step_grad(x, prev, p, grad_H, grad_C=None):
    """Backpropagate ``grad_H`` (and optionally ``grad_C``) through one step.

    Returns ``(param_grads, grad_x, grad_prev)`` where ``param_grads`` maps each
    tensor name of :class:`ConvLSTMParams` to its gradient and ``grad_prev`` is
    a :class:`ConvLSTMState` holding the gradients for ``H_prev`` and ``C_prev``.
    """
    x = _check(x, prev, p)
    state, k = _forward(x, prev, p)
    i, f, o, g, tC = k["i"], k["f"], k["o"], k["g"], k["tC"]
    Cp, C = prev.C, state.C

    d_ao = grad_H * tC * o * (1.0 - o)
    dC = grad_H * o * (1.0 - tC * tC) + d_ao * p.w_co
    if grad_C is not None:
        dC = dC + grad_C
    d_af = dC * Cp * f * (1.0 - f)
    d_ai = dC * g * i * (1.0 - i)
    d_ac = dC * i * (1.0 - g * g)
    pre = {"i": d_ai, "f": d_af, "o": d_ao, "c": d_ac}

    grads = {
        "w_ci": d_ai * Cp,
        "w_cf": d_af * Cp,
        "w_co": d_ao * C,
    }
    grad_x = np.zeros_like(x)
    grad_Hp = np.zeros_like(prev.H)
    for gate, d in pre.items():
        grads["w_x" + gate] = correlate3x3_grad_kernels(x, d)
        grads["w_h" + gate] = correlate3x3_grad_kernels(prev.H, d)
        grads["b_" + gate] = d.sum(axis=(1, 2))
        grad_x += correlate3x3_grad_input(d, getattr(p, "w_x" + gate))
        grad_Hp += correlate3x3_grad_input(d, getattr(p, "w_h" + gate))
    grad_Cp = dC * f + d_ai * p.w_ci + d_af * p.w_cf
    return grads, grad_x, ConvLSTMState(grad_Hp, grad_Cp)


def dropout_mask(shape, rate, rng):
    """Inverted-dropout mask: kept entries are ``1 / (1 - rate)``, others 0."""
    if not 0.0 <= rate < 1.0:
        raise ConfigurationError(f"dropout rate {rate} outside [0, 1)")
    if rate == 0.0:
        return np.ones(shape)
    keep = rng.random(shape) >= rate
    return keep / (1.0 - rate)


class ConvLSTMStack:
    """Two chained cells, stepped one frame at a time.

    Dropout is applied to each layer's input only when ``train`` is true; the
    masks are drawn from a generator seeded with ``seed``.
    """

    def __init__(self, p1, p2, dropout_rate=0.2, train=False, seed=0):
        if p2.in_channels != p1.hidden:
            raise ConfigurationError(
                f"layer 2 expects {p2.in_channels} inputs, layer 1 emits {p1.hidden}"
            )
        if not 0.0 <= dropout_rate < 1.0:
            raise ConfigurationError(f"dropout rate {dropout_rate} outside [0, 1)")
        self.layers = (p1, p2)
        self.dropout_rate = dropout_rate
        self.train = train
        self.rng = np.random.default_rng(seed)
        self.states = tuple(ConvLSTMState.zeros(p.hidden, *p.spatial) for p in self.layers)

    def step(self, x):
        new = []
        inp = x
        for p, prev in zip(self.layers, self.states):
            if self.train and self.dropout_rate > 0.0:
                inp = inp * dropout_mask(inp.shape, self.dropout_rate, self.rng)
            st = cell_step(inp, prev, p)
            new.append(st)
            inp = st.H
        self.states = tuple(new)
        return self.states


def stack_forward(x_seq, p1, p2, dropout_rate=0.2, seed=0, train=False):
    """Run the two-layer stack over ``x_seq``; one ``(layer1, layer2)`` state pair per step."""
    stack = ConvLSTMStack(p1, p2, dropout_rate=dropout_rate, train=train, seed=seed)
    return [stack.step(x) for x in x_seq]


def readout(h, weights, bias=0.0):
    """1x1 projection across channels followed by a sigmoid; returns ``(height, width)``."""
    h = as_feature_map(h, "h")
    w = np.asarray(weights, dtype=np.float64).reshape(-1)
    if w.shape[0] != h.shape[0]:
        raise ConfigurationError(f"readout has {w.shape[0]} weights for {h.shape[0]} channels")
    return expit(np.tensordot(w, h, axes=(0, 0)) + bias)
