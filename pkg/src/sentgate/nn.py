"""Recurrent-cell primitives and parameter initialization.

The LSTM cell is the canonical four-gate formulation (input, forget,
cell candidate, output), no peepholes or layer norm. Gate weights are
fused into one matrix of shape (input_size + hidden_size, 4 * hidden),
column blocks ordered i, f, g, o. Inputs are batch-first; 1-D vectors
are accepted and returned as vectors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .errors import ShapeError


@dataclass
class LstmState:
    hidden: Tensor
    cell: Tensor


@dataclass
class LstmParams:
    w: Tensor  # (input_size + hidden_size, 4 * hidden_size)
    b: Tensor  # (4 * hidden_size,)

    @property
    def hidden_size(self):
        return self.w.shape[1] // 4

    @property
    def input_size(self):
        return self.w.shape[0] - self.hidden_size


def uniform_init(rng, shape, scale):
    return Tensor(rng.uniform(-scale, scale, size=shape), requires_grad=True)


def linear_init(rng, fan_in, fan_out):
    """Symmetric uniform init scaled by 1/sqrt(fan_in)."""
    return uniform_init(rng, (fan_in, fan_out), 1.0 / np.sqrt(fan_in))


def lstm_init(rng, input_size, hidden_size, forget_bias=1.0):
    w = uniform_init(
        rng, (input_size + hidden_size, 4 * hidden_size), 1.0 / np.sqrt(input_size + hidden_size)
    )
    b = np.zeros(4 * hidden_size)
    b[hidden_size : 2 * hidden_size] = forget_bias
    return LstmParams(w=w, b=Tensor(b, requires_grad=True))


def zero_state(batch_size, hidden_size):
    return LstmState(ag.zeros((batch_size, hidden_size)), ag.zeros((batch_size, hidden_size)))


def lstm_cell(x, state, params):
    """One LSTM step; differentiable through every path including the cell.

    x: (B, input_size) or (input_size,); state tensors (B, H) or (H,).
    """
    x = ag.lift(x)
    vector_in = x.ndim == 1
    h, c = state.hidden, state.cell
    if vector_in:
        x = x.reshape(1, -1)
        h, c = h.reshape(1, -1), c.reshape(1, -1)
    hsize = params.hidden_size
    if x.shape[1] != params.input_size or h.shape[1] != hsize or c.shape[1] != hsize:
        raise ShapeError(
            f"lstm_cell: input {x.shape}, state ({h.shape}, {c.shape}) do not match "
            f"params expecting input_size={params.input_size}, hidden_size={hsize}"
        )
    z = ag.concat([x, h], axis=1) @ params.w + params.b
    i = ag.sigmoid(z[:, :hsize])
    f = ag.sigmoid(z[:, hsize : 2 * hsize])
    g = ag.tanh(z[:, 2 * hsize : 3 * hsize])
    o = ag.sigmoid(z[:, 3 * hsize :])
    c_new = f * c + i * g
    h_new = o * ag.tanh(c_new)
    if vector_in:
        h_new, c_new = h_new.reshape(-1), c_new.reshape(-1)
    return LstmState(hidden=h_new, cell=c_new)
