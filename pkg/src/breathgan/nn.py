"""LSTM cell, parameter init and the two optimizers used for training.

The LSTM keeps one weight matrix of shape (input_size + hidden_size,
hidden_size) plus bias per gate.  Init is uniform in [-0.08, 0.08] for
weights, zeros for biases and +1.0 on the forget-gate bias.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor

CHECKPOINT_FORMAT_VERSION = 1

INIT_SCALE = 0.08
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

GATES = ("input", "forget", "output", "cell")


@dataclass
class LstmParams:
    """Gate weights/biases of a single LSTM cell."""

    input_size: int
    hidden_size: int
    w: dict[str, Tensor]  # gate -> (input_size + hidden_size, hidden_size)
    b: dict[str, Tensor]  # gate -> (hidden_size,)

    def parameters(self) -> list[Tensor]:
        return [self.w[gate] for gate in GATES] + [self.b[gate] for gate in GATES]


def init_lstm(input_size: int, hidden_size: int, rng: np.random.Generator) -> LstmParams:
    if input_size <= 0 or hidden_size <= 0:
        raise ValueError("input_size and hidden_size must be positive")
    w = {
        gate: Tensor(
            rng.uniform(-INIT_SCALE, INIT_SCALE, (input_size + hidden_size, hidden_size)),
            requires_grad=True,
        )
        for gate in GATES
    }
    b = {gate: Tensor(np.zeros(hidden_size), requires_grad=True) for gate in GATES}
    b["forget"].data += 1.0
    return LstmParams(input_size, hidden_size, w, b)


def lstm_step(
    params: LstmParams, x_t: Tensor, h_prev: Tensor, c_prev: Tensor
) -> tuple[Tensor, Tensor]:
    """One LSTM recurrence: sigmoid gates, tanh candidate and output squash.

    Implemented as a single fused graph node (stacked gate matmul, analytic
    backward) because the per-op composition dominated training time.
    Gradients are checked against central finite differences in the tests.
    """
    if x_t.shape[1] != params.input_size or h_prev.shape[1] != params.hidden_size:
        raise ValueError(
            f"lstm_step shape mismatch: x {x_t.shape}, h {h_prev.shape}, "
            f"expected input {params.input_size}, hidden {params.hidden_size}"
        )
    hid = params.hidden_size
    w_all = np.concatenate([params.w[g].data for g in GATES], axis=1)
    b_all = np.concatenate([params.b[g].data for g in GATES])
    z = np.concatenate([x_t.data, h_prev.data], axis=1)
    pre = z @ w_all + b_all
    i = 1.0 / (1.0 + np.exp(-pre[:, :hid]))
    f = 1.0 / (1.0 + np.exp(-pre[:, hid : 2 * hid]))
    o = 1.0 / (1.0 + np.exp(-pre[:, 2 * hid : 3 * hid]))
    g = np.tanh(pre[:, 3 * hid :])
    c = f * c_prev.data + i * g
    tc = np.tanh(c)
    h = o * tc

    parents = (x_t, h_prev, c_prev) + tuple(params.parameters())
    core = Tensor(np.concatenate([h, c], axis=1), _parents=parents)
    if core.requires_grad:
        def _backward(gpack):
            gh = gpack[:, :hid]
            gc = gpack[:, hid:] + gh * o * (1.0 - tc * tc)
            ga = np.empty_like(pre)
            ga[:, :hid] = gc * g * i * (1.0 - i)
            ga[:, hid : 2 * hid] = gc * c_prev.data * f * (1.0 - f)
            ga[:, 2 * hid : 3 * hid] = gh * tc * o * (1.0 - o)
            ga[:, 3 * hid :] = gc * i * (1.0 - g * g)
            if any(params.w[name].requires_grad for name in GATES):
                gw_all = z.T @ ga
                gb_all = ga.sum(axis=0)
                for k, name in enumerate(GATES):
                    params.w[name]._accumulate(gw_all[:, k * hid : (k + 1) * hid])
                    params.b[name]._accumulate(gb_all[k * hid : (k + 1) * hid])
            if x_t.requires_grad or h_prev.requires_grad:
                gz = ga @ w_all.T
                if x_t.requires_grad:
                    x_t._accumulate(gz[:, : params.input_size])
                if h_prev.requires_grad:
                    h_prev._accumulate(gz[:, params.input_size :])
            if c_prev.requires_grad:
                c_prev._accumulate(gc * f)
        core._backward = _backward
    return ad.slice_cols(core, 0, hid), ad.slice_cols(core, hid, 2 * hid)


@dataclass
class OptimizerState:
    """SGD or Adam state over a fixed parameter list."""

    kind: str
    learning_rate: float
    beta1: float = ADAM_BETA1
    beta2: float = ADAM_BETA2
    epsilon: float = ADAM_EPS
    t: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        if self.kind not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


def optimizer_step(state: OptimizerState, params: list[Tensor]) -> None:
    """In-place parameter update from the gradients stored on the tensors."""
    grads = []
    for p in params:
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if not np.all(np.isfinite(g)):
            raise RuntimeError("diverged: non-finite gradient")
        grads.append(g)
    if state.kind == "sgd":
        for p, g in zip(params, grads):
            p.data -= state.learning_rate * g
        return
    if not state.m:
        state.m = [np.zeros_like(p.data) for p in params]
        state.v = [np.zeros_like(p.data) for p in params]
    state.t += 1
    bc1 = 1.0 - state.beta1 ** state.t
    bc2 = 1.0 - state.beta2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p.data -= state.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)


def lstm_to_doc(params: LstmParams, extra: dict | None = None) -> dict:
    """Checkpoint document for one LSTM parameter set (nested lists)."""
    doc = {
        "format_version": CHECKPOINT_FORMAT_VERSION,
        "input_size": params.input_size,
        "hidden_size": params.hidden_size,
    }
    for gate in GATES:
        doc[f"w_{gate}"] = params.w[gate].data.tolist()
        doc[f"b_{gate}"] = params.b[gate].data.tolist()
    if extra:
        doc.update(extra)
    return doc


def lstm_from_doc(doc: dict) -> LstmParams:
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format {doc.get('format_version')}")
    w = {gate: Tensor(np.asarray(doc[f"w_{gate}"]), requires_grad=True) for gate in GATES}
    b = {gate: Tensor(np.asarray(doc[f"b_{gate}"]), requires_grad=True) for gate in GATES}
    return LstmParams(int(doc["input_size"]), int(doc["hidden_size"]), w, b)
