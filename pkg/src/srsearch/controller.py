"""Learned mutation: an embedding -> LSTM -> softmax chain samples one
operator per cell; the sampled cells' embeddings, concatenated, feed three
fully-connected layers whose sigmoid outputs are the connection
probabilities.  Training follows the score-signal policy gradient, with
gradients hand-derived for exactly this architecture (no autodiff).

All math is float64 numpy; the central correctness property is agreement
with finite differences of `trajectory_loss`.
"""

from __future__ import annotations

import base64
import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .genome import Chromosome, MacroGenome, OPERATOR_COUNT, macro_length, operator_set

logger = logging.getLogger(__name__)

START_TOKEN = OPERATOR_COUNT  # row 192: the "zero cell" fed to the first step
PROB_EPS = 1e-7  # probabilities are clamped away from {0, 1} before log

_ARRAY_FIELDS = (
    "embed", "w_x", "w_h", "b_lstm", "w_out", "b_out",
    "w1", "b1", "w2", "b2", "w3", "b3",
)


@dataclass
class ControllerParams:
    n: int
    d_e: int
    d_h: int
    fc_width: int
    embed: np.ndarray    # (193, d_e)
    w_x: np.ndarray      # (d_e, 4*d_h), gates packed [i, f, g, o]
    w_h: np.ndarray      # (d_h, 4*d_h)
    b_lstm: np.ndarray   # (4*d_h,)
    w_out: np.ndarray    # (d_h, 192)
    b_out: np.ndarray    # (192,)
    w1: np.ndarray       # (n*d_e, fc_width)
    b1: np.ndarray
    w2: np.ndarray       # (fc_width, fc_width)
    b2: np.ndarray
    w3: np.ndarray       # (fc_width, n(n+1)/2)
    b3: np.ndarray

    @property
    def n_connections(self) -> int:
        return macro_length(self.n)

    def arrays(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in _ARRAY_FIELDS}

    def zeros_like(self) -> "ControllerParams":
        return ControllerParams(
            self.n, self.d_e, self.d_h, self.fc_width,
            **{name: np.zeros_like(arr) for name, arr in self.arrays().items()},
        )

    def copy(self) -> "ControllerParams":
        return ControllerParams(
            self.n, self.d_e, self.d_h, self.fc_width,
            **{name: arr.copy() for name, arr in self.arrays().items()},
        )


def init_params(n: int, d_e: int = 32, d_h: int = 64, fc_width: int = 128,
                rng=None) -> ControllerParams:
    """Uniform(-0.1, 0.1) init; the forget-gate bias starts at +1."""
    rng = rng if rng is not None else np.random.default_rng(0)

    def u(*shape):
        return rng.uniform(-0.1, 0.1, size=shape)

    m = macro_length(n)
    params = ControllerParams(
        n=n, d_e=d_e, d_h=d_h, fc_width=fc_width,
        embed=u(OPERATOR_COUNT + 1, d_e),
        w_x=u(d_e, 4 * d_h), w_h=u(d_h, 4 * d_h), b_lstm=u(4 * d_h),
        w_out=u(d_h, OPERATOR_COUNT), b_out=u(OPERATOR_COUNT),
        w1=u(n * d_e, fc_width), b1=u(fc_width),
        w2=u(fc_width, fc_width), b2=u(fc_width),
        w3=u(fc_width, m), b3=u(m),
    )
    params.b_lstm[d_h:2 * d_h] += 1.0
    return params


@dataclass
class Trajectory:
    cells: tuple[int, ...]          # sampled operator index per step
    bits: tuple[int, ...]           # sampled connection bits (flat macro layout)
    cell_probs: np.ndarray          # (n, 192) softmax per step
    macro_probs: np.ndarray         # (m,) sigmoids
    cell_rewards: np.ndarray        # R per cell step
    conn_rewards: np.ndarray        # R per connection term
    chromosome: Chromosome


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


class _Cache:
    """Per-step activations kept for backpropagation."""

    __slots__ = ("input_ids", "h", "c", "gates", "probs", "u", "v1", "v2", "o_mac")

    def __init__(self):
        self.input_ids: list[int] = []
        self.h: list[np.ndarray] = []
        self.c: list[np.ndarray] = []
        self.gates: list[tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]] = []
        self.probs: list[np.ndarray] = []


def _lstm_step(params: ControllerParams, x: np.ndarray, h: np.ndarray, c: np.ndarray):
    d_h = params.d_h
    z = x @ params.w_x + h @ params.w_h + params.b_lstm
    i = _sigmoid(z[:d_h])
    f = _sigmoid(z[d_h:2 * d_h])
    g = np.tanh(z[2 * d_h:3 * d_h])
    o = _sigmoid(z[3 * d_h:])
    c_new = f * c + i * g
    h_new = o * np.tanh(c_new)
    return h_new, c_new, (i, f, g, o)


def _run(params: ControllerParams, cells=None, rng=None):
    """Drives the sampling chain.

    `cells` teacher-forces the chosen operators; otherwise draws come from
    `rng` (categorical), or greedy argmax when no rng is given.
    """
    n = params.n
    cache = _Cache()
    h = np.zeros(params.d_h)
    c = np.zeros(params.d_h)
    chosen: list[int] = []
    prev = START_TOKEN
    for t in range(n):
        cache.input_ids.append(prev)
        x = params.embed[prev]
        h_prev, c_prev = h, c
        h, c, gates = _lstm_step(params, x, h_prev, c_prev)
        logits = h @ params.w_out + params.b_out
        p = _softmax(logits)
        cache.h.append(h)
        cache.c.append(c)
        cache.gates.append(gates)
        cache.probs.append(p)
        if cells is not None:
            a = int(cells[t])
        elif rng is not None:
            u = rng.random()
            a = min(int(np.searchsorted(np.cumsum(p), u, side="right")), OPERATOR_COUNT - 1)
        else:
            a = int(np.argmax(p))
        chosen.append(a)
        prev = a
    u_vec = np.concatenate([params.embed[a] for a in chosen])
    z1 = u_vec @ params.w1 + params.b1
    v1 = np.tanh(z1)
    z2 = v1 @ params.w2 + params.b2
    v2 = np.tanh(z2)
    o_mac = _sigmoid(v2 @ params.w3 + params.b3)
    cache.u, cache.v1, cache.v2, cache.o_mac = u_vec, v1, v2, o_mac
    return chosen, cache


def forward(params: ControllerParams, cells=None):
    """Per-step operator distributions and connection probabilities.

    Teacher-forced when `cells` is given; otherwise the chain follows the
    greedy (argmax) choice at each step, which keeps it deterministic.
    """
    chosen, cache = _run(params, cells=cells)
    return np.stack(cache.probs), cache.o_mac


def sample(params: ControllerParams, rng) -> Trajectory:
    """Draws a chromosome from the controller's current policy."""
    chosen, cache = _run(params, rng=rng)
    n = params.n
    m = params.n_connections
    bits = tuple(int(rng.random() < cache.o_mac[j]) for j in range(m))
    ops = operator_set()
    chromosome = Chromosome(tuple(ops[a] for a in chosen), MacroGenome(n, bits))
    return Trajectory(
        cells=tuple(chosen),
        bits=bits,
        cell_probs=np.stack(cache.probs),
        macro_probs=cache.o_mac.copy(),
        cell_rewards=np.zeros(n),
        conn_rewards=np.zeros(m),
        chromosome=chromosome,
    )


def trajectory_loss(params: ControllerParams, traj: Trajectory) -> float:
    """Scalar policy loss whose gradient `policy_gradient` returns."""
    chosen, cache = _run(params, cells=traj.cells)
    total = 0.0
    for t, a in enumerate(chosen):
        p = float(np.clip(cache.probs[t][a], PROB_EPS, 1.0 - PROB_EPS))
        total += math.log(p) * traj.cell_rewards[t]
    o = np.clip(cache.o_mac, PROB_EPS, 1.0 - PROB_EPS)
    c = np.asarray(traj.bits, dtype=np.float64)
    total += float(np.sum((c * np.log(o) + (1.0 - c) * np.log(1.0 - o)) * traj.conn_rewards))
    return -total


def policy_gradient(params: ControllerParams, traj: Trajectory) -> ControllerParams:
    """Exact gradient of `trajectory_loss` w.r.t. every parameter array."""
    n, d_h = params.n, params.d_h
    chosen, cache = _run(params, cells=traj.cells)
    g = params.zeros_like()

    # macro branch
    o = cache.o_mac
    o_cl = np.clip(o, PROB_EPS, 1.0 - PROB_EPS)
    active = (o > PROB_EPS) & (o < 1.0 - PROB_EPS)
    c = np.asarray(traj.bits, dtype=np.float64)
    d_o = -traj.conn_rewards * (c / o_cl - (1.0 - c) / (1.0 - o_cl))
    d_o = np.where(active, d_o, 0.0)
    dz3 = d_o * o * (1.0 - o)
    g.w3 += np.outer(cache.v2, dz3)
    g.b3 += dz3
    dv2 = params.w3 @ dz3
    dz2 = dv2 * (1.0 - cache.v2**2)
    g.w2 += np.outer(cache.v1, dz2)
    g.b2 += dz2
    dv1 = params.w2 @ dz2
    dz1 = dv1 * (1.0 - cache.v1**2)
    g.w1 += np.outer(cache.u, dz1)
    g.b1 += dz1
    du = (params.w1 @ dz1).reshape(n, params.d_e)
    for t, a in enumerate(chosen):
        g.embed[a] += du[t]

    # cell branch, backprop through time
    dh_next = np.zeros(d_h)
    dc_next = np.zeros(d_h)
    for t in reversed(range(n)):
        a = chosen[t]
        p = cache.probs[t]
        if PROB_EPS < p[a] < 1.0 - PROB_EPS:
            dlogits = p * traj.cell_rewards[t]
            dlogits[a] -= traj.cell_rewards[t]
        else:
            dlogits = np.zeros_like(p)
        h_t = cache.h[t]
        g.w_out += np.outer(h_t, dlogits)
        g.b_out += dlogits
        dh = dh_next + params.w_out @ dlogits

        i, f, gate_g, gate_o = cache.gates[t]
        c_t = cache.c[t]
        c_prev = cache.c[t - 1] if t > 0 else np.zeros(d_h)
        h_prev = cache.h[t - 1] if t > 0 else np.zeros(d_h)
        tanh_c = np.tanh(c_t)
        do = dh * tanh_c
        dc = dc_next + dh * gate_o * (1.0 - tanh_c**2)
        dzi = (dc * gate_g) * i * (1.0 - i)
        dzf = (dc * c_prev) * f * (1.0 - f)
        dzg = (dc * i) * (1.0 - gate_g**2)
        dzo = do * gate_o * (1.0 - gate_o)
        dz = np.concatenate([dzi, dzf, dzg, dzo])
        x = params.embed[cache.input_ids[t]]
        g.w_x += np.outer(x, dz)
        g.w_h += np.outer(h_prev, dz)
        g.b_lstm += dz
        g.embed[cache.input_ids[t]] += params.w_x @ dz
        dh_next = params.w_h @ dz
        dc_next = dc * f
    return g


def assign_terminal_reward(traj: Trajectory, reward: float) -> None:
    """Terminal-only reward with discount 1: every step sees the same value."""
    traj.cell_rewards[:] = reward
    traj.conn_rewards[:] = reward


@dataclass
class EmaBaseline:
    """Exponential moving average of evaluated scores."""

    decay: float = 0.95
    value: float = 0.0

    def advantage(self, score: float) -> float:
        return score - self.value

    def update(self, mean_score: float) -> None:
        self.value = self.decay * self.value + (1.0 - self.decay) * mean_score


def reinforce_update(params: ControllerParams, trajectories, lr: float) -> ControllerParams:
    """One gradient step on the batch-mean policy gradient.

    A non-finite gradient aborts the update and leaves the parameters
    untouched (reported through logging).
    """
    if not trajectories:
        return params
    total = params.zeros_like()
    for traj in trajectories:
        g = policy_gradient(params, traj)
        for name, arr in total.arrays().items():
            arr += g.arrays()[name]
    scale = 1.0 / len(trajectories)
    updated = params.copy()
    for name, arr in updated.arrays().items():
        step = total.arrays()[name] * scale
        if not np.all(np.isfinite(step)):
            logger.warning("non-finite policy gradient in %s; update aborted", name)
            return params
        arr -= lr * step
    return updated


def save_params(params: ControllerParams, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(params_to_json(params), fh)


def load_params(path: str) -> ControllerParams:
    with open(path, encoding="utf-8") as fh:
        return params_from_json(json.load(fh))


def params_to_json(params: ControllerParams) -> dict:
    """Versioned, bit-exact tensor dump (raw little-endian float64)."""
    arrays = {}
    for name, arr in params.arrays().items():
        arr = np.ascontiguousarray(arr, dtype="<f8")
        arrays[name] = {
            "shape": list(arr.shape),
            "data": base64.b64encode(arr.tobytes()).decode("ascii"),
        }
    return {
        "format_version": 1,
        "n": params.n,
        "d_e": params.d_e,
        "d_h": params.d_h,
        "fc_width": params.fc_width,
        "arrays": arrays,
    }


def params_from_json(obj: dict) -> ControllerParams:
    if obj.get("format_version") != 1:
        raise ValueError(f"unsupported controller checkpoint version {obj.get('format_version')!r}")
    arrays = {}
    for name in _ARRAY_FIELDS:
        entry = obj["arrays"][name]
        data = np.frombuffer(base64.b64decode(entry["data"]), dtype="<f8")
        arrays[name] = data.reshape(entry["shape"]).copy()
    return ControllerParams(
        n=int(obj["n"]), d_e=int(obj["d_e"]), d_h=int(obj["d_h"]),
        fc_width=int(obj["fc_width"]), **arrays,
    )
