"""Duelling double-DQN on plain numpy: forward, backprop, Adam, targets.

The value network maps a normalized horizontal position to one action
value per flying direction. Hidden layers are rectified-linear; the last
layer is a linear duelling head whose first output estimates the state
value and the rest estimate action advantages, aggregated as
Q = V + A - mean(A) so the decomposition is identifiable. Multi-step TD
targets bootstrap from the target network at the online network's argmax.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .replay import TERMINAL_NONE, Transition


class DivergenceError(RuntimeError):
    """Raised when the training loss or parameters stop being finite."""


@dataclass
class NetworkParams:
    """Weight matrices and bias vectors; the last pair is the duelling head."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    n_actions: int

    @property
    def dtype(self):
        return self.weights[0].dtype

    def copy(self) -> "NetworkParams":
        return NetworkParams(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            n_actions=self.n_actions,
        )

    def flat(self) -> list[np.ndarray]:
        return self.weights + self.biases

    def check_finite(self) -> None:
        for arr in self.flat():
            if not np.isfinite(arr).all():
                raise DivergenceError("non-finite network parameters")


def init_params(
    input_dim: int,
    hidden_sizes: tuple,
    n_actions: int,
    rng: np.random.Generator,
    dtype=np.float64,
) -> NetworkParams:
    """He-style uniform fan-in initialization; biases start at zero."""
    sizes = [input_dim, *hidden_sizes, n_actions + 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return NetworkParams(weights=weights, biases=biases, n_actions=n_actions)


def _forward_cache(params: NetworkParams, x: np.ndarray):
    """Forward pass keeping the per-layer activations for backprop."""
    a = np.atleast_2d(np.asarray(x, dtype=params.dtype))
    acts = [a]
    pre_acts = []
    for w, b in zip(params.weights[:-1], params.biases[:-1]):
        z = a @ w + b
        pre_acts.append(z)
        a = np.maximum(z, 0.0)
        acts.append(a)
    duel = a @ params.weights[-1] + params.biases[-1]
    value = duel[:, :1]
    adv = duel[:, 1:]
    q = value + adv - adv.mean(axis=1, keepdims=True)
    return q, acts, pre_acts


def forward(params: NetworkParams, state_normalized: np.ndarray) -> np.ndarray:
    """Action values for one normalized state (or a batch of them)."""
    single = np.asarray(state_normalized).ndim == 1
    q, _, _ = _forward_cache(params, state_normalized)
    return q[0] if single else q


def _backprop(params: NetworkParams, acts, pre_acts, grad_q: np.ndarray):
    """Gradients of the loss w.r.t. every weight and bias.

    grad_q carries dL/dQ; the duelling aggregation routes it into the
    value column (summed over actions) and mean-centered advantage
    columns before the dense layers.
    """
    g_adv = grad_q - grad_q.mean(axis=1, keepdims=True)
    g_value = grad_q.sum(axis=1, keepdims=True)
    g = np.concatenate([g_value, g_adv], axis=1)

    grad_w = [None] * len(params.weights)
    grad_b = [None] * len(params.biases)
    grad_w[-1] = acts[-1].T @ g
    grad_b[-1] = g.sum(axis=0)
    g = g @ params.weights[-1].T
    for i in range(len(pre_acts) - 1, -1, -1):
        g = g * (pre_acts[i] > 0)
        grad_w[i] = acts[i].T @ g
        grad_b[i] = g.sum(axis=0)
        g = g @ params.weights[i].T
    return grad_w, grad_b


@dataclass
class AdamState:
    """Adaptive-moment optimizer state over a parameter list."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def step(self, params: NetworkParams, grad_w, grad_b) -> None:
        tensors = params.flat()
        grads = list(grad_w) + list(grad_b)
        if not self.m:
            self.m = [np.zeros_like(p) for p in tensors]
            self.v = [np.zeros_like(p) for p in tensors]
        self.t += 1
        b1c = 1.0 - self.beta1**self.t
        b2c = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(tensors, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * np.square(g)
            p -= self.lr * (m / b1c) / (np.sqrt(v / b2c) + self.eps)


def act(qvalues: np.ndarray, epsilon: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy: random action w.p. epsilon, else argmax (ties to lowest)."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError("epsilon must lie in [0, 1]")
    if rng.random() < epsilon:
        return int(rng.integers(len(qvalues)))
    return int(np.argmax(qvalues))


def td_target(
    t: Transition,
    online: NetworkParams,
    target: NetworkParams,
    gamma: float,
    state_scale: np.ndarray,
) -> float:
    """Multi-step double-DQN target for one transition.

    Terminal transitions return the accumulated reward alone; otherwise
    the target network is evaluated at the online network's best action
    in the successor state, discounted by gamma to the stored horizon.
    """
    if t.is_terminal:
        return float(t.n_step_return)
    nxt = np.asarray(t.next_state, dtype=float) / state_scale
    a_star = int(np.argmax(forward(online, nxt)))
    boot = float(forward(target, nxt)[a_star])
    return float(t.n_step_return + gamma**t.horizon * boot)


def td_targets(
    batch: list[Transition],
    online: NetworkParams,
    target: NetworkParams,
    gamma: float,
    state_scale: np.ndarray,
) -> np.ndarray:
    """Vectorized td_target over a batch; identical math, one forward each."""
    next_states = np.stack([t.next_state for t in batch]) / state_scale
    returns = np.array([t.n_step_return for t in batch])
    horizons = np.array([t.horizon for t in batch])
    live = np.array([not t.is_terminal for t in batch])
    q_online = forward(online, next_states)
    a_star = np.argmax(q_online, axis=1)
    q_boot = forward(target, next_states)[np.arange(len(batch)), a_star]
    return returns + (gamma**horizons) * q_boot.astype(float) * live


def train_minibatch(
    online: NetworkParams,
    target: NetworkParams,
    batch: list[Transition],
    adam: AdamState,
    gamma: float,
    state_scale: np.ndarray,
    is_weights: np.ndarray | None = None,
) -> np.ndarray:
    """One weighted MSE gradient step; returns per-sample |TD error|.

    The loss is the batch mean of w (y - Q(s, a))^2 with w = 1 unless
    importance weights are supplied. Duplicated samples contribute
    duplicated gradient terms. The returned errors are computed with the
    pre-update parameters, ready for replay-priority updates.
    """
    if not batch:
        raise ValueError("empty mini-batch")
    y = td_targets(batch, online, target, gamma, state_scale)
    states = np.stack([t.state for t in batch]) / state_scale
    actions = np.array([t.action for t in batch])
    w = np.ones(len(batch)) if is_weights is None else np.asarray(is_weights, dtype=float)

    q, acts, pre_acts = _forward_cache(online, states)
    rows = np.arange(len(batch))
    delta = y - q[rows, actions].astype(float)
    loss = float(np.mean(w * delta**2))
    if not math.isfinite(loss) or abs(loss) > 1e12:
        raise DivergenceError(f"training loss diverged: {loss}")

    grad_q = np.zeros_like(q)
    grad_q[rows, actions] = (-2.0 * w * delta / len(batch)).astype(q.dtype)
    grad_w, grad_b = _backprop(online, acts, pre_acts, grad_q)
    adam.step(online, grad_w, grad_b)
    return np.abs(delta)


def sync_target(online: NetworkParams, target: NetworkParams) -> None:
    """Deep-copy the online parameters into the target network."""
    for dst, src in zip(target.weights, online.weights):
        dst[...] = src
    for dst, src in zip(target.biases, online.biases):
        dst[...] = src


class NStepAssembler:
    """Sliding window turning one-step experiences into multi-step transitions.

    While an episode runs, every step after the window first fills emits
    one full-horizon transition. At episode end, `flush` emits the
    remaining window starts as truncated-horizon transitions flagged with
    the episode's terminal kind, so short or terminal episodes lose no
    experience.
    """

    def __init__(self, gamma: float, n_ms: int):
        if n_ms < 1:
            raise ValueError("n_ms must be >= 1")
        self.gamma = gamma
        self.n_ms = n_ms
        self.window: deque = deque()

    def _emit(self, start: int, terminal_kind: str) -> Transition:
        exps = list(self.window)[start:]
        ret = 0.0
        for i, (_, _, r, _, _) in enumerate(exps):
            ret += self.gamma**i * r
        s0, a0 = exps[0][0], exps[0][1]
        next_state = exps[-1][3]
        return Transition(
            state=s0,
            action=a0,
            n_step_return=ret,
            next_state=next_state,
            horizon=len(exps),
            terminal_kind=terminal_kind,
        )

    def push(
        self,
        state: np.ndarray,
        action: int,
        reward: float,
        next_state: np.ndarray,
        terminal_kind: str = TERMINAL_NONE,
    ) -> list[Transition]:
        """Record one step; emits the oldest full-horizon transition when ready."""
        self.window.append((state, action, reward, next_state, terminal_kind))
        if len(self.window) == self.n_ms:
            tr = self._emit(0, terminal_kind)
            self.window.popleft()
            return [tr]
        return []

    def flush(self, episode_terminal_kind: str) -> list[Transition]:
        """Emit the residual starts as terminal truncated transitions."""
        out = [self._emit(i, episode_terminal_kind) for i in range(len(self.window))]
        self.window.clear()
        return out


CHECKPOINT_FORMAT = 1


def save_checkpoint(params: NetworkParams, path, fingerprint: str = "") -> None:
    """Binary tensor dump; loads back bit-exactly."""
    arrays = {f"w{i}": w for i, w in enumerate(params.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(params.biases)})
    arrays["format_version"] = np.array(CHECKPOINT_FORMAT)
    arrays["n_layers"] = np.array(len(params.weights))
    arrays["n_actions"] = np.array(params.n_actions)
    arrays["fingerprint"] = np.array(fingerprint)
    np.savez(path, **arrays)


def load_checkpoint(path) -> tuple[NetworkParams, str]:
    with np.load(path) as data:
        version = int(data["format_version"])
        if version != CHECKPOINT_FORMAT:
            raise ValueError(f"unsupported checkpoint version {version}")
        n_layers = int(data["n_layers"])
        params = NetworkParams(
            weights=[data[f"w{i}"] for i in range(n_layers)],
            biases=[data[f"b{i}"] for i in range(n_layers)],
            n_actions=int(data["n_actions"]),
        )
        return params, str(data["fingerprint"])
