"""Replay buffers behind one sampling interface.

The quantum-inspired buffer attaches a simulated qubit to every stored
transition. The qubit's two complex amplitudes weight the "accept" and
"deny" eigenstates; the squared accept amplitude is the slot's sampling
priority. Three phases drive it:

  initialization  a freshly stored transition gets the accept eigenstate
                  (probability 1), so unseen experience is sampled first;
  preparation     after a transition is replayed its qubit is reset to the
                  uniform superposition and rotated once by a Grover
                  iteration whose phase pair encodes the transition's new
                  TD error, its replay count and the training progress;
  measurement     collapse probabilities across the buffer, normalized,
                  form the mini-batch sampling distribution.

Everything is simulated classically on the amplitude pairs. Uniform and
proportional-prioritized buffers are provided as baselines.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

SQRT_HALF = math.sqrt(0.5)

TERMINAL_NONE = "none"


@dataclass(frozen=True)
class QubitPriority:
    """Normalized amplitude pair over the accept/deny eigenstates."""

    alpha: complex
    beta: complex

    @property
    def p0(self) -> float:
        """Collapse probability onto the accept eigenstate."""
        return abs(self.alpha) ** 2


def uniform_state() -> QubitPriority:
    return QubitPriority(complex(SQRT_HALF), complex(SQRT_HALF))


@dataclass(frozen=True)
class Transition:
    """Multi-step experience: start state/action, accumulated return, successor.

    `horizon` counts how many one-step rewards were accumulated; it is
    shorter than the configured lookahead only for transitions flushed at
    an episode end, which carry a terminal kind and are never
    bootstrapped.
    """

    state: np.ndarray
    action: int
    n_step_return: float
    next_state: np.ndarray
    horizon: int
    terminal_kind: str = TERMINAL_NONE

    @property
    def is_terminal(self) -> bool:
        return self.terminal_kind != TERMINAL_NONE


def grover_apply(q: QubitPriority, phi1: float, phi2: float) -> QubitPriority:
    """One Grover iteration with flexible phases on a single qubit.

    Implements the closed form of the two-reflection product: with
    Q = (1 - e^{j phi2}) [1 - (1 - e^{j phi1}) |alpha|^2], the amplitudes
    map to alpha' = (Q - e^{j phi1}) alpha and beta' = (Q - 1) beta. The
    operator is unitary, so normalization is preserved.
    """
    norm = abs(q.alpha) ** 2 + abs(q.beta) ** 2
    if abs(norm - 1.0) > 1e-6:
        raise ValueError(f"qubit amplitudes not normalized: |a|^2+|b|^2 = {norm}")
    e1 = cmath.exp(1j * phi1)
    e2 = cmath.exp(1j * phi2)
    big_q = (1.0 - e2) * (1.0 - (1.0 - e1) * abs(q.alpha) ** 2)
    return QubitPriority((big_q - e1) * q.alpha, (big_q - 1.0) * q.beta)


def collapse_ratio_sq(phi1, phi2, alpha_sq):
    """Squared ratio of accept amplitudes after/before one Grover iteration.

    |R|^2 = |(1 - e^{j phi1} - e^{j phi2}) - (1 - e^{j phi1})(1 - e^{j phi2}) a|^2
    for a = |alpha|^2. Symmetric under swapping the phases and under
    (phi1, phi2) -> (2 pi - phi2, 2 pi - phi1). Accepts scalars or arrays.
    """
    e1 = np.exp(1j * np.asarray(phi1, dtype=float))
    e2 = np.exp(1j * np.asarray(phi2, dtype=float))
    a = np.asarray(alpha_sq, dtype=float)
    r = (1.0 - e1 - e2) - (1.0 - e1) * (1.0 - e2) * a
    out = np.abs(r) ** 2
    return float(out) if out.ndim == 0 else out


def amplification_phases(
    abs_delta: float,
    delta_max: float,
    rt: int,
    rt_max: int,
    te: int,
    te_max: int,
) -> tuple[float, float]:
    """Phase pair encoding priority and staleness of a replayed transition.

    phi1 = (pi/2) tanh(pi |delta| / delta_max) in [0, pi/2) grows with the
    TD error and sets the amplification step; phi2 in (pi/2, 3pi/2] grows
    with replay count and training progress and sets its direction
    (below pi amplifies the accept probability, above pi shrinks it).
    phi1 stays strictly below pi/2, so a prepared qubit always keeps a
    nonzero accept probability.
    """
    if delta_max <= 0:
        raise ValueError("delta_max must be positive")
    phi1 = math.pi / 2.0 * math.tanh(math.pi * abs_delta / delta_max)
    phi2 = (rt / max(rt_max, 1)) * (te / te_max) * math.pi + math.pi / 2.0
    return phi1, phi2


def quantum_prepare(
    abs_delta: float,
    delta_max: float,
    rt: int,
    rt_max: int,
    te: int,
    te_max: int,
) -> QubitPriority:
    """Reset to the uniform superposition, then rotate once by the Grover step."""
    phi1, phi2 = amplification_phases(abs_delta, delta_max, rt, rt_max, te, te_max)
    return grover_apply(uniform_state(), phi1, phi2)


@dataclass
class QierSlot:
    """View of one buffer slot: transition, qubit and replay count."""

    transition: Transition
    qubit: QubitPriority
    replay_count: int
    last_abs_delta: float


class QierBuffer:
    """Circular quantum-inspired replay buffer.

    Slots are overwritten FIFO; a write initializes the slot's qubit to
    the accept eigenstate and zeroes its replay count. `delta_max` starts
    at 1 and only grows, tracking the largest absolute TD error seen.
    Single-owner mutable state; not thread safe.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.transitions: list[Transition | None] = [None] * capacity
        self.alpha = np.zeros(capacity, dtype=complex)
        self.beta = np.zeros(capacity, dtype=complex)
        self.rt = np.zeros(capacity, dtype=np.int64)
        self.last_abs_delta = np.full(capacity, np.nan)
        self.write_index = 0
        self.full = False
        self.delta_max = 1.0

    def __len__(self) -> int:
        return self.capacity if self.full else self.write_index

    def ready(self) -> bool:
        return self.full

    def push(self, t: Transition) -> int:
        """Store (overwriting FIFO) and quantum-initialize the slot."""
        k = self.write_index
        self.transitions[k] = t
        self.alpha[k] = 1.0
        self.beta[k] = 0.0
        self.rt[k] = 0
        self.last_abs_delta[k] = np.nan
        self.write_index += 1
        if self.write_index >= self.capacity:
            self.full = True
            self.write_index = 0
        return k

    def p0(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2

    @property
    def rt_max(self) -> int:
        return max(int(self.rt.max()), 1)

    def prepare_sampled(self, k: int, abs_delta: float, te: int, te_max: int) -> None:
        """Post-replay bookkeeping for one sampled slot, in order:
        reset to uniform, bump replay count, refresh the running maxima,
        then apply the quantum preparation.
        """
        self.rt[k] += 1
        self.delta_max = max(self.delta_max, abs_delta)
        self.last_abs_delta[k] = abs_delta
        q = quantum_prepare(
            abs_delta, self.delta_max, int(self.rt[k]), self.rt_max, te, te_max
        )
        self.alpha[k] = q.alpha
        self.beta[k] = q.beta

    def slot(self, k: int) -> QierSlot:
        return QierSlot(
            transition=self.transitions[k],
            qubit=QubitPriority(complex(self.alpha[k]), complex(self.beta[k])),
            replay_count=int(self.rt[k]),
            last_abs_delta=float(self.last_abs_delta[k]),
        )

    def dump_csv(self, path) -> None:
        """Debug snapshot: slot, accept probability, replay count, last |delta|."""
        p0 = self.p0()
        with open(path, "w") as f:
            f.write("slot,p0,replay_count,last_abs_delta\n")
            for k in range(len(self)):
                f.write(
                    f"{k},{float(p0[k])!r},{int(self.rt[k])},"
                    f"{float(self.last_abs_delta[k])!r}\n"
                )


def measure_probs(buffer: QierBuffer) -> np.ndarray:
    """Sampling distribution from a non-destructive measurement of all qubits."""
    if not buffer.full:
        raise ValueError("measurement requires a fully occupied buffer")
    p0 = buffer.p0()
    total = p0.sum()
    if total <= 0.0:
        raise AssertionError("all accept probabilities vanished")
    return p0 / total


def sample_minibatch(
    buffer: QierBuffer, n_mb: int, rng: np.random.Generator
) -> np.ndarray:
    """Categorical draws (with replacement) from the measured distribution.

    The caller performs the per-draw replay bookkeeping via
    `prepare_sampled`, in draw order.
    """
    return rng.choice(buffer.capacity, size=n_mb, replace=True, p=measure_probs(buffer))


class UniformBuffer:
    """Plain circular experience buffer for the uniform-ER baseline."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self.transitions: list[Transition | None] = [None] * capacity
        self.write_index = 0
        self.full = False

    def __len__(self) -> int:
        return self.capacity if self.full else self.write_index

    def ready(self) -> bool:
        return self.full

    def push(self, t: Transition) -> int:
        k = self.write_index
        self.transitions[k] = t
        self.write_index += 1
        if self.write_index >= self.capacity:
            self.full = True
            self.write_index = 0
        return k


def uniform_sample(buffer, n_mb: int, rng: np.random.Generator) -> np.ndarray:
    """I.i.d. uniform slot indices with replacement."""
    if not buffer.ready():
        raise ValueError("sampling requires a fully occupied buffer")
    return rng.integers(0, buffer.capacity, size=n_mb)


@dataclass(frozen=True)
class PerParams:
    """Proportional prioritization settings."""

    alpha_per: float
    beta_per: float
    xi: float

    def __post_init__(self):
        if self.alpha_per < 0:
            raise ValueError("alpha_per must be >= 0")
        if not 0 < self.beta_per <= 1:
            raise ValueError("beta_per must lie in (0, 1]")
        if self.xi <= 0:
            raise ValueError("xi must be positive")


def per_probs(priorities: np.ndarray, params: PerParams) -> np.ndarray:
    """p(x) = (|delta(x)| + xi)^alpha, normalized."""
    scaled = np.power(np.asarray(priorities, dtype=float) + params.xi, params.alpha_per)
    return scaled / scaled.sum()


def per_is_weights(probs: np.ndarray, capacity: int, beta_per: float) -> np.ndarray:
    """Importance-sampling weights (C p)^(-beta), normalized by the largest weight."""
    w = np.power(capacity * np.asarray(probs, dtype=float), -beta_per)
    return w / w.max()


class PerBuffer(UniformBuffer):
    """Proportional-prioritized baseline buffer.

    Newly stored transitions take the largest priority seen so far, so
    everything is replayed at least once; sampled slots are re-prioritized
    with their fresh absolute TD errors.
    """

    def __init__(self, capacity: int, params: PerParams):
        super().__init__(capacity)
        self.params = params
        self.priorities = np.zeros(capacity)
        self.max_priority = 1.0

    def push(self, t: Transition) -> int:
        k = super().push(t)
        self.priorities[k] = self.max_priority
        return k

    def sample(
        self, n_mb: int, rng: np.random.Generator, beta_per: float
    ) -> tuple[np.ndarray, np.ndarray]:
        if not self.ready():
            raise ValueError("sampling requires a fully occupied buffer")
        probs = per_probs(self.priorities, self.params)
        idx = rng.choice(self.capacity, size=n_mb, replace=True, p=probs)
        weights = per_is_weights(probs, self.capacity, beta_per)
        return idx, weights[idx]

    def update_priorities(self, indices, abs_deltas) -> None:
        for k, d in zip(indices, abs_deltas):
            self.priorities[k] = float(d)
            self.max_priority = max(self.max_priority, float(d))


def _dummy_transition(value: float = 0.0) -> Transition:
    state = np.zeros(2)
    return Transition(state, 0, value, state, 1)


def self_test(seed: int = 0) -> list[tuple[str, bool, str]]:
    """Quick statistical health checks of the three buffers.

    Returns (name, passed, detail) rows; used by the CLI self-test
    command. Uses chi-square goodness-of-fit at significance 0.001.
    """
    from scipy import stats

    rng = np.random.default_rng(seed)
    results = []

    # Grover normalization sweep.
    worst = 0.0
    for _ in range(2000):
        x = rng.normal(size=4)
        x /= np.linalg.norm(x)
        q = QubitPriority(complex(x[0], x[1]), complex(x[2], x[3]))
        out = grover_apply(q, rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi))
        worst = max(worst, abs(abs(out.alpha) ** 2 + abs(out.beta) ** 2 - 1.0))
    results.append(("grover-normalization", worst < 1e-10, f"max drift {worst:.2e}"))

    # Quantum buffer: empirical sampling frequencies match the measured probs.
    buf = QierBuffer(16)
    for _ in range(16):
        buf.push(_dummy_transition())
    for k in range(8):
        buf.prepare_sampled(k, abs_delta=float(k), te=1, te_max=10)
    probs = measure_probs(buf)
    draws = sample_minibatch(buf, 100_000, rng)
    counts = np.bincount(draws, minlength=buf.capacity)
    chi = stats.chisquare(counts, f_exp=probs * counts.sum())
    results.append(
        ("qier-sampling-chisquare", chi.pvalue > 0.001, f"p-value {chi.pvalue:.4f}")
    )

    # Uniform buffer uniformity.
    ubuf = UniformBuffer(16)
    for _ in range(16):
        ubuf.push(_dummy_transition())
    draws = uniform_sample(ubuf, 100_000, rng)
    counts = np.bincount(draws, minlength=ubuf.capacity)
    chi = stats.chisquare(counts)
    results.append(
        ("uniform-sampling-chisquare", chi.pvalue > 0.001, f"p-value {chi.pvalue:.4f}")
    )

    # PER with alpha 0 degenerates to uniform.
    pbuf = PerBuffer(16, PerParams(alpha_per=0.0, beta_per=1.0, xi=0.01))
    for v in range(16):
        pbuf.push(_dummy_transition(float(v)))
    pbuf.update_priorities(range(16), rng.uniform(0, 5, size=16))
    idx, weights = pbuf.sample(100_000, rng, beta_per=1.0)
    counts = np.bincount(idx, minlength=pbuf.capacity)
    chi = stats.chisquare(counts)
    ok = chi.pvalue > 0.001 and np.allclose(weights, 1.0)
    results.append(
        ("per-alpha0-uniform", ok, f"p-value {chi.pvalue:.4f}, max weight dev "
         f"{np.abs(weights - 1).max():.2e}")
    )
    return results
