"""Training orchestration, policy evaluation, baselines and run exports.

One training run executes the per-step loop faithfully: epsilon-greedy
action, environment step, replay training (only once the buffer is full,
once per environment step), sliding-window assembly into multi-step
transitions, buffer writes with priority initialization, per-episode
epsilon decay and periodic target-network synchronization. All stochastic
subsystems draw from named streams fanned out from the run's seeds, so a
run is reproducible byte for byte.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from . import agent, mdp, radio, replay
from .agent import AdamState, NetworkParams, NStepAssembler
from .config import RunConfig, config_fingerprint, echo_config, stream
from .mdp import TERMINAL_NONE, TERMINAL_STEP_CAP
from .replay import PerBuffer, PerParams, QierBuffer, UniformBuffer
from .world import World, build_world, mdp_config


@dataclass
class EpisodeLog:
    """Per-episode record.

    `steps` counts penalized (non-terminal) transitions and `eod_hat`
    integrates their measured outage fractions, so with a unit discount
    the return equals -objective plus the terminal bonus/penalty.
    """

    episode: int
    start: np.ndarray
    steps: int
    ret: float
    eod_hat: float
    objective: float
    terminal: str
    trajectory: list = field(default_factory=list, repr=False)


@dataclass
class TrainResult:
    params: NetworkParams
    episodes: list[EpisodeLog]
    out_dir: str | None = None
    checkpoint_path: str | None = None


def _make_buffer(cfg: RunConfig):
    if cfg.variant == "qier":
        return QierBuffer(cfg.buffer_capacity)
    if cfg.variant == "er":
        return UniformBuffer(cfg.buffer_capacity)
    return PerBuffer(
        cfg.buffer_capacity,
        PerParams(alpha_per=cfg.per_alpha, beta_per=cfg.per_beta0, xi=cfg.per_xi),
    )


def _per_beta(cfg: RunConfig, te: int) -> float:
    """Linear anneal of the IS correction from beta0 to 1 over the run."""
    if cfg.episodes <= 1:
        return 1.0
    frac = (te - 1) / (cfg.episodes - 1)
    return min(1.0, cfg.per_beta0 + (1.0 - cfg.per_beta0) * frac)


def _train_step(cfg, buffer, online, target, adam, scale, rng, te):
    if cfg.variant == "qier":
        idx = replay.sample_minibatch(buffer, cfg.minibatch, rng)
        weights = None
    elif cfg.variant == "er":
        idx = replay.uniform_sample(buffer, cfg.minibatch, rng)
        weights = None
    else:
        idx, weights = buffer.sample(cfg.minibatch, rng, _per_beta(cfg, te))
    batch = [buffer.transitions[i] for i in idx]
    deltas = agent.train_minibatch(
        online, target, batch, adam, cfg.gamma, scale, is_weights=weights
    )
    if cfg.variant == "qier":
        for k, d in zip(idx, deltas):
            buffer.prepare_sampled(int(k), float(d), te, cfg.episodes)
    elif cfg.variant == "per":
        buffer.update_priorities(idx, deltas)


def run_training(cfg: RunConfig, out_dir: str | None = None, progress: bool = False) -> TrainResult:
    """Train one agent with the configured replay variant.

    Writes the resolved config, per-episode CSV, smoothed-returns CSV and
    the final checkpoint into `out_dir` when given. Raises
    DivergenceError if the loss or parameters stop being finite.
    """
    cfg.validate()
    world = build_world(cfg)
    mcfg = mdp_config(cfg)
    scale = world.airspace.extent[:2]
    dtype = np.float32 if cfg.net_dtype == "float32" else np.float64

    online = agent.init_params(2, tuple(cfg.hidden_sizes), 8, stream(cfg.seed, "init"), dtype)
    target = online.copy()
    adam = AdamState(
        lr=cfg.learning_rate, beta1=cfg.adam_beta1, beta2=cfg.adam_beta2, eps=cfg.adam_eps
    )
    buffer = _make_buffer(cfg)

    starts_rng = stream(cfg.seed, "starts")
    explore_rng = stream(cfg.seed, "exploration")
    fading_rng = stream(cfg.seed, "fading")
    replay_rng = stream(cfg.seed, "replay")

    epsilon = cfg.epsilon_init
    logs: list[EpisodeLog] = []
    for te in range(1, cfg.episodes + 1):
        state = mdp.sample_initial_state(starts_rng, mcfg, world)
        start = state.copy()
        assembler = NStepAssembler(cfg.gamma, cfg.n_ms)
        ep_return = 0.0
        tops: list[float] = []
        terminal = TERMINAL_STEP_CAP
        for _ in range(cfg.step_cap):
            q = agent.forward(online, state[:2] / scale)
            action = agent.act(q, epsilon, explore_rng)
            out = mdp.step(state, action, world, mcfg, fading_rng)
            if buffer.ready():
                _train_step(cfg, buffer, online, target, adam, scale, replay_rng, te)
            emitted = assembler.push(
                state[:2].copy(), action, out.reward, out.next_state[:2].copy(), out.terminal
            )
            for tr in emitted:
                buffer.push(tr)
            ep_return += out.reward
            if out.terminal == TERMINAL_NONE:
                tops.append(out.top)
            state = out.next_state
            if out.terminal != TERMINAL_NONE:
                terminal = out.terminal
                break
        for tr in assembler.flush(terminal):
            buffer.push(tr)

        eod_hat = radio.eod(tops, cfg.slot_seconds)
        steps = len(tops)
        logs.append(
            EpisodeLog(
                episode=te,
                start=start,
                steps=steps,
                ret=ep_return,
                eod_hat=eod_hat,
                objective=mdp.episode_objective(steps, eod_hat, cfg.tau),
                terminal=terminal,
            )
        )
        epsilon = max(cfg.epsilon_floor, epsilon * cfg.epsilon_decay)
        if te % cfg.target_sync_episodes == 0:
            agent.sync_target(online, target)
        online.check_finite()
        if progress and te % 25 == 0:
            window = [l.ret for l in logs[-25:]]
            print(
                f"episode {te:5d}  eps {epsilon:.3f}  return {logs[-1].ret:10.1f}  "
                f"mean25 {float(np.mean(window)):10.1f}  terminal {terminal}"
            )

    result = TrainResult(params=online, episodes=logs)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        echo_config(cfg, os.path.join(out_dir, "config_resolved.txt"))
        write_episodes_csv(logs, os.path.join(out_dir, "episodes.csv"))
        write_returns_ma_csv(
            {cfg.variant: logs}, os.path.join(out_dir, "returns_ma.csv"), cfg.ma_window
        )
        ckpt = os.path.join(out_dir, "checkpoint_final.npz")
        agent.save_checkpoint(online, ckpt, fingerprint=config_fingerprint(cfg))
        if cfg.variant == "qier":
            buffer.dump_csv(os.path.join(out_dir, "buffer_state.csv"))
        result.out_dir = out_dir
        result.checkpoint_path = ckpt
    return result


def moving_average(series, window: int = 200) -> np.ndarray:
    """Trailing mean; the first window-1 entries average the available prefix."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(series, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(len(x))
    lo = np.maximum(0, idx - window + 1)
    return (csum[idx + 1] - csum[lo]) / (idx + 1 - lo)


def _rollout(
    policy_action,
    start: np.ndarray,
    world: World,
    mcfg,
    cfg: RunConfig,
    rng: np.random.Generator,
    episode: int,
) -> EpisodeLog:
    """Run one instrumented episode under an arbitrary state->action policy."""
    state = start.copy()
    rows = [(0, float(state[0]), float(state[1]), float(state[2]), "", 0.0, 0.0)]
    ep_return = 0.0
    tops: list[float] = []
    terminal = TERMINAL_STEP_CAP
    for n in range(1, cfg.step_cap + 1):
        action = policy_action(state)
        out = mdp.step(state, action, world, mcfg, rng)
        ep_return += out.reward
        rows.append(
            (
                n,
                float(out.next_state[0]),
                float(out.next_state[1]),
                float(out.next_state[2]),
                action,
                out.reward,
                out.top,
            )
        )
        if out.terminal == TERMINAL_NONE:
            tops.append(out.top)
        state = out.next_state
        if out.terminal != TERMINAL_NONE:
            terminal = out.terminal
            break
    eod_hat = radio.eod(tops, cfg.slot_seconds)
    return EpisodeLog(
        episode=episode,
        start=start,
        steps=len(tops),
        ret=ep_return,
        eod_hat=eod_hat,
        objective=mdp.episode_objective(len(tops), eod_hat, cfg.tau),
        terminal=terminal,
        trajectory=rows,
    )


def evaluate_policy(
    params: NetworkParams,
    starts: list[np.ndarray],
    cfg: RunConfig,
    world: World | None = None,
    out_dir: str | None = None,
) -> list[EpisodeLog]:
    """Greedy rollouts from the given starts, with trajectory export.

    Fading draws come from per-start streams derived from the environment
    seed, so evaluations are reproducible and comparable across runs.
    """
    world = world or build_world(cfg)
    mcfg = mdp_config(cfg)
    scale = world.airspace.extent[:2]

    def policy(state: np.ndarray) -> int:
        return int(np.argmax(agent.forward(params, state[:2] / scale)))

    logs = []
    for i, start in enumerate(starts):
        rng = stream(cfg.env_seed, "eval_fading", i)
        logs.append(_rollout(policy, np.asarray(start, dtype=float), world, mcfg, cfg, rng, i))
    if out_dir is not None:
        traj_dir = os.path.join(out_dir, "trajectories")
        os.makedirs(traj_dir, exist_ok=True)
        for log in logs:
            write_trajectory_csv(log, os.path.join(traj_dir, f"eval_{log.episode:03d}.csv"))
        write_episodes_csv(logs, os.path.join(out_dir, "eval_episodes.csv"))
    return logs


def straight_line_metrics(
    start: np.ndarray,
    cfg: RunConfig,
    world: World | None = None,
    episode: int = 0,
) -> EpisodeLog:
    """Non-learning reference: always fly the direction closest to the goal."""
    world = world or build_world(cfg)
    mcfg = mdp_config(cfg)
    vectors = mdp.action_vectors()
    rng = stream(cfg.env_seed, "straight_fading", episode)

    def policy(state: np.ndarray) -> int:
        to_goal = mcfg.destination - state
        return int(np.argmax(vectors @ to_goal))

    return _rollout(policy, np.asarray(start, dtype=float), world, mcfg, cfg, rng, episode)


def aggregate_slots(logs: list[EpisodeLog], boundaries: list[tuple], dt: float) -> list[dict]:
    """Mean time cost (seconds), EOD and objective per episode slot.

    `boundaries` holds inclusive 1-based (first, last) episode pairs.
    """
    rows = []
    for first, last in boundaries:
        chunk = [l for l in logs if first <= l.episode <= last]
        if not chunk:
            raise ValueError(f"no episodes cover slot {first}-{last}")
        rows.append(
            {
                "slot_first": first,
                "slot_last": last,
                "episodes": len(chunk),
                "mean_time_cost_s": float(np.mean([l.steps * dt for l in chunk])),
                "mean_eod_s": float(np.mean([l.eod_hat for l in chunk])),
                "mean_objective": float(np.mean([l.objective for l in chunk])),
            }
        )
    return rows


def _fmt(x) -> str:
    return repr(float(x))


def write_episodes_csv(logs: list[EpisodeLog], path) -> None:
    with open(path, "w") as f:
        f.write("episode,start_x,start_y,steps,return,eod_hat,objective,terminal\n")
        for l in logs:
            f.write(
                f"{l.episode},{_fmt(l.start[0])},{_fmt(l.start[1])},{l.steps},"
                f"{_fmt(l.ret)},{_fmt(l.eod_hat)},{_fmt(l.objective)},{l.terminal}\n"
            )


def write_returns_ma_csv(logs_by_variant: dict, path, window: int) -> None:
    with open(path, "w") as f:
        f.write("variant,episode,return,return_ma\n")
        for variant, logs in logs_by_variant.items():
            ma = moving_average([l.ret for l in logs], window)
            for l, m in zip(logs, ma):
                f.write(f"{variant},{l.episode},{_fmt(l.ret)},{_fmt(m)}\n")


def write_trajectory_csv(log: EpisodeLog, path) -> None:
    with open(path, "w") as f:
        f.write("step,x,y,z,action,reward,top_estimate\n")
        for step, x, y, z, action, reward, top in log.trajectory:
            f.write(
                f"{step},{_fmt(x)},{_fmt(y)},{_fmt(z)},{action},"
                f"{_fmt(reward)},{_fmt(top)}\n"
            )


def write_slot_table_csv(rows: list[dict], path) -> None:
    with open(path, "w") as f:
        f.write("slot_first,slot_last,episodes,mean_time_cost_s,mean_eod_s,mean_objective\n")
        for r in rows:
            f.write(
                f"{r['slot_first']},{r['slot_last']},{r['episodes']},"
                f"{_fmt(r['mean_time_cost_s'])},{_fmt(r['mean_eod_s'])},"
                f"{_fmt(r['mean_objective'])}\n"
            )
