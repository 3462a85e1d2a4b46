"""Episode orchestration, training runs, and evaluation.

The per-step contract everywhere is: observe every agent, compute report
flags, gather them along the team topology, let both teams pick actions,
then advance the environment.  Reports computed at step t are consumed at
step t (zero-delay delivery).
"""

from __future__ import annotations

import copy
import csv
import os
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from . import comms, env, sensing
from .env import (
    Action,
    DEFAULT_REWARDS,
    GameConfig,
    GameStatus,
    RewardSpec,
)
from .policies import (
    METHODS,
    build_team_policy,
    report_length_for,
    team_agent_ids,
)
from .records import EpisodeRecord, StepEntry, topology_dict
from .replay import AgentEpisode, SequenceReplay, TeamEpisode, TransitionReplay
from .training import (
    AdamState,
    EpsilonSchedule,
    LrSchedule,
    NonFiniteLoss,
    TrainConfig,
    adam_init,
    apply_update,
    config_hash,
    epsilon_at,
    joint_td_loss,
    load_checkpoint,
    loss_and_grads,
    lr_at,
    recurrent_td_loss,
    restore_net,
    save_checkpoint,
)


@dataclass
class StepData:
    """Everything one step produced; handed to hooks in order."""

    state_before: "env.GameState"
    obs: dict
    flags: dict
    reports: dict
    actions: dict
    state_after: "env.GameState"
    rewards: dict
    status: GameStatus


def _policy_rng(seed: int, tag: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, tag])))


def _team_reports(policy, team: str, n: int, flags: dict) -> dict:
    if policy.topology is None:
        return {}
    ids = team_agent_ids(team, n)
    arr = np.array([flags[a] for a in ids], dtype=np.uint8)
    return {a: comms.gather(policy.topology, arr, i) for i, a in enumerate(ids)}


def run_episode(
    config: GameConfig,
    pursuer_policy,
    evader_policy,
    seed: int,
    *,
    rewards: RewardSpec = DEFAULT_REWARDS,
    epsilon_pursuer: float = 0.0,
    epsilon_evader: float = 0.0,
    record: bool = False,
    step_hook=None,
):
    """Play one episode to termination.

    Returns (status, final per-agent rewards, EpisodeRecord or None).
    Policy randomness is derived from the episode seed, so a (config,
    seed, policies) triple is fully reproducible.
    """
    state = env.new_game(config, seed)
    pursuer_policy.reset(state, _policy_rng(seed, 1))
    evader_policy.reset(state, _policy_rng(seed, 2))

    rec = None
    if record:
        rec = EpisodeRecord(
            config=config,
            seed=seed,
            pursuer_topology=topology_dict(pursuer_policy.topology),
            evader_topology=topology_dict(evader_policy.topology),
        )

    final_rewards = {a: 0.0 for a in state.agent_ids()}
    status = state.status
    while state.status is GameStatus.ONGOING:
        obs = {
            a: sensing.observe(state, a, config.sense_length, config.sense_width)
            for a in state.agent_ids()
        }
        flags = {a: comms.report_flag(obs[a]) for a in state.agent_ids()}
        reports = {}
        reports.update(
            _team_reports(pursuer_policy, "pursuer", state.n_pursuers, flags)
        )
        reports.update(
            _team_reports(evader_policy, "evader", state.n_evaders, flags)
        )
        actions = pursuer_policy.act(state, obs, reports, epsilon_pursuer)
        actions.update(evader_policy.act(state, obs, reports, epsilon_evader))
        new_state, step_rewards, status = env.step(
            state, actions, max_steps=config.max_steps, rewards=rewards
        )
        data = StepData(
            state_before=state,
            obs=obs,
            flags=flags,
            reports=reports,
            actions=actions,
            state_after=new_state,
            rewards=step_rewards,
            status=status,
        )
        if step_hook is not None:
            step_hook(data)
        if rec is not None:
            full_actions = {
                a: int(actions.get(a, Action.STAY)) for a in state.agent_ids()
            }
            rec.steps.append(
                StepEntry(
                    step=new_state.step,
                    pursuers=list(new_state.pursuer_positions),
                    evaders=list(new_state.evader_positions),
                    captured=list(new_state.evader_captured),
                    actions=full_actions,
                    flags={a: int(v) for a, v in flags.items()},
                    reports={a: [int(x) for x in v] for a, v in reports.items()},
                    status=status.value,
                )
            )
        state = new_state
        final_rewards = step_rewards
    if rec is not None:
        rec.terminal_rewards = dict(final_rewards)
    return status, final_rewards, rec


# ------------------------------------------------------------- evaluation

@dataclass
class EvalReport:
    episodes: int
    avg_pursuer_reward: float
    avg_evader_reward: float
    wins: dict[str, int]
    complete_win_rate: float

    def __post_init__(self):
        assert sum(self.wins.values()) == self.episodes
        assert -1.0 <= self.avg_pursuer_reward <= 1.0
        assert -1.0 <= self.avg_evader_reward <= 1.0

    def to_dict(self) -> dict:
        return asdict(self)


def evaluate(
    config: GameConfig,
    pursuer_policy,
    evader_policy,
    episodes: int,
    seed: int,
    rewards: RewardSpec = DEFAULT_REWARDS,
) -> EvalReport:
    """Greedy (epsilon = 0) evaluation over ``episodes`` seeded episodes.

    Episode k uses seed ``seed + k`` so different methods can be compared
    on paired layouts.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    wins = {s.value: 0 for s in GameStatus if s is not GameStatus.ONGOING}
    p_sum = 0.0
    e_sum = 0.0
    for k in range(episodes):
        status, final_rewards, _ = run_episode(
            config, pursuer_policy, evader_policy, seed + k, rewards=rewards
        )
        wins[status.value] += 1
        p_rewards = [final_rewards[f"p{i}"] for i in range(config.n_pursuers)]
        p_sum += sum(p_rewards) / len(p_rewards)
        if config.n_evaders:
            e_rewards = [final_rewards[f"e{i}"] for i in range(config.n_evaders)]
            e_sum += sum(e_rewards) / len(e_rewards)
    complete = wins[GameStatus.PURSUERS_WIN_CAPTURE_ALL.value]
    return EvalReport(
        episodes=episodes,
        avg_pursuer_reward=p_sum / episodes,
        avg_evader_reward=e_sum / episodes,
        wins=wins,
        complete_win_rate=complete / episodes,
    )


# --------------------------------------------------------------- training

@dataclass
class RunConfig:
    scenario: str  # "PvE", e.g. "2v2"
    team: str  # which side learns: "pursuers" or "evaders"
    method: str
    game: GameConfig
    train: TrainConfig
    out_dir: str
    seed: int

    def __post_init__(self):
        if self.team not in ("pursuers", "evaders"):
            raise env.ConfigError(f"team must be pursuers or evaders, got {self.team}")
        if self.method not in METHODS:
            raise env.ConfigError(f"unknown method {self.method!r}")
        n = self.game.n_pursuers if self.team == "pursuers" else self.game.n_evaders
        if self.method == "mapel-rsr" and n < 2:
            raise env.ConfigError("mapel-rsr needs a team of at least 2")

    def checkpoint_meta(self) -> dict:
        return {
            "scenario": self.scenario,
            "team": self.team,
            "method": self.method,
            "game_config": asdict(self.game),
            "train_config": asdict(self.train),
        }


def parse_scenario(text: str) -> tuple[int, int]:
    try:
        p, e = text.lower().split("v")
        return int(p), int(e)
    except ValueError as exc:
        raise env.ConfigError(f"bad scenario {text!r}, expected like '2v2'") from exc


METRICS_HEADER = [
    "epoch",
    "episodes",
    "env_steps",
    "updates",
    "avg_pursuer_reward",
    "avg_evader_reward",
    "evaders_win_target",
    "pursuers_win_target",
    "pursuers_win_capture_all",
    "draws",
    "mean_loss",
    "epsilon",
    "lr",
]


class _LearnerState:
    """Online/target nets plus the replay and optimizer for one method."""

    def __init__(self, run: RunConfig):
        game, tc = run.game, run.train
        team = "pursuer" if run.team == "pursuers" else "evader"
        n = game.n_pursuers if team == "pursuer" else game.n_evaders
        self.team = team
        self.n_agents = n
        self.method = run.method
        self.policy = build_team_policy(
            run.method, team, n, game,
            conv_channels=tc.conv_channels,
            hidden_size=tc.hidden_size,
            history=tc.history_length,
        )
        self.net = self.policy.net
        self.target = copy.deepcopy(self.net)
        self.opt = adam_init(list(self.net.parameters()))
        self.recurrent = run.method.startswith("mapel")
        if self.recurrent:
            self.replay = SequenceReplay(tc.replay_episodes)
        else:
            self.replay = TransitionReplay(tc.replay_transitions, tc.history_length)
        self.action_index = {a: i for i, a in enumerate(game.action_set())}

    def warm(self, batch_size: int) -> bool:
        if self.recurrent:
            return self.replay.total_steps >= batch_size
        return len(self.replay) >= batch_size

    def update(self, rng: np.random.Generator, tc: TrainConfig, lr: float) -> float:
        if self.recurrent:
            batch = self.replay.sample_windows(rng, tc.batch_size, tc.bptt_length)
            loss = recurrent_td_loss(self.net, self.target, batch, tc.gamma)
        else:
            batch = self.replay.sample(rng, tc.batch_size)
            loss = joint_td_loss(self.net, self.target, batch, tc.gamma)
        value, grads = loss_and_grads(self.net, loss)
        params = list(self.net.parameters())
        new_params, self.opt = apply_update(params, grads, self.opt, lr)
        with torch.no_grad():
            for p, q in zip(params, new_params):
                p.copy_(q)
        return value

    def sync_target(self) -> None:
        self.target.load_state_dict(self.net.state_dict())


class _EpisodeCollector:
    """Accumulates one episode's learner-side transitions via the step hook."""

    def __init__(self, learner: _LearnerState, config: GameConfig):
        self.learner = learner
        self.config = config
        self.ids = team_agent_ids(learner.team, learner.n_agents)
        self.obs: list[np.ndarray] = []
        self.reports: list[np.ndarray] = []
        self.actions: list[list[int]] = []
        self.rewards: list[list[float]] = []
        self.joint: list[int] = []
        self.last_state = None

    def on_step(self, data: StepData) -> None:
        self.last_state = data.state_after
        L = self.learner
        frame = np.stack([data.obs[a].planes for a in self.ids])
        self.obs.append(frame)
        if L.recurrent:
            R = report_length_for(L.method, L.n_agents)
            reps = np.zeros((L.n_agents, R), dtype=np.uint8)
            for i, a in enumerate(self.ids):
                if a in data.reports:
                    reps[i] = data.reports[a]
            self.reports.append(reps)
        acts = [
            int(L.action_index.get(data.actions.get(a, Action.STAY), 0))
            for a in self.ids
        ]
        self.actions.append(acts)
        self.rewards.append([float(data.rewards[a]) for a in self.ids])
        if not L.recurrent:
            self.joint.append(
                sum(
                    a * len(L.action_index) ** (L.n_agents - 1 - i)
                    for i, a in enumerate(acts)
                )
            )

    def finish(self) -> None:
        L = self.learner
        cfg = self.config
        final_state = self.last_state
        final_obs = np.stack(
            [
                sensing.observe(final_state, a, cfg.sense_length, cfg.sense_width).planes
                for a in self.ids
            ]
        )
        obs_seq = np.stack(self.obs + [final_obs])  # (T+1, n, 5, M, N)
        T = len(self.actions)
        if L.recurrent:
            flags = [
                comms.report_flag(
                    sensing.observe(final_state, a, cfg.sense_length, cfg.sense_width)
                )
                for a in team_agent_ids(L.team, L.n_agents)
            ]
            topo = L.policy.topology
            final_reports = np.stack(
                [comms.gather(topo, flags, i) for i in range(L.n_agents)]
            )
            reports_seq = np.stack(self.reports + [final_reports])
            L.replay.add(
                AgentEpisode(
                    obs=obs_seq.transpose(1, 0, 2, 3, 4).astype(np.uint8),
                    reports=reports_seq.transpose(1, 0, 2).astype(np.uint8),
                    actions=np.array(self.actions, dtype=np.int8).T,
                    rewards=np.array(self.rewards, dtype=np.float32).T,
                )
            )
        else:
            stacked = obs_seq.reshape(T + 1, -1, cfg.rows, cfg.cols)
            L.replay.add(
                TeamEpisode(
                    obs=stacked.astype(np.uint8),
                    joint_actions=np.array(self.joint, dtype=np.int64),
                    rewards=np.array(
                        [r[0] for r in self.rewards], dtype=np.float32
                    ),
                )
            )


def train(run: RunConfig):
    """Full training loop; returns (final checkpoint path, metrics rows).

    Per epoch: roll episodes with the scheduled epsilon, append them to
    replay, and take one gradient update every ``update_period``
    environment steps once the buffer holds a batch.  One metrics row per
    epoch; checkpoints at start, every 10 epochs, and at the end.
    """
    os.makedirs(run.out_dir, exist_ok=True)
    torch.manual_seed(run.seed)
    tc = run.train
    learner = _LearnerState(run)
    naive_side = "evader" if run.team == "pursuers" else "pursuer"
    n_naive = (
        run.game.n_evaders if naive_side == "evader" else run.game.n_pursuers
    )
    opponent = build_team_policy("naive", naive_side, n_naive, run.game)
    if run.team == "pursuers":
        pursuer_policy, evader_policy = learner.policy, opponent
    else:
        pursuer_policy, evader_policy = opponent, learner.policy

    total_episodes = tc.epochs * tc.episodes_per_epoch
    eps_sched = EpsilonSchedule(
        tc.epsilon_start, tc.epsilon_end, max(1, total_episodes // 2)
    )
    lr_sched = LrSchedule(tc.learning_rate, tc.lr_decay_epochs, tc.lr_decay_factor)
    train_rng = _policy_rng(run.seed, 999)

    meta = run.checkpoint_meta()
    ckpt_path = os.path.join(run.out_dir, "checkpoint_init.mapel")
    save_checkpoint(ckpt_path, learner.net, learner.opt, meta)
    metrics_path = os.path.join(run.out_dir, "metrics.csv")
    rows = []

    env_steps = 0
    updates = 0
    global_episode = 0
    with open(metrics_path, "w", newline="") as mf:
        writer = csv.writer(mf)
        writer.writerow(METRICS_HEADER)
        for epoch in range(tc.epochs):
            lr = lr_at(epoch, lr_sched)
            epoch_losses: list[float] = []
            epoch_wins = {s.value: 0 for s in GameStatus if s is not GameStatus.ONGOING}
            p_sum = e_sum = 0.0
            epsilon = epsilon_at(global_episode, eps_sched)
            for _ in range(tc.episodes_per_epoch):
                epsilon = epsilon_at(global_episode, eps_sched)
                collector = _EpisodeCollector(learner, run.game)
                steps_seen = 0

                def hook(data: StepData):
                    nonlocal env_steps, updates, steps_seen
                    collector.on_step(data)
                    env_steps += 1
                    steps_seen += 1
                    if (
                        env_steps % tc.update_period == 0
                        and learner.warm(tc.batch_size)
                    ):
                        try:
                            epoch_losses.append(learner.update(train_rng, tc, lr))
                        except NonFiniteLoss:
                            raise
                        updates += 1
                        if updates % tc.target_sync_updates == 0:
                            learner.sync_target()

                eps_p = epsilon if run.team == "pursuers" else 0.0
                eps_e = epsilon if run.team == "evaders" else 0.0
                status, final_rewards, _ = run_episode(
                    run.game,
                    pursuer_policy,
                    evader_policy,
                    run.seed + global_episode,
                    epsilon_pursuer=eps_p,
                    epsilon_evader=eps_e,
                    step_hook=hook,
                )
                collector.finish()
                epoch_wins[status.value] += 1
                p_sum += sum(
                    final_rewards[f"p{i}"] for i in range(run.game.n_pursuers)
                ) / run.game.n_pursuers
                if run.game.n_evaders:
                    e_sum += sum(
                        final_rewards[f"e{i}"] for i in range(run.game.n_evaders)
                    ) / run.game.n_evaders
                global_episode += 1

            mean_loss = (
                sum(epoch_losses) / len(epoch_losses) if epoch_losses else float("nan")
            )
            row = [
                epoch,
                global_episode,
                env_steps,
                updates,
                repr(p_sum / tc.episodes_per_epoch),
                repr(e_sum / tc.episodes_per_epoch),
                epoch_wins[GameStatus.EVADERS_WIN_TARGET.value],
                epoch_wins[GameStatus.PURSUERS_WIN_TARGET.value],
                epoch_wins[GameStatus.PURSUERS_WIN_CAPTURE_ALL.value],
                epoch_wins[GameStatus.DRAW.value],
                repr(mean_loss),
                repr(epsilon),
                repr(lr),
            ]
            rows.append(row)
            writer.writerow(row)
            mf.flush()
            if (epoch + 1) % 10 == 0:
                save_checkpoint(
                    os.path.join(run.out_dir, f"checkpoint_epoch{epoch + 1:04d}.mapel"),
                    learner.net,
                    learner.opt,
                    meta,
                )
    final_path = os.path.join(run.out_dir, "checkpoint_final.mapel")
    save_checkpoint(final_path, learner.net, learner.opt, meta)
    return final_path, rows


def load_policy_from_checkpoint(path):
    """Rebuild the trained team policy recorded in a checkpoint."""
    meta, tensors, _, _ = load_checkpoint(path)
    game_fields = dict(meta["game_config"])
    game_fields["obstacle_size_range"] = tuple(game_fields["obstacle_size_range"])
    game = GameConfig(**game_fields)
    tc_fields = dict(meta["train_config"])
    tc_fields["conv_channels"] = tuple(tc_fields["conv_channels"])
    tc = TrainConfig(**tc_fields)
    team = "pursuer" if meta["team"] == "pursuers" else "evader"
    n = game.n_pursuers if team == "pursuer" else game.n_evaders
    policy = build_team_policy(
        meta["method"], team, n, game,
        conv_channels=tc.conv_channels,
        hidden_size=tc.hidden_size,
        history=tc.history_length,
    )
    restore_net(policy.net, tensors)
    return policy, game, meta
