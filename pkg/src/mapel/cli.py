"""Command-line surface: train, eval, replay.

Exit codes: 0 success, 2 configuration error, 3 runtime divergence
(non-finite loss during training).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .config_io import load_configs
from .env import ConfigError
from .harness import (
    RunConfig,
    evaluate,
    load_policy_from_checkpoint,
    parse_scenario,
    run_episode,
    train,
)
from .policies import build_team_policy
from .records import CorruptRecord, load_record
from .render import render
from .training import CheckpointVersionMismatch, NonFiniteLoss


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mapel",
        description="Pursuit-evasion grid game: train, evaluate, replay.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train one team against naive opponents")
    p_train.add_argument("--scenario", required=True, help="team sizes, e.g. 2v2")
    p_train.add_argument("--team", required=True, choices=["pursuers", "evaders"])
    p_train.add_argument(
        "--method", required=True,
        choices=["naive", "ma-dqn", "mapel-p2psr", "mapel-rsr"],
    )
    p_train.add_argument("--config", default=None, help="flat key = value file")
    p_train.add_argument("--seed", type=int, required=True)
    p_train.add_argument("--out", required=True, help="output directory")

    p_eval = sub.add_parser("eval", help="evaluate a checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument(
        "--opponent", default="naive",
        help="'naive' or a path to an opposing checkpoint",
    )
    p_eval.add_argument("--episodes", type=int, required=True)
    p_eval.add_argument("--seed", type=int, required=True)
    p_eval.add_argument("--out", default=None, help="optional JSON report path")

    p_replay = sub.add_parser("replay", help="render a recorded episode")
    p_replay.add_argument("--record", required=True)
    p_replay.add_argument("--format", required=True,
                          choices=["text", "image-frames"])
    p_replay.add_argument("--out", default=None,
                          help="directory for image frames")
    return parser


def cmd_train(args) -> int:
    game, train_cfg = load_configs(args.config)
    n_p, n_e = parse_scenario(args.scenario)
    import dataclasses

    game = dataclasses.replace(game, n_pursuers=n_p, n_evaders=n_e)
    run = RunConfig(
        scenario=args.scenario,
        team=args.team,
        method=args.method,
        game=game,
        train=train_cfg,
        out_dir=args.out,
        seed=args.seed,
    )
    if args.method == "naive":
        raise ConfigError("the naive method has nothing to train")
    path, rows = train(run)
    print(f"final checkpoint: {path}")
    print(f"metrics: {os.path.join(args.out, 'metrics.csv')} ({len(rows)} epochs)")
    return 0


def cmd_eval(args) -> int:
    policy, game, meta = load_policy_from_checkpoint(args.checkpoint)
    team = meta["team"]
    if args.opponent == "naive":
        other_side = "evader" if team == "pursuers" else "pursuer"
        n = game.n_evaders if other_side == "evader" else game.n_pursuers
        opponent = build_team_policy("naive", other_side, n, game)
    else:
        opponent, opp_game, opp_meta = load_policy_from_checkpoint(args.opponent)
        if opp_meta["team"] == meta["team"]:
            raise ConfigError("opponent checkpoint plays the same side")
        if (opp_game.rows, opp_game.cols) != (game.rows, game.cols):
            raise ConfigError("opponent checkpoint was trained on another grid")
    if team == "pursuers":
        report = evaluate(game, policy, opponent, args.episodes, args.seed)
    else:
        report = evaluate(game, opponent, policy, args.episodes, args.seed)
    blob = json.dumps(report.to_dict(), indent=2, sort_keys=True)
    print(blob)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(blob + "\n")
    return 0


def cmd_replay(args) -> int:
    record = load_record(args.record)
    frames = render(record, args.format)
    if args.format == "text":
        for i, frame in enumerate(frames):
            print(f"--- frame {i} ---")
            print(frame)
        return 0
    from PIL import Image

    out_dir = args.out or os.path.dirname(os.path.abspath(args.record))
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.splitext(os.path.basename(args.record))[0]
    for i, frame in enumerate(frames):
        Image.fromarray(frame).save(os.path.join(out_dir, f"{base}_{i:04d}.png"))
    print(f"wrote {len(frames)} frames to {out_dir}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            return cmd_train(args)
        if args.command == "eval":
            return cmd_eval(args)
        return cmd_replay(args)
    except (ConfigError, CheckpointVersionMismatch, CorruptRecord,
            FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NonFiniteLoss as exc:
        print(f"training diverged: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
