"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 configuration or input error,
3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, load_config
from .stl import FragmentError, StlSyntaxError, TraceTooShortError, infer_state_dim, parse, validate_fragment

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _formula_text(arg: str) -> str:
    p = Path(arg)
    if p.is_file():
        return p.read_text().strip()
    return arg


def _read_trace(path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read trace {path}: {exc}") from exc
    if not rows:
        raise ConfigError("trace file is empty")
    header = [h.strip() for h in rows[0]]
    if header != [f"x{i}" for i in range(len(header))]:
        raise ConfigError(f"trace header must be x0,x1,...; got {','.join(header)}")
    try:
        data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"non-numeric trace entry: {exc}") from exc
    if data.size and data.shape[1] != len(header):
        raise ConfigError("trace rows do not match the header width")
    return header, data.reshape(-1, len(header))


def cmd_check(args) -> int:
    text = _formula_text(args.formula)
    info = validate_fragment(parse(text, infer_state_dim(text)))
    print(json.dumps({
        "outer": info.outer,
        "K_e": info.K_e,
        "tau": info.tau,
        "horizon": info.horizon,
        "subformulas": len(info.subformulas),
        "flag_eligible": info.flag_eligible,
        "state_dim": info.dim,
    }))
    return EXIT_OK


def cmd_monitor(args) -> int:
    from .tau_env import trajectory_robustness, window_robustness

    text = _formula_text(args.formula)
    header, trace = _read_trace(args.trace)
    needed = infer_state_dim(text)
    if needed > len(header):
        raise ConfigError(f"formula uses x{needed - 1} but the trace has {len(header)} columns")
    info = validate_fragment(parse(text, len(header)))
    if len(trace) < info.horizon + 1:
        raise TraceTooShortError(f"trace has {len(trace)} states; the formula needs {info.horizon + 1}")
    rho = trajectory_robustness(trace, info)
    series = window_robustness(trace, info)
    print(json.dumps({
        "robustness": rho,
        "satisfied": bool(rho >= 0),
        "window_robustness": series.tolist(),
    }))
    return EXIT_OK


def _seeds(cfg, override):
    return [override] if override is not None else list(cfg.seeds)


def cmd_train(args) -> int:
    from .agents.train import train

    cfg = load_config(args.config)
    out_root = Path(args.out) if args.out else Path(cfg.out_dir)
    for seed in _seeds(cfg, args.seed):
        res = train(cfg, seed, out_root / f"seed_{seed}")
        print(f"seed {seed}: {len(res.metrics)} episodes -> {res.out_dir}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .agents import make_agent
    from .evaluate import evaluate
    from .nn import load_checkpoint
    from .robot_env import TwoWheeledRobot
    from .tau_env import TauEnv

    cfg = load_config(args.config)
    try:
        arrays, meta = load_checkpoint(args.ckpt)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot load checkpoint {args.ckpt}: {exc}") from exc
    info = cfg.fragment()
    plant = TwoWheeledRobot(cfg.robot_config())
    env = TauEnv(plant, info, preprocess=cfg.preprocess)
    agent = make_agent(cfg.algorithm, env.obs_dim, env.action_dim, cfg.agent_config(),
                       np.random.default_rng(0))
    try:
        agent.load_state_dict(arrays, meta)
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"checkpoint does not match config: {exc}") from exc
    episodes = args.episodes if args.episodes is not None else cfg.eval_episodes
    if episodes < 1:
        raise ConfigError("--episodes must be at least 1")
    rep = evaluate(agent, plant, info, K=cfg.K, gamma=cfg.gamma, episodes=episodes, seed=args.seed,
                   beta=cfg.beta, normalize_reward=cfg.normalize_stl_reward,
                   preprocess=cfg.preprocess, cross_check=True)
    print(json.dumps({**rep.summary(), "successes": rep.successes,
                      "robustness": rep.robustness.tolist()}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="stlcrl", description="STL-constrained deep RL toolkit")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train agents, one run per seed")
    t.add_argument("--config", required=True)
    t.add_argument("--seed", type=int)
    t.add_argument("--out", help="output directory (overrides out_dir)")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", help="evaluate a checkpoint")
    e.add_argument("--ckpt", required=True)
    e.add_argument("--config", required=True)
    e.add_argument("--episodes", type=int)
    e.add_argument("--seed", type=int, default=0)
    e.set_defaults(func=cmd_eval)

    m = sub.add_parser("monitor", help="robustness of a trace CSV")
    m.add_argument("--trace", required=True)
    m.add_argument("--formula", required=True, help="formula text or a file containing it")
    m.set_defaults(func=cmd_monitor)

    c = sub.add_parser("check", help="fragment summary of a formula")
    c.add_argument("--formula", required=True, help="formula text or a file containing it")
    c.set_defaults(func=cmd_check)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, StlSyntaxError, FragmentError, TraceTooShortError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # any other failure is a runtime error with its own exit code
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
