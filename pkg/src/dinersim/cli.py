"""Command-line entry point.

Subcommands cover the whole workflow: ``collect`` demonstrations, train a
policy (``train-dpgm``, ``train-bc``), ``eval`` any policy into a report,
``compare`` reports, ``rollout`` with rendering, and ``serve`` the
environment over stdio for out-of-process clients.

Exit codes: 0 success, 1 usage error, 2 data error (unreadable or
inconsistent files).
"""

import argparse
import sys

from . import bc as bc_mod
from . import dpgm as dpgm_mod
from .config import ConfigError, EnvConfig, default_config
from .data import DataError, load_dataset, record_episodes
from .env import Env
from .evaluate import (
    ReportError,
    compare,
    evaluate,
    report_from_file,
    report_to_file,
)
from .expert import ExpertPolicy
from .factor_graph import StructureError
from .nets import NetError, load_checkpoint
from .server import serve

USAGE_ERROR = 1
DATA_ERROR = 2

_DATA_ERRORS = (DataError, ConfigError, StructureError, ReportError, NetError,
                OSError, ValueError, KeyError)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; our contract reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="dinersim",
                     description="Restaurant-service MDP: data collection, "
                                 "imitation training, evaluation, serving.")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("collect", help="record demonstration episodes")
    p.add_argument("--policy", required=True, choices=["expert", "random"],
                   help="demonstrator to roll out")
    p.add_argument("--episodes", type=int, required=True, metavar="N",
                   help="number of episodes")
    p.add_argument("--seed", type=int, default=0, metavar="S",
                   help="first episode seed (episode i uses S+i)")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="output dataset (JSON lines)")
    p.add_argument("--config", metavar="PATH", help="environment config file")

    p = sub.add_parser("train-dpgm", help="train the decomposed graph policy")
    p.add_argument("--data", required=True, metavar="PATH",
                   help="demonstration dataset")
    p.add_argument("--structures", metavar="PATH",
                   help="per-action structure file (defaults built in)")
    p.add_argument("--out", required=True, metavar="PATH",
                   help="output policy checkpoint")
    p.add_argument("--no-finetune", action="store_true",
                   help="skip the joint end-to-end phase")
    p.add_argument("--config", metavar="PATH",
                   help="environment config file (default: from dataset header)")

    p = sub.add_parser("train-bc", help="train the behaviour-cloning baseline")
    p.add_argument("--data", required=True, metavar="PATH")
    p.add_argument("--out", required=True, metavar="PATH")
    p.add_argument("--config", metavar="PATH",
                   help="environment config file (default: from dataset header)")

    p = sub.add_parser("eval", help="run a policy over seeded episodes")
    p.add_argument("--policy", required=True, metavar="PATH|expert|random",
                   help="checkpoint path or builtin policy name")
    p.add_argument("--episodes", type=int, default=100, metavar="N")
    p.add_argument("--seed", type=int, default=10000, metavar="S",
                   help="first evaluation seed")
    p.add_argument("--report", required=True, metavar="PATH",
                   help="output report (JSON)")
    p.add_argument("--config", metavar="PATH", help="environment config file")

    p = sub.add_parser("compare", help="rank evaluation reports")
    p.add_argument("reports", nargs="+", metavar="REPORT",
                   help="report files from `eval`")
    p.add_argument("--csv", metavar="PATH", help="also write the table as CSV")

    p = sub.add_parser("serve", help="serve the environment over stdio JSON")
    p.add_argument("--config", metavar="PATH", help="environment config file")

    p = sub.add_parser("rollout", help="play one episode, optionally rendered")
    p.add_argument("--policy", required=True, metavar="PATH|expert|random")
    p.add_argument("--seed", type=int, default=0, metavar="S")
    p.add_argument("--render", action="store_true",
                   help="print the text view after every step")
    p.add_argument("--config", metavar="PATH", help="environment config file")
    return parser


def _load_config(path) -> EnvConfig:
    if path is None:
        return default_config()
    return EnvConfig.from_file(path)


def _load_policy_file(path):
    kind, _, _ = load_checkpoint(path)
    if kind == "dpgm":
        return dpgm_mod.load_policy(path)
    if kind == "bc":
        return bc_mod.load_bc(path)
    raise DataError(f"unknown checkpoint kind '{kind}'")


def _resolve_policy(name_or_path, config):
    if name_or_path == "expert":
        config = config or default_config()
        return ExpertPolicy(config), config
    if name_or_path == "random":
        return bc_mod.RandomPolicy(), config
    policy = _load_policy_file(name_or_path)
    if config is None and hasattr(policy, "config"):
        config = policy.config
    return policy, config


def _cmd_collect(args) -> int:
    config = _load_config(args.config)
    if args.policy == "expert":
        policy = ExpertPolicy(config)
    else:
        policy = bc_mod.RandomPolicy()
    ds = record_episodes(lambda seed: Env(config, seed), policy,
                         args.episodes, args.seed, path=args.out)
    print(f"wrote {args.out}: {ds.header.episodes} episodes, "
          f"{ds.header.pairs} pairs")
    return 0


def _cmd_train_dpgm(args) -> int:
    ds = load_dataset(args.data)
    config = _train_config(args, ds)
    structures = None
    if args.structures is not None:
        structures = dpgm_mod.structures_from_file(args.structures)
    hyper = dpgm_mod.DpgmHyper(finetune=not args.no_finetune)
    policy, info = dpgm_mod.dpgm_train(ds, config, structures, hyper, log=print)
    if info["zero_positive"]:
        print(f"note: {len(info['zero_positive'])} actions had no positive "
              f"examples: {info['zero_positive']}")
    dpgm_mod.save_policy(policy, args.out)
    print(f"wrote {args.out}")
    return 0


def _cmd_train_bc(args) -> int:
    ds = load_dataset(args.data)
    config = _train_config(args, ds)
    policy, info = bc_mod.bc_train(ds, config, log=print)
    bc_mod.save_bc(policy, args.out)
    print(f"wrote {args.out} (train accuracy {info['train_accuracy']:.3f})")
    return 0


def _train_config(args, ds) -> EnvConfig:
    if args.config is not None:
        config = EnvConfig.from_file(args.config)
        if ds.header.config_hash and config.hash() != ds.header.config_hash:
            raise DataError(
                f"--config hash {config.hash()} does not match the dataset's "
                f"{ds.header.config_hash}")
        return config
    if ds.header.config is not None:
        return EnvConfig.from_dict(ds.header.config)
    return default_config()


def _cmd_eval(args) -> int:
    config = _load_config(args.config) if args.config else None
    policy, config = _resolve_policy(args.policy, config)
    if config is None:
        config = default_config()
    report = evaluate(policy, args.episodes, args.seed, config)
    report_to_file(report, args.report)
    print(f"{report.policy}: mean {report.mean:.1f} +- {report.std:.1f} "
          f"over {report.n_episodes} episodes "
          f"(min {report.minimum:.1f}, max {report.maximum:.1f})")
    return 0


def _cmd_compare(args) -> int:
    reports = [report_from_file(p) for p in args.reports]
    text, csv_text, warnings = compare(reports)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(text, end="")
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
        print(f"wrote {args.csv}")
    return 0


def _cmd_serve(args) -> int:
    serve(_load_config(args.config))
    return 0


def _cmd_rollout(args) -> int:
    config = _load_config(args.config) if args.config else None
    policy, config = _resolve_policy(args.policy, config)
    if config is None:
        config = default_config()
    env = Env(config, args.seed)
    if hasattr(policy, "seed_episode"):
        policy.seed_episode(args.seed)
    obs = env.reset()
    total = 0.0
    done = False
    while not done:
        action = policy.act(obs)
        res = env.step(action)
        total += res.reward
        if args.render:
            print(f"-- step {res.info['step']} action {action} "
                  f"reward {res.reward:+.1f}")
            print(env.render_text())
        obs = res.state_vec
        done = res.done
    print(f"{getattr(policy, 'name', args.policy)}: return {total:.1f} "
          f"in {env.step_count} steps (seed {args.seed})")
    return 0


_COMMANDS = {
    "collect": _cmd_collect,
    "train-dpgm": _cmd_train_dpgm,
    "train-bc": _cmd_train_bc,
    "eval": _cmd_eval,
    "compare": _cmd_compare,
    "serve": _cmd_serve,
    "rollout": _cmd_rollout,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        return USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
