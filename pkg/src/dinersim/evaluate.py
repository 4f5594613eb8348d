"""Policy evaluation over seeded episode batches, plus report comparison.

A report records per-episode undiscounted returns and lengths for one policy
over an explicit seed list, so every number in it can be reproduced by
rerunning the same seeds. ``compare`` ranks reports by mean return and emits
both an aligned text table and CSV.
"""

import csv
import io
import json
from dataclasses import dataclass

import numpy as np

from .config import EnvConfig, default_config
from .env import Env


class ReportError(ValueError):
    pass


@dataclass
class EvalReport:
    policy: str
    n_episodes: int
    seeds: list
    returns: list
    lengths: list
    config_hash: str = ""

    def __post_init__(self):
        if not (len(self.seeds) == len(self.returns) == len(self.lengths)
                == self.n_episodes):
            raise ReportError("episode count does not match per-episode lists")

    @property
    def mean(self) -> float:
        return float(np.mean(self.returns))

    @property
    def std(self) -> float:
        return float(np.std(self.returns))

    @property
    def minimum(self) -> float:
        return float(np.min(self.returns))

    @property
    def maximum(self) -> float:
        return float(np.max(self.returns))

    @property
    def mean_length(self) -> float:
        return float(np.mean(self.lengths))

    def to_dict(self) -> dict:
        return {
            "policy": self.policy,
            "n_episodes": self.n_episodes,
            "seeds": [int(s) for s in self.seeds],
            "returns": [float(r) for r in self.returns],
            "lengths": [int(n) for n in self.lengths],
            "config_hash": self.config_hash,
            "mean": self.mean,
            "std": self.std,
            "min": self.minimum,
            "max": self.maximum,
            "mean_length": self.mean_length,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        try:
            report = cls(policy=d["policy"], n_episodes=int(d["n_episodes"]),
                         seeds=list(d["seeds"]), returns=list(d["returns"]),
                         lengths=list(d["lengths"]),
                         config_hash=d.get("config_hash", ""))
        except KeyError as exc:
            raise ReportError(f"report missing field {exc}") from exc
        if "mean" in d and abs(report.mean - d["mean"]) > 1e-9:
            raise ReportError("stored mean does not match per-episode returns")
        return report


def evaluate(policy, n_episodes: int, seed_base: int,
             config: EnvConfig = None, log=None) -> EvalReport:
    """Run seeds seed_base..seed_base+n-1 to termination and tally returns."""
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    if config is None:
        config = default_config()
    say = log if log is not None else (lambda msg: None)
    seeds, returns, lengths = [], [], []
    env = Env(config, 0)
    for ep in range(n_episodes):
        seed = seed_base + ep
        if hasattr(policy, "seed_episode"):
            policy.seed_episode(seed)
        obs = env.reset(seed)
        total = 0.0
        steps = 0
        done = False
        while not done:
            res = env.step(policy.act(obs))
            total += res.reward
            obs = res.state_vec
            done = res.done
            steps += 1
        seeds.append(seed)
        returns.append(total)
        lengths.append(steps)
        say(f"episode {ep} (seed {seed}): return {total:.1f}, {steps} steps")
    return EvalReport(
        policy=getattr(policy, "name", type(policy).__name__),
        n_episodes=n_episodes, seeds=seeds, returns=returns,
        lengths=lengths, config_hash=config.hash())


def report_to_file(report: EvalReport, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def report_from_file(path) -> EvalReport:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ReportError(f"invalid report file: {exc}") from exc
    return EvalReport.from_dict(payload)


def compare(reports):
    """Rank reports by mean return (descending, stable).

    Returns (text, csv, warnings). A config-hash mismatch between reports is
    reported as a warning, not an error: cross-config comparisons can be
    intentional but are usually a mistake.
    """
    if len(reports) < 2:
        raise ReportError("need at least two reports to compare")
    warnings = []
    hashes = {r.config_hash for r in reports}
    if len(hashes) > 1:
        warnings.append(f"reports span {len(hashes)} different config hashes")
    ranked = sorted(reports, key=lambda r: -r.mean)

    rows = [(r.policy, r.n_episodes, r.mean, r.std, r.minimum, r.maximum,
             r.mean_length, r.config_hash) for r in ranked]
    header = ("policy", "episodes", "mean", "std", "min", "max",
              "mean_length", "config_hash")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([f"{v:.3f}" if isinstance(v, float) else v for v in row])
    csv_text = buf.getvalue()

    widths = [max(len(str(header[i])),
                  max(len(_cell(row[i])) for row in rows))
              for i in range(len(header))]
    lines = ["  ".join(str(h).ljust(widths[i]) for i, h in enumerate(header))]
    for row in rows:
        lines.append("  ".join(_cell(v).ljust(widths[i])
                               for i, v in enumerate(row)))
    return "\n".join(lines) + "\n", csv_text, warnings


def _cell(v) -> str:
    return f"{v:.3f}" if isinstance(v, float) else str(v)
