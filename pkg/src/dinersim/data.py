"""Demonstration recording and the JSON Lines dataset format.

A dataset file is newline-delimited JSON. Line 1 is the header::

    {"type":"header","policy":"expert","config_hash":"...","config":{...},
     "seed_start":0,"seed_count":274,"episodes":274,"pairs":164400}

where ``config`` is the full environment configuration used to collect the
data, so downstream tools can rebuild the exact environment.

Every following line is one transition, fields always in this order::

    {"episode":0,"t":0,"state":[40 numbers],"action":3,"reward":0.0,"done":0}

``state`` is the observation *before* the action. Within an episode ``t``
runs 0,1,2,...; the single ``done:1`` line closes the episode. The writer is
canonical (fixed key order, shortest-round-trip floats), so save -> load ->
save reproduces the file byte for byte.

``relabel_for_action`` turns the dataset into the per-action binary problems
used by the graph/memo trainers: every transition becomes a positive example
for the action the demonstrator took and a negative example for the other 56.
"""

import json
from dataclasses import dataclass

import numpy as np

from .env import STATE_DIM


class DataError(ValueError):
    """Malformed dataset file or inconsistent dataset contents."""


@dataclass
class DatasetHeader:
    policy: str
    config_hash: str
    seed_start: int
    seed_count: int
    episodes: int
    pairs: int
    config: dict = None

    def to_json(self) -> str:
        config_part = ""
        if self.config is not None:
            blob = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
            config_part = f',"config":{blob}'
        return ('{"type":"header"'
                f',"policy":{json.dumps(self.policy)}'
                f',"config_hash":{json.dumps(self.config_hash)}'
                f'{config_part}'
                f',"seed_start":{self.seed_start}'
                f',"seed_count":{self.seed_count}'
                f',"episodes":{self.episodes}'
                f',"pairs":{self.pairs}}}')


class Dataset:
    """Column-oriented transition store (cheap to slice and to vectorize)."""

    def __init__(self, header: DatasetHeader, episode_ids, steps, states,
                 actions, rewards, dones):
        self.header = header
        self.episode_ids = np.asarray(episode_ids, dtype=np.int64)
        self.steps = np.asarray(steps, dtype=np.int64)
        self.states = np.asarray(states, dtype=np.float64)
        self.actions = np.asarray(actions, dtype=np.int64)
        self.rewards = np.asarray(rewards, dtype=np.float64)
        self.dones = np.asarray(dones, dtype=np.uint8)

    def __len__(self):
        return len(self.actions)

    @property
    def n_episodes(self) -> int:
        return self.header.episodes

    def validate(self) -> None:
        n = len(self.actions)
        if n == 0:
            raise DataError("no episodes")
        if self.states.shape != (n, STATE_DIM):
            raise DataError(f"states must be {STATE_DIM}-dimensional")
        if self.header.pairs != n:
            raise DataError(f"header pair count {self.header.pairs} != body {n}")
        ep_ids = np.unique(self.episode_ids)
        if self.header.episodes != len(ep_ids):
            raise DataError(
                f"header episode count {self.header.episodes} != body {len(ep_ids)}")
        if self.actions.min() < 0 or self.actions.max() > 56:
            raise DataError("action index out of range")
        for ep in ep_ids:
            idx = np.flatnonzero(self.episode_ids == ep)
            t = self.steps[idx]
            if not np.array_equal(t, np.arange(len(idx))):
                raise DataError(f"episode {ep}: t must be consecutive from 0")
            d = self.dones[idx]
            if d.sum() != 1 or d[-1] != 1:
                raise DataError(f"episode {ep}: exactly one final done flag required")

    def episode_index_sets(self) -> dict:
        out = {}
        for ep in np.unique(self.episode_ids):
            out[int(ep)] = np.flatnonzero(self.episode_ids == ep)
        return out

    def subset_episodes(self, episode_ids) -> "Dataset":
        """New dataset restricted to the given episode ids (header recounted)."""
        wanted = set(int(e) for e in episode_ids)
        mask = np.isin(self.episode_ids, sorted(wanted))
        header = DatasetHeader(
            policy=self.header.policy,
            config_hash=self.header.config_hash,
            seed_start=self.header.seed_start,
            seed_count=len(wanted),
            episodes=len(wanted),
            pairs=int(mask.sum()),
            config=self.header.config,
        )
        ds = Dataset(header, self.episode_ids[mask], self.steps[mask],
                     self.states[mask], self.actions[mask],
                     self.rewards[mask], self.dones[mask])
        ds.validate()
        return ds


def record_episodes(env_factory, policy, n_episodes: int, seed_base: int,
                    path=None) -> Dataset:
    """Roll out ``policy`` for seeds seed_base..seed_base+n-1 and record.

    ``env_factory(seed)`` must return a fresh environment; ``policy`` needs an
    ``act(obs) -> int`` method and may expose ``seed_episode(seed)`` for
    per-episode reseeding (used by stochastic policies).
    """
    if n_episodes < 1:
        raise ValueError("n_episodes must be >= 1")
    episode_ids, steps, states, acts, rewards, dones = [], [], [], [], [], []
    config_hash = None
    config_dict = None
    for ep in range(n_episodes):
        seed = seed_base + ep
        env = env_factory(seed)
        if config_hash is None:
            config_hash = env.config.hash()
            config_dict = env.config.to_dict()
        if hasattr(policy, "seed_episode"):
            policy.seed_episode(seed)
        obs = env.reset(seed)
        t = 0
        done = False
        while not done:
            action = policy.act(obs)
            res = env.step(action)
            episode_ids.append(ep)
            steps.append(t)
            states.append(obs)
            acts.append(action)
            rewards.append(res.reward)
            dones.append(1 if res.done else 0)
            obs = res.state_vec
            done = res.done
            t += 1
    header = DatasetHeader(
        policy=getattr(policy, "name", type(policy).__name__),
        config_hash=config_hash,
        seed_start=seed_base,
        seed_count=n_episodes,
        episodes=n_episodes,
        pairs=len(acts),
        config=config_dict,
    )
    ds = Dataset(header, episode_ids, steps, np.array(states), acts, rewards, dones)
    ds.validate()
    if path is not None:
        save_dataset(ds, path)
    return ds


def _transition_line(ep, t, state, action, reward, done) -> str:
    state_json = "[" + ",".join(json.dumps(float(v)) for v in state) + "]"
    return (f'{{"episode":{ep},"t":{t},"state":{state_json},'
            f'"action":{action},"reward":{json.dumps(float(reward))},'
            f'"done":{done}}}')


def save_dataset(ds: Dataset, path) -> None:
    lines = [ds.header.to_json()]
    for i in range(len(ds)):
        lines.append(_transition_line(
            int(ds.episode_ids[i]), int(ds.steps[i]), ds.states[i],
            int(ds.actions[i]), ds.rewards[i], int(ds.dones[i])))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
        fh.write("\n")


def load_dataset(path) -> Dataset:
    with open(path, "r", encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise DataError("no episodes")
        try:
            head = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise DataError(f"line 1: invalid JSON header: {exc}") from exc
        if head.get("type") != "header":
            raise DataError("line 1: missing dataset header")
        episode_ids, steps, states, acts, rewards, dones = [], [], [], [], [], []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {lineno}: invalid JSON: {exc}") from exc
            try:
                state = rec["state"]
                if len(state) != STATE_DIM:
                    raise DataError(
                        f"line {lineno}: state has {len(state)} entries, "
                        f"expected {STATE_DIM}")
                episode_ids.append(rec["episode"])
                steps.append(rec["t"])
                states.append(state)
                acts.append(rec["action"])
                rewards.append(rec["reward"])
                dones.append(rec["done"])
            except KeyError as exc:
                raise DataError(f"line {lineno}: missing field {exc}") from exc
    if not acts:
        raise DataError("no episodes")
    header = DatasetHeader(
        policy=head.get("policy", ""),
        config_hash=head.get("config_hash", ""),
        seed_start=int(head.get("seed_start", 0)),
        seed_count=int(head.get("seed_count", 0)),
        episodes=int(head.get("episodes", -1)),
        pairs=int(head.get("pairs", -1)),
        config=head.get("config"),
    )
    ds = Dataset(header, episode_ids, steps, np.array(states), acts, rewards, dones)
    ds.validate()
    return ds


@dataclass
class RelabeledData:
    """Binary imitation data for one action: substate rows and 0/1 labels."""
    action: int
    substates: np.ndarray  # (N, n_vars) int32 discretized
    labels: np.ndarray     # (N,) uint8
    n_pos: int
    n_neg: int


def relabel_for_action(ds: Dataset, action: int, selector) -> RelabeledData:
    """Map every transition through ``selector`` and label it 1 iff the
    demonstrator chose ``action`` there."""
    substates = selector.apply_batch(ds.states)
    labels = (ds.actions == action).astype(np.uint8)
    n_pos = int(labels.sum())
    return RelabeledData(action, substates, labels, n_pos, len(labels) - n_pos)
