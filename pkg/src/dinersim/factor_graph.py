"""Discrete factor graphs over named state features.

A *feature* turns the 40-dim observation into one small categorical code
(table stage, happiness bin, hands content, ...). A *selector* is an ordered
list of features; applied to a state it yields the substate tuple a model
conditions on. A :class:`FactorGraphModel` scores binary decisions over such
substates: it holds log-potentials ``theta[f][cells..., y]`` for each factor
scope and predicts

    p(y=1 | x) = sigmoid( sum_f theta_f[x_f, 1] - theta_f[x_f, 0] )

which is exactly the conditional of the joint ``prod_f phi_f / Z`` with
``phi = exp(theta)``; the partition function cancels, so inference is a few
table lookups. Training (:func:`graph_train`) minimizes a class-weighted
squared loss by full-batch gradient descent with a backtracking step size,
which keeps the recorded loss curve non-increasing.
"""

import numpy as np

from .actions import N_QUEUE_SLOTS, N_TABLES
from .config import EnvConfig
from .env import (
    AWAIT_BILL,
    AWAIT_ORDER,
    DIRTY,
    HANDS_INDEX,
    ORDER_TAKEN,
    POSITION_INDEX,
    QUEUE_BASE,
    QUEUE_STRIDE,
    STATE_DIM,
    TABLE_BASE,
    TABLE_STRIDE,
    state_ranges,
)

N_HAPPINESS_BINS = 5


class StructureError(ValueError):
    pass


def happiness_bin(values, happiness_max: float):
    """Equal-width bins over [0, happiness_max]; the top edge folds into bin 4."""
    width = happiness_max / N_HAPPINESS_BINS
    bins = np.floor(np.asarray(values, dtype=np.float64) / width).astype(np.int64)
    return np.minimum(bins, N_HAPPINESS_BINS - 1)


def _stage_cols(states):
    return states[:, TABLE_BASE:TABLE_BASE + N_TABLES * TABLE_STRIDE:TABLE_STRIDE]


def _any_stage(states, stage):
    return np.any(_stage_cols(states).astype(np.int64) == stage, axis=1).astype(np.int64)


def _table_col(states, table, offset):
    return states[:, TABLE_BASE + table * TABLE_STRIDE + offset]


def _queue_col(states, slot, offset):
    return states[:, QUEUE_BASE + slot * QUEUE_STRIDE + offset]


def _stage_at_position(states, config, params):
    pos = states[:, POSITION_INDEX].astype(np.int64)
    cols = TABLE_BASE + np.maximum(pos - 1, 0) * TABLE_STRIDE
    stage = states[np.arange(states.shape[0]), cols].astype(np.int64)
    return np.where(pos == 0, 7, stage)


def _is_real_valued_index(idx: int) -> bool:
    # happiness live in table offset 2 and queue offset 1; all else is integral
    if TABLE_BASE <= idx < TABLE_BASE + N_TABLES * TABLE_STRIDE:
        return (idx - TABLE_BASE) % TABLE_STRIDE == 2
    if QUEUE_BASE <= idx < QUEUE_BASE + N_QUEUE_SLOTS * QUEUE_STRIDE:
        return (idx - QUEUE_BASE) % QUEUE_STRIDE == 1
    return False


def _state_index_card(config, desc):
    idx = desc["index"]
    if _is_real_valued_index(idx):
        raise StructureError(
            f"state index {idx} is real-valued; use a *_happiness_bin feature")
    span = float(state_ranges(config)[idx])
    return int(span) + 1


# Each entry: required params, cardinality given config, batch extractor.
FEATURES = {
    "state_index": {
        "params": ("index",),
        "card": _state_index_card,
        "extract": lambda s, cfg, p: s[:, p["index"]].astype(np.int64),
    },
    "table_stage": {
        "params": ("table",),
        "card": lambda cfg, p: 7,
        "extract": lambda s, cfg, p: _table_col(s, p["table"], 0).astype(np.int64),
    },
    "table_group_size": {
        "params": ("table",),
        "card": lambda cfg, p: 7,
        "extract": lambda s, cfg, p: _table_col(s, p["table"], 1).astype(np.int64),
    },
    "table_happiness_bin": {
        "params": ("table",),
        "card": lambda cfg, p: N_HAPPINESS_BINS,
        "extract": lambda s, cfg, p: happiness_bin(_table_col(s, p["table"], 2),
                                                   cfg.happiness_max),
    },
    "table_food_ready": {
        "params": ("table",),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: _table_col(s, p["table"], 3).astype(np.int64),
    },
    "table_size": {
        "params": ("table",),
        "card": lambda cfg, p: 7,
        "extract": lambda s, cfg, p: np.full(s.shape[0],
                                             int(cfg.table_sizes[p["table"]]),
                                             dtype=np.int64),
    },
    "queue_group_size": {
        "params": ("slot",),
        "card": lambda cfg, p: 7,
        "extract": lambda s, cfg, p: _queue_col(s, p["slot"], 0).astype(np.int64),
    },
    "queue_happiness_bin": {
        "params": ("slot",),
        "card": lambda cfg, p: N_HAPPINESS_BINS,
        "extract": lambda s, cfg, p: happiness_bin(_queue_col(s, p["slot"], 1),
                                                   cfg.happiness_max),
    },
    "hands": {
        "params": (),
        "card": lambda cfg, p: 8,
        "extract": lambda s, cfg, p: s[:, HANDS_INDEX].astype(np.int64),
    },
    "position": {
        "params": (),
        "card": lambda cfg, p: 7,
        "extract": lambda s, cfg, p: s[:, POSITION_INDEX].astype(np.int64),
    },
    "at_kitchen": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: (s[:, POSITION_INDEX].astype(np.int64) == 0
                                      ).astype(np.int64),
    },
    "stage_at_position": {
        "params": (),
        "card": lambda cfg, p: 8,
        "extract": _stage_at_position,
    },
    "hands_match_position": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: (
            (s[:, POSITION_INDEX].astype(np.int64) >= 1)
            & (s[:, HANDS_INDEX].astype(np.int64)
               == s[:, POSITION_INDEX].astype(np.int64))
        ).astype(np.int64),
    },
    "any_food_ready": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: np.any(
            s[:, TABLE_BASE + 3:TABLE_BASE + N_TABLES * TABLE_STRIDE:TABLE_STRIDE]
            .astype(np.int64) == 1, axis=1).astype(np.int64),
    },
    "any_order_pending": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: _any_stage(s, ORDER_TAKEN),
    },
    "any_await_order": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: _any_stage(s, AWAIT_ORDER),
    },
    "any_await_bill": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: _any_stage(s, AWAIT_BILL),
    },
    "any_dirty": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: _any_stage(s, DIRTY),
    },
    "queue_nonempty": {
        "params": (),
        "card": lambda cfg, p: 2,
        "extract": lambda s, cfg, p: (_queue_col(s, 0, 0).astype(np.int64) > 0
                                      ).astype(np.int64),
    },
}


class Source:
    """One categorical feature bound to a config: descriptor + extractor."""

    __slots__ = ("desc", "name", "card", "_extract", "_config")

    def __init__(self, desc: dict, config: EnvConfig):
        desc = validate_feature(desc)
        spec = FEATURES[desc["feature"]]
        self.desc = desc
        self.card = int(spec["card"](config, desc))
        self._extract = spec["extract"]
        self._config = config
        parts = [desc["feature"]] + [str(desc[k]) for k in spec["params"]]
        self.name = ":".join(parts)

    def extract_batch(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        return self._extract(states, self._config, self.desc)

    def extract(self, state) -> int:
        return int(self.extract_batch(np.asarray(state)[None, :])[0])


def validate_feature(desc: dict) -> dict:
    if not isinstance(desc, dict) or "feature" not in desc:
        raise StructureError(f"feature descriptor must be a dict with 'feature': {desc!r}")
    kind = desc["feature"]
    if kind not in FEATURES:
        raise StructureError(f"unknown feature '{kind}'")
    spec = FEATURES[kind]
    limits = {"table": N_TABLES, "slot": N_QUEUE_SLOTS, "index": STATE_DIM}
    for param in spec["params"]:
        if param not in desc:
            raise StructureError(f"feature '{kind}' requires field '{param}'")
        value = desc[param]
        if not isinstance(value, int) or not 0 <= value < limits[param]:
            raise StructureError(f"feature '{kind}': {param}={value!r} out of range")
    extra = set(desc) - {"feature", *spec["params"]}
    if extra:
        raise StructureError(f"feature '{kind}': unexpected fields {sorted(extra)}")
    return dict(desc)


class Selector:
    """Ordered feature list; maps a state to its categorical substate."""

    def __init__(self, descs, config: EnvConfig):
        if not descs:
            raise StructureError("selector needs at least one feature")
        self.sources = [Source(d, config) for d in descs]
        self.cards = [s.card for s in self.sources]

    def apply_batch(self, states) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        cols = [s.extract_batch(states) for s in self.sources]
        return np.stack(cols, axis=1)

    def apply(self, state) -> tuple:
        return tuple(int(v) for v in self.apply_batch(np.asarray(state)[None, :])[0])

    def flat_size(self) -> int:
        return int(np.prod(self.cards))

    def flat_index(self, codes) -> int:
        return int(np.ravel_multi_index(tuple(int(c) for c in codes), self.cards))

    def descs(self) -> list:
        return [dict(s.desc) for s in self.sources]


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class FactorGraphModel:
    """Log-potential tables over factor scopes plus the binary decision axis."""

    def __init__(self, cards, scopes, theta=None):
        self.cards = [int(c) for c in cards]
        self.scopes = [tuple(int(v) for v in scope) for scope in scopes]
        if not self.scopes:
            raise StructureError("a graph needs at least one factor")
        for scope in self.scopes:
            if not scope:
                raise StructureError("empty factor scope")
            if len(set(scope)) != len(scope):
                raise StructureError(f"repeated variable in scope {scope}")
            for v in scope:
                if not 0 <= v < len(self.cards):
                    raise StructureError(f"scope variable {v} out of range")
        if theta is None:
            theta = [np.zeros(tuple(self.cards[v] for v in scope) + (2,))
                     for scope in self.scopes]
        self.theta = [np.asarray(t, dtype=np.float64) for t in theta]
        for scope, t in zip(self.scopes, self.theta):
            want = tuple(self.cards[v] for v in scope) + (2,)
            if t.shape != want:
                raise StructureError(f"theta shape {t.shape} != {want} for scope {scope}")

    def copy(self) -> "FactorGraphModel":
        return FactorGraphModel(self.cards, self.scopes,
                                [t.copy() for t in self.theta])

    def logit_batch(self, codes) -> np.ndarray:
        """sum_f theta_f[x_f, 1] - theta_f[x_f, 0] for each substate row."""
        codes = np.asarray(codes, dtype=np.int64)
        out = np.zeros(codes.shape[0])
        for scope, t in zip(self.scopes, self.theta):
            idx = tuple(codes[:, v] for v in scope)
            out += t[idx + (1,)] - t[idx + (0,)]
        return out

    def infer_batch(self, codes) -> np.ndarray:
        return sigmoid(self.logit_batch(codes))

    def infer(self, codes) -> float:
        row = np.asarray([list(codes)], dtype=np.int64)
        return float(self.infer_batch(row)[0])

    def delta_tables(self) -> list:
        """Per-factor lookup tables of theta[...,1]-theta[...,0]."""
        return [t[..., 1] - t[..., 0] for t in self.theta]

    def joint_unnormalized(self, codes, y: int) -> float:
        """prod_f phi_f at a full assignment; used by the exhaustive oracle."""
        total = 0.0
        for scope, t in zip(self.scopes, self.theta):
            cell = tuple(int(codes[v]) for v in scope) + (int(y),)
            total += t[cell]
        return float(np.exp(total))


def _aggregate(codes, labels, cards):
    """Collapse (substate, label) pairs to per-cell positive/negative counts."""
    codes = np.asarray(codes, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    flat = np.ravel_multi_index(tuple(codes[:, i] for i in range(codes.shape[1])),
                                tuple(cards))
    cells, inverse = np.unique(flat, return_inverse=True)
    n_pos = np.bincount(inverse, weights=labels.astype(np.float64),
                        minlength=cells.size)
    n_all = np.bincount(inverse, minlength=cells.size).astype(np.float64)
    unique_codes = np.stack(np.unravel_index(cells, tuple(cards)), axis=1)
    return unique_codes, n_pos, n_all - n_pos


def _loss_and_grad(theta, scopes, fidx, n_pos, n_neg, w):
    denom = float((w * n_pos + n_neg).sum())
    d = np.zeros(n_pos.shape[0])
    for t, fi in zip(theta, fidx):
        flat = t.reshape(-1, 2)
        d += flat[fi, 1] - flat[fi, 0]
    p = sigmoid(d)
    loss = float((w * n_pos * (p - 1.0) ** 2 + n_neg * p ** 2).sum() / denom)
    dl_dd = (2.0 * w * n_pos * (p - 1.0) + 2.0 * n_neg * p) * p * (1.0 - p) / denom
    grads = []
    for t, fi in zip(theta, fidx):
        g = np.zeros_like(t).reshape(-1, 2)
        np.add.at(g[:, 1], fi, dl_dd)
        np.add.at(g[:, 0], fi, -dl_dd)
        grads.append(g.reshape(t.shape))
    return loss, grads


def graph_train(codes, labels, cards, scopes, pos_weight_cap: float = 100.0,
                lr: float = 1.0, max_iter: int = 200, tol: float = 1e-10):
    """Fit log-potentials to relabeled data by monotone gradient descent.

    Returns (model, history) where history records the loss after every
    accepted step plus the class weight used. Positives are up-weighted by
    min(pos_weight_cap, n_neg/n_pos) so rare fire-now states are not drowned
    out by the overwhelmingly common stay-quiet ones.
    """
    model = FactorGraphModel(cards, scopes)
    u_codes, n_pos, n_neg = _aggregate(codes, labels, model.cards)
    total_pos = float(n_pos.sum())
    total_neg = float(n_neg.sum())
    if total_pos > 0 and total_neg > 0:
        w = min(float(pos_weight_cap), total_neg / total_pos)
    else:
        w = 1.0

    fidx = []
    for scope in model.scopes:
        scope_cards = tuple(model.cards[v] for v in scope)
        fidx.append(np.ravel_multi_index(tuple(u_codes[:, v] for v in scope),
                                         scope_cards))

    theta = [t.copy() for t in model.theta]
    loss, grads = _loss_and_grad(theta, model.scopes, fidx, n_pos, n_neg, w)
    losses = [loss]
    step = float(lr)
    for _ in range(max_iter):
        while True:
            trial = [t - step * g for t, g in zip(theta, grads)]
            new_loss, new_grads = _loss_and_grad(trial, model.scopes, fidx,
                                                 n_pos, n_neg, w)
            if new_loss <= loss or step < 1e-12:
                break
            step *= 0.5
        if new_loss > loss:
            break
        theta = trial
        grads = new_grads
        improved = loss - new_loss
        loss = new_loss
        losses.append(loss)
        step *= 1.05
        if improved < tol:
            break
    model.theta = theta
    history = {"losses": losses, "pos_weight": w, "cells": int(u_codes.shape[0])}
    return model, history
