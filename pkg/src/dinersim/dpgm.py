"""Decomposed policy modelling: one small scorer per action, then reweighting.

Every action k gets its own binary question, "would the demonstrator take k
here?", asked of a hand-picked substate (see ``factor_graph``). Movement and
seating actions answer with factor-graph models; the remaining actions have
tiny substate spaces and simply memorize positive rates per cell. The 57
scores then pass through a small dense net that arbitrates between actions,
and an optional end-to-end phase fine-tunes the graph potentials and the net
together under cross-entropy (memo tables stay frozen; they are counts).

The per-action structures (feature lists, factor scopes) live in a JSON file
so they can be edited without touching code::

    {"actions": {
        "1":  {"type": "graph",
               "sources": [{"feature": "table_stage", "table": 0}, ...],
               "factors": [[0, 1], [2], [3]]},
        "7":  {"type": "memo",
               "sources": [{"feature": "stage_at_position"}, ...]},
        ...str(k) for every action 0..56...}}

Feature descriptors name an entry of ``factor_graph.FEATURES`` plus its
parameters; ``factors`` index into the ``sources`` list.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from . import actions as A
from .config import EnvConfig, default_config
from .data import Dataset
from .factor_graph import (
    N_HAPPINESS_BINS,
    FactorGraphModel,
    Selector,
    StructureError,
    graph_train,
    sigmoid,
    validate_feature,
)
from .env import (
    AWAIT_BILL,
    AWAIT_ORDER,
    DIRTY,
    HANDS_INDEX,
    ORDER_TAKEN,
    POSITION_INDEX,
    QUEUE_BASE,
    QUEUE_STRIDE,
    TABLE_BASE,
    TABLE_STRIDE,
)
from .nets import (
    Adam,
    DenseNet,
    load_checkpoint,
    save_checkpoint,
    softmax,
    softmax_cross_entropy_batch,
)

GRAPH = "graph"
MEMO = "memo"

GRAPH_ACTIONS = tuple(range(A.MOVE_TABLE_BASE, A.MOVE_TABLE_BASE + A.N_TABLES)) \
    + tuple(range(A.SEAT_BASE, A.N_ACTIONS))
MEMO_ACTIONS = tuple(k for k in range(A.N_ACTIONS) if k not in GRAPH_ACTIONS)


def default_structures() -> dict:
    """Per-action scorer structures: graphs for moving/seating, memo elsewhere."""
    structures = {}
    for t in range(A.N_TABLES):
        structures[A.move_to_table(t)] = {
            "type": GRAPH,
            "sources": [
                {"feature": "table_stage", "table": t},
                {"feature": "table_food_ready", "table": t},
                {"feature": "table_happiness_bin", "table": t},
                {"feature": "hands"},
            ],
            "factors": [[0, 1], [2], [3]],
        }
    for g in range(A.N_QUEUE_SLOTS):
        for t in range(A.N_TABLES):
            structures[A.seat_action(g, t)] = {
                "type": GRAPH,
                "sources": [
                    {"feature": "table_stage", "table": t},
                    {"feature": "table_size", "table": t},
                    {"feature": "queue_group_size", "slot": g},
                    {"feature": "queue_happiness_bin", "slot": g},
                ],
                "factors": [[0], [1, 2], [3]],
            }
    memo_sources = {
        A.WAIT: ["any_food_ready", "any_order_pending", "any_await_order",
                 "any_await_bill", "any_dirty", "queue_nonempty", "hands"],
        A.TAKE_ORDER: ["stage_at_position", "hands", "any_food_ready",
                       "any_await_bill"],
        A.SUBMIT_ORDERS: ["at_kitchen", "any_order_pending", "hands",
                          "any_food_ready"],
        A.PICKUP_FOOD: ["at_kitchen", "hands", "any_food_ready"],
        A.SERVE_FOOD: ["hands_match_position", "stage_at_position"],
        A.COLLECT_BILL: ["stage_at_position", "hands", "any_food_ready"],
        A.CLEAN_TABLE: ["stage_at_position", "hands", "queue_nonempty",
                        "any_food_ready", "any_await_bill", "any_await_order"],
        A.RETURN_DISHES: ["at_kitchen", "hands"],
        A.MOVE_TO_KITCHEN: ["at_kitchen", "hands", "any_food_ready",
                            "any_order_pending", "any_await_order",
                            "any_await_bill"],
    }
    for k, names in memo_sources.items():
        structures[k] = {"type": MEMO,
                         "sources": [{"feature": name} for name in names]}
    return structures


def validate_structures(structures: dict) -> None:
    keys = set(structures)
    if keys != set(range(A.N_ACTIONS)):
        missing = sorted(set(range(A.N_ACTIONS)) - keys)
        extra = sorted(keys - set(range(A.N_ACTIONS)))
        raise StructureError(
            f"structures must cover actions 0..{A.N_ACTIONS - 1} exactly; "
            f"missing {missing}, unexpected {extra}")
    for k, desc in structures.items():
        kind = desc.get("type")
        if kind not in (GRAPH, MEMO):
            raise StructureError(f"action {k}: type must be 'graph' or 'memo'")
        sources = desc.get("sources")
        if not sources:
            raise StructureError(f"action {k}: needs at least one source")
        for s in sources:
            try:
                validate_feature(s)
            except StructureError as exc:
                raise StructureError(f"action {k}: {exc}") from exc
        if kind == GRAPH:
            factors = desc.get("factors")
            if not factors:
                raise StructureError(f"action {k}: graph needs factor scopes")
            used = set()
            for scope in factors:
                for v in scope:
                    if not isinstance(v, int) or not 0 <= v < len(sources):
                        raise StructureError(
                            f"action {k}: scope variable {v!r} out of range")
                    used.add(v)
            if used != set(range(len(sources))):
                unused = sorted(set(range(len(sources))) - used)
                raise StructureError(
                    f"action {k}: sources {unused} appear in no factor scope")
        elif "factors" in desc:
            raise StructureError(f"action {k}: memo entries take no factors")


def structures_to_file(structures: dict, path) -> None:
    validate_structures(structures)
    payload = {"actions": {str(k): structures[k] for k in sorted(structures)}}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def structures_from_file(path) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            payload = json.load(fh)
        except json.JSONDecodeError as exc:
            raise StructureError(f"invalid structures file: {exc}") from exc
    if not isinstance(payload, dict) or "actions" not in payload:
        raise StructureError("structures file must contain an 'actions' map")
    try:
        structures = {int(k): v for k, v in payload["actions"].items()}
    except (TypeError, ValueError) as exc:
        raise StructureError(f"action keys must be integers: {exc}") from exc
    validate_structures(structures)
    return structures


# ------------------------------------------------------------------- memo

class MemoTable:
    """Positive/total counts per substate cell; unseen cells score 0."""

    def __init__(self, selector: Selector, pos=None, total=None):
        self.selector = selector
        size = selector.flat_size()
        self.pos = np.zeros(size) if pos is None else np.asarray(pos, dtype=np.float64)
        self.total = np.zeros(size) if total is None else np.asarray(total, dtype=np.float64)
        if self.pos.shape != (size,) or self.total.shape != (size,):
            raise StructureError("memo table size does not match its selector")
        if np.any(self.pos > self.total):
            raise StructureError("memo table has positive count > total count")

    def score(self, substate) -> float:
        i = self.selector.flat_index(substate)
        total = self.total[i]
        return float(self.pos[i] / total) if total > 0 else 0.0

    def score_flat(self) -> np.ndarray:
        return np.where(self.total > 0, self.pos / np.maximum(self.total, 1.0), 0.0)

    def score_batch(self, codes) -> np.ndarray:
        codes = np.asarray(codes, dtype=np.int64)
        flat = np.ravel_multi_index(tuple(codes[:, i] for i in range(codes.shape[1])),
                                    tuple(self.selector.cards))
        return self.score_flat()[flat]


def memo_fit(dataset: Dataset, action: int, selector: Selector) -> MemoTable:
    codes = selector.apply_batch(dataset.states)
    labels = (dataset.actions == action).astype(np.float64)
    return _memo_from_codes(selector, codes, labels)


def _memo_from_codes(selector, codes, labels) -> MemoTable:
    codes = np.asarray(codes, dtype=np.int64)
    size = selector.flat_size()
    flat = np.ravel_multi_index(tuple(codes[:, i] for i in range(codes.shape[1])),
                                tuple(selector.cards))
    table = MemoTable(selector)
    table.pos = np.bincount(flat, weights=np.asarray(labels, dtype=np.float64),
                            minlength=size).astype(np.float64)
    table.total = np.bincount(flat, minlength=size).astype(np.float64)
    return table


def memo_score(table: MemoTable, substate) -> float:
    return table.score(substate)


def select_substate(state, selector: Selector) -> tuple:
    return selector.apply(state)


def graph_infer(model: FactorGraphModel, substate) -> float:
    return model.infer(substate)


# ------------------------------------------------------- scalar extraction

def _scalar_extractor(desc: dict, config: EnvConfig):
    """Python-scalar version of a feature, for the per-step fast path."""
    kind = desc["feature"]
    hw = config.happiness_max / N_HAPPINESS_BINS
    top = N_HAPPINESS_BINS - 1
    if kind == "state_index":
        i = desc["index"]
        return lambda s: int(s[i])
    if kind == "table_stage":
        i = TABLE_BASE + desc["table"] * TABLE_STRIDE
        return lambda s: int(s[i])
    if kind == "table_group_size":
        i = TABLE_BASE + desc["table"] * TABLE_STRIDE + 1
        return lambda s: int(s[i])
    if kind == "table_happiness_bin":
        i = TABLE_BASE + desc["table"] * TABLE_STRIDE + 2
        return lambda s: min(top, int(s[i] / hw))
    if kind == "table_food_ready":
        i = TABLE_BASE + desc["table"] * TABLE_STRIDE + 3
        return lambda s: int(s[i])
    if kind == "table_size":
        c = int(config.table_sizes[desc["table"]])
        return lambda s: c
    if kind == "queue_group_size":
        i = QUEUE_BASE + desc["slot"] * QUEUE_STRIDE
        return lambda s: int(s[i])
    if kind == "queue_happiness_bin":
        i = QUEUE_BASE + desc["slot"] * QUEUE_STRIDE + 1
        return lambda s: min(top, int(s[i] / hw))
    if kind == "hands":
        return lambda s: int(s[HANDS_INDEX])
    if kind == "position":
        return lambda s: int(s[POSITION_INDEX])
    if kind == "at_kitchen":
        return lambda s: 1 if int(s[POSITION_INDEX]) == 0 else 0
    if kind == "stage_at_position":
        def stage_at(s):
            pos = int(s[POSITION_INDEX])
            return 7 if pos == 0 else int(s[TABLE_BASE + (pos - 1) * TABLE_STRIDE])
        return stage_at
    if kind == "hands_match_position":
        def match(s):
            pos = int(s[POSITION_INDEX])
            return 1 if pos >= 1 and int(s[HANDS_INDEX]) == pos else 0
        return match
    stage_cols = [TABLE_BASE + t * TABLE_STRIDE for t in range(A.N_TABLES)]
    if kind == "any_food_ready":
        cols = [c + 3 for c in stage_cols]
        return lambda s: 1 if any(int(s[c]) == 1 for c in cols) else 0
    stage_by_kind = {"any_order_pending": ORDER_TAKEN, "any_await_order": AWAIT_ORDER,
                     "any_await_bill": AWAIT_BILL, "any_dirty": DIRTY}
    if kind in stage_by_kind:
        want = stage_by_kind[kind]
        return lambda s: 1 if any(int(s[c]) == want for c in stage_cols) else 0
    if kind == "queue_nonempty":
        return lambda s: 1 if int(s[QUEUE_BASE]) > 0 else 0
    raise StructureError(f"unknown feature '{kind}'")


# ------------------------------------------------------------------ policy

class DpgmPolicy:
    """57 per-action scorers plus the reweighting net that arbitrates."""

    name = "dpgm"

    def __init__(self, config: EnvConfig = None, structures: dict = None,
                 net_hidden: int = 64, net_seed: int = 0):
        if config is None:
            config = default_config()
        config.validate()
        if structures is None:
            structures = default_structures()
        validate_structures(structures)
        self.config = config
        self.structures = {k: dict(structures[k]) for k in range(A.N_ACTIONS)}
        self.kinds = [self.structures[k]["type"] for k in range(A.N_ACTIONS)]
        self.selectors = {k: Selector(self.structures[k]["sources"], config)
                          for k in range(A.N_ACTIONS)}
        self.graphs = {}
        self.memos = {}
        for k in range(A.N_ACTIONS):
            if self.kinds[k] == GRAPH:
                self.graphs[k] = FactorGraphModel(self.selectors[k].cards,
                                                  self.structures[k]["factors"])
            else:
                self.memos[k] = MemoTable(self.selectors[k])
        self.net = DenseNet([A.N_ACTIONS, net_hidden, A.N_ACTIONS], seed=net_seed)
        self._program = None

    # -- compiled single-state path

    def _invalidate(self) -> None:
        self._program = None

    def _compile(self) -> None:
        slots = {}
        closures = []
        for k in range(A.N_ACTIONS):
            for src in self.selectors[k].sources:
                if src.name not in slots:
                    slots[src.name] = len(closures)
                    closures.append(_scalar_extractor(src.desc, self.config))
        program = []
        for k in range(A.N_ACTIONS):
            sel = self.selectors[k]
            src_slots = [slots[s.name] for s in sel.sources]
            if self.kinds[k] == GRAPH:
                model = self.graphs[k]
                entries = [(delta, tuple(src_slots[v] for v in scope))
                           for scope, delta in zip(model.scopes,
                                                   model.delta_tables())]
                program.append((GRAPH, entries))
            else:
                strides = [1] * len(sel.cards)
                for i in range(len(sel.cards) - 2, -1, -1):
                    strides[i] = strides[i + 1] * sel.cards[i + 1]
                program.append((MEMO, self.memos[k].score_flat(),
                                list(zip(src_slots, strides))))
        self._closures = closures
        self._program = program

    def scores(self, state) -> np.ndarray:
        if self._program is None:
            self._compile()
        vals = [fn(state) for fn in self._closures]
        out = np.empty(A.N_ACTIONS)
        for k, entry in enumerate(self._program):
            if entry[0] == GRAPH:
                d = 0.0
                for delta, slot_ids in entry[1]:
                    d += delta[tuple(vals[i] for i in slot_ids)]
                out[k] = 1.0 / (1.0 + math.exp(-d))
            else:
                flat = 0
                for slot, stride in entry[2]:
                    flat += vals[slot] * stride
                out[k] = entry[1][flat]
        return out

    def forward(self, state):
        scores = self.scores(state)
        logits, _ = self.net.forward(scores, train=False)
        return scores, logits

    def act(self, state, mode: str = "argmax", rng=None) -> int:
        return dpgm_act(self, state, mode, rng)

    # -- batched path (training, bulk accuracy)

    def source_code_cache(self, states) -> dict:
        """One extracted column per distinct feature, shared across actions."""
        states = np.asarray(states, dtype=np.float64)
        cache = {}
        for k in range(A.N_ACTIONS):
            for src in self.selectors[k].sources:
                if src.name not in cache:
                    cache[src.name] = src.extract_batch(states)
        return cache

    def action_codes(self, action: int, cache: dict) -> np.ndarray:
        cols = [cache[s.name] for s in self.selectors[action].sources]
        return np.stack(cols, axis=1)

    def scores_batch(self, states, cache: dict = None) -> np.ndarray:
        states = np.asarray(states, dtype=np.float64)
        if cache is None:
            cache = self.source_code_cache(states)
        out = np.empty((states.shape[0], A.N_ACTIONS))
        for k in range(A.N_ACTIONS):
            codes = self.action_codes(k, cache)
            if self.kinds[k] == GRAPH:
                out[:, k] = self.graphs[k].infer_batch(codes)
            else:
                out[:, k] = self.memos[k].score_batch(codes)
        return out

    def logits_batch(self, states) -> np.ndarray:
        scores = self.scores_batch(states)
        logits, _ = self.net.forward(scores, train=False)
        return logits

    def act_batch(self, states) -> np.ndarray:
        return np.argmax(self.logits_batch(states), axis=1)


def dpgm_forward(policy: DpgmPolicy, state):
    return policy.forward(state)


def dpgm_act(policy: DpgmPolicy, state, mode: str = "argmax", rng=None) -> int:
    _, logits = policy.forward(state)
    if mode == "argmax":
        return int(np.argmax(logits))
    if mode == "softmax-sample":
        if rng is None:
            rng = np.random.default_rng(0)
        p = softmax(logits)
        r = rng.random()
        return int(min(np.searchsorted(np.cumsum(p), r, side="right"),
                       A.N_ACTIONS - 1))
    raise ValueError(f"unknown act mode '{mode}'")


# ---------------------------------------------------------------- training

@dataclass
class DpgmHyper:
    graph_lr: float = 1.0
    graph_iters: int = 200
    graph_tol: float = 1e-10
    pos_weight_cap: float = 100.0
    net_hidden: int = 64
    net_seed: int = 0
    net_lr: float = 1e-3
    net_epochs: int = 10
    batch_size: int = 256
    finetune: bool = True
    finetune_lr: float = 1e-4
    finetune_epochs: int = 8
    shuffle_seed: int = 0


def dpgm_train(dataset: Dataset, config: EnvConfig = None,
               structures: dict = None, hyper: DpgmHyper = None,
               log=None):
    """Three-phase fit; returns (policy, info).

    Phase 1 trains every per-action scorer on the relabeled binary problems;
    phase 2 trains the reweighting net on the frozen score vectors; phase 3
    (``hyper.finetune``) backpropagates cross-entropy through both the net and
    the graph potentials jointly. ``info`` carries loss traces and the list of
    actions that had no positive examples (they are still fitted: with only
    negatives the squared loss just pushes their scores toward zero).
    """
    if hyper is None:
        hyper = DpgmHyper()
    if config is None:
        if dataset.header.config is not None:
            config = EnvConfig.from_dict(dataset.header.config)
        else:
            config = default_config()
    say = log if log is not None else (lambda msg: None)

    policy = DpgmPolicy(config, structures, hyper.net_hidden, hyper.net_seed)
    states = dataset.states
    labels_all = dataset.actions
    n = len(dataset)
    cache = policy.source_code_cache(states)
    info = {"zero_positive": [], "phase1": {}, "phase2_losses": [],
            "phase3_losses": []}

    say("phase 1: per-action scorers")
    for k in range(A.N_ACTIONS):
        codes = policy.action_codes(k, cache)
        labels = (labels_all == k).astype(np.int64)
        if labels.sum() == 0:
            info["zero_positive"].append(k)
        sel = policy.selectors[k]
        if policy.kinds[k] == GRAPH:
            model, history = graph_train(
                codes, labels, sel.cards, policy.structures[k]["factors"],
                pos_weight_cap=hyper.pos_weight_cap, lr=hyper.graph_lr,
                max_iter=hyper.graph_iters, tol=hyper.graph_tol)
            policy.graphs[k] = model
            info["phase1"][k] = history
        else:
            policy.memos[k] = _memo_from_codes(sel, codes, labels)
            info["phase1"][k] = {"cells": int(policy.memos[k].total.nonzero()[0].size)}

    say("phase 2: reweighting net")
    scores = policy.scores_batch(states, cache)
    rng = np.random.default_rng(hyper.shuffle_seed)
    opt = Adam(lr=hyper.net_lr)
    params = policy.net.params()
    for epoch in range(hyper.net_epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, hyper.batch_size):
            idx = perm[lo:lo + hyper.batch_size]
            logits, caches = policy.net.forward(scores[idx], train=True)
            loss, dlogits = softmax_cross_entropy_batch(logits, labels_all[idx])
            grads, _ = policy.net.backward(caches, dlogits)
            opt.step(params, grads)
            total += loss * len(idx)
        info["phase2_losses"].append(total / n)
        say(f"  epoch {epoch}: ce {total / n:.4f}")

    if hyper.finetune:
        say("phase 3: end-to-end fine-tune")
        info["phase3_losses"] = _finetune(policy, cache, labels_all, hyper, say)

    policy._invalidate()
    return policy, info


def _finetune(policy: DpgmPolicy, cache: dict, labels_all, hyper: DpgmHyper,
              say) -> list:
    n = len(labels_all)
    memo_scores = {}
    graph_cols = {}
    for k in range(A.N_ACTIONS):
        if policy.kinds[k] == MEMO:
            codes = policy.action_codes(k, cache)
            memo_scores[k] = policy.memos[k].score_batch(codes)
        else:
            graph_cols[k] = [cache[s.name] for s in policy.selectors[k].sources]

    params = policy.net.params()
    for k, model in policy.graphs.items():
        for f, theta in enumerate(model.theta):
            params[f"theta:{k}:{f}"] = theta

    opt = Adam(lr=hyper.finetune_lr)
    rng = np.random.default_rng(hyper.shuffle_seed + 1)
    losses = []
    for epoch in range(hyper.finetune_epochs):
        perm = rng.permutation(n)
        total = 0.0
        for lo in range(0, n, hyper.batch_size):
            idx = perm[lo:lo + hyper.batch_size]
            b = len(idx)
            scores = np.empty((b, A.N_ACTIONS))
            batch_codes = {}
            for k in range(A.N_ACTIONS):
                if policy.kinds[k] == MEMO:
                    scores[:, k] = memo_scores[k][idx]
                    continue
                model = policy.graphs[k]
                cols = [c[idx] for c in graph_cols[k]]
                d = np.zeros(b)
                for scope, theta in zip(model.scopes, model.theta):
                    cell = tuple(cols[v] for v in scope)
                    d += theta[cell + (1,)] - theta[cell + (0,)]
                scores[:, k] = sigmoid(d)
                batch_codes[k] = cols
            logits, caches = policy.net.forward(scores, train=True)
            loss, dlogits = softmax_cross_entropy_batch(logits, labels_all[idx])
            grads, dscores = policy.net.backward(caches, dlogits)
            for k, model in policy.graphs.items():
                p = scores[:, k]
                dd = dscores[:, k] * p * (1.0 - p)
                cols = batch_codes[k]
                for f, (scope, theta) in enumerate(zip(model.scopes, model.theta)):
                    g = np.zeros_like(theta)
                    cell = tuple(cols[v] for v in scope)
                    np.add.at(g, cell + (1,), dd)
                    np.add.at(g, cell + (0,), -dd)
                    grads[f"theta:{k}:{f}"] = g
            opt.step(params, grads)
            total += loss * b
        losses.append(total / n)
        say(f"  epoch {epoch}: ce {total / n:.4f}")
    return losses


# ------------------------------------------------------------- persistence

def save_policy(policy: DpgmPolicy, path) -> None:
    arrays = {}
    for k, model in policy.graphs.items():
        for f, theta in enumerate(model.theta):
            arrays[f"theta:{k}:{f}"] = theta
    for k, memo in policy.memos.items():
        arrays[f"memo_pos:{k}"] = memo.pos
        arrays[f"memo_total:{k}"] = memo.total
    for name, value in policy.net.params().items():
        arrays[f"net:{name}"] = value
    meta = {
        "config": policy.config.to_dict(),
        "structures": {str(k): policy.structures[k] for k in range(A.N_ACTIONS)},
        "net": policy.net.meta(),
    }
    save_checkpoint(path, "dpgm", arrays, meta)


def load_policy(path) -> DpgmPolicy:
    kind, arrays, meta = load_checkpoint(path)
    if kind != "dpgm":
        raise StructureError(f"not a dpgm checkpoint (kind '{kind}')")
    config = EnvConfig.from_dict(meta["config"])
    structures = {int(k): v for k, v in meta["structures"].items()}
    net = DenseNet.from_meta(meta["net"], {
        name[len("net:"):]: value for name, value in arrays.items()
        if name.startswith("net:")})
    policy = DpgmPolicy(config, structures, net_hidden=net.widths[1],
                        net_seed=net.seed)
    policy.net = net
    for k, model in policy.graphs.items():
        theta = [np.asarray(arrays[f"theta:{k}:{f}"])
                 for f in range(len(model.scopes))]
        policy.graphs[k] = FactorGraphModel(model.cards, model.scopes, theta)
    for k in policy.memos:
        policy.memos[k] = MemoTable(policy.selectors[k],
                                    arrays[f"memo_pos:{k}"],
                                    arrays[f"memo_total:{k}"])
    policy._invalidate()
    return policy
