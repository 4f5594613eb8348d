"""Scripted expert used to generate demonstrations.

The expert is a memoryless function of the encoded 40-entry state. It walks a
fixed priority list and emits the first applicable action:

    1. deliver carried food (serve, moving to the table first)
    2. drop carried dirty dishes (return, moving to the kitchen first)
    3. fetch a ready dish when empty-handed (pickup / move to kitchen)
    4. collect the bill of the unhappiest bill-waiting table (move first)
    5. take the order of the unhappiest order-waiting table (move first)
    6. submit taken orders (move to kitchen first)
    7. seat the unhappiest waiting group that fits somewhere, into the
       smallest fitting empty table
    8. clean a dirty table that a waiting group could use, or any dirty
       table when otherwise idle
    9. wait

Ties are always broken toward the lowest index. The urgency threshold bends
rules 4-5 toward the groups that actually need attention: tables whose
happiness is still at or above the threshold are not billed or ordered from
until seating and cleaning are taken care of, so a crowded queue drains
before comfortable guests get their checks. Deferred tables are picked up
again after rule 8 (same lowest-happiness-first order). Setting the
threshold to 0 disables deferral, leaving exactly the list above.
"""

from dataclasses import dataclass

import numpy as np

from . import actions as A
from . import env as E
from .config import EnvConfig

CATEGORIES = ("serve", "return", "pickup", "bill", "order", "submit",
              "seat", "clean", "wait")


@dataclass
class ExpertConfig:
    priority: tuple = CATEGORIES
    urgency_threshold: float = 4.0

    def validate(self):
        if tuple(sorted(self.priority)) != tuple(sorted(CATEGORIES)):
            raise ValueError("priority must be a permutation of the task categories")
        if self.urgency_threshold < 0:
            raise ValueError("urgency_threshold must be >= 0")


class ExpertPolicy:
    """Policy-protocol wrapper around ``expert_action``."""

    name = "expert"

    def __init__(self, config: EnvConfig, expert_config: ExpertConfig = None):
        self.config = config
        self.expert_config = expert_config or ExpertConfig()
        self.expert_config.validate()

    def act(self, obs: np.ndarray) -> int:
        return expert_action(obs, self.config, self.expert_config)


def expert_action(obs: np.ndarray, config: EnvConfig,
                  expert_config: ExpertConfig = None) -> int:
    xc = expert_config or ExpertConfig()
    obs = np.asarray(obs)
    position = int(obs[E.POSITION_INDEX])
    hands = int(obs[E.HANDS_INDEX])

    stages = [int(obs[E.TABLE_BASE + E.TABLE_STRIDE * t]) for t in range(A.N_TABLES)]
    table_h = [float(obs[E.TABLE_BASE + E.TABLE_STRIDE * t + 2]) for t in range(A.N_TABLES)]
    ready = [int(obs[E.TABLE_BASE + E.TABLE_STRIDE * t + 3]) for t in range(A.N_TABLES)]
    qsize = [int(obs[E.QUEUE_BASE + E.QUEUE_STRIDE * g]) for g in range(A.N_QUEUE_SLOTS)]
    qh = [float(obs[E.QUEUE_BASE + E.QUEUE_STRIDE * g + 1]) for g in range(A.N_QUEUE_SLOTS)]

    candidates = {}
    thr = xc.urgency_threshold

    # 1. serve carried food
    if 1 <= hands <= 6:
        candidates["serve"] = A.SERVE_FOOD if position == hands \
            else A.move_to_table(hands - 1)

    # 2. return dirty dishes
    if hands == E.HANDS_DIRTY:
        candidates["return"] = A.RETURN_DISHES if position == 0 else A.MOVE_TO_KITCHEN

    # 3. pick up a ready dish
    if hands == E.HANDS_EMPTY and any(ready):
        candidates["pickup"] = A.PICKUP_FOOD if position == 0 else A.MOVE_TO_KITCHEN

    # 4. collect the most urgent bill (deferred above the threshold)
    bill_t = _pick_table(stages, table_h, E.AWAIT_BILL, thr)
    if bill_t is not None:
        candidates["bill"] = A.COLLECT_BILL if position == bill_t + 1 \
            else A.move_to_table(bill_t)

    # 5. take the most urgent order (deferred above the threshold)
    order_t = _pick_table(stages, table_h, E.AWAIT_ORDER, thr)
    if order_t is not None:
        candidates["order"] = A.TAKE_ORDER if position == order_t + 1 \
            else A.move_to_table(order_t)

    # 6. submit taken orders
    if any(s == E.ORDER_TAKEN for s in stages):
        candidates["submit"] = A.SUBMIT_ORDERS if position == 0 else A.MOVE_TO_KITCHEN

    # 7. seat: groups by rising happiness, first one with a fitting table
    order_g = sorted((g for g in range(A.N_QUEUE_SLOTS) if qsize[g] > 0),
                     key=lambda g: (qh[g], g))
    for g in order_g:
        best = _smallest_fit(stages, config, E.EMPTY, qsize[g])
        if best is not None:
            candidates["seat"] = A.seat_action(g, best)
            break

    # 8. clean a dirty table a waiting group could use
    dirty = [t for t in range(A.N_TABLES) if stages[t] == E.DIRTY]
    clean_t = None
    if dirty and hands == E.HANDS_EMPTY:
        sizes_waiting = [s for s in qsize if s > 0]
        usable = [t for t in dirty
                  if any(s <= config.table_sizes[t] for s in sizes_waiting)]
        if usable:
            clean_t = usable[0]
        elif not candidates:
            # idle: clear backlog anyway
            clean_t = dirty[0]
    if clean_t is not None:
        candidates["clean"] = A.CLEAN_TABLE if position == clean_t + 1 \
            else A.move_to_table(clean_t)

    # deferred service: comfortable tables get their turn once nothing
    # above claimed the step
    if thr > 0:
        bill_r = _pick_table(stages, table_h, E.AWAIT_BILL)
        if bill_r is not None and "bill" not in candidates:
            candidates["bill_rest"] = A.COLLECT_BILL if position == bill_r + 1 \
                else A.move_to_table(bill_r)
        order_r = _pick_table(stages, table_h, E.AWAIT_ORDER)
        if order_r is not None and "order" not in candidates:
            candidates["order_rest"] = A.TAKE_ORDER if position == order_r + 1 \
                else A.move_to_table(order_r)

    candidates["wait"] = A.WAIT

    expanded = [c for c in xc.priority if c != "wait"]
    expanded += ["bill_rest", "order_rest", "wait"]
    for cat in expanded:
        if cat in candidates:
            return candidates[cat]
    return A.WAIT


def _smallest_fit(stages, config: EnvConfig, wanted_stage: int, size: int):
    best = None
    for t in range(A.N_TABLES):
        if stages[t] == wanted_stage and size <= config.table_sizes[t]:
            key = (config.table_sizes[t], t)
            if best is None or key < best[0]:
                best = (key, t)
    return None if best is None else best[1]


def _pick_table(stages, table_h, wanted_stage, below=None):
    """Lowest-happiness table in ``wanted_stage``; optionally only below a cap."""
    best = None
    for t in range(A.N_TABLES):
        if stages[t] == wanted_stage:
            if below is not None and below > 0 and table_h[t] >= below:
                continue
            key = (table_h[t], t)
            if best is None or key < best[1]:
                best = (t, key)
    return None if best is None else best[0]
