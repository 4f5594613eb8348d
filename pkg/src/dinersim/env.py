"""The restaurant-service MDP: dynamics, rewards, legality, state encoding.

One waitress serves six tables and a seven-slot waiting queue. Each step the
agent issues one of 57 discrete actions (see ``actions``); illegal actions
cost a fixed penalty and do nothing, but time always advances: cooking and
eating timers tick, happiness decays, groups whose happiness reaches zero
walk out (costing a life), and new groups may arrive. An episode ends when
all lives are lost or the step cap is reached.

Step order inside ``step``:
    (a) action effect, or the illegal penalty with no effect
    (b) timers: cooking finishes -> dish ready; eating finishes -> bill due
    (c) happiness decay by stage / queue rates
    (d) departures (happiness <= 0): table left dirty or queue slot vacated,
        one life lost each
    (e) arrival coin flip (needs a free queue slot)
    (f) step counter, termination check

The canonical observation is a 40-entry vector::

    0..23   per table t (4 each): stage, group_size, happiness, food_ready
    24..37  per queue slot g (2 each): group_size, happiness
    38      waitress position (0 = kitchen, 1..6 = at table index-1)
    39      hands (0 empty, 1..6 food for table index-1, 7 dirty dishes)

Lives, the step counter and RNG state are deliberately not encoded; they are
reported through ``StepResult.info``. Pending (taken, unsubmitted) orders are
recoverable from the encoding: a table is pending iff its stage is
ORDER_TAKEN.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import actions as A
from .config import EnvConfig, default_config
from .rng import Rng, STREAM_ARRIVAL, STREAM_GROUP_SIZE

# table stages
EMPTY = 0
AWAIT_ORDER = 1
ORDER_TAKEN = 2
COOKING = 3
EATING = 4
AWAIT_BILL = 5
DIRTY = 6

STAGE_NAMES = ("EMPTY", "AWAIT_ORDER", "ORDER_TAKEN", "COOKING", "EATING",
               "AWAIT_BILL", "DIRTY")

# stages with a live group at the table
OCCUPIED_STAGES = (AWAIT_ORDER, ORDER_TAKEN, COOKING, EATING, AWAIT_BILL)

# hands codes
HANDS_EMPTY = 0
HANDS_DIRTY = 7  # 1..6 = food for table (index+1)

# state vector layout
STATE_DIM = 40
TABLE_BASE = 0
TABLE_STRIDE = 4
QUEUE_BASE = 24
QUEUE_STRIDE = 2
POSITION_INDEX = 38
HANDS_INDEX = 39


class EnvError(RuntimeError):
    """Misuse of the environment API (bad action index, step after done...)."""


class Table:
    __slots__ = ("stage", "group_size", "happiness", "food_ready", "timer")

    def __init__(self):
        self.stage = EMPTY
        self.group_size = 0
        self.happiness = 0.0
        self.food_ready = 0
        self.timer = 0

    def clear(self, stage=EMPTY):
        self.stage = stage
        self.group_size = 0
        self.happiness = 0.0
        self.food_ready = 0
        self.timer = 0

    def copy(self):
        other = object.__new__(Table)
        other.stage = self.stage
        other.group_size = self.group_size
        other.happiness = self.happiness
        other.food_ready = self.food_ready
        other.timer = self.timer
        return other


class Group:
    __slots__ = ("size", "happiness")

    def __init__(self, size, happiness):
        self.size = size
        self.happiness = happiness

    def copy(self):
        return Group(self.size, self.happiness)


@dataclass
class StepResult:
    state_vec: np.ndarray
    reward: float
    done: bool
    info: dict


def state_ranges(config: EnvConfig) -> np.ndarray:
    """Per-dimension maxima of the encoding (minima are all zero)."""
    hmax = config.happiness_max
    size_max = max(config.table_sizes)
    r = np.empty(STATE_DIM)
    for t in range(A.N_TABLES):
        r[TABLE_BASE + TABLE_STRIDE * t:TABLE_BASE + TABLE_STRIDE * (t + 1)] = \
            (6, size_max, hmax, 1)
    for g in range(A.N_QUEUE_SLOTS):
        r[QUEUE_BASE + QUEUE_STRIDE * g:QUEUE_BASE + QUEUE_STRIDE * (g + 1)] = \
            (config.group_size_max, hmax)
    r[POSITION_INDEX] = 6
    r[HANDS_INDEX] = 7
    return r


class Env:
    """Deterministic, seedable instance of the restaurant MDP."""

    def __init__(self, config: EnvConfig = None, seed: int = 0):
        if config is None:
            config = default_config()
        config.validate()
        self.config = config
        self.seed = int(seed)
        self.tables = [Table() for _ in range(A.N_TABLES)]
        self.queue = []  # compacted: index == queue slot
        self.position = 0
        self.hands = HANDS_EMPTY
        self.pending = set()  # table indices with taken, unsubmitted orders
        self.lives = config.max_lives
        self.step_count = 0
        self.cumulative_return = 0.0
        self.done = False
        self._started = False
        self._rng_arrival = Rng(self.seed, STREAM_ARRIVAL)
        self._rng_size = Rng(self.seed, STREAM_GROUP_SIZE)

    # ------------------------------------------------------------------ api

    def reset(self, seed: int = None) -> np.ndarray:
        """Start a fresh episode; reuses the stored seed when none is given."""
        if seed is not None:
            self.seed = int(seed)
        for table in self.tables:
            table.clear()
        self.queue = []
        self.position = 0
        self.hands = HANDS_EMPTY
        self.pending = set()
        self.lives = self.config.max_lives
        self.step_count = 0
        self.cumulative_return = 0.0
        self.done = False
        self._started = True
        self._rng_arrival = Rng(self.seed, STREAM_ARRIVAL)
        self._rng_size = Rng(self.seed, STREAM_GROUP_SIZE)
        return self.encode()

    def step(self, action: int) -> StepResult:
        if not self._started:
            raise EnvError("call reset() before step()")
        if self.done:
            raise EnvError("episode is done; call reset()")
        action = int(action)
        if not 0 <= action < A.N_ACTIONS:
            raise EnvError(f"action index out of range: {action}")
        cfg = self.config
        events = []
        illegal = not self._action_legal(action)
        if illegal:
            reward = cfg.r_illegal
        else:
            reward = self._apply(action, events)

        # (b) timers
        for t, table in enumerate(self.tables):
            if table.stage == COOKING and table.timer > 0:
                table.timer -= 1
                if table.timer == 0:
                    table.food_ready = 1
                    events.append(f"dish_ready:{t}")
            elif table.stage == EATING:
                table.timer -= 1
                if table.timer <= 0:
                    table.stage = AWAIT_BILL
                    table.timer = 0

        # (c) happiness decay
        for table in self.tables:
            rate = _DECAY_BY_STAGE(cfg, table.stage)
            if rate:
                table.happiness = max(0.0, table.happiness - rate)
        if cfg.decay_queue:
            for group in self.queue:
                group.happiness = max(0.0, group.happiness - cfg.decay_queue)

        # (d) departures
        departures = 0
        for t, table in enumerate(self.tables):
            if table.stage in OCCUPIED_STAGES and table.happiness <= 0.0:
                table.clear(stage=DIRTY)
                self.pending.discard(t)
                if self.hands == t + 1:
                    # the carried dish has no taker any more
                    self.hands = HANDS_DIRTY
                departures += 1
                events.append(f"left_table:{t}")
        if self.queue:
            kept = []
            for g, group in enumerate(self.queue):
                if group.happiness <= 0.0:
                    departures += 1
                    events.append(f"left_queue:{g}")
                else:
                    kept.append(group)
            self.queue = kept
        if departures:
            reward += cfg.r_leave * departures
            self.lives = max(0, self.lives - departures)

        # (e) arrival (the coin is flipped every step so the arrival stream
        # is indexed by step number, independent of queue occupancy)
        u = self._rng_arrival.random()
        if len(self.queue) < cfg.queue_capacity and u < cfg.arrival_prob:
            size = self._rng_size.randint(cfg.group_size_min, cfg.group_size_max)
            self.queue.append(Group(size, cfg.happiness_max))
            events.append(f"arrival:{size}")

        # (f) bookkeeping
        self.step_count += 1
        if self.lives == 0 or self.step_count >= cfg.max_steps:
            self.done = True
        self.cumulative_return += reward
        info = {
            "lives": self.lives,
            "illegal": illegal,
            "events": events,
            "step": self.step_count,
            "departures": departures,
        }
        return StepResult(self.encode(), reward, self.done, info)

    def legal_actions(self) -> np.ndarray:
        """0/1 mask over the 57 actions; 1 = no illegal penalty."""
        mask = np.zeros(A.N_ACTIONS, dtype=np.uint8)
        for a in range(A.N_ACTIONS):
            if self._action_legal(a):
                mask[a] = 1
        return mask

    def encode(self) -> np.ndarray:
        vec = np.zeros(STATE_DIM)
        for t, table in enumerate(self.tables):
            base = TABLE_BASE + TABLE_STRIDE * t
            vec[base] = table.stage
            vec[base + 1] = table.group_size
            vec[base + 2] = table.happiness
            vec[base + 3] = table.food_ready
        for g, group in enumerate(self.queue):
            base = QUEUE_BASE + QUEUE_STRIDE * g
            vec[base] = group.size
            vec[base + 1] = group.happiness
        vec[POSITION_INDEX] = self.position
        vec[HANDS_INDEX] = self.hands
        return vec

    def render_text(self) -> str:
        cfg = self.config
        lines = [
            f"step {self.step_count} | lives: {self.lives} | "
            f"return: {self.cumulative_return:.1f}",
        ]
        where = "kitchen" if self.position == 0 else f"table {self.position - 1}"
        if self.hands == HANDS_EMPTY:
            holding = "empty"
        elif self.hands == HANDS_DIRTY:
            holding = "dirty dishes"
        else:
            holding = f"food for table {self.hands - 1}"
        pend = ",".join(str(t) for t in sorted(self.pending)) or "none"
        lines.append(f"waitress: at {where} | hands: {holding} | pending orders: {pend}")
        for t, table in enumerate(self.tables):
            desc = STAGE_NAMES[table.stage]
            if table.stage in OCCUPIED_STAGES:
                desc += f" size={table.group_size} hearts={table.happiness:.2f}"
                if table.stage == COOKING and table.food_ready:
                    desc += " (dish ready)"
            lines.append(f"table {t} [{cfg.table_sizes[t]}]: {desc}")
        if self.queue:
            q = " ".join(f"[size={g.size} hearts={g.happiness:.2f}]" for g in self.queue)
        else:
            q = "(empty)"
        lines.append(f"queue: {q}")
        return "\n".join(lines)

    def clone(self) -> "Env":
        """Cheap deep copy; the clone replays identically."""
        other = object.__new__(Env)
        other.config = self.config
        other.seed = self.seed
        other.tables = [t.copy() for t in self.tables]
        other.queue = [g.copy() for g in self.queue]
        other.position = self.position
        other.hands = self.hands
        other.pending = set(self.pending)
        other.lives = self.lives
        other.step_count = self.step_count
        other.cumulative_return = self.cumulative_return
        other.done = self.done
        other._started = self._started
        other._rng_arrival = self._rng_arrival.clone()
        other._rng_size = self._rng_size.clone()
        return other

    # ------------------------------------------------------------- internals

    def _action_legal(self, a: int) -> bool:
        if a == A.WAIT or a == A.MOVE_TO_KITCHEN or A.is_move_to_table(a):
            return True
        pos = self.position
        if a == A.TAKE_ORDER:
            return pos >= 1 and self.tables[pos - 1].stage == AWAIT_ORDER
        if a == A.SUBMIT_ORDERS:
            return pos == 0 and bool(self.pending)
        if a == A.PICKUP_FOOD:
            return (pos == 0 and self.hands == HANDS_EMPTY
                    and any(t.food_ready for t in self.tables))
        if a == A.SERVE_FOOD:
            # hands must hold this table's dish and the group must still be
            # seated (its table stays COOKING until served)
            return (pos >= 1 and self.hands == pos
                    and self.tables[pos - 1].stage == COOKING)
        if a == A.COLLECT_BILL:
            return pos >= 1 and self.tables[pos - 1].stage == AWAIT_BILL
        if a == A.CLEAN_TABLE:
            return (pos >= 1 and self.tables[pos - 1].stage == DIRTY
                    and self.hands == HANDS_EMPTY)
        if a == A.RETURN_DISHES:
            return pos == 0 and self.hands == HANDS_DIRTY
        if A.is_seat(a):
            g, t = A.seat_pair(a)
            if g >= len(self.queue) or self.tables[t].stage != EMPTY:
                return False
            return self.queue[g].size <= self.config.table_sizes[t]
        return False

    def _apply(self, a: int, events: list) -> float:
        """Apply a legal action; returns the action reward."""
        cfg = self.config
        if a == A.WAIT:
            return 0.0
        if A.is_move_to_table(a):
            self.position = a - A.MOVE_TABLE_BASE + 1
            return 0.0
        if a == A.MOVE_TO_KITCHEN:
            self.position = 0
            return 0.0
        if a == A.TAKE_ORDER:
            t = self.position - 1
            self.tables[t].stage = ORDER_TAKEN
            self.pending.add(t)
            events.append(f"order_taken:{t}")
            return cfg.r_take_order
        if a == A.SUBMIT_ORDERS:
            for t in self.pending:
                self.tables[t].stage = COOKING
                self.tables[t].timer = cfg.cook_steps
            events.append(f"orders_submitted:{len(self.pending)}")
            self.pending = set()
            return cfg.r_submit
        if a == A.PICKUP_FOOD:
            t = min(i for i, table in enumerate(self.tables) if table.food_ready)
            self.tables[t].food_ready = 0
            self.hands = t + 1
            events.append(f"picked_up:{t}")
            return cfg.r_pickup
        if a == A.SERVE_FOOD:
            t = self.position - 1
            self.tables[t].stage = EATING
            self.tables[t].timer = cfg.eat_steps
            self.hands = HANDS_EMPTY
            events.append(f"served:{t}")
            return cfg.r_serve
        if a == A.COLLECT_BILL:
            t = self.position - 1
            hearts = math.floor(self.tables[t].happiness)
            self.tables[t].clear(stage=DIRTY)
            events.append(f"billed:{t}")
            return cfg.r_bill_base + cfg.r_bill_per_heart * hearts
        if a == A.CLEAN_TABLE:
            t = self.position - 1
            self.tables[t].clear(stage=EMPTY)
            self.hands = HANDS_DIRTY
            events.append(f"cleaned:{t}")
            return cfg.r_clean
        if a == A.RETURN_DISHES:
            self.hands = HANDS_EMPTY
            events.append("dishes_returned")
            return cfg.r_return
        # seating
        g, t = A.seat_pair(a)
        group = self.queue.pop(g)
        table = self.tables[t]
        table.stage = AWAIT_ORDER
        table.group_size = group.size
        table.happiness = group.happiness
        table.food_ready = 0
        table.timer = 0
        events.append(f"seated:{g}->{t}")
        return cfg.r_seat


def _DECAY_BY_STAGE(cfg: EnvConfig, stage: int) -> float:
    if stage == AWAIT_ORDER:
        return cfg.decay_await_order
    if stage == ORDER_TAKEN or stage == COOKING:
        return cfg.decay_await_food
    if stage == AWAIT_BILL:
        return cfg.decay_await_bill
    return 0.0  # EMPTY, EATING, DIRTY


def new_env(config: EnvConfig, seed: int) -> Env:
    """Construct (but do not reset) an environment; validates the config."""
    return Env(config, seed)


@dataclass
class TableView:
    stage: int
    group_size: int
    happiness: float
    food_ready: int


@dataclass
class GroupView:
    size: int
    happiness: float


@dataclass
class EnvView:
    """Structured read of an encoded state (no lives / timers / RNG)."""
    tables: list
    queue: list
    position: int
    hands: int
    pending: set


def decode_state(vec: np.ndarray) -> EnvView:
    vec = np.asarray(vec)
    if vec.shape != (STATE_DIM,):
        raise ValueError(f"state vector must have {STATE_DIM} entries")
    tables = []
    pending = set()
    for t in range(A.N_TABLES):
        base = TABLE_BASE + TABLE_STRIDE * t
        stage = int(vec[base])
        tables.append(TableView(stage, int(vec[base + 1]),
                                float(vec[base + 2]), int(vec[base + 3])))
        if stage == ORDER_TAKEN:
            pending.add(t)
    queue = []
    for g in range(A.N_QUEUE_SLOTS):
        base = QUEUE_BASE + QUEUE_STRIDE * g
        size = int(vec[base])
        if size > 0:
            queue.append(GroupView(size, float(vec[base + 1])))
    return EnvView(tables, queue, int(vec[POSITION_INDEX]),
                   int(vec[HANDS_INDEX]), pending)
