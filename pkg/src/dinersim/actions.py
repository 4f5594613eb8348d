"""Fixed 57-action layout and helpers.

Index map:
    0       WAIT
    1..6    MOVE_TO_TABLE(t), t = table index 0..5
    7       TAKE_ORDER
    8       SUBMIT_ORDERS
    9       PICKUP_FOOD
    10      SERVE_FOOD
    11      COLLECT_BILL
    12      CLEAN_TABLE
    13      RETURN_DISHES
    14      MOVE_TO_KITCHEN
    15..56  SEAT(g, t) = 15 + 6*g + t, queue slot g 0..6, table t 0..5
"""

N_ACTIONS = 57
N_TABLES = 6
N_QUEUE_SLOTS = 7

WAIT = 0
MOVE_TABLE_BASE = 1  # actions 1..6
TAKE_ORDER = 7
SUBMIT_ORDERS = 8
PICKUP_FOOD = 9
SERVE_FOOD = 10
COLLECT_BILL = 11
CLEAN_TABLE = 12
RETURN_DISHES = 13
MOVE_TO_KITCHEN = 14
SEAT_BASE = 15  # actions 15..56


def move_to_table(table: int) -> int:
    if not 0 <= table < N_TABLES:
        raise ValueError(f"table index out of range: {table}")
    return MOVE_TABLE_BASE + table


def seat_action(group_slot: int, table: int) -> int:
    if not 0 <= group_slot < N_QUEUE_SLOTS:
        raise ValueError(f"queue slot out of range: {group_slot}")
    if not 0 <= table < N_TABLES:
        raise ValueError(f"table index out of range: {table}")
    return SEAT_BASE + N_TABLES * group_slot + table


def seat_pair(action: int) -> tuple:
    """Inverse of seat_action: action index -> (group_slot, table)."""
    if not SEAT_BASE <= action < N_ACTIONS:
        raise ValueError(f"not a seating action: {action}")
    off = action - SEAT_BASE
    return off // N_TABLES, off % N_TABLES


def is_move_to_table(action: int) -> bool:
    return MOVE_TABLE_BASE <= action < MOVE_TABLE_BASE + N_TABLES


def is_seat(action: int) -> bool:
    return SEAT_BASE <= action < N_ACTIONS


def action_name(action: int) -> str:
    if action == WAIT:
        return "WAIT"
    if is_move_to_table(action):
        return f"MOVE_TO_TABLE({action - MOVE_TABLE_BASE})"
    simple = {
        TAKE_ORDER: "TAKE_ORDER",
        SUBMIT_ORDERS: "SUBMIT_ORDERS",
        PICKUP_FOOD: "PICKUP_FOOD",
        SERVE_FOOD: "SERVE_FOOD",
        COLLECT_BILL: "COLLECT_BILL",
        CLEAN_TABLE: "CLEAN_TABLE",
        RETURN_DISHES: "RETURN_DISHES",
        MOVE_TO_KITCHEN: "MOVE_TO_KITCHEN",
    }
    if action in simple:
        return simple[action]
    if is_seat(action):
        g, t = seat_pair(action)
        return f"SEAT({g},{t})"
    raise ValueError(f"action index out of range: {action}")
