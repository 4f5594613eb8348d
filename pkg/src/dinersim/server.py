"""Line-delimited JSON environment server over stdio.

One environment per process. Requests are processed strictly in arrival
order; every request gets exactly one reply line (except ``close``, which
ends the process). The wire protocol::

    -> {"cmd":"reset","seed":7}
    <- {"state":[...40 numbers...]}
    -> {"cmd":"step","action":3}
    <- {"state":[...],"reward":2.0,"done":false,"info":{...}}
    -> {"cmd":"spec"}
    <- {"n_actions":57,"state_dim":40}
    -> {"cmd":"close"}
    (server exits)

Malformed or unknown requests produce {"error":"..."} and the loop continues,
so a client bug cannot wedge the server. Stepping before the first reset is
an error reply, not a crash.
"""

import json
import sys

from . import actions as A
from .config import EnvConfig, default_config
from .env import STATE_DIM, Env, EnvError


def _state_json(vec) -> list:
    return [float(v) for v in vec]


def serve(config: EnvConfig = None, stdin=None, stdout=None) -> None:
    if config is None:
        config = default_config()
    if stdin is None:
        stdin = sys.stdin
    if stdout is None:
        stdout = sys.stdout

    env = None

    def reply(payload: dict) -> None:
        stdout.write(json.dumps(payload, separators=(",", ":")))
        stdout.write("\n")
        stdout.flush()

    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            req = json.loads(line)
        except json.JSONDecodeError as exc:
            reply({"error": f"invalid JSON: {exc}"})
            continue
        if not isinstance(req, dict) or "cmd" not in req:
            reply({"error": "request must be an object with a 'cmd' field"})
            continue
        cmd = req["cmd"]
        if cmd == "close":
            break
        if cmd == "spec":
            reply({"n_actions": A.N_ACTIONS, "state_dim": STATE_DIM})
        elif cmd == "reset":
            seed = req.get("seed", 0)
            if not isinstance(seed, int):
                reply({"error": f"seed must be an integer, got {seed!r}"})
                continue
            if env is None:
                env = Env(config, seed)
            state = env.reset(seed)
            reply({"state": _state_json(state)})
        elif cmd == "step":
            if env is None:
                reply({"error": "step before reset"})
                continue
            action = req.get("action")
            if not isinstance(action, int) or not 0 <= action < A.N_ACTIONS:
                reply({"error": f"action must be an integer in [0, "
                                f"{A.N_ACTIONS - 1}], got {action!r}"})
                continue
            try:
                res = env.step(action)
            except EnvError as exc:
                reply({"error": str(exc)})
                continue
            reply({"state": _state_json(res.state_vec),
                   "reward": float(res.reward),
                   "done": bool(res.done),
                   "info": res.info})
        else:
            reply({"error": f"unknown cmd {cmd!r}"})
