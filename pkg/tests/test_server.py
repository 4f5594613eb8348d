"""The line-delimited JSON environment server, in-process and as a child
process."""

import io
import json
import subprocess
import sys

from dinersim.config import default_config
from dinersim.env import Env
from dinersim.server import serve

CFG = default_config()


def run_server(requests, config=None):
    """Feed raw request lines through serve() and parse the replies."""
    lines = []
    for r in requests:
        lines.append(r if isinstance(r, str) else json.dumps(r))
    stdin = io.StringIO("".join(line + "\n" for line in lines))
    stdout = io.StringIO()
    serve(config or CFG, stdin, stdout)
    return [json.loads(s) for s in stdout.getvalue().splitlines()]


def test_spec_handshake():
    replies = run_server([{"cmd": "spec"}])
    assert replies == [{"n_actions": 57, "state_dim": 40}]


def test_reset_and_step_match_the_inprocess_env():
    actions = [0, 1, 0, 0, 14, 0, 2, 0, 0, 0, 3, 0, 0, 14, 0, 0, 5, 0, 0, 0]
    requests = [{"cmd": "reset", "seed": 5}]
    requests += [{"cmd": "step", "action": a} for a in actions]
    replies = run_server(requests)

    env = Env(CFG, 5)
    state = env.reset(5)
    assert replies[0]["state"] == [float(v) for v in state]
    for reply, action in zip(replies[1:], actions):
        res = env.step(action)
        assert reply["state"] == [float(v) for v in res.state_vec]
        assert reply["reward"] == float(res.reward)
        assert reply["done"] == res.done
        assert reply["info"]["lives"] == res.info["lives"]
        assert reply["info"]["illegal"] == res.info["illegal"]
        assert reply["info"]["events"] == res.info["events"]


def test_reset_reseeds_identically():
    requests = [{"cmd": "reset", "seed": 9},
                {"cmd": "step", "action": 0},
                {"cmd": "reset", "seed": 9},
                {"cmd": "step", "action": 0}]
    replies = run_server(requests)
    assert replies[0] == replies[2]
    assert replies[1] == replies[3]


def test_malformed_request_then_recovery():
    replies = run_server(["{oops", {"cmd": "spec"}])
    assert "invalid JSON" in replies[0]["error"]
    assert replies[1] == {"n_actions": 57, "state_dim": 40}


def test_request_must_be_an_object_with_cmd():
    replies = run_server(["[1,2]", {"nope": 1}, {"cmd": "spec"}])
    assert "cmd" in replies[0]["error"]
    assert "cmd" in replies[1]["error"]
    assert replies[2]["n_actions"] == 57


def test_step_before_reset_is_an_error():
    replies = run_server([{"cmd": "step", "action": 0}])
    assert replies == [{"error": "step before reset"}]


def test_unknown_cmd():
    replies = run_server([{"cmd": "dance"}])
    assert "unknown cmd" in replies[0]["error"]


def test_bad_action_and_seed_values():
    replies = run_server([{"cmd": "reset", "seed": "a"},
                          {"cmd": "reset", "seed": 0},
                          {"cmd": "step", "action": 57},
                          {"cmd": "step"},
                          {"cmd": "step", "action": "x"}])
    assert "seed" in replies[0]["error"]
    assert "state" in replies[1]
    for reply in replies[2:]:
        assert "action" in reply["error"]


def test_step_after_done_is_an_error_reply():
    tiny = CFG.replace(max_steps=2)
    replies = run_server([{"cmd": "reset", "seed": 0},
                          {"cmd": "step", "action": 0},
                          {"cmd": "step", "action": 0},
                          {"cmd": "step", "action": 0},
                          {"cmd": "spec"}], config=tiny)
    assert replies[2]["done"] is True
    assert "error" in replies[3]
    # and the server is still alive afterwards
    assert replies[4]["n_actions"] == 57


def test_close_stops_the_loop():
    replies = run_server([{"cmd": "spec"}, {"cmd": "close"}, {"cmd": "spec"}])
    assert len(replies) == 1


def test_blank_lines_are_skipped():
    replies = run_server(["", "  ", {"cmd": "spec"}])
    assert len(replies) == 1


def test_subprocess_serves_the_same_bytes():
    requests = [{"cmd": "spec"},
                {"cmd": "reset", "seed": 3},
                {"cmd": "step", "action": 1},
                {"cmd": "step", "action": 0},
                {"cmd": "close"}]
    wire = "".join(json.dumps(r) + "\n" for r in requests)
    proc = subprocess.run([sys.executable, "-m", "dinersim", "serve"],
                          input=wire, capture_output=True, text=True,
                          timeout=60)
    assert proc.returncode == 0
    expected = run_server(requests)
    got = [json.loads(s) for s in proc.stdout.splitlines()]
    assert got == expected
