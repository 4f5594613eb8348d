"""
Driving the environment from another process
============================================

The `serve` subcommand exposes one environment over stdin/stdout as
line-delimited JSON. Anything that can spawn a process and speak JSON can
use it; this script does so from Python for illustration.
"""

import json
import subprocess
import sys

proc = subprocess.Popen([sys.executable, "-m", "dinersim", "serve"],
                        stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                        text=True)


def call(request):
    proc.stdin.write(json.dumps(request) + "\n")
    proc.stdin.flush()
    return json.loads(proc.stdout.readline())


spec = call({"cmd": "spec"})
print("handshake:", spec)
assert spec == {"n_actions": 57, "state_dim": 40}

state = call({"cmd": "reset", "seed": 11})["state"]
print(f"reset -> {len(state)} state entries")

total = 0.0
for step in range(30):
    reply = call({"cmd": "step", "action": 0})   # just wait and watch
    total += reply["reward"]
    if reply["info"]["events"]:
        print(f"  step {step:2d}: {reply['info']['events']}")
    if reply["done"]:
        break
print(f"return after waiting 30 steps: {total:.1f}")

# errors come back as replies, never as crashes
print("bad action:", call({"cmd": "step", "action": 99}))
print("bad line:  ", end="")
proc.stdin.write("{not json\n")
proc.stdin.flush()
print(json.loads(proc.stdout.readline()))

# close gets no reply, so skip call() and write the line directly
proc.stdin.write('{"cmd":"close"}\n')
proc.stdin.flush()
proc.wait(timeout=30)
print("server exited with", proc.returncode)
