"""Comparison policies: behaviour cloning and the uniform-random agent.

The cloning net is deliberately plain: two dense layers with one dropout
layer between them, trained with softmax cross-entropy on (state, action)
pairs. Inputs are scaled by each dimension's value range so happiness (0..5)
and one-bit flags land on comparable footing.
"""

from dataclasses import dataclass

import numpy as np

from . import actions as A
from .config import EnvConfig, default_config
from .env import state_ranges
from .nets import (
    Adam,
    DenseNet,
    NetError,
    load_checkpoint,
    save_checkpoint,
    softmax_cross_entropy_batch,
)
from .rng import STREAM_POLICY, Rng


@dataclass
class BcHyper:
    hidden: int = 128
    dropout: float = 0.5
    lr: float = 1e-3
    epochs: int = 20
    batch_size: int = 32
    seed: int = 0


class BcPolicy:
    name = "bc"

    def __init__(self, net: DenseNet, scale):
        self.net = net
        self.scale = np.asarray(scale, dtype=np.float64)
        if net.widths[0] != len(self.scale) or net.widths[-1] != A.N_ACTIONS:
            raise NetError("bc net must map the state vector to 57 action logits")

    def logits_batch(self, states) -> np.ndarray:
        x = np.asarray(states, dtype=np.float64) / self.scale
        logits, _ = self.net.forward(x, train=False)
        return logits

    def act(self, state) -> int:
        return int(np.argmax(self.logits_batch(np.asarray(state)[None, :])[0]))

    def act_batch(self, states) -> np.ndarray:
        return np.argmax(self.logits_batch(states), axis=1)


def bc_train(dataset, config: EnvConfig = None, hyper: BcHyper = None, log=None):
    """Minibatch cross-entropy fit; returns (policy, info with loss trace)."""
    if hyper is None:
        hyper = BcHyper()
    if config is None:
        if dataset.header.config is not None:
            config = EnvConfig.from_dict(dataset.header.config)
        else:
            config = default_config()
    say = log if log is not None else (lambda msg: None)

    scale = np.maximum(state_ranges(config), 1.0)
    x = dataset.states / scale
    y = dataset.actions
    n = len(dataset)
    net = DenseNet([x.shape[1], hyper.hidden, A.N_ACTIONS],
                   dropout=[hyper.dropout], seed=hyper.seed)
    opt = Adam(lr=hyper.lr)
    params = net.params()
    shuffle = np.random.default_rng(hyper.seed)
    losses = []
    for epoch in range(hyper.epochs):
        perm = shuffle.permutation(n)
        total = 0.0
        for lo in range(0, n, hyper.batch_size):
            idx = perm[lo:lo + hyper.batch_size]
            logits, caches = net.forward(x[idx], train=True)
            loss, dlogits = softmax_cross_entropy_batch(logits, y[idx])
            if not np.isfinite(loss):
                raise NetError(f"non-finite loss at epoch {epoch}")
            grads, _ = net.backward(caches, dlogits)
            opt.step(params, grads)
            total += loss * len(idx)
        losses.append(total / n)
        say(f"epoch {epoch}: ce {total / n:.4f}")
    policy = BcPolicy(net, scale)
    accuracy = float(np.mean(policy.act_batch(dataset.states) == y))
    return policy, {"losses": losses, "train_accuracy": accuracy}


def bc_act(policy: BcPolicy, state) -> int:
    return policy.act(state)


def save_bc(policy: BcPolicy, path) -> None:
    arrays = dict(policy.net.params())
    arrays["scale"] = policy.scale
    save_checkpoint(path, "bc", arrays, {"net": policy.net.meta()})


def load_bc(path) -> BcPolicy:
    kind, arrays, meta = load_checkpoint(path)
    if kind != "bc":
        raise NetError(f"not a bc checkpoint (kind '{kind}')")
    scale = arrays.pop("scale")
    net = DenseNet.from_meta(meta["net"], arrays)
    return BcPolicy(net, scale)


class RandomPolicy:
    """Uniform over the 57 actions, reseedable per episode."""

    name = "random"

    def __init__(self, seed: int = 0):
        self.rng = Rng(seed, STREAM_POLICY)

    def seed_episode(self, seed: int) -> None:
        self.rng = Rng(seed, STREAM_POLICY)

    def act(self, state) -> int:
        return self.rng.randrange(A.N_ACTIONS)


def random_act(rng: Rng, state=None) -> int:
    return rng.randrange(A.N_ACTIONS)
