"""Behaviour cloning and the random baseline."""

import numpy as np
import pytest

from dinersim import actions as A
from dinersim.bc import (BcHyper, BcPolicy, RandomPolicy, bc_act, bc_train,
                         load_bc, random_act, save_bc)
from dinersim.config import default_config
from dinersim.data import Dataset, DatasetHeader
from dinersim.env import state_ranges
from dinersim.nets import DenseNet, NetError, save_checkpoint
from dinersim.rng import STREAM_POLICY, Rng

CFG = default_config()


def test_input_scaling_uses_value_ranges(small_dataset):
    policy, _ = bc_train(small_dataset, hyper=BcHyper(epochs=1))
    assert np.array_equal(policy.scale, np.maximum(state_ranges(CFG), 1.0))
    assert policy.net.widths == [40, 128, 57]


def test_training_is_deterministic(small_dataset):
    hyper = BcHyper(epochs=2)
    a, info_a = bc_train(small_dataset, hyper=hyper)
    b, info_b = bc_train(small_dataset, hyper=hyper)
    for k, v in a.net.params().items():
        assert np.array_equal(v, b.net.params()[k])
    assert info_a["losses"] == info_b["losses"]
    assert info_a["train_accuracy"] == info_b["train_accuracy"]


def test_loss_decreases(small_dataset):
    _, info = bc_train(small_dataset, hyper=BcHyper(epochs=5))
    assert info["losses"][-1] < info["losses"][0]
    assert 0.0 <= info["train_accuracy"] <= 1.0


def test_memorizes_a_handful_of_pairs(small_dataset):
    # eight expert transitions; without dropout the net should pin them all
    idx = small_dataset.episode_index_sets()[0][:8]
    header = DatasetHeader("expert", small_dataset.header.config_hash,
                           0, 1, 1, 8, small_dataset.header.config)
    dones = np.zeros(8, dtype=np.uint8)
    dones[-1] = 1
    tiny = Dataset(header, np.zeros(8, dtype=np.int64), np.arange(8),
                   small_dataset.states[idx], small_dataset.actions[idx],
                   small_dataset.rewards[idx], dones)
    tiny.validate()
    policy, info = bc_train(
        tiny, hyper=BcHyper(dropout=0.0, epochs=300, lr=1e-2, batch_size=8))
    assert info["train_accuracy"] == 1.0
    assert policy.act(tiny.states[0]) == int(tiny.actions[0])


def test_act_matches_logits(small_dataset):
    policy, _ = bc_train(small_dataset, hyper=BcHyper(epochs=1))
    states = small_dataset.states[:10]
    logits = policy.logits_batch(states)
    assert logits.shape == (10, 57)
    batch = policy.act_batch(states)
    for i in range(10):
        assert policy.act(states[i]) == batch[i] == int(np.argmax(logits[i]))
        assert bc_act(policy, states[i]) == batch[i]


def test_bc_policy_shape_check():
    with pytest.raises(NetError):
        BcPolicy(DenseNet([40, 8, 56]), np.ones(40))
    with pytest.raises(NetError):
        BcPolicy(DenseNet([39, 8, 57]), np.ones(40))


def test_save_load_round_trip(small_dataset, tmp_path):
    policy, _ = bc_train(small_dataset, hyper=BcHyper(epochs=1))
    p1 = tmp_path / "bc1.json"
    p2 = tmp_path / "bc2.json"
    save_bc(policy, p1)
    loaded = load_bc(p1)
    save_bc(loaded, p2)
    assert p1.read_bytes() == p2.read_bytes()
    states = small_dataset.states[:20]
    assert np.array_equal(policy.logits_batch(states),
                          loaded.logits_batch(states))


def test_load_rejects_other_checkpoints(tmp_path):
    path = tmp_path / "dense.json"
    save_checkpoint(path, "dense", {"W0": np.zeros((2, 2))}, {"widths": [2, 2]})
    with pytest.raises(NetError, match="not a bc checkpoint"):
        load_bc(path)


def test_random_policy_is_roughly_uniform():
    policy = RandomPolicy(0)
    counts = np.zeros(57)
    n = 200_000
    for _ in range(n):
        counts[policy.act(None)] += 1
    # 3-sigma band around n/57 under a binomial count
    expect = n / 57
    sigma = np.sqrt(n * (1 / 57) * (56 / 57))
    assert np.all(np.abs(counts - expect) < 4 * sigma)


def test_random_policy_reseeding():
    policy = RandomPolicy(0)
    first = [policy.act(None) for _ in range(20)]
    policy.seed_episode(0)
    assert [policy.act(None) for _ in range(20)] == first
    policy.seed_episode(1)
    assert [policy.act(None) for _ in range(20)] != first


def test_random_act_stream():
    rng = Rng(7, STREAM_POLICY)
    draws = [random_act(rng) for _ in range(50)]
    assert all(0 <= d < A.N_ACTIONS for d in draws)
    rng2 = Rng(7, STREAM_POLICY)
    assert [random_act(rng2) for _ in range(50)] == draws
