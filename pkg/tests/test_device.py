import math

import numpy as np
import pytest

from cdlsim import dataset, device, model, server
from cdlsim._validation import ContractViolation


@pytest.fixture
def spec():
    return model.ModelSpec(2, 3, (6,))


def _dev(data, i=0, strategy=device.CP):
    return device.DeviceState(i, data, strategy=strategy)


def test_single_full_batch_round_is_one_gradient_step(spec, blobs):
    cfg = device.TrainingConfig(batch_size=len(blobs), local_epochs=1, learning_rate=0.05)
    base = model.init_params(spec, 1)
    delta = device.local_training_round(spec, _dev(blobs), base, cfg, seed=4)
    full = model.gradient(spec, base, model.Minibatch(blobs.features, blobs.labels))
    assert np.array_equal(delta, -0.05 * full)


def test_tiny_learning_rate_gives_tiny_delta(spec, blobs):
    cfg = device.TrainingConfig(batch_size=7, local_epochs=2, learning_rate=1e-12)
    base = model.init_params(spec, 1)
    delta = device.local_training_round(spec, _dev(blobs), base, cfg, seed=0)
    steps = 2 * math.ceil(len(blobs) / 7)
    grad_bound = max(np.linalg.norm(model.gradient(
        spec, base, model.Minibatch(blobs.features[[j]], blobs.labels[[j]]))) for j in range(len(blobs)))
    assert np.linalg.norm(delta) <= 1e-12 * steps * grad_bound * 1.01
    assert np.linalg.norm(delta) < 1e-9


def test_hand_stepped_quadratic_trace():
    # one-parameter surrogate: gradient on a batch is w + c, with c read from the batch
    data = dataset.LabeledDataset([[2.0], [4.0]], [0, 0], num_classes=2)

    def grad_fn(params, batch):
        return params + batch.features[:, 0].mean()

    cfg = device.TrainingConfig(batch_size=1, local_epochs=1, learning_rate=0.1)
    seed = 11
    order = np.random.default_rng(seed).permutation(2)
    c_first, c_second = (2.0, 4.0) if order[0] == 0 else (4.0, 2.0)
    step1 = -0.1 * c_first
    step2 = step1 - 0.1 * (step1 + c_second)
    delta = device.local_training_round(None, _dev(data), np.zeros(1), cfg, seed, grad_fn=grad_fn)
    assert delta[0] == pytest.approx(step2, abs=1e-15)
    if order[0] == 0:
        assert delta[0] == pytest.approx(-0.2 - 0.1 * 3.8)


def test_final_short_batch_is_kept(spec):
    data = dataset.synth_generate(3, 4, 2, 3.0, seed=0)
    seen = []

    def grad_fn(params, batch):
        seen.append(len(batch))
        return np.zeros_like(params)

    cfg = device.TrainingConfig(batch_size=5, local_epochs=2)
    device.local_training_round(spec, _dev(data), np.zeros(spec.num_params), cfg, 0, grad_fn=grad_fn)
    assert seen == [5, 5, 2, 5, 5, 2]


def test_empty_device_rejected(spec, blobs):
    with pytest.raises(ContractViolation):
        device.local_training_round(spec, _dev(blobs.subset([])), np.zeros(spec.num_params),
                                    device.TrainingConfig(), 0)


def test_solo_beats_uniform_on_separable_blobs(spec, blobs):
    cfg = device.TrainingConfig(batch_size=10, local_epochs=1, learning_rate=0.05, rounds=15)
    theta = device.run_solo(spec, _dev(blobs, strategy=device.DF), cfg, blobs, seed=3)
    assert theta < math.log(3)


def test_solo_single_round_full_batch(spec, blobs):
    cfg = device.TrainingConfig(batch_size=len(blobs), local_epochs=1, learning_rate=0.1, rounds=1)
    init = model.init_params(spec, 9)
    dev = _dev(blobs, strategy=device.DF)
    theta = device.run_solo(spec, dev, cfg, blobs, seed=0, init_params=init)
    batch = model.Minibatch(blobs.features, blobs.labels)
    expected = init + (-0.1 * model.gradient(spec, init, batch))
    assert np.array_equal(dev.params, expected)
    assert theta == model.loss(spec, expected, batch)


def test_solo_is_deterministic(spec, blobs):
    cfg = device.TrainingConfig(rounds=4)
    a = device.run_solo(spec, _dev(blobs), cfg, blobs, seed=5)
    b = device.run_solo(spec, _dev(blobs), cfg, blobs, seed=5)
    assert a == b


def test_solo_early_stop(spec, blobs):
    cfg = device.TrainingConfig(rounds=50, loss_tol=10.0)
    dev = _dev(blobs)
    device.run_solo(spec, dev, cfg, blobs, seed=5)
    assert len(dev.loss_history) == 2


def test_lone_cooperator_matches_solo(spec, blobs):
    cfg = device.TrainingConfig(batch_size=8, local_epochs=2, learning_rate=0.05, rounds=5)
    init = model.init_params(spec, 21)
    solo = _dev(blobs, strategy=device.DF)
    device.run_solo(spec, solo, cfg, blobs, seed=[3], init_params=init)
    state = server.ServerState.fresh(spec, params=init)
    coop = _dev(blobs)
    uploads = device.participate(spec, coop, state, cfg, seed=[3], eval_data=blobs)
    assert len(uploads) == 5
    assert np.array_equal(state.global_params, solo.params)
    assert coop.loss_history == solo.loss_history


def test_twin_cooperators_upload_identically(spec, blobs):
    cfg = device.TrainingConfig(batch_size=8, rounds=3)
    state = server.ServerState.fresh(spec, seed=0)
    twins = [_dev(blobs, 0), _dev(blobs, 1)]

    def shared_seed_round(spec_, dev, base, cfg_, seed, grad_fn=None):
        return original(spec_, dev, base, cfg_, [seed[0], 0, seed[-1]], grad_fn)

    original = device.local_training_round
    device.local_training_round = shared_seed_round
    try:
        history = device.collaborative_rounds(spec, twins, state, cfg, seed=4)
    finally:
        device.local_training_round = original
    for uploads in history:
        assert np.array_equal(uploads[0], uploads[1])


def test_defector_cannot_participate(spec, blobs):
    with pytest.raises(ContractViolation):
        device.participate(spec, _dev(blobs, strategy=device.DF), server.ServerState.fresh(spec),
                           device.TrainingConfig(), 0)


def test_defector_ignores_server(spec, blobs):
    cfg = device.TrainingConfig(rounds=3)
    alone = _dev(blobs, strategy=device.DF)
    theta_alone = device.run_solo(spec, alone, cfg, blobs, seed=2)
    state = server.ServerState.fresh(spec, seed=0)
    device.collaborative_rounds(spec, [_dev(blobs, 5)], state, cfg, seed=1)
    beside = _dev(blobs, strategy=device.DF)
    assert device.run_solo(spec, beside, cfg, blobs, seed=2) == theta_alone
    assert np.array_equal(beside.params, alone.params)


def test_training_config_validation():
    for bad in (dict(batch_size=0), dict(local_epochs=0), dict(rounds=0),
                dict(learning_rate=0.0), dict(loss_tol=-1.0)):
        with pytest.raises(ContractViolation):
            device.TrainingConfig(**bad)


@pytest.mark.slow
def test_collaboration_on_complementary_partitions_beats_solo():
    """Measured: with disjoint class slices, the shared model should beat every solo model."""
    spec = model.ModelSpec(10, 20, (32,))
    cfg = device.TrainingConfig(batch_size=10, local_epochs=1, learning_rate=0.01, rounds=15)
    wins = 0
    for trial in range(10):
        data = dataset.synth_generate(20, 60, 10, 4.0, seed=[trial, 0])
        aux, pool = dataset.holdout_split(data, 0.2, seed=[trial, 1])
        plan = dataset.PartitionPlan(10, [[2 * i, 2 * i + 1] for i in range(10)], [80] * 10, trial)
        parts = dataset.partition(pool, plan)
        init = model.init_params(spec, [trial, 2])
        thetas = [device.run_solo(spec, _dev(p, i, device.DF), cfg, aux, [trial, 3], init_params=init)
                  for i, p in enumerate(parts)]
        state = server.ServerState.fresh(spec, params=init)
        device.collaborative_rounds(spec, [_dev(p, i) for i, p in enumerate(parts)], state, cfg, [trial, 4])
        shared = model.loss(spec, state.global_params, model.Minibatch(aux.features, aux.labels))
        wins += shared < min(thetas)
    assert wins >= 8
