"""Roles, attack messages, and the per-client round step."""

import numpy as np
import pytest

from fedaa import clients, data, nn
from fedaa.errors import ConfigError, SimulationError
from fedaa.seeding import stream


def make_client(cid=0, role="benign", attack=None, seed=0, n=40):
    rng = np.random.default_rng(seed)
    spec = data.SyntheticSpec(0.0, 0.0, 1, (n,))
    train, test = data.generate_synthetic(spec, rng).clients[0]
    arch = nn.ArchSpec(60, (), 10)
    model = nn.MlpModel(arch, nn.init_params(arch, np.random.default_rng(1)))
    return clients.ClientRecord(cid, role, attack, train, test, model)


# ------------------------------------------------------------ roles


def test_assign_roles_counts():
    assert len(clients.assign_roles(100, 0.3, np.random.default_rng(0))) == 30
    assert len(clients.assign_roles(20, 0.3, np.random.default_rng(0))) == 6
    assert len(clients.assign_roles(7, 0.45, np.random.default_rng(0))) == 3
    assert clients.assign_roles(50, 0.0, np.random.default_rng(0)) == []


def test_assign_roles_bounds_and_determinism():
    with pytest.raises(ConfigError):
        clients.assign_roles(10, 0.5, np.random.default_rng(0))
    with pytest.raises(ConfigError):
        clients.assign_roles(10, -0.1, np.random.default_rng(0))
    a = clients.assign_roles(30, 0.4, np.random.default_rng(5))
    b = clients.assign_roles(30, 0.4, np.random.default_rng(5))
    assert a == b == sorted(set(a))
    assert all(0 <= i < 30 for i in a)


def test_attack_spec_defaults():
    assert clients.AttackSpec("same_value").tau == 100.0
    assert clients.AttackSpec("sign_flip").tau == 10.0
    assert clients.AttackSpec("gaussian").tau == 100.0
    assert clients.AttackSpec("gaussian", tau=7.0).tau == 7.0
    with pytest.raises(ConfigError):
        clients.AttackSpec("krum")
    with pytest.raises(ConfigError):
        clients.AttackSpec("gaussian", tau=0.0)
    with pytest.raises(ConfigError):
        clients.AttackSpec("ipm", ipm_epsilon=-1.0)


def test_client_record_role_attack_pairing():
    with pytest.raises(ConfigError):
        make_client(role="malicious", attack=None)
    with pytest.raises(ConfigError):
        make_client(role="benign", attack=clients.AttackSpec("gaussian"))


# ------------------------------------------------------------ messages


def test_same_value_message_is_constant():
    msg = clients.same_value_message(5, -3.25)
    assert np.array_equal(msg, np.full(5, -3.25))
    drawn = clients.attack_same_value(8, 100.0, np.random.default_rng(2))
    assert np.all(drawn == drawn[0])
    again = clients.attack_same_value(8, 100.0, np.random.default_rng(2))
    assert np.array_equal(drawn, again)


def test_sign_flip_message_flips_and_scales():
    honest = np.array([1.0, -2.0, 0.0, 4.0])
    assert np.array_equal(
        clients.sign_flip_message(honest, 3.0), [-3.0, 6.0, 0.0, -12.0]
    )
    # the magnitude enters through its absolute value
    assert np.array_equal(
        clients.sign_flip_message(honest, -3.0), clients.sign_flip_message(honest, 3.0)
    )
    flipped = clients.attack_sign_flip(honest, 10.0, np.random.default_rng(3))
    nonzero = honest != 0
    assert np.all(np.sign(flipped[nonzero]) == -np.sign(honest[nonzero]))


def test_gaussian_message_scale():
    msg = clients.attack_gaussian(20000, 100.0, np.random.default_rng(4))
    assert abs(np.std(msg) - 100.0) / 100.0 < 0.1
    assert abs(np.mean(msg)) < 2.0


def test_ipm_message_hand_computed():
    uploads = [np.array([1.0, 1.0]), np.array([3.0, 3.0])]
    assert np.allclose(clients.attack_ipm(uploads, 0.5), [-1.0, -1.0])
    assert np.allclose(clients.attack_ipm(uploads, 2.0), [-4.0, -4.0])
    with pytest.raises(SimulationError):
        clients.attack_ipm([], 0.5)


# ------------------------------------------------------------ local updates


def test_benign_update_matches_direct_sgd():
    client = make_client()
    broadcast = np.zeros(610)
    cfg = nn.SgdConfig(learning_rate=0.1, batch_size=16, epochs=2)
    upload = clients.local_update(client, broadcast, cfg, np.random.default_rng(7))
    direct = nn.sgd_epoch(
        nn.MlpModel(client.local_model.arch, broadcast.copy()),
        client.train.features,
        client.train.labels,
        cfg,
        np.random.default_rng(7),
    )
    assert np.array_equal(upload, direct.params)
    # the client's stored model is the trained one
    assert np.array_equal(client.local_model.params, direct.params)
    # and the upload is an independent copy
    upload[0] += 1.0
    assert client.local_model.params[0] == direct.params[0]


def test_identical_clients_produce_identical_uploads():
    a = make_client(seed=9)
    b = make_client(seed=9)
    cfg = nn.SgdConfig(epochs=1, batch_size=8)
    up_a = clients.local_update(a, np.zeros(610), cfg, np.random.default_rng(3))
    up_b = clients.local_update(b, np.zeros(610), cfg, np.random.default_rng(3))
    assert up_a.tobytes() == up_b.tobytes()


def test_sign_flip_trains_then_flips():
    spec = clients.AttackSpec("sign_flip", tau=10.0)
    client = make_client(role="malicious", attack=spec)
    broadcast = np.zeros(610)
    cfg = nn.SgdConfig(learning_rate=0.1, batch_size=16, epochs=1)
    upload = clients.local_update(client, broadcast, cfg, np.random.default_rng(8))
    # replay the exact stream: training consumes first, then the magnitude draw
    rng = np.random.default_rng(8)
    honest = nn.sgd_epoch(
        nn.MlpModel(client.local_model.arch, broadcast.copy()),
        client.train.features,
        client.train.labels,
        cfg,
        rng,
    )
    magnitude = rng.normal(0.0, 10.0)
    assert np.array_equal(upload, -abs(magnitude) * honest.params)
    # the stored local model keeps the honest parameters
    assert np.array_equal(client.local_model.params, honest.params)


def test_same_value_client_ignores_data_and_skips_training():
    spec = clients.AttackSpec("same_value", tau=100.0)
    a = make_client(role="malicious", attack=spec, seed=10)
    b = make_client(role="malicious", attack=spec, seed=11)  # different data
    broadcast = np.ones(610) * 0.5
    cfg = nn.SgdConfig(epochs=3)
    up_a = clients.local_update(a, broadcast, cfg, np.random.default_rng(12))
    up_b = clients.local_update(b, broadcast, cfg, np.random.default_rng(12))
    assert np.array_equal(up_a, up_b)
    assert np.all(up_a == up_a[0])
    # stored model adopted the broadcast, untouched by training
    assert np.array_equal(a.local_model.params, broadcast)


def test_gaussian_client_keeps_broadcast_model():
    spec = clients.AttackSpec("gaussian", tau=100.0)
    client = make_client(role="malicious", attack=spec)
    broadcast = np.full(610, 0.25)
    upload = clients.local_update(
        client, broadcast, nn.SgdConfig(epochs=1), np.random.default_rng(13)
    )
    assert np.array_equal(client.local_model.params, broadcast)
    assert not np.array_equal(upload, broadcast)


def test_ipm_client_uses_benign_uploads():
    spec = clients.AttackSpec("ipm", ipm_epsilon=0.5)
    client = make_client(role="malicious", attack=spec)
    benign = [np.ones(610), 3.0 * np.ones(610)]
    upload = clients.local_update(
        client, np.zeros(610), nn.SgdConfig(epochs=1), np.random.default_rng(14),
        benign_uploads=benign,
    )
    assert np.allclose(upload, -1.0)
    with pytest.raises(SimulationError):
        clients.local_update(
            client, np.zeros(610), nn.SgdConfig(epochs=1), np.random.default_rng(15)
        )


def test_broadcast_dimension_mismatch():
    client = make_client()
    with pytest.raises(ConfigError):
        clients.local_update(
            client, np.zeros(5), nn.SgdConfig(epochs=1), np.random.default_rng(16)
        )
