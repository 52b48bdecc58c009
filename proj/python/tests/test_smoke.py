import itertools

import numpy as np
import pytest

import lram


def brute_force_nearest(q):
    # 2E8: all-even or all-odd coordinates, sum divisible by 4
    best = None
    base = np.floor(q).astype(int)
    for offs in itertools.product((-1, 0, 1, 2), repeat=8):
        k = base + np.array(offs)
        if len(set(k % 2)) != 1 or k.sum() % 4:
            continue
        d = ((q - k) ** 2).sum()
        if best is None or d < best[0]:
            best = (d, k)
    return best


def test_decode_matches_brute_force():
    rng = np.random.default_rng(1)
    for _ in range(20):
        q = rng.uniform(-3, 3, 8)
        d, _ = brute_force_nearest(q)
        k = lram.decode(q)
        assert lram.is_lattice_point(k)
        assert ((q - k) ** 2).sum() == pytest.approx(d)


def test_min_vectors_and_table():
    mv = lram.min_vectors()
    assert mv.shape == (240, 8)
    assert np.all((mv**2).sum(axis=1) == 8)
    table = lram.neighbor_table()
    assert table.shape == (lram.NEIGHBOR_COUNT, 8) == (232, 8)
    assert lram.neighbor_table_checksum() == "626eb581"


def test_kernel():
    assert lram.kernel(0.0) == 1.0
    np.testing.assert_allclose(lram.kernel(np.array([2.0, 8.0, 9.0])), [0.75**4, 0.0, 0.0])
    with pytest.raises(ValueError):
        lram.kernel(-1.0)


def test_torus_and_slots():
    cfg = lram.TorusConfig.preset("base")
    assert cfg.slot_count == 65536
    assert lram.TorusConfig([8] * 8) == cfg
    k = np.array([4, 2, 2, 0, 0, 0, 0, 0])
    s = lram.slot_index(k, cfg)
    np.testing.assert_array_equal(lram.slot_representative(s, cfg), k)
    assert lram.slot_index(k + 8, cfg) == s
    with pytest.raises(lram.ConfigError):
        lram.TorusConfig([6] + [8] * 7)


def test_lookup():
    cfg = lram.TorusConfig.preset("base")
    r = lram.lookup(np.full(8, 0.3), cfg)
    assert len(r["slots"]) == lram.TOP_K
    assert np.all(np.diff(r["weights"]) <= 0)
    assert r["retained_weight"] <= r["total_weight"] + 1e-12
    assert r["grads"].shape == (32, 8)


def test_theta_forward_backward():
    cfg = lram.TorusConfig.preset("base")
    values = lram.ValueTable(cfg.slot_count, 4)
    values.init_gaussian(3)
    table = np.asarray(values)
    assert table.shape == (65536, 4)
    rng = np.random.default_rng(2)
    z = rng.normal(size=(3, 32))
    y = lram.theta_forward(z, cfg, values, heads=2)
    assert y.shape == (3, 8)
    np.testing.assert_allclose(lram.theta_forward(2.5 * z, cfg, values, heads=2), 2.5 * y, rtol=1e-12)

    u = rng.normal(size=y.shape)
    gin, slots, rows = lram.theta_backward(z, cfg, values, u, heads=2)
    assert gin.shape == z.shape
    assert rows.shape == (len(slots), 4)
    # value gradient vs central difference on one touched row
    s, j, h = slots[0], 1, 1e-6
    table[s, j] += h
    lp = (u * lram.theta_forward(z, cfg, values, heads=2)).sum()
    table[s, j] -= 2 * h
    lm = (u * lram.theta_forward(z, cfg, values, heads=2)).sum()
    table[s, j] += h
    assert rows[0, j] == pytest.approx((lp - lm) / (2 * h), rel=1e-6, abs=1e-9)


def test_statistics_and_criteria():
    s = lram.support_statistics(20000, seed=3)
    assert 45 <= s["min_support"] <= s["max_support"] <= 121
    assert s["mean_support"] == pytest.approx(64.94, rel=0.01)
    assert lram.expected_support_count(8, 1.0) == pytest.approx(64.94, abs=0.01)
    r = lram.run_criterion(12)
    assert r["passed"] and r["name"] == "slot bijection"


def test_train_toy():
    cfg = {"keys": 128, "steps": 30, "batch": 8, "input_dim": 8, "output_dim": 8, "value_dim": 8}
    a = lram.train_toy(cfg)
    b = lram.train_toy(cfg)
    assert len(a["log"]) == 30
    assert a["log"] == b["log"]
    assert a["final_loss"] < a["initial_loss"]
    with pytest.raises(lram.ConfigError):
        lram.train_toy({"stepz": 1})
