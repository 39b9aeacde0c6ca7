import json
import math

import pytest

import lwvm


def test_velocity_map():
    v = lwvm.relativistic_velocity([3.0, 4.0, 0.0])
    assert v == pytest.approx([3 / math.sqrt(26), 4 / math.sqrt(26), 0.0], rel=1e-14)


def test_kernel_self_test_passes():
    recs = lwvm.kernel_self_test([0.3, -0.2, 0.5], seed=7)
    assert recs
    assert all(r.passed for r in recs), [(r.check, r.residual) for r in recs if not r.passed]


def test_cone_values_and_mean_zero():
    c = lwvm.cone_values([0.0, 0.0, 0.0], [0.0, 0.0, 1.0])
    assert set(c) == {"a0", "a1", "b0", "b1", "b2"}
    assert abs(lwvm.sphere_mean_zero([0.2, 0.1, -0.4], 1, 2)) < 1e-8
    with pytest.raises(ValueError):
        lwvm.cone_values([1.0, 0.0, 0.0], [0.0, 0.0, 1.0])


def test_first_division_identity():
    phi = lwvm.TestFunction([1.0, 0.9, 0.1, 0.0], 0.5)
    rep = lwvm.division_identity_first([0.4, 0.0, 0.2], 1, phi)
    assert abs(rep.lhs) > 0
    assert rep.relative < 1e-6


def test_residue_and_cone_weight():
    r = lwvm.residue(lambda y: sum(a * a for a in y) ** -2, 4)
    assert r == pytest.approx(2 * math.pi ** 2, rel=1e-12)
    assert lwvm.cone_total_weight(0.7) == pytest.approx(0.7 ** 2 / 2, rel=1e-12)


def test_gronwall_helpers():
    assert lwvm.log_gronwall_bound(2.0, 0.0, 1.0) == pytest.approx(2.0)
    t = [0.1 * k for k in range(11)]
    rep = lwvm.log_gronwall_check(t, [1.0] * 11, 1.0)
    assert rep.log_gronwall.finite and not rep.diverging


def test_zero_data_simulation():
    cfg = lwvm.SimulationConfig()
    cfg.grid_n = 6
    cfg.steps = 2
    cfg.tau = 0.1
    cfg.momentum_order = 4
    cfg.ensemble_size = 4
    sim = lwvm.Simulation(lwvm.make_initial_data("zero"), cfg)
    sim.run()
    assert sim.finished
    assert sim.time == pytest.approx(0.1)
    assert len(sim.records) == 3  # t = 0 plus two steps
    assert all(r.eb_sup == 0.0 and r.rho_max == 0.0 for r in sim.records)


def test_config_and_runner(tmp_path):
    with pytest.raises(lwvm.ConfigError):
        lwvm.parse_config("[time]\ndt = -1\n")
    cfg = lwvm.parse_config("[verify]\nvelocities = 1\n")
    assert cfg.mode == lwvm.RunMode.verify_kernels
    cfg.out = str(tmp_path / "out")
    m = lwvm.run(cfg)
    assert m.failed == 0 and m.passed > 0
    doc = json.loads(m.json())
    assert doc["mode"] == "verify-kernels"
    assert (tmp_path / "out" / "kernel_checks.csv").exists()
