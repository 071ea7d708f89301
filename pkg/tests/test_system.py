"""Mode dynamics, stacked matrices, noise and cost specifications."""

import numpy as np
import pytest

from prefixsls.language import SwitchingSignal
from prefixsls.system import (
    CostSpec,
    NoiseSpec,
    SwitchedModel,
    admire_model,
    stack_dynamics,
    stack_noise_covariance,
)


def two_mode_model(rng, n=3, p=2, m=2, horizon=3):
    modes = []
    for _ in range(2):
        modes.append(
            (
                rng.standard_normal((n, n)),
                rng.standard_normal((n, p)),
                rng.standard_normal((m, n)),
            )
        )
    return SwitchedModel(modes, horizon)


def test_constant_signal_gives_time_invariant_stacks():
    rng = np.random.default_rng(0)
    model = two_mode_model(rng)
    A, B, C = stack_dynamics(model, SwitchingSignal((1, 1, 1, 1)))
    A1, B1, C1 = model.modes[0]
    for t in range(3):
        assert np.array_equal(A.block(t), A1)
        assert np.array_equal(B.block(t), B1)
    for t in range(4):
        assert np.array_equal(C.block(t), C1)


def test_trailing_blocks_are_zero():
    rng = np.random.default_rng(1)
    model = two_mode_model(rng)
    A, B, _ = stack_dynamics(model, SwitchingSignal((2, 1, 2, 1)))
    assert np.array_equal(A.block(3), np.zeros((3, 3)))
    assert np.array_equal(B.block(3), np.zeros((3, 2)))


def test_drift_fault_shifts_diagonal_blocks():
    model = admire_model("drift", horizon=2)
    A, _, _ = stack_dynamics(model, SwitchingSignal((1, 2, 2)))
    A1 = model.modes[0][0]
    assert np.array_equal(A.block(0), A1)
    assert np.allclose(A.block(1), A1 - 1.5 * np.eye(3))
    # final block is the structural zero, not A^2
    assert np.array_equal(A.block(2), np.zeros((3, 3)))


def test_stacks_truncate_equal_on_shared_prefixes():
    rng = np.random.default_rng(2)
    model = two_mode_model(rng)
    sa = SwitchingSignal((1, 2, 1, 1))
    sb = SwitchingSignal((1, 2, 2, 1))
    for stack_a, stack_b in zip(stack_dynamics(model, sa), stack_dynamics(model, sb)):
        assert np.array_equal(
            stack_a.truncate(1).dense, stack_b.truncate(1).dense
        )


def test_identity_covariances_stack_to_identity():
    spec = NoiseSpec.gaussian(np.eye(3), np.eye(3), np.eye(2))
    Pw, Pv = stack_noise_covariance(spec, SwitchingSignal((1, 2, 2)))
    assert np.array_equal(Pw.dense, np.eye(9))
    assert np.array_equal(Pv.dense, np.eye(6))


def test_zero_covariances_stack_to_zero():
    spec = NoiseSpec.gaussian(np.zeros((2, 2)), np.zeros((2, 2)), np.zeros((1, 1)))
    Pw, Pv = stack_noise_covariance(spec, SwitchingSignal((1, 1)))
    assert not Pw.dense.any()
    assert not Pv.dense.any()


def test_mode_dependent_covariance_selection():
    Pv1 = np.diag([1.0, 1.0])
    Pv2 = np.diag([4.0, 9.0])
    spec = NoiseSpec.gaussian(np.eye(3), np.eye(3), [Pv1, Pv2])
    _, Pv = stack_noise_covariance(spec, SwitchingSignal((1, 2, 1)))
    assert np.array_equal(Pv.block(0), Pv1)
    assert np.array_equal(Pv.block(1), Pv2)
    assert np.array_equal(Pv.block(2), Pv1)
    # process stack leads with the initial-state covariance
    spec2 = NoiseSpec.gaussian(7 * np.eye(3), 2 * np.eye(3), np.eye(2))
    Pw, _ = stack_noise_covariance(spec2, SwitchingSignal((1, 1)))
    assert np.array_equal(Pw.block(0), 7 * np.eye(3))
    assert np.array_equal(Pw.block(1), 2 * np.eye(3))


def test_stack_noise_covariance_rejects_bounded_spec():
    spec = NoiseSpec.bounded(1.0, 1.0)
    with pytest.raises(ValueError):
        stack_noise_covariance(spec, SwitchingSignal((1, 1)))


def test_admire_dimensions_and_entries():
    for fault in ("drift", "sensor"):
        model = admire_model(fault)
        assert model.num_modes == 2
        assert (model.n, model.p, model.m) == (3, 4, 3)
    drift = admire_model("drift")
    assert drift.modes[0][0][0, 0] == pytest.approx(0.3550)
    assert drift.modes[1][0][0, 0] == pytest.approx(-1.1450)
    assert drift.modes[0][1][1, 0] == pytest.approx(1.298)
    assert np.array_equal(drift.modes[0][2], np.eye(3))
    assert np.array_equal(drift.modes[1][2], np.eye(3))


def test_admire_sensor_mode_two():
    model = admire_model("sensor")
    A1, B1, _ = model.modes[0]
    A2, B2, C2 = model.modes[1]
    assert np.array_equal(A1, A2)
    assert np.array_equal(B1, B2)
    assert C2[0, 0] == 1.0
    assert np.array_equal(C2.sum(axis=1), np.array([1.0, 0.0, 0.0]))
    assert np.count_nonzero(C2) == 1


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        SwitchedModel(
            [
                (np.eye(2), np.ones((2, 1)), np.eye(2)),
                (np.eye(3), np.ones((3, 1)), np.eye(3)),
            ],
            horizon=2,
        )
    with pytest.raises(ValueError):
        SwitchedModel([(np.ones((2, 3)), np.ones((2, 1)), np.eye(2))], horizon=1)


def test_signal_out_of_range_mode_rejected():
    model = SwitchedModel([(np.eye(2), np.ones((2, 1)), np.eye(2))], horizon=1)
    with pytest.raises(ValueError):
        stack_dynamics(model, SwitchingSignal((1, 2)))


def test_psd_validation():
    with pytest.raises(ValueError):
        NoiseSpec.gaussian(np.array([[1.0, 2.0], [2.0, 1.0]]), np.eye(2), np.eye(2))
    with pytest.raises(ValueError):
        CostSpec.constant(-np.eye(2), np.eye(1), horizon=2)
    with pytest.raises(ValueError):
        NoiseSpec.bounded(-1.0, 0.0)


def test_cost_spec_horizon():
    cost = CostSpec.constant(np.eye(2), np.eye(1), horizon=4)
    assert cost.horizon == 4
    assert len(cost.Q) == 5 and len(cost.R) == 5
