"""Response maps, affine parameterization, prefix layout, controller recovery.

The randomized prefix-equivalence checks here run at small counts; the full
200-instance suites live in the acceptance tests.
"""

import numpy as np
import pytest

from prefixsls.blockmat import BlockGrid, BlockLTMatrix
from prefixsls.language import (
    SwitchingLanguage,
    SwitchingSignal,
    build_prefix_tree,
    fault_language,
    prefixes_equal,
)
from prefixsls.sls import (
    PrefixController,
    SynthesisConsistencyError,
    SystemResponse,
    assemble_layout,
    check_affine,
    closed_loop_response,
    random_feasible_responses,
    random_prefix_controller,
    realize_online,
    recover_controller,
)
from prefixsls.system import SwitchedModel


def random_model(rng, M=2, n=None, p=None, m=None, horizon=None):
    n = n or int(rng.integers(1, 4))
    p = p or int(rng.integers(1, 4))
    m = m or int(rng.integers(1, 4))
    horizon = horizon if horizon is not None else int(rng.integers(1, 6))
    modes = [
        (
            0.6 * rng.standard_normal((n, n)),
            rng.standard_normal((n, p)),
            rng.standard_normal((m, n)),
        )
        for _ in range(M)
    ]
    return SwitchedModel(modes, horizon)


def random_lt_gain(rng, T, p, m):
    grid = BlockGrid(row_dims=[p] * (T + 1), col_dims=[m] * (T + 1))
    data = rng.standard_normal((p * (T + 1), m * (T + 1)))
    mask = np.zeros_like(data)
    for t in range(T + 1):
        mask[t * p : (t + 1) * p, : (t + 1) * m] = 1.0
    return BlockLTMatrix(grid, data * mask, check=False)


def test_open_loop_response():
    rng = np.random.default_rng(0)
    model = random_model(rng, horizon=3)
    sig = SwitchingSignal((1, 2, 2, 1))
    T, p, m = 3, model.p, model.m
    K0 = BlockLTMatrix.zeros(BlockGrid(row_dims=[p] * (T + 1), col_dims=[m] * (T + 1)))
    resp = closed_loop_response(model, sig, K0)
    assert not resp.phi_xy.dense.any()
    assert not resp.phi_ux.dense.any()
    assert not resp.phi_uy.dense.any()
    assert check_affine(resp, model, sig) < 1e-9


def test_scalar_closed_form_phi_xx():
    a, b, k0 = 0.8, 1.3, -0.4
    model = SwitchedModel([(np.array([[a]]), np.array([[b]]), np.array([[1.0]]))], 1)
    grid = BlockGrid.uniform(1, 1, 1)
    K = BlockLTMatrix(grid, np.array([[k0, 0.0], [0.0, 0.2]]), check=False)
    resp = closed_loop_response(model, SwitchingSignal((1, 1)), K)
    assert np.allclose(resp.phi_xx.dense, [[1.0, 0.0], [a + b * k0, 1.0]])


def test_closed_loop_satisfies_affine_identities():
    rng = np.random.default_rng(1)
    for _ in range(10):
        model = random_model(rng, horizon=5)
        sig = SwitchingSignal(tuple(rng.integers(1, 3, size=6)))
        K = random_lt_gain(rng, 5, model.p, model.m)
        resp = closed_loop_response(model, sig, K)
        assert check_affine(resp, model, sig) < 1e-9


def test_check_affine_static_identity():
    model = SwitchedModel(
        [(np.zeros((2, 2)), np.zeros((2, 1)), np.zeros((1, 2)))], horizon=1
    )
    grid_x = BlockGrid.uniform(1, 2, 2)
    resp = SystemResponse(
        BlockLTMatrix.identity(grid_x),
        BlockLTMatrix.zeros(BlockGrid(row_dims=[2, 2], col_dims=[1, 1])),
        BlockLTMatrix.zeros(BlockGrid(row_dims=[1, 1], col_dims=[2, 2])),
        BlockLTMatrix.zeros(BlockGrid.uniform(1, 1, 1)),
    )
    assert check_affine(resp, model, SwitchingSignal((1, 1))) == 0.0


def test_check_affine_flags_perturbation():
    rng = np.random.default_rng(2)
    model = random_model(rng, horizon=3)
    sig = SwitchingSignal((2, 1, 1, 2))
    K = random_lt_gain(rng, 3, model.p, model.m)
    resp = closed_loop_response(model, sig, K)
    eps = 1e-4
    bumped = resp.phi_xx.dense.copy()
    bumped[-1, 0] += eps
    bad = SystemResponse(
        BlockLTMatrix(resp.phi_xx.grid, bumped, check=False),
        resp.phi_xy,
        resp.phi_ux,
        resp.phi_uy,
    )
    assert check_affine(bad, model, sig) >= eps * 0.5


def test_recover_controller_round_trip():
    rng = np.random.default_rng(3)
    for _ in range(10):
        model = random_model(rng, horizon=4)
        sig = SwitchingSignal(tuple(rng.integers(1, 3, size=5)))
        K = random_lt_gain(rng, 4, model.p, model.m)
        resp = closed_loop_response(model, sig, K)
        K2 = recover_controller(resp)
        assert np.max(np.abs(K2.dense - K.dense)) < 1e-9


def test_recover_zero_input_maps():
    rng = np.random.default_rng(4)
    model = random_model(rng, horizon=2)
    sig = SwitchingSignal((1, 1, 1))
    K0 = BlockLTMatrix.zeros(
        BlockGrid(row_dims=[model.p] * 3, col_dims=[model.m] * 3)
    )
    resp = closed_loop_response(model, sig, K0)
    assert not recover_controller(resp).dense.any()


def test_recovery_truncation_locality():
    # block rows of K through t depend only on the maps truncated at t
    rng = np.random.default_rng(5)
    model = random_model(rng, horizon=4)
    sig = SwitchingSignal((1, 2, 2, 2, 2))
    K = random_lt_gain(rng, 4, model.p, model.m)
    resp = closed_loop_response(model, sig, K)
    full = recover_controller(resp)
    for t in range(5):
        partial = recover_controller(resp.truncate(t))
        assert np.allclose(full.truncate(t).dense, partial.dense, atol=1e-9)


def test_layout_single_signal_chain():
    rng = np.random.default_rng(6)
    model = random_model(rng, M=1, horizon=3)
    lang = SwitchingLanguage([(1, 1, 1, 1)])
    layout = assemble_layout(model, build_prefix_tree(lang, 0))
    per_response = (model.n + model.p) * (model.n + model.m)
    expect = sum(per_response * (t + 1) for t in range(4))
    assert layout.n_vars == expect


def test_layout_fault_language_sharing():
    rng = np.random.default_rng(7)
    model = random_model(rng, horizon=2)
    tree = build_prefix_tree(fault_language(2), 0)
    layout = assemble_layout(model, tree)
    assert len(tree) == 8
    theta = rng.standard_normal(layout.n_vars)
    lang = tree.language
    idx_a = lang.index_of(SwitchingSignal((1, 2, 2)))
    idx_b = lang.index_of(SwitchingSignal((1, 1, 2)))
    ra = layout.response(theta, idx_a)
    rb = layout.response(theta, idx_b)
    # depth-0 slab shared, deeper rows free to differ
    for name in ("phi_xx", "phi_xy", "phi_ux", "phi_uy"):
        ma, mb = getattr(ra, name), getattr(rb, name)
        assert np.array_equal(ma.block_row(0), mb.block_row(0))
    assert not np.array_equal(ra.phi_xx.block_row(1), rb.phi_xx.block_row(1))


def test_layout_fully_delayed_shares_everything():
    rng = np.random.default_rng(8)
    model = random_model(rng, horizon=2)
    lang = fault_language(2)
    tree = build_prefix_tree(lang, lang.horizon + 1)
    layout = assemble_layout(model, tree)
    theta = rng.standard_normal(layout.n_vars)
    r0 = layout.response(theta, 0)
    for i in range(1, len(lang)):
        ri = layout.response(theta, i)
        assert np.array_equal(r0.stacked, ri.stacked)


def test_realize_online_single_signal():
    rng = np.random.default_rng(9)
    model = random_model(rng, M=1, horizon=3)
    sig = SwitchingSignal((1, 1, 1, 1))
    K = random_lt_gain(rng, 3, model.p, model.m)
    resp = closed_loop_response(model, sig, K)
    tree = build_prefix_tree(SwitchingLanguage([sig.modes]), 0)
    ctrl = realize_online({0: resp}, tree)
    assert np.max(np.abs(ctrl.gain_matrix(sig).dense - K.dense)) < 1e-9


def test_realize_online_cross_leaf_consistency():
    rng = np.random.default_rng(10)
    model = random_model(rng, horizon=3)
    tree = build_prefix_tree(fault_language(3), 0)
    responses = random_feasible_responses(model, tree, rng)
    ctrl = realize_online(responses, tree)
    lang = tree.language
    for i, sig in enumerate(lang):
        Ki = ctrl.gain_matrix(sig)
        Kr = recover_controller(responses[i])
        assert np.max(np.abs(Ki.dense - Kr.dense)) < 1e-7


def test_realize_online_rejects_inconsistent_responses():
    rng = np.random.default_rng(11)
    model = random_model(rng, horizon=2)
    tree = build_prefix_tree(fault_language(2), 0)
    # independent random gains per signal break the shared-prefix property
    responses = {}
    for i, sig in enumerate(tree.language):
        K = random_lt_gain(rng, 2, model.p, model.m)
        responses[i] = closed_loop_response(model, sig, K)
    with pytest.raises(SynthesisConsistencyError):
        realize_online(responses, tree)


def test_prefix_property_forward_direction():
    # prefix-consistent gains produce truncate-equal responses
    rng = np.random.default_rng(12)
    for _ in range(10):
        model = random_model(rng)
        T = model.horizon
        lang = fault_language(T)
        tree = build_prefix_tree(lang, 0)
        ctrl = random_prefix_controller(tree, model.p, model.m, rng)
        resps = {
            i: closed_loop_response(model, sig, ctrl.gain_matrix(sig))
            for i, sig in enumerate(lang)
        }
        for i in range(len(lang)):
            for j in range(i + 1, len(lang)):
                for t in range(T + 1):
                    if not prefixes_equal(lang[i], lang[j], t):
                        break
                    da = resps[i].truncate(t).stacked
                    db = resps[j].truncate(t).stacked
                    assert np.max(np.abs(da - db)) < 1e-9


def test_prefix_property_reverse_direction():
    # prefix-consistent feasible responses recover truncate-equal controllers
    rng = np.random.default_rng(13)
    for _ in range(10):
        model = random_model(rng)
        T = model.horizon
        lang = fault_language(T)
        tree = build_prefix_tree(lang, 0)
        resps = random_feasible_responses(model, tree, rng)
        ks = {i: recover_controller(resps[i]) for i in range(len(lang))}
        for i in range(len(lang)):
            for j in range(i + 1, len(lang)):
                for t in range(T + 1):
                    if not prefixes_equal(lang[i], lang[j], t):
                        break
                    da = ks[i].truncate(t).dense
                    db = ks[j].truncate(t).dense
                    assert np.max(np.abs(da - db)) < 1e-8


def test_delayed_realization_obeys_coarse_prefixes():
    rng = np.random.default_rng(14)
    model = random_model(rng, horizon=3)
    lang = fault_language(3)
    for d in (1, 2):
        tree = build_prefix_tree(lang, d)
        ctrl = random_prefix_controller(tree, model.p, model.m, rng)
        for i in range(len(lang)):
            for j in range(i + 1, len(lang)):
                si, sj = lang[i], lang[j]
                Ki = ctrl.gain_matrix(si).dense
                Kj = ctrl.gain_matrix(sj).dense
                p = model.p
                for t in range(4):
                    if si.modes[: max(t - d + 1, 0)] == sj.modes[: max(t - d + 1, 0)]:
                        assert np.array_equal(
                            Ki[t * p : (t + 1) * p], Kj[t * p : (t + 1) * p]
                        )


def test_controller_lookup_matches_gain_matrix():
    rng = np.random.default_rng(15)
    model = random_model(rng, horizon=3)
    tree = build_prefix_tree(fault_language(3), 0)
    ctrl = random_prefix_controller(tree, model.p, model.m, rng)
    sig = SwitchingSignal((1, 1, 2, 2))
    ys = rng.standard_normal(model.m * 4)
    K = ctrl.gain_matrix(sig).dense
    for t in range(4):
        u = ctrl.control(sig.modes, t, ys[: model.m * (t + 1)])
        expect = K[t * model.p : (t + 1) * model.p, : model.m * (t + 1)] @ ys[
            : model.m * (t + 1)
        ]
        assert np.allclose(u, expect)


def test_from_gain_matrix_wraps_blindly():
    rng = np.random.default_rng(16)
    model = random_model(rng, horizon=2)
    K = random_lt_gain(rng, 2, model.p, model.m)
    tree = build_prefix_tree(fault_language(2), 0)
    ctrl = PrefixController.from_gain_matrix(K, tree)
    for sig in tree.language:
        assert np.array_equal(ctrl.gain_matrix(sig).dense, K.dense)
