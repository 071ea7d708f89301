"""Switching languages, fault models and prefix trees."""

import itertools

import numpy as np
import pytest

from prefixsls.language import (
    SwitchingLanguage,
    SwitchingSignal,
    build_prefix_tree,
    fault_language,
    fault_time,
    prefixes_equal,
    uniform,
)


def test_fault_language_horizon_two():
    lang = fault_language(2)
    assert {s.modes for s in lang} == {(2, 2, 2), (1, 2, 2), (1, 1, 2)}
    assert len(lang) == 3


def test_fault_language_horizon_zero():
    lang = fault_language(0)
    assert [s.modes for s in lang] == [(2,)]


def test_fault_language_count_and_distinctness():
    lang = fault_language(10)
    assert len(lang) == 11
    assert len({s.modes for s in lang}) == 11


def test_fault_language_opt_in_never_faulty():
    lang = fault_language(3, include_never_faulty=True)
    assert (1, 1, 1, 1) in {s.modes for s in lang}
    assert len(lang) == 5


def test_fault_time_reads_first_fault():
    assert fault_time(SwitchingSignal((1, 1, 2))) == 2
    assert fault_time(SwitchingSignal((2, 2))) == 0
    # never-faulty signals report T+1, one past the horizon
    assert fault_time(SwitchingSignal((1, 1))) == 2


def test_uniform_probabilities():
    lang = uniform(fault_language(2))
    assert lang.probabilities == (1 / 3, 1 / 3, 1 / 3)
    lang = uniform(fault_language(10))
    assert all(q == pytest.approx(1 / 11) for q in lang.probabilities)


def test_uniform_sums_to_one():
    rng = np.random.default_rng(0)
    for _ in range(5):
        T = int(rng.integers(0, 8))
        lang = uniform(fault_language(T))
        assert abs(sum(lang.probabilities) - 1.0) < 1e-12


def test_language_rejects_bad_probabilities():
    with pytest.raises(ValueError):
        SwitchingLanguage([(1, 2)], probabilities=[0.5])
    with pytest.raises(ValueError):
        SwitchingLanguage([(1, 2), (2, 2)], probabilities=[0.7, 0.7])
    with pytest.raises(ValueError):
        SwitchingLanguage([(1, 2), (1, 2)])


def test_prefix_tree_fault_language_depth_counts():
    tree = build_prefix_tree(fault_language(2), 0)
    assert len(tree) == 8
    by_depth = {
        t: sorted(node.prefix for node in tree.nodes if node.depth == t)
        for t in range(3)
    }
    assert by_depth[0] == [(1,), (2,)]
    assert by_depth[1] == [(1, 1), (1, 2), (2, 2)]
    assert by_depth[2] == [(1, 1, 2), (1, 2, 2), (2, 2, 2)]


def test_prefix_tree_fully_delayed_single_node_per_depth():
    lang = fault_language(4)
    tree = build_prefix_tree(lang, lang.horizon + 1)
    for t in range(lang.horizon + 1):
        assert len(tree.nodes_at_depth(t)) == 1


def test_prefix_tree_single_signal_chain():
    lang = SwitchingLanguage([(1, 2, 1, 1)])
    tree = build_prefix_tree(lang, 0)
    assert len(tree) == lang.horizon + 1


def test_prefix_tree_paths_store_exact_prefixes():
    lang = fault_language(4)
    tree = build_prefix_tree(lang, 0)
    for sig in lang:
        for t in range(5):
            node = tree.nodes[tree.node_for_signal(sig.modes, t)]
            assert node.prefix == sig.modes[: t + 1]
            assert node.depth == t


def test_prefix_tree_node_count_matches_brute_force():
    # one node per distinct prefix, depth by depth
    for T in range(6):
        lang = fault_language(T)
        tree = build_prefix_tree(lang, 0)
        for t in range(T + 1):
            distinct = {s.modes[: t + 1] for s in lang}
            assert len(tree.nodes_at_depth(t)) == len(distinct)


def test_delayed_tree_sharing_rule():
    lang = fault_language(3)
    for d in (1, 2):
        tree = build_prefix_tree(lang, d)
        for a, b in itertools.combinations(range(len(lang)), 2):
            sa, sb = lang[a], lang[b]
            for t in range(4):
                same_node = tree.node_for_signal(sa.modes, t) == tree.node_for_signal(
                    sb.modes, t
                )
                expect = sa.modes[: max(t - d + 1, 0)] == sb.modes[: max(t - d + 1, 0)]
                assert same_node == expect


def test_prefixes_equal_examples():
    a = SwitchingSignal((1, 2, 2))
    b = SwitchingSignal((1, 1, 2))
    assert prefixes_equal(a, b, 0)
    assert not prefixes_equal(a, b, 1)


def test_prefixes_equal_matches_tree_sharing():
    lang = fault_language(4)
    tree = build_prefix_tree(lang, 0)
    for i, j in itertools.combinations(range(len(lang)), 2):
        for t in range(5):
            shared = tree.node_for_signal(lang[i].modes, t) == tree.node_for_signal(
                lang[j].modes, t
            )
            assert shared == prefixes_equal(lang[i], lang[j], t)


def test_leaf_probabilities_sum_to_one():
    lang = uniform(fault_language(5))
    tree = build_prefix_tree(lang, 0)
    total = 0.0
    for idx in tree.nodes_at_depth(lang.horizon):
        members = tree.signals_through(idx)
        assert len(members) == 1  # leaves are per-signal at delay 0
        total += lang.probabilities[members[0]]
    assert abs(total - 1.0) < 1e-12


def test_signal_validation():
    with pytest.raises(ValueError):
        SwitchingSignal(())
    with pytest.raises(ValueError):
        SwitchingSignal((0, 1))
    with pytest.raises(ValueError):
        SwitchingLanguage([(1, 1), (1, 1, 1)])
