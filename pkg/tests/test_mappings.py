import numpy as np
import pytest

from randmap.mappings import (
    Mapping,
    classify,
    crown_report,
    decompose,
    format_mapping,
    parse_mapping,
    sample_uniform,
)
from randmap.rng import substream

from _oracles import (
    FIG1_IMAGE,
    FIG1_NO14_IMAGE,
    FIG1_TEXT,
    oracle_branch_stats,
    oracle_decompose,
)


def make(image):
    return Mapping(len(image), np.array(image, dtype=np.int32))


# ── construction and text format ──────────────────────────────────────


def test_mapping_validation():
    with pytest.raises(ValueError):
        Mapping(0, np.array([], dtype=np.int32))
    with pytest.raises(ValueError):
        make([0, 1])
    with pytest.raises(ValueError):
        make([1, 3])
    with pytest.raises(ValueError):
        Mapping(3, np.array([1, 2], dtype=np.int32))


def test_text_format_roundtrip():
    m = parse_mapping(FIG1_TEXT)
    assert m.n == 15
    assert list(m.image) == FIG1_IMAGE
    assert format_mapping(m) == FIG1_TEXT


# ── decompose: figure fixture and easy cases ──────────────────────────


def test_decompose_figure_mapping():
    d = decompose(make(FIG1_IMAGE))
    assert sorted(np.flatnonzero(d.cyclic) + 1) == [1, 2, 3, 4, 5]
    assert d.lam == 5
    expected_heights = {6: 1, 7: 2, 8: 3, 9: 2, 10: 1, 11: 1, 12: 1, 13: 2, 14: 3, 15: 2}
    for v, h in expected_heights.items():
        assert d.height[v - 1] == h
    assert d.tree_heights == {1: 1, 2: 3, 3: 2, 4: 0, 5: 0}


def test_decompose_identity():
    d = decompose(make([1, 2, 3, 4]))
    assert d.lam == 4
    assert d.cyclic.all()
    assert set(d.tree_heights.values()) == {0}


def test_decompose_chain():
    d = decompose(make([1, 1, 2, 3]))
    assert d.lam == 1
    assert list(d.height) == [0, 1, 2, 3]
    assert d.tree_heights == {1: 3}


# ── crown reports ─────────────────────────────────────────────────────


def test_crown_figure_level0():
    cr = crown_report(make(FIG1_IMAGE), 0)
    assert cr.branch_count == 5
    assert cr.top_height == 3
    assert cr.second_height == 2
    assert cr.tie_count == 1
    assert cr.crown_vertices == frozenset({8, 14})
    assert cr.crown_size == 2
    assert cr.crown_roots == 2
    assert cr.margin == 1


def test_crown_figure_level1_tie():
    cr = crown_report(make(FIG1_IMAGE), 1)
    assert cr.branch_count == 4
    assert cr.tie_count == 2
    assert cr.top_height == 2
    assert cr.second_height == 2
    assert cr.crown_vertices == frozenset()
    assert cr.margin == 0


def test_crown_figure_level1_after_deletion():
    cr = crown_report(make(FIG1_NO14_IMAGE), 1)
    assert cr.tie_count == 1
    assert cr.second_height == 1
    assert cr.crown_vertices == frozenset({8})
    assert cr.crown_roots == 1


def test_crown_no_branches_at_level():
    cr = crown_report(make([1, 2, 3, 4]), 2)
    assert cr.branch_count == 0
    assert cr.tie_count == 0
    assert not classify(cr).unique_highest


def test_crown_permutation_level0():
    cr = crown_report(make([2, 3, 1, 5, 4]), 0)
    assert cr.top_height == 0
    assert cr.second_height == 0
    assert cr.crown_vertices == frozenset()
    assert cr.tie_count == 5


# ── classification flags ──────────────────────────────────────────────


def test_classify_figure():
    fl = classify(crown_report(make(FIG1_IMAGE), 0))
    assert fl.unique_highest
    assert not fl.exactly_k_highest(2)
    assert not fl.crown_ok  # |H| = 2 is not > 2r = 4
    assert not fl.margin_ge_2


def test_classify_identity():
    fl = classify(crown_report(make([1, 2, 3, 4]), 0))
    assert not fl.unique_highest
    assert fl.exactly_k_highest(4)


def test_classify_chain():
    fl = classify(crown_report(make([1, 1, 2, 3]), 0))
    cr = crown_report(make([1, 1, 2, 3]), 0)
    assert fl.unique_highest
    assert cr.crown_vertices == frozenset({2, 3, 4})
    assert cr.crown_roots == 1
    assert fl.crown_ok  # 3 > 2
    assert fl.margin_ge_2


def test_classify_single_vertex():
    fl = classify(crown_report(make([1]), 0))
    assert fl.unique_highest


def test_classify_is_pure():
    cr = crown_report(make(FIG1_IMAGE), 0)
    assert classify(cr) == classify(cr)


# ── sampling ──────────────────────────────────────────────────────────


def test_sample_n1():
    m = sample_uniform(1, substream(123, 0))
    assert list(m.image) == [1]


def test_sample_rejects_zero():
    with pytest.raises(ValueError):
        sample_uniform(0, substream(1, 0))


def test_sample_deterministic():
    a = sample_uniform(5, substream(42, 7))
    b = sample_uniform(5, substream(42, 7))
    c = sample_uniform(5, substream(42, 8))
    assert list(a.image) == list(b.image)
    assert list(a.image) != list(c.image) or True  # different index, may collide


def test_sample_uniform_n2_frequencies():
    # 4 possible mappings of {1,2}; chi-square over 10^6 draws
    rng = substream(2024, 0)
    draws = rng.integers(0, 2, size=(10**6, 2))
    codes = draws[:, 0] * 2 + draws[:, 1]
    counts = np.bincount(codes, minlength=4)
    expected = 10**6 / 4
    chi2 = float(((counts - expected) ** 2 / expected).sum())
    # chi-square(3) exceeds 16.27 with probability ~0.001
    assert chi2 < 16.27


# ── agreement with the quadratic oracle ───────────────────────────────


def test_decompose_matches_oracle_random():
    rng = np.random.default_rng(7)
    for _ in range(300):
        n = int(rng.integers(1, 9))
        image = list(rng.integers(1, n + 1, size=n))
        d = decompose(make(image))
        cyc, hgt, root = oracle_decompose(image)
        assert list(d.cyclic) == cyc
        assert list(d.height) == hgt
        assert list(d.tree_root - 1) == root
        # invariants
        assert d.lam >= 1
        assert int((d.height == 0).sum()) == d.lam
        for v in range(n):
            if not d.cyclic[v]:
                assert d.height[v] == d.height[image[v] - 1] + 1
        assert sum(1 for _ in d.tree_heights) == d.lam


def test_crown_matches_oracle_random():
    rng = np.random.default_rng(11)
    for _ in range(250):
        n = int(rng.integers(1, 9))
        c = int(rng.integers(0, 4))
        image = list(rng.integers(1, n + 1, size=n))
        cr = crown_report(make(image), c)
        st = oracle_branch_stats(image, c)
        assert cr.branch_count == st["branches"]
        assert cr.tie_count == st["tie"]
        if cr.branch_count:
            assert cr.top_height == st["top"]
            assert cr.second_height == st["second"]
            assert cr.margin == st["margin"]
        assert cr.crown_vertices == st["crown"]
        assert cr.crown_roots == st["crown_roots"]


def test_crown_ok_implies_unique_and_margin2():
    rng = np.random.default_rng(13)
    seen = 0
    for _ in range(400):
        n = int(rng.integers(2, 9))
        image = list(rng.integers(1, n + 1, size=n))
        cr = crown_report(make(image), 0)
        fl = classify(cr)
        if fl.crown_ok:
            seen += 1
            assert fl.unique_highest
            assert cr.top_height >= cr.second_height + 2
    assert seen > 0
