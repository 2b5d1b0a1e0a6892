import math

import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings, strategies as st

from rsspursuit.dictionary import (AtomParam, DictConfig, ExactRepresentation, Family, SubdictSpec,
                                   Window, atom, atom_from_index, atom_index, atom_segment,
                                   brute_force_table, canonical_shift, dict_size, enumerate_atoms,
                                   frame_positions, gabor_atom, mdct_atom, project)

ALL_KINDS = [(Family.GABOR, Window.HANN), (Family.GABOR, Window.GAUSSIAN),
             (Family.GABOR, Window.SINE), (Family.MDCT, Window.SINE)]


def test_config_validation():
    with pytest.raises(ValueError):
        DictConfig((6,), 32)
    with pytest.raises(ValueError):
        DictConfig((16, 8), 32)
    with pytest.raises(ValueError):
        DictConfig((64,), 32)
    with pytest.raises(ValueError):
        DictConfig((8,), 32, Family.MDCT, Window.HANN)


def test_config_text_roundtrip():
    c = DictConfig((32, 128), 1000, Family.GABOR, Window.GAUSSIAN)
    assert c.to_text() == "family=gabor;window=gaussian;length=1000;scales=32,128"
    assert DictConfig.from_text(c.to_text()) == c
    with pytest.raises(ValueError):
        DictConfig.from_text("family=gabor;length=10")


def test_full_size_small():
    assert dict_size(DictConfig((4,), 8, Family.GABOR, Window.HANN)) == 16


def test_full_size_formula():
    # sum_k s_k N / 2 for N = 10000, S = 32, 128, 512
    assert dict_size(DictConfig((32, 128, 512), 10000, Family.GABOR, Window.HANN)) == 3_360_000


def test_coarse_size_is_k_times_n_when_hop_divides_length():
    c = DictConfig((32, 128, 512), 10240, Family.GABOR, Window.HANN)
    assert dict_size(c, SubdictSpec.coarse(c)) == 3 * 10240


def test_coarse_size_counts_truncated_tail_frames():
    c = DictConfig((32, 128, 512), 10000, Family.GABOR, Window.HANN)
    expected = sum(math.ceil(10000 / (s // 2)) * (s // 2) for s in c.scales)
    assert dict_size(c, SubdictSpec.coarse(c)) == expected == 30288


def test_subsampling_halves_size():
    c = DictConfig((8,), 64)
    assert dict_size(c, SubdictSpec.coarse(c, 2)) * 2 == dict_size(c, SubdictSpec.coarse(c))
    assert len(list(enumerate_atoms(SubdictSpec.coarse(c, 2)))) == 64 // 2


def test_shifted_grid_positions():
    c = DictConfig((16,), 64)
    sub = SubdictSpec(c, (-3,))
    assert list(frame_positions(sub, 0)) == [5, 13, 21, 29, 37, 45, 53, 61]
    assert all(canonical_shift(int(u), 16) == -3 for u in frame_positions(sub, 0))


@pytest.mark.parametrize("family,window", ALL_KINDS)
def test_atoms_have_unit_norm(family, window):
    c = DictConfig((8, 32), 64, family, window)
    for p in enumerate_atoms(SubdictSpec.full(c)):
        v = atom(p, c)
        assert abs(v @ v - 1.0) <= 1e-12


def test_hann_dc_atom_at_origin_is_truncated_window():
    c = DictConfig((8,), 16, Family.GABOR, Window.HANN)
    v = gabor_atom(AtomParam(0, 0, 0), c)
    w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(4, 8) / 8)
    np.testing.assert_allclose(v[:4], w / np.linalg.norm(w), atol=1e-15)
    assert not v[4:].any()


def test_gabor_atom_formula_interior():
    c = DictConfig((16,), 64, Family.GABOR, Window.GAUSSIAN)
    n = np.arange(16)
    g = np.exp(-0.5 * ((n - 8) / (16 / 6)) ** 2) * np.cos(2 * np.pi * 3 * (n - 8) / 16)
    v = gabor_atom(AtomParam(0, 30, 3), c)
    np.testing.assert_allclose(v[22:38], g / np.linalg.norm(g), atol=1e-14)


def test_mdct_atom_formula_interior():
    c = DictConfig((16,), 64)
    n = np.arange(16)
    g = np.sin(np.pi * (n + 0.5) / 16) * np.cos(np.pi / 8 * (n + 0.5 + 4) * (5 + 0.5))
    v = mdct_atom(AtomParam(0, 24, 5), c)
    np.testing.assert_allclose(v[16:32], g / np.linalg.norm(g), atol=1e-14)
    # sqrt(2/h) already normalizes the sine-windowed kernel exactly
    assert np.linalg.norm(g * math.sqrt(2 / 8)) == pytest.approx(1.0, abs=1e-14)


def test_family_specific_constructors():
    with pytest.raises(ValueError):
        gabor_atom(AtomParam(0, 0, 0), DictConfig((8,), 16))
    with pytest.raises(ValueError):
        mdct_atom(AtomParam(0, 0, 0), DictConfig((8,), 16, Family.GABOR, Window.HANN))


@pytest.mark.parametrize("bad", [AtomParam(1, 0, 0), AtomParam(0, 16, 0), AtomParam(0, 3, 4)])
def test_invalid_params(bad):
    with pytest.raises(ValueError):
        atom(bad, DictConfig((8,), 16))


@pytest.mark.parametrize("family,window", ALL_KINDS)
def test_shift_covariance(family, window):
    c = DictConfig((32,), 256, family, window)
    for xi in (0, 5, 15):
        a = atom(AtomParam(0, 100, xi), c)
        b = atom(AtomParam(0, 107, xi), c)
        np.testing.assert_array_equal(np.roll(a, 7), b)


def test_mdct_same_frame_orthogonal():
    c = DictConfig((32,), 128)
    vs = [mdct_atom(AtomParam(0, 64, xi), c) for xi in range(16)]
    G = np.array(vs) @ np.array(vs).T
    np.testing.assert_allclose(G, np.eye(16), atol=1e-10)


def test_mdct_tight_frame_interior():
    rng = np.random.default_rng(0)
    N = 256
    c = DictConfig((32,), N)
    f = np.zeros(N)
    f[40:200] = rng.standard_normal(160)
    table = project(f, SubdictSpec.coarse(c))
    energy = sum(v * v for _, v in table.items())
    assert energy == pytest.approx(f @ f, rel=1e-9)


@pytest.mark.parametrize("family,window", ALL_KINDS)
def test_self_projection(family, window):
    c = DictConfig((8, 32), 128, family, window)
    sub = SubdictSpec(c, (2, -5))
    p = atom_from_index(sub, 200)
    table = project(atom(p, c), sub)
    assert table.value(p) == pytest.approx(1.0, abs=1e-10)
    best, val = table.argmax()
    assert val == pytest.approx(1.0, abs=1e-10)
    if family == Family.MDCT:
        assert best == p


def test_zero_residual_projects_to_zero():
    c = DictConfig((8,), 32)
    table = project(np.zeros(32), SubdictSpec.coarse(c))
    assert all(v == 0.0 for _, v in table.items())
    with pytest.raises(ExactRepresentation):
        table.argmax()


def test_project_length_check():
    with pytest.raises(ValueError):
        project(np.zeros(10), SubdictSpec.coarse(DictConfig((8,), 32)))


def test_project_matches_brute_force_small():
    rng = np.random.default_rng(1)
    c = DictConfig((8,), 64)
    r = rng.standard_normal(64)
    for sub in (SubdictSpec.full(c), SubdictSpec.coarse(c), SubdictSpec(c, (1,), 2, (1,))):
        fast = project(r, sub).as_dict()
        slow = brute_force_table(r, sub)
        assert fast.keys() == slow.keys()
        for k, v in slow.items():
            assert fast[k] == pytest.approx(v, rel=1e-10, abs=1e-12)


@st.composite
def small_subdicts(draw):
    family, window = draw(st.sampled_from(ALL_KINDS))
    K = draw(st.integers(1, 2))
    scales = sorted(draw(st.lists(st.sampled_from([4, 8, 16, 32]), min_size=K, max_size=K,
                                  unique=True)))
    N = draw(st.integers(scales[-1], 96))
    c = DictConfig(tuple(scales), N, family, window)
    if draw(st.booleans()):
        return SubdictSpec.full(c)
    d = draw(st.integers(1, 3))
    shifts = tuple(draw(st.integers(-s // 4, s // 4 - 1)) for s in scales)
    phases = tuple(draw(st.integers(0, d - 1)) for _ in scales)
    sub = SubdictSpec(c, shifts, d, phases)
    assume(dict_size(c, sub) > 0)
    return sub


@settings(max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(small_subdicts(), st.integers(0, 2**32 - 1))
def test_project_matches_brute_force_property(sub, seed):
    r = np.random.default_rng(seed).standard_normal(sub.config.length)
    fast = project(r, sub).as_dict()
    slow = brute_force_table(r, sub)
    assert len(fast) == len(slow) == dict_size(sub.config, sub)
    scale = max(1.0, max(abs(v) for v in slow.values()))
    for k, v in slow.items():
        assert abs(fast[k] - v) <= 1e-10 * scale


@settings(max_examples=30, deadline=None)
@given(small_subdicts(), st.data())
def test_index_roundtrip(sub, data):
    L = dict_size(sub.config, sub)
    idx = data.draw(st.integers(0, L - 1))
    p = atom_from_index(sub, idx)
    assert atom_index(sub, p) == idx
    with pytest.raises(IndexError):
        atom_from_index(sub, L)


def test_enumeration_order_matches_indexes():
    c = DictConfig((4, 8), 16)
    sub = SubdictSpec(c, (1, -2))
    params = list(enumerate_atoms(sub))
    assert [atom_index(sub, p) for p in params] == list(range(len(params)))
    assert params == sorted(params)


def test_union_of_shifted_grids_is_full_dictionary():
    c = DictConfig((8, 16), 64)
    full = set(enumerate_atoms(SubdictSpec.full(c)))
    union = set()
    for t0 in range(-2, 2):
        for t1 in range(-4, 4):
            union |= set(enumerate_atoms(SubdictSpec(c, (t0, t1))))
    assert union == full


def test_table_refresh_matches_full_recompute():
    rng = np.random.default_rng(5)
    c = DictConfig((8, 32), 256)
    sub = SubdictSpec(c, (1, 3))
    r = rng.standard_normal(256)
    table = project(r, sub)
    start, seg = atom_segment(AtomParam(1, 99, 4), c)
    r[start:start + len(seg)] -= 0.7 * seg
    table.refresh(r, start, start + len(seg))
    fresh = project(r, sub)
    for (p, v), (q, w) in zip(table.items(), fresh.items()):
        assert p == q and v == pytest.approx(w, abs=1e-12)


def test_argmax_tie_breaks_lexicographically():
    c = DictConfig((4,), 8, Family.GABOR, Window.HANN)
    sub = SubdictSpec.coarse(c)
    table = project(np.zeros(8), sub)
    for _, coef in table.blocks:
        coef[:] = 0.5
    p, _ = table.argmax()
    assert p == min(enumerate_atoms(sub))


def test_empty_subdictionary_rejected():
    c = DictConfig((16,), 16, Family.GABOR, Window.HANN)
    sub = SubdictSpec(c, (0,), 3, (2,))  # grid {0, 8}, decimated from phase 2
    assert dict_size(c, sub) == 0
    with pytest.raises(ValueError, match="empty subdictionary"):
        project(np.ones(16), sub)
