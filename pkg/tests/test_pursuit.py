import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rsspursuit.dictionary import (AtomParam, DictConfig, ExactRepresentation, Family, SubdictSpec,
                                   Window, atom, atom_from_index, brute_force_table, project)
from rsspursuit.pursuit import (DependentAtomError, IncrementalQR, MatrixSource, PursuitConfig,
                                TFSource, Variant, lomp_refine, mp_update, omp_update, pursue,
                                run, select_atom, write_trace_csv)
from rsspursuit.signal import Signal
from rsspursuit.subseq import SequenceKind, SequenceSpec, subdict_at

KINDS = [SequenceSpec(SequenceKind.FIXED), SequenceSpec(SequenceKind.RANDOM, 11),
         SequenceSpec(SequenceKind.STEP), SequenceSpec(SequenceKind.JUMP),
         SequenceSpec(SequenceKind.RANDOM, 3, refresh=4, subsample=2)]


def test_select_atom_mapping():
    assert select_atom({"g1": 0.5, "g2": -0.9}) == ("g2", -0.9)


def test_select_atom_tie_goes_to_smaller_key():
    a, b = AtomParam(0, 4, 1), AtomParam(0, 2, 3)
    assert select_atom({a: 0.7, b: -0.7})[0] == b


def test_select_atom_all_zero():
    with pytest.raises(ExactRepresentation):
        select_atom({1: 0.0, 2: 0.0})
    with pytest.raises(ValueError):
        select_atom({})


def test_select_atom_matches_linear_scan():
    rng = np.random.default_rng(0)
    vals = np.round(rng.standard_normal(10_000), 3)  # rounding forces ties
    table = dict(enumerate(vals))
    best_k, best_v = 0, vals[0]
    for k, v in table.items():
        if abs(v) > abs(best_v):
            best_k, best_v = k, v
    assert select_atom(table) == (best_k, best_v)


def test_mp_update_cases():
    rng = np.random.default_rng(1)
    phi = rng.standard_normal(64)
    phi /= np.linalg.norm(phi)
    r = mp_update(2.5 * phi, phi)
    assert r @ r <= 1e-20
    orth = rng.standard_normal(64)
    orth -= (orth @ phi) * phi
    np.testing.assert_array_equal(mp_update(orth, phi, 0.0), orth)
    res = rng.standard_normal(64)
    alpha = res @ phi
    new = mp_update(res, phi)
    assert abs(new @ phi) <= 1e-10
    assert new @ new == pytest.approx(res @ res - alpha ** 2, rel=1e-9)


def test_omp_single_atom_equals_mp():
    rng = np.random.default_rng(2)
    phi = rng.standard_normal(32)
    phi /= np.linalg.norm(phi)
    f = rng.standard_normal(32)
    w, r = omp_update([phi], f)
    np.testing.assert_allclose(r, mp_update(f, phi), atol=1e-13)
    assert w[0] == pytest.approx(f @ phi, abs=1e-13)


def test_omp_complete_basis():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((24, 24))
    A /= np.linalg.norm(A, axis=0)
    f = rng.standard_normal(24)
    _, r = omp_update(list(A.T), f)
    assert r @ r <= 1e-16 * (f @ f)


def test_omp_matches_dense_least_squares():
    rng = np.random.default_rng(4)
    A = rng.standard_normal((16, 32))
    A /= np.linalg.norm(A, axis=0)
    f = rng.standard_normal(16)
    sel = A[:, rng.choice(32, 8, replace=False)]
    w, r = omp_update(list(sel.T), f)
    oracle = np.linalg.solve(sel.T @ sel, sel.T @ f)
    np.testing.assert_allclose(w, oracle, atol=1e-8)
    assert np.max(np.abs(sel.T @ r)) <= 1e-8 * np.linalg.norm(r)


def test_incremental_qr_rejects_dependent_column():
    rng = np.random.default_rng(5)
    a, b = rng.standard_normal((2, 10))
    qr = IncrementalQR(10, capacity=1)
    qr.add(a)
    qr.add(b)
    with pytest.raises(DependentAtomError):
        qr.add(0.3 * a - 2 * b)
    assert qr.size == 2


def test_omp_skips_dependent_candidate():
    rng = np.random.default_rng(6)
    A = rng.standard_normal((8, 5))
    A /= np.linalg.norm(A, axis=0)
    A = np.column_stack([A, A[:, 0]])  # column 5 duplicates column 0
    f = A[:, 0] + 0.5 * A[:, 1]
    a = pursue(f, MatrixSource(A), Variant.OMP, max_atoms=3)
    keys = [e.param for e in a.entries]
    assert len(set(keys)) == len(keys)
    assert not ({0, 5} <= set(keys))


def test_lomp_refine_on_grid():
    c = DictConfig((32,), 256)
    p = AtomParam(0, 112, 6)
    assert lomp_refine(p, atom(p, c), c) == p


@pytest.mark.parametrize("family,window", [(Family.MDCT, Window.SINE), (Family.GABOR, Window.HANN)])
def test_lomp_refine_finds_offset(family, window):
    c = DictConfig((32,), 256, family, window)
    target = atom(AtomParam(0, 115, 6), c)
    got = lomp_refine(AtomParam(0, 112, 6), target, c)
    assert got.u == 115
    # oracle: brute-force scan over the s/4 neighbourhood
    scores = {u: abs(target @ atom(AtomParam(0, u, 6), c)) for u in range(104, 121)}
    assert max(scores, key=scores.get) == 115


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 255), st.integers(0, 15))
def test_lomp_refine_never_worse(seed, u, xi):
    c = DictConfig((32,), 256)
    r = np.random.default_rng(seed).standard_normal(256)
    p = AtomParam(0, u, xi)
    q = lomp_refine(p, r, c)
    assert abs(q.u - u) <= 8
    assert abs(r @ atom(q, c)) >= abs(r @ atom(p, c)) - 1e-12


def test_single_atom_recovered_in_one_iteration():
    c = DictConfig((32, 128), 1024)
    p = atom_from_index(SubdictSpec.coarse(c), 1500)
    a = run(3.0 * atom(p, c), PursuitConfig(c, max_atoms=10))
    assert a.n_atoms == 1 and a.status == "floor_reached"
    assert a.entries[0].param == p and a.entries[0].weight == pytest.approx(3.0)
    assert a.trace[-1] <= 1e-20


@pytest.mark.parametrize("spec", KINDS, ids=lambda s: f"{s.kind.name}-{s.refresh}-{s.subsample}")
@pytest.mark.parametrize("variant", [Variant.MP, Variant.LOMP])
def test_energy_conservation(spec, variant):
    rng = np.random.default_rng(7)
    c = DictConfig((16, 64, 256), 1024)
    f = rng.standard_normal(1024)
    a = run(f, PursuitConfig(c, spec, variant, max_atoms=150))
    E = f @ f
    acc = 0.0
    for n, e in enumerate(a.entries):
        acc += e.weight ** 2
        assert abs(E - a.trace[n + 1] - acc) <= 1e-9 * E
    assert all(x >= y for x, y in zip(a.trace, a.trace[1:]))
    assert a.budget_exhausted


def test_omp_residual_orthogonal_to_selection():
    rng = np.random.default_rng(8)
    c = DictConfig((16, 64), 256)
    f = rng.standard_normal(256)
    a = run(f, PursuitConfig(c, SequenceSpec(SequenceKind.RANDOM, 2), Variant.OMP, max_atoms=60))
    Phi = np.array([atom(e.param, c) for e in a.entries])
    assert np.max(np.abs(Phi @ a.residual)) <= 1e-8 * np.linalg.norm(a.residual)
    w = np.array([e.weight for e in a.entries])
    np.testing.assert_allclose(Phi.T @ w, f - a.residual, atol=1e-9)
    np.testing.assert_allclose(w, np.linalg.lstsq(Phi.T, f, rcond=None)[0], atol=1e-8)


def test_weak_selection_against_full_dictionary():
    rng = np.random.default_rng(9)
    c = DictConfig((8, 32), 128)
    f = rng.standard_normal(128)
    spec = SequenceSpec(SequenceKind.RANDOM, 5)
    a = run(f, PursuitConfig(c, spec, max_atoms=40))
    r = f.copy()
    full = SubdictSpec.full(c)
    for e in a.entries:
        best_full = max(abs(v) for v in brute_force_table(r, full).values())
        sub_table = brute_force_table(r, subdict_at(spec, c, e.iteration))
        assert abs(e.weight) == pytest.approx(max(abs(v) for v in sub_table.values()), rel=1e-10)
        assert abs(e.weight) <= best_full + 1e-12
        r = mp_update(r, atom(e.param, c), e.weight)


def test_target_srr_stop_and_status():
    rng = np.random.default_rng(10)
    c = DictConfig((16, 64), 512)
    f = rng.standard_normal(512)
    a = run(f, PursuitConfig(c, target_srr=3.0))
    assert a.status == "target_reached" and a.srr() >= 3.0
    assert a.srr_trace[-2] < 3.0
    b = run(f, PursuitConfig(c, target_srr=60.0, max_atoms=5))
    assert b.budget_exhausted and b.n_atoms == 5


def test_deterministic():
    rng = np.random.default_rng(11)
    c = DictConfig((16, 64), 512)
    f = rng.standard_normal(512)
    cfg = PursuitConfig(c, SequenceSpec(SequenceKind.RANDOM, 99), max_atoms=50)
    a, b = run(f, cfg), run(f, cfg)
    assert a.entries == b.entries
    assert np.array_equal(a.residual, b.residual)


def test_config_validation():
    c = DictConfig((8,), 32)
    with pytest.raises(ValueError):
        PursuitConfig(c)
    with pytest.raises(ValueError):
        PursuitConfig(c, variant=Variant.OMP, max_atoms=33)
    with pytest.raises(ValueError):
        run(np.zeros(32), PursuitConfig(c, max_atoms=3))
    with pytest.raises(ValueError):
        run(np.ones(16), PursuitConfig(c, max_atoms=3))


def test_omp_full_rank_completes():
    rng = np.random.default_rng(12)
    A = rng.standard_normal((12, 30))
    A /= np.linalg.norm(A, axis=0)
    f = rng.standard_normal(12)
    a = pursue(f, MatrixSource(A), Variant.OMP, max_atoms=12, residual_floor=0.0)
    assert a.n_atoms == 12
    assert a.trace[-1] <= 1e-16 * (f @ f)


def test_lomp_entries_are_refined():
    rng = np.random.default_rng(13)
    c = DictConfig((32, 128), 1024)
    f = rng.standard_normal(1024)
    a = run(f, PursuitConfig(c, variant=Variant.LOMP, max_atoms=30))
    assert any(e.shift for e in a.entries)
    for e in a.entries:
        s = c.scales[e.param.k]
        assert abs(e.shift) <= s // 4
        assert (e.param.u - e.shift) % (s // 2) == 0


def test_tf_source_full_dictionary():
    c = DictConfig((8, 16), 64, Family.GABOR, Window.HANN)
    r = np.random.default_rng(14).standard_normal(64)
    table = TFSource(c, full=True).table(0, r, None)
    assert len(table) == 4 * 64 + 8 * 64


def test_trace_csv(tmp_path):
    c = DictConfig((16, 64), 256)
    f = np.random.default_rng(15).standard_normal(256)
    cfg = PursuitConfig(c, SequenceSpec(SequenceKind.RANDOM, 1), max_atoms=4)
    a = run(Signal(f), cfg)
    path = tmp_path / "trace.csv"
    write_trace_csv(path, a, cfg)
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# dictionary=family=mdct")
    assert "iteration,scale,u,xi,tau,alpha,residual_energy,srr_db" in lines
    assert len([ln for ln in lines if not ln.startswith("#")]) == 5
