import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from _oracles import local_rotation, random_physical_cm, random_stable_system, thermal, tmsv
from kerrmag.drift import build_drift_matrix
from kerrmag.lyapunov import solve_lyapunov
from kerrmag.measures import (
    MEASURES,
    MonogamyViolation,
    UnphysicalStateError,
    entanglement_report,
    evaluate_measure,
    is_physical,
    log_negativity,
    log_negativity_bipartite,
    log_negativity_one_vs_two,
    min_symplectic_eigenvalue,
    partial_transpose,
    reduce_cm,
    residual_contangle_min,
    residual_contangles,
    symplectic_eigenvalues,
)
from kerrmag.steady import solve_steady_state


def _embed(*blocks):
    n = sum(b.shape[0] for b in blocks)
    out = np.zeros((n, n))
    i = 0
    for b in blocks:
        k = b.shape[0]
        out[i:i + k, i:i + k] = b
        i += k
    return out


@pytest.fixture(scope="module")
def baseline_cm(baseline):
    model = build_drift_matrix(baseline, solve_steady_state(baseline))
    return solve_lyapunov(model.M, model.D).V


def test_reduce_identity_and_blocks():
    rng = np.random.default_rng(0)
    V = random_physical_cm(rng, 4)
    np.testing.assert_array_equal(reduce_cm(V, ("b", "m", "c1", "c2")), V)
    block = _embed(thermal(1), thermal(2), thermal(3), thermal(4))
    np.testing.assert_array_equal(reduce_cm(block, ("c1", "c2")), _embed(thermal(3), thermal(4)))


def test_reduce_matches_deletion():
    V = random_physical_cm(np.random.default_rng(1), 4)
    keep = [2, 3, 0, 1]  # (m, b) in that order
    expected = V[keep][:, keep]
    np.testing.assert_array_equal(reduce_cm(V, ("m", "b")), expected)
    deleted = np.delete(np.delete(V, [4, 5, 6, 7], axis=0), [4, 5, 6, 7], axis=1)
    np.testing.assert_array_equal(reduce_cm(V, ("b", "m")), deleted)


def test_reduce_rejects_bad_selection():
    V = np.eye(8)
    with pytest.raises(ValueError):
        reduce_cm(V, ("m", "m"))
    with pytest.raises(ValueError):
        reduce_cm(V, (0, 7))


def test_partial_transpose():
    V = random_physical_cm(np.random.default_rng(2), 2)
    np.testing.assert_array_equal(partial_transpose(partial_transpose(V, 1), 1), V)
    P = np.diag([1.0, 1.0, 1.0, -1.0])
    np.testing.assert_allclose(partial_transpose(V, 1), P @ V @ P, rtol=0, atol=0)
    V6 = random_physical_cm(np.random.default_rng(3), 3)
    P6 = np.diag([1.0, 1.0, 1.0, -1.0, 1.0, 1.0])
    np.testing.assert_array_equal(partial_transpose(V6, 1), P6 @ V6 @ P6)
    with pytest.raises(ValueError):
        partial_transpose(V, [0, 1])


def test_symplectic_spectrum_examples():
    np.testing.assert_allclose(symplectic_eigenvalues(0.5 * np.eye(4)), [0.5, 0.5], atol=1e-15)
    np.testing.assert_allclose(symplectic_eigenvalues(thermal(0.7, 2.0)), [1.2, 2.5], atol=1e-14)
    V = tmsv(0.5)
    np.testing.assert_allclose(symplectic_eigenvalues(V), [0.5, 0.5], atol=1e-14)
    assert min_symplectic_eigenvalue(partial_transpose(V, 0)) == pytest.approx(math.exp(-1.0) / 2, abs=1e-14)
    with pytest.raises(ValueError):
        symplectic_eigenvalues(np.array([[1.0, 0.3], [0.0, 1.0]]))


def test_tmsv_negativity():
    assert log_negativity_bipartite(tmsv(0.5)) == pytest.approx(1.0, abs=1e-9)
    for r in (0.1, 0.8, 1.5):
        assert log_negativity_bipartite(tmsv(r)) == pytest.approx(2 * r, abs=1e-9)


def test_separable_states_give_zero():
    assert log_negativity_bipartite(0.5 * np.eye(4)) == 0.0
    assert log_negativity_bipartite(thermal(0.3, 4.0)) == 0.0


def test_either_party_gives_same_value():
    V = random_physical_cm(np.random.default_rng(4), 2, scale=0.8)
    assert log_negativity(V, 0) == pytest.approx(log_negativity(V, 1), abs=1e-12)


def test_unphysical_input():
    with pytest.raises(UnphysicalStateError):
        log_negativity_bipartite(0.1 * np.eye(4))
    assert not is_physical(0.1 * np.eye(4))
    assert is_physical(0.5 * np.eye(4))
    with pytest.raises(ValueError):
        log_negativity_bipartite(np.eye(6))


def test_one_vs_two():
    V = _embed(tmsv(0.5), 0.5 * np.eye(2))
    assert log_negativity_one_vs_two(V, 2) == 0.0
    assert log_negativity_one_vs_two(V, 0) == pytest.approx(1.0, abs=1e-9)
    assert log_negativity_one_vs_two(0.5 * np.eye(6), 1) == 0.0


def test_contangles_of_simple_states():
    assert residual_contangles(0.5 * np.eye(6)) == (0.0, 0.0, 0.0)
    assert residual_contangle_min(thermal(0.1, 0.2, 0.3)) == 0.0
    # one uncorrelated mode: the pair saturates the one-vs-two value
    assert residual_contangle_min(_embed(tmsv(0.5), 0.5 * np.eye(2))) == 0.0


def test_monogamy_violation_reported(monkeypatch):
    import kerrmag.measures as mod

    calls = iter([1.0, 0.0, 0.0, 0.5, 0.0, 0.0])  # pairs first, then one-vs-two
    monkeypatch.setattr(mod, "log_negativity", lambda *a, **k: next(calls))
    with pytest.raises(MonogamyViolation) as err:
        residual_contangles(0.5 * np.eye(6))
    assert min(err.value.residuals) < 0


@pytest.mark.parametrize("seed", range(20))
def test_contangles_nonnegative_on_lyapunov_states(seed):
    rng = np.random.default_rng(seed)
    M, D = random_stable_system(rng, 6)
    V = solve_lyapunov(M, D).V
    if not is_physical(V):
        # a random D need not satisfy the uncertainty principle; shift it into range
        V = V + (0.5 - min_symplectic_eigenvalue(V) + 0.1) * np.eye(6)
    residuals = residual_contangles(V)
    assert min(residuals) >= 0
    assert residual_contangle_min(V) <= min(residuals)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_local_symplectic_invariance(seed):
    rng = np.random.default_rng(seed)
    V = random_physical_cm(rng, 3, scale=0.6)
    R = local_rotation(rng.uniform(0, 2 * np.pi, 3))
    W = R @ V @ R.T
    for single in range(3):
        assert log_negativity_one_vs_two(W, single) == pytest.approx(log_negativity_one_vs_two(V, single), abs=1e-9)
    assert residual_contangle_min(W) == pytest.approx(residual_contangle_min(V), abs=1e-9)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_relabeling_symmetry(seed):
    V = random_physical_cm(np.random.default_rng(seed), 4)
    for a, b in (("c1", "m"), ("m", "b"), ("c1", "c2")):
        e_ab = log_negativity_bipartite(reduce_cm(V, (a, b)))
        e_ba = log_negativity_bipartite(reduce_cm(V, (b, a)))
        assert e_ab == pytest.approx(e_ba, abs=1e-12)
        assert e_ab >= 0


def test_evaluate_measure(baseline_cm):
    assert set(MEASURES) >= {"E_c1c2", "E_c1m", "E_c1b", "E_mb", "R_c1mb", "R_c1mc2"}
    value = evaluate_measure(baseline_cm, "E_c1b")
    assert value == log_negativity_bipartite(reduce_cm(baseline_cm, ("c1", "b")))
    assert value > 0
    with pytest.raises(ValueError, match="unknown measure"):
        evaluate_measure(baseline_cm, "E_xx")


def test_report(baseline_cm):
    rep = entanglement_report(baseline_cm, parameters={"G": 1.0})
    assert rep.stable and rep.parameters == {"G": 1.0}
    assert all(v >= 0 for v in rep.as_dict().values())
    unstable = entanglement_report(None, stable=False)
    assert all(math.isnan(v) for v in unstable.as_dict().values())
