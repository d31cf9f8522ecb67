import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qwo.algorithm import (
    ORACLE_TAU,
    DegenerateWhiteningError,
    QwoBuilder,
    constraint_residuals,
    extract_graph,
    qwo_build,
    qwo_update,
)
from qwo.model import Dag, LigamModel, Permutation, is_compatible, oracle_gpi
from qwo.synth import sample_data, sample_er_dag, sample_ligam
from qwo.whitening import WhiteningContext, build_whitening, oracle_whitening, whiten_data

from oracles import gram_schmidt_rows, model_covariance, partial_corr


def oracle_case(seed, n, deg=2.0):
    g = sample_er_dag(n, min(deg, n - 1), seed)
    model = sample_ligam(g, seed + 1)
    return g, model, oracle_whitening(model)


@st.composite
def cases(draw, max_n=10):
    n = draw(st.integers(2, max_n))
    seed = draw(st.integers(0, 100_000))
    g, model, ctx = oracle_case(seed, n)
    pi = Permutation(draw(st.permutations(range(n))))
    return g, model, ctx, pi


@st.composite
def block_moves(draw, max_n=10):
    g, model, ctx, pi = draw(cases(max_n))
    n = g.n
    lo = draw(st.integers(0, n - 1))
    hi = draw(st.integers(lo, n - 1))
    block = list(pi.order[lo:hi + 1])
    block = draw(st.permutations(block))
    new = Permutation(pi.order[:lo] + tuple(block) + pi.order[hi + 1:])
    return ctx, pi, new, lo, hi


# --- examples ----------------------------------------------------------------

@pytest.mark.parametrize("order", [(0, 1, 2), (2, 0, 1), (1, 2, 0)])
def test_identity_whitening_gives_identity_q(order):
    g, st_ = qwo_build(build_whitening(np.eye(3)), order, tau=0.0)
    np.testing.assert_allclose(st_.Q, np.eye(3), atol=1e-14)
    assert g.edge_count == 0


def test_chain_compatible_order_recovers_b(chain_model):
    ctx = oracle_whitening(chain_model)
    g, state = qwo_build(ctx, [0, 1, 2], tau=1e-9)
    assert g.edges == {(0, 1), (1, 2)}
    assert np.max(np.abs(state.B - chain_model.B)) < 1e-9
    np.testing.assert_allclose(state.noise_variances, chain_model.sigma, atol=1e-9)


def test_chain_non_compatible_order(chain_model, chain):
    g, _ = qwo_build(oracle_whitening(chain_model), [0, 2, 1], tau=1e-9)
    assert g.edges == {(0, 2), (0, 1), (2, 1)}
    assert g == oracle_gpi(chain, [0, 2, 1])


def test_update_with_same_order_is_a_no_op(chain_model):
    g, state = qwo_build(oracle_whitening(chain_model), [0, 1, 2], tau=1e-9)
    g2, s2 = qwo_update(state, state.pi, 1, 1)
    assert g2 == g
    np.testing.assert_array_equal(s2.Q, state.Q)


def test_update_swap_on_chain(chain_model, chain):
    ctx = oracle_whitening(chain_model)
    _, state = qwo_build(ctx, [0, 1, 2], tau=1e-9)
    g, s2 = qwo_update(state, [1, 0, 2], 0, 1)
    assert g.edges == {(1, 0), (1, 2)}
    g_full, s_full = qwo_build(ctx, [1, 0, 2], tau=1e-9)
    assert g == g_full == oracle_gpi(chain, [1, 0, 2])
    assert np.max(np.abs(s2.Q - s_full.Q)) < 1e-9


@pytest.mark.parametrize("seed", range(5))
def test_update_adjacent_transposition_n8(seed):
    rng = np.random.default_rng(seed)
    _, _, ctx = oracle_case(seed, 8)
    pi = Permutation(rng.permutation(8))
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    i = int(rng.integers(7))
    new = pi.swap(i, i + 1)
    _, s2 = qwo_update(state, new, i, i + 1)
    _, s3 = qwo_build(ctx, new, tau=ORACLE_TAU)
    assert np.max(np.abs(s2.Q - s3.Q)) < 1e-9


def test_extract_graph_thresholds(chain_model, chain):
    _, state = qwo_build(oracle_whitening(chain_model), [0, 1, 2], tau=1e-9)
    assert extract_graph(state, np.inf).edge_count == 0
    assert extract_graph(state, 1e-9) == chain
    assert extract_graph(state, 2.0).edge_count == 0


def test_update_rejects_changes_outside_block(chain_model):
    _, state = qwo_build(oracle_whitening(chain_model), [0, 1, 2])
    with pytest.raises(ValueError):
        qwo_update(state, [2, 1, 0], 0, 1)
    with pytest.raises(ValueError):
        qwo_update(state, [0, 1, 2], 2, 1)
    with pytest.raises(ValueError):
        qwo_build(state.ctx, [0, 1])


def test_degenerate_whitening_detected():
    W = np.array([[1.0, 1.0], [1.0, 1.0]])
    ctx = WhiteningContext(cov=np.eye(2), eigvals=np.ones(2), eigvecs=np.eye(2), W=W)
    with pytest.raises(DegenerateWhiteningError):
        qwo_build(ctx, [0, 1])


# --- agreement with the literal row-by-row loop ------------------------------

@given(cases(max_n=12))
def test_matches_row_by_row_gram_schmidt(case):
    _, _, ctx, pi = case
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    Q_ref = gram_schmidt_rows(ctx.W, list(pi.order))
    assert np.max(np.abs(state.Q - Q_ref)) < 1e-10


@given(st.integers(0, 10_000), st.integers(2, 9))
def test_matches_loop_on_sample_covariance(seed, n):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    ctx = build_whitening(A @ A.T / n + 0.2 * np.eye(n))
    order = rng.permutation(n)
    _, state = qwo_build(ctx, order)
    np.testing.assert_allclose(state.Q, gram_schmidt_rows(ctx.W, list(order)), atol=1e-9)


# --- soundness and structural identities -------------------------------------

@given(cases())
def test_soundness_against_ci_oracle(case):
    g, _, ctx, pi = case
    built, _ = qwo_build(ctx, pi, tau=ORACLE_TAU)
    assert built == oracle_gpi(g, pi)
    assert is_compatible(built, pi)


@given(cases())
def test_generative_reconstruction(case):
    _, _, ctx, pi = case
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    Q = state.Q
    cov = model_covariance(state.B, np.diag(Q @ Q.T))
    assert np.max(np.abs(cov - ctx.cov)) < 1e-7


@given(cases())
def test_defining_constraints(case):
    _, _, ctx, pi = case
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    res = constraint_residuals(state)
    assert res["triangular"] < 1e-8
    assert res["diagonal"] < 1e-8
    assert res["orthogonal"] < 1e-8


@given(cases(max_n=8))
def test_precision_pattern_identity(case):
    _, _, ctx, pi = case
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    order = list(pi.order)
    for j in range(len(order)):
        P = np.linalg.inv(ctx.cov[np.ix_(order[:j + 1], order[:j + 1])])
        for i in range(j):
            qw_zero = abs(state.QW[order[j], order[i]]) < 1e-7
            prec_zero = abs(P[i, j]) < 1e-7
            assert qw_zero == prec_zero


@given(cases(max_n=8))
def test_span_invariance(case):
    _, _, ctx, pi = case
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    order = list(pi.order)
    for i in range(len(order)):
        Qs = state.Q[order[i:]]
        Ws = ctx.W[order[i:]]
        k = len(order) - i
        assert np.linalg.matrix_rank(np.vstack([Qs, Ws]), tol=1e-8) == k


@given(cases(max_n=8))
def test_partial_correlations_match_matrix_inversion(case):
    _, _, ctx, pi = case
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    R = state.partial_correlations()
    order = list(pi.order)
    for b in range(len(order)):
        for a in range(b):
            S = [order[k] for k in range(b) if k != a]
            ref = partial_corr(ctx.cov, order[a], order[b], S)
            assert abs(R[order[a], order[b]] - ref) < 1e-8


# --- update equivalence ---------------------------------------------------

@given(block_moves())
def test_update_equals_rebuild(move):
    ctx, pi, new, lo, hi = move
    _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
    g_up, s_up = qwo_update(state, new, lo, hi)
    g_re, s_re = qwo_build(ctx, new, tau=ORACLE_TAU)
    assert g_up == g_re
    assert np.max(np.abs(s_up.Q - s_re.Q)) < 1e-9
    # the input state must not be modified
    np.testing.assert_array_equal(state.Q, qwo_build(ctx, pi, tau=ORACLE_TAU)[1].Q)


def test_update_equals_rebuild_200_triples():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for t in range(200):
        n = int(rng.integers(2, 16))
        _, _, ctx = oracle_case(t, n)
        pi = Permutation(rng.permutation(n))
        lo = int(rng.integers(n))
        hi = int(rng.integers(lo, n))
        block = list(pi.order[lo:hi + 1])
        rng.shuffle(block)
        new = Permutation(pi.order[:lo] + tuple(block) + pi.order[hi + 1:])
        _, state = qwo_build(ctx, pi, tau=ORACLE_TAU)
        _, s_up = qwo_update(state, new, lo, hi)
        _, s_re = qwo_build(ctx, new, tau=ORACLE_TAU)
        worst = max(worst, float(np.max(np.abs(s_up.Q - s_re.Q))))
    assert worst < 1e-9


def test_update_with_new_threshold_recomputes_graph(chain_model):
    ctx = oracle_whitening(chain_model)
    _, state = qwo_build(ctx, [0, 1, 2], tau=1e-9)
    g, s2 = qwo_update(state, [0, 1, 2], 0, 0, tau=2.0)
    assert g.edge_count == 0 and s2.tau == 2.0


# --- the partial-correlation test rule ------------------------------------

def sampled_ctx(seed, n, N):
    g = sample_er_dag(n, 2.0, seed)
    model = sample_ligam(g, seed + 1)
    return g, whiten_data(sample_data(model, N, seed=seed + 2))


def test_fisher_rule_needs_sample_size(chain_model):
    with pytest.raises(ValueError):
        qwo_build(oracle_whitening(chain_model), [0, 1, 2], alpha=0.01)
    with pytest.raises(ValueError):
        QwoBuilder(oracle_whitening(chain_model), alpha=0.01)


@pytest.mark.parametrize("alpha", [0.0, 1.0, -0.5])
def test_fisher_rule_rejects_bad_alpha(alpha, rng):
    ctx = whiten_data(rng.standard_normal((50, 3)))
    with pytest.raises(ValueError):
        qwo_build(ctx, [0, 1, 2], alpha=alpha)


@given(st.integers(0, 1000), st.data())
def test_fisher_rule_update_equals_rebuild(seed, data):
    n = data.draw(st.integers(3, 9))
    _, ctx = sampled_ctx(seed, n, 300)
    pi = Permutation(data.draw(st.permutations(range(n))))
    lo = data.draw(st.integers(0, n - 2))
    hi = data.draw(st.integers(lo + 1, n - 1))
    block = data.draw(st.permutations(list(pi.order[lo:hi + 1])))
    new = Permutation(pi.order[:lo] + tuple(block) + pi.order[hi + 1:])
    _, state = qwo_build(ctx, pi, alpha=0.05)
    g_up, s_up = qwo_update(state, new, lo, hi)
    g_re, s_re = qwo_build(ctx, new, alpha=0.05)
    assert g_up == g_re
    np.testing.assert_allclose(s_up.cumulative(), s_re.cumulative(), rtol=1e-9, atol=1e-12)


def test_fisher_rule_matches_explicit_test(rng):
    from statistics import NormalDist
    g, ctx = sampled_ctx(7, 7, 400)
    pi = Permutation(rng.permutation(7))
    built, _ = qwo_build(ctx, pi, alpha=0.01)
    crit = NormalDist().inv_cdf(1 - 0.01 / 2)
    order = list(pi.order)
    expected = set()
    for b in range(7):
        for a in range(b):
            S = [order[k] for k in range(b) if k != a]
            r = partial_corr(ctx.cov, order[a], order[b], S)
            if abs(np.arctanh(r)) * np.sqrt(400 - len(S) - 3) > crit:
                expected.add((order[a], order[b]))
    assert built.edges == expected


def test_fisher_rule_recovers_truth_on_large_samples():
    g, ctx = sampled_ctx(11, 8, 50_000)
    built, _ = qwo_build(ctx, g.topological_order(), alpha=0.001)
    assert built == g


def test_builder_counts_calls(chain_model):
    b = QwoBuilder(oracle_whitening(chain_model), tau=1e-9)
    _, s = b.build([0, 1, 2])
    b.update(s, [1, 0, 2], 0, 1)
    assert b.calls == 2


def test_single_variable():
    g, state = qwo_build(oracle_whitening(LigamModel(np.zeros((1, 1)), [2.0])), [0])
    assert g == Dag(1)
    np.testing.assert_allclose(state.noise_variances, [2.0])
