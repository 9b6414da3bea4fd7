import numpy as np
import pytest

from ncsdp.free_algebra import evaluate_scalar
from ncsdp.generator import (
    ball_inequality,
    chain_cliques,
    default_equality_count,
    gen_dense,
    gen_sparse,
    polydisc_inequalities,
    random_symmetric_quadratic,
)


def anchor_is_feasible(prob, tol=1e-12):
    a = list(prob.anchor)
    for g in prob.inequalities:
        assert evaluate_scalar(g, a) >= -tol
    for h in prob.equalities:
        assert abs(evaluate_scalar(h, a)) <= 1e-9


def test_default_equality_counts():
    assert default_equality_count(10, "ball") == 3
    assert default_equality_count(20, "ball") == 5
    assert default_equality_count(30, "ball") == 8
    assert default_equality_count(10, "polydisc") == 2
    assert default_equality_count(30, "polydisc") == 5
    assert default_equality_count(1000, "sparse") == 143


def test_ball_inequality_terms():
    g = ball_inequality(3)
    assert g.terms == {(): 1.0, (1, 1): -1.0, (2, 2): -1.0, (3, 3): -1.0}
    sub = ball_inequality(5, letters=(2, 4))
    assert sub.terms == {(): 1.0, (2, 2): -1.0, (4, 4): -1.0}


def test_polydisc_inequality_terms():
    gs = polydisc_inequalities(4)
    assert len(gs) == 4
    for j, g in enumerate(gs, start=1):
        assert g.terms == {(): 0.25, (j, j): -1.0}


def test_random_quadratic_is_symmetric():
    from ncsdp.generator import _rng

    p = random_symmetric_quadratic(3, (1, 2, 3), _rng(4))
    assert p.is_symmetric()
    assert p.degree <= 2


def test_gen_dense_ball():
    prob = gen_dense(5, kind="ball", seed=2)
    assert prob.n == 5
    assert len(prob.inequalities) == 1
    assert len(prob.equalities) == 2  # ceil(5/4)
    assert np.linalg.norm(prob.anchor) <= 1.0
    anchor_is_feasible(prob)
    for h in prob.equalities:
        assert h.is_symmetric()


def test_gen_dense_polydisc():
    prob = gen_dense(6, kind="polydisc", seed=2)
    assert len(prob.inequalities) == 6
    assert len(prob.equalities) == 1  # ceil(6/7)
    assert np.abs(prob.anchor).max() <= 1.0 / np.sqrt(6)
    anchor_is_feasible(prob)


def test_gen_dense_explicit_l_and_bad_kind():
    assert len(gen_dense(5, l=0, seed=0).equalities) == 0
    assert len(gen_dense(5, l=4, seed=0).equalities) == 4
    with pytest.raises(ValueError):
        gen_dense(5, kind="cube")


def test_gen_dense_reproducible():
    a = gen_dense(4, seed=12)
    b = gen_dense(4, seed=12)
    c = gen_dense(4, seed=13)
    assert a.objective.terms == b.objective.terms
    assert np.array_equal(a.anchor, b.anchor)
    assert a.objective.terms != c.objective.terms


@pytest.mark.filterwarnings("ignore:clique chain")
def test_chain_cliques_exact_pattern():
    cl = chain_cliques(1000, 10)
    assert len(cl) == 100
    assert cl[0] == tuple(range(1, 12))
    for q in range(99):
        assert cl[q] == tuple(range(10 * q + 1, 10 * q + 12))
    assert cl[-1] == tuple(range(991, 1001))
    assert len(cl[-1]) == 10  # clamped at the boundary
    for a, b in zip(cl, cl[1:]):
        assert set(a) & set(b)  # consecutive cliques overlap


def test_chain_cliques_small_cases():
    with pytest.warns(UserWarning, match="clamped"):
        assert chain_cliques(9, 4) == ((1, 2, 3, 4, 5), (5, 6, 7, 8, 9))
    with pytest.warns(UserWarning, match="clamped"):
        assert chain_cliques(20, 10) == (tuple(range(1, 12)), tuple(range(11, 21)))
    with pytest.warns(UserWarning):
        assert chain_cliques(4, 4) == ((1, 2, 3, 4),)
    with pytest.raises(ValueError):
        chain_cliques(5, 0)
    with pytest.raises(ValueError):
        chain_cliques(5, 6)


def test_chain_cliques_cover_all_letters():
    for n, u in ((1000, 10), (9, 4), (20, 10), (7, 3), (15, 15)):
        import warnings

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            cl = chain_cliques(n, u)
        covered = sorted({j for c in cl for j in c})
        assert covered == list(range(1, n + 1))


@pytest.mark.filterwarnings("ignore:clique chain")
def test_gen_sparse_structure():
    prob = gen_sparse(9, 4, seed=1)
    assert prob.cliques == [(1, 2, 3, 4, 5), (5, 6, 7, 8, 9)]
    assert len(prob.inequalities) == 2
    for g, letters in zip(prob.inequalities, prob.cliques):
        assert g.terms == ball_inequality(9, letters).terms
    assert len(prob.equalities) == 2  # ceil(9/7)
    anchor_is_feasible(prob)
    # objective monomials stay inside single cliques
    for w in prob.objective.terms:
        assert any(set(w) <= set(c) for c in prob.cliques)


@pytest.mark.filterwarnings("ignore:clique chain")
def test_gen_sparse_equality_distribution():
    prob = gen_sparse(9, 4, l=3, seed=1)
    # 3 equalities over 2 cliques: first clique gets 2, second gets 1
    supports = [h.support_letters() for h in prob.equalities]
    in_first = sum(1 for s in supports if s <= set(prob.cliques[0]))
    in_second = sum(1 for s in supports if s <= set(prob.cliques[1]))
    assert (in_first, in_second) == (2, 1)


@pytest.mark.filterwarnings("ignore:clique chain")
def test_gen_sparse_anchor_box():
    prob = gen_sparse(9, 4, seed=6)
    # every coordinate sits inside the box inscribed in its largest clique ball
    for j in range(9):
        assert abs(prob.anchor[j]) <= 1.0 / np.sqrt(5.0) + 1e-15


@pytest.mark.filterwarnings("ignore:clique chain")
def test_gen_sparse_reproducible():
    a = gen_sparse(1000, 10, seed=3)
    b = gen_sparse(1000, 10, seed=3)
    assert a.objective.terms == b.objective.terms
    assert np.array_equal(a.anchor, b.anchor)
    assert len(a.equalities) == 143
