import math
import random

import pytest
from hypothesis import given, settings, strategies as st

from cvrmot import CostMatrix, FORBIDDEN, brute_force_lap, solve_lap


def M(rows):
    return CostMatrix.from_rows(rows)


def test_diagonal_dominance():
    a = solve_lap(M([[1, 2], [2, 1]]))
    assert a.pairs == ((0, 0), (1, 1))
    assert a.total_cost == 2.0


def test_antidiagonal_optimum():
    # both permutations: diag 4+3=7, anti 1+2=3
    a = solve_lap(M([[4, 1], [2, 3]]))
    assert a.pairs == ((0, 1), (1, 0))
    assert a.total_cost == 3.0


def test_single_row_picks_minimum():
    a = solve_lap(M([[5, 1, 7]]))
    assert a.pairs == ((0, 1),)
    assert a.total_cost == 1.0


def test_identity_cost_matrix():
    rows = [[0 if r == c else 1 for c in range(4)] for r in range(4)]
    a = solve_lap(M(rows))
    assert a.pairs == tuple((i, i) for i in range(4))
    assert a.total_cost == 0.0


def test_all_equal_costs_lexicographic_tie_break():
    a = solve_lap(M([[3, 3], [3, 3]]))
    assert a.pairs == ((0, 0), (1, 1))
    assert a.total_cost == 6.0
    b = brute_force_lap(M([[3, 3], [3, 3]]))
    assert b.pairs == a.pairs and b.total_cost == a.total_cost


def test_no_feasible_pair_gives_empty_assignment():
    a = solve_lap(M([[FORBIDDEN, FORBIDDEN], [FORBIDDEN, FORBIDDEN]]))
    assert a.pairs == ()
    assert a.total_cost == 0.0


def test_forbidden_pairs_reduce_cardinality():
    a = solve_lap(M([[1, FORBIDDEN], [2, FORBIDDEN]]))
    assert a.pairs == ((0, 0),)
    assert a.total_cost == 1.0


def test_max_cardinality_beats_cheap_short_matching():
    # the cheapest single pair is (0,0) at cost 0, but only (0,1),(1,0) is full
    rows = [[0, 5], [0, FORBIDDEN]]
    a = solve_lap(M(rows))
    assert a.pairs == ((0, 1), (1, 0))
    assert a.total_cost == 5.0
    assert brute_force_lap(M(rows)) == a


def test_brute_force_rejects_large_instances():
    rows = [[1.0] * 9 for _ in range(9)]
    with pytest.raises(ValueError):
        brute_force_lap(M(rows))


def test_cost_matrix_validation():
    with pytest.raises(ValueError):
        CostMatrix.from_rows([])
    with pytest.raises(ValueError):
        CostMatrix.from_rows([[1.0], [1.0, 2.0]])
    with pytest.raises(ValueError):
        CostMatrix.from_rows([[math.nan]])
    with pytest.raises(ValueError):
        CostMatrix.from_rows([[-math.inf]])


_entry = st.one_of(
    st.integers(min_value=0, max_value=9).map(float),
    st.just(FORBIDDEN),
)


@st.composite
def small_matrices(draw):
    r = draw(st.integers(min_value=1, max_value=5))
    c = draw(st.integers(min_value=1, max_value=5))
    return M([[draw(_entry) for _ in range(c)] for _ in range(r)])


@given(small_matrices())
@settings(max_examples=200, deadline=None)
def test_solver_matches_brute_force(matrix):
    a = solve_lap(matrix)
    b = brute_force_lap(matrix)
    assert a.total_cost == b.total_cost
    assert a.pairs == b.pairs


@given(small_matrices())
@settings(max_examples=100, deadline=None)
def test_solver_is_deterministic(matrix):
    assert solve_lap(matrix) == solve_lap(matrix)


def test_row_permutation_equivariance():
    rng = random.Random(11)
    for _ in range(50):
        n = rng.randint(2, 6)
        rows = [[rng.random() for _ in range(n)] for _ in range(n)]
        perm = list(range(n))
        rng.shuffle(perm)
        base = solve_lap(M(rows))
        permuted = solve_lap(M([rows[perm[r]] for r in range(n)]))
        # continuous costs make the optimum unique with probability one
        expected = tuple(sorted((perm.index(r), c) for r, c in base.pairs))
        assert permuted.pairs == expected


def test_row_constant_shift_keeps_pair_set():
    rng = random.Random(13)
    for _ in range(50):
        n = rng.randint(2, 5)
        rows = [[float(rng.randint(0, 9)) for _ in range(n)] for _ in range(n)]
        base = solve_lap(M(rows))
        k = rng.randrange(n)
        shifted = [list(row) for row in rows]
        shifted[k] = [v + 7.0 for v in shifted[k]]
        assert solve_lap(M(shifted)).pairs == base.pairs
