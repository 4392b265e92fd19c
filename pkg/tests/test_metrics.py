import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from extbandit.core import RunTrace
from extbandit.metrics import (
    bootstrap_average_rank,
    is_tie,
    max_so_far,
    normalized_loss,
    optimal_pull_count,
    proxy_regret,
    proxy_regret_curve,
    sign_test,
    wins_ties_losses,
)


def _enumerated_tails(n):
    """P(#heads >= w) for every w, by listing all 2^n coin sequences."""
    heads = np.zeros(1, dtype=np.int64)
    for _ in range(n):
        heads = np.concatenate([heads, heads + 1])
    counts = np.bincount(heads, minlength=n + 1)
    return [int(counts[w:].sum()) / 2**n for w in range(n + 1)]


def _pascal_tails(n):
    row = [1]
    for _ in range(n):
        row = [a + b for a, b in zip([0] + row, row + [0])]
    total = 2**n
    return [sum(row[w:]) / total for w in range(n + 1)]


class TestSignTest:
    def test_reported_values(self):
        assert 0.000705 <= sign_test(24, 6) <= 0.000725
        assert sign_test(64, 39) == pytest.approx(0.00880, abs=5e-4)
        assert sign_test(1, 0) == 0.5
        assert sign_test(0, 0) == 1.0

    @pytest.mark.parametrize("n", range(0, 21))
    def test_matches_enumeration(self, n):
        for w, p in enumerate(_enumerated_tails(n)):
            assert sign_test(w, n - w) == pytest.approx(p, rel=1e-12)

    @pytest.mark.parametrize("n", range(21, 31))
    def test_matches_pascal(self, n):
        for w, p in enumerate(_pascal_tails(n)):
            assert sign_test(w, n - w) == pytest.approx(p, rel=1e-12)

    def test_large_n_stays_in_range(self):
        p = sign_test(5100, 4900)
        assert p == pytest.approx(0.0232927638524736, rel=1e-12)
        assert sign_test(10000, 0) == 2.0**-10000

    @given(st.integers(0, 200), st.integers(0, 200))
    def test_non_increasing_in_wins(self, w, l):
        if l > 0:
            assert sign_test(w + 1, l - 1) <= sign_test(w, l)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            sign_test(-1, 3)


class TestWinsTiesLosses:
    def test_tie_rule(self):
        assert is_tie(0.5, 0.5)
        assert is_tie(0.5 + 1e-12, 0.5)
        assert not is_tie(0.6, 0.5)

    def test_counts(self):
        rec = wins_ties_losses([0.6, 0.5, 0.1], [0.5, 0.5, 0.2])
        assert (rec.wins, rec.ties, rec.losses) == (1, 1, 1)

    @given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), max_size=30))
    def test_total_and_swap(self, pairs):
        a = [x for x, _ in pairs]
        b = [y for _, y in pairs]
        rec = wins_ties_losses(a, b)
        assert rec.total == len(pairs)
        swapped = wins_ties_losses(b, a)
        # the tolerance scales with the reference, so only clear-cut pairs must swap
        clear = [(x, y) for x, y in pairs if abs(x - y) > 1e-8 * (1 + max(abs(x), abs(y)))]
        c1 = wins_ties_losses([x for x, _ in clear], [y for _, y in clear])
        c2 = wins_ties_losses([y for _, y in clear], [x for x, _ in clear])
        assert (c1.wins, c1.ties, c1.losses) == (c2.losses, c2.ties, c2.wins)
        assert swapped.total == rec.total

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            wins_ties_losses([1.0], [1.0, 2.0])


class TestCurves:
    def test_max_so_far(self):
        assert max_so_far([0.1, 0.5, 0.3]).tolist() == [0.1, 0.5, 0.5]
        assert max_so_far([0.2, 0.2]).tolist() == [0.2, 0.2]
        assert max_so_far([0.7]).tolist() == [0.7]

    @given(arrays(np.float64, st.integers(1, 50), elements=st.floats(-1e9, 1e9)))
    def test_non_decreasing(self, x):
        assert np.all(np.diff(max_so_far(x)) >= 0)

    def test_proxy_regret_examples(self):
        ones, zeros = np.ones((3, 5)), np.zeros((3, 5))
        assert proxy_regret(zeros, [ones, zeros]) == 1.0
        assert proxy_regret(ones, [ones, zeros]) == 0.0
        assert proxy_regret_curve(zeros, [ones, zeros]).tolist() == [1.0] * 5
        with pytest.raises(ValueError):
            proxy_regret(zeros, [ones], horizon=4)
        with pytest.raises(ValueError):
            proxy_regret(zeros, [np.ones((3, 4))])

    def test_optimal_pulls(self):
        assert optimal_pull_count([1, 1, 1], 1) == 3
        assert optimal_pull_count([0, 0], 1) == 0
        trace = RunTrace("t", "p", 0, 10, np.arange(10) % 2, np.zeros(10), 2)
        assert optimal_pull_count(trace, 1) == 5


class TestNormalizedLoss:
    def test_examples(self):
        assert normalized_loss({"a": np.full((2, 3), 0.4)})["a"].tolist() == [[0.0] * 3] * 2
        out = normalized_loss({"a": np.array([0.2]), "b": np.array([0.8])})
        assert (out["a"][0], out["b"][0]) == (0.0, 1.0)

    @given(arrays(np.float64, (3, 4), elements=st.floats(-100, 100)),
           st.floats(0.5, 10), st.floats(-50, 50))
    def test_affine_invariance(self, x, s, c):
        a = normalized_loss({"p": x})["p"]
        b = normalized_loss({"p": s * x + c})["p"]
        if np.ptp(x) > 1e-6:
            assert np.allclose(a, b, atol=1e-6)
        assert np.all((a >= 0) & (a <= 1))


def _perf(rng, tasks=3, reps=6, t=4, policies=("a", "b", "c")):
    return {f"t{i}": {p: rng.random((reps, t)) for p in policies} for i in range(tasks)}


class TestBootstrapRanks:
    def test_dominant(self, rng):
        perf = {f"t{i}": {"good": 1 + rng.random((5, 3)), "bad": rng.random((5, 3))}
                for i in range(4)}
        s = bootstrap_average_rank(perf, 200, np.random.default_rng(0))
        assert s.mean.tolist() == [[1.0] * 3, [2.0] * 3]
        assert np.all(s.ci_lo == s.ci_hi)

    def test_identical_policies(self, rng):
        m = rng.random((5, 3))
        perf = {"t": {"a": m, "b": m, "c": m}}
        s = bootstrap_average_rank(perf, 50, np.random.default_rng(0))
        assert np.all(s.mean == 2.0)

    def test_single_policy(self, rng):
        s = bootstrap_average_rank({"t": {"a": rng.random((3, 2))}}, 20, np.random.default_rng(0))
        assert np.all(s.mean == 1.0)

    @settings(deadline=None, max_examples=25)
    @given(st.integers(0, 2**32), st.integers(1, 5), st.integers(1, 5))
    def test_rank_sum_invariant(self, seed, tasks, reps):
        perf = _perf(np.random.default_rng(seed), tasks, reps)
        s = bootstrap_average_rank(perf, 30, np.random.default_rng(seed))
        assert np.allclose(s.samples.sum(axis=1), 6.0)

    def test_seeded_determinism(self, rng):
        perf = _perf(rng)
        a = bootstrap_average_rank(perf, 100, np.random.default_rng(9))
        b = bootstrap_average_rank(perf, 100, np.random.default_rng(9))
        assert a.mean.tobytes() == b.mean.tobytes() and a.ci_hi.tobytes() == b.ci_hi.tobytes()

    def test_more_iterations_stay_within_ci(self, rng):
        perf = _perf(rng, tasks=5, reps=10, t=3)
        a = bootstrap_average_rank(perf, 1000, np.random.default_rng(1))
        b = bootstrap_average_rank(perf, 2000, np.random.default_rng(2))
        assert np.all(np.abs(a.mean - b.mean) < (a.ci_hi - a.ci_lo) + 1e-12)

    def test_mismatched_policies(self, rng):
        with pytest.raises(ValueError):
            bootstrap_average_rank({"x": {"a": rng.random((2, 2))},
                                    "y": {"b": rng.random((2, 2))}}, 5)
