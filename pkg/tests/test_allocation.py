"""Bandwidth allocation tests: histogram, tables, program assembly, solvers."""

import math

import numpy as np
import pytest

from hybriddet.allocation import (
    AllocationInfeasibleError,
    BudgetMode,
    ErrorHistogram,
    FiTable,
    Sense,
    allocate,
    allocate_dp_oracle,
    build_fi_table,
    build_ilp,
    categorize_errors,
    validate_allocation,
)
from hybriddet.design import PsoSettings


def random_instance(rng, max_count=16, max_budget=200):
    n = int(rng.integers(1, 5))
    levels = int(rng.integers(1, 4))
    eps = tuple(np.sort(rng.choice(np.linspace(0, 0.5, 51), n, replace=False)))
    counts = rng.integers(1, max_count, n)
    m = int(counts.sum())
    hist = ErrorHistogram(eps, tuple(counts / m), m)
    gamma = np.sort(rng.uniform(0, 0.95, (levels, n)), axis=0)
    gamma = np.sort(gamma, axis=1)[:, ::-1]
    table = FiTable(gamma=gamma, gamma0=1.0)
    budget = int(rng.integers(m, max_budget + 1))
    l0 = int(rng.integers(4, 33))
    mode = BudgetMode.AT_MOST if rng.random() < 0.5 else BudgetMode.EXACT
    sense = Sense.MAXIMIZE_FI if rng.random() < 0.5 else Sense.MINIMIZE_FI
    return hist, table, budget, l0, mode, sense


class TestCategorize:
    def test_basic(self):
        hist = categorize_errors([0.2, 0.0, 0.0, 0.2])
        assert hist.epsilons == (0.0, 0.2)
        assert hist.freqs == (0.5, 0.5)
        assert hist.m_total == 4
        assert hist.counts == (2, 2)

    def test_single(self):
        hist = categorize_errors([0.1])
        assert hist.epsilons == (0.1,)
        assert hist.freqs == (1.0,)
        assert hist.m_total == 1

    def test_paper_scale_counts(self):
        pes = [0.0] * 60 + [0.01] * 20 + [0.1] * 10 + [0.2] * 10
        hist = categorize_errors(pes)
        assert hist.counts == (60, 20, 10, 10)
        assert hist.freqs == (0.6, 0.2, 0.1, 0.1)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            categorize_errors([])

    def test_fractional_counts_rejected(self):
        with pytest.raises(ValueError):
            ErrorHistogram((0.0, 0.1), (0.55, 0.45), 10)


class TestFiTable:
    def test_values(self):
        hist = ErrorHistogram((0.0, 0.5), (0.5, 0.5), 2)
        table = build_fi_table(hist, 1, 1.0, PsoSettings(seed=2))
        assert table.gamma[0, 0] == pytest.approx(2 / math.pi, abs=1e-6)
        assert table.gamma[0, 1] == pytest.approx(0.0, abs=1e-12)
        assert table.gamma0 == pytest.approx(1.0, abs=1e-15)

    def test_monotone_in_channel_and_bits(self):
        hist = ErrorHistogram((0.0, 0.01, 0.1, 0.2), (0.25,) * 4, 4)
        table = build_fi_table(hist, 3, 1.0, PsoSettings(seed=2))
        assert np.all(np.diff(table.gamma, axis=1) <= 1e-6)   # worse channel
        assert np.all(np.diff(table.gamma, axis=0) >= -1e-6)  # more bits
        assert table.gamma0 >= table.gamma.max() - 1e-9

    def test_deterministic(self):
        hist = ErrorHistogram((0.0, 0.2), (0.5, 0.5), 2)
        a = build_fi_table(hist, 2, 1.0, PsoSettings(seed=5))
        b = build_fi_table(hist, 2, 1.0, PsoSettings(seed=5))
        np.testing.assert_array_equal(a.gamma, b.gamma)


class TestBuildIlp:
    HIST = ErrorHistogram((0.0, 0.01, 0.1, 0.2), (0.6, 0.2, 0.1, 0.1), 20)
    TABLE = FiTable(gamma=np.arange(1, 13).reshape(3, 4) / 13.0, gamma0=1.0)

    def test_shape_before_slack(self):
        prob = build_ilp(self.HIST, self.TABLE, 500, 32, BudgetMode.EXACT)
        assert prob.eq_matrix.shape == (6, 16)

    def test_slack_column_in_at_most_mode(self):
        prob = build_ilp(self.HIST, self.TABLE, 500, 32, BudgetMode.AT_MOST)
        assert prob.eq_matrix.shape == (6, 17)
        assert prob.cost[-1] == 0.0
        np.testing.assert_array_equal(prob.eq_matrix[:, -1], [0, 1, 0, 0, 0, 0])

    def test_budget_row_rhs(self):
        prob = build_ilp(self.HIST, self.TABLE, 500, 32, BudgetMode.EXACT)
        assert prob.eq_rhs[1] == 500.0

    def test_vectorization_consistency(self):
        # The column holding the count of 2-bit sensors in category 3 must
        # carry bandwidth weight 2, cost -gamma[1, 2], and appear in
        # category 3's head-count row.
        prob = build_ilp(self.HIST, self.TABLE, 500, 32, BudgetMode.EXACT)
        L = 3
        col = 2 * L + 1  # category index 2, level index 1, column-major
        assert prob.eq_matrix[1, col] == 2.0
        assert prob.cost[col] == pytest.approx(-self.TABLE.gamma[1, 2])
        assert prob.eq_matrix[2 + 2, col] == 1.0
        assert prob.eq_matrix[2 + 1, col] == 0.0

    def test_promotion_bounds(self):
        prob = build_ilp(self.HIST, self.TABLE, 500, 32, BudgetMode.EXACT)
        np.testing.assert_array_equal(prob.upper[12:16], [12, 4, 2, 2])


class TestAllocate:
    def test_exact_budget_unique_fill(self):
        hist = ErrorHistogram((0.0,), (1.0,), 2)
        table = FiTable(gamma=np.array([[0.63], [0.88], [0.96]]), gamma0=1.0)
        result = allocate(hist, table, 64, 32, BudgetMode.EXACT, Sense.MAXIMIZE_FI)
        assert np.array_equal(result.promotions, [2])
        assert result.x_matrix.sum() == 0
        assert result.total_fi == pytest.approx(2.0, abs=1e-12)
        oracle = allocate_dp_oracle(hist, table, 64, 32, BudgetMode.EXACT, Sense.MAXIMIZE_FI)
        assert oracle.total_fi == pytest.approx(result.total_fi, abs=1e-12)

    def test_tight_budget_forces_one_bit(self):
        hist = ErrorHistogram((0.0,), (1.0,), 3)
        table = FiTable(gamma=np.array([[2 / math.pi], [0.88], [0.96]]), gamma0=1.0)
        result = allocate(hist, table, 3, 32, BudgetMode.AT_MOST, Sense.MAXIMIZE_FI)
        assert np.array_equal(result.x_matrix, [[3], [0], [0]])
        assert result.total_fi == pytest.approx(3 * 2 / math.pi, abs=1e-9)

    def test_budget_below_sensor_count_infeasible(self):
        hist = ErrorHistogram((0.0,), (1.0,), 3)
        table = FiTable(gamma=np.array([[0.6]]), gamma0=1.0)
        with pytest.raises(AllocationInfeasibleError):
            allocate(hist, table, 2, 32, BudgetMode.AT_MOST)

    def test_matches_dp_oracle_randomized(self):
        rng = np.random.default_rng(3)
        agreements = 0
        for _ in range(40):
            hist, table, budget, l0, mode, sense = random_instance(rng)
            try:
                a = allocate(hist, table, budget, l0, mode, sense)
                a_fi = a.total_fi
                validate_allocation(a, hist, budget, l0, mode)
            except AllocationInfeasibleError:
                a_fi = None
            try:
                d = allocate_dp_oracle(hist, table, budget, l0, mode, sense)
                d_fi = d.total_fi
                validate_allocation(d, hist, budget, l0, mode)
            except AllocationInfeasibleError:
                d_fi = None
            assert (a_fi is None) == (d_fi is None)
            if a_fi is not None:
                assert a_fi == pytest.approx(d_fi, abs=1e-9)
            agreements += 1
        assert agreements == 40

    def test_budget_monotonicity(self):
        hist = ErrorHistogram((0.0, 0.2), (0.5, 0.5), 8)
        table = FiTable(gamma=np.array([[0.6, 0.2], [0.85, 0.3], [0.95, 0.4]]), gamma0=1.0)
        values = [
            allocate(hist, table, q, 16, BudgetMode.AT_MOST, Sense.MAXIMIZE_FI).total_fi
            for q in (8, 16, 32, 64, 128)
        ]
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_sensor_monotonicity(self):
        table = FiTable(gamma=np.array([[0.6, 0.2], [0.85, 0.3], [0.95, 0.4]]), gamma0=1.0)
        values = []
        for m in (4, 8, 12, 16):
            hist = ErrorHistogram((0.0, 0.2), (0.5, 0.5), m)
            values.append(
                allocate(hist, table, 64, 16, BudgetMode.AT_MOST, Sense.MAXIMIZE_FI).total_fi
            )
        assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_sense_ordering(self):
        rng = np.random.default_rng(9)
        for _ in range(10):
            hist, table, budget, l0, _, _ = random_instance(rng)
            try:
                hi = allocate(hist, table, budget, l0, BudgetMode.AT_MOST, Sense.MAXIMIZE_FI)
                lo = allocate(hist, table, budget, l0, BudgetMode.AT_MOST, Sense.MINIMIZE_FI)
            except AllocationInfeasibleError:
                continue
            assert hi.total_fi >= lo.total_fi - 1e-12

    def test_nonbinding_budget_promotes_everything(self):
        hist = ErrorHistogram((0.0, 0.2), (0.5, 0.5), 4)
        table = FiTable(gamma=np.array([[0.6, 0.2], [0.85, 0.3], [0.95, 0.4]]), gamma0=1.0)
        result = allocate(hist, table, 4 * 32, 32, BudgetMode.AT_MOST, Sense.MAXIMIZE_FI)
        assert np.array_equal(result.promotions, [2, 2])
        assert result.total_fi == pytest.approx(4.0, abs=1e-12)


class TestDpOracle:
    def test_zero_budget_zero_sensors(self):
        # Smallest degenerate instance the histogram type admits: one sensor,
        # budget equal to its one-bit cost.
        hist = ErrorHistogram((0.0,), (1.0,), 1)
        table = FiTable(gamma=np.array([[0.5]]), gamma0=1.0)
        result = allocate_dp_oracle(hist, table, 1, 8, BudgetMode.AT_MOST)
        assert result.total_fi == pytest.approx(0.5)
        assert result.bits_used == 1

    def test_exact_promotion_is_only_fill(self):
        hist = ErrorHistogram((0.0,), (1.0,), 1)
        table = FiTable(gamma=np.array([[0.5], [0.8]]), gamma0=1.0)
        result = allocate_dp_oracle(hist, table, 16, 16, BudgetMode.EXACT)
        assert np.array_equal(result.promotions, [1])

    def test_budget_cap_enforced(self):
        hist = ErrorHistogram((0.0,), (1.0,), 1)
        table = FiTable(gamma=np.array([[0.5]]), gamma0=1.0)
        with pytest.raises(ValueError):
            allocate_dp_oracle(hist, table, 20_000, 32)
