import math

import numpy as np
import pytest

from swaynet import rng as rngmod
from swaynet.events import RetweetEvent
from swaynet.graph import WeightedDigraph
from swaynet.growth import TimeWindow
from swaynet.sir import (
    CascadeSetup,
    FitConfig,
    FollowerSnapshots,
    build_cascade_setup,
    cascade_populations,
    final_size,
    fit_parameters,
    follower_snapshot,
    nelder_mead_1d,
    simulate_growth_rate,
    swayable_recovered_count,
    temporal_network,
    window_loss,
)

DAY = 86_400


def ev(ts, src, dst, cls="factual"):
    cat = {"factual": "SCIENCE", "misleading": "FAKE/HOAX", "uncertain": "NA"}[cls]
    return RetweetEvent(ts, src, dst, cat, cls, 0, 0, False, False, False, False)


def graph_of(*edges):
    return WeightedDigraph.from_weighted_edges(list(edges))


# -- independent oracle -----------------------------------------------------------


def bisect_final_size(s0: float, r0: float, lo: float = 1e-9, hi: float = 1.0, iters: int = 200) -> float:
    """Plain bisection on (lo, hi]; residual sign decides the half."""

    def f(r):
        return 1.0 - r - s0 * math.exp(-r * r0)

    if f(lo) < 0:
        return 1.0 - s0  # no epidemic beyond the seeds
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if f(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestTemporalNetwork:
    def test_one_month_lookback_only(self):
        events = [ev(5 * DAY, "a", "b"), ev(45 * DAY, "c", "d"), ev(65 * DAY, "e", "f")]
        window = TimeWindow(60 * DAY, 90 * DAY)
        g = temporal_network(events, window, 1, "factual")
        assert g.edge_set() == {("c", "d")}

    def test_longer_lookback_nests_shorter(self):
        events = [ev(t * DAY, f"u{t}", f"v{t}") for t in range(0, 100, 7)]
        window = TimeWindow(90 * DAY, 120 * DAY)
        short = temporal_network(events, window, 1, "factual").edge_set()
        long = temporal_network(events, window, 3, "factual").edge_set()
        assert short <= long

    def test_window_itself_excluded(self):
        events = [ev(61 * DAY, "a", "b")]
        window = TimeWindow(60 * DAY, 90 * DAY)
        assert temporal_network(events, window, 1, "factual").n_edges == 0

    def test_lookback_must_be_positive(self):
        with pytest.raises(ValueError):
            temporal_network([], TimeWindow(0, 30 * DAY), 0, "factual")


class TestCascadePopulations:
    def test_chain_reaches_downstream(self):
        g = graph_of(("A", "s1", 1), ("s1", "s2", 1))
        v_a, v_sw = cascade_populations(g, {"A"}, {"A"})
        assert v_a == {"A"}
        assert v_sw == {"s1", "s2"}

    def test_aligned_without_swayable_path_excluded(self):
        g = graph_of(("A", "B", 1), ("C", "s1", 1))
        v_a, v_sw = cascade_populations(g, {"A", "B", "C"}, {"A", "B", "C"})
        assert v_a == {"C"}
        assert v_sw == {"s1"}

    def test_upstream_swayable_excluded(self):
        g = graph_of(("s0", "A", 1), ("A", "s1", 1))
        v_a, v_sw = cascade_populations(g, {"A"}, {"A"})
        assert v_sw == {"s1"}
        assert "s0" not in v_sw

    def test_disjoint_populations(self):
        g = graph_of(("A", "s1", 1), ("s1", "B", 1))
        v_a, v_sw = cascade_populations(g, {"A", "B"}, {"A", "B"})
        assert v_a & v_sw == set()

    def test_empty_when_no_seeds_present(self):
        g = graph_of(("x", "y", 1))
        assert cascade_populations(g, {"zzz"}, {"zzz"}) == (set(), set())


class TestFinalSize:
    def test_r0_zero_reduces_exactly(self):
        assert final_size(0.9, 0.0) == 1.0 - 0.9
        assert final_size(0.25, 0.0) == 1.0 - 0.25

    def test_classic_full_susceptible_point(self):
        # Near-total susceptibility at R0 = 2.
        assert final_size(1 - 1e-12, 2.0) == pytest.approx(0.7968, abs=5e-4)
        assert final_size(1 - 1e-12, 2.0) == pytest.approx(bisect_final_size(1 - 1e-12, 2.0), abs=1e-10)

    def test_s0_099_point(self):
        assert final_size(0.99, 2.0) == pytest.approx(0.8002, abs=5e-4)
        assert final_size(0.99, 2.0) == pytest.approx(bisect_final_size(0.99, 2.0), abs=1e-10)

    def test_agrees_with_bisection_across_grid(self):
        for s0 in np.arange(0.1, 1.0, 0.05):
            for r0 in np.arange(0.0, 5.01, 0.25):
                root = final_size(float(s0), float(r0))
                oracle = bisect_final_size(float(s0), float(r0))
                assert abs(root - oracle) < 1e-8, (s0, r0)

    def test_monotone_in_r0(self):
        for s0 in (0.2, 0.5, 0.9, 0.99):
            values = [final_size(s0, r0) for r0 in np.arange(0.0, 5.01, 0.25)]
            assert values[0] == 1.0 - s0
            assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))

    def test_residual_below_tolerance(self):
        for s0, r0 in ((0.3, 1.3), (0.85, 3.7), (0.99, 0.4)):
            r = final_size(s0, r0)
            assert abs(1 - r - s0 * math.exp(-r * r0)) < 1e-12

    def test_degenerate_s0_one_subcritical(self):
        assert final_size(1.0, 0.5) == 0.0
        assert final_size(1.0, 1.0) == 0.0

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            final_size(1.5, 1.0)
        with pytest.raises(ValueError):
            final_size(0.5, -0.1)


class TestSwayableRecoveredCount:
    def test_direct_substitution(self):
        assert swayable_recovered_count(100, 0.5, 0.1) == 40

    def test_no_spread_beyond_seeds(self):
        assert swayable_recovered_count(100, 0.1, 0.1) == 0

    def test_second_substitution(self):
        assert swayable_recovered_count(250, 0.36, 0.2) == 40

    def test_clamped_to_pool(self):
        # N=10 with I0=0.2 leaves 8 swayable users at most.
        assert swayable_recovered_count(10, 1.0, 0.2) == 8

    def test_tiny_negative_clamps_to_zero(self):
        assert swayable_recovered_count(100, 0.1 - 1e-12, 0.1) == 0

    def test_round_half_even(self):
        # 0.5 exactly between: banker's rounding keeps determinism unbiased.
        assert swayable_recovered_count(10, 0.35, 0.1) == round(2.5)


def make_setup(n_a=2, n_sw=5, f_a=(100, 400), f_sw=(10, 20, 30, 40, 900), cls="factual"):
    return CascadeSetup(
        window=TimeWindow(0, 30 * DAY),
        content_class=cls,
        v_a=tuple(f"a{i}" for i in range(n_a)),
        v_sw=tuple(f"s{i}" for i in range(n_sw)),
        f_a=np.array(f_a, dtype=np.int64),
        f_sw=np.array(f_sw, dtype=np.int64),
    )


class TestSimulateGrowthRate:
    def test_full_sample_deterministic(self):
        # All swayable users recovered: r_hat = delta * sum(f_sw) / sum(f_a).
        setup = make_setup(n_a=1, n_sw=4, f_a=(500,), f_sw=(100, 200, 300, 400))
        gen = rngmod.stream(0, "t")
        r_hat = simulate_growth_rate(setup, 50.0, 0.1, gen)  # huge R0 -> everyone
        assert r_hat == pytest.approx(0.1 * 1000 / 500) == pytest.approx(0.2)

    def test_zero_count_gives_zero(self):
        setup = make_setup()
        assert simulate_growth_rate(setup, 0.0, 0.5, rngmod.stream(0, "t")) == 0.0

    def test_linear_in_delta(self):
        setup = make_setup()
        a = simulate_growth_rate(setup, 2.0, 0.2, rngmod.stream(9, "x"))
        b = simulate_growth_rate(setup, 2.0, 0.4, rngmod.stream(9, "x"))
        assert b == pytest.approx(2 * a)

    def test_zero_aligned_mass_is_error(self):
        setup = make_setup(f_a=(0, 0))
        with pytest.raises(ValueError):
            simulate_growth_rate(setup, 1.0, 0.5, rngmod.stream(0, "t"))

    def test_expectation_matches_uniform_sampling(self):
        # E[r_hat] = delta * (m / n_sw) * sum(f_sw) / sum(f_a) for a fixed
        # recovered count m, by symmetry of sampling without replacement.
        setup = make_setup(n_a=1, n_sw=10, f_a=(1000,), f_sw=tuple(int(x) for x in np.geomspace(10, 5000, 10)))
        r0, delta = 2.0, 0.3
        r_inf = final_size(setup.s0, r0)
        m = swayable_recovered_count(setup.n, r_inf, setup.i0)
        assert 0 < m < 10
        draws = np.array(
            [simulate_growth_rate(setup, r0, delta, rngmod.stream(5, "mc", i)) for i in range(10_000)]
        )
        expected = delta * (m / 10) * setup.f_sw.sum() / setup.f_a.sum()
        se = draws.std(ddof=1) / math.sqrt(len(draws))
        assert abs(draws.mean() - expected) < 3 * se


class TestWindowLoss:
    def test_perfect_match(self):
        assert window_loss({"factual": 0.3}, {"factual": 0.3}) == 0.0

    def test_single_class(self):
        assert window_loss({"factual": 0.3}, {"factual": 0.1}) == pytest.approx(0.04)

    def test_two_classes(self):
        r_hat = {"factual": 0.2, "misleading": 0.4}
        r = {"factual": 0.1, "misleading": 0.2}
        assert window_loss(r_hat, r) == pytest.approx(0.01 + 0.04)

    def test_mismatched_classes_error(self):
        with pytest.raises(ValueError):
            window_loss({"factual": 0.1}, {"factual": 0.1, "misleading": 0.2})


class TestFollowerSnapshots:
    def test_most_recent_before_window(self):
        from swaynet.events import FollowerLog

        log = FollowerLog("u", ((10, 100), (20, 120), (30, 140)))
        snaps = FollowerSnapshots({"u": log})
        assert snaps.at("u", 25) == (120, False)
        assert follower_snapshot(log, 25) == (120, False)

    def test_fallback_to_earliest(self):
        from swaynet.events import FollowerLog

        log = FollowerLog("u", ((50, 77),))
        snaps = FollowerSnapshots({"u": log})
        assert snaps.at("u", 25) == (77, True)
        assert follower_snapshot(log, 25) == (77, True)

    def test_unknown_user(self):
        snaps = FollowerSnapshots({})
        assert snaps.at("ghost", 10) == (0, True)


class TestBuildCascadeSetup:
    def test_populations_and_snapshots(self):
        from swaynet.events import FollowerLog

        g = graph_of(("A", "s1", 2), ("s1", "s2", 1))
        logs = {
            "A": FollowerLog("A", ((0, 500), (10 * DAY, 600))),
            "s1": FollowerLog("s1", ((0, 50),)),
            "s2": FollowerLog("s2", ((40 * DAY, 70),)),  # only post-window: fallback
        }
        window = TimeWindow(30 * DAY, 60 * DAY)
        setup = build_cascade_setup(g, window, "factual", {"A"}, {"A"}, FollowerSnapshots(logs))
        assert setup.v_a == ("A",)
        assert set(setup.v_sw) == {"s1", "s2"}
        assert setup.sum_f_a == 600
        assert setup.fallback_users == ("s2",)
        assert setup.s0 == pytest.approx(2 / 3)
        assert setup.i0 == pytest.approx(1 / 3)
        assert setup.simulable


class TestNelderMead1d:
    def test_quadratic_minimum(self):
        x, fx, _ = nelder_mead_1d(lambda x: (x - 0.3) ** 2, (0.05, 0.9), (0.0, 1.0))
        assert x == pytest.approx(0.3, abs=1e-3)

    def test_respects_bounds(self):
        x, _, _ = nelder_mead_1d(lambda x: (x - 2.0) ** 2, (0.1, 0.5), (0.0, 1.0))
        assert x == pytest.approx(1.0, abs=1e-3)


# Sawtooth for planted-recovery tests. The top-of-grid tooth pins delta:
# once the cascade saturates the swayable pool a smaller delta cannot
# compensate via R0. Mid-range teeth sit where the final-size curve is
# steep, so their accepted R0 concentrates near the planted value.
PLANT_SAWTOOTH = (0.6, 1.15, 1.7, 2.25, 2.8, 5.0)


def planted_fit_problem(seed=77, n_windows=6, delta_star=0.08, n_a=20, n_sw=150):
    """Empirical rates produced by the generator itself with known R0*(t)."""
    gen = rngmod.stream(seed, "setup")
    r0_star = [PLANT_SAWTOOTH[w % len(PLANT_SAWTOOTH)] for w in range(n_windows)]
    setups = {}
    empirical = {}
    classes = ("factual", "misleading", "uncertain")
    for w in range(n_windows):
        start = w * 15 * DAY + 60 * DAY
        window = TimeWindow(start, start + 30 * DAY)
        per_class = {}
        rates = {}
        for ci, cls in enumerate(classes):
            f_a = gen.integers(100, 400, n_a)
            f_sw = gen.integers(100, 400, n_sw + 30 * ci)
            setup = CascadeSetup(
                window=window,
                content_class=cls,
                v_a=tuple(f"a{i}" for i in range(n_a)),
                v_sw=tuple(f"s{i}" for i in range(len(f_sw))),
                f_a=np.asarray(f_a, dtype=np.int64),
                f_sw=np.asarray(f_sw, dtype=np.int64),
            )
            per_class[cls] = setup
            rates[cls] = simulate_growth_rate(setup, r0_star[w], delta_star, rngmod.stream(seed, "emp", w, cls))
        setups[start] = per_class
        empirical[start] = rates
    return setups, empirical, r0_star, delta_star


class TestFitParameters:
    def test_default_grid_and_replication(self):
        config = FitConfig()
        grid = config.r0_grid()
        assert (grid[0], grid[-1]) == (0.0, 5.0)
        assert len(grid) == 101
        assert np.allclose(np.diff(grid), 0.05)
        assert config.runs_per_point == 100
        assert config.tolerance_pct == 0.10

    def test_acceptance_size_and_determinism(self):
        setups, empirical, _, _ = planted_fit_problem()
        config = FitConfig(runs_per_point=10, tolerance_pct=0.10, seed=3)
        result_a = fit_parameters(setups, empirical, config)
        result_b = fit_parameters(setups, empirical, config)
        n_pairs = len(config.r0_grid()) * config.runs_per_point
        for wf in result_a.windows:
            assert len(wf.accepted_r0) == math.ceil(0.10 * n_pairs)
        assert result_a.delta == result_b.delta
        for wa, wb in zip(result_a.windows, result_b.windows):
            assert np.array_equal(wa.accepted_r0, wb.accepted_r0)
            assert np.array_equal(wa.accepted_loss, wb.accepted_loss)

    def test_tolerance_one_accepts_everything(self):
        setups, empirical, _, _ = planted_fit_problem(n_windows=2)
        config = FitConfig(runs_per_point=5, tolerance_pct=1.0, seed=3)
        result = fit_parameters(setups, empirical, config)
        n_pairs = len(config.r0_grid()) * 5
        for wf in result.windows:
            assert len(wf.accepted_r0) == n_pairs
            # Objective contribution equals the unconditional mean loss.
            assert wf.accepted_loss.mean() == pytest.approx(np.mean(wf.accepted_loss))

    def test_window_order_permutation_invariant(self):
        setups, empirical, _, _ = planted_fit_problem()
        config = FitConfig(runs_per_point=8, seed=5)
        forward = fit_parameters(setups, empirical, config)
        reversed_setups = dict(reversed(list(setups.items())))
        reversed_emp = dict(reversed(list(empirical.items())))
        backward = fit_parameters(reversed_setups, reversed_emp, config)
        assert forward.delta == backward.delta
        a = {w.window_start: w for w in forward.windows}
        b = {w.window_start: w for w in backward.windows}
        assert set(a) == set(b)
        for k in a:
            assert np.array_equal(a[k].accepted_r0, b[k].accepted_r0)

    def test_recovers_planted_delta(self):
        setups, empirical, r0_star, delta_star = planted_fit_problem(n_windows=6)
        config = FitConfig(runs_per_point=30, tolerance_pct=0.10, seed=11)
        result = fit_parameters(setups, empirical, config)
        assert abs(result.delta - delta_star) / delta_star < 0.15
        starts = sorted(w.window_start for w in result.windows)
        by_start = {w.window_start: w for w in result.windows}
        hits = 0
        for w_idx, start in enumerate(starts):
            wf = by_start[start]
            if abs(wf.r0_mean - r0_star[w_idx]) <= 0.05 + 2 * wf.r0_std:
                hits += 1
        assert hits >= len(starts) - 1

    def test_unsimulable_windows_excluded_with_reason(self):
        setups, empirical, _, _ = planted_fit_problem(n_windows=3)
        bad_start = sorted(setups)[0]
        broken = dict(setups[bad_start])
        broken["factual"] = CascadeSetup(
            window=TimeWindow(bad_start, bad_start + 30 * DAY),
            content_class="factual",
            v_a=(),
            v_sw=("s0",),
            f_a=np.zeros(0, dtype=np.int64),
            f_sw=np.array([10], dtype=np.int64),
        )
        setups = dict(setups)
        setups[bad_start] = broken
        result = fit_parameters(setups, empirical, FitConfig(runs_per_point=5, seed=2))
        assert bad_start in result.excluded
        assert "factual" in result.excluded[bad_start]
        assert all(w.window_start != bad_start for w in result.windows)

    def test_all_windows_unsimulable_is_error(self):
        setups, empirical, _, _ = planted_fit_problem(n_windows=1)
        start = next(iter(setups))
        empirical = {start: {"factual": None, "misleading": None, "uncertain": None}}
        with pytest.raises(ValueError, match="no simulable window"):
            fit_parameters(setups, empirical, FitConfig(runs_per_point=5))

    def test_threads_do_not_change_result(self):
        setups, empirical, _, _ = planted_fit_problem(n_windows=3)
        config = FitConfig(runs_per_point=8, seed=4)
        one = fit_parameters(setups, empirical, config, threads=1)
        four = fit_parameters(setups, empirical, config, threads=4)
        assert one.delta == four.delta
        for wa, wb in zip(one.windows, four.windows):
            assert np.array_equal(wa.accepted_r0, wb.accepted_r0)


class TestEndToEndSetups:
    def test_build_from_events(self):
        events = []
        # Lookback month: aligned A retweeted by s1, s2; s1 passes to s3.
        events.append(ev(35 * DAY, "A", "s1"))
        events.append(ev(40 * DAY, "A", "s2"))
        events.append(ev(50 * DAY, "s1", "s3"))
        window = TimeWindow(60 * DAY, 90 * DAY)
        g = temporal_network(events, window, 1, "factual")
        v_a, v_sw = cascade_populations(g, {"A"}, {"A"})
        assert v_a == {"A"}
        assert v_sw == {"s1", "s2", "s3"}
