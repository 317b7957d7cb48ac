import math

import numpy as np
import pytest

from oracles import brute_matching_value

from matchcert.errors import ParameterError, ParseError
from matchcert.pwa_grid import PiecewiseAffineG, huang_reference, sample_closed_form
from matchcert.ranking_sim import (MatchInstance, all_matchings, brute_force_optimum, dual_coverage_check,
                                   erdos_renyi, estimate_ratio, offline_optimum, read_instance, run_ranking,
                                   star, trial_rng, upper_triangular, write_instance)

HUANG = PiecewiseAffineG(sample_closed_form(huang_reference, 50))


def constant(c):
    return lambda x, y: np.full(np.broadcast(np.asarray(x), np.asarray(y)).shape, c)


def assert_valid_run(inst, run):
    us = [u for u, _ in run.matching]
    vs = [v for _, v in run.matching]
    assert len(set(us)) == len(us) and len(set(vs)) == len(vs)
    assert all((u, v) in set(inst.edges) for u, v in run.matching)
    assert abs(run.dual_total - run.matched_weight) <= 1e-12
    assert run.alpha_online.min(initial=0) >= 0 and run.alpha_offline.min(initial=0) >= 0
    matched_u, matched_v = set(us), set(vs)
    assert all(run.alpha_online[u] == 0 for u in range(inst.num_online) if u not in matched_u)
    assert all(run.alpha_offline[v] == 0 for v in range(inst.num_offline) if v not in matched_v)


# ----------------------------------------------------------------- instance


def test_instance_validation():
    with pytest.raises(ParameterError):
        MatchInstance(1, [-1.0], ((0, 0),))
    with pytest.raises(ParameterError):
        MatchInstance(1, [1.0], ((0, 0), (0, 0)))
    with pytest.raises(ParameterError):
        MatchInstance(1, [1.0], ((0, 1),))


def test_instance_text_round_trip(tmp_path, rng):
    inst = erdos_renyi(5, 4, 0.5, rng)
    path = tmp_path / "inst.txt"
    write_instance(inst, path)
    back = read_instance(path)
    assert back.num_online == 5 and np.array_equal(back.weights, inst.weights) and back.edges == inst.edges
    assert path.read_text().splitlines()[0] == "5 4"


@pytest.mark.parametrize("text", ["", "2\n1 1\n", "1 2\n1.0\n0 0\n", "1 1\n1\n0\n", "1 1\nx\n"])
def test_instance_parse_errors(text):
    with pytest.raises(ParseError):
        MatchInstance.from_text(text)


def test_instance_without_offline_vertices():
    inst = MatchInstance.from_text("3 0\n")
    assert inst.num_offline == 0 and inst.edges == ()


# ---------------------------------------------------------------- algorithm


@pytest.mark.parametrize("seed", range(5))
def test_single_edge(seed):
    inst = MatchInstance(1, [1.0], ((0, 0),))
    run = run_ranking(inst, HUANG, seed)
    assert run.matching == ((0, 0),)
    assert run.alpha_online[0] + run.alpha_offline[0] == pytest.approx(1.0, abs=1e-15)


def test_heavier_neighbor_wins_for_constant_g():
    inst = MatchInstance(1, [10.0, 1.0], ((0, 0), (0, 1)))
    run = run_ranking(inst, constant(0.5), 0)
    assert run.matching == ((0, 0),)
    assert run.alpha_online[0] == 5.0 and run.alpha_offline[0] == 5.0


def test_empty_edge_set():
    inst = MatchInstance(3, [1.0, 2.0], ())
    run = run_ranking(inst, HUANG, 4)
    assert run.matching == () and run.matched_weight == 0.0
    assert not run.alpha_online.any() and not run.alpha_offline.any()


def test_ties_go_to_smallest_offline_id():
    inst = MatchInstance(1, [1.0, 1.0, 1.0], ((0, 2), (0, 1), (0, 0)))
    run = run_ranking(inst, constant(0.3), 0, y_offline=[0.5, 0.5, 0.5], y_online=[0.2])
    assert run.matching == ((0, 0),)


def test_arrival_ties_go_to_smallest_online_id():
    inst = MatchInstance(2, [1.0], ((0, 0), (1, 0)))
    run = run_ranking(inst, HUANG, y_offline=[0.5], y_online=[0.3, 0.3])
    assert run.order == (0, 1) and run.matching == ((0, 0),)


def test_arrival_order_follows_draws():
    inst = upper_triangular(4)
    run = run_ranking(inst, HUANG, 11)
    ys = run.y_online[list(run.order)]
    assert np.all(np.diff(ys) >= 0)


@pytest.mark.parametrize("seed", range(20))
def test_runs_are_valid_matchings_with_exact_duals(seed):
    inst = erdos_renyi(12, 10, 0.3, trial_rng(seed, 0, 0))
    assert_valid_run(inst, run_ranking(inst, HUANG, seed))


def test_single_online_vertex_takes_best_score(rng):
    for t in range(50):
        inst = star(6, rng)
        run = run_ranking(inst, HUANG, 3, t)
        v = run.matching[0][1]
        scores = inst.weights * (1 - HUANG(run.y_offline, np.full(6, run.y_online[0])))
        assert scores[v] == scores.max()


def test_permuting_online_ids_keeps_matched_weight(rng):
    for t in range(20):
        inst = erdos_renyi(8, 8, 0.4, rng)
        run = run_ranking(inst, HUANG, 0, t)
        perm = rng.permutation(8)  # online vertex u becomes perm[u]
        moved = MatchInstance(8, inst.weights, tuple((int(perm[u]), v) for u, v in inst.edges))
        y_u = np.empty(8)
        y_u[perm] = run.y_online
        again = run_ranking(moved, HUANG, y_offline=run.y_offline, y_online=y_u)
        assert again.matched_weight == run.matched_weight


def test_runs_are_reproducible():
    inst = upper_triangular(10)
    a, b = run_ranking(inst, HUANG, 5, 7), run_ranking(inst, HUANG, 5, 7)
    assert a.matching == b.matching and np.array_equal(a.y_online, b.y_online)


# ---------------------------------------------------------- offline optimum


def test_optimum_examples():
    assert offline_optimum(MatchInstance(1, [3.0, 5.0], ((0, 0),))) == 3.0
    assert offline_optimum(MatchInstance(2, [5.0, 3.0], ((0, 0), (0, 1), (1, 0), (1, 1)))) == 8.0
    assert offline_optimum(MatchInstance(2, [1.0], ())) == 0.0


def test_hungarian_equals_brute_force_on_100_seeds():
    for seed in range(100):
        inst = erdos_renyi(6, 6, 0.5, np.random.default_rng(seed))
        opt = offline_optimum(inst)
        assert opt == pytest.approx(brute_force_optimum(inst), abs=1e-12)
        assert opt == pytest.approx(brute_matching_value(inst.num_online, inst.weights, inst.edges), abs=1e-12)


def test_brute_force_size_limit():
    with pytest.raises(ParameterError):
        brute_force_optimum(upper_triangular(11))


def test_all_matchings_counts():
    inst = MatchInstance(2, [1.0, 1.0], ((0, 0), (0, 1), (1, 0), (1, 1)))
    assert len(list(all_matchings(inst))) == 7  # empty, 4 singles, 2 perfect


# ----------------------------------------------------------------- families


def test_upper_triangular_shape():
    inst = upper_triangular(4)
    assert len(inst.edges) == 10 and offline_optimum(inst) == 4.0


def test_star_shapes(rng):
    online = star(5, rng)
    assert online.num_online == 1 and online.num_offline == 5
    offline = star(5, rng, center="offline")
    assert offline.num_online == 5 and offline.num_offline == 1
    with pytest.raises(ParameterError):
        star(3, rng, center="middle")


def test_erdos_renyi_rejects_bad_probability(rng):
    with pytest.raises(ParameterError):
        erdos_renyi(3, 3, 1.5, rng)


# --------------------------------------------------------------- estimation


def test_single_edge_ratio_is_one():
    est = estimate_ratio(MatchInstance(1, [1.0], ((0, 0),)), HUANG, 50, seed=2)
    assert est.mean_ratio == 1.0 and est.stderr == 0.0 and est.min_ratio == 1.0
    assert est.seed == 2 and est.max_dual_gap <= 1e-12


def test_zero_optimum_trials_are_skipped():
    est = estimate_ratio(MatchInstance(2, [1.0], ()), HUANG, 5)
    assert est.skipped == 5 and math.isnan(est.mean_ratio)


def test_estimate_independent_of_workers():
    make = lambda rng: erdos_renyi(10, 10, 0.3, rng)  # noqa: E731
    a = estimate_ratio(make, HUANG, 200, seed=9, workers=1)
    b = estimate_ratio(make, HUANG, 200, seed=9, workers=4)
    assert a == b


def test_upper_triangular_ratio_with_huang():
    est = estimate_ratio(upper_triangular(20), HUANG, 2000, seed=1)
    assert est.mean_ratio >= 0.65 - 3 * est.stderr
    assert est.max_dual_gap <= 1e-12


def test_estimate_rejects_zero_trials():
    with pytest.raises(ParameterError):
        estimate_ratio(upper_triangular(3), HUANG, 0)


# ------------------------------------------------------------ dual coverage


def test_dual_coverage_single_edge():
    report = dual_coverage_check(MatchInstance(1, [2.0], ((0, 0),)), HUANG, 20, 1.0)
    assert np.allclose(report.means, 1.0, atol=1e-15) and report.passed


def test_dual_coverage_two_online_one_offline():
    """Each edge gets w (first arrival) or w/2 (second): expectation 3/4 for g = 1/2."""
    inst = MatchInstance(2, [1.0], ((0, 0), (1, 0)))
    report = dual_coverage_check(inst, constant(0.5), 4000, 0.75, seed=5)
    for mean, se in zip(report.means, report.stderrs):
        assert abs(mean - 0.75) <= 3 * se
    assert dual_coverage_check(inst, constant(0.5), 4000, 0.9, seed=5).flagged == inst.edges


def test_dual_coverage_validation():
    inst = MatchInstance(1, [1.0], ((0, 0),))
    with pytest.raises(ParameterError):
        dual_coverage_check(inst, HUANG, 10, 1.5)
    with pytest.raises(ParameterError):
        dual_coverage_check(inst, HUANG, 1, 0.5)
