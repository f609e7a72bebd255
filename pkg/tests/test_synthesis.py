import numpy as np
import pytest

import game_oracle as oracle
from conftest import COARSE_EPS
from symctl import (
    Box,
    Controller,
    GameGraph,
    InvalidInputError,
    RefinementError,
    SpecMonitor,
    SynthesisFailure,
    cosine_disturbance,
    pendulum_spec,
    simulate_closed_loop,
    solve_safety,
    synthesize,
    verify_closed_loop,
)
from symctl.synthesis import FAIL, check_closure, synthesize_game, verify_tree_walk
from symctl.system import constant_disturbance

NONE, IN1, IN2 = 0, 1, 2


def modes(spec, labels):
    return ["FAIL" if m == FAIL else spec.describe(m) for m in spec.run(labels)]


# -- monitor -------------------------------------------------------------------

def test_step_counts():
    spec = pendulum_spec(1.0)
    assert (spec.Lmin1, spec.Lmax1, spec.Lmax2) == (2, 4, 3)
    assert len(spec.states()) == 1 + 4 + 1 + 3 + 2
    half = pendulum_spec(0.5)
    assert (half.Lmin1, half.Lmax1, half.Lmax2) == (4, 8, 6)


def test_monitor_accepting_run():
    spec = pendulum_spec(1.0)
    run = modes(spec, [NONE, IN1, IN1, NONE, IN2, NONE, IN1, IN1])
    assert run == ["M0", "M1[1]", "M1[2]", "M2", "M3[1]", "M4", "M5", "M5"]
    # leaving straight into the second region skips the transit mode
    assert modes(spec, [IN1, IN1, IN2, IN1]) == ["M1[1]", "M1[2]", "M3[1]", "M5"]


@pytest.mark.parametrize(
    "labels",
    [
        [IN1, NONE],  # dwell too short
        [IN1, IN1, IN1, IN1, IN1],  # dwell too long
        [IN1, IN1, IN2, IN2, IN2, IN2],  # second dwell too long
        [IN1, IN1, IN2, IN1, NONE],  # leaves the final region
    ],
)
def test_monitor_failures(labels):
    assert modes(pendulum_spec(1.0), labels)[-1] == "FAIL"


def test_monitor_validation_and_round_trip():
    with pytest.raises(InvalidInputError):
        pendulum_spec(1.0, dwell1=(2.2, 2.8))
    with pytest.raises(InvalidInputError):
        pendulum_spec(1.0, dwell2_max=0.5)
    spec = pendulum_spec(1.0)
    back = SpecMonitor.from_dict(spec.to_dict())
    assert back.hash() == spec.hash()
    assert np.array_equal(back.table(), spec.table())


# -- small games -----------------------------------------------------------------

def _cut_instance():
    # 0: outside, 1: first region, 2: outside, 3: second region (unreachable)
    trans = [(0, a, 0, 1) for a in range(2)]
    trans += [(1, 0, 0, 1), (1, 1, 0, 2), (2, 0, 0, 2), (2, 1, 0, 0), (3, 0, 0, 3), (3, 1, 0, 3)]
    return GameGraph.from_transitions(4, 2, 1, trans), np.array([NONE, IN1, NONE, IN2])


def test_unreachable_second_region_reports_transit_mode():
    g, labels = _cut_instance()
    with pytest.raises(SynthesisFailure) as info:
        synthesize_game(g, pendulum_spec(1.0), labels, 0)
    assert info.value.mode == "M2"
    assert not info.value.result.winning_initial


def test_reachable_instance_succeeds():
    g, labels = _cut_instance()
    trans = [(q, a, 0, int(s)) for q in range(4) for a in range(2) for s in g.successors(q, a, 0)]
    # reroute 2 -> 3 and give the second region a deterministic exit back to 1
    trans = [t for t in trans if t[:2] not in ((2, 1), (3, 1))] + [(2, 1, 0, 3), (3, 1, 0, 1)]
    g2 = GameGraph.from_transitions(4, 2, 1, trans)
    res = synthesize_game(g2, pendulum_spec(1.0), labels, 0)
    assert verify_closed_loop(g2, res, horizon=12).ok
    assert verify_tree_walk(g2, res, horizon=12)[0]


def test_trivial_regions_reduce_to_safety(tiny_model):
    X = tiny_model.sys.state_box
    spec = SpecMonitor(X, X, 1.0, dwell1=(0.0, None), dwell2_max=None, x0=(0.0, 0.0))
    g = tiny_model.to_game()
    res = synthesize(tiny_model, spec, graph=g)
    safe = solve_safety(g, np.ones(g.Q, dtype=bool)).winning
    init = [spec.initial(int(l)) for l in res.labels]
    ctrl = res.controller.table
    assert np.array_equal(ctrl[np.arange(g.Q), init] >= 0, safe)


def _random_product(rng):
    g, _ = oracle.random_game(rng, Q=int(rng.integers(3, 8)), empty=0.0, density=0.4)
    labels = rng.integers(0, 4, size=g.Q)
    spec = SpecMonitor(Box.from_bounds([[0, 1]]), Box.from_bounds([[2, 3]]), 1.0, dwell1=(1.0, 2.0), dwell2_max=2.0)
    return g, labels, spec


def test_tree_walk_agrees_with_layered_search():
    rng = np.random.default_rng(8)
    seen = {True: 0, False: 0}
    for _ in range(300):
        g, labels, spec = _random_product(rng)
        q0 = int(rng.integers(g.Q))
        try:
            res = synthesize_game(g, spec, labels, q0)
        except SynthesisFailure as err:
            res = err.result
        # perturb the controller sometimes so that both verdicts occur
        if rng.random() < 0.5:
            table = res.controller.table.copy()
            q, m = rng.integers(g.Q), rng.integers(table.shape[1])
            table[q, m] = rng.integers(-1, g.A)
            res.controller = Controller(table, res.controller.spec_hash)
        for h in (1, 3, 5):
            bfs = verify_closed_loop(g, res, horizon=h).ok
            walk = verify_tree_walk(g, res, horizon=h)[0]
            assert bfs == walk
            seen[bfs] += 1
    assert seen[True] > 50 and seen[False] > 50


# -- pendulum ------------------------------------------------------------------

def test_coarse_pendulum_synthesis(coarse_model, coarse_graph, coarse_result):
    res = coarse_result
    assert res.winning_initial
    assert res.q0 == coarse_model.states.nearest_index([0.0, 0.0])
    rep = verify_closed_loop(coarse_graph, res, horizon=8)
    assert rep.ok, rep.failure
    assert check_closure(coarse_graph, res) == 0
    ok, leaves = verify_tree_walk(coarse_graph, res, horizon=2)
    assert ok and leaves > 0


def test_controller_round_trip(coarse_result, tmp_path):
    c = coarse_result.controller
    back = Controller.from_bytes(c.to_bytes())
    assert np.array_equal(back.table, c.table)
    assert back.spec_hash == c.spec_hash
    path = tmp_path / "ctrl.bin"
    c.save(path)
    assert Controller.load(path).digest() == c.digest()


def test_simulation_stays_close(coarse_model, coarse_result, contraction, pendulum):
    spec = pendulum_spec(1.0)
    tr = simulate_closed_loop(coarse_model, coarse_result, contraction, cosine_disturbance(pendulum), [0.0, 0.0], 20, spec)
    assert tr.satisfied and tr.reached_final
    assert np.all(tr.distance <= COARSE_EPS)
    assert np.all(tr.V <= contraction.alpha_lo(COARSE_EPS) + 1e-9)
    with pytest.raises(RefinementError):
        simulate_closed_loop(coarse_model, coarse_result, contraction, cosine_disturbance(pendulum), [0.3, 0.2], 5, spec)


def test_stay_at_origin(tiny_model, contraction):
    cell = Box.from_bounds([[-0.04, 0.04], [-0.04, 0.04]])
    spec = SpecMonitor(cell, cell, 1.0, dwell1=(0.0, None), dwell2_max=None, x0=(0.0, 0.0))
    res = synthesize(tiny_model, spec)
    tr = simulate_closed_loop(tiny_model, res, contraction, constant_disturbance([0.0]), [0.0, 0.0], 6, spec)
    assert np.all(tr.symbolic_keys == 0)
    assert np.all(tr.concrete == 0.0)
    assert tr.satisfied
