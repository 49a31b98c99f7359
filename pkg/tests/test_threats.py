import logging
import math

import numpy as np
import pytest
from pydantic import ValidationError

from advmc.attack import synthesize_attack
from advmc.models.chain import PerturbationMatrix, apply_perturbation, validate_dtmc
from advmc.models.threat import ThreatKind, ThreatModel
from advmc.services.properties import parse_property
from advmc.services.threats import (
    STRUCTURE_NOTICE,
    build_idtmc,
    feasible,
    free_variables,
    project_row,
    random_feasible_point,
)
from advmc.utils.errors import EmptyThreat, ProjectionFailed, ThreatError


def spss(states, epsilon=0.1):
    return ThreatModel(kind=ThreatKind.SPSS, epsilon=epsilon, vulnerable_states=tuple(states))


def ss(states, epsilon=0.1):
    return ThreatModel(kind=ThreatKind.SS, epsilon=epsilon, vulnerable_states=tuple(states))


def test_threat_model_needs_matching_vulnerable_set():
    with pytest.raises(ValidationError):
        ThreatModel(kind=ThreatKind.SS, epsilon=0.1, vulnerable_transitions=((0, 1),))
    with pytest.raises(ValidationError):
        ThreatModel(kind=ThreatKind.ST, epsilon=0.1, vulnerable_states=(0,))
    with pytest.raises(ValidationError):
        ThreatModel(kind=ThreatKind.SS, epsilon=1.5, vulnerable_states=(0,))


def test_spss_variables_and_bounds(four_state):
    variables = free_variables(four_state, spss([1]))
    assert [v.transition for v in variables] == [(1, 0), (1, 1), (1, 3)]
    bounds = [(v.lower, v.upper) for v in variables]
    assert bounds == [pytest.approx((0.0, 0.2)), pytest.approx((0.0, 0.2)), pytest.approx((0.7, 0.9))]


def test_ss_adds_zero_base_transition(four_state):
    variables = free_variables(four_state, ss([1]))
    assert [v.transition for v in variables] == [(1, 0), (1, 1), (1, 2), (1, 3)]
    added = variables[2]
    assert (added.base, added.lower, added.upper) == (0.0, 0.0, pytest.approx(0.1))


def test_single_successor_row_is_frozen_under_spss(grid):
    variables = free_variables(grid, spss([5]))
    assert len(variables) == 1
    assert variables[0].frozen
    assert not variables[0].active


def test_single_successor_row_is_free_under_ss(grid):
    variables = free_variables(grid, ss([5]))
    assert len(variables) == grid.n
    assert all(v.active for v in variables)


def test_empty_threat_warns_or_raises(grid, caplog):
    with caplog.at_level(logging.WARNING):
        assert not any(v.active for v in free_variables(grid, spss([5])))
    assert "EmptyThreat" in caplog.text
    with pytest.raises(EmptyThreat):
        free_variables(grid, spss([5]), strict=True)


def test_out_of_range_vulnerable_state(four_state):
    with pytest.raises(ThreatError):
        free_variables(four_state, spss([9]))


def test_feasibility_of_printed_perturbations(four_state):
    spss_attack = PerturbationMatrix.from_dict({(1, 3): -0.1, (1, 0): 0.1})
    ss_attack = PerturbationMatrix.from_dict({(1, 3): -0.1, (1, 0): 0.1, (1, 1): -0.1, (1, 2): 0.1})
    assert feasible(four_state, spss([1]), spss_attack)
    assert not feasible(four_state, spss([1]), ss_attack)
    assert feasible(four_state, ss([1]), ss_attack)
    # budget exceeded
    assert not feasible(four_state, spss([1], 0.05), spss_attack)
    # row sum broken
    assert not feasible(four_state, spss([1]), PerturbationMatrix.from_dict({(1, 0): 0.1}))


def test_spst_and_st_feasibility(four_state):
    spst = ThreatModel(kind=ThreatKind.SPST, epsilon=0.1,
                       vulnerable_transitions=((0, 1), (0, 2), (1, 0), (1, 1)))
    x = PerturbationMatrix.from_dict({(0, 2): 0.1, (0, 1): -0.1, (1, 0): 0.1, (1, 1): -0.1})
    assert feasible(four_state, spst, x)
    st = ThreatModel(kind=ThreatKind.ST, epsilon=0.1,
                     vulnerable_transitions=((0, 1), (0, 2), (1, 1), (1, 2)))
    y = PerturbationMatrix.from_dict({(0, 2): 0.1, (0, 1): -0.1, (1, 1): -0.1, (1, 2): 0.1})
    assert feasible(four_state, st, y)
    assert not feasible(four_state, spst, y)


def test_idtmc_for_ss_state(four_state):
    export = build_idtmc(four_state, ss([1]))
    np.testing.assert_allclose(export.lower[1], [0.0, 0.0, 0.0, 0.7])
    np.testing.assert_allclose(export.upper[1], [0.2, 0.2, 0.1, 0.9])
    assert export.lower[0] == export.upper[0] == [0.0, 0.6, 0.4, 0.0]
    assert export.notice is None


def test_idtmc_clips_at_zero_and_one(four_state):
    st = ThreatModel(kind=ThreatKind.ST, epsilon=0.5, vulnerable_transitions=((0, 1), (0, 2)))
    export = build_idtmc(four_state, st)
    np.testing.assert_allclose(export.lower[0][1:3], [0.1, 0.0], atol=1e-12)
    np.testing.assert_allclose(export.upper[0][1:3], [1.0, 0.9], atol=1e-12)


def test_idtmc_notice_for_structure_preserving(four_state):
    assert build_idtmc(four_state, spss([1])).notice == STRUCTURE_NOTICE


def test_project_row_lands_on_constraint_set():
    y = project_row([0.5, 0.5, 0.5], [0.0, 0.0, 0.7], [0.2, 0.2, 0.9], 1.0)
    assert math.isclose(math.fsum(y), 1.0, abs_tol=1e-12)
    assert np.all(y >= [0.0, 0.0, 0.7]) and np.all(y <= [0.2, 0.2, 0.9])


def test_project_row_keeps_feasible_points():
    y = project_row([0.15, 0.05, 0.8], [0.0, 0.0, 0.7], [0.2, 0.2, 0.9], 1.0)
    np.testing.assert_allclose(y, [0.15, 0.05, 0.8], atol=1e-10)


def test_project_row_infeasible_box():
    with pytest.raises(ProjectionFailed):
        project_row([0.1, 0.1], [0.0, 0.0], [0.2, 0.2], 1.0)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_random_feasible_point_is_feasible(grid, seed):
    tm = ss([1, 3, 7], 0.3)
    x = random_feasible_point(grid, tm, seed)
    assert feasible(grid, tm, x)
    validate_dtmc(apply_perturbation(grid, x))


def row_transitions(model, states):
    return tuple((s, t) for s in states for t, _ in model.rows[s])


@pytest.mark.parametrize("seed", range(20))
def test_threat_models_nest(grid, seed):
    states = (1, 3, 7)
    transitions = row_transitions(grid, states)
    every_target = tuple((s, t) for s in states for t in range(grid.n))
    st_all = ThreatModel(kind=ThreatKind.ST, epsilon=0.2, vulnerable_transitions=every_target)
    st = ThreatModel(kind=ThreatKind.ST, epsilon=0.2, vulnerable_transitions=transitions)
    spst = ThreatModel(kind=ThreatKind.SPST, epsilon=0.2, vulnerable_transitions=transitions)

    x = random_feasible_point(grid, spss(states, 0.2), seed)
    assert feasible(grid, ss(states, 0.2), x)
    x = random_feasible_point(grid, spst, seed)
    assert feasible(grid, st, x)
    x = random_feasible_point(grid, ss(states, 0.2), seed)
    assert feasible(grid, st_all, x)


def sample_from_intervals(model, export, rng):
    """Uniform draw inside the interval bounds, projected back onto each row's total"""
    base = model.dense()
    lower = np.asarray(export.lower)
    upper = np.asarray(export.upper)
    deltas = {}
    for s in range(model.n):
        gap = upper[s] > lower[s]
        if not gap.any():
            continue
        row = project_row(rng.uniform(lower[s], upper[s]), lower[s], upper[s], math.fsum(base[s]))
        for t in np.flatnonzero(gap):
            deltas[(s, int(t))] = float(row[t] - base[s, t])
    return PerturbationMatrix.from_dict(deltas)


@pytest.mark.parametrize("tm", [
    ss([1, 2]),
    ThreatModel(kind=ThreatKind.ST, epsilon=0.1, vulnerable_transitions=((0, 1), (0, 2), (1, 0), (1, 3))),
], ids=["SS", "ST"])
def test_interval_samples_are_feasible(four_state, tm):
    export = build_idtmc(four_state, tm)
    rng = np.random.default_rng(7)
    for _ in range(1000):
        x = sample_from_intervals(four_state, export, rng)
        assert feasible(four_state, tm, x)


@pytest.mark.parametrize("tm", [
    ss([1]),
    spss([1, 2]),
    ThreatModel(kind=ThreatKind.ST, epsilon=0.1, vulnerable_transitions=((0, 1), (0, 2), (1, 0), (1, 3))),
], ids=["SS", "SPSS", "ST"])
def test_attack_stays_inside_the_intervals(four_state, tm):
    result = synthesize_attack(four_state, tm, parse_property("P=? [ s!=2 U<=10 s=3 ]"))
    export = build_idtmc(four_state, tm)
    attacked = apply_perturbation(four_state, result.x_star).dense()
    assert np.all(attacked >= np.asarray(export.lower) - 1e-12)
    assert np.all(attacked <= np.asarray(export.upper) + 1e-12)
