import numpy as np
import pytest

from core.exceptions import ConfigurationError, DomainError, InvalidGoalError
from expert.bfs import (
    action_mask,
    actions_from_mask,
    bfs_field,
    canonical_action,
    expert_path,
    optimal_actions,
    shortest_path_length,
)
from expert.checks import (
    check_bfs_against_enumeration,
    check_bfs_against_floyd_warshall,
    check_optimal_action_definition,
    check_value_iteration_policy,
    enumerate_shortest_length,
)
from expert.labels import episode_labels, generate_labeled_samples, label_state
from expert.value_iteration import reference_value_iteration
from gridworld.container import EpisodeRecord
from gridworld.types import Action, CellPos, MapFamily, OccupancyGrid


def test_bfs_distances_on_open_grid(open_grid: OccupancyGrid) -> None:
    field = bfs_field(open_grid, CellPos(3, 1))
    assert field.at(CellPos(3, 1)) == 0
    assert field.at(CellPos(0, 0)) == 3
    assert field.at(CellPos(5, 5)) == 4


def test_bfs_goes_around_the_wall(wall_grid: OccupancyGrid) -> None:
    assert shortest_path_length(wall_grid, CellPos(0, 0), CellPos(5, 0)) == 8
    assert enumerate_shortest_length(wall_grid, CellPos(0, 0), CellPos(5, 0)) == 8


def test_unreachable_and_blocked_goals(wall_grid: OccupancyGrid) -> None:
    boxed = OccupancyGrid.from_rows(["....", ".###", ".#..", ".#.."])
    assert shortest_path_length(boxed, CellPos(0, 0), CellPos(3, 3)) is None
    with pytest.raises(DomainError):
        optimal_actions(bfs_field(boxed, CellPos(3, 3)), CellPos(0, 0))
    with pytest.raises(InvalidGoalError):
        bfs_field(wall_grid, CellPos(2, 0))


def test_optimal_actions_include_ties(open_grid: OccupancyGrid) -> None:
    field = bfs_field(open_grid, CellPos(3, 1))
    assert optimal_actions(field, CellPos(0, 0)) == frozenset({Action.E, Action.SE})
    assert canonical_action(field, CellPos(0, 0)) is Action.E


def test_no_optimal_action_at_goal(open_grid: OccupancyGrid) -> None:
    field = bfs_field(open_grid, CellPos(3, 1))
    with pytest.raises(DomainError):
        optimal_actions(field, CellPos(3, 1))


def test_action_mask_round_trip() -> None:
    actions = frozenset({Action.NE, Action.W})
    assert action_mask(actions) == 0b01000010
    assert actions_from_mask(0b01000010) == actions


def test_expert_path_reaches_goal(wall_grid: OccupancyGrid) -> None:
    field = bfs_field(wall_grid, CellPos(5, 0))
    path = expert_path(field, CellPos(0, 0))
    assert path[0] == CellPos(0, 0)
    assert path[-1] == CellPos(5, 0)
    assert len(path) == field.at(CellPos(0, 0)) + 1


def test_value_iteration_greedy_is_optimal(wall_grid: OccupancyGrid) -> None:
    goal = CellPos(5, 0)
    field = bfs_field(wall_grid, goal)
    value_map = reference_value_iteration(wall_grid, goal, n_sweeps=36)
    greedy = value_map.greedy_actions()
    for pos in wall_grid.free_cells():
        if pos == goal:
            continue
        assert Action(int(greedy[pos.y, pos.x])) in optimal_actions(field, pos)


def test_value_iteration_values_decay_with_distance(open_grid: OccupancyGrid) -> None:
    value_map = reference_value_iteration(open_grid, CellPos(0, 0), n_sweeps=12)
    assert value_map.values[0, 0] > value_map.values[0, 1] > value_map.values[0, 2]
    assert value_map.residuals[-1] <= value_map.residuals[0]


def test_value_iteration_rejects_bad_parameters(wall_grid: OccupancyGrid) -> None:
    with pytest.raises(InvalidGoalError):
        reference_value_iteration(wall_grid, CellPos(2, 1))
    with pytest.raises(ConfigurationError):
        reference_value_iteration(wall_grid, CellPos(0, 0), discount=1.0)
    with pytest.raises(ConfigurationError):
        reference_value_iteration(wall_grid, CellPos(0, 0), n_sweeps=0)


def test_oracle_checks_pass_on_small_grids() -> None:
    assert check_bfs_against_enumeration(1, seed=3, size=4).passed
    assert check_bfs_against_floyd_warshall(2, seed=3).passed
    assert check_optimal_action_definition(1, seed=3).passed


@pytest.mark.slow
def test_value_iteration_policy_check() -> None:
    assert check_value_iteration_policy(1, seed=3).passed


def test_label_state_mask(open_grid: OccupancyGrid) -> None:
    sample = label_state(open_grid, CellPos(0, 0), CellPos(3, 1))
    assert actions_from_mask(sample.action_mask) == frozenset({Action.E, Action.SE})
    assert sample.canonical_action == Action.E


def test_episode_labels_has_exact_count(wall_grid: OccupancyGrid, rng: np.random.Generator) -> None:
    record = EpisodeRecord(wall_grid, (CellPos(0, 0),), ((CellPos(5, 0),),))
    few = episode_labels(record, 3, rng)
    many = episode_labels(record, 20, rng)
    assert len(few) == 3
    assert len(many) == 20
    for sample in many:
        field = bfs_field(wall_grid, sample.goal)
        assert actions_from_mask(sample.action_mask) == optimal_actions(field, sample.pos)


def test_generate_labeled_samples() -> None:
    samples = generate_labeled_samples(MapFamily.SIMPLE, 8, 8, 7, np.random.default_rng(2), per_map=4)
    assert len(samples) == 7
    assert all(sample.action_mask != 0 for sample in samples)
