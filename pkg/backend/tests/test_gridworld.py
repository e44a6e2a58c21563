import io

import numpy as np
import pytest

from core.exceptions import ConfigurationError, DatasetError, SamplingError, ShapeError
from gridworld.container import (
    HEADER,
    MAGIC,
    Dataset,
    EpisodeRecord,
    LabeledSample,
    MapRecord,
    encode_record,
    is_test_index,
    read_records,
    write_manifest,
    write_records,
)
from gridworld.generators import (
    FILL_TOLERANCE,
    TETROMINO_SHAPES,
    generate_complex_map,
    generate_map,
    generate_simple_map,
    pair_qualifies,
    sample_goal_chain,
    sample_start_goal,
)
from gridworld.types import Action, CellPos, EpisodeConfig, MapFamily, MoveFailure, OccupancyGrid
from gridworld.world import apply_action, comm_graph, neighbors_of, observe
from expert.bfs import shortest_path_length


def test_action_deltas_follow_compass_order() -> None:
    """N decreases the row index and actions go clockwise."""
    assert Action.N.delta == (0, -1)
    assert Action.E.delta == (1, 0)
    assert Action.SW.delta == (-1, 1)
    assert [a.is_diagonal for a in Action] == [False, True] * 4


def test_grid_rejects_bad_inputs() -> None:
    with pytest.raises(ShapeError):
        OccupancyGrid(np.zeros(16))
    with pytest.raises(ConfigurationError):
        OccupancyGrid.empty(3, 8)
    with pytest.raises(ConfigurationError):
        OccupancyGrid(np.full((4, 4), 2))


def test_grid_is_immutable(open_grid: OccupancyGrid) -> None:
    with pytest.raises(ValueError):
        open_grid.cells[0, 0] = 1


def test_from_rows_and_connectivity(wall_grid: OccupancyGrid) -> None:
    assert wall_grid.shape == (6, 6)
    assert not wall_grid.is_free(CellPos(2, 0))
    assert wall_grid.connected(CellPos(0, 0), CellPos(5, 0))
    assert wall_grid.largest_component_share() == 1.0

    split = OccupancyGrid.from_rows(["..#..", "..#..", "..#..", "..#.."])
    assert not split.connected(CellPos(0, 0), CellPos(4, 0))
    assert split.largest_component_share() == pytest.approx(0.5)


def test_apply_action_outcomes(wall_grid: OccupancyGrid) -> None:
    assert apply_action(wall_grid, CellPos(0, 0), Action.N) is MoveFailure.OFF_GRID
    assert apply_action(wall_grid, CellPos(1, 0), Action.E) is MoveFailure.INTO_OBSTACLE
    assert apply_action(wall_grid, CellPos(1, 1), Action.SE) is MoveFailure.INTO_OBSTACLE
    assert apply_action(wall_grid, CellPos(1, 4), Action.NE) is MoveFailure.INTO_OBSTACLE
    assert apply_action(wall_grid, CellPos(1, 3), Action.SE) == CellPos(2, 4)


def test_corner_cutting_switch() -> None:
    grid = OccupancyGrid.from_rows(["....", ".#..", "....", "...."])
    assert apply_action(grid, CellPos(0, 1), Action.NE) == CellPos(1, 0)
    assert apply_action(grid, CellPos(0, 1), Action.NE, corner_cutting=False) is MoveFailure.INTO_OBSTACLE
    assert apply_action(grid, CellPos(2, 0), Action.SE, corner_cutting=False) == CellPos(3, 1)


def test_observe_reports_only_the_window(wall_grid: OccupancyGrid) -> None:
    observation = observe(wall_grid, CellPos(0, 0), half_width=1)
    assert observation.grid.shape == wall_grid.shape
    assert observation.grid.sum() == 0

    observation = observe(wall_grid, CellPos(3, 1), half_width=1)
    rows, cols = observation.window_bounds()
    assert (rows.start, rows.stop, cols.start, cols.stop) == (0, 3, 2, 5)
    assert observation.grid[:, 2].tolist() == [1, 1, 1, 0, 0, 0]


def test_observe_full_window_equals_map(wall_grid: OccupancyGrid) -> None:
    observation = observe(wall_grid, CellPos(2, 4), half_width=6)
    assert np.array_equal(observation.grid, wall_grid.cells)


def test_observe_noise(wall_grid: OccupancyGrid, rng: np.random.Generator) -> None:
    with pytest.raises(ConfigurationError):
        observe(wall_grid, CellPos(0, 0), 1, noise=0.1)
    flipped = observe(wall_grid, CellPos(3, 1), 1, noise=1.0, rng=rng)
    assert flipped.grid[0:3, 2:5].tolist() == (1 - wall_grid.cells[0:3, 2:5]).tolist()
    assert flipped.grid[3:, :].sum() == 0


def test_observe_half_width_zero_sees_own_cell(open_grid: OccupancyGrid) -> None:
    observation = observe(open_grid, CellPos(2, 2), 0)
    rows, cols = observation.window_bounds()
    assert (rows.stop - rows.start, cols.stop - cols.start) == (1, 1)


def test_comm_graph_uses_manhattan_distance() -> None:
    positions = [CellPos(0, 0), CellPos(2, 2), CellPos(5, 0)]
    assert comm_graph(positions, 4) == frozenset({(0, 1)})
    assert comm_graph(positions, 5) == frozenset({(0, 1), (0, 2), (1, 2)})
    assert comm_graph(positions, 0) == frozenset()
    assert neighbors_of(comm_graph(positions, 5), 1) == [0, 2]


def test_colocated_robots_always_connected() -> None:
    assert comm_graph([CellPos(1, 1), CellPos(1, 1)], 0) == frozenset({(0, 1)})


def test_episode_config_validation(wall_grid: OccupancyGrid) -> None:
    cfg = EpisodeConfig(wall_grid, ((0, 0),), (((5, 0),),))
    assert cfg.starts == (CellPos(0, 0),)
    with pytest.raises(ConfigurationError):
        EpisodeConfig(wall_grid, ((2, 0),), (((5, 0),),))
    with pytest.raises(ConfigurationError):
        EpisodeConfig(wall_grid, ((0, 0), (1, 1)), (((5, 0),),))
    with pytest.raises(ConfigurationError):
        EpisodeConfig(wall_grid, ((0, 0),), (((5, 0),),), noise=1.5)


def test_tetromino_shapes_are_unique_four_cell_pieces() -> None:
    assert len(TETROMINO_SHAPES) == 19
    assert all(shape.shape == (4, 2) for shape in TETROMINO_SHAPES)


def test_simple_map_fill_within_tolerance() -> None:
    grid = generate_simple_map(16, 16, 0.2, np.random.default_rng(3))
    assert abs(grid.occupied_fraction() - 0.2) <= FILL_TOLERANCE
    assert grid.largest_component_share() >= 0.5


def test_complex_map_is_connected_with_target_fill() -> None:
    grid = generate_complex_map(16, 16, 0.35, np.random.default_rng(5))
    assert abs(grid.occupied_fraction() - 0.35) <= FILL_TOLERANCE
    assert grid.largest_component_share() == 1.0


def test_generation_is_deterministic() -> None:
    first = generate_map(MapFamily.COMPLEX, 16, 16, rng=np.random.default_rng(11))
    second = generate_map(MapFamily.COMPLEX, 16, 16, rng=np.random.default_rng(11))
    assert first.equals(second)


def test_generation_preconditions() -> None:
    with pytest.raises(ConfigurationError):
        generate_simple_map(16, 16, 0.0, np.random.default_rng(0))
    with pytest.raises(ConfigurationError):
        generate_complex_map(4, 4, 0.35, np.random.default_rng(0))


def test_pair_constraint_per_family() -> None:
    assert pair_qualifies(MapFamily.SIMPLE, 4, 3)
    assert not pair_qualifies(MapFamily.SIMPLE, 7, 3)
    assert not pair_qualifies(MapFamily.SIMPLE, 6, 3)
    assert not pair_qualifies(MapFamily.SIMPLE, 3, 2)
    assert pair_qualifies(MapFamily.COMPLEX, 6, 3)
    assert not pair_qualifies(MapFamily.COMPLEX, 5, 3)
    assert not pair_qualifies(MapFamily.SIMPLE, 1, 1)


def test_open_grid_pairs_qualify_for_simple() -> None:
    grid = OccupancyGrid.empty(8, 8)
    start = CellPos(1, 1)
    for goal in (CellPos(3, 1), CellPos(4, 5), CellPos(7, 7)):
        length = shortest_path_length(grid, start, goal)
        assert length == max(abs(goal.x - start.x), abs(goal.y - start.y))
        assert pair_qualifies(MapFamily.SIMPLE, length, start.manhattan(goal))


def test_u_trap_qualifies_for_complex_only() -> None:
    grid = OccupancyGrid.from_rows(
        [
            "..........",
            "..........",
            "..#....#..",
            "..#....#..",
            "..#....#..",
            "..#....#..",
            "..######..",
            "..........",
            "..........",
            "..........",
        ]
    )
    start, goal = CellPos(4, 5), CellPos(4, 8)
    length = shortest_path_length(grid, start, goal)
    assert length == 12
    assert length >= 2 * start.manhattan(goal)
    assert pair_qualifies(MapFamily.COMPLEX, length, start.manhattan(goal))
    assert not pair_qualifies(MapFamily.SIMPLE, length, start.manhattan(goal))


@pytest.mark.parametrize("seed", range(20))
def test_sampled_simple_pairs_stay_under_one_and_a_half_distance(seed: int) -> None:
    rng = np.random.default_rng(seed)
    grid = generate_map(MapFamily.SIMPLE, 12, 12, rng=rng)
    for _ in range(5):
        start, goal = sample_start_goal(grid, MapFamily.SIMPLE, rng)
        length = shortest_path_length(grid, start, goal)
        distance = abs(start.x - goal.x) + abs(start.y - goal.y)
        assert length is not None
        assert distance >= 2
        assert 2 * length < 3 * distance, (start, goal, length, distance)


def test_sampling_fails_on_tiny_open_space() -> None:
    grid = OccupancyGrid.from_rows(["####", "#..#", "####", "####"])
    with pytest.raises(SamplingError):
        sample_start_goal(grid, MapFamily.SIMPLE, np.random.default_rng(0), max_attempts=5)


def test_goal_chain_legs_qualify() -> None:
    rng = np.random.default_rng(21)
    grid = generate_map(MapFamily.SIMPLE, 12, 12, rng=rng)
    start, goals = sample_goal_chain(grid, MapFamily.SIMPLE, 3, rng)
    assert len(goals) == 3
    previous = start
    for goal in goals:
        length = shortest_path_length(grid, previous, goal)
        assert length is not None
        assert 2 * length < 3 * previous.manhattan(goal)
        previous = goal


def test_record_header_layout(wall_grid: OccupancyGrid) -> None:
    payload = encode_record(MapRecord(wall_grid))
    magic, version, width, height, kind = HEADER.unpack(payload[:16])
    assert (magic, version, width, height, kind) == (MAGIC, 1, 6, 6, 1)
    assert len(payload) == 16 + 5


def test_records_decode(wall_grid: OccupancyGrid) -> None:
    episode = EpisodeRecord(wall_grid, (CellPos(0, 0), CellPos(1, 5)), ((CellPos(5, 0),), (CellPos(4, 4),)))
    sample = LabeledSample(wall_grid, CellPos(0, 0), CellPos(5, 0), 0b00011000)
    stream = io.BytesIO(encode_record(episode) + encode_record(sample))
    decoded = list(read_records(stream))
    assert decoded[0].grid.equals(wall_grid)
    assert decoded[0].goal_lists == episode.goal_lists
    assert decoded[1].action_mask == 0b00011000
    assert decoded[1].canonical_action == 3


def test_bad_magic_and_truncation(wall_grid: OccupancyGrid) -> None:
    payload = encode_record(MapRecord(wall_grid))
    with pytest.raises(DatasetError):
        list(read_records(io.BytesIO(b"XXXX" + payload[4:])))
    with pytest.raises(DatasetError):
        list(read_records(io.BytesIO(payload[:-1])))
    with pytest.raises(DatasetError):
        list(read_records(io.BytesIO(payload[:10])))


def test_split_is_five_to_one() -> None:
    test_indices = [i for i in range(12) if is_test_index(i)]
    assert test_indices == [5, 11]


def test_dataset_load_splits_labels_by_map(tmp_path, wall_grid: OccupancyGrid) -> None:
    episodes = [EpisodeRecord(wall_grid, (CellPos(0, 0),), ((CellPos(5, 0),),)) for _ in range(6)]
    labels = [LabeledSample(wall_grid, CellPos(0, i % 6), CellPos(5, 0), 1) for i in range(12)]
    write_records(tmp_path / "episodes.bin", episodes)
    write_records(tmp_path / "labels.bin", labels)
    write_manifest(tmp_path, {"labels_per_map": 2})
    dataset = Dataset.load(tmp_path)
    assert len(dataset.episode_split(test=True)) == 1
    assert len(dataset.label_split(test=True)) == 2
    assert len(dataset.label_split(test=False)) == 10


def test_dataset_load_missing_manifest(tmp_path) -> None:
    with pytest.raises(DatasetError):
        Dataset.load(tmp_path)
