import numpy as np
import pytest
from PIL import Image

from core.exceptions import ConfigurationError, ShapeError
from core.imaging import (
    FALSE_NEGATIVE,
    FALSE_POSITIVE,
    belief_error_image,
    belief_image,
    confidence_image,
    grid_image,
    save_pnm,
    write_matrix_csv,
)
from gridworld.types import MapFamily, OccupancyGrid
from memory.exact import ExactMemory
from planner.network import ValueIterationNetwork
from simulation.staging import belief_accuracy, encounter_study, staged_encounter


def test_images_are_x_by_y() -> None:
    cells = np.zeros((3, 5), dtype=np.uint8)
    cells[2, 4] = 1
    image = grid_image(cells)
    assert image.size == (5, 3)
    assert image.getpixel((4, 2)) == 0
    assert image.getpixel((0, 0)) == 255


def test_belief_image_shades_probability() -> None:
    image = belief_image(np.array([[0.0, 0.5, 1.0]]))
    assert [image.getpixel((x, 0)) for x in range(3)] == [255, 128, 0]


def test_belief_error_colours(wall_grid: OccupancyGrid) -> None:
    truth = wall_grid.cells
    assert np.array_equal(np.asarray(belief_error_image(truth, truth).convert("L")), np.asarray(grid_image(truth)))

    belief = truth.astype(np.float64)
    belief[0, 0] = 1.0
    belief[0, 2] = 0.0
    image = belief_error_image(belief, truth)
    assert image.mode == "RGB"
    assert image.getpixel((0, 0)) == FALSE_POSITIVE
    assert image.getpixel((2, 0)) == FALSE_NEGATIVE
    assert image.getpixel((1, 0)) == (255, 255, 255)
    with pytest.raises(ShapeError):
        belief_error_image(np.zeros((5, 6)), truth)


def test_confidence_image_range() -> None:
    image = confidence_image(np.array([[0.125, 1.0, 0.0]]))
    assert [image.getpixel((x, 0)) for x in range(3)] == [0, 255, 0]


def test_save_pnm_picks_suffix_and_scales(tmp_path, wall_grid: OccupancyGrid) -> None:
    gray = save_pnm(grid_image(wall_grid.cells), tmp_path / "maps" / "truth.png", scale=4)
    assert gray.suffix == ".pgm"
    assert gray.read_bytes().startswith(b"P5")
    with Image.open(gray) as loaded:
        assert loaded.size == (24, 24)

    colour = save_pnm(belief_error_image(wall_grid.cells, wall_grid.cells), tmp_path / "error")
    assert colour.suffix == ".ppm"
    assert colour.read_bytes().startswith(b"P6")


def test_write_matrix_csv(tmp_path) -> None:
    path = write_matrix_csv(tmp_path / "out" / "values.csv", np.array([[0.5, 1.0], [0.25, 2.0]]))
    assert path.read_text() == "0.5,1\n0.25,2\n"


def test_belief_accuracy(wall_grid: OccupancyGrid) -> None:
    assert belief_accuracy(wall_grid.cells.astype(np.float64), wall_grid) == 1.0
    assert belief_accuracy(np.zeros((6, 6)), wall_grid) == pytest.approx(32 / 36)


def test_staged_encounter_with_exact_memory(wall_grid: OccupancyGrid, rng: np.random.Generator) -> None:
    encounter = staged_encounter(ExactMemory(6, 6), wall_grid, rng, half_width=1, views=2)
    assert len(encounter.receiver_cells) == 2
    assert all(pos.x < 3 for pos in encounter.receiver_cells)
    assert all(pos.x >= 3 for pos in encounter.sender_cells)
    assert encounter.goal == encounter.sender_cells[0]
    assert encounter.confidence is None
    assert np.array_equal(encounter.after, np.maximum(encounter.before, encounter.sender_belief))
    assert encounter.accuracy_after >= encounter.accuracy_before


def test_staged_encounter_renders_confidence(wall_grid: OccupancyGrid, rng: np.random.Generator) -> None:
    vin = ValueIterationNetwork.handset(12)
    encounter = staged_encounter(ExactMemory(6, 6), wall_grid, rng, half_width=2, views=3, vin=vin)
    assert encounter.confidence is not None
    assert encounter.confidence.shape == (6, 6)


def test_staged_encounter_needs_both_halves(rng: np.random.Generator) -> None:
    cells = np.zeros((4, 4), dtype=np.uint8)
    cells[:, 2:] = 1
    with pytest.raises(ConfigurationError):
        staged_encounter(ExactMemory(4, 4), OccupancyGrid(cells), rng)


def test_encounter_study_never_loses_accuracy_with_exact_memory() -> None:
    summary = encounter_study(ExactMemory(8, 8), MapFamily.SIMPLE, encounters=3, seed=1, half_width=1, views=2)
    assert summary.encounters == 3
    assert summary.gain >= 0.0
    assert 0.0 <= summary.mean_before <= summary.mean_after <= 1.0
    with pytest.raises(ConfigurationError):
        encounter_study(ExactMemory(8, 8), MapFamily.SIMPLE, encounters=0)


def test_encounter_goal_is_free(wall_grid: OccupancyGrid) -> None:
    encounter = staged_encounter(ExactMemory(6, 6), wall_grid, np.random.default_rng(0), half_width=1, views=1)
    assert wall_grid.is_free(encounter.goal)
