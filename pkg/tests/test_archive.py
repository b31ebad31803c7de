import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdhf.archive import (
    Archive,
    Individual,
    InsertionOutcome,
    MeasureBounds,
    cell_index,
    cell_indices,
)

UNIT_BOUNDS = MeasureBounds([[-1.0, 1.0], [-1.0, 1.0]])


def make_ind(measures, objective, uid=0):
    m = np.asarray(measures, dtype=float)
    return Individual(
        genome=np.zeros(2),
        objective=float(objective),
        features=np.zeros(2),
        gt_measures=m,
        uid=uid,
    )


class TestCellIndex:
    def test_center_maps_to_center_cell(self):
        assert cell_index([0.0, 0.0], UNIT_BOUNDS, (50, 50)) == (25, 25)

    def test_out_of_range_clamps(self):
        assert cell_index([2.0, 0.5], UNIT_BOUNDS, (50, 50)) == (49, 37)
        assert cell_index([-5.0, -5.0], UNIT_BOUNDS, (50, 50)) == (0, 0)

    def test_upper_bound_lands_in_last_cell(self):
        assert cell_index([1.0, 1.0], UNIT_BOUNDS, (50, 50)) == (49, 49)

    def test_lower_bound_lands_in_first_cell(self):
        assert cell_index([-1.0, -1.0], UNIT_BOUNDS, (50, 50)) == (0, 0)

    def test_interior_edge_is_exact(self):
        # 0.04-wide cells: the edge at -1 + 25*0.04 = 0.0 belongs to cell 25
        bounds = MeasureBounds([[-1.0, 1.0]])
        assert cell_index([0.0], bounds, (50,)) == (25,)
        assert cell_index([-1e-16], bounds, (50,)) == (24,)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            cell_index([np.nan, 0.0], UNIT_BOUNDS, (50, 50))
        with pytest.raises(ValueError):
            cell_index([np.inf, 0.0], UNIT_BOUNDS, (50, 50))

    def test_rejects_dimension_mismatch(self):
        with pytest.raises(ValueError):
            cell_index([0.0], UNIT_BOUNDS, (50, 50))
        with pytest.raises(ValueError):
            cell_index([0.0, 0.0, 0.0], UNIT_BOUNDS, (50, 50))

    @given(
        st.lists(
            st.tuples(
                st.floats(-1, 1, allow_nan=False), st.floats(-1, 1, allow_nan=False)
            ),
            min_size=1,
            max_size=40,
        )
    )
    def test_vector_path_matches_scalar_path(self, points):
        matrix = np.asarray(points, dtype=float)
        batch = cell_indices(matrix, UNIT_BOUNDS, (50, 50))
        for row, point in zip(batch, points):
            assert tuple(int(i) for i in row) == cell_index(point, UNIT_BOUNDS, (50, 50))

    @given(st.floats(-10, 10, allow_nan=False), st.floats(-10, 10, allow_nan=False))
    def test_index_always_inside_grid(self, x, y):
        idx = cell_index([x, y], UNIT_BOUNDS, (50, 50))
        assert all(0 <= i < 50 for i in idx)


class TestMeasureBounds:
    def test_rejects_inverted_interval(self):
        with pytest.raises(ValueError):
            MeasureBounds([[1.0, -1.0]])
        with pytest.raises(ValueError):
            MeasureBounds([[0.0, 0.0]])

    def test_from_samples_expands_five_percent(self):
        samples = np.array([[0.0, 10.0], [1.0, 20.0]])
        b = MeasureBounds.from_samples(samples, expand=0.05)
        assert b.low == pytest.approx([-0.05, 9.5])
        assert b.high == pytest.approx([1.05, 20.5])

    def test_from_samples_degenerate_dimension_stays_valid(self):
        b = MeasureBounds.from_samples(np.array([[3.0], [3.0], [3.0]]))
        assert b.low[0] < 3.0 < b.high[0]

    def test_equality_and_round_trip(self):
        b = MeasureBounds([[0.0, 1.0], [-2.0, 2.0]])
        assert MeasureBounds(b.to_pairs()) == b


class TestArchiveInsert:
    def test_new_cell_then_improve_then_reject(self):
        archive = Archive((10, 10), UNIT_BOUNDS)
        assert archive.insert(make_ind([0.0, 0.0], 0.5)) is InsertionOutcome.NEW_CELL
        assert archive.insert(make_ind([0.01, 0.01], 0.7)) is InsertionOutcome.IMPROVED
        assert archive.insert(make_ind([0.01, 0.01], 0.6)) is InsertionOutcome.REJECTED
        assert len(archive) == 1
        assert archive.best().objective == 0.7

    def test_tie_keeps_incumbent(self):
        archive = Archive((10, 10), UNIT_BOUNDS)
        first = make_ind([0.0, 0.0], 0.5, uid=1)
        challenger = make_ind([0.0, 0.0], 0.5, uid=2)
        archive.insert(first)
        assert archive.insert(challenger) is InsertionOutcome.REJECTED
        assert archive.individuals()[0].uid == 1

    def test_measure_key_selects_descriptor(self):
        archive = Archive((10, 10), UNIT_BOUNDS, measure_key="latent")
        ind = make_ind([0.9, 0.9], 1.0)
        with pytest.raises(ValueError):
            archive.insert(ind)
        ind.latent_measures = np.array([-0.9, -0.9])
        archive.insert(ind)
        assert cell_index([-0.9, -0.9], UNIT_BOUNDS, (10, 10)) in archive.cells

    def test_objective_grid_tracks_cells(self):
        archive = Archive((4, 4), UNIT_BOUNDS)
        archive.insert(make_ind([0.9, 0.9], 0.25))
        idx = cell_index([0.9, 0.9], UNIT_BOUNDS, (4, 4))
        assert archive.objective_grid[idx] == 0.25
        assert np.isneginf(archive.objective_grid).sum() == 15

    @settings(max_examples=60)
    @given(
        st.lists(
            st.tuples(
                st.floats(-1, 1, allow_nan=False),
                st.floats(-1, 1, allow_nan=False),
                st.floats(0, 1, allow_nan=False),
            ),
            min_size=1,
            max_size=120,
        )
    )
    def test_elitism_each_cell_holds_running_max(self, entries):
        archive = Archive((6, 6), UNIT_BOUNDS)
        best = {}
        for uid, (x, y, obj) in enumerate(entries):
            archive.insert(make_ind([x, y], obj, uid=uid))
            idx = cell_index([x, y], UNIT_BOUNDS, (6, 6))
            best[idx] = max(best.get(idx, -np.inf), obj)
        assert len(archive) == len(best)
        for idx, ind in archive.cells.items():
            assert ind.objective == best[idx]
            assert archive.objective_grid[idx] == best[idx]
