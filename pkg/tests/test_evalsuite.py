import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdhf.archive import Archive, Individual, MeasureBounds
from qdhf.evalsuite import (
    METRICS_COLUMNS,
    MetricsRow,
    aggregate_trials,
    coverage,
    export_heatmap,
    gt_view,
    qd_score,
    read_metrics_csv,
    spearman,
    write_metrics_csv,
)


def make_archive(shape=(4, 4)):
    return Archive(shape, MeasureBounds([(0.0, 1.0), (0.0, 1.0)]), measure_key="gt")


def individual(objective, gx, gy):
    return Individual(
        genome=np.zeros(1),
        objective=float(objective),
        features=np.zeros(2),
        gt_measures=np.array([gx, gy]),
    )


class TestScores:
    def test_empty_archive_scores_zero(self):
        archive = make_archive()
        assert qd_score(archive) == 0.0
        assert coverage(archive) == 0.0

    def test_full_archive_of_ones_scores_hundred(self):
        archive = make_archive()
        for i in range(4):
            for j in range(4):
                archive.insert_at((i, j), individual(1.0, 0, 0))
        assert qd_score(archive) == 100.0
        assert coverage(archive) == 100.0

    def test_partial_fill_hand_computed(self):
        archive = make_archive()
        archive.insert_at((0, 0), individual(0.5, 0, 0))
        archive.insert_at((1, 2), individual(0.25, 0, 0))
        archive.insert_at((3, 3), individual(1.0, 0, 0))
        # 100 * (0.5 + 0.25 + 1.0) / 16
        assert qd_score(archive) == pytest.approx(10.9375)
        assert coverage(archive) == pytest.approx(100.0 * 3 / 16)

    def test_improvement_replaces_not_adds(self):
        archive = make_archive()
        archive.insert_at((2, 2), individual(0.2, 0, 0))
        archive.insert_at((2, 2), individual(0.8, 0, 0))
        assert qd_score(archive) == pytest.approx(100.0 * 0.8 / 16)
        assert coverage(archive) == pytest.approx(100.0 / 16)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_qd_score_matches_direct_sum(self, seed):
        rng = np.random.default_rng(seed)
        archive = make_archive((6, 6))
        for _ in range(rng.integers(1, 60)):
            archive.insert(individual(rng.random(), rng.random(), rng.random()))
        direct = 100.0 * sum(i.objective for i in archive.individuals()) / 36
        assert qd_score(archive) == pytest.approx(direct, abs=1e-9)
        assert coverage(archive) == pytest.approx(100.0 * len(archive) / 36)


class TestGtView:
    def test_regrids_by_ground_truth(self):
        latent_bounds = MeasureBounds([(-1.0, 1.0), (-1.0, 1.0)])
        archive = Archive((4, 4), latent_bounds, measure_key="latent")
        a = individual(0.9, 0.05, 0.05)
        a.latent_measures = np.array([-0.9, -0.9])
        b = individual(0.4, 0.06, 0.06)
        b.latent_measures = np.array([0.9, 0.9])
        archive.insert(a)
        archive.insert(b)
        view = gt_view(archive, MeasureBounds([(0.0, 1.0), (0.0, 1.0)]), (4, 4))
        # distinct latent cells collapse into one gt cell; better one wins
        assert len(view) == 1
        assert view.individuals()[0].objective == 0.9

    def test_gt_keyed_archive_view_is_same_content(self):
        archive = make_archive()
        archive.insert(individual(0.7, 0.1, 0.9))
        archive.insert(individual(0.2, 0.9, 0.1))
        view = gt_view(archive, archive.bounds, archive.shape)
        assert qd_score(view) == qd_score(archive)
        assert coverage(view) == coverage(archive)


class TestMetricsCsv:
    def rows(self):
        return [
            MetricsRow(0, 1.25, 2.0, 3.5, 4.0, 0, None),
            MetricsRow(1, 1.0 / 3.0, 2.2, 3.7, 4.1, 250, 0.8156248221),
        ]

    def test_round_trip_is_exact(self, tmp_path):
        path = tmp_path / "metrics.csv"
        rows = self.rows()
        write_metrics_csv(rows, path)
        assert read_metrics_csv(path) == rows

    def test_header_and_blank_val_acc(self, tmp_path):
        path = tmp_path / "metrics.csv"
        write_metrics_csv(self.rows(), path)
        lines = path.read_text().splitlines()
        assert lines[0] == ",".join(METRICS_COLUMNS)
        assert lines[1].endswith(",0,")

    def test_rejects_foreign_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(ValueError):
            read_metrics_csv(path)


class TestAggregate:
    def test_frozen_two_trial_case(self):
        rows = [
            MetricsRow(9, 10.0, 10.0, 10.0, 10.0, 0),
            MetricsRow(9, 20.0, 20.0, 20.0, 20.0, 0),
        ]
        agg = aggregate_trials(rows)
        assert agg["qd_score_all"]["mean"] == 15.0
        assert agg["qd_score_all"]["std"] == 7.0710678118654755

    def test_permutation_invariant_exactly(self):
        rng = np.random.default_rng(0)
        rows = [
            MetricsRow(9, rng.random(), rng.random(), rng.random(), rng.random(), 0, rng.random())
            for _ in range(7)
        ]
        agg = aggregate_trials(rows)
        shuffled = aggregate_trials(rows[::-1])
        assert agg == shuffled

    def test_val_acc_only_over_present_values(self):
        rows = [
            MetricsRow(9, 1.0, 1.0, 1.0, 1.0, 0, 0.5),
            MetricsRow(9, 2.0, 2.0, 2.0, 2.0, 0, None),
            MetricsRow(9, 3.0, 3.0, 3.0, 3.0, 0, 0.7),
        ]
        agg = aggregate_trials(rows)
        assert agg["val_acc"]["mean"] == pytest.approx(0.6)

    def test_no_val_acc_key_when_absent(self):
        rows = [MetricsRow(9, 1.0, 1.0, 1.0, 1.0, 0), MetricsRow(9, 2.0, 2.0, 2.0, 2.0, 0)]
        assert "val_acc" not in aggregate_trials(rows)

    def test_needs_two_trials(self):
        with pytest.raises(ValueError):
            aggregate_trials([MetricsRow(9, 1.0, 1.0, 1.0, 1.0, 0)])


class TestHeatmapExport:
    def test_csv_places_objectives_by_cell(self, tmp_path):
        archive = make_archive()
        archive.insert_at((0, 0), individual(0.5, 0, 0))
        archive.insert_at((2, 3), individual(0.125, 0, 0))
        csv_path, svg_path = export_heatmap(archive, tmp_path, basename="grid")
        lines = csv_path.read_text().splitlines()
        assert len(lines) == 4
        cells = [line.split(",") for line in lines]
        assert cells[0][0] == "0.5"
        assert cells[2][3] == "0.125"
        assert cells[1][1] == ""
        assert svg_path.read_text().lstrip().startswith("<?xml")


class TestSpearman:
    def test_hand_computed_case(self):
        # ranks (1,2,3,4) vs (1,3,2,4): rho = 1 - 6*2/(4*15)
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)

    def test_perfect_and_inverse(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [30, 20, 10]) == pytest.approx(-1.0)

    def test_monotone_transform_invariance(self):
        x = [0.1, 2.0, 3.5, 9.0]
        assert spearman(x, [np.exp(v) for v in x]) == pytest.approx(1.0)

    def test_ties_use_average_ranks(self):
        # y has a tie: ranks (1, 2.5, 2.5, 4)
        got = spearman([1, 2, 3, 4], [5, 7, 7, 9])
        ra = np.array([1, 2, 3, 4], dtype=float)
        rb = np.array([1, 2.5, 2.5, 4])
        expected = np.corrcoef(ra, rb)[0, 1]
        assert got == pytest.approx(expected)

    def test_constant_input_rejected(self):
        with pytest.raises(ValueError):
            spearman([1, 2, 3], [5, 5, 5])

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            spearman([1, 2], [1, 2, 3])
