import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdhf.tasks import ArmTask, MazeTask, load_maze_file, make_task


def fk_oracle(angles, lengths):
    """Forward kinematics via chained 2D homogeneous transforms (independent
    of the task's cumulative-sum formulation)."""
    T = np.eye(3)
    for theta, l in zip(angles, lengths):
        c, s = math.cos(theta), math.sin(theta)
        T = T @ np.array([[c, -s, l * c], [s, c, l * s], [0.0, 0.0, 1.0]])
    return np.array([T[0, 2], T[1, 2]])


class TestArm:
    def setup_method(self):
        self.task = ArmTask()

    def test_straight_arm(self):
        ev = self.task.evaluate(np.zeros(10))
        assert ev.objective == 1.0
        assert ev.gt_measures == pytest.approx([1.0, 0.0], abs=1e-15)

    def test_alternating_extremes_have_zero_objective(self):
        genome = np.array([math.pi, -math.pi] * 5)
        ev = self.task.evaluate(genome)
        assert ev.objective == pytest.approx(0.0, abs=1e-12)

    def test_uniform_tenth_turn_matches_transform_oracle(self):
        genome = np.full(10, math.pi / 10)
        expected = np.array([-0.10000000000000002, 0.6313751514675043])
        assert fk_oracle(genome, self.task.link_lengths) == pytest.approx(expected, abs=1e-13)
        assert self.task.evaluate(genome).gt_measures == pytest.approx(expected, abs=1e-12)

    def test_mixed_genome_matches_transform_oracle(self):
        genome = np.array([0.3, -1.2, 2.0, 0.7, -0.4, 1.1, -2.5, 0.05, 0.9, -1.6])
        expected = np.array([0.4548681159889974, 0.32193784303899164])
        assert fk_oracle(genome, self.task.link_lengths) == pytest.approx(expected, abs=1e-13)
        ev = self.task.evaluate(genome)
        assert ev.gt_measures == pytest.approx(expected, abs=1e-12)
        assert ev.objective == pytest.approx(0.8280554183293617, abs=1e-12)

    def test_two_link_custom_lengths(self):
        task = ArmTask(num_joints=2, link_lengths=[0.7, 0.3])
        ev = task.evaluate(np.array([math.pi / 2, -math.pi / 2]))
        assert ev.gt_measures == pytest.approx([0.3, 0.7], abs=1e-15)
        joints = task.joint_positions(np.array([math.pi / 2, -math.pi / 2]))
        assert joints == pytest.approx(np.array([[0, 0], [0, 0.7], [0.3, 0.7]]), abs=1e-15)

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_endpoint_is_linear_in_features(self, seed):
        rng = np.random.default_rng(seed)
        genomes = rng.uniform(-math.pi, math.pi, size=(16, 10))
        _, feats, gt = self.task.evaluate_batch(genomes)
        lengths = self.task.link_lengths
        lin = np.zeros((2, 20))
        lin[0, 10:] = lengths
        lin[1, :10] = lengths
        assert np.max(np.abs(feats @ lin.T - gt)) < 1e-12

    @settings(max_examples=50)
    @given(st.integers(0, 2**32 - 1))
    def test_objective_and_measures_in_range(self, seed):
        rng = np.random.default_rng(seed)
        genomes = rng.uniform(-4, 4, size=(16, 10))
        obj, feats, gt = self.task.evaluate_batch(genomes)
        assert np.all((obj >= 0) & (obj <= 1))
        assert np.all(np.abs(gt) <= 1 + 1e-12)
        assert np.all(np.abs(feats) <= 1 + 1e-12)

    def test_clips_out_of_domain_angles(self):
        wild = np.full(10, 100.0)
        clipped = np.full(10, math.pi)
        assert self.task.evaluate(wild).gt_measures == pytest.approx(
            self.task.evaluate(clipped).gt_measures
        )

    def test_render_payload_chains_joints(self):
        payload = self.task.render_payload(np.zeros(10))
        assert payload["kind"] == "arm"
        assert len(payload["points"]) == 11
        assert payload["points"][-1] == pytest.approx([1.0, 0.0])


def segments_properly_cross(p, q, a, b):
    """Strict crossing test (shared endpoints or touching do not count)."""
    def orient(u, v, w):
        return (v[0] - u[0]) * (w[1] - u[1]) - (v[1] - u[1]) * (w[0] - u[0])

    d1, d2 = orient(a, b, p), orient(a, b, q)
    d3, d4 = orient(p, q, a), orient(p, q, b)
    return ((d1 > 0) != (d2 > 0) and d1 != 0 and d2 != 0) and (
        (d3 > 0) != (d4 > 0) and d3 != 0 and d4 != 0
    )


class TestMaze:
    def setup_method(self):
        self.task = MazeTask()

    def test_zero_genome_never_moves(self):
        ev = self.task.evaluate(np.zeros(self.task.genome_dim))
        assert ev.objective == 1.0
        assert ev.gt_measures == pytest.approx([0.15, 0.15])
        traj = ev.features.reshape(250, 2)
        assert np.all(traj == [0.15, 0.15])

    def test_full_throttle_straight_line(self):
        # equal positive wheel speeds: no turn, +x steps of tanh-bounded speed
        genome = np.zeros(self.task.genome_dim)
        genome[-2:] = 1.0  # output biases only
        traj = self.task.rollout(genome[None, :])[0][0]
        speed = math.tanh(1.0) * self.task.speed
        expected_x = 0.15 + speed * np.arange(1, 251)
        moving = expected_x < 1.0 - 1e-9
        assert traj[moving, 0] == pytest.approx(expected_x[moving], abs=1e-12)
        assert np.all(traj[:, 1] == pytest.approx(0.15, abs=1e-12))

    def test_wall_blocks_motion(self):
        # driving straight at the right boundary: x never exceeds it
        genome = np.zeros(self.task.genome_dim)
        genome[-2:] = 1.0
        traj = self.task.rollout(genome[None, :])[0][0]
        assert traj[:, 0].max() <= 1.0

    def test_laser_distances_at_known_pose(self):
        # vertical wall 0.1 ahead of a rightward-facing robot with 0.2 range
        task = MazeTask(interior_walls=np.array([[0.6, 0.0, 0.6, 1.0]]))
        readings = task.sensor_readings((0.5, 0.5, 0.0))
        assert readings[1] == pytest.approx(0.5)  # forward laser: 0.1 / 0.2
        diag = 0.1 / math.cos(math.pi / 4) / task.laser_range
        assert readings[0] == pytest.approx(diag)
        assert readings[2] == pytest.approx(diag)
        assert readings[3] == -1.0 and readings[4] == -1.0

    def test_laser_saturates_at_range(self):
        # facing left from the center: every wall is beyond the 0.2 range
        readings = self.task.sensor_readings((0.5, 0.5, math.pi))
        assert readings[0] == 1.0 and readings[1] == 1.0 and readings[2] == 1.0

    def test_contact_sensor_flags_adjacent_wall(self):
        # right whisker (-90 deg of a rightward robot) almost touching the
        # bottom boundary; the left one points at open space
        readings = self.task.sensor_readings((0.5, 0.005, 0.0))
        assert readings[4] == 1.0
        assert readings[3] == -1.0

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_trajectories_stay_inside_and_never_cross_walls(self, seed):
        rng = np.random.default_rng(seed)
        genomes = rng.uniform(-1, 1, size=(8, self.task.genome_dim))
        _, feats, gt = self.task.evaluate_batch(genomes)
        trajs = feats.reshape(len(genomes), 250, 2)
        assert np.all((trajs >= 0) & (trajs <= 1))
        for traj in trajs:
            pts = np.vstack([[0.15, 0.15], traj])
            for k in range(len(pts) - 1):
                p, q = pts[k], pts[k + 1]
                if np.array_equal(p, q):
                    continue
                for wall in self.task.walls:
                    assert not segments_properly_cross(p, q, wall[:2], wall[2:])

    def test_objective_decreases_with_effort(self):
        quiet = np.zeros(self.task.genome_dim)
        busy = np.zeros(self.task.genome_dim)
        busy[-2:] = (1.0, -1.0)  # spin in place at full effort
        obj_quiet, _, _ = self.task.evaluate_batch(quiet[None, :])
        obj_busy, _, _ = self.task.evaluate_batch(busy[None, :])
        assert obj_quiet[0] == 1.0
        assert obj_busy[0] < obj_quiet[0]
        assert 0.0 <= obj_busy[0] <= 1.0

    def test_spin_in_place_stays_put(self):
        genome = np.zeros(self.task.genome_dim)
        genome[-2:] = (1.0, -1.0)
        _, feats, gt = self.task.evaluate_batch(genome[None, :])
        assert gt[0] == pytest.approx([0.15, 0.15], abs=1e-12)

    def test_genome_dimension(self):
        # 5 inputs -> 8 hidden -> 2 outputs, all weights and biases
        assert self.task.genome_dim == 8 * 5 + 8 + 2 * 8 + 2 == 66
        assert self.task.feature_dim == 500


class TestMazeFiles:
    def test_load_maze_file(self, tmp_path):
        path = tmp_path / "maze.txt"
        path.write_text("# comment\n0.1 0.2 0.3 0.4\n\n0.5 0.6 0.7 0.8  # trailing\n")
        walls = load_maze_file(path)
        assert walls.shape == (2, 4)
        assert walls[0] == pytest.approx([0.1, 0.2, 0.3, 0.4])

    def test_malformed_line_rejected(self, tmp_path):
        path = tmp_path / "maze.txt"
        path.write_text("0.1 0.2 0.3\n")
        with pytest.raises(ValueError, match="expected"):
            load_maze_file(path)

    def test_default_file_matches_builtin(self, tmp_path):
        from qdhf.tasks import DEFAULT_MAZE_SEGMENTS
        import pathlib

        repo_default = pathlib.Path(__file__).resolve().parents[1] / "mazes" / "default.txt"
        walls = load_maze_file(repo_default)
        assert walls == pytest.approx(np.asarray(DEFAULT_MAZE_SEGMENTS))

    def test_make_task(self):
        assert make_task("arm").name == "arm"
        assert make_task("maze").name == "maze"
        with pytest.raises(ValueError):
            make_task("chess")
