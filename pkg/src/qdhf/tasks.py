"""Benchmark tasks: a redundant planar arm and a wheeled robot in a maze."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numba import njit

from .archive import MeasureBounds


@dataclass
class Evaluation:
    """Result of evaluating one genome."""

    objective: float
    features: np.ndarray
    gt_measures: np.ndarray


class ArmTask:
    """Planar arm whose joints sweep out a reachable disk.

    A genome is one angle per joint, in radians relative to the previous
    link.  The behavior descriptor is the end-effector position; the
    objective rewards evenly spread joint angles (low variance).  Features
    expose the sines and cosines of the cumulative joint angles, which makes
    the descriptor an exact linear function of the features.
    """

    name = "arm"

    def __init__(self, num_joints: int = 10, link_lengths: Optional[Sequence[float]] = None):
        if num_joints < 1:
            raise ValueError("need at least one joint")
        if link_lengths is None:
            link_lengths = np.full(num_joints, 1.0 / num_joints)
        self.link_lengths = np.asarray(link_lengths, dtype=float)
        if self.link_lengths.shape != (num_joints,) or np.any(self.link_lengths <= 0):
            raise ValueError("need one positive length per joint")
        self.num_joints = num_joints
        self.genome_dim = num_joints
        self.feature_dim = 2 * num_joints
        self.genome_low = np.full(num_joints, -math.pi)
        self.genome_high = np.full(num_joints, math.pi)
        reach = float(self.link_lengths.sum())
        self.gt_bounds = MeasureBounds([[-reach, reach], [-reach, reach]])

    def evaluate_batch(self, genomes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Evaluate an (n, joints) batch; returns objectives, features, measures."""
        g = np.clip(np.asarray(genomes, dtype=float), -math.pi, math.pi)
        if g.ndim != 2 or g.shape[1] != self.num_joints:
            raise ValueError("genome batch has the wrong shape")
        cum = np.cumsum(g, axis=1)
        sin, cos = np.sin(cum), np.cos(cum)
        features = np.concatenate([sin, cos], axis=1)
        gt = np.stack([cos @ self.link_lengths, sin @ self.link_lengths], axis=1)
        objectives = 1.0 - g.var(axis=1) / (math.pi**2)
        return objectives, features, gt

    def evaluate(self, genome: np.ndarray) -> Evaluation:
        obj, feats, gt = self.evaluate_batch(np.asarray(genome, dtype=float)[None, :])
        return Evaluation(float(obj[0]), feats[0], gt[0])

    def joint_positions(self, genome: np.ndarray) -> np.ndarray:
        """Chain of joint coordinates from the base to the end effector."""
        cum = np.cumsum(np.clip(genome, -math.pi, math.pi))
        steps = self.link_lengths[:, None] * np.stack([np.cos(cum), np.sin(cum)], axis=1)
        return np.vstack([[0.0, 0.0], np.cumsum(steps, axis=0)])

    def render_payload(self, genome: np.ndarray, features: Optional[np.ndarray] = None) -> dict:
        return {"kind": "arm", "points": self.joint_positions(genome).tolist()}


@njit(cache=True)
def _ray_hit(px, py, dx, dy, walls, max_range):
    """Distance along a unit ray to the nearest wall, capped at max_range."""
    best = max_range
    for w in range(walls.shape[0]):
        ex = walls[w, 2] - walls[w, 0]
        ey = walls[w, 3] - walls[w, 1]
        denom = dx * ey - dy * ex
        if abs(denom) < 1e-12:
            continue
        qx = walls[w, 0] - px
        qy = walls[w, 1] - py
        t = (qx * ey - qy * ex) / denom
        s = (qx * dy - qy * dx) / denom
        if t >= 0.0 and 0.0 <= s <= 1.0 and t < best:
            best = t
    return best


@njit(cache=True)
def _on_colinear_segment(ax, ay, bx, by, rx, ry):
    return (
        min(ax, bx) <= rx <= max(ax, bx)
        and min(ay, by) <= ry <= max(ay, by)
    )


@njit(cache=True)
def _segment_blocked(ax, ay, bx, by, walls):
    """True if the move a-b touches any wall; endpoint contact counts."""
    for w in range(walls.shape[0]):
        cx = walls[w, 0]
        cy = walls[w, 1]
        dx = walls[w, 2]
        dy = walls[w, 3]
        d1 = (dx - cx) * (ay - cy) - (dy - cy) * (ax - cx)
        d2 = (dx - cx) * (by - cy) - (dy - cy) * (bx - cx)
        d3 = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        d4 = (bx - ax) * (dy - ay) - (by - ay) * (dx - ax)
        if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
            (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
        ):
            return True
        if d1 == 0 and _on_colinear_segment(cx, cy, dx, dy, ax, ay):
            return True
        if d2 == 0 and _on_colinear_segment(cx, cy, dx, dy, bx, by):
            return True
        if d3 == 0 and _on_colinear_segment(ax, ay, bx, by, cx, cy):
            return True
        if d4 == 0 and _on_colinear_segment(ax, ay, bx, by, dx, dy):
            return True
    return False


@njit(cache=True)
def _simulate(
    genomes,
    walls,
    start_x,
    start_y,
    start_heading,
    steps,
    laser_angles,
    laser_range,
    contact_range,
    speed,
    axle,
    n_hidden,
):
    """Roll out wheel controllers; returns trajectories and control cost sums.

    Per step: sense, drive both wheels through the network, rotate, then
    translate along the new heading.  A move whose swept segment touches a
    wall is cancelled outright (the heading update still applies).
    """
    n_genomes = genomes.shape[0]
    n_lasers = laser_angles.shape[0]
    n_in = n_lasers + 2
    half_pi = math.pi / 2.0
    two_pi = 2.0 * math.pi
    traj = np.empty((n_genomes, steps, 2))
    cost = np.zeros(n_genomes)
    for b in range(n_genomes):
        g = genomes[b]
        o = n_hidden * n_in
        w1 = np.ascontiguousarray(g[:o]).reshape(n_hidden, n_in)
        b1 = g[o : o + n_hidden]
        w2 = np.ascontiguousarray(g[o + n_hidden : o + n_hidden + 2 * n_hidden]).reshape(
            2, n_hidden
        )
        b2 = g[o + 3 * n_hidden : o + 3 * n_hidden + 2]
        px, py, heading = start_x, start_y, start_heading
        inputs = np.empty(n_in)
        for t in range(steps):
            for l in range(n_lasers):
                ang = heading + laser_angles[l]
                d = _ray_hit(px, py, math.cos(ang), math.sin(ang), walls, laser_range)
                inputs[l] = d / laser_range
            left = _ray_hit(
                px,
                py,
                math.cos(heading + half_pi),
                math.sin(heading + half_pi),
                walls,
                contact_range,
            )
            right = _ray_hit(
                px,
                py,
                math.cos(heading - half_pi),
                math.sin(heading - half_pi),
                walls,
                contact_range,
            )
            inputs[n_lasers] = 1.0 if left < contact_range else -1.0
            inputs[n_lasers + 1] = 1.0 if right < contact_range else -1.0
            hidden = np.tanh(w1 @ inputs + b1)
            out = np.tanh(w2 @ hidden + b2)
            wl = out[0]
            wr = out[1]
            cost[b] += 0.5 * (wl * wl + wr * wr)
            heading = heading + (wr - wl) * speed / axle
            heading = (heading + math.pi) % two_pi - math.pi
            v = 0.5 * (wl + wr) * speed
            nx = px + v * math.cos(heading)
            ny = py + v * math.sin(heading)
            if v != 0.0 and _segment_blocked(px, py, nx, ny, walls):
                nx = px
                ny = py
            px = nx
            py = ny
            traj[b, t, 0] = px
            traj[b, t, 1] = py
    return traj, cost


DEFAULT_MAZE_SEGMENTS = (
    (0.0, 0.33, 0.7, 0.33),
    (0.3, 0.66, 1.0, 0.66),
    (0.7, 0.33, 0.7, 0.45),
)

BOUNDARY_SEGMENTS = (
    (0.0, 0.0, 1.0, 0.0),
    (1.0, 0.0, 1.0, 1.0),
    (1.0, 1.0, 0.0, 1.0),
    (0.0, 1.0, 0.0, 0.0),
)


def load_maze_file(path) -> np.ndarray:
    """Interior wall segments from a text file, one 'x1 y1 x2 y2' per line."""
    segments = []
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 'x1 y1 x2 y2'")
        segments.append([float(p) for p in parts])
    return np.asarray(segments, dtype=float).reshape(-1, 4)


class MazeTask:
    """Differential-drive robot exploring a walled unit square.

    The genome encodes a small tanh network mapping range and contact
    sensors to two wheel speeds.  The behavior descriptor is the robot's
    final position; features expose the full trajectory; the objective
    rewards low control effort.
    """

    name = "maze"

    def __init__(
        self,
        interior_walls: Optional[np.ndarray] = None,
        start: Tuple[float, float, float] = (0.15, 0.15, 0.0),
        steps: int = 250,
        hidden: int = 8,
        laser_range: float = 0.2,
        contact_range: float = 0.01,
        speed: float = 0.01,
        axle: float = 0.05,
    ):
        if interior_walls is None:
            interior_walls = np.asarray(DEFAULT_MAZE_SEGMENTS, dtype=float)
        interior = np.asarray(interior_walls, dtype=float).reshape(-1, 4)
        boundary = np.asarray(BOUNDARY_SEGMENTS, dtype=float)
        self.walls = np.vstack([boundary, interior])
        if np.any(np.all(self.walls[:, :2] == self.walls[:, 2:], axis=1)):
            raise ValueError("degenerate wall segment")
        self.start = (float(start[0]), float(start[1]), float(start[2]))
        self.steps = steps
        self.hidden = hidden
        self.laser_angles = np.asarray([-math.pi / 4, 0.0, math.pi / 4])
        self.laser_range = laser_range
        self.contact_range = contact_range
        self.speed = speed
        self.axle = axle
        n_in = len(self.laser_angles) + 2
        self.genome_dim = hidden * n_in + hidden + 2 * hidden + 2
        self.feature_dim = 2 * steps
        self.genome_low = np.full(self.genome_dim, -1.0)
        self.genome_high = np.full(self.genome_dim, 1.0)
        self.gt_bounds = MeasureBounds([[0.0, 1.0], [0.0, 1.0]])

    def rollout(self, genomes: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Trajectories (n, steps, 2) and summed control costs for a batch."""
        g = np.clip(np.asarray(genomes, dtype=float), -1.0, 1.0)
        if g.ndim != 2 or g.shape[1] != self.genome_dim:
            raise ValueError("genome batch has the wrong shape")
        sx, sy, sh = self.start
        return _simulate(
            np.ascontiguousarray(g),
            self.walls,
            sx,
            sy,
            sh,
            self.steps,
            self.laser_angles,
            self.laser_range,
            self.contact_range,
            self.speed,
            self.axle,
            self.hidden,
        )

    def evaluate_batch(self, genomes: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        traj, cost = self.rollout(genomes)
        objectives = 1.0 - cost / self.steps
        features = traj.reshape(traj.shape[0], self.feature_dim)
        gt = traj[:, -1, :].copy()
        return objectives, features, gt

    def evaluate(self, genome: np.ndarray) -> Evaluation:
        obj, feats, gt = self.evaluate_batch(np.asarray(genome, dtype=float)[None, :])
        return Evaluation(float(obj[0]), feats[0], gt[0])

    def sensor_readings(self, pose: Tuple[float, float, float]) -> np.ndarray:
        """Normalized laser distances and contact flags at an arbitrary pose."""
        px, py, heading = pose
        vals = np.empty(len(self.laser_angles) + 2)
        for i, rel in enumerate(self.laser_angles):
            ang = heading + rel
            d = _ray_hit(px, py, math.cos(ang), math.sin(ang), self.walls, self.laser_range)
            vals[i] = d / self.laser_range
        for j, side in enumerate((math.pi / 2, -math.pi / 2)):
            d = _ray_hit(
                px,
                py,
                math.cos(heading + side),
                math.sin(heading + side),
                self.walls,
                self.contact_range,
            )
            vals[len(self.laser_angles) + j] = 1.0 if d < self.contact_range else -1.0
        return vals

    def trajectory_of(self, features: np.ndarray) -> np.ndarray:
        """Trajectory points, start included, recovered from a feature row."""
        path = np.asarray(features, dtype=float).reshape(self.steps, 2)
        return np.vstack([[self.start[0], self.start[1]], path])

    def render_payload(self, genome: np.ndarray, features: Optional[np.ndarray] = None) -> dict:
        if features is None:
            features = self.evaluate(genome).features
        return {
            "kind": "maze",
            "walls": self.walls.tolist(),
            "path": self.trajectory_of(features).tolist(),
        }


def make_task(name: str, maze_file: Optional[str] = None):
    """Instantiate a task by CLI name."""
    if name == "arm":
        return ArmTask()
    if name == "maze":
        walls = load_maze_file(maze_file) if maze_file else None
        return MazeTask(interior_walls=walls)
    raise ValueError(f"unknown task: {name!r}")
