import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ssl_pathlab.envs import EnvConfig, FrameSkip, make_env
from ssl_pathlab.evaluation import (
    EpisodeRecord,
    cpad,
    export_trajectory,
    read_trajectory_csv,
    run_episode,
    run_episodes,
    scripted_target_policy,
    summarize,
)
from ssl_pathlab.kinematics import Pose2D

CFG = EnvConfig()


def brute_force_cpad(points):
    total = 0.0
    for a, b in zip(points[:-1], points[1:]):
        total += ((a[0] - b[0]) ** 2 + (a[1] - b[1]) ** 2) ** 0.5
    return total


class TestCpad:
    def test_constant_actions_score_zero(self):
        pts = np.tile([0.7, -0.3], (75, 1))
        assert cpad(pts) == 0.0

    def test_three_four_five(self):
        assert cpad([(0.0, 0.0), (3.0, 4.0)]) == 5.0

    def test_unit_square_walk(self):
        pts = [(0, 0), (1, 0), (1, 1), (0, 1)]
        assert cpad(pts) == pytest.approx(brute_force_cpad(pts), abs=1e-12)
        assert cpad(pts) == pytest.approx(3.0)

    def test_empty_and_singleton(self):
        assert cpad([]) == 0.0
        assert cpad([(2.0, 2.0)]) == 0.0

    def test_non_negative_and_zero_iff_constant(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            pts = rng.uniform(-5, 5, (rng.integers(2, 30), 2))
            value = cpad(pts)
            assert value >= 0.0
            constant = np.all(pts == pts[0])
            assert (value == 0.0) == constant

    def test_translation_invariance(self):
        rng = np.random.default_rng(1)
        for _ in range(300):
            pts = rng.uniform(-5, 5, (20, 2))
            shift = rng.uniform(-100, 100, 2)
            assert cpad(pts + shift) == pytest.approx(cpad(pts), abs=1e-9)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            pts = rng.uniform(-5, 5, (15, 2))
            assert cpad(pts) == pytest.approx(brute_force_cpad(pts),
                                              abs=1e-12)


class TestSummarize:
    def test_singleton(self):
        s = summarize([5.0])
        assert (s.median, s.q1, s.q3, s.max, s.min) == (5, 5, 5, 5, 5)

    def test_four_values_linear_interpolation(self):
        # hand-applied rule: q1 = 1 + 0.75, median = 2.5, q3 = 3 + 0.25
        s = summarize([1.0, 2.0, 3.0, 4.0])
        assert s.median == 2.5
        assert s.q1 == 1.75
        assert s.q3 == 3.25
        assert s.min == 1.0 and s.max == 4.0

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        vals = rng.uniform(-10, 10, 101)
        a = summarize(vals)
        b = summarize(rng.permutation(vals))
        assert a == b

    def test_shift_property(self):
        rng = np.random.default_rng(4)
        vals = rng.uniform(-10, 10, 50)
        a = summarize(vals)
        b = summarize(vals + 7.5)
        assert b.median == pytest.approx(a.median + 7.5)
        assert b.q1 == pytest.approx(a.q1 + 7.5)
        assert b.q3 == pytest.approx(a.q3 + 7.5)
        assert b.max == pytest.approx(a.max + 7.5)
        assert b.min == pytest.approx(a.min + 7.5)

    def test_ordering_invariant(self):
        rng = np.random.default_rng(5)
        for _ in range(50):
            s = summarize(rng.uniform(-3, 3, rng.integers(1, 40)))
            assert s.min <= s.q1 <= s.median <= s.q3 <= s.max

    def test_empty_raises(self):
        with pytest.raises(ValueError):
            summarize([])


class TestRunEpisodes:
    def test_scripted_policy_succeeds_with_zero_cpad(self):
        env = make_env("proposed")
        records = run_episodes(env, scripted_target_policy, n=20, seed=100)
        for r in records:
            assert r.succeeded and not r.collided
            assert r.cpad(CFG) == 0.0
            assert r.length_steps < 1200

    def test_same_seed_bit_identical(self):
        env = make_env("obstacle")
        rng_policy = lambda obs: np.tanh(obs[:6])  # deterministic map
        a = run_episodes(env, rng_policy, n=5, seed=7)
        b = run_episodes(make_env("obstacle"), rng_policy, n=5, seed=7)
        for ra, rb in zip(a, b):
            assert np.array_equal(ra.actions, rb.actions)
            assert ra.length_steps == rb.length_steps
            assert [(p.x, p.y, p.theta) for p in ra.robot_path] == \
                   [(p.x, p.y, p.theta) for p in rb.robot_path]

    def test_collision_rate_matches_recount(self):
        env = make_env("obstacle")
        rng = np.random.default_rng(8)
        policy = lambda obs: rng.uniform(-1, 1, 6)
        records = run_episodes(env, policy, n=40, seed=11)
        rate = sum(r.collided for r in records) / len(records)
        assert 0.0 <= rate <= 1.0
        assert rate == sum(1 for r in records if r.collided) / 40
        for r in records:
            assert not (r.collided and r.succeeded)

    def test_path_length_consistency(self):
        env = FrameSkip(make_env("proposed"), skip=16)
        records = run_episodes(env, scripted_target_policy, n=5, seed=31)
        for r in records:
            assert len(r.robot_path) - 1 == r.length_steps
            assert r.decisions == len(r.actions)
            assert r.decisions <= 75
            assert r.decision_steps[-1] == r.length_steps

    def test_zero_episodes_rejected(self):
        with pytest.raises(ValueError):
            run_episodes(make_env("proposed"), scripted_target_policy, n=0)


class TestExportTrajectory:
    def record(self, skip=4):
        env = FrameSkip(make_env("proposed"), skip=skip)
        return run_episode(env, scripted_target_policy, seed=55)

    def test_empty_record_errors_without_file(self, tmp_path):
        empty = EpisodeRecord(actions=np.zeros((0, 6)), robot_path=[],
                              length_steps=0, succeeded=False,
                              collided=False, truncated=False, seed=0,
                              target=Pose2D())
        out = tmp_path / "traj"
        with pytest.raises(ValueError):
            export_trajectory(empty, out, CFG)
        assert not (tmp_path / "traj.csv").exists()
        assert not (tmp_path / "traj.svg").exists()

    def test_csv_round_trip_exact(self, tmp_path):
        record = self.record()
        csv_path, _ = export_trajectory(record, tmp_path / "traj", CFG)
        back = read_trajectory_csv(csv_path)
        assert np.array_equal(back["actions"], record.actions)
        assert back["step"].tolist() == record.decision_steps
        rewards = [b.total for b in record.breakdowns]
        assert np.array_equal(back["reward"], np.array(rewards))
        assert back["terminated"][-1] == 1

    def test_svg_marker_count_equals_decisions(self, tmp_path):
        record = self.record()
        _, svg_path = export_trajectory(record, tmp_path / "traj.svg", CFG)
        root = ET.parse(svg_path).getroot()
        markers = [el for el in root.iter()
                   if el.tag.endswith("circle")
                   and el.get("class") == "action-marker"]
        assert len(markers) == record.decisions
        targets = [el for el in root.iter()
                   if el.tag.endswith("circle")
                   and el.get("class") == "target"]
        assert len(targets) == 1
        polylines = [el for el in root.iter()
                     if el.tag.endswith("polyline")]
        assert len(polylines) == 1
        npts = len(polylines[0].get("points").split())
        assert npts == len(record.robot_path)
