"""Tests for reference generation: interpolation, steering, builtins."""

import math

import numpy as np
import pytest

from cineflight.cinematography import ActorPose, SphereCoords, ToricCoords
from cineflight.dynamics import wrap_angle
from cineflight.planning import (ActorTrack, ActorTrackError, PathSegment,
                                 ReferenceSample, SteeringConfig,
                                 builtin_trajectory, generate_reference,
                                 interpolate_manifold, naive_reference,
                                 steer_arrive)


def sphere_segment(duration=10.0):
    return PathSegment(SphereCoords(2.0, 0.0, 0.0),
                       SphereCoords(2.0, -3 * math.pi / 4, 0.0),
                       duration, ("A",))


def static_actor(position=(0.0, 0.0, 0.0), facing=0.0):
    return {"A": ActorTrack("A", 1.7, ((0.0, np.asarray(position, float), facing),))}


class TestInterpolateManifold:
    def test_endpoints_exact(self):
        seg = PathSegment(SphereCoords(1.2, 0.4, -0.2),
                          SphereCoords(3.4, -2.9, 0.3), 5.0, ("A",))
        for s, expected in ((0.0, seg.start), (1.0, seg.end)):
            out = interpolate_manifold(seg, s)
            assert out.radius == pytest.approx(expected.radius, abs=1e-12)
            assert wrap_angle(out.azimuth - expected.azimuth) == \
                pytest.approx(0.0, abs=1e-12)
            assert out.elevation == pytest.approx(expected.elevation, abs=1e-12)

    def test_shortest_arc_through_zero(self):
        # 350 deg -> 10 deg midpoint is 0 deg, never 180.
        seg = PathSegment(SphereCoords(1.0, math.radians(350), 0.0),
                          SphereCoords(1.0, math.radians(10), 0.0), 1.0, ("A",))
        assert interpolate_manifold(seg, 0.5).azimuth == pytest.approx(0.0, abs=1e-12)

    def test_toric_parameters_interpolate(self):
        seg = PathSegment(ToricCoords(0.4, 0.2, 0.0),
                          ToricCoords(0.6, -0.4, 0.2), 1.0, ("A", "B"))
        mid = interpolate_manifold(seg, 0.5)
        assert mid.apex_angle == pytest.approx(0.5, abs=1e-12)
        assert mid.theta == pytest.approx(-0.1, abs=1e-12)
        assert mid.phi == pytest.approx(0.1, abs=1e-12)

    def test_mismatched_surfaces_rejected(self):
        with pytest.raises(ValueError):
            PathSegment(SphereCoords(1.0, 0.0, 0.0),
                        ToricCoords(0.4, 0.0, 0.0), 1.0, ("A",))

    def test_fraction_out_of_range_rejected(self):
        with pytest.raises(ValueError):
            interpolate_manifold(sphere_segment(), 1.5)


class TestSteerArrive:
    def test_at_target_at_rest_is_fixed_point(self):
        cfg = SteeringConfig()
        p, v = steer_arrive(np.ones(3), np.zeros(3), np.ones(3), cfg, 0.02)
        assert np.array_equal(p, np.ones(3))
        assert np.array_equal(v, np.zeros(3))

    def test_acceleration_limited_start(self):
        cfg = SteeringConfig(max_speed=1.0, max_accel=1.0)
        _, v = steer_arrive(np.zeros(3), np.zeros(3),
                            np.array([10.0, 0.0, 0.0]), cfg, 0.02)
        assert np.linalg.norm(v) == pytest.approx(cfg.max_accel * 0.02, abs=1e-15)

    def test_converges_from_ten_meters(self):
        # The recurrence is its own oracle.  Phases: ~1 s acceleration,
        # ~8.5 s cruise, then exponential arrival with a 1 s time constant,
        # so the error passes 1e-2 m at ~14.1 s (monotonically).
        cfg = SteeringConfig(max_speed=1.0, max_accel=1.0, slow_radius=1.0)
        p, v = np.zeros(3), np.zeros(3)
        target = np.array([10.0, 0.0, 0.0])
        dt = 0.02
        errors = []
        for k in range(int(15.0 / dt)):
            p, v = steer_arrive(p, v, target, cfg, dt)
            errors.append(np.linalg.norm(p - target))
        assert errors[-1] < 1e-2
        assert np.all(np.diff(errors) < 0.0)

    def test_speed_and_accel_never_exceeded(self):
        cfg = SteeringConfig(max_speed=0.8, max_accel=0.8, slow_radius=1.0)
        rng = np.random.default_rng(21)
        p, v = np.zeros(3), np.zeros(3)
        dt = 0.02
        target = rng.normal(size=3) * 4
        for k in range(2000):
            if k % 250 == 0:
                target = rng.normal(size=3) * 4
            p_new, v_new = steer_arrive(p, v, target, cfg, dt)
            assert np.linalg.norm(v_new) <= cfg.max_speed + 1e-9
            assert np.linalg.norm(v_new - v) <= cfg.max_accel * dt + 1e-9
            p, v = p_new, v_new


class TestActorTrack:
    def test_static_single_keyframe_valid_everywhere(self):
        track = ActorTrack("A", 1.7, ((0.0, np.zeros(3), 0.3),))
        track.check_coverage(0.0, 100.0)
        assert np.array_equal(track.pose_at(55.0).position, np.zeros(3))

    def test_linear_interpolation(self):
        track = ActorTrack("A", 1.7, ((0.0, np.zeros(3), 0.0),
                                      (10.0, np.array([1.0, 0.0, 0.0]), 1.0)))
        pose = track.pose_at(5.0)
        assert np.allclose(pose.position, [0.5, 0.0, 0.0], atol=1e-15)
        assert pose.facing == pytest.approx(0.5, abs=1e-12)

    def test_gap_error_names_interval(self):
        track = ActorTrack("A", 1.7, ((0.0, np.zeros(3), 0.0),
                                      (5.0, np.ones(3), 0.0)))
        with pytest.raises(ActorTrackError, match=r"\[0, 10\]"):
            track.check_coverage(0.0, 10.0)

    def test_missing_actor_named(self):
        with pytest.raises(ActorTrackError, match="'B'"):
            generate_reference(
                PathSegment(SphereCoords(2.0, 0.0, 0.0),
                            SphereCoords(2.0, 1.0, 0.0), 5.0, ("B",)),
                static_actor(), SteeringConfig(), 0.02)


class TestGenerateReference:
    def test_framing_hold_static_scene_converges_to_fixed_point(self):
        seg = PathSegment(SphereCoords(2.0, 0.3, 0.0), SphereCoords(2.0, 0.3, 0.0),
                          20.0, ("A",))
        samples = generate_reference(seg, static_actor(), SteeringConfig(), 0.02)
        # starts exactly on the manifold, so it never leaves it
        tail = samples[-100:]
        for s in tail:
            assert np.linalg.norm(s.velocity) < 1e-9
        positions = np.array([s.position for s in tail])
        assert np.abs(positions - positions[0]).max() < 1e-9
        courses = {s.course for s in tail}
        assert len(courses) == 1

    def test_moving_actor_framing_hold_tracks_actor_speed(self):
        # Steady state of the arrive recurrence under a constant-velocity
        # target: the reference moves at the actor's speed.
        speed = 0.3
        track = {"A": ActorTrack("A", 1.7, (
            (0.0, np.zeros(3), 0.0),
            (60.0, np.array([speed * 60.0, 0.0, 0.0]), 0.0)))}
        seg = PathSegment(SphereCoords(2.0, math.pi, 0.0),
                          SphereCoords(2.0, math.pi, 0.0), 60.0, ("A",))
        samples = generate_reference(seg, track, SteeringConfig(), 0.02)
        for s in samples[-200:]:
            assert np.linalg.norm(s.velocity) == pytest.approx(speed, abs=1e-3)

    def test_transition_azimuth_sweep_monotonic(self):
        samples = generate_reference(sphere_segment(10.0), static_actor(),
                                     SteeringConfig(), 0.02, hold=2.0)
        from cineflight.cinematography import pose_to_sphere
        actor = ActorPose("A", np.zeros(3), 0.0, 1.7)
        azimuths = [pose_to_sphere(s.position, actor).azimuth for s in samples]
        assert azimuths[0] == pytest.approx(0.0, abs=1e-12)
        diffs = np.diff(azimuths)
        assert np.all(diffs <= 1e-9)
        assert azimuths[-1] < -3 * math.pi / 4 + 0.1

    def test_kinematic_consistency_invariant(self):
        cfg = SteeringConfig()
        samples = generate_reference(sphere_segment(8.0), static_actor(), cfg, 0.02)
        for prev, cur in zip(samples, samples[1:]):
            drift = np.linalg.norm(cur.position - prev.position
                                   - 0.02 * prev.velocity)
            assert drift <= cfg.max_accel * 0.02**2 + 1e-12

    def test_heading_rate_limit_respected(self):
        cfg = SteeringConfig(heading_rate_limit=0.6)
        samples = generate_reference(sphere_segment(6.0), static_actor(), cfg, 0.02)
        for prev, cur in zip(samples, samples[1:]):
            assert abs(wrap_angle(cur.course - prev.course)) <= \
                cfg.heading_rate_limit * 0.02 + 1e-12

    def test_steered_smoother_than_naive(self):
        # The stage-3 baseline: direct time-optimal sampling yields large
        # accelerations; the steering pass bounds them.
        seg = PathSegment(SphereCoords(2.0, 0.0, 0.0),
                          SphereCoords(2.0, math.pi, 0.0), 3.0, ("A",))
        cfg = SteeringConfig(max_accel=0.8)
        naive = naive_reference(seg, static_actor(), 0.02)
        steered = generate_reference(seg, static_actor(), cfg, 0.02)

        def max_accel(samples):
            velocities = np.array([s.velocity for s in samples])
            return np.abs(np.diff(velocities, axis=0) / 0.02).max()

        assert max_accel(naive) > 2.0 * max_accel(steered)
        assert max_accel(steered) <= cfg.max_accel + 1e-9


class TestBuiltinTrajectories:
    def test_helix_horizontal_speed(self):
        samples = builtin_trajectory("helix", {"radius": 1.0, "omega": 0.5,
                                               "climb": 0.1, "duration": 10.0},
                                     0.02)
        for s in samples:
            assert np.linalg.norm(s.velocity[:2]) == pytest.approx(0.5, abs=1e-12)
            assert s.velocity[2] == 0.1

    def test_square_perimeter_time(self):
        samples = builtin_trajectory("square", {"side": 2.0, "speed": 0.25}, 0.02)
        assert samples[-1].t == pytest.approx(32.0, abs=1e-9)
        # corners visited in order
        assert np.allclose(samples[0].position[:2], [0.0, 0.0], atol=1e-12)
        quarter = len(samples) // 4
        assert np.allclose(samples[quarter].position[:2], [2.0, 0.0], atol=1e-9)

    def test_square_dwell_extends_timeline(self):
        samples = builtin_trajectory("square", {"side": 2.0, "speed": 0.25,
                                                "dwell": 1.0}, 0.02)
        assert samples[-1].t == pytest.approx(36.0, abs=1e-9)

    def test_kinematic_consistency_all_kinds(self):
        cases = [
            ("square", {"side": 2.0, "speed": 0.25, "dwell": 0.5}),
            ("helix", {"radius": 1.0, "omega": 0.4, "climb": 0.1,
                       "duration": 10.0}),
            # 5 m at 0.5 m/s: the breakpoint lands on the dt grid, where the
            # right-derivative velocity convention is exactly consistent
            ("line", {"start": [0, 0, 1], "end": [3, 4, 1], "speed": 0.5,
                      "hold": 1.0}),
            ("setpoint", {"position": [1, 2, 3], "duration": 2.0}),
        ]
        max_accel = 0.8
        for kind, params in cases:
            samples = builtin_trajectory(kind, params, 0.02)
            for prev, cur in zip(samples, samples[1:]):
                drift = np.linalg.norm(cur.position - prev.position
                                       - 0.02 * prev.velocity)
                assert drift <= max_accel * 0.02**2 + 1e-12, (kind, prev.t)

    def test_tangent_heading_on_helix(self):
        samples = builtin_trajectory("helix", {"radius": 1.0, "omega": 0.5,
                                               "duration": 5.0,
                                               "heading": "tangent"}, 0.02)
        s = samples[100]
        assert s.course == pytest.approx(math.atan2(s.velocity[1], s.velocity[0]),
                                         abs=0)

    def test_fixed_heading_mode(self):
        samples = builtin_trajectory("square", {"side": 1.0, "speed": 0.5,
                                                "heading": 0.7}, 0.02)
        assert all(s.course == pytest.approx(0.7) for s in samples)

    def test_degenerate_params_rejected(self):
        with pytest.raises(ValueError):
            builtin_trajectory("square", {"side": 0.0, "speed": 0.25}, 0.02)
        with pytest.raises(ValueError):
            builtin_trajectory("helix", {"radius": 1.0, "omega": 0.0,
                                         "duration": 5.0}, 0.02)
        with pytest.raises(ValueError):
            builtin_trajectory("line", {"start": [0, 0, 0], "end": [0, 0, 0],
                                        "speed": 1.0}, 0.02)
        with pytest.raises(ValueError):
            builtin_trajectory("spiral", {}, 0.02)
