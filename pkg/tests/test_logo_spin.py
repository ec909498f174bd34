import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import camera_facing_orientation, logo_case, max_hidden_gap, monte_carlo_segment, random_axis

from ttspin.logo_spin import (
    ContourFrame,
    InsufficientVisibilityError,
    RotationPlane,
    SpinAxisIndeterminateError,
    angular_velocity,
    classify_segment,
    contour_centroid,
    estimate_spin_logo,
    fit_plane,
    logo_center,
    project_contour,
    segment_area,
    segment_centroid_distance,
    segment_correct,
    segment_half_angle,
    track_from_contours,
)
from ttspin.magnus_fit import estimate_spin
from ttspin.physics import (
    BallState,
    LogoTrack,
    PhysicalConstants,
    logo_contour,
    simulate_contours,
    simulate_logo,
    simulate_observations,
)
from ttspin.rotmath import Quat, angle_between

LOGO_RHO = math.asin(0.0065 / 0.02)


def ring(axis, radius, n=72):
    a = np.asarray(axis, dtype=float)
    a /= np.linalg.norm(a)
    helper = np.array([1.0, 0, 0]) if abs(a[0]) < 0.9 else np.array([0, 1.0, 0])
    e1 = np.cross(a, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    phi = np.linspace(0, 2 * np.pi, n, endpoint=False)
    return math.cos(radius) * a + math.sin(radius) * (np.outer(np.cos(phi), e1) + np.outer(np.sin(phi), e2))


# --- projection and centroid -------------------------------------------------------


def test_projection_examples():
    R = 35.0
    p = project_contour([[0, 0], [R, 0], [R / 2, 0]], R)
    np.testing.assert_allclose(p[0], [0, 0, 1], atol=1e-15)
    np.testing.assert_allclose(p[1], [1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(p[2], [0.5, 0, math.sqrt(0.75)], atol=1e-15)


@given(st.lists(st.tuples(st.floats(-35.9, 35.9), st.floats(-35.9, 35.9)), min_size=1, max_size=30))
def test_projection_on_hemisphere(pixels):
    px = np.array(pixels)
    px = px[np.hypot(px[:, 0], px[:, 1]) <= 35.9]
    if len(px) == 0:
        return
    p = project_contour(px, 35.0)
    np.testing.assert_allclose(np.linalg.norm(p, axis=1), 1.0, atol=1e-12)
    assert np.all(p[:, 2] >= 0)


def test_projection_rejects_far_pixels():
    with pytest.raises(ValueError):
        project_contour([[40.0, 0.0]], 35.0)


def test_centroid_examples():
    np.testing.assert_allclose(contour_centroid(ring([0, 0, 1], 0.3)), [0, 0, 1], atol=1e-9)
    p = np.array([0.6, 0.0, 0.8])
    np.testing.assert_allclose(contour_centroid(np.tile(p, (5, 1))), p, atol=1e-15)
    a = np.array([0.3, -0.4, 0.866])
    a /= np.linalg.norm(a)
    np.testing.assert_allclose(contour_centroid(ring(a, LOGO_RHO)), a, atol=1e-6)


# --- circular segment --------------------------------------------------------------


def test_segment_closed_forms():
    r = 0.0065
    assert segment_centroid_distance(math.pi, r) == 0.0
    assert segment_centroid_distance(math.pi / 2, r) == pytest.approx(4 * r / (3 * math.pi), abs=1e-9)
    assert segment_centroid_distance(0.01, r) == pytest.approx(r, rel=0.01)
    assert segment_area(math.pi, r) == pytest.approx(math.pi * r**2, rel=1e-15)


@pytest.mark.parametrize("alpha", [0.3, 0.8, 1.2, 2.0])
def test_segment_matches_monte_carlo(alpha):
    r = 0.0065
    area, dist = monte_carlo_segment(alpha, r)
    assert segment_area(alpha, r) == pytest.approx(area, rel=0.005)
    assert segment_centroid_distance(alpha, r) == pytest.approx(dist, rel=0.005)


@given(st.floats(1e-4, math.pi))
def test_half_angle_inverts_area(alpha):
    r = 0.0065
    assert segment_half_angle(segment_area(alpha, r), r) == pytest.approx(alpha, abs=1e-9)


def test_centroid_distance_small_angle_is_smooth():
    r = 1.0
    values = [segment_centroid_distance(a, r) for a in np.geomspace(1e-6, 1e-2, 20)]
    assert np.all(np.diff(values) < 0)
    assert values[0] == pytest.approx(1.0, abs=1e-9)


# --- segment classification and correction ---------------------------------------------


def test_classify_examples():
    assert classify_segment(ring([0, 0, 1], LOGO_RHO)) == "full"
    assert classify_segment(logo_contour([1.0, 0.0, 0.05], LOGO_RHO)) == "partial"
    sixty = [math.sin(math.radians(60)), 0, math.cos(math.radians(60))]
    assert classify_segment(ring(sixty, math.radians(15))) == "full"


def test_full_logo_left_alone():
    pts = ring([0.2, 0.1, 0.97], LOGO_RHO)
    c = contour_centroid(pts)
    out = segment_correct(pts, c, full_visibility=True)
    assert not out.corrected
    np.testing.assert_array_equal(out.direction, c)


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 2 * math.pi), st.floats(math.radians(75), math.radians(100)))
def test_partial_correction_moves_toward_limb(azimuth, polar):
    d = np.array([math.sin(polar) * math.cos(azimuth), math.sin(polar) * math.sin(azimuth), math.cos(polar)])
    pts = logo_contour(d, LOGO_RHO)
    if len(pts) < 3:
        return
    c = contour_centroid(pts)
    out = segment_correct(pts, c)
    assert np.linalg.norm(out.direction) == pytest.approx(1.0, abs=1e-9)
    if out.corrected:
        assert math.acos(min(1.0, out.direction[2])) > math.acos(min(1.0, c[2]))


def test_correction_recovers_cut_logo_centre():
    # logo straddling the limb: the corrected centre is closer to truth than the raw centroid
    for polar in (80, 85, 90, 95):
        p = math.radians(polar)
        d = np.array([math.sin(p), 0.0, math.cos(p)])
        pts = logo_contour(d, LOGO_RHO, n_points=256, limb_points=64)
        c = contour_centroid(pts)
        out = segment_correct(pts, c)
        assert angle_between(out.direction, d) < angle_between(c, d)


def test_logo_center_end_to_end_full():
    d = np.array([0.3, -0.2, 0.93])
    d /= np.linalg.norm(d)
    px = logo_contour(d, LOGO_RHO)[:, :2] * 35.0
    out = logo_center(px, 35.0)
    assert not out.corrected
    assert angle_between(out.direction, d) < 1e-6


# --- plane fit ------------------------------------------------------------------------


def test_plane_latitude_circle():
    a = np.array([0.2, -0.5, 0.8])
    a /= np.linalg.norm(a)
    plane = fit_plane(ring(a, math.radians(60), n=40))
    assert angle_between(plane.normal, a) < 1e-6
    assert plane.offset == pytest.approx(0.5, abs=1e-6)


def test_plane_great_circle():
    plane = fit_plane(ring([0, 1.0, 0], math.pi / 2, n=40))
    assert plane.offset == pytest.approx(0.0, abs=1e-6)
    assert abs(plane.normal[1]) == pytest.approx(1.0, abs=1e-6)


def test_plane_partial_arc():
    a = np.array([0.0, 0.6, 0.8])
    pts = ring(a, math.radians(50), n=72)[:12]  # 60 degree arc
    plane = fit_plane(pts)
    assert angle_between(plane.normal, a) < 1e-6


def test_plane_noise_tolerance():
    worst = 0.0
    for seed in range(50):
        rng = np.random.default_rng(seed)
        a = random_axis(rng)
        pts = ring(a, math.radians(70), n=20)
        pts = pts + rng.normal(scale=math.radians(1.0), size=pts.shape)
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        n = fit_plane(pts).normal
        worst = max(worst, math.degrees(min(angle_between(n, a), angle_between(-n, a))))
    assert worst < 3.0


@settings(max_examples=30, deadline=None)
@given(st.tuples(*[st.floats(-1, 1)] * 4).filter(lambda v: np.linalg.norm(v) > 0.1))
def test_plane_rotation_equivariant(qv):
    R = Quat(*qv)
    a = np.array([0.1, 0.3, 0.95])
    pts = ring(a, math.radians(40), n=30)
    n1 = fit_plane(pts).normal
    n2 = fit_plane(R.rotate(pts)).normal
    rn1 = R.rotate(n1)
    assert min(angle_between(rn1, n2), angle_between(-rn1, n2)) < 1e-6


def test_plane_errors():
    with pytest.raises(InsufficientVisibilityError):
        fit_plane(np.eye(3)[:2])
    with pytest.raises(SpinAxisIndeterminateError):
        fit_plane(np.tile([0.0, 0.0, 1.0], (5, 1)))


# --- angular velocity ---------------------------------------------------------------------


def great_circle_track(speed, rate=380.0, t_end=0.1, threshold=-1.0):
    return simulate_logo(Quat.identity(), (0.0, speed, 0.0), rate, t_end, visibility_threshold=threshold)


def test_speed_ten_revolutions_per_second():
    track = great_circle_track(2 * math.pi * 10, t_end=0.05)
    plane = fit_plane(track.directions[track.visible])
    at, est = angular_velocity(track, plane)
    assert abs(at.slope) == pytest.approx(3600.0, rel=0.005)
    assert np.linalg.norm(est.omega) == pytest.approx(2 * math.pi * 10, rel=0.005)


def test_zero_spin_zero_slope():
    d = np.array([0.3, 0.1, 0.95])
    d /= np.linalg.norm(d)
    track = LogoTrack(np.arange(20) / 380, np.tile(d, (20, 1)), np.ones(20, bool))
    at, est = angular_velocity(track, RotationPlane(np.array([0.0, 1.0, 0.0]), 0.0))
    assert at.slope == 0.0
    assert np.all(est.omega == 0)
    assert est.low_confidence


def test_hidden_hemisphere_gap():
    # 7.5 rev/s: the logo spends several frames behind the ball each turn
    w = 2 * math.pi * 7.5
    track = great_circle_track(w, t_end=0.2, threshold=0.17)
    assert max_hidden_gap(track) >= 2
    plane = fit_plane(track.directions[track.visible])
    for mode in ("rate", "half_revolution"):
        _, est = angular_velocity(track, plane, unwrap=mode)
        assert np.linalg.norm(est.omega) == pytest.approx(w, rel=0.02)


@pytest.mark.parametrize("shift, scale", [(5.0, 1.0), (0.0, 2.0), (-3.0, 0.5)])
def test_slope_time_shift_and_scale(shift, scale):
    track, _ = logo_case(3)
    plane = fit_plane(track.directions[track.visible])
    base, _ = angular_velocity(track, plane)
    moved = LogoTrack(track.t * scale + shift, track.directions, track.visible)
    other, _ = angular_velocity(moved, plane)
    assert other.slope == pytest.approx(base.slope / scale, rel=1e-9)


# --- full pipeline ---------------------------------------------------------------------------


def test_logo_round_trip():
    for seed in range(60):
        track, omega = logo_case(seed)
        est = estimate_spin_logo(track)
        assert np.linalg.norm(est.omega) == pytest.approx(np.linalg.norm(omega), rel=0.01)
        assert math.degrees(angle_between(est.omega, omega)) < 2.0


def test_all_invisible():
    track = LogoTrack(np.arange(10) / 380, np.zeros((10, 3)), np.zeros(10, bool))
    with pytest.raises(InsufficientVisibilityError) as exc:
        estimate_spin_logo(track)
    assert exc.value.code == "insufficient-visibility"


@pytest.mark.parametrize("offset_deg", [0.0, 1.0, 3.0, 5.0, 8.0, 20.0])
def test_logo_near_rotation_pole(offset_deg):
    # sidespin with the logo close to the spin axis: flag it, never report a confident wrong axis
    omega = np.array([0.0, 0.0, 300.0])
    q0 = Quat.from_rotvec([math.radians(offset_deg), 0, 0])
    track = simulate_logo(q0, omega, 380, 0.08)
    try:
        est = estimate_spin_logo(track)
    except SpinAxisIndeterminateError:
        return
    if not est.low_confidence:
        assert math.degrees(angle_between(est.omega, omega)) < 5.0
    if offset_deg < 5.0:
        assert est.low_confidence


def test_contour_input_matches_projected_track():
    track, _ = logo_case(7)
    pix = simulate_contours(track)
    frames = [ContourFrame(t, p if p is not None else np.zeros((0, 2)), 35.0) for t, p in zip(track.t, pix)]
    from_contours = estimate_spin_logo(frames)
    from_track = estimate_spin_logo(track_from_contours(frames))
    np.testing.assert_allclose(from_contours.omega, from_track.omega, atol=1e-9)


def test_contour_pipeline_close_to_truth():
    worst = 0.0
    for seed in range(20):
        track, omega = logo_case(seed)
        pix = simulate_contours(track, n_points=128)
        frames = [ContourFrame(t, p if p is not None else np.zeros((0, 2)), 35.0) for t, p in zip(track.t, pix)]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            est = estimate_spin_logo(frames)
        worst = max(worst, math.degrees(angle_between(est.omega, omega)))
        assert np.linalg.norm(est.omega) == pytest.approx(np.linalg.norm(omega), rel=0.03)
    assert worst < 5.0


def test_logo_and_trajectory_agree():
    # one spin, two observation channels; same right-hand convention
    c = PhysicalConstants()
    rng = np.random.default_rng(11)
    for _ in range(10):
        omega = random_axis(rng) * rng.uniform(60, 500)
        start = BallState(0.0, (-1.5, 0.0, 0.3), (5.0, 0.2, 1.5))
        traj = simulate_observations(start, omega, c, 150, 0.0, duration=0.1)
        w_traj = estimate_spin(traj, c).omega
        w_logo = estimate_spin_logo(simulate_logo(camera_facing_orientation(rng), omega)).omega
        assert math.degrees(angle_between(w_traj, w_logo)) < 5.0
        assert np.linalg.norm(w_traj) == pytest.approx(np.linalg.norm(w_logo), rel=0.03)
