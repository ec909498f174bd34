import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ttspin.rotmath import (
    AxisAngle,
    PoseOutput,
    Quat,
    RotMatrix,
    conditional_loss,
    convert,
    geodesic_matrix,
    geodesic_quat,
    logo_direction,
    loss_abs,
    loss_geodesic,
    loss_sq,
    matrix_to_quat,
    quat_to_matrix,
    random_quat,
    vector_angle,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
quats = st.tuples(finite, finite, finite, finite).filter(lambda v: np.linalg.norm(v) > 1e-3).map(lambda v: Quat(*v))


def rz(deg):
    a = math.radians(deg)
    return RotMatrix(np.array([[math.cos(a), -math.sin(a), 0], [math.sin(a), math.cos(a), 0], [0, 0, 1]]))


def test_identity_quat_to_matrix():
    np.testing.assert_array_equal(quat_to_matrix(Quat.identity()).matrix, np.eye(3))


def test_axis_angle_to_quat_textbook():
    q = convert(AxisAngle((0, 0, 1), math.pi / 2), Quat)
    np.testing.assert_allclose(q.as_array(), [math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4)], atol=1e-15)


def test_matrix_quat_round_trip():
    rng = np.random.default_rng(1)
    for _ in range(200):
        r = quat_to_matrix(random_quat(rng))
        back = convert(convert(r, Quat), RotMatrix)
        assert geodesic_matrix(r, back) < 1e-9


def test_axis_angle_canonical_form():
    aa = AxisAngle((0, 0, -2), 3 * math.pi / 2)
    assert aa.angle == pytest.approx(math.pi / 2)
    np.testing.assert_allclose(aa.axis, (0, 0, 1))
    flipped = AxisAngle((-1, 0, 0), math.pi)
    assert flipped.axis == (1.0, 0.0, 0.0)
    assert AxisAngle((0, -1, 0), 0.0).axis == (0.0, 1.0, 0.0)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        Quat(0, 0, 0, 0)
    with pytest.raises(ValueError):
        RotMatrix(np.diag([1.0, 1.0, -1.0]))
    with pytest.raises(ValueError):
        AxisAngle((0, 0, 0), 1.0)


def test_geodesic_matrix_examples():
    assert geodesic_matrix(RotMatrix.identity(), RotMatrix.identity()) == 0.0
    assert geodesic_matrix(rz(90), RotMatrix.identity()) == pytest.approx(math.pi / 2, abs=1e-15)


def test_geodesic_quat_examples():
    q = Quat(0.3, -0.1, 0.8, 0.2)
    assert geodesic_quat(q, q) == 0.0
    assert geodesic_quat(q, -q) == 0.0
    assert geodesic_quat(Quat.identity(), Quat(math.cos(math.pi / 4), 0, 0, math.sin(math.pi / 4))) == pytest.approx(
        math.pi / 2, abs=1e-15
    )


def test_geodesic_accurate_near_zero():
    # arccos of a rounded trace would give ~1e-8 here
    q = Quat.from_rotvec([1e-10, 0, 0])
    assert geodesic_quat(Quat.identity(), q) == pytest.approx(1e-10, rel=1e-6)
    assert geodesic_matrix(RotMatrix.identity(), quat_to_matrix(q)) == pytest.approx(1e-10, rel=1e-6)


def test_geodesic_triangle_inequality():
    rng = np.random.default_rng(2)
    for _ in range(500):
        a, b, c = (random_quat(rng) for _ in range(3))
        assert geodesic_quat(a, c) <= geodesic_quat(a, b) + geodesic_quat(b, c) + 1e-9


@given(quats, quats)
def test_vector_angle_bounded_by_geodesic(q1, q2):
    assert vector_angle(q1, q2) <= geodesic_quat(q1, q2) + 1e-9


def test_vector_angle_examples():
    q = Quat(0.9, 0.1, -0.3, 0.2)
    assert vector_angle(q, q) == 0.0
    qx = Quat.from_rotvec([math.pi / 2, 0, 0])
    np.testing.assert_allclose(logo_direction(qx), [0, -1, 0], atol=1e-15)
    assert vector_angle(qx, Quat.identity()) == pytest.approx(math.pi / 2)


@given(quats, st.floats(-math.pi, math.pi))
def test_vector_angle_twist_invariant(q, twist):
    axis = logo_direction(q)
    twisted = Quat.from_rotvec(twist * axis) * q
    assert vector_angle(q, twisted) < 1e-7


@given(quats)
def test_matrix_to_quat_scalar_nonnegative(q):
    back = matrix_to_quat(quat_to_matrix(q))
    assert back.w >= 0
    assert geodesic_quat(q, back) < 1e-7


# --- conditional losses ---------------------------------------------------------


def test_loss_zero_on_match():
    t = PoseOutput((0.5, 0.5, 0.5, 0.5), 1.0)
    for norm in ("sq", "abs", "geodesic"):
        assert conditional_loss(t, t, norm) == 0.0


def test_loss_sign_ambiguity_is_zero():
    t = PoseOutput((0.5, -0.1, 0.7, 0.2), 1.0)
    o = PoseOutput(tuple(-v for v in t.rotation), 1.0)
    assert loss_sq(o, t) == 0.0
    assert loss_abs(o, t) == 0.0
    assert loss_geodesic(o, t) == 0.0


def test_loss_gate_hidden_target():
    # label -1 maps to t_v = 0; o_v = 1 contributes |1 - 0|
    t = PoseOutput((1, 0, 0, 0), -1.0)
    o = PoseOutput((0, 1, 0, 0), 1.0)
    assert t.gate == 0.0
    assert loss_abs(o, t) == 1.0
    assert loss_sq(o, t) == 1.0


@given(st.tuples(finite, finite, finite, finite), st.tuples(finite, finite, finite, finite), st.floats(-1, 1))
def test_hidden_target_ignores_rotation_entries(r1, r2, ov):
    t = PoseOutput((1, 0, 0, 0), -1.0)
    a = PoseOutput(r1, ov)
    b = PoseOutput(r2, ov)
    assert loss_sq(a, t) == loss_sq(b, t)
    assert loss_abs(a, t) == loss_abs(b, t)


@given(st.tuples(finite, finite, finite), st.tuples(finite, finite, finite), st.floats(-1, 1), st.floats(-1, 1))
def test_losses_nonnegative_and_sign_flip_invariant(r_o, r_t, ov, tv):
    o, t = PoseOutput(r_o, ov), PoseOutput(r_t, tv)
    neg = PoseOutput(tuple(-v for v in r_o), ov)
    for fn in (loss_sq, loss_abs):
        assert fn(o, t) >= 0
        assert fn(o, t) == fn(neg, t)


def test_visibility_clamped_and_mismatch_rejected():
    assert PoseOutput((0, 0, 0), 3.0).visibility == 1.0
    with pytest.raises(ValueError):
        loss_abs(PoseOutput((1, 0, 0, 0), 1), PoseOutput((0, 0, 0), 1))
    with pytest.raises(ValueError):
        conditional_loss(PoseOutput((0, 0, 0), 1), PoseOutput((0, 0, 0), 1), norm="l7")
