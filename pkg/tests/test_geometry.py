import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saginopt.geometry import (EulerAngles, Frame, ZeroVector, direction_angles,
                               forward_halfspace, identity_frame,
                               rotation_from_euler, to_global, to_local)

angles = st.floats(min_value=0.0, max_value=2.0 * np.pi - 1e-9)
coords = st.floats(min_value=-1e4, max_value=1e4)


def test_rotation_identity():
    r = rotation_from_euler(EulerAngles(0.0, 0.0, 0.0))
    np.testing.assert_allclose(r, np.eye(3), atol=1e-15)


def test_rotation_z_quarter_turn():
    r = rotation_from_euler(EulerAngles(0.0, 0.0, np.pi / 2))
    np.testing.assert_allclose(r @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    np.testing.assert_allclose(r @ [0, 1, 0], [-1, 0, 0], atol=1e-15)
    np.testing.assert_allclose(r @ [0, 0, 1], [0, 0, 1], atol=1e-15)


@given(angles, angles, angles)
def test_rotation_always_orthonormal(bx, by, bz):
    r = rotation_from_euler(EulerAngles(bx, by, bz))
    assert np.max(np.abs(r.T @ r - np.eye(3))) < 1e-9
    assert abs(np.linalg.det(r) - 1.0) < 1e-9


def test_to_local_identity_frame():
    np.testing.assert_allclose(to_local(identity_frame(), [1.0, 2.0, 3.0]),
                               [1.0, 2.0, 3.0])


def test_to_local_frame_origin():
    frame = Frame(np.eye(3), [5.0, -2.0, 7.0])
    np.testing.assert_allclose(to_local(frame, [5.0, -2.0, 7.0]), np.zeros(3),
                               atol=1e-12)


@settings(max_examples=100)
@given(angles, angles, angles, coords, coords, coords, coords, coords, coords)
def test_local_global_round_trip(bx, by, bz, tx, ty, tz, px, py, pz):
    frame = Frame(rotation_from_euler(EulerAngles(bx, by, bz)), [tx, ty, tz])
    p = np.array([px, py, pz])
    np.testing.assert_allclose(to_global(frame, to_local(frame, p)), p, atol=1e-9)


def test_direction_boresight():
    d = direction_angles(identity_frame(), [0.0, 0.0, 4.0])
    assert d.elevation == 0.0
    assert d.azimuth == 0.0


def test_direction_endfire_x():
    d = direction_angles(identity_frame(), [3.0, 0.0, 0.0])
    assert d.elevation == pytest.approx(np.pi / 2)
    assert d.azimuth == pytest.approx(0.0)


def test_direction_diagonal():
    d = direction_angles(identity_frame(), [1.0, 1.0, np.sqrt(2.0)])
    assert d.elevation == pytest.approx(np.pi / 4)
    assert d.azimuth == pytest.approx(np.pi / 4)


def test_direction_zero_vector_raises():
    frame = Frame(np.eye(3), [1.0, 1.0, 1.0])
    with pytest.raises(ZeroVector):
        direction_angles(frame, [1.0, 1.0, 1.0])


@settings(max_examples=100)
@given(angles, angles, angles, coords, coords, coords)
def test_direction_ranges(bx, by, bz, px, py, pz):
    frame = Frame(rotation_from_euler(EulerAngles(bx, by, bz)), np.zeros(3))
    p = np.array([px, py, pz])
    if np.linalg.norm(p) < 1e-6:
        return
    d = direction_angles(frame, p)
    assert 0.0 <= d.elevation <= np.pi / 2
    assert -np.pi <= d.azimuth <= np.pi


def test_halfspace_above():
    assert forward_halfspace(identity_frame(), [0.0, 0.0, 1.0])


def test_halfspace_below():
    assert not forward_halfspace(identity_frame(), [0.0, 0.0, -1.0])


def test_halfspace_flipped_frame():
    flipped = Frame(rotation_from_euler(EulerAngles(np.pi, 0.0, 0.0)), np.zeros(3))
    assert not forward_halfspace(flipped, [0.0, 0.0, 1.0])


def test_frame_validity_check():
    assert identity_frame().is_valid()
    assert not Frame(2.0 * np.eye(3), np.zeros(3)).is_valid()
    reflection = np.diag([1.0, 1.0, -1.0])
    assert not Frame(reflection, np.zeros(3)).is_valid()
