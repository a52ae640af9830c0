"""Rotation, projection, viewpoint and file-format tests."""

import numpy as np
import pytest

from lumitrack import autodiff as ad
from lumitrack import geometry as geo
from lumitrack.autodiff import Tensor

from helpers import check_grad


def test_rodrigues_zero_is_identity():
    r = geo.rodrigues(np.zeros(3))
    assert np.allclose(r.data, np.eye(3), atol=1e-12)


def test_rodrigues_quarter_turn_about_z():
    r = geo.rodrigues([0.0, 0.0, np.pi / 2])
    assert np.allclose(r.data @ np.array([1.0, 0.0, 0.0]),
                       [0.0, 1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("seed", range(20))
def test_rodrigues_inverse_property(seed):
    rng = np.random.default_rng(seed)
    r = rng.normal(size=3)
    a = geo.rodrigues(r).data
    b = geo.rodrigues(-r).data
    assert np.abs(a @ b - np.eye(3)).max() < 1e-9


@pytest.mark.parametrize("seed", range(10))
def test_rodrigues_gradient_of_trace(seed):
    rng = np.random.default_rng(seed + 50)
    r0 = rng.normal(size=3)

    def build(r):
        m = geo.rodrigues(r)
        return ad.sum_(m * np.eye(3))       # trace

    check_grad(build, r0)


def test_rodrigues_gradient_near_zero():
    check_grad(lambda r: ad.sum_(geo.rodrigues(r) * np.ones((3, 3))),
               np.array([1e-8, -1e-8, 0.0]))


def test_rodrigues_matches_plain_numpy():
    rng = np.random.default_rng(3)
    for _ in range(10):
        r = rng.normal(size=3)
        assert np.allclose(geo.rodrigues(r).data, geo.rodrigues_matrix(r),
                           atol=1e-12)


def _frontal_camera(f=1000.0, cx=500.0, cy=500.0, size=(1000, 1000)):
    k = np.array([[f, 0, cx], [0, f, cy], [0, 0, 1.0]])
    return geo.Camera(k, np.eye(3), np.zeros(3), size)


def test_project_optical_axis_hits_principal_point():
    cam = _frontal_camera()
    pix, valid = geo.project(cam, np.array([[0.0, 0.0, 700.0]]))
    assert valid.all()
    assert np.allclose(pix.data, [[500.0, 500.0]])


def test_project_pinhole_example():
    cam = _frontal_camera()
    pix, _ = geo.project(cam, np.array([[0.1, 0.0, 1.0]]))
    assert np.allclose(pix.data, [[600.0, 500.0]])


def test_project_flags_non_positive_depth():
    cam = _frontal_camera()
    pts = np.array([[0.0, 0.0, 10.0], [0.0, 0.0, -5.0]])
    _, valid = geo.project(cam, pts)
    assert valid.tolist() == [True, False]


def _project_oracle(cam, pts):
    """Independent projection: homogeneous 3x4 matrix, then divide."""
    p = cam.intrinsics @ np.hstack([cam.rotation,
                                    cam.translation.reshape(3, 1)])
    homo = np.hstack([pts, np.ones((len(pts), 1))]) @ p.T
    return homo[:, :2] / homo[:, 2:3]


@pytest.mark.parametrize("seed", range(20))
def test_project_matches_independent_oracle(seed):
    rng = np.random.default_rng(seed)
    axis = rng.normal(size=3) * 0.3
    cam = geo.Camera(
        np.array([[900.0, 1.3, 320.0], [0, 880.0, 240.0], [0, 0, 1]]),
        geo.rodrigues_matrix(axis),
        rng.normal(size=3) * 10 + np.array([0, 0, 900.0]),
        (640, 480),
    )
    pts = rng.normal(size=(15, 3)) * 80
    pix, valid = geo.project(cam, pts)
    want = _project_oracle(cam, pts)
    assert valid.all()
    assert np.abs(pix.data - want).max() < 1e-9


def test_project_scale_invariant_along_ray():
    cam = _frontal_camera()
    d = np.array([0.2, -0.1, 1.0])
    pix_all = []
    for lam in (0.5, 1.0, 3.0, 10.0):
        pix, _ = geo.project(cam, (lam * d).reshape(1, 3) * 100)
        pix_all.append(pix.data[0])
    assert np.ptp(np.array(pix_all), axis=0).max() < 1e-9


def test_project_gradient():
    cam = _frontal_camera()
    rng = np.random.default_rng(9)
    pts = rng.normal(size=(4, 3)) * 50 + np.array([0, 0, 800.0])

    def build(p):
        pix, _ = geo.project(cam, p)
        return ad.sum_(pix * pix) * 1e-6

    check_grad(build, pts, h=1e-4, tol=1e-4)


def test_viewpoint_frontal_camera_unrotated_head():
    cam = geo.look_at_camera([0, 0, 1000.0], [0, 0, 0], [0, 1, 0],
                             800.0, (256, 256))
    v = geo.viewpoint_vector(cam, np.zeros(3), np.zeros(3))
    assert np.allclose(v.data, [0, 0, 1.0], atol=1e-9)


def test_viewpoint_counter_rotates_with_yaw():
    cam = geo.look_at_camera([0, 0, 1000.0], [0, 0, 0], [0, 1, 0],
                             800.0, (256, 256))
    theta = 0.3
    r = np.array([0.0, theta, 0.0])       # yaw about +y
    v = geo.viewpoint_vector(cam, r, np.zeros(3))
    want = geo.rodrigues_matrix(-r) @ np.array([0, 0, 1.0])
    assert np.allclose(v.data, want, atol=1e-9)


@pytest.mark.parametrize("seed", range(10))
def test_viewpoint_unit_norm(seed):
    rng = np.random.default_rng(seed)
    cam = geo.look_at_camera(rng.normal(size=3) * 200 + [0, 0, 900],
                             [0, 0, 0], [0, 1, 0], 800.0, (128, 128))
    v = geo.viewpoint_vector(cam, rng.normal(size=3) * 0.5,
                             rng.normal(size=3) * 30)
    assert abs(np.linalg.norm(v.data) - 1.0) < 1e-9


def test_viewpoint_invariant_to_global_rigid_motion():
    rng = np.random.default_rng(4)
    cam = geo.look_at_camera([100, 50, 900.0], [0, 0, 0], [0, 1, 0],
                             800.0, (128, 128))
    r_h = rng.normal(size=3) * 0.4
    t_h = rng.normal(size=3) * 20
    v0 = geo.viewpoint_vector(cam, r_h, t_h).data

    # apply a global rotation g (about origin) + shift to head and camera
    g = geo.rodrigues_matrix(rng.normal(size=3) * 0.7)
    shift = rng.normal(size=3) * 100
    rot_new = cam.rotation @ g.T
    center_new = g @ cam.center() + shift
    cam2 = geo.Camera(cam.intrinsics, rot_new, -rot_new @ center_new,
                      cam.image_size)
    # composed head rotation g*R(r_h); axis-angle of the product
    from scipy.spatial.transform import Rotation
    r_new = Rotation.from_matrix(g @ geo.rodrigues_matrix(r_h)).as_rotvec()
    t_new = g @ t_h + shift
    v1 = geo.viewpoint_vector(cam2, r_new, t_new).data
    assert np.allclose(v0, v1, atol=1e-9)


def test_viewpoint_camera_at_center_raises():
    cam = geo.look_at_camera([0, 0, 500.0], [0, 0, 0], [0, 1, 0],
                             800.0, (64, 64))
    with pytest.raises(ValueError):
        geo.viewpoint_vector(cam, np.zeros(3), np.array([0, 0, 500.0]))


def test_viewpoint_gradient_wrt_pose():
    cam = geo.look_at_camera([200, 100, 950.0], [0, 0, 0], [0, 1, 0],
                             800.0, (128, 128))

    def build(rt):
        v = geo.viewpoint_vector(cam, rt[0:3], rt[3:6] * 100.0)
        return ad.sum_(v * np.array([0.3, -0.2, 1.0]))

    check_grad(build, np.array([0.2, -0.1, 0.3, 0.1, 0.2, -0.1]))


def test_mesh_roundtrip(tmp_path):
    verts = np.array([[0, 0, 0], [1, 0, 0], [0, 1, 0], [1, 1, 0.5]],
                     dtype=float)
    faces = np.array([[0, 1, 2], [1, 3, 2]])
    uv = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    mesh = geo.Mesh(verts, faces, uv, np.array([0, 3]))
    geo.save_mesh(tmp_path / "m.obj", mesh)
    geo.save_landmark_ids(tmp_path / "m.landmarks.txt", mesh.landmark_vertex_ids)
    back = geo.load_mesh(tmp_path / "m.obj", tmp_path / "m.landmarks.txt")
    assert np.allclose(back.vertices, verts)
    assert np.array_equal(back.faces, faces)
    assert np.allclose(back.uv, uv)
    assert np.array_equal(back.landmark_vertex_ids, [0, 3])


def test_rig_roundtrip(tmp_path):
    cams = [
        geo.look_at_camera([0, 0, 1000.0], [0, 0, 0], [0, 1, 0], 800.0,
                           (256, 256), name="front"),
        geo.look_at_camera([500, 100, 900.0], [0, 0, 0], [0, 1, 0], 700.0,
                           (320, 240), name="side"),
    ]
    geo.save_rig(tmp_path / "rig.txt", cams)
    back = geo.load_rig(tmp_path / "rig.txt")
    for a, b in zip(cams, back):
        assert a.name == b.name
        assert a.image_size == b.image_size
        assert np.allclose(a.intrinsics, b.intrinsics)
        assert np.allclose(a.rotation, b.rotation, atol=1e-9)
        assert np.allclose(a.translation, b.translation, atol=1e-9)


def test_camera_validation_rejects_bad_rotation():
    cam = geo.Camera(np.eye(3) * 100, np.eye(3) * 1.001, np.zeros(3), (64, 64))
    with pytest.raises(ValueError):
        cam.validate()
