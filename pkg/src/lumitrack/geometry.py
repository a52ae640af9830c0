"""Mesh, camera and rigid-pose geometry.

Conventions:
  - world units are millimeters; the default synthetic rig sits ~1000 mm out
  - head-local frame: +z out of the face, +y up, origin at the neutral mesh
    centroid
  - rotations are axis-angle 3-vectors (Rodrigues)
  - pixel coordinates are continuous; u = fx*x/z + cx
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor


@dataclass
class Mesh:
    vertices: np.ndarray              # (V, 3) float, mm
    faces: np.ndarray                 # (F, 3) int
    uv: np.ndarray                    # (V, 2) in [0, 1]
    landmark_vertex_ids: np.ndarray = field(
        default_factory=lambda: np.zeros(0, dtype=int))

    def validate(self):
        v = len(self.vertices)
        if self.faces.size and self.faces.max() >= v:
            raise ValueError("face index out of range")
        if self.uv.min() < -1e-9 or self.uv.max() > 1 + 1e-9:
            raise ValueError("uv coordinates must lie in [0,1]")
        ids = np.asarray(self.landmark_vertex_ids)
        if len(np.unique(ids)) != len(ids) or (ids.size and ids.max() >= v):
            raise ValueError("landmark vertex ids must be distinct and < V")

    def centroid(self):
        return self.vertices.mean(axis=0)


@dataclass
class Camera:
    intrinsics: np.ndarray            # (3, 3) upper-triangular
    rotation: np.ndarray              # (3, 3) world -> camera
    translation: np.ndarray           # (3,)
    image_size: tuple                 # (W, H) pixels
    name: str = "cam"

    def validate(self, tol=1e-9):
        k = self.intrinsics
        if abs(k[1, 0]) > tol or abs(k[2, 0]) > tol or abs(k[2, 1]) > tol:
            raise ValueError("intrinsics must be upper-triangular")
        if k[0, 0] <= 0 or k[1, 1] <= 0:
            raise ValueError("focal lengths must be positive")
        r = self.rotation
        if np.abs(r @ r.T - np.eye(3)).max() > 1e-6:
            raise ValueError("extrinsic rotation is not orthonormal")
        if np.linalg.det(r) < 0:
            raise ValueError("extrinsic rotation must have det +1")

    def center(self):
        """Camera center in world coordinates."""
        return -self.rotation.T @ self.translation


@dataclass
class RigidPose:
    r: np.ndarray                     # axis-angle (3,), radians
    t: np.ndarray                     # translation (3,), mm


@dataclass
class HeadPose:
    """Per-view conditioning: rigid rotation + unit viewpoint direction."""

    r: np.ndarray
    v_view: np.ndarray

    def vector(self):
        return np.concatenate([self.r, self.v_view])


# ---- rotations ---------------------------------------------------------------


def rodrigues(r):
    """Axis-angle (3,) -> rotation matrix (3,3), differentiable in r.

    Uses the series expansion of sin(t)/t and (1-cos t)/t^2 below t^2 = 1e-12
    so the map stays smooth through r = 0.
    """
    r = ad.as_tensor(r)
    t2 = ad.dot(r, r).reshape(1)
    small = t2.data < 1e-12
    t2_safe = ad.where(small, ad.as_tensor(np.ones(1)), t2)
    theta = ad.sqrt(t2_safe)
    a_exact = ad.sin(theta) / theta
    b_exact = (1.0 - ad.cos(theta)) / t2_safe
    a_series = 1.0 - t2 / 6.0 + t2 * t2 / 120.0
    b_series = 0.5 - t2 / 24.0 + t2 * t2 / 720.0
    a = ad.where(small, a_series, a_exact).reshape(1, 1)
    b = ad.where(small, b_series, b_exact).reshape(1, 1)

    zero = Tensor(np.zeros(1))
    x, y, z = r[0:1], r[1:2], r[2:3]
    k = ad.concat([zero, -z, y, z, zero, -x, -y, x, zero]).reshape(3, 3)
    eye = Tensor(np.eye(3))
    return eye + a * k + b * (k @ k)


def rodrigues_matrix(r):
    """Plain-numpy Rodrigues for non-differentiated paths."""
    r = np.asarray(r, dtype=np.float64)
    theta = np.linalg.norm(r)
    if theta < 1e-9:
        k = _skew(r)
        return np.eye(3) + k
    k = _skew(r / theta)
    return (np.eye(3) + np.sin(theta) * k
            + (1.0 - np.cos(theta)) * (k @ k))


def _skew(v):
    return np.array([[0, -v[2], v[1]],
                     [v[2], 0, -v[0]],
                     [-v[1], v[0], 0]], dtype=np.float64)


# ---- projection ----------------------------------------------------------------


MIN_DEPTH = 1e-3  # mm; points at or behind the camera are flagged invalid


def project(cam: Camera, points_world):
    """Pinhole projection of (N,3) world points.

    Returns (pixels, valid): an (N,2) tensor of continuous pixel coordinates
    and a boolean validity array (positive camera-space depth). Invalid
    points get clamped-depth coordinates and must be excluded from losses.
    """
    pts = ad.as_tensor(points_world)
    rot = Tensor(cam.rotation)
    trans = Tensor(cam.translation.reshape(1, 3))
    xc = pts @ ad.transpose(rot) + trans
    valid = xc.data[:, 2] > MIN_DEPTH
    z = ad.clamp_min(xc[:, 2], MIN_DEPTH)
    k = cam.intrinsics
    u = (k[0, 0] * xc[:, 0] + k[0, 1] * xc[:, 1]) / z + k[0, 2]
    v = (k[1, 1] * xc[:, 1]) / z + k[1, 2]
    return ad.stack([u, v], axis=1), valid


def camera_depths(cam: Camera, points_world: np.ndarray):
    """Camera-space z of (N,3) world points (plain numpy, visibility only)."""
    return points_world @ cam.rotation.T[:, 2] + cam.translation[2]


def pose_vertices(vertices, pose_r, pose_t):
    """Apply rigid pose to (V,3) vertices; differentiable in all inputs."""
    rot = rodrigues(pose_r)
    out = ad.as_tensor(vertices) @ ad.transpose(rot)
    return out + ad.as_tensor(pose_t).reshape(1, 3)


def viewpoint_vector(cam: Camera, pose_r, pose_t, head_center=None):
    """Unit direction from the head center to the camera, in head frame.

    The head center is the posed neutral-mesh centroid (pass `head_center`
    as its rest-frame position; defaults to the origin). Differentiable in
    the pose.
    """
    rot = rodrigues(pose_r)
    t = ad.as_tensor(pose_t).reshape(3, 1)
    if head_center is None:
        center = t
    else:
        c0 = ad.as_tensor(np.asarray(head_center).reshape(3, 1))
        center = rot @ c0 + t
    cam_c = Tensor(cam.center().reshape(3, 1))
    d_world = cam_c - center
    n2 = ad.sum_(d_world * d_world)
    if n2.item() < 1e-12:
        raise ValueError("camera coincides with the head center")
    d_head = ad.transpose(rot) @ d_world
    return (d_head / ad.sqrt(n2)).reshape(3)


# ---- mesh file IO ---------------------------------------------------------------


def save_mesh(path, mesh: Mesh):
    """Plain-text mesh: `v x y z`, `vt u v`, `f i/i j/j k/k` (1-based)."""
    with open(path, "w") as f:
        for p in mesh.vertices:
            f.write(f"v {p[0]:.8g} {p[1]:.8g} {p[2]:.8g}\n")
        for t in mesh.uv:
            f.write(f"vt {t[0]:.8g} {t[1]:.8g}\n")
        for tri in mesh.faces:
            i, j, k = tri + 1
            f.write(f"f {i}/{i} {j}/{j} {k}/{k}\n")


def load_mesh(path, landmarks_path=None) -> Mesh:
    verts, uvs, faces = [], [], []
    uv_of_vertex = {}
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "vt":
                uvs.append([float(x) for x in parts[1:3]])
            elif parts[0] == "f":
                idx = []
                for tok in parts[1:4]:
                    fields = tok.split("/")
                    vi = int(fields[0]) - 1
                    idx.append(vi)
                    if len(fields) > 1 and fields[1]:
                        uv_of_vertex[vi] = int(fields[1]) - 1
                faces.append(idx)
    vertices = np.array(verts, dtype=np.float64)
    uvs = np.array(uvs, dtype=np.float64) if uvs else np.zeros((0, 2))
    uv = np.zeros((len(vertices), 2))
    if len(uvs) == len(vertices) and not uv_of_vertex:
        uv = uvs
    else:
        for vi, ti in uv_of_vertex.items():
            uv[vi] = uvs[ti]
    lm = np.zeros(0, dtype=int)
    if landmarks_path is not None:
        lm = np.loadtxt(landmarks_path, dtype=int, ndmin=1)
    mesh = Mesh(vertices, np.array(faces, dtype=np.int64), uv, lm)
    mesh.validate()
    return mesh


def save_landmark_ids(path, ids):
    np.savetxt(path, np.asarray(ids, dtype=int), fmt="%d")


# ---- camera rig IO ----------------------------------------------------------------


def save_rig(path, cameras):
    with open(path, "w") as f:
        for cam in cameras:
            f.write(f"camera {cam.name}\n")
            f.write(f"size {cam.image_size[0]} {cam.image_size[1]}\n")
            f.write("intrinsics " + " ".join(
                f"{x:.10g}" for x in cam.intrinsics.ravel()) + "\n")
            ext = np.concatenate([cam.rotation.ravel(), cam.translation])
            f.write("extrinsics " + " ".join(f"{x:.10g}" for x in ext) + "\n")


def load_rig(path):
    cams = []
    cur = None
    with open(path) as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "camera":
                cur = {"name": parts[1]}
                cams.append(cur)
            elif parts[0] == "size":
                cur["size"] = (int(parts[1]), int(parts[2]))
            elif parts[0] == "intrinsics":
                cur["k"] = np.array([float(x) for x in parts[1:10]]).reshape(3, 3)
            elif parts[0] == "extrinsics":
                vals = [float(x) for x in parts[1:13]]
                cur["r"] = np.array(vals[:9]).reshape(3, 3)
                cur["t"] = np.array(vals[9:12])
    out = []
    for c in cams:
        cam = Camera(c["k"], c["r"], c["t"], c["size"], name=c["name"])
        cam.validate()
        out.append(cam)
    return out


def look_at_camera(position, target, up, focal, image_size, name="cam"):
    """Build a camera at `position` looking at `target` (world, mm)."""
    position = np.asarray(position, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    fwd = target - position
    fwd = fwd / np.linalg.norm(fwd)
    up = np.asarray(up, dtype=np.float64)
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    down = np.cross(fwd, right)
    rot = np.stack([right, down, fwd])          # world -> camera rows
    trans = -rot @ position
    w, h = image_size
    k = np.array([[focal, 0.0, w / 2.0],
                  [0.0, focal, h / 2.0],
                  [0.0, 0.0, 1.0]])
    cam = Camera(k, rot, trans, (w, h), name=name)
    cam.validate()
    return cam
