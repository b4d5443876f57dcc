"""Labeled depth frames and their projection into the world frame.

Frames pair a depth image (meters, 0 marks invalid pixels) with per-pixel
class labels (1-based, 0 marks unlabeled).  A pinhole camera model and a
rigid pose take each valid pixel to a world-frame point carrying its
label.  Frame sets round-trip through a manifest file that records the
raw binary image files, intrinsics and 4x4 pose matrices.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError

__all__ = [
    "CameraModel",
    "Pose",
    "LabeledFrame",
    "SemanticPointCloud",
    "project_labels",
    "write_frame_set",
    "read_frame_set",
]

_ORTHO_TOL = 1e-9


@dataclass(frozen=True)
class CameraModel:
    """Pinhole intrinsics in pixels."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise DomainError("focal lengths must be positive")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise DomainError("principal point must lie inside the image")
        if self.width <= 0 or self.height <= 0:
            raise DomainError("image dimensions must be positive")


@dataclass(frozen=True)
class Pose:
    """Rigid transform from camera frame to world frame."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float)
        if r.shape != (3, 3) or t.shape != (3,):
            raise DomainError("rotation must be 3x3 and translation length 3")
        if not np.all(np.isfinite(r)) or not np.all(np.isfinite(t)):
            raise DomainError("pose entries must be finite")
        if np.abs(r.T @ r - np.eye(3)).max() > _ORTHO_TOL:
            raise DomainError("rotation must be orthonormal within 1e-9")
        if np.linalg.det(r) < 0:
            raise DomainError("rotation must be proper (det +1)")
        r = r.copy()
        t = t.copy()
        r.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls):
        return cls(np.eye(3), np.zeros(3))

    def matrix(self):
        m = np.eye(4)
        m[:3, :3] = self.rotation
        m[:3, 3] = self.translation
        return m

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        if m.shape != (4, 4):
            raise DomainError("pose matrix must be 4x4")
        return cls(m[:3, :3], m[:3, 3])


@dataclass(frozen=True)
class LabeledFrame:
    """Depth image plus one-hot class labels and optional score maps.

    depth: (height, width) float32 meters, 0 = invalid.
    labels: (height, width) uint16, 1-based class index, 0 = unlabeled.
    scores: optional (height, width, k) float32 class scores.
    """

    depth: np.ndarray
    labels: np.ndarray
    scores: np.ndarray | None = None

    def __post_init__(self):
        depth = np.asarray(self.depth, dtype=np.float32)
        labels = np.asarray(self.labels, dtype=np.uint16)
        if depth.ndim != 2 or labels.shape != depth.shape:
            raise DomainError("depth and labels must be 2-D with matching shape")
        if np.any(depth < 0) or not np.all(np.isfinite(depth)):
            raise DomainError("depth must be finite and nonnegative")
        scores = self.scores
        if scores is not None:
            scores = np.asarray(scores, dtype=np.float32)
            if scores.shape[:2] != depth.shape:
                raise DomainError("scores must match the image shape")
        object.__setattr__(self, "depth", depth)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "scores", scores)

    @property
    def shape(self):
        return self.depth.shape


@dataclass(frozen=True)
class SemanticPointCloud:
    """World-frame points with 1-based class labels."""

    points: np.ndarray  # (n, 3) float
    labels: np.ndarray  # (n,) int

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 3)
        lab = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if pts.shape[0] != lab.shape[0]:
            raise DomainError("points and labels must have matching length")
        if not np.all(np.isfinite(pts)):
            raise DomainError("point coordinates must be finite")
        pts = pts.copy()
        lab = lab.copy()
        pts.flags.writeable = False
        lab.flags.writeable = False
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.points.shape[0]


def project_labels(frame: LabeledFrame, cam: CameraModel, pose: Pose, stride: int = 2) -> SemanticPointCloud:
    """Back-project labeled depth pixels to a world-frame point cloud.

    Pixels on the stride lattice with valid depth and a nonzero label map
    through the pinhole model ((u - cx) d / fx, (v - cy) d / fy, d) and the
    camera pose.  Invalid pixels are skipped silently.
    """
    if frame.shape != (cam.height, cam.width):
        raise DomainError(
            f"frame shape {frame.shape} does not match camera ({cam.height}, {cam.width})"
        )
    if not isinstance(stride, (int, np.integer)) or stride < 1:
        raise DomainError("stride must be a positive integer")
    v_idx = np.arange(0, cam.height, stride)
    u_idx = np.arange(0, cam.width, stride)
    depth = frame.depth[np.ix_(v_idx, u_idx)].astype(float)
    labels = frame.labels[np.ix_(v_idx, u_idx)].astype(np.int64)
    valid = (depth > 0) & (labels > 0)
    if not np.any(valid):
        return SemanticPointCloud(np.zeros((0, 3)), np.zeros(0, dtype=np.int64))
    uu, vv = np.meshgrid(u_idx, v_idx)
    d = depth[valid]
    u = uu[valid].astype(float)
    v = vv[valid].astype(float)
    cam_pts = np.column_stack([(u - cam.cx) * d / cam.fx, (v - cam.cy) * d / cam.fy, d])
    world = cam_pts @ pose.rotation.T + pose.translation
    return SemanticPointCloud(world, labels[valid])


def write_frame_set(out_dir, frames, cams, poses, class_names=None):
    """Write frames as raw binaries plus a manifest.

    Depth is row-major float32 meters, labels row-major uint16; the
    manifest lists per-frame files, intrinsics and 4x4 pose matrices.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, (frame, cam, pose) in enumerate(zip(frames, cams, poses)):
        depth_name = f"frame_{i:04d}_depth.bin"
        label_name = f"frame_{i:04d}_labels.bin"
        frame.depth.astype("<f4").tofile(out / depth_name)
        frame.labels.astype("<u2").tofile(out / label_name)
        entries.append(
            {
                "depth": depth_name,
                "labels": label_name,
                "camera": {
                    "fx": cam.fx, "fy": cam.fy, "cx": cam.cx, "cy": cam.cy,
                    "width": cam.width, "height": cam.height,
                },
                "pose": [[float(x) for x in row] for row in pose.matrix()],
            }
        )
    manifest = {"version": 1, "frames": entries}
    if class_names is not None:
        manifest["class_names"] = list(class_names)
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_frame_set(manifest_path):
    """Load (frames, cams, poses, class_names) from a manifest."""
    path = Path(manifest_path)
    manifest = json.loads(path.read_text())
    if manifest.get("version") != 1:
        raise DomainError(f"unsupported manifest version {manifest.get('version')!r}")
    frames, cams, poses = [], [], []
    for entry in manifest["frames"]:
        c = entry["camera"]
        cam = CameraModel(fx=c["fx"], fy=c["fy"], cx=c["cx"], cy=c["cy"],
                          width=int(c["width"]), height=int(c["height"]))
        depth = np.fromfile(path.parent / entry["depth"], dtype="<f4")
        labels = np.fromfile(path.parent / entry["labels"], dtype="<u2")
        expected = cam.height * cam.width
        if depth.size != expected or labels.size != expected:
            raise DomainError(f"frame file sizes do not match camera dims in {path}")
        frames.append(
            LabeledFrame(depth.reshape(cam.height, cam.width),
                         labels.reshape(cam.height, cam.width))
        )
        cams.append(cam)
        poses.append(Pose.from_matrix(np.array(entry["pose"])))
    return frames, cams, poses, manifest.get("class_names")
