"""Synthetic desk-scale scenes and the confusion-matrix label sampler.

A scene is a flat world plane tiled into grid cells, each holding one true
class, observed by an overhead pinhole camera whose pixels map one-to-one
onto cell centers.  Labels are drawn per pixel from the confusion-matrix
row of the pixel's true class, which stands in for a segmentation network
whose error statistics are known.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np
import yaml

from ..errors import ConfigError, DomainError
from ..frames import CameraModel, LabeledFrame, Pose, project_labels
from ..property_model import PropertyTable

__all__ = [
    "ConfusionMatrix",
    "SceneSpec",
    "MeasurementSpec",
    "ScenarioConfig",
    "SceneData",
    "generate_scene",
    "load_config",
    "default_correction_config",
    "default_simulate_config",
    "default_gait_config",
    "default_door_config",
]

CONFIG_VERSION = 1


@dataclass(frozen=True)
class ConfusionMatrix:
    """Row-stochastic k x k matrix; rows are true classes, columns predicted."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DomainError("confusion matrix must be square")
        if np.any(m < 0) or np.any(m > 1):
            raise DomainError("confusion entries must lie in [0, 1]")
        if np.abs(m.sum(axis=1) - 1.0).max() > 1e-9:
            raise DomainError("confusion rows must sum to 1 within 1e-9")
        m = m.copy()
        m.flags.writeable = False
        object.__setattr__(self, "matrix", m)

    @property
    def k(self):
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, k):
        return cls(np.eye(k))

    @classmethod
    def uniform_noise(cls, k, accuracy):
        """Diagonal ``accuracy``, remaining mass spread over other classes."""
        if not 0.0 <= accuracy <= 1.0:
            raise DomainError("accuracy must lie in [0, 1]")
        if k == 1:
            return cls(np.ones((1, 1)))
        off = (1.0 - accuracy) / (k - 1)
        m = np.full((k, k), off)
        np.fill_diagonal(m, accuracy)
        return cls(m)

    def override_row(self, true_index, predicted_index):
        """Deterministically map one true class to one predicted class."""
        m = self.matrix.copy()
        m[true_index - 1] = 0.0
        m[true_index - 1, predicted_index - 1] = 1.0
        return ConfusionMatrix(m)

    def sample(self, true_labels, rng):
        """Draw predicted labels (1-based) for 1-based true labels."""
        true_labels = np.asarray(true_labels)
        out = np.empty(true_labels.shape, dtype=np.uint16)
        cum = np.cumsum(self.matrix, axis=1)
        for c in range(1, self.k + 1):
            mask = true_labels == c
            n = int(mask.sum())
            if n == 0:
                continue
            draws = rng.random(n)
            out[mask] = np.searchsorted(cum[c - 1], draws, side="right") + 1
        return np.minimum(out, self.k)


@dataclass(frozen=True)
class SceneSpec:
    rows: int = 8
    cols: int = 8
    cell_size: float = 0.25
    camera_height: float = 2.0
    frames: int = 4
    stride: int = 1
    default_class: str = "Ice"
    patches: tuple = ()  # (class_name, r0, c0, r1, c1) half-open rectangles

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("rows and cols must be positive", "scene")
        if self.cell_size <= 0 or self.camera_height <= 0:
            raise ConfigError("cell_size and camera_height must be positive", "scene")
        if self.frames < 0 or self.stride < 1:
            raise ConfigError("frames must be >= 0 and stride >= 1", "scene")


@dataclass(frozen=True)
class MeasurementSpec:
    count: int = 1
    values: tuple = ()  # explicit psi values; empty means sample from truth
    source: str = "simulated"

    def __post_init__(self):
        if self.count < 0:
            raise ConfigError("count must be nonnegative", "measurements")


@dataclass(frozen=True)
class ScenarioConfig:
    kind: str = "correct"
    seed: int = 0
    mode: str = "corrected"
    trials: int = 1000
    table_name: str = "friction_rubber"
    table_path: str | None = None
    classes: tuple = ()  # subset of table classes; empty = all
    scene: SceneSpec = field(default_factory=SceneSpec)
    confusion_kind: str = "identity"  # identity | uniform_noise | matrix
    confusion_accuracy: float = 0.9
    confusion_rows: tuple = ()
    confusion_force: tuple = ()  # (true_class_name, predicted_class_name) pairs
    measurements: MeasurementSpec = field(default_factory=MeasurementSpec)
    gait_threshold: float = 0.25
    psi_max: float = 2.0
    c_const: float = 40.0
    variance_is_sigma: bool = False  # door table: read sigma column as variance^.5 vs sigma=value

    def __post_init__(self):
        if self.kind not in ("simulate", "correct", "gait", "door"):
            raise ConfigError(f"unknown kind {self.kind!r}", "kind")
        if self.mode not in ("paper", "corrected"):
            raise ConfigError(f"mode must be paper or corrected, got {self.mode!r}", "mode")
        if self.trials < 1:
            raise ConfigError("trials must be positive", "trials")

    # -- table -----------------------------------------------------------

    def load_table(self) -> PropertyTable:
        if self.table_path is not None:
            table = PropertyTable.from_csv(self.table_path)
        else:
            table = PropertyTable.bundled(self.table_name)
        if self.classes:
            table = table.subset(self.classes)
        if self.variance_is_sigma:
            # alternative units reading: the magnitude stored as the
            # variance is actually a standard deviation (for the bundled
            # door table, "10 N" read as sigma = 10 N, so variance 100)
            from ..conjugate import GaussianParams

            table = PropertyTable(
                table.names,
                tuple(GaussianParams(p.mu, p.var**2) for p in table.params),
                table.property_name,
                table.contact_material,
            )
        return table

    def confusion(self, table: PropertyTable) -> ConfusionMatrix:
        k = table.k
        if self.confusion_kind == "identity":
            cm = ConfusionMatrix.identity(k)
        elif self.confusion_kind == "uniform_noise":
            cm = ConfusionMatrix.uniform_noise(k, self.confusion_accuracy)
        elif self.confusion_kind == "matrix":
            cm = ConfusionMatrix(np.array(self.confusion_rows, dtype=float))
            if cm.k != k:
                raise ConfigError("confusion matrix size does not match class count", "confusion.rows")
        else:
            raise ConfigError(f"unknown confusion kind {self.confusion_kind!r}", "confusion.kind")
        for true_name, pred_name in self.confusion_force:
            cm = cm.override_row(table.index_of(true_name), table.index_of(pred_name))
        return cm

    # -- serialization ---------------------------------------------------

    def to_dict(self):
        return {
            "version": CONFIG_VERSION,
            "kind": self.kind,
            "seed": self.seed,
            "mode": self.mode,
            "trials": self.trials,
            "table": {
                "bundled": self.table_name,
                "path": self.table_path,
                "classes": list(self.classes),
                "variance_is_sigma": self.variance_is_sigma,
            },
            "scene": {
                "rows": self.scene.rows,
                "cols": self.scene.cols,
                "cell_size": self.scene.cell_size,
                "camera_height": self.scene.camera_height,
                "frames": self.scene.frames,
                "stride": self.scene.stride,
                "default_class": self.scene.default_class,
                "patches": [list(p) for p in self.scene.patches],
            },
            "confusion": {
                "kind": self.confusion_kind,
                "accuracy": self.confusion_accuracy,
                "rows": [list(r) for r in self.confusion_rows],
                "force": [list(p) for p in self.confusion_force],
            },
            "measurements": {
                "count": self.measurements.count,
                "values": list(self.measurements.values),
                "source": self.measurements.source,
            },
            "thresholds": {"gait": self.gait_threshold},
            "psi_max": self.psi_max,
            "c_const": self.c_const,
        }

    def content_hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canon.encode()).hexdigest()

    @classmethod
    def from_dict(cls, doc):
        def get(d, key, default, path):
            if not isinstance(d, dict):
                raise ConfigError("expected a mapping", path)
            return d.get(key, default)

        if not isinstance(doc, dict):
            raise ConfigError("config root must be a mapping", "")
        version = doc.get("version", CONFIG_VERSION)
        if version != CONFIG_VERSION:
            raise ConfigError(f"unsupported config version {version!r}", "version")
        table = doc.get("table", {}) or {}
        scene_doc = doc.get("scene", {}) or {}
        confusion = doc.get("confusion", {}) or {}
        meas = doc.get("measurements", {}) or {}
        thresholds = doc.get("thresholds", {}) or {}
        try:
            scene = SceneSpec(
                rows=int(get(scene_doc, "rows", 8, "scene.rows")),
                cols=int(get(scene_doc, "cols", 8, "scene.cols")),
                cell_size=float(get(scene_doc, "cell_size", 0.25, "scene.cell_size")),
                camera_height=float(get(scene_doc, "camera_height", 2.0, "scene.camera_height")),
                frames=int(get(scene_doc, "frames", 4, "scene.frames")),
                stride=int(get(scene_doc, "stride", 1, "scene.stride")),
                default_class=str(get(scene_doc, "default_class", "Ice", "scene.default_class")),
                patches=tuple(tuple(p) for p in get(scene_doc, "patches", [], "scene.patches")),
            )
            return cls(
                kind=str(doc.get("kind", "correct")),
                seed=int(doc.get("seed", 0)),
                mode=str(doc.get("mode", "corrected")),
                trials=int(doc.get("trials", 1000)),
                table_name=str(get(table, "bundled", "friction_rubber", "table.bundled")),
                table_path=get(table, "path", None, "table.path"),
                classes=tuple(get(table, "classes", [], "table.classes")),
                variance_is_sigma=bool(get(table, "variance_is_sigma", False, "table.variance_is_sigma")),
                scene=scene,
                confusion_kind=str(get(confusion, "kind", "identity", "confusion.kind")),
                confusion_accuracy=float(get(confusion, "accuracy", 0.9, "confusion.accuracy")),
                confusion_rows=tuple(tuple(r) for r in get(confusion, "rows", [], "confusion.rows")),
                confusion_force=tuple(tuple(p) for p in get(confusion, "force", [], "confusion.force")),
                measurements=MeasurementSpec(
                    count=int(get(meas, "count", 1, "measurements.count")),
                    values=tuple(get(meas, "values", [], "measurements.values")),
                    source=str(get(meas, "source", "simulated", "measurements.source")),
                ),
                gait_threshold=float(get(thresholds, "gait", 0.25, "thresholds.gait")),
                psi_max=float(doc.get("psi_max", 2.0)),
                c_const=float(doc.get("c_const", 40.0)),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc), "") from exc


def load_config(path) -> ScenarioConfig:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    return ScenarioConfig.from_dict(doc)


def default_correction_config(seed=0, trials=1000, mode="corrected"):
    """Snow-over-ice misclassification scene: truth is ice, vision labels
    it snow with certainty, one simulated friction measurement corrects."""
    return ScenarioConfig(
        kind="correct",
        seed=seed,
        mode=mode,
        trials=trials,
        classes=("Snow", "Ice"),
        scene=SceneSpec(rows=8, cols=8, frames=4, default_class="Ice"),
        confusion_kind="identity",
        confusion_force=(("Ice", "Snow"),),
        measurements=MeasurementSpec(count=1),
    )


def default_simulate_config(seed=0, mode="corrected"):
    return ScenarioConfig(
        kind="simulate",
        seed=seed,
        mode=mode,
        trials=1,
        classes=("Snow", "Ice"),
        scene=SceneSpec(
            rows=8, cols=8, frames=4, default_class="Ice",
            patches=(("Snow", 0, 0, 8, 4),),
        ),
        confusion_kind="uniform_noise",
        confusion_accuracy=0.85,
        measurements=MeasurementSpec(count=1),
    )


def default_gait_config(seed=0, mode="corrected"):
    return ScenarioConfig(
        kind="gait",
        seed=seed,
        mode=mode,
        trials=1,
        classes=("Snow", "Ice"),
        measurements=MeasurementSpec(count=3, values=(0.139, 0.156, 0.628)),
    )


def default_door_config(seed=0, mode="corrected"):
    return ScenarioConfig(
        kind="door",
        seed=seed,
        mode=mode,
        trials=1,
        table_name="door_affordance",
        measurements=MeasurementSpec(count=1, values=(57.0,)),
        psi_max=200.0,
    )


@dataclass(frozen=True)
class SceneData:
    truth: np.ndarray  # (rows, cols) 1-based class map
    frames: tuple
    cam: CameraModel
    poses: tuple
    cell_size: float

    @property
    def shape(self):
        return self.truth.shape


def _truth_layout(spec: SceneSpec, table: PropertyTable) -> np.ndarray:
    truth = np.full((spec.rows, spec.cols), table.index_of(spec.default_class), dtype=np.int64)
    for patch in spec.patches:
        name, r0, c0, r1, c1 = patch
        if not (0 <= r0 < r1 <= spec.rows and 0 <= c0 < c1 <= spec.cols):
            raise ConfigError(f"patch {patch!r} out of bounds", "scene.patches")
        truth[int(r0):int(r1), int(c0):int(c1)] = table.index_of(str(name))
    return truth


def _overhead_camera(spec: SceneSpec):
    f = spec.camera_height / spec.cell_size
    cam = CameraModel(
        fx=f, fy=f,
        cx=spec.cols / 2.0 - 0.5, cy=spec.rows / 2.0 - 0.5,
        width=spec.cols, height=spec.rows,
    )
    # camera looks straight down; pixel (u, v) lands on the center of
    # grid cell (rows - 1 - v, u)
    rot = np.array([[1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]])
    t = np.array([
        (spec.cols / 2.0) * spec.cell_size,
        (spec.rows / 2.0) * spec.cell_size,
        spec.camera_height,
    ])
    return cam, Pose(rot, t)


def generate_scene(config: ScenarioConfig, rng) -> SceneData:
    """Truth layout plus a stream of confusion-sampled labeled frames.

    Frame labels are rendered through the actual camera geometry: each
    pixel is back-projected to the plane, the true class is read from the
    layout, and the emitted label is drawn from that class's confusion
    row.  Deterministic given (config, rng state).
    """
    table = config.load_table()
    spec = config.scene
    truth = _truth_layout(spec, table)
    cam, pose = _overhead_camera(spec)
    confusion = config.confusion(table)

    # map each pixel to its grid cell once
    probe = LabeledFrame(
        np.full((spec.rows, spec.cols), spec.camera_height, dtype=np.float32),
        np.ones((spec.rows, spec.cols), dtype=np.uint16),
    )
    cloud = project_labels(probe, cam, pose, stride=1)
    cells = np.floor(cloud.points[:, :2] / spec.cell_size).astype(np.int64)
    pixel_truth = truth[cells[:, 1], cells[:, 0]].reshape(spec.rows, spec.cols)

    frames = []
    for _ in range(spec.frames):
        labels = confusion.sample(pixel_truth.reshape(-1), rng).reshape(spec.rows, spec.cols)
        frames.append(
            LabeledFrame(
                np.full((spec.rows, spec.cols), spec.camera_height, dtype=np.float32),
                labels.astype(np.uint16),
            )
        )
    return SceneData(
        truth=truth,
        frames=tuple(frames),
        cam=cam,
        poses=tuple(pose for _ in frames),
        cell_size=spec.cell_size,
    )
