"""Dataset container, classifier training/prediction and the model artifact."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from ..errors import ArtifactError
from ..features import CLASSES
from .models import GaussianNaiveBayes, KNearestNeighbors, OneVsRestLogistic
from .svm import OneVsRestSVM
from .trees import GradientBoosting, RandomForest

KINDS = ("KNN", "NB", "SVM", "GBDT", "RF", "LR")

DEFAULT_HYPERPARAMS = {
    "KNN": {"k": 5},
    "NB": {"var_smoothing": 1e-9},
    "SVM": {"C": 1.0, "gamma": None, "tol": 1e-3, "max_iter": None},
    "LR": {"l2": 1.0, "tol": 1e-6, "max_iter": 100},
    "RF": {"n_trees": 100, "max_features": "sqrt", "bootstrap": True,
           "max_depth": None, "min_samples_leaf": 1},
    "GBDT": {"n_estimators": 100, "max_depth": 3, "learning_rate": 0.1, "min_samples_leaf": 1},
}

_MODEL_TYPES = {
    "KNN": KNearestNeighbors,
    "NB": GaussianNaiveBayes,
    "SVM": OneVsRestSVM,
    "LR": OneVsRestLogistic,
    "RF": RandomForest,
    "GBDT": GradientBoosting,
}

ARTIFACT_FORMAT = "windclime-model"
ARTIFACT_VERSION = 1


@dataclass
class Dataset:
    """Feature rows with string labels drawn from ``classes``."""

    X: np.ndarray
    labels: list
    ids: list = field(default_factory=list)
    classes: tuple = CLASSES
    station_id: str = ""

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.ndim != 2:
            raise ValueError("X must be 2-D")
        self.labels = list(self.labels)
        if len(self.labels) != len(self.X):
            raise ValueError("X and labels differ in length")
        bad = sorted(set(self.labels) - set(self.classes))
        if bad:
            raise ValueError(f"labels {bad} not in class set {self.classes}")
        if not self.ids:
            self.ids = [str(i) for i in range(len(self.X))]

    def __len__(self):
        return len(self.X)

    @property
    def y(self) -> np.ndarray:
        index = {c: i for i, c in enumerate(self.classes)}
        return np.array([index[l] for l in self.labels], dtype=np.int64)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.X[rows], [self.labels[i] for i in rows],
                       [self.ids[i] for i in rows], self.classes, self.station_id)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.X).tobytes())
        h.update("\n".join(self.labels).encode())
        return h.hexdigest()


@dataclass
class TrainedClassifier:
    kind: str
    hyperparams: dict
    classes: tuple
    trained_classes: tuple
    mean: np.ndarray
    scale: np.ndarray
    model: object
    meta: dict = field(default_factory=dict)

    @property
    def n_features(self) -> int:
        return len(self.mean)

    def standardize(self, X) -> np.ndarray:
        return (np.asarray(X, float) - self.mean) / self.scale


def resolve_hyperparams(kind: str, hyperparams: Optional[dict] = None) -> dict:
    if kind not in KINDS:
        raise ValueError(f"unknown classifier kind {kind!r}; choose from {KINDS}")
    hp = copy.deepcopy(DEFAULT_HYPERPARAMS[kind])
    for key, value in (hyperparams or {}).items():
        if key not in hp:
            raise ValueError(f"unknown hyperparameter {key!r} for {kind}")
        hp[key] = value
    return hp


def train_classifier(kind: str, train: Dataset, hyperparams: Optional[dict] = None,
                     seed: int = 0) -> TrainedClassifier:
    """Standardize on ``train`` and fit one model of the given ``kind``."""
    hp = resolve_hyperparams(kind, hyperparams)
    if len(train) == 0:
        raise ValueError("empty training set")
    present = tuple(c for c in train.classes if c in set(train.labels))
    if len(present) < 2:
        raise ValueError(f"training set holds a single class {present}; need at least two")
    mean = train.X.mean(axis=0)
    scale = train.X.std(axis=0)
    scale[scale == 0] = 1.0
    Z = (train.X - mean) / scale
    index = {c: i for i, c in enumerate(present)}
    y = np.array([index[l] for l in train.labels], dtype=np.int64)
    rng = np.random.default_rng(seed)
    model = _MODEL_TYPES[kind]().fit(Z, y, len(present), hp, rng)
    meta = {"seed": int(seed), "n_train": len(train), "station_id": train.station_id,
            "data_fingerprint": train.fingerprint()}
    return TrainedClassifier(kind, hp, tuple(train.classes), present, mean, scale, model, meta)


def predict_scores(model: TrainedClassifier, X) -> np.ndarray:
    """Per-class scores in ``model.classes`` order; untrained classes score 0."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != model.n_features:
        raise ValueError(f"expected {model.n_features} features, got {X.shape[1]}")
    S = model.model.scores(model.standardize(X))
    out = np.zeros((len(X), len(model.classes)))
    for j, c in enumerate(model.trained_classes):
        out[:, model.classes.index(c)] = S[:, j]
    return out


def predict(model: TrainedClassifier, fv) -> tuple[str, dict]:
    """Label and class scores for one feature vector.

    Ties in the score go to the class declared first.
    """
    fv = np.asarray(fv, dtype=float)
    if fv.ndim != 1:
        raise ValueError("predict takes a single feature vector")
    s = predict_scores(model, fv[None, :])[0]
    return model.classes[int(np.argmax(s))], dict(zip(model.classes, s.tolist()))


def predict_labels(model: TrainedClassifier, X) -> list:
    S = predict_scores(model, X)
    return [model.classes[i] for i in np.argmax(S, axis=1)]


# ---------------------------------------------------------------------------
# artifact


def _canonical(payload: dict) -> bytes:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False).encode()


def model_to_dict(model: TrainedClassifier) -> dict:
    payload = {
        "format": ARTIFACT_FORMAT,
        "version": ARTIFACT_VERSION,
        "kind": model.kind,
        "hyperparams": model.hyperparams,
        "classes": list(model.classes),
        "trained_classes": list(model.trained_classes),
        "normalization": {"mean": model.mean.tolist(), "scale": model.scale.tolist()},
        "params": model.model.to_params(),
        "meta": model.meta,
    }
    payload["content_hash"] = hashlib.sha256(_canonical(payload)).hexdigest()
    return payload


def model_from_dict(payload: dict) -> TrainedClassifier:
    if payload.get("format") != ARTIFACT_FORMAT:
        raise ArtifactError("not a windclime model artifact")
    version = payload.get("version")
    if not isinstance(version, int) or version > ARTIFACT_VERSION:
        raise ArtifactError(f"artifact version {version!r} is newer than supported "
                            f"version {ARTIFACT_VERSION}")
    body = {k: v for k, v in payload.items() if k != "content_hash"}
    if hashlib.sha256(_canonical(body)).hexdigest() != payload.get("content_hash"):
        raise ArtifactError("content hash mismatch; artifact modified or corrupt")
    kind = payload["kind"]
    if kind not in _MODEL_TYPES:
        raise ArtifactError(f"unknown model kind {kind!r}")
    norm = payload["normalization"]
    return TrainedClassifier(kind, payload["hyperparams"], tuple(payload["classes"]),
                             tuple(payload["trained_classes"]), np.asarray(norm["mean"], float),
                             np.asarray(norm["scale"], float),
                             _MODEL_TYPES[kind].from_params(payload["params"]), payload["meta"])


def save_model(model: TrainedClassifier, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), sort_keys=True, indent=1) + "\n")


def load_model(path) -> TrainedClassifier:
    try:
        payload = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ArtifactError(f"unreadable model file: {exc}") from None
    return model_from_dict(payload)
