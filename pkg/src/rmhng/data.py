"""Datasets: the 4-agent synthetic partial-view benchmark, a 10-dim clustered
fixture, and the per-agent feature CSV format.

CSV layout (UTF-8, header required, one row per (agent, object))::

    agent,object,dim_0,...,dim_{k-1}[,label]

Row order is free; rows are sorted by agent then object on load.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FeatureFileError, InconsistentCountError
from .kernels import RngStream

SYNTHETIC_MEANS = np.array(
    [
        [0.0, 1.0, 2.0, 3.0],
        [0.0, 5.0, 6.0, 7.0],
        [8.0, 5.0, 10.0, 11.0],
        [12.0, 13.0, 10.0, 15.0],
        [16.0, 17.0, 18.0, 15.0],
    ]
)


@dataclass
class Dataset:
    """Per-agent features for the same ``D`` objects, with optional truth labels."""

    features: list  # N arrays of shape (D, dim)
    ground_truth: np.ndarray | None = None
    name: str = "dataset"
    seed: int | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = [np.atleast_2d(np.asarray(x, dtype=float)) for x in self.features]
        if not self.features:
            raise ValueError("a dataset needs at least one agent")
        shapes = {x.shape for x in self.features}
        if len(shapes) != 1:
            raise ValueError(f"agents disagree on (D, dim): {sorted(shapes)}")
        if self.ground_truth is not None:
            self.ground_truth = np.asarray(self.ground_truth, dtype=np.int64)
            if self.ground_truth.shape != (self.n_objects,):
                raise ValueError("ground_truth must have one label per object")

    @property
    def n_agents(self) -> int:
        return len(self.features)

    @property
    def n_objects(self) -> int:
        return self.features[0].shape[0]

    @property
    def dim(self) -> int:
        return self.features[0].shape[1]

    @property
    def n_classes(self) -> int | None:
        if self.ground_truth is None:
            return None
        return int(np.unique(self.ground_truth).size)


def generate_synthetic(n_per_cluster: int = 200, seed: int = 0) -> Dataset:
    """Five unit-variance 4-d Gaussians; agent ``n`` sees coordinate ``n`` only.

    Each agent sees two adjacent clusters at the same mean, so no single agent
    can separate all five without the others.
    """
    if n_per_cluster < 1:
        raise ValueError("n_per_cluster must be >= 1")
    rng = RngStream(seed)
    labels = np.repeat(np.arange(len(SYNTHETIC_MEANS)), n_per_cluster)
    points = SYNTHETIC_MEANS[labels] + rng.normal(labels.shape + (SYNTHETIC_MEANS.shape[1],))
    return Dataset(
        features=[points[:, [n]] for n in range(points.shape[1])],
        ground_truth=labels,
        name="synthetic",
        seed=seed,
        meta={"n_per_cluster": n_per_cluster},
    )


def generate_clustered_fixture(
    n_classes: int = 6,
    n_per_class: int = 30,
    n_agents: int = 4,
    dim: int = 10,
    separation: float = 4.0,
    seed: int = 0,
    scale: float = 0.03,
) -> Dataset:
    """Clustered features standing in for precomputed image embeddings.

    Every class has a random mean per agent; agent ``n`` additionally sees
    classes ``n`` and ``n+1`` (mod ``n_classes``) at the same mean, the same
    partial-view confound as the synthetic set.  ``scale`` multiplies every
    feature (noise std is ``scale``); the default matches the feature
    magnitude implied by a ``W = 100 I`` prior, whose prior mean precision
    ``nu W`` is 1000 per dimension.
    """
    rng = RngStream(seed)
    labels = np.repeat(np.arange(n_classes), n_per_class)
    features = []
    for n in range(n_agents):
        means = separation * rng.normal((n_classes, dim)) / math.sqrt(2.0)
        means[(n + 1) % n_classes] = means[n % n_classes]
        features.append(scale * (means[labels] + rng.normal((labels.size, dim))))
    return Dataset(
        features,
        labels,
        name="clustered_fixture",
        seed=seed,
        meta={"n_per_class": n_per_class, "separation": separation, "scale": scale},
    )


def save_feature_file(dataset: Dataset, path) -> Path:
    """Write the dataset in the feature CSV format; floats are written round-trip exact."""
    path = Path(path)
    header = ["agent", "object"] + [f"dim_{j}" for j in range(dataset.dim)]
    has_labels = dataset.ground_truth is not None
    if has_labels:
        header.append("label")
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for n, x in enumerate(dataset.features):
            for d in range(dataset.n_objects):
                row = [n, d] + [repr(float(v)) for v in x[d]]
                if has_labels:
                    row.append(int(dataset.ground_truth[d]))
                writer.writerow(row)
    return path


def _parse_int(text, what, line, path):
    try:
        return int(text)
    except ValueError:
        raise FeatureFileError(f"{what} {text!r} is not an integer", line, path) from None


def load_feature_file(path, n_agents: int | None = None, dim: int | None = None) -> Dataset:
    """Parse a feature CSV into a :class:`Dataset`.

    ``n_agents`` / ``dim`` optionally pin the expected layout; otherwise both
    are inferred.  Agent ids must be ``0..N-1`` and every agent must list the
    same objects exactly once.
    """
    path = Path(path)
    try:
        fh = path.open(encoding="utf-8", newline="")
    except OSError as exc:
        raise FeatureFileError(f"cannot open feature file: {exc.strerror}", path=path) from None
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FeatureFileError("empty file", 1, path) from None
        header = [h.strip() for h in header]
        if header[:2] != ["agent", "object"]:
            raise FeatureFileError("header must start with 'agent,object'", 1, path)
        has_labels = header[-1] == "label"
        dim_cols = header[2:-1] if has_labels else header[2:]
        if not dim_cols or dim_cols != [f"dim_{j}" for j in range(len(dim_cols))]:
            raise FeatureFileError("feature columns must be dim_0..dim_{k-1}", 1, path)
        if dim is not None and len(dim_cols) != dim:
            raise FeatureFileError(f"expected {dim} feature columns, found {len(dim_cols)}", 1, path)
        rows = {}
        labels = {}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise FeatureFileError(f"expected {len(header)} fields, got {len(row)}", line, path)
            agent = _parse_int(row[0], "agent id", line, path)
            obj = _parse_int(row[1], "object id", line, path)
            if agent < 0 or (n_agents is not None and agent >= n_agents):
                raise FeatureFileError(f"unknown agent id {agent}", line, path)
            if obj < 0:
                raise FeatureFileError(f"negative object id {obj}", line, path)
            try:
                values = [float(v) for v in row[2 : 2 + len(dim_cols)]]
            except ValueError:
                raise FeatureFileError("feature value is not a number", line, path) from None
            if not all(math.isfinite(v) for v in values):
                raise FeatureFileError("feature values must be finite (no NaN/Inf)", line, path)
            if (agent, obj) in rows:
                raise FeatureFileError(f"duplicate row for agent {agent}, object {obj}", line, path)
            rows[(agent, obj)] = (values, line)
            if has_labels:
                label = _parse_int(row[-1], "label", line, path)
                if labels.setdefault(obj, label) != label:
                    raise FeatureFileError(f"object {obj} has conflicting labels", line, path)
    if not rows:
        raise FeatureFileError("no data rows", path=path)
    agents = sorted({a for a, _ in rows})
    expected_agents = list(range(n_agents if n_agents is not None else agents[-1] + 1))
    if agents != expected_agents:
        missing = sorted(set(expected_agents) - set(agents))
        raise FeatureFileError(f"agents {missing} have no rows", path=path)
    objects = sorted({o for _, o in rows})
    features = []
    for a in agents:
        have = [o for o in objects if (a, o) in rows]
        if len(have) != len(objects):
            missing = sorted(set(objects) - set(have))
            raise InconsistentCountError(
                f"agent {a} has {len(have)} objects, expected {len(objects)} (missing {missing[:5]})",
                path=path,
            )
        features.append(np.array([rows[(a, o)][0] for o in objects]))
    truth = np.array([labels[o] for o in objects]) if has_labels else None
    return Dataset(features, truth, name=path.stem, meta={"object_ids": objects})
