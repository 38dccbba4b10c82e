"""Loading, validation, splitting, and synthesis of embedding datasets.

A dataset pairs two CSV files:

* embeddings: header ``id,e0,...,e{d-1}``, one row per sample, ``.`` decimal,
  values stored at 32-bit precision and widened to float64 on load;
* labels: header ``id,te,icm,exp`` with values from each task's class
  vocabulary (te, icm in {A, B}; exp in {0, 1, 2}).

Datasets are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .errors import JoinError, ParseError, SchemaError
from .numerics import Rng, gauss_sample, matmul


@dataclass(frozen=True)
class TaskSchema:
    """A grading task: its name and ordered class vocabulary."""

    name: str
    classes: tuple[str, ...]

    def __post_init__(self):
        if len(self.classes) < 2:
            raise ValueError(f"task {self.name!r} needs >= 2 classes")
        if len(set(self.classes)) != len(self.classes):
            raise ValueError(f"task {self.name!r} has duplicate class names")

    def index_of(self, label: str) -> int:
        try:
            return self.classes.index(label)
        except ValueError:
            raise SchemaError(
                f"label {label!r} not in task {self.name} vocabulary "
                f"{list(self.classes)}"
            ) from None


DEFAULT_SCHEMAS: tuple[TaskSchema, ...] = (
    TaskSchema("TE", ("A", "B")),
    TaskSchema("ICM", ("A", "B")),
    TaskSchema("EXP", ("0", "1", "2")),
)


@dataclass(frozen=True)
class EmbeddingDataset:
    """Sample ids, an n x d embedding matrix, and per-task class indices."""

    ids: tuple[str, ...]
    x: np.ndarray
    labels: dict[str, np.ndarray]
    schemas: tuple[TaskSchema, ...]

    def __post_init__(self):
        n = len(self.ids)
        if len(set(self.ids)) != n:
            raise ValueError("sample ids must be unique")
        if self.x.ndim != 2 or self.x.shape[0] != n:
            raise ValueError(
                f"embedding matrix has {self.x.shape[0]} rows for {n} ids"
            )
        names = [s.name for s in self.schemas]
        if sorted(self.labels) != sorted(names):
            raise ValueError(
                f"label tasks {sorted(self.labels)} != schema tasks {sorted(names)}"
            )
        for schema in self.schemas:
            y = self.labels[schema.name]
            if len(y) != n:
                raise ValueError(f"task {schema.name} has {len(y)} labels for {n} ids")
            if len(y) and (y.min() < 0 or y.max() >= len(schema.classes)):
                raise ValueError(f"task {schema.name} label index out of range")

    @property
    def n(self) -> int:
        return len(self.ids)

    @property
    def dim(self) -> int:
        return self.x.shape[1]

    def schema(self, task: str) -> TaskSchema:
        for s in self.schemas:
            if s.name == task:
                return s
        raise KeyError(f"unknown task {task!r}")

    def subset(self, indices: list[int]) -> "EmbeddingDataset":
        """New dataset holding the given rows, in the given order."""
        return EmbeddingDataset(
            ids=tuple(self.ids[i] for i in indices),
            x=self.x[indices].copy(),
            labels={t: y[indices].copy() for t, y in self.labels.items()},
            schemas=self.schemas,
        )

    def joint_tuples(self) -> list[tuple[int, ...]]:
        """Per-sample tuple of class indices across tasks, in schema order."""
        columns = [self.labels[s.name] for s in self.schemas]
        return [tuple(int(col[i]) for col in columns) for i in range(self.n)]


def _read_csv_rows(path) -> tuple[list[str], list[list[str]]]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: file is empty") from None
        rows = [row for row in reader if row]
    return header, rows


def load_dataset(
    embeddings_path,
    labels_path,
    schemas: tuple[TaskSchema, ...] = DEFAULT_SCHEMAS,
) -> EmbeddingDataset:
    """Join an embeddings CSV with a labels CSV into one dataset.

    Sample order follows the embeddings file.  Every id must appear in both
    files exactly once; label strings are mapped to class indices through
    the schema vocabularies.
    """
    emb_header, emb_rows = _read_csv_rows(embeddings_path)
    if len(emb_header) < 2 or emb_header[0] != "id":
        raise ParseError(f"{embeddings_path}: header must be id,e0,...,e(d-1)")
    d = len(emb_header) - 1
    expected = ["e%d" % j for j in range(d)]
    if emb_header[1:] != expected:
        raise ParseError(
            f"{embeddings_path}: embedding columns must be e0..e{d - 1}"
        )

    ids: list[str] = []
    values = np.empty((len(emb_rows), d), dtype=np.float32)
    seen: set[str] = set()
    for r, row in enumerate(emb_rows):
        if len(row) != d + 1:
            raise ParseError(
                f"{embeddings_path}: row {r + 2} has {len(row)} cells, expected {d + 1}"
            )
        sid = row[0]
        if sid in seen:
            raise JoinError(f"{embeddings_path}: duplicate id {sid!r}")
        seen.add(sid)
        ids.append(sid)
        for c, cell in enumerate(row[1:]):
            try:
                values[r, c] = np.float32(cell)
            except ValueError:
                raise ParseError(
                    f"{embeddings_path}: non-numeric cell at row {r + 2}, "
                    f"column e{c}: {cell!r}"
                ) from None

    lab_header, lab_rows = _read_csv_rows(labels_path)
    lab_expected = ["id"] + [s.name.lower() for s in schemas]
    if lab_header != lab_expected:
        raise ParseError(
            f"{labels_path}: header must be {','.join(lab_expected)}, "
            f"got {','.join(lab_header)}"
        )
    by_id: dict[str, list[str]] = {}
    for r, row in enumerate(lab_rows):
        if len(row) != len(schemas) + 1:
            raise ParseError(
                f"{labels_path}: row {r + 2} has {len(row)} cells, "
                f"expected {len(schemas) + 1}"
            )
        if row[0] in by_id:
            raise JoinError(f"{labels_path}: duplicate id {row[0]!r}")
        by_id[row[0]] = row[1:]

    emb_only = [sid for sid in ids if sid not in by_id]
    lab_only = [sid for sid in by_id if sid not in seen]
    if emb_only or lab_only:
        parts = []
        if emb_only:
            parts.append(f"ids only in embeddings: {emb_only}")
        if lab_only:
            parts.append(f"ids only in labels: {lab_only}")
        raise JoinError("; ".join(parts))

    labels = {
        s.name: np.array(
            [s.index_of(by_id[sid][k]) for sid in ids], dtype=np.int64
        )
        for k, s in enumerate(schemas)
    }
    return EmbeddingDataset(
        ids=tuple(ids),
        x=values.astype(np.float64),
        labels=labels,
        schemas=tuple(schemas),
    )


def save_dataset(ds: EmbeddingDataset, embeddings_path, labels_path) -> None:
    """Write the dataset pair; embedding values are stored as float32."""
    with open(embeddings_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + ["e%d" % j for j in range(ds.dim)])
        for i, sid in enumerate(ds.ids):
            writer.writerow([sid] + [str(np.float32(v)) for v in ds.x[i]])
    with open(labels_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["id"] + [s.name.lower() for s in ds.schemas])
        for i, sid in enumerate(ds.ids):
            writer.writerow(
                [sid]
                + [s.classes[ds.labels[s.name][i]] for s in ds.schemas]
            )


def stratified_split(
    ds: EmbeddingDataset, fraction: float, rng: Rng
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Disjoint, exhaustive train/test partition stratified on joint labels.

    Samples are grouped by their (task1, task2, ...) class-index tuple.
    Each group sends floor(fraction * count) samples to train; the leftover
    train quota up to floor(fraction * n) is filled one slot at a time by
    descending fractional remainder (ties broken by tuple lexicographic
    order).  Groups with a single sample always go to train, which is the
    only way the final train size can deviate from floor(fraction * n).
    Shuffling within groups consumes the rng in lexicographic group order.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    if ds.n < 2:
        raise ValueError(f"need at least 2 samples to split, got {ds.n}")

    groups: dict[tuple[int, ...], list[int]] = {}
    for i, key in enumerate(ds.joint_tuples()):
        groups.setdefault(key, []).append(i)
    keys = sorted(groups)

    base = {k: int(fraction * len(groups[k])) for k in keys}
    remainder = {k: fraction * len(groups[k]) - base[k] for k in keys}
    quota = int(fraction * ds.n)
    extras = quota - sum(base.values())
    take = dict(base)
    for k in sorted(keys, key=lambda k: (-remainder[k], k)):
        if extras <= 0:
            break
        if take[k] < len(groups[k]):
            take[k] += 1
            extras -= 1
    for k in keys:
        if len(groups[k]) == 1:
            take[k] = 1

    train_idx: list[int] = []
    test_idx: list[int] = []
    for k in keys:
        members = list(groups[k])
        rng.shuffle(members)
        train_idx.extend(members[: take[k]])
        test_idx.extend(members[take[k] :])
    return ds.subset(sorted(train_idx)), ds.subset(sorted(test_idx))


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of the synthetic correlated-task generator.

    ``coupling`` sets the pairwise cosine between the latent score
    directions of different tasks: 1 makes all tasks grade the same latent
    axis, 0 makes them orthogonal.
    """

    n: int
    d: int
    k: int
    noise_sigma: float
    coupling: float
    class_priors: dict[str, tuple[float, ...]]
    schemas: tuple[TaskSchema, ...] = DEFAULT_SCHEMAS

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"n must be positive, got {self.n}")
        if self.k < 1 or self.d < 1:
            raise ValueError(f"dims must be positive, got d={self.d}, k={self.k}")
        if self.k > self.d:
            raise ValueError(f"latent dim k={self.k} may not exceed d={self.d}")
        if self.noise_sigma < 0:
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if not 0.0 <= self.coupling <= 1.0:
            raise ValueError(f"coupling must be in [0, 1], got {self.coupling}")
        names = [s.name for s in self.schemas]
        if sorted(self.class_priors) != sorted(names):
            raise ValueError(
                f"priors given for {sorted(self.class_priors)}, tasks are {sorted(names)}"
            )
        if self.coupling < 1.0 and self.k < len(self.schemas) + 1:
            raise ValueError(
                f"k={self.k} too small for {len(self.schemas)} tasks with "
                f"coupling < 1 (need k >= {len(self.schemas) + 1})"
            )
        for s in self.schemas:
            p = self.class_priors[s.name]
            if len(p) != len(s.classes):
                raise ValueError(
                    f"task {s.name} has {len(s.classes)} classes but {len(p)} priors"
                )
            if min(p) < 0:
                raise ValueError(f"task {s.name} priors must be non-negative")
            if abs(sum(p) - 1.0) > 1e-9:
                raise ValueError(
                    f"task {s.name} priors sum to {sum(p)}, expected 1"
                )


def _score_directions(spec: SyntheticSpec) -> np.ndarray:
    """Unit direction per task with pairwise cosine equal to the coupling.

    Each direction is sqrt(c) * e1 + sqrt(1 - c) * e(1+i); the shared e1
    component carries the coupling, the orthogonal basis vectors the rest.
    """
    m = len(spec.schemas)
    w = np.zeros((m, spec.k), dtype=np.float64)
    w[:, 0] = np.sqrt(spec.coupling)
    if spec.coupling < 1.0:
        for i in range(m):
            w[i, 1 + i] = np.sqrt(1.0 - spec.coupling)
    return w


def generate_synthetic(spec: SyntheticSpec, rng: Rng) -> EmbeddingDataset:
    """Draw a dataset whose task labels share a low-dimensional latent cause.

    Per sample, a latent z ~ N(0, I_k) is graded by each task through a
    linear score w.z bucketed at thresholds chosen from the class priors via
    the inverse normal CDF; the embedding is A.z plus isotropic noise, with
    A a random d x k map scaled by 1/sqrt(k) so embedding coordinates have
    roughly unit signal variance.  Rng consumption order: A, then z rows,
    then noise.
    """
    a = gauss_sample(rng, spec.d, spec.k, 0.0, 1.0 / np.sqrt(spec.k))
    z = gauss_sample(rng, spec.n, spec.k, 0.0, 1.0)
    x = matmul(z, a.T)
    if spec.noise_sigma > 0:
        x = x + gauss_sample(rng, spec.n, spec.d, 0.0, spec.noise_sigma)

    directions = _score_directions(spec)
    labels: dict[str, np.ndarray] = {}
    for i, schema in enumerate(spec.schemas):
        scores = z @ directions[i]
        cuts = ndtri(np.cumsum(spec.class_priors[schema.name][:-1]))
        labels[schema.name] = np.searchsorted(cuts, scores, side="right").astype(
            np.int64
        )

    width = max(1, len(str(spec.n - 1)))
    ids = tuple("s%0*d" % (width, i) for i in range(spec.n))
    return EmbeddingDataset(ids=ids, x=x, labels=labels, schemas=spec.schemas)
