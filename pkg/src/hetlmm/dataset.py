"""Multi-subject linear mixed model data containers and partitioning.

A dataset is an ordered collection of per-subject blocks (y_i, X_i, Z_i),
where the random-effect design Z_i is a designated subset of X_i's columns
(the ``column_map``). Blocks are immutable after construction and safe to
share across workers.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError
from .rng import stream

__all__ = [
    "DataError",
    "SubjectBlock",
    "LmmDataset",
    "SubjectPartition",
    "load_dataset",
    "load_manifest",
    "save_dataset",
    "make_neighborhood_dataset",
    "center_columns",
    "partition_subjects",
]

# warn when max(m_i)/min(m_i) exceeds this; the theory assumes a bounded ratio
DEFAULT_M_RATIO_WARN = 4.0


@dataclass(frozen=True)
class SubjectBlock:
    """One subject's observations: response y (m,), fixed design X (m, p).

    Z is materialized as X[:, column_map]; ``column_map`` lists, for each of
    the q random-effect columns, its index in X.
    """

    subject_id: str
    y: np.ndarray
    X: np.ndarray
    column_map: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        X = np.asarray(self.X, dtype=float)
        cmap = np.asarray(self.column_map, dtype=int)
        if y.ndim != 1 or X.ndim != 2 or X.shape[0] != y.shape[0]:
            raise DataError(
                f"subject {self.subject_id}: y has shape {y.shape}, X has shape {X.shape}"
            )
        m, p = X.shape
        if m < 1 or p < 1:
            raise DataError(f"subject {self.subject_id}: empty design ({m} rows, {p} cols)")
        if cmap.ndim != 1 or len(cmap) < 1 or len(cmap) > p:
            raise DataError(f"subject {self.subject_id}: column_map must have 1..p entries")
        if len(np.unique(cmap)) != len(cmap):
            raise DataError("duplicate map entries in column_map")
        if cmap.min() < 0 or cmap.max() >= p:
            raise DataError(f"column_map index out of range [0, {p})")
        if not (np.isfinite(y).all() and np.isfinite(X).all()):
            raise DataError(f"subject {self.subject_id}: non-finite values in data")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "column_map", cmap)
        y.setflags(write=False)
        X.setflags(write=False)
        cmap.setflags(write=False)

    @property
    def m(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def q(self) -> int:
        return len(self.column_map)

    @property
    def Z(self) -> np.ndarray:
        """Random-effect design: the mapped columns of X."""
        return self.X[:, self.column_map]


@dataclass(frozen=True)
class LmmDataset:
    """Validated, immutable list of subject blocks sharing (p, q, column_map)."""

    blocks: tuple[SubjectBlock, ...]
    m_ratio_warn: float = field(default=DEFAULT_M_RATIO_WARN, compare=False)

    def __post_init__(self):
        blocks = tuple(self.blocks)
        if not blocks:
            raise DataError("dataset has no subjects")
        first = blocks[0]
        for b in blocks[1:]:
            if b.p != first.p:
                raise DataError(
                    f"dimension mismatch across subjects: p={b.p} (subject {b.subject_id}) "
                    f"vs p={first.p} (subject {first.subject_id})"
                )
            if not np.array_equal(b.column_map, first.column_map):
                raise DataError("subjects disagree on column_map")
        ids = [b.subject_id for b in blocks]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate subject ids")
        object.__setattr__(self, "blocks", blocks)
        ms = np.array([b.m for b in blocks], dtype=float)
        if ms.max() / ms.min() > self.m_ratio_warn:
            warnings.warn(
                f"per-subject row counts are unbalanced: max/min = {ms.max() / ms.min():.2f} "
                f"exceeds {self.m_ratio_warn}",
                stacklevel=2,
            )

    @property
    def n(self) -> int:
        return len(self.blocks)

    @property
    def p(self) -> int:
        return self.blocks[0].p

    @property
    def q(self) -> int:
        return self.blocks[0].q

    @property
    def column_map(self) -> np.ndarray:
        return self.blocks[0].column_map

    @property
    def total_rows(self) -> int:
        return sum(b.m for b in self.blocks)

    @property
    def subject_ids(self) -> list[str]:
        return [b.subject_id for b in self.blocks]

    def subset(self, subject_ids) -> "LmmDataset":
        """Dataset restricted to the given subject ids (kept in dataset order)."""
        wanted = set(subject_ids)
        kept = tuple(b for b in self.blocks if b.subject_id in wanted)
        if not kept:
            raise DataError("subset selects no subjects")
        return LmmDataset(kept, m_ratio_warn=self.m_ratio_warn)


@dataclass(frozen=True)
class SubjectPartition:
    """Assignment of subjects to disjoint folds/splits."""

    assignment: dict[str, int]
    kind: str  # "cv_folds" or "three_way_split"
    n_parts: int

    def members(self, part: int) -> list[str]:
        return [s for s, f in self.assignment.items() if f == part]

    def sizes(self) -> list[int]:
        return [len(self.members(k)) for k in range(self.n_parts)]


def _parse_subject_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for lineno, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            try:
                vals = [float(c) for c in row]
            except ValueError:
                if lineno == 1 and rows == []:
                    continue  # header row
                raise DataError(f"{path}: non-numeric cell at row {lineno}") from None
            if not all(np.isfinite(vals)):
                raise DataError(f"{path}: non-finite value at row {lineno}")
            rows.append(vals)
    if not rows:
        raise DataError(f"{path}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise DataError(f"{path}: ragged rows (widths {sorted(widths)})")
    return np.asarray(rows, dtype=float)


def load_dataset(subject_files, column_map, subject_ids=None) -> LmmDataset:
    """Load one CSV per subject: first column y, remaining p columns X."""
    paths = [Path(f) for f in subject_files]
    if subject_ids is None:
        subject_ids = [p.stem for p in paths]
        if len(set(subject_ids)) != len(subject_ids):
            subject_ids = [f"{p.stem}#{i}" for i, p in enumerate(paths)]
    blocks = []
    for sid, path in zip(subject_ids, paths):
        if not path.exists():
            raise DataError(f"subject file not found: {path}")
        data = _parse_subject_csv(path)
        if data.shape[1] < 2:
            raise DataError(f"{path}: need at least one covariate column")
        blocks.append(
            SubjectBlock(subject_id=str(sid), y=data[:, 0], X=data[:, 1:], column_map=column_map)
        )
    return LmmDataset(tuple(blocks))


def load_manifest(manifest_path) -> LmmDataset:
    """Load a dataset from a JSON manifest (file list + column_map)."""
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise DataError(f"manifest not found: {manifest_path}")
    try:
        spec = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise DataError(f"{manifest_path}: invalid JSON ({e})") from None
    if "subjects" not in spec or "column_map" not in spec:
        raise DataError(f"{manifest_path}: manifest needs 'subjects' and 'column_map'")
    base = manifest_path.parent
    files, ids = [], []
    for i, entry in enumerate(spec["subjects"]):
        if isinstance(entry, str):
            path, sid = entry, None
        else:
            path, sid = entry["path"], entry.get("subject_id")
        path = Path(path)
        files.append(path if path.is_absolute() else base / path)
        ids.append(str(sid) if sid is not None else Path(path).stem)
    return load_dataset(files, spec["column_map"], subject_ids=ids)


def save_dataset(dataset: LmmDataset, out_dir) -> Path:
    """Write per-subject CSVs plus a manifest.json; returns the manifest path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for i, b in enumerate(dataset.blocks):
        fname = f"subject_{i:04d}.csv"
        data = np.column_stack([b.y, b.X])
        with open(out_dir / fname, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            for row in data:
                w.writerow([np.format_float_positional(v, unique=True, trim="0") for v in row])
        entries.append({"path": fname, "subject_id": b.subject_id})
    manifest = {"subjects": entries, "column_map": [int(c) for c in dataset.column_map]}
    mpath = out_dir / "manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return mpath


def center_columns(Y: np.ndarray) -> np.ndarray:
    """Center each column of one subject's node matrix at mean zero."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2 or Y.shape[0] < 2:
        raise DataError("centering needs a 2-d block with at least 2 rows")
    return Y - Y.mean(axis=0, keepdims=True)


def make_neighborhood_dataset(Y_blocks, j: int, center: bool = True) -> LmmDataset:
    """Node-j neighborhood regression dataset: y = node j, X = Z = other nodes.

    Each block is column-centered per subject first (disable with
    ``center=False`` for pre-centered data).
    """
    blocks = []
    for i, Y in enumerate(Y_blocks):
        Y = np.asarray(Y, dtype=float)
        if Y.ndim != 2:
            raise DataError(f"block {i} is not a matrix")
        p = Y.shape[1]
        if not 0 <= j < p:
            raise DataError(f"node index {j} out of range for p={p}")
        if p < 2:
            raise DataError("neighborhood regression needs at least 2 nodes")
        if center:
            Y = center_columns(Y)
        keep = [k for k in range(p) if k != j]
        blocks.append(
            SubjectBlock(
                subject_id=f"subject_{i:04d}",
                y=Y[:, j],
                X=Y[:, keep],
                column_map=np.arange(p - 1),
            )
        )
    return LmmDataset(tuple(blocks))


def partition_subjects(dataset: LmmDataset, kind: str, seed: int, K: int | None = None) -> SubjectPartition:
    """Deterministically split subjects into folds.

    kind="cv_folds" uses K folds; kind="three_way_split" is the fixed 3-part
    split used by the variance-component pipeline. Subjects are shuffled with
    a seeded counter-based stream and dealt round-robin, so part sizes differ
    by at most one.
    """
    n = dataset.n
    if kind == "cv_folds":
        if K is None or K < 2:
            raise DataError("cv_folds needs K >= 2")
        if n < K:
            raise DataError(f"too few subjects for {K} folds (n={n})")
        n_parts = K
    elif kind == "three_way_split":
        if n < 3:
            raise DataError(f"three_way_split needs n >= 3 subjects (n={n})")
        n_parts = 3
    else:
        raise DataError(f"unknown partition kind: {kind!r}")
    rng = stream(seed, "partition", kind, n_parts, n)
    order = rng.permutation(n)
    ids = dataset.subject_ids
    assignment = {ids[subj]: pos % n_parts for pos, subj in enumerate(order)}
    return SubjectPartition(assignment=assignment, kind=kind, n_parts=n_parts)
