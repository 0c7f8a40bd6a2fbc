"""CSV ingestion, one-hot + z-score encoding, and stratified k-fold plans.

The encoder follows the whole-set dummy-then-standardize flow: categorical
columns expand to one indicator column per observed vocabulary value
(vocabulary sorted lexicographically), then every output column - numeric
and indicator alike - is z-scored with the fitted mean/std.  Constant
columns (std == 0) come out as all zeros after centering.  Values unseen at
apply time map to an all-zero indicator group and are counted, never fatal.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .schemas import Schema, label_class

ENCODER_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Reject:
    line: int
    column: str
    reason: str


@dataclass
class RawDataset:
    schema: Schema
    rows: list[list]          # typed: float for numeric, str otherwise
    labels: list[str]         # class names, aligned with rows
    binary_flags: list[int | None]
    rejects: list[Reject] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return len(self.rows)


def _looks_like_header(fields: list[str], schema: Schema) -> bool:
    """A first row is a header when no numeric field of it parses as float."""
    numeric = [i for i, c in enumerate(schema.columns) if c.kind == "numeric"]
    if not numeric:
        names = {c.name.lower() for c in schema.columns}
        return sum(f.strip().lower() in names for f in fields) >= len(fields) / 2
    for i in numeric:
        try:
            float(fields[i])
            return False
        except ValueError:
            continue
    return True


def parse_csv(path, schema: Schema) -> RawDataset:
    """Parse one CSV file against ``schema``.

    Rows with a wrong field count are fatal; rows with unparseable numeric
    fields or unknown label values land in the rejects report.
    """
    rows: list[list] = []
    labels: list[str] = []
    flags: list[int | None] = []
    rejects: list[Reject] = []
    label_i = schema.label_index
    binary_i = schema.binary_index
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        for ln, fields in enumerate(reader, start=1):
            if not fields:
                continue
            if ln == 1 and len(fields) == schema.n_fields and \
                    _looks_like_header(fields, schema):
                continue
            if len(fields) != schema.n_fields:
                raise DataError(
                    f"{path}:{ln}: expected {schema.n_fields} fields, "
                    f"got {len(fields)}"
                )
            typed: list = []
            bad: Reject | None = None
            for i, col in enumerate(schema.columns):
                raw = fields[i].strip()
                if col.kind == "numeric":
                    try:
                        value = float(raw)
                    except ValueError:
                        bad = Reject(ln, col.name, f"unparseable numeric {raw!r}")
                        break
                    if not np.isfinite(value):
                        bad = Reject(ln, col.name, f"non-finite numeric {raw!r}")
                        break
                    typed.append(value)
                elif col.kind == "categorical":
                    typed.append(raw)
                else:
                    typed.append(raw)
            if bad is None:
                cls = label_class(schema.dataset_id, fields[label_i])
                if cls is None:
                    bad = Reject(ln, schema.columns[label_i].name,
                                 f"unknown label {fields[label_i].strip()!r}")
            if bad is not None:
                rejects.append(bad)
                continue
            if binary_i is not None:
                try:
                    flags.append(int(float(fields[binary_i])))
                except ValueError:
                    flags.append(None)
            else:
                flags.append(None)
            rows.append(typed)
            labels.append(cls)
    return RawDataset(schema=schema, rows=rows, labels=labels,
                      binary_flags=flags, rejects=rejects)


def merge_raw(parts: list[RawDataset]) -> RawDataset:
    if not parts:
        raise ConfigError("no input files")
    base = parts[0]
    out = RawDataset(schema=base.schema, rows=[], labels=[], binary_flags=[],
                     rejects=[])
    for p in parts:
        if p.schema is not base.schema and p.schema != base.schema:
            raise ConfigError("cannot merge datasets with different schemas")
        out.rows.extend(p.rows)
        out.labels.extend(p.labels)
        out.binary_flags.extend(p.binary_flags)
        out.rejects.extend(p.rejects)
    return out


@dataclass
class EncoderModel:
    """Fitted feature encoder: vocabularies plus per-output-column scaling.

    Immutable once fitted; applying it twice to the same rows yields
    identical tensors.
    """

    dataset_id: str
    encoders: list[tuple]       # ("numeric", name) | ("categorical", name, vocab)
    means: np.ndarray
    stds: np.ndarray            # population std (ddof=0); 0 for constant cols
    feature_names: list[str]
    class_names: list[str]

    @property
    def width(self) -> int:
        return int(self.means.size)

    @property
    def normal_index(self) -> int | None:
        for i, name in enumerate(self.class_names):
            if name.strip().lower() == "normal":
                return i
        return None

    def attack_mask(self) -> np.ndarray:
        normal = self.normal_index
        mask = np.ones(len(self.class_names), dtype=bool)
        if normal is not None:
            mask[normal] = False
        return mask

    def to_json(self) -> str:
        payload = {
            "format_version": ENCODER_FORMAT_VERSION,
            "dataset_id": self.dataset_id,
            "encoders": [list(e) for e in self.encoders],
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
            "feature_names": self.feature_names,
            "class_names": self.class_names,
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "EncoderModel":
        payload = json.loads(text)
        if payload.get("format_version") != ENCODER_FORMAT_VERSION:
            raise DataError(
                f"unsupported encoder format {payload.get('format_version')!r}"
            )
        return cls(
            dataset_id=payload["dataset_id"],
            encoders=[tuple(e) for e in payload["encoders"]],
            means=np.asarray(payload["means"], dtype=np.float64),
            stds=np.asarray(payload["stds"], dtype=np.float64),
            feature_names=payload["feature_names"],
            class_names=payload["class_names"],
        )


@dataclass
class EncodedDataset:
    features: np.ndarray        # [N, width], z-scored
    onehot: np.ndarray          # [N, classes]
    y: np.ndarray               # [N] class indices
    class_names: list[str]
    attack_mask: np.ndarray     # per class: True when the class is an attack
    normal_index: int | None
    unseen_count: int = 0
    unseen_by_column: dict[str, int] = field(default_factory=dict)
    binary_mismatches: int = 0


def _raw_design(encoders, schema: Schema, rows) -> tuple[np.ndarray, int, dict]:
    """Pre-scaling design matrix; returns (matrix, unseen_count, per_column)."""
    n = len(rows)
    width = sum(1 if e[0] == "numeric" else len(e[2]) for e in encoders)
    mat = np.zeros((n, width))
    feature_idx = [i for i, _ in schema.feature_columns()]
    unseen = 0
    unseen_by: dict[str, int] = {}
    col = 0
    for (kind, *rest), src in zip(encoders, feature_idx):
        column = [row[src] for row in rows]
        if kind == "numeric":
            mat[:, col] = np.asarray(
                [v if isinstance(v, float) else float(v) for v in column]
            )
            col += 1
        else:
            name, vocab = rest
            offsets = {v: j for j, v in enumerate(vocab)}
            for r, v in enumerate(column):
                j = offsets.get(str(v).strip())
                if j is None:
                    unseen += 1
                    unseen_by[name] = unseen_by.get(name, 0) + 1
                else:
                    mat[r, col + j] = 1.0
            col += len(vocab)
    return mat, unseen, unseen_by


def fit_encoder(schema: Schema, rows, labels) -> EncoderModel:
    """Fit vocabularies and scaling constants on ``rows``.

    By default the caller passes the whole dataset (the paper-parity flow);
    passing only training-fold rows gives the leakage-free strict mode.
    """
    if not rows:
        raise DataError("cannot fit an encoder on zero rows")
    encoders: list[tuple] = []
    names: list[str] = []
    for src, colspec in schema.feature_columns():
        if colspec.kind == "numeric":
            encoders.append(("numeric", colspec.name))
            names.append(colspec.name)
        else:
            vocab = sorted({str(row[src]).strip() for row in rows})
            encoders.append(("categorical", colspec.name, vocab))
            names.extend(f"{colspec.name}={v}" for v in vocab)
    mat, _, _ = _raw_design(encoders, schema, rows)
    means = mat.mean(axis=0)
    stds = mat.std(axis=0)  # ddof=0
    return EncoderModel(
        dataset_id=schema.dataset_id,
        encoders=encoders,
        means=means,
        stds=stds,
        feature_names=names,
        class_names=sorted(set(labels)),
    )


def apply_encoder(model: EncoderModel, schema: Schema, rows, labels,
                  binary_flags=None) -> EncodedDataset:
    """Encode rows with a fitted model; unseen categorical values map to an
    all-zero indicator group and are counted."""
    if not rows:
        raise DataError("cannot encode zero rows")
    mat, unseen, unseen_by = _raw_design(model.encoders, schema, rows)
    safe_std = np.where(model.stds > 0.0, model.stds, 1.0)
    features = (mat - model.means) / safe_std

    class_to_idx = {c: i for i, c in enumerate(model.class_names)}
    try:
        y = np.asarray([class_to_idx[c] for c in labels], dtype=np.int64)
    except KeyError as exc:
        raise DataError(f"label class {exc.args[0]!r} was not seen at fit time")
    onehot = np.zeros((len(rows), len(model.class_names)))
    onehot[np.arange(len(rows)), y] = 1.0

    attack_mask = model.attack_mask()
    mismatches = 0
    if binary_flags is not None:
        for flag, cls_idx in zip(binary_flags, y):
            if flag is not None and bool(flag) != bool(attack_mask[cls_idx]):
                mismatches += 1
    return EncodedDataset(
        features=features,
        onehot=onehot,
        y=y,
        class_names=list(model.class_names),
        attack_mask=attack_mask,
        normal_index=model.normal_index,
        unseen_count=unseen,
        unseen_by_column=unseen_by,
        binary_mismatches=mismatches,
    )


@dataclass
class FoldPlan:
    k: int
    folds: list[np.ndarray]
    stratified: bool
    seed: int

    def test_indices(self, fold: int) -> np.ndarray:
        if not 0 <= fold < self.k:
            raise ConfigError(f"fold {fold} out of range 0..{self.k - 1}")
        return self.folds[fold]

    def train_indices(self, fold: int) -> np.ndarray:
        test = set(self.test_indices(fold).tolist())
        n = sum(f.size for f in self.folds)
        return np.asarray(
            [i for i in range(n) if i not in test], dtype=np.int64
        )

    def to_json(self) -> str:
        return json.dumps(
            {
                "k": self.k,
                "seed": self.seed,
                "stratified": self.stratified,
                "folds": [f.tolist() for f in self.folds],
            },
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "FoldPlan":
        payload = json.loads(text)
        return cls(
            k=payload["k"],
            folds=[np.asarray(f, dtype=np.int64) for f in payload["folds"]],
            stratified=payload["stratified"],
            seed=payload["seed"],
        )


def make_folds(labels, k: int = 10, seed: int = 0,
               stratified: bool = True) -> FoldPlan:
    """Stratified k-fold partition, deterministic under ``seed``.

    Within each class the shuffled indices are dealt round-robin, so
    per-class fold sizes differ by at most one and a class with fewer than k
    samples lands in that many distinct folds.
    """
    labels = np.asarray(labels)
    n = labels.shape[0]
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    if k > n:
        raise ConfigError(f"k = {k} exceeds the {n} available rows")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    if stratified:
        offset = 0
        for cls in sorted(np.unique(labels).tolist()):
            idx = np.flatnonzero(labels == cls)
            rng.shuffle(idx)
            for j, i in enumerate(idx):
                folds[(offset + j) % k].append(int(i))
            offset = (offset + idx.size) % k
    else:
        order = rng.permutation(n)
        for j, i in enumerate(order):
            folds[j % k].append(int(i))
    return FoldPlan(
        k=k,
        folds=[np.asarray(sorted(f), dtype=np.int64) for f in folds],
        stratified=stratified,
        seed=seed,
    )


def batch_iter(features, onehot, indices, batch_size: int, seed):
    """Yield ``(x, y, idx)`` batches over a seeded shuffle of ``indices``;
    the final short batch is kept."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        raise ConfigError("cannot iterate over an empty index set")
    order = np.random.default_rng(seed).permutation(indices)
    for start in range(0, order.size, batch_size):
        sl = order[start : start + batch_size]
        yield features[sl], onehot[sl], sl


def stratified_subsample(labels, n: int, seed: int = 0) -> np.ndarray:
    """Pick ``n`` indices keeping class proportions (largest remainder)."""
    labels = np.asarray(labels)
    total = labels.shape[0]
    if n >= total:
        return np.arange(total, dtype=np.int64)
    rng = np.random.default_rng(seed)
    classes = sorted(np.unique(labels).tolist())
    quotas = {}
    remainders = []
    assigned = 0
    for cls in classes:
        count = int((labels == cls).sum())
        exact = n * count / total
        quotas[cls] = int(exact)
        assigned += int(exact)
        remainders.append((exact - int(exact), cls))
    for _, cls in sorted(remainders, reverse=True)[: n - assigned]:
        quotas[cls] += 1
    picked = []
    for cls in classes:
        idx = np.flatnonzero(labels == cls)
        rng.shuffle(idx)
        take = min(quotas[cls], idx.size)
        picked.extend(idx[:take].tolist())
    return np.asarray(sorted(picked), dtype=np.int64)
