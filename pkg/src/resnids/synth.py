"""Schema-conformant synthetic flow datasets for tests and desk-scale runs.

Rows carry class structure: each class gets its own numeric means and its
own categorical value preferences, with tunable noise and optional label
flips, so generated datasets are learnable but not trivially separable.
"""
from __future__ import annotations

import numpy as np

from .errors import ConfigError
from .schemas import GENERIC, Column, Schema

CLASS_NAMES = ["normal", "dos", "probe", "r2l", "u2r", "worm", "scan"]


def synthetic_schema(n_numeric: int = 6, vocab_sizes=(3, 4),
                     with_binary: bool = False) -> Schema:
    cols = [Column(f"num{i}", "numeric") for i in range(n_numeric)]
    cols += [Column(f"cat{i}", "categorical") for i in range(len(vocab_sizes))]
    cols.append(Column("class", "label"))
    if with_binary:
        cols.append(Column("is_attack", "binary"))
    return Schema(dataset_id=GENERIC, columns=tuple(cols))


def synthetic_rows(schema: Schema, n_rows: int, n_classes: int, seed: int = 0,
                   class_sep: float = 2.0, noise: float = 1.0,
                   label_noise: float = 0.0,
                   vocab_sizes=(3, 4)) -> list[list[str]]:
    """Raw string rows (CSV field values) drawn from a seeded class mixture."""
    if not 2 <= n_classes <= len(CLASS_NAMES):
        raise ConfigError(
            f"n_classes must be in 2..{len(CLASS_NAMES)}, got {n_classes}"
        )
    rng = np.random.default_rng(seed)
    numeric_cols = [c for c in schema.columns if c.kind == "numeric"]
    cat_cols = [c for c in schema.columns if c.kind == "categorical"]
    if len(cat_cols) != len(vocab_sizes):
        raise ConfigError(
            f"{len(cat_cols)} categorical columns need {len(cat_cols)} vocab "
            f"sizes, got {len(vocab_sizes)}"
        )
    mu = rng.normal(0.0, class_sep, size=(n_classes, len(numeric_cols)))
    prefs = [rng.dirichlet(np.ones(v) * 0.7, size=n_classes)
             for v in vocab_sizes]
    vocabs = [[f"v{j:02d}" for j in range(v)] for v in vocab_sizes]

    rows = []
    for _ in range(n_rows):
        cls = int(rng.integers(n_classes))
        reported = cls
        if label_noise and rng.random() < label_noise:
            reported = int(rng.integers(n_classes))
        values = {}
        numeric = mu[cls] + rng.normal(0.0, noise, size=len(numeric_cols))
        for c, v in zip(numeric_cols, numeric):
            values[c.name] = repr(float(v))
        for ci, c in enumerate(cat_cols):
            choice = rng.choice(vocab_sizes[ci], p=prefs[ci][cls])
            values[c.name] = vocabs[ci][int(choice)]
        row = []
        for col in schema.columns:
            if col.kind == "label":
                row.append(CLASS_NAMES[reported])
            elif col.kind == "binary":
                row.append("0" if CLASS_NAMES[reported] == "normal" else "1")
            elif col.kind == "ignore":
                row.append("x")
            else:
                row.append(values[col.name])
        rows.append(row)
    return rows


def write_csv(path, rows, header: list[str] | None = None):
    with open(path, "w", encoding="utf-8") as fh:
        if header:
            fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def generate_dataset_files(out_dir, n_rows: int = 400, n_classes: int = 3,
                           n_numeric: int = 6, vocab_sizes=(3, 4),
                           seed: int = 0, class_sep: float = 2.0,
                           noise: float = 1.0, label_noise: float = 0.0):
    """Write ``synth.csv`` and ``schema.txt`` under ``out_dir``; returns
    (csv_path, schema_path, schema)."""
    from pathlib import Path

    from .schemas import schema_to_lines

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    schema = synthetic_schema(n_numeric=n_numeric, vocab_sizes=vocab_sizes)
    rows = synthetic_rows(schema, n_rows, n_classes, seed=seed,
                          class_sep=class_sep, noise=noise,
                          label_noise=label_noise, vocab_sizes=vocab_sizes)
    csv_path = out / "synth.csv"
    schema_path = out / "schema.txt"
    write_csv(csv_path, rows)
    schema_path.write_text(schema_to_lines(schema), encoding="utf-8")
    return csv_path, schema_path, schema
