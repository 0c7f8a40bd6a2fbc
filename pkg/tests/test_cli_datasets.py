"""CLI paths that exercise the built-in dataset schemas on synthetic rows."""
import json

import numpy as np
import pytest

from resnids.cli import main
from resnids.errors import EXIT_NUMERIC, EXIT_OK
from resnids.schemas import NSLKDD_LABEL_MAP, NSLKDD_SCHEMA


def run(*argv):
    return main([str(a) for a in argv])


def fake_nslkdd_rows(n, seed=0):
    """Rows in the 43-field KDD file format with a learnable signal."""
    rng = np.random.default_rng(seed)
    protos = ["tcp", "udp", "icmp"]
    services = ["http", "smtp", "ftp_data", "domain_u"]
    flags = ["SF", "S0", "REJ"]
    attacks = ["normal", "neptune", "satan", "guess_passwd"]
    rows = []
    for _ in range(n):
        cls = int(rng.integers(0, len(attacks)))
        fields = []
        for i, col in enumerate(NSLKDD_SCHEMA.columns):
            if col.name == "protocol_type":
                fields.append(protos[cls % 3])
            elif col.name == "service":
                fields.append(services[cls])
            elif col.name == "flag":
                fields.append(flags[(cls + 1) % 3])
            elif col.name == "label":
                fields.append(attacks[cls])
            elif col.name == "difficulty":
                fields.append("21")
            else:
                fields.append(repr(float(cls * 1.5 + rng.normal())))
        rows.append(",".join(fields))
    return rows


@pytest.fixture(scope="module")
def nslkdd_pre(tmp_path_factory):
    d = tmp_path_factory.mktemp("kdd")
    csv = d / "train.csv"
    csv.write_text("\n".join(fake_nslkdd_rows(180, seed=4)) + "\n",
                   encoding="utf-8")
    out = d / "pre"
    assert run("preprocess", "--dataset", "nslkdd", "--input", csv,
               "--out", out, "--folds", "5", "--seed", "0") == EXIT_OK
    return out


class TestNslkddSchemaPath:
    def test_label_grouping_and_width(self, nslkdd_pre):
        summary = json.loads((nslkdd_pre / "summary.json").read_text())
        meta = json.loads((nslkdd_pre / "meta.json").read_text())
        assert set(meta["class_names"]) <= {"Normal", "DoS", "Probe", "R2L",
                                            "U2R"}
        assert meta["normal_index"] == meta["class_names"].index("Normal")
        # 38 numeric + observed vocab sizes
        encoder = json.loads((nslkdd_pre / "encoder.json").read_text())
        vocab = sum(len(e[2]) for e in encoder["encoders"]
                    if e[0] == "categorical")
        assert summary["encoded_width"] == 38 + vocab

    def test_epochs_default_to_50_for_nslkdd(self, nslkdd_pre, tmp_path):
        out = tmp_path / "run"
        code = run("train", "--dataset", nslkdd_pre, "--arch", "residual",
                   "--blocks", "1", "--kernel", "3", "--batch", "256",
                   "--seed", "0", "--out", out)
        assert code == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["training"]["epochs"] == 50

    def test_label_map_covers_train_and_test_vocabularies(self):
        assert len(NSLKDD_LABEL_MAP) == 40  # normal + 39 attack names
        assert set(NSLKDD_LABEL_MAP.values()) == {"Normal", "DoS", "Probe",
                                                  "R2L", "U2R"}


def test_non_finite_features_abort_with_exit_4(tmp_path):
    d = tmp_path / "synth"
    assert run("synth", "--out", d, "--rows", "120", "--classes", "2",
               "--numeric", "3", "--vocab-sizes", "2", "--seed", "0") == EXIT_OK
    pre = tmp_path / "pre"
    assert run("preprocess", "--dataset", "generic",
               "--input", d / "synth.csv", "--schema", d / "schema.txt",
               "--out", pre, "--folds", "4", "--seed", "0") == EXIT_OK
    # corrupt the encoded features to simulate a numeric blow-up
    with np.load(pre / "encoded.npz", allow_pickle=False) as z:
        feats, onehot, y = z["features"].copy(), z["onehot"], z["y"]
    feats[0, 0] = np.nan
    with open(pre / "encoded.npz", "wb") as fh:
        np.savez(fh, features=feats, onehot=onehot, y=y)
    code = run("train", "--dataset", pre, "--arch", "plain", "--blocks", "1",
               "--kernel", "3", "--epochs", "1", "--batch", "64",
               "--seed", "0", "--out", tmp_path / "run")
    assert code == EXIT_NUMERIC


def test_non_finite_numeric_rows_are_rejected(tmp_path):
    csv = tmp_path / "bad.csv"
    csv.write_text("1.0,a,n\ninf,a,n\nnan,b,n\n2.0,b,n\n", encoding="utf-8")
    from resnids.data import parse_csv
    from resnids.schemas import Column, GENERIC, Schema

    schema = Schema(GENERIC, (Column("v", "numeric"),
                              Column("c", "categorical"),
                              Column("class", "label")))
    raw = parse_csv(csv, schema)
    assert raw.n_rows == 2
    assert [r.line for r in raw.rejects] == [2, 3]
