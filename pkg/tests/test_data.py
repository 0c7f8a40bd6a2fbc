import numpy as np
import pytest

from resnids.data import (
    apply_encoder,
    batch_iter,
    fit_encoder,
    make_folds,
    merge_raw,
    parse_csv,
    stratified_subsample,
)
from resnids.errors import ConfigError, DataError
from resnids.schemas import (
    Column,
    GENERIC,
    NSLKDD_SCHEMA,
    Schema,
    UNSWNB15_SCHEMA,
    label_class,
    parse_schema_file,
    schema_to_lines,
)
from resnids.synth import synthetic_rows, synthetic_schema, write_csv


@pytest.fixture
def tiny_schema():
    return Schema(
        dataset_id=GENERIC,
        columns=(
            Column("f1", "numeric"),
            Column("cat", "categorical"),
            Column("f2", "numeric"),
            Column("class", "label"),
        ),
    )


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


class TestSchemas:
    def test_builtin_field_counts(self):
        # 41 feature columns + label + difficulty
        assert NSLKDD_SCHEMA.n_fields == 43
        assert len(NSLKDD_SCHEMA.feature_columns()) == 41
        # id + 42 feature columns + attack_cat + binary label
        assert UNSWNB15_SCHEMA.n_fields == 45
        assert len(UNSWNB15_SCHEMA.feature_columns()) == 42

    def test_kdd_label_grouping(self):
        assert label_class("nslkdd", "normal") == "Normal"
        assert label_class("nslkdd", "neptune") == "DoS"
        assert label_class("nslkdd", "satan") == "Probe"
        assert label_class("nslkdd", "guess_passwd") == "R2L"
        assert label_class("nslkdd", "rootkit") == "U2R"
        assert label_class("nslkdd", "not_an_attack") is None

    def test_unsw_empty_label_is_normal(self):
        assert label_class("unswnb15", "") == "Normal"
        assert label_class("unswnb15", " Exploits ") == "Exploits"

    def test_schema_file_round_trip(self, tmp_path, tiny_schema):
        p = tmp_path / "schema.txt"
        p.write_text(schema_to_lines(tiny_schema), encoding="utf-8")
        loaded = parse_schema_file(p)
        assert loaded.columns == tiny_schema.columns

    def test_schema_file_rejects_bad_kind(self, tmp_path):
        p = tmp_path / "schema.txt"
        write_lines(p, ["a:numeric", "b:flag", "class:label"])
        with pytest.raises(DataError, match="flag"):
            parse_schema_file(p)


class TestParseCsv:
    def test_three_typed_rows(self, tmp_path, tiny_schema):
        p = tmp_path / "d.csv"
        write_lines(p, ["1.5,a,2,normal", "2.5,b,3,dos", "0.5,a,4,dos"])
        raw = parse_csv(p, tiny_schema)
        assert raw.n_rows == 3
        assert raw.rows[0][0] == 1.5 and raw.rows[0][1] == "a"
        assert raw.labels == ["normal", "dos", "dos"]
        assert raw.rejects == []

    def test_header_autodetected(self, tmp_path, tiny_schema):
        p = tmp_path / "d.csv"
        write_lines(p, ["f1,cat,f2,class", "1,a,2,normal"])
        raw = parse_csv(p, tiny_schema)
        assert raw.n_rows == 1

    def test_bad_numeric_goes_to_rejects(self, tmp_path, tiny_schema):
        p = tmp_path / "d.csv"
        write_lines(p, ["1,a,2,normal", "oops,a,2,dos", "3,b,x,dos"])
        raw = parse_csv(p, tiny_schema)
        assert raw.n_rows == 1
        assert len(raw.rejects) == 2
        assert raw.rejects[0].line == 2 and raw.rejects[0].column == "f1"
        assert raw.rejects[1].line == 3 and raw.rejects[1].column == "f2"

    def test_column_count_mismatch_is_fatal(self, tmp_path, tiny_schema):
        p = tmp_path / "d.csv"
        write_lines(p, ["1,a,2,normal", "1,a,2"])
        with pytest.raises(DataError, match="expected 4 fields"):
            parse_csv(p, tiny_schema)

    def test_unknown_kdd_label_rejected(self, tmp_path):
        p = tmp_path / "d.csv"
        row = ["0"] * 43
        row[1], row[2], row[3] = "tcp", "http", "SF"
        row[41] = "martian_attack"
        write_lines(p, [",".join(row)])
        raw = parse_csv(p, NSLKDD_SCHEMA)
        assert raw.n_rows == 0
        assert raw.rejects[0].column == "label"


class TestEncoder:
    def test_single_categorical_column_expansion(self):
        schema = Schema(GENERIC, (Column("cat", "categorical"),
                                  Column("class", "label")))
        rows = [["a", "x"], ["b", "x"], ["a", "y"]]
        labels = ["x", "x", "y"]
        model = fit_encoder(schema, rows, labels)
        assert model.feature_names == ["cat=a", "cat=b"]
        raw_indicator_rows = [[1, 0], [0, 1], [1, 0]]
        encoded = apply_encoder(model, schema, rows, labels)
        recovered = encoded.features * np.where(model.stds > 0, model.stds, 1.0) \
            + model.means
        assert np.allclose(recovered, raw_indicator_rows, atol=1e-12)

    def test_width_formula(self, tiny_schema):
        rows = [[1.0, "a", 2.0, "n"], [2.0, "b", 3.0, "n"],
                [3.0, "c", 4.0, "a"]]
        model = fit_encoder(tiny_schema, rows, ["n", "n", "a"])
        assert model.width == 2 + 3  # 2 numeric + |{a,b,c}|

    def test_encoded_columns_are_standardized(self):
        schema = synthetic_schema(n_numeric=4, vocab_sizes=(3,))
        rows = synthetic_rows(schema, 200, 3, seed=1, vocab_sizes=(3,))
        raw_rows = [[float(v) if c.kind == "numeric" else v
                     for v, c in zip(r, schema.columns)] for r in rows]
        labels = [r[schema.label_index] for r in rows]
        model = fit_encoder(schema, raw_rows, labels)
        encoded = apply_encoder(model, schema, raw_rows, labels)
        nonconstant = model.stds > 0
        means = encoded.features.mean(axis=0)
        stds = encoded.features.std(axis=0)
        assert np.all(np.abs(means[nonconstant]) < 1e-9)
        assert np.all(np.abs(stds[nonconstant] - 1.0) < 1e-9)

    def test_scaling_inverts_exactly(self):
        schema = Schema(GENERIC, (Column("v", "numeric"), Column("c", "label")))
        rng = np.random.default_rng(3)
        values = rng.normal(5.0, 3.0, size=50)
        rows = [[float(v), "n"] for v in values]
        model = fit_encoder(schema, rows, ["n"] * 50)
        encoded = apply_encoder(model, schema, rows, ["n"] * 50)
        recovered = encoded.features[:, 0] * model.stds[0] + model.means[0]
        assert np.all(np.abs(recovered - values) < 1e-9)

    def test_constant_column_becomes_zeros(self):
        schema = Schema(GENERIC, (Column("v", "numeric"), Column("c", "label")))
        rows = [[7.0, "n"]] * 5
        model = fit_encoder(schema, rows, ["n"] * 5)
        encoded = apply_encoder(model, schema, rows, ["n"] * 5)
        assert np.all(encoded.features == 0.0)

    def test_unseen_value_maps_to_zero_group_and_counts(self, tiny_schema):
        fit_rows = [[1.0, "a", 2.0, "n"], [2.0, "b", 3.0, "n"]]
        model = fit_encoder(tiny_schema, fit_rows, ["n", "n"])
        apply_rows = [[1.0, "zzz", 2.0, "n"]]
        encoded = apply_encoder(model, tiny_schema, apply_rows, ["n"])
        assert encoded.unseen_count == 1
        assert encoded.unseen_by_column == {"cat": 1}
        # indicator group is all zero pre-scaling: post-scaling it sits at
        # the centered value of zero
        raw = encoded.features[0, 1:3] * np.where(model.stds[1:3] > 0,
                                                  model.stds[1:3], 1.0) \
            + model.means[1:3]
        assert np.allclose(raw, [0.0, 0.0], atol=1e-12)

    def test_apply_is_idempotent_in_result(self, tiny_schema):
        rows = [[1.0, "a", 2.0, "n"], [2.0, "b", 3.0, "a"]]
        labels = ["n", "a"]
        model = fit_encoder(tiny_schema, rows, labels)
        e1 = apply_encoder(model, tiny_schema, rows, labels)
        e2 = apply_encoder(model, tiny_schema, rows, labels)
        assert np.array_equal(e1.features, e2.features)
        assert np.array_equal(e1.onehot, e2.onehot)

    def test_random_schema_width_matches_analytic_formula(self):
        rng = np.random.default_rng(12)
        for trial in range(10):
            n_numeric = int(rng.integers(1, 6))
            vocab_sizes = tuple(int(v) for v in rng.integers(2, 6, size=rng.integers(1, 4)))
            schema = synthetic_schema(n_numeric=n_numeric, vocab_sizes=vocab_sizes)
            rows = synthetic_rows(schema, 120, 3, seed=trial,
                                  vocab_sizes=vocab_sizes)
            typed = [[float(v) if c.kind == "numeric" else v
                      for v, c in zip(r, schema.columns)] for r in rows]
            labels = [r[schema.label_index] for r in rows]
            model = fit_encoder(schema, typed, labels)
            observed_vocab = sum(
                len(e[2]) for e in model.encoders if e[0] == "categorical"
            )
            assert model.width == n_numeric + observed_vocab

    def test_onehot_labels_and_attack_mask(self, tiny_schema):
        rows = [[1.0, "a", 2.0, "normal"], [2.0, "a", 3.0, "dos"],
                [3.0, "b", 4.0, "probe"]]
        labels = ["normal", "dos", "probe"]
        model = fit_encoder(tiny_schema, rows, labels)
        encoded = apply_encoder(model, tiny_schema, rows, labels)
        assert encoded.class_names == ["dos", "normal", "probe"]
        assert encoded.normal_index == 1
        assert encoded.attack_mask.tolist() == [True, False, True]
        assert np.array_equal(encoded.onehot.sum(axis=1), np.ones(3))
        assert encoded.y.tolist() == [1, 0, 2]

    def test_encoder_json_round_trip(self, tiny_schema):
        from resnids.data import EncoderModel

        rows = [[1.0, "a", 2.0, "n"], [2.0, "b", 3.0, "a"]]
        model = fit_encoder(tiny_schema, rows, ["n", "a"])
        clone = EncoderModel.from_json(model.to_json())
        assert clone.encoders == model.encoders
        assert np.array_equal(clone.means, model.means)
        assert np.array_equal(clone.stds, model.stds)
        assert clone.class_names == model.class_names


class TestFolds:
    def test_balanced_two_class_k10(self):
        labels = np.array([0] * 50 + [1] * 50)
        plan = make_folds(labels, k=10, seed=0)
        for fold in plan.folds:
            assert fold.size == 10
            assert (labels[fold] == 0).sum() == 5
            assert (labels[fold] == 1).sum() == 5

    @pytest.mark.parametrize("k", [2, 5, 10])
    def test_partition_laws_on_random_labels(self, k):
        rng = np.random.default_rng(k)
        for trial in range(5):
            n = int(rng.integers(30, 120))
            labels = rng.integers(0, 4, size=n)
            plan = make_folds(labels, k=k, seed=trial)
            all_idx = np.concatenate(plan.folds)
            assert sorted(all_idx.tolist()) == list(range(n))
            assert len(set(all_idx.tolist())) == n
            for cls in np.unique(labels):
                per_fold = [int((labels[f] == cls).sum()) for f in plan.folds]
                assert max(per_fold) - min(per_fold) <= 1

    def test_rare_class_lands_in_distinct_folds(self):
        labels = np.array(["common"] * 60 + ["rare"] * 3)
        plan = make_folds(labels, k=10, seed=4)
        rare_folds = [i for i, f in enumerate(plan.folds)
                      if np.any(labels[f] == "rare")]
        assert len(rare_folds) == 3

    def test_deterministic_under_seed(self):
        labels = np.random.default_rng(5).integers(0, 3, size=40)
        a = make_folds(labels, k=5, seed=7)
        b = make_folds(labels, k=5, seed=7)
        assert all(np.array_equal(x, y) for x, y in zip(a.folds, b.folds))

    def test_k_bounds(self):
        with pytest.raises(ConfigError):
            make_folds(np.zeros(5), k=1)
        with pytest.raises(ConfigError):
            make_folds(np.zeros(5), k=6)

    def test_train_test_split_complement(self):
        labels = np.random.default_rng(6).integers(0, 2, size=30)
        plan = make_folds(labels, k=5, seed=0)
        train = set(plan.train_indices(2).tolist())
        test = set(plan.test_indices(2).tolist())
        assert train | test == set(range(30))
        assert train & test == set()

    def test_fold_plan_json_round_trip(self):
        from resnids.data import FoldPlan

        labels = np.random.default_rng(7).integers(0, 2, size=20)
        plan = make_folds(labels, k=4, seed=3)
        clone = FoldPlan.from_json(plan.to_json())
        assert clone.k == plan.k and clone.seed == plan.seed
        assert all(np.array_equal(a, b) for a, b in zip(clone.folds, plan.folds))


class TestBatchIter:
    def test_batch_sizes_with_short_tail(self):
        feats = np.zeros((9000, 2))
        onehot = np.zeros((9000, 2))
        sizes = [x.shape[0] for x, _, _ in
                 batch_iter(feats, onehot, np.arange(9000), 4000, seed=0)]
        assert sizes == [4000, 4000, 1000]

    def test_same_seed_same_order(self):
        feats = np.arange(40, dtype=float).reshape(20, 2)
        onehot = np.zeros((20, 2))
        a = [idx.tolist() for _, _, idx in
             batch_iter(feats, onehot, np.arange(20), 6, seed=3)]
        b = [idx.tolist() for _, _, idx in
             batch_iter(feats, onehot, np.arange(20), 6, seed=3)]
        assert a == b

    def test_every_index_exactly_once(self):
        feats = np.zeros((25, 1))
        onehot = np.zeros((25, 1))
        indices = np.arange(5, 25)
        seen = []
        for _, _, idx in batch_iter(feats, onehot, indices, 7, seed=1):
            seen.extend(idx.tolist())
        assert sorted(seen) == list(range(5, 25))


class TestSubsample:
    def test_class_proportions_preserved(self):
        labels = np.array([0] * 800 + [1] * 200)
        idx = stratified_subsample(labels, 100, seed=0)
        assert idx.size == 100
        assert (labels[idx] == 0).sum() == 80
        assert (labels[idx] == 1).sum() == 20

    def test_requesting_everything_returns_all(self):
        labels = np.array([0, 1, 1])
        assert stratified_subsample(labels, 10, seed=0).tolist() == [0, 1, 2]


class TestStrictMode:
    def test_encoder_fitted_on_train_fold_only(self, tiny_schema):
        rows = [[float(i), "a" if i % 2 else "b", 1.0, "n"] for i in range(10)]
        rows.append([99.0, "zzz", 1.0, "n"])  # only in the "test" part
        labels = ["n"] * 11
        model = fit_encoder(tiny_schema, rows[:10], labels[:10])
        encoded = apply_encoder(model, tiny_schema, rows, labels)
        assert encoded.unseen_count == 1
        assert model.width == 2 + 2

    def test_class_unseen_at_fit_time_raises(self, tiny_schema):
        rows = [[1.0, "a", 2.0, "n"]]
        model = fit_encoder(tiny_schema, rows, ["n"])
        with pytest.raises(DataError, match="mystery"):
            apply_encoder(model, tiny_schema, rows, ["mystery"])


def test_merge_raw_concatenates(tmp_path, tiny_schema):
    p1, p2 = tmp_path / "a.csv", tmp_path / "b.csv"
    write_lines(p1, ["1,a,2,n"])
    write_lines(p2, ["2,b,3,x", "bad,b,3,x"])
    raw = merge_raw([parse_csv(p1, tiny_schema), parse_csv(p2, tiny_schema)])
    assert raw.n_rows == 2
    assert len(raw.rejects) == 1


def test_synthetic_csv_round_trips_through_parse(tmp_path):
    schema = synthetic_schema(n_numeric=3, vocab_sizes=(3, 2))
    rows = synthetic_rows(schema, 50, 3, seed=0, vocab_sizes=(3, 2))
    p = tmp_path / "synth.csv"
    write_csv(p, rows)
    raw = parse_csv(p, schema)
    assert raw.n_rows == 50
    assert raw.rejects == []
    assert set(raw.labels) <= {"normal", "dos", "probe"}
