import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faircate.dataset import ColumnSchema, assign_folds, dump_csv, load_csv
from faircate.errors import DataValidationError, ParameterError, SchemaError

from conftest import make_dataset

SIMPLE_SCHEMA = ColumnSchema(outcome="y", treatment="a", sensitive="s",
                             covariates=("x1",))


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return path


class TestLoadCsv:
    def test_three_valid_rows(self, tmp_path):
        path = write(tmp_path / "ok.csv", "y,a,s,x1\n1.0,0,1,0.5\n2.0,1,0,1.5\n3.0,1,1,2.5\n")
        data = load_csv(path, SIMPLE_SCHEMA)
        assert data.n == 3 and data.d == 1
        assert data.fold is None
        np.testing.assert_array_equal(data.a, [0, 1, 1])

    def test_nonbinary_treatment_names_line(self, tmp_path):
        path = write(tmp_path / "bad.csv", "y,a,s,x1\n1.0,0,1,0.5\n2.0,2,0,1.5\n")
        with pytest.raises(DataValidationError, match="line 3"):
            load_csv(path, SIMPLE_SCHEMA)

    def test_missing_column_is_schema_error(self, tmp_path):
        path = write(tmp_path / "m.csv", "y,a,x1\n1.0,0,0.5\n")
        with pytest.raises(SchemaError, match="'s'"):
            load_csv(path, SIMPLE_SCHEMA)

    def test_missing_value_reported_with_line(self, tmp_path):
        path = write(tmp_path / "gap.csv", "y,a,s,x1\n1.0,0,1,\n")
        with pytest.raises(DataValidationError, match="line 2"):
            load_csv(path, SIMPLE_SCHEMA)

    def test_non_numeric_outcome(self, tmp_path):
        path = write(tmp_path / "nn.csv", "y,a,s,x1\noops,0,1,0.3\n")
        with pytest.raises(DataValidationError, match="not numeric"):
            load_csv(path, SIMPLE_SCHEMA)

    def test_string_coded_case_file(self, tmp_path):
        # rearrest/release outcome study shape: string-coded race, 3 covariates
        rng = np.random.default_rng(0)
        n0, n1 = 2013, 3175
        races = ["Caucasian"] * n0 + ["African-American"] * n1
        lines = ["rearrest,released,race,age,sex,priors"]
        for race in races:
            lines.append(f"{rng.integers(0, 2)},{rng.integers(0, 2)},{race},"
                         f"{rng.integers(18, 70)},{rng.integers(0, 2)},{rng.integers(0, 20)}")
        path = write(tmp_path / "case.csv", "\n".join(lines) + "\n")
        schema = ColumnSchema(outcome="rearrest", treatment="released",
                              sensitive="race", covariates=("age", "sex", "priors"),
                              sensitive_positive="African-American")
        data = load_csv(path, schema)
        assert data.n == n0 + n1 == 5188
        assert data.d == 3
        assert data.s.sum() == n1

    def test_third_sensitive_value_rejected(self, tmp_path):
        path = write(tmp_path / "tri.csv",
                     "y,a,s,x1\n1.0,0,A,0.5\n1.0,0,B,0.5\n1.0,1,C,0.5\n")
        schema = ColumnSchema(outcome="y", treatment="a", sensitive="s",
                              covariates=("x1",), sensitive_positive="A")
        with pytest.raises(DataValidationError, match="line 4"):
            load_csv(path, schema)

    def test_schema_from_dict_missing_key(self):
        with pytest.raises(SchemaError, match="covariates"):
            ColumnSchema.from_dict({"outcome": "y", "treatment": "a", "sensitive": "s"})


class TestRoundTrip:
    @given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64),
                    min_size=2, max_size=20),
           st.integers(0, 2**31))
    @settings(max_examples=30, deadline=None)
    def test_dump_then_load_is_bit_exact(self, values, seed):
        import tempfile
        from pathlib import Path

        n = len(values)
        rng = np.random.default_rng(seed)
        data = make_dataset(y=values, a=rng.integers(0, 2, n),
                            s=rng.integers(0, 2, n),
                            x=np.array(values).reshape(-1, 1) * 0.5)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "dump.csv"
            dump_csv(data, path)
            back = load_csv(path, SIMPLE_SCHEMA)
        np.testing.assert_array_equal(back.y, data.y)
        np.testing.assert_array_equal(back.x, data.x)
        np.testing.assert_array_equal(back.a, data.a)
        np.testing.assert_array_equal(back.s, data.s)


class TestAssignFolds:
    def test_even_split(self):
        data = make_dataset(np.arange(10.0), [0, 1] * 5, [0, 1] * 5, np.zeros((10, 1)))
        folded = assign_folds(data, 2, seed=0)
        sizes = np.bincount(folded.fold)[1:]
        assert sorted(sizes) == [5, 5]

    def test_near_equal_split(self):
        data = make_dataset(np.arange(11.0), [0, 1] * 5 + [0], [0, 1] * 5 + [1],
                            np.zeros((11, 1)))
        folded = assign_folds(data, 2, seed=0)
        assert sorted(np.bincount(folded.fold)[1:]) == [5, 6]

    def test_same_seed_same_folds(self):
        data = make_dataset(np.arange(20.0), [0, 1] * 10, [0, 1] * 10,
                            np.zeros((20, 1)))
        f1 = assign_folds(data, 4, seed=9)
        f2 = assign_folds(data, 4, seed=9)
        np.testing.assert_array_equal(f1.fold, f2.fold)

    def test_k_out_of_range(self):
        data = make_dataset(np.arange(10.0), [0, 1] * 5, [0, 1] * 5, np.zeros((10, 1)))
        with pytest.raises(ParameterError):
            assign_folds(data, 1, seed=0)
        with pytest.raises(ParameterError):
            assign_folds(data, 6, seed=0)

    @given(n=st.integers(8, 60), k=st.integers(2, 4), seed=st.integers(0, 2**31))
    @settings(max_examples=40, deadline=None)
    def test_partition_property(self, n, k, seed):
        if k > n // 2:
            return
        data = make_dataset(np.zeros(n), np.resize([0, 1], n), np.resize([0, 1], n),
                            np.zeros((n, 1)))
        folded = assign_folds(data, k, seed=seed)
        # every index in exactly one fold, labels 1..k, sizes within 1
        assert folded.fold.shape == (n,)
        assert set(np.unique(folded.fold)) == set(range(1, k + 1))
        sizes = np.bincount(folded.fold)[1:]
        assert sizes.max() - sizes.min() <= 1


class TestDatasetModel:
    def test_arrays_frozen(self, tiny_dataset):
        with pytest.raises(ValueError):
            tiny_dataset.y[0] = 99.0

    def test_record_accessor(self, tiny_dataset):
        rec = tiny_dataset.record(1)
        assert rec.y == 2.0 and rec.a == 1 and rec.s == 0 and rec.x == (1.5,)

    def test_take_drops_folds(self, random_dataset):
        subset = random_dataset.take(np.arange(10))
        assert subset.fold is None and subset.n == 10

    def test_bad_fold_labels_rejected(self):
        with pytest.raises(DataValidationError):
            make_dataset([1.0, 2.0, 3.0, 4.0], [0, 1, 0, 1], [0, 1, 0, 1],
                         np.zeros((4, 1)), fold=[1, 1, 1, 3])

    def test_unbalanced_folds_rejected(self):
        with pytest.raises(DataValidationError, match="at most 1"):
            make_dataset(np.zeros(6), [0, 1] * 3, [0, 1] * 3, np.zeros((6, 1)),
                         fold=[1, 1, 1, 1, 1, 2])

    def test_nonbinary_treatment_rejected(self):
        with pytest.raises(DataValidationError):
            make_dataset([1.0], [2], [0], [[0.0]])
