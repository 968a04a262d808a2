import csv

import numpy as np
import pytest
from scipy.special import expit

from faircate.dataset import ColumnSchema, ObservationalDataset, assign_folds


def make_dataset(y, a, s, x, covariate_names=None, fold=None) -> ObservationalDataset:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[0] != len(y):
        x = x.T
    names = covariate_names or tuple(f"x{i+1}" for i in range(x.shape[1]))
    return ObservationalDataset(y=np.asarray(y, dtype=float),
                                a=np.asarray(a), s=np.asarray(s), x=x,
                                covariate_names=tuple(names), fold=fold)


@pytest.fixture
def tiny_dataset():
    return make_dataset(y=[1.0, 2.0, 3.0, 4.0], a=[0, 1, 0, 1],
                        s=[0, 0, 1, 1], x=[[0.5], [1.5], [-0.5], [2.5]])


@pytest.fixture
def random_dataset():
    rng = np.random.default_rng(42)
    n = 80
    data = make_dataset(
        y=rng.normal(size=n), a=rng.integers(0, 2, n), s=rng.integers(0, 2, n),
        x=rng.normal(size=(n, 2)))
    return assign_folds(data, 2, seed=5)


CASE_SCHEMA = ColumnSchema(outcome="rearrest", treatment="released",
                           sensitive="race", covariates=("age", "sex", "priors"),
                           sensitive_positive="groupB")


def write_case_csv(path, n=3000, seed=0):
    """Recidivism-style stand-in file: binary smaller-is-better outcome,
    string-coded sensitive group, release decision correlated with both."""
    rng = np.random.default_rng(seed)
    s = rng.binomial(1, 0.6, n)
    age = rng.integers(18, 70, n)
    sex = rng.binomial(1, 0.8, n)
    priors = rng.poisson(2.0 + 2.0 * s)
    release_logit = 0.8 - 0.25 * priors - 0.4 * s + 0.01 * (age - 40)
    released = rng.binomial(1, expit(release_logit))
    # release helps those with few priors, hurts the heavily-convicted
    effect = -0.8 + 0.25 * priors + 0.3 * s
    base = -0.6 + 0.35 * priors + 0.5 * s - 0.015 * (age - 40)
    rearrest = rng.binomial(1, expit(base + effect * released))
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rearrest", "released", "race", "age", "sex", "priors"])
        for i in range(n):
            writer.writerow([rearrest[i], released[i],
                             "groupB" if s[i] else "groupA",
                             age[i], sex[i], priors[i]])
    return path
