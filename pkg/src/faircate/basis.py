"""Polynomial basis expansion b(W) and its empirical Gram matrix.

The expansion is the full graded monomial basis up to a total degree over a
selected set of prediction-time variables (the sensitive feature plus any
subset of covariates). Monomial powers of two-valued variables are reduced to
degree one and duplicates dropped: with an intercept present, any power of a
variable supported on two points is affinely dependent on the variable
itself, so keeping such columns would make the Gram matrix exactly singular.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations_with_replacement

import numpy as np

from .dataset import ObservationalDataset
from .errors import ParameterError

SENSITIVE_NAME = "s"


@dataclass(frozen=True)
class BasisSpec:
    """Configuration of the expansion.

    ``variables`` lists the prediction-time variable set, naming the
    sensitive feature as ``"s"`` and covariates by their dataset names;
    ``None`` selects the sensitive feature plus every covariate. Variables are
    centered and scaled by training-sample moments when ``standardize`` is
    set (the transform is stored and reapplied at prediction time).
    """

    degree: int = 3
    include_intercept: bool = True
    variables: tuple[str, ...] | None = None
    standardize: bool = True
    fixed_standardization: tuple[tuple[float, ...], tuple[float, ...]] | None = None

    def __post_init__(self):
        if self.degree < 1:
            raise ParameterError(f"basis degree must be >= 1, got {self.degree}")
        if self.variables is not None and len(self.variables) == 0:
            raise ParameterError("variable selector must be nonempty")
        if self.fixed_standardization is not None:
            shift, scale = self.fixed_standardization
            if len(shift) != len(scale):
                raise ParameterError("fixed standardization shift/scale lengths differ")
            if any(v <= 0 for v in scale):
                raise ParameterError("fixed standardization scales must be positive")


def monomial_exponents(n_vars: int, degree: int, include_intercept: bool) -> np.ndarray:
    """Exponent matrix (k, n_vars) in graded ordering: total degree ascending,
    earlier variables first within a degree."""
    rows = []
    if include_intercept:
        rows.append((0,) * n_vars)
    for total in range(1, degree + 1):
        for combo in combinations_with_replacement(range(n_vars), total):
            e = [0] * n_vars
            for v in combo:
                e[v] += 1
            rows.append(tuple(e))
    return np.array(rows, dtype=int)


def _reduce_exponents(exponents: np.ndarray, two_valued: np.ndarray,
                      include_intercept: bool) -> np.ndarray:
    """Cap exponents of two-valued variables at 1 and drop duplicate
    monomials (first occurrence in graded order wins)."""
    reduced = exponents.copy()
    for j, flag in enumerate(two_valued):
        if flag and include_intercept:
            reduced[:, j] = np.minimum(reduced[:, j], 1)
    seen: set[tuple[int, ...]] = set()
    keep = []
    for i, row in enumerate(map(tuple, reduced)):
        if row not in seen:
            seen.add(row)
            keep.append(i)
    return reduced[keep]


def _term_label(exponent: np.ndarray, names: tuple[str, ...]) -> str:
    if not exponent.any():
        return "1"
    parts = []
    for name, e in zip(names, exponent):
        if e == 1:
            parts.append(name)
        elif e > 1:
            parts.append(f"{name}^{e}")
    return "*".join(parts)


@dataclass(frozen=True)
class BasisMatrix:
    """Evaluated basis on a training sample plus everything needed to
    evaluate the same columns on new data."""

    values: np.ndarray            # (n, k) rows b(W_i)^T
    gram: np.ndarray              # (k, k) empirical second moment of b(W)
    term_labels: tuple[str, ...]
    spec: BasisSpec
    variable_names: tuple[str, ...]
    shift: np.ndarray             # (p,)
    scale: np.ndarray             # (p,)
    exponents: np.ndarray         # (k, p)

    @property
    def k(self) -> int:
        return self.values.shape[1]

    def evaluate(self, variables: np.ndarray) -> np.ndarray:
        """Basis rows for raw variable values (m, p) in variable_names order."""
        raw = np.atleast_2d(np.asarray(variables, dtype=float))
        if raw.shape[1] != len(self.variable_names):
            raise ParameterError(
                f"expected {len(self.variable_names)} variables, got {raw.shape[1]}")
        z = (raw - self.shift) / self.scale
        return _evaluate_monomials(z, self.exponents)

    def evaluate_dataset(self, data: ObservationalDataset) -> np.ndarray:
        return self.evaluate(variable_matrix(data, self.variable_names))

    def term_index(self, label: str) -> int:
        try:
            return self.term_labels.index(label)
        except ValueError:
            raise ParameterError(f"no basis term labelled {label!r}; "
                                 f"have {list(self.term_labels)}") from None


def variable_matrix(data: ObservationalDataset, names: tuple[str, ...]) -> np.ndarray:
    cols = []
    for name in names:
        if name == SENSITIVE_NAME:
            cols.append(data.s.astype(float))
        elif name in data.covariate_names:
            cols.append(data.x[:, data.covariate_names.index(name)])
        else:
            raise ParameterError(f"unknown basis variable {name!r}; "
                                 f"dataset has {(SENSITIVE_NAME, *data.covariate_names)}")
    return np.column_stack(cols)


def _evaluate_monomials(z: np.ndarray, exponents: np.ndarray) -> np.ndarray:
    n, p = z.shape
    max_e = int(exponents.max(initial=0))
    powers = np.ones((max_e + 1, n, p))
    for e in range(1, max_e + 1):
        powers[e] = powers[e - 1] * z
    out = np.ones((n, exponents.shape[0]))
    for j, expo in enumerate(exponents):
        for v, e in enumerate(expo):
            if e > 0:
                out[:, j] *= powers[e, :, v]
    return out


def expand(data: ObservationalDataset, spec: BasisSpec) -> BasisMatrix:
    """Build the basis expansion on a training sample.

    Column ordering is graded lexicographic and deterministic. Emits a
    warning (not an error) when there are more columns than records, since
    the Gram matrix is then rank-deficient.
    """
    names = spec.variables if spec.variables is not None \
        else (SENSITIVE_NAME, *data.covariate_names)
    raw = variable_matrix(data, tuple(names))
    if spec.fixed_standardization is not None:
        shift = np.asarray(spec.fixed_standardization[0], dtype=float)
        scale = np.asarray(spec.fixed_standardization[1], dtype=float)
        if shift.shape[0] != raw.shape[1]:
            raise ParameterError(
                f"fixed standardization covers {shift.shape[0]} variables, "
                f"basis has {raw.shape[1]}")
    elif spec.standardize:
        shift = raw.mean(axis=0)
        scale = raw.std(axis=0)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        shift = np.zeros(raw.shape[1])
        scale = np.ones(raw.shape[1])
    z = (raw - shift) / scale

    two_valued = np.array([np.unique(col).size <= 2 for col in raw.T])
    exponents = monomial_exponents(raw.shape[1], spec.degree, spec.include_intercept)
    exponents = _reduce_exponents(exponents, two_valued, spec.include_intercept)

    values = _evaluate_monomials(z, exponents)
    if values.shape[1] > data.n:
        warnings.warn(
            f"basis has k={values.shape[1]} columns for n={data.n} records; "
            "the Gram matrix cannot be positive definite", stacklevel=2)
    gram = values.T @ values / data.n
    gram = (gram + gram.T) / 2.0
    labels = tuple(_term_label(e, tuple(names)) for e in exponents)
    return BasisMatrix(values=values, gram=gram, term_labels=labels, spec=spec,
                       variable_names=tuple(names), shift=shift, scale=scale,
                       exponents=exponents)


@dataclass(frozen=True)
class A1Diagnostic:
    """Smallest Gram eigenvalue versus a positive-definiteness tolerance."""

    min_eigenvalue: float
    tol: float
    passed: bool


def check_a1(gram: np.ndarray, tol: float = 1e-10) -> A1Diagnostic:
    """Check that the Gram matrix is positive definite (smallest eigenvalue
    above tol). Pure diagnostic; never raises."""
    gram = np.asarray(gram, dtype=float)
    if not np.allclose(gram, gram.T, atol=1e-12, rtol=0):
        raise ParameterError("gram matrix must be symmetric")
    min_eig = float(np.linalg.eigvalsh(gram)[0])
    return A1Diagnostic(min_eigenvalue=min_eig, tol=tol, passed=min_eig > tol)
