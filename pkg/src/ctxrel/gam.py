"""Penalized additive models: B-spline smooths, tensor interactions,
ridge-coded random intercepts, GCV smoothing selection, and AIC.

The model is Gaussian penalized least squares,

    minimize  ||y - X b||^2 + sum_j lambda_j b' P_j b,

where X stacks a global intercept with one design block per term and
each P_j is a positive-semidefinite penalty on its block. Smooth and
tensor blocks carry a sum-to-zero constraint (absorbed by a null-space
reparameterization before solving) so they are identifiable next to the
intercept. Smoothing parameters minimize GCV = n * RSS / (n - edf)^2 by
coordinate descent over a logarithmic grid, and

    AIC = n * ln(RSS / n) + 2 * (edf + 1)

with edf the trace of the influence matrix (+1 for the scale
parameter). Selection is GCV rather than REML: simpler, deterministic,
and adequate for delta-AIC ranking at desk scale, though fitted lambdas
will not match REML-based fits exactly.

Fitting is single-threaded and deterministic; independent fits may run
concurrently with no shared mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve, null_space


class GamError(ValueError):
    """Base error for model construction and fitting."""


class DegenerateX(GamError):
    """All covariate values equal; no basis can be placed."""


class KTooSmall(GamError):
    """Basis size too small for the requested degree or penalty order."""


class SingleLevel(GamError):
    """A random intercept needs at least two levels."""


class Singularity(GamError):
    """Penalized normal equations are rank-deficient."""


class NonFinite(GamError):
    """Non-finite values in the response or design."""


class NMismatch(GamError):
    """AIC difference across fits with different row counts."""


class UnknownTerm(GamError):
    """No fitted term with the requested label."""


@dataclass(frozen=True)
class BSplineBasis:
    """A fixed cubic (or other degree) B-spline basis, reusable on grids.

    ``knots`` is the full knot vector including the ``degree`` extension
    knots on each side; the basis proper lives on
    ``[knots[degree], knots[-degree-1]]`` (the data range) and evaluation
    clamps inputs to it.
    """

    knots: np.ndarray
    degree: int

    @property
    def nbases(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[self.degree]), float(self.knots[-self.degree - 1])

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        lo, hi = self.domain
        x = np.clip(x, lo, hi)
        return BSpline.design_matrix(x, self.knots, self.degree).toarray()


def make_bspline_basis(x: np.ndarray, k: int, degree: int = 3) -> BSplineBasis:
    """Place a k-function B-spline basis on evenly spaced knots over x.

    Breakpoints are evenly spaced with the boundary ones at min(x) and
    max(x), then extended by ``degree`` extra knots of the same spacing
    past each boundary. Even spacing is load-bearing: it is what makes
    the difference penalty's null space correspond to straight lines in
    the covariate, so heavy smoothing shrinks a smooth toward a linear
    trend and exactly linear signals are reproduced unpenalized.

    Raises:
        KTooSmall: fewer than degree+1 basis functions requested.
        DegenerateX: all x equal.
        NonFinite: non-finite x.
    """
    x = np.asarray(x, dtype=np.float64)
    if k < degree + 1:
        raise KTooSmall(f"k={k} needs at least degree+1={degree + 1} basis functions")
    if not np.all(np.isfinite(x)):
        raise NonFinite("covariate contains non-finite values")
    lo, hi = float(np.min(x)), float(np.max(x))
    if lo == hi:
        raise DegenerateX("all covariate values are equal")
    n_breaks = k - degree + 1
    spacing = (hi - lo) / (n_breaks - 1)
    knots = lo + spacing * np.arange(-degree, n_breaks + degree)
    knots[degree] = lo
    knots[-degree - 1] = hi
    return BSplineBasis(knots=knots, degree=degree)


def bspline_basis(x: np.ndarray, k: int, degree: int = 3) -> np.ndarray:
    """Evaluate an evenly knotted B-spline basis at x (n x k matrix)."""
    return make_bspline_basis(x, k, degree).evaluate(x)


def gaussian_aic(n: int, rss: float, edf: float) -> float:
    """Gaussian profile-likelihood AIC: n*ln(RSS/n) + 2*(edf + 1).

    The +1 charges the scale parameter. Any fixed convention preserves
    AIC differences on equal n; this one is used for every fit here.
    """
    return n * float(np.log(max(rss, np.finfo(np.float64).tiny) / n)) + 2.0 * (edf + 1.0)


def difference_penalty(k: int, order: int = 2) -> np.ndarray:
    """D'D for the order-th difference operator D ((k-order) x k).

    The order-2 penalty's null space contains constant and linear
    coefficient sequences, so heavy smoothing shrinks toward a line.

    Raises:
        KTooSmall: ``k <= order``.
    """
    if k <= order:
        raise KTooSmall(f"difference penalty needs k > order, got k={k}, order={order}")
    D = np.diff(np.eye(k), n=order, axis=0)
    return D.T @ D


@dataclass
class TermSpec:
    """One additive term: design block, penalties, and constraint flag.

    ``basis`` (smooth) or ``bases`` (tensor) keep the knot recipes so
    fitted terms can be re-evaluated on prediction grids; ``levels``
    records the category order for random intercepts.
    """

    kind: str  # "smooth" | "tensor" | "random_intercept" | "parametric"
    label: str
    design: np.ndarray
    penalties: list[np.ndarray] = field(default_factory=list)
    center: bool = False
    basis: Optional[BSplineBasis] = None
    bases: Optional[tuple[BSplineBasis, BSplineBasis]] = None
    levels: Optional[tuple[str, ...]] = None

    def __post_init__(self):
        ncols = self.design.shape[1]
        for P in self.penalties:
            if P.shape != (ncols, ncols):
                raise GamError(
                    f"term {self.label!r}: penalty shape {P.shape} does not match "
                    f"{ncols} design columns"
                )


def smooth_term(
    x: np.ndarray, k: int = 10, degree: int = 3, order: int = 2, label: str = "s(x)"
) -> TermSpec:
    """Univariate penalized B-spline smooth with a difference penalty."""
    basis = make_bspline_basis(x, k, degree)
    return TermSpec(
        kind="smooth",
        label=label,
        design=basis.evaluate(x),
        penalties=[difference_penalty(k, order)],
        center=True,
        basis=basis,
    )


def tensor_term(
    x1: np.ndarray,
    x2: np.ndarray,
    k1: int = 5,
    k2: int = 5,
    degree: int = 3,
    order: int = 2,
    label: str = "te(x1,x2)",
) -> TermSpec:
    """Tensor-product interaction of two covariates.

    The design is the row-wise Kronecker product of the marginal bases
    (n x k1*k2) with two penalties, P1 (x) I and I (x) P2, one smoothing
    parameter each.
    """
    x1 = np.asarray(x1, dtype=np.float64)
    x2 = np.asarray(x2, dtype=np.float64)
    if x1.shape != x2.shape:
        raise GamError(f"tensor covariates differ in length: {x1.shape} vs {x2.shape}")
    b1 = make_bspline_basis(x1, k1, degree)
    b2 = make_bspline_basis(x2, k2, degree)
    B1 = b1.evaluate(x1)
    B2 = b2.evaluate(x2)
    n = B1.shape[0]
    design = np.einsum("ij,ik->ijk", B1, B2).reshape(n, k1 * k2)
    P1 = np.kron(difference_penalty(k1, order), np.eye(k2))
    P2 = np.kron(np.eye(k1), difference_penalty(k2, order))
    return TermSpec(
        kind="tensor",
        label=label,
        design=design,
        penalties=[P1, P2],
        center=True,
        bases=(b1, b2),
    )


def random_intercept_term(levels: Sequence[str], label: str = "re(group)") -> TermSpec:
    """Ridge-penalized one-hot intercepts, one per category level.

    The identity penalty handles identifiability against the global
    intercept, so no centering constraint is applied.

    Raises:
        SingleLevel: fewer than two distinct levels.
    """
    labels = [str(v) for v in levels]
    uniq = tuple(sorted(set(labels)))
    if len(uniq) < 2:
        raise SingleLevel(f"random intercept needs >= 2 levels, got {len(uniq)}")
    index = {level: j for j, level in enumerate(uniq)}
    design = np.zeros((len(labels), len(uniq)))
    design[np.arange(len(labels)), [index[v] for v in labels]] = 1.0
    return TermSpec(
        kind="random_intercept",
        label=label,
        design=design,
        penalties=[np.eye(len(uniq))],
        center=False,
        levels=uniq,
    )


def parametric_term(columns: np.ndarray, label: str = "linear") -> TermSpec:
    """Unpenalized, uncentered design columns."""
    columns = np.asarray(columns, dtype=np.float64)
    if columns.ndim == 1:
        columns = columns[:, None]
    return TermSpec(kind="parametric", label=label, design=columns)


@dataclass(frozen=True)
class LambdaSearch:
    """Grid configuration for GCV coordinate descent.

    ``fixed`` pins one lambda per penalty and skips the search entirely
    (useful for oracle checks and limit-behavior studies).
    """

    n_points: int = 30
    lam_min: float = 1e-4
    lam_max: float = 1e6
    sweeps: int = 3
    fixed: Optional[tuple[float, ...]] = None

    def grid(self) -> np.ndarray:
        return np.geomspace(self.lam_min, self.lam_max, self.n_points)


@dataclass
class _FittedTerm:
    spec: TermSpec
    cols: slice
    transform: Optional[np.ndarray]  # constraint null-space basis, or None
    penalty_indices: tuple[int, ...]


@dataclass
class FitResult:
    """A fitted penalized additive model.

    ``coefficients`` stacks the intercept (index 0) with each term's
    reparameterized block; ``term_edf`` maps term labels (plus
    "intercept") to their share of the influence-matrix trace.
    """

    coefficients: np.ndarray
    lambdas: tuple[float, ...]
    edf: float
    rss: float
    n: int
    aic: float
    term_edf: dict[str, float]
    gcv: float
    fitted_values: np.ndarray
    _terms: list[_FittedTerm] = field(repr=False, default_factory=list)

    def term(self, label: str) -> _FittedTerm:
        for t in self._terms:
            if t.spec.label == label:
                return t
        raise UnknownTerm(f"no term labeled {label!r}")


def assemble_design(
    terms: Sequence[TermSpec],
) -> tuple[np.ndarray, list[tuple[slice, np.ndarray]], list[_FittedTerm]]:
    """Stack intercept + constrained term blocks into one design matrix.

    Returns the full design, the penalties embedded as (column slice,
    matrix) pairs in term order, and per-term metadata. Centering
    constraints (sum of each term's fitted values = 0) are absorbed here
    by reparameterizing with the constraint's null space.
    """
    n = terms[0].design.shape[0] if terms else 0
    blocks = [np.ones((n, 1))]
    fitted_terms: list[_FittedTerm] = []
    penalties: list[tuple[slice, np.ndarray]] = []
    col = 1
    pen_idx = 0
    for spec in terms:
        if spec.design.shape[0] != n:
            raise GamError(f"term {spec.label!r} has {spec.design.shape[0]} rows, expected {n}")
        design = spec.design
        transform = None
        term_penalties = spec.penalties
        if spec.center:
            colsums = design.sum(axis=0, keepdims=True)
            transform = null_space(colsums)
            design = design @ transform
            term_penalties = [transform.T @ P @ transform for P in spec.penalties]
        ncols = design.shape[1]
        cols = slice(col, col + ncols)
        blocks.append(design)
        indices = []
        for P in term_penalties:
            penalties.append((cols, P))
            indices.append(pen_idx)
            pen_idx += 1
        fitted_terms.append(
            _FittedTerm(spec=spec, cols=cols, transform=transform,
                        penalty_indices=tuple(indices))
        )
        col += ncols
    X = np.hstack(blocks)
    return X, penalties, fitted_terms


def _penalized_matrix(
    G: np.ndarray, penalties: list[tuple[slice, np.ndarray]], lambdas: np.ndarray
) -> np.ndarray:
    A = G.copy()
    for lam, (cols, P) in zip(lambdas, penalties):
        A[cols, cols] += lam * P
    return A


def fit_penalized(
    y: np.ndarray,
    terms: Sequence[TermSpec],
    search: Optional[LambdaSearch] = None,
) -> FitResult:
    """Fit the penalized least-squares model and select lambdas by GCV.

    Coordinate descent visits each penalty in term order, line-searching
    its lambda over the full logarithmic grid while holding the others
    fixed, for ``search.sweeps`` passes. Requires n > total columns
    after constraints. The fit is deterministic given data and config.

    Raises:
        NonFinite: non-finite response or design entries.
        Singularity: penalized normal equations rank-deficient (the
            message names the offending terms).
    """
    search = search or LambdaSearch()
    y = np.asarray(y, dtype=np.float64)
    if y.ndim != 1:
        raise GamError("response must be one-dimensional")
    if not np.all(np.isfinite(y)):
        raise NonFinite("response contains non-finite values")
    if not terms:
        raise GamError("at least one term is required")

    X, penalties, fitted_terms = assemble_design(terms)
    n, p = X.shape
    if len(y) != n:
        raise GamError(f"response has {len(y)} rows, design has {n}")
    if not np.all(np.isfinite(X)):
        raise NonFinite("design contains non-finite values")
    if n <= p:
        raise GamError(f"need more rows than effective columns: n={n}, p={p}")

    G = X.T @ X
    g = X.T @ y
    yty = float(y @ y)

    def criterion(lambdas: np.ndarray) -> tuple[float, float, float]:
        """(gcv, rss, edf) at the given lambdas; inf when singular."""
        A = _penalized_matrix(G, penalties, lambdas)
        try:
            chol = cho_factor(A, lower=True)
        except np.linalg.LinAlgError:
            return np.inf, np.inf, np.inf
        beta = cho_solve(chol, g)
        rss = max(yty - 2.0 * float(beta @ g) + float(beta @ G @ beta), 0.0)
        edf = float(np.trace(cho_solve(chol, G)))
        denom = (n - edf) ** 2
        if denom <= 0:
            return np.inf, rss, edf
        return n * rss / denom, rss, edf

    n_pen = len(penalties)
    if search.fixed is not None:
        if len(search.fixed) != n_pen:
            raise GamError(
                f"fixed lambdas: got {len(search.fixed)}, model has {n_pen} penalties"
            )
        lambdas = np.asarray(search.fixed, dtype=np.float64)
        if np.any(lambdas <= 0):
            raise GamError("lambdas must be positive")
    else:
        lambdas = np.ones(n_pen)
        grid = search.grid()
        for _ in range(search.sweeps):
            for j in range(n_pen):
                scores = np.empty(len(grid))
                trial = lambdas.copy()
                for gi, lam in enumerate(grid):
                    trial[j] = lam
                    scores[gi] = criterion(trial)[0]
                lambdas[j] = grid[int(np.argmin(scores))]

    A = _penalized_matrix(G, penalties, lambdas)
    try:
        chol = cho_factor(A, lower=True)
    except np.linalg.LinAlgError:
        raise Singularity(_singularity_report(A, fitted_terms)) from None
    beta = cho_solve(chol, g)
    if not np.all(np.isfinite(beta)):
        raise NonFinite("fit produced non-finite coefficients")

    influence_inner = cho_solve(chol, G)  # A^{-1} X'X; trace = edf
    edf_by_col = np.diag(influence_inner)
    edf = float(edf_by_col.sum())
    fitted = X @ beta
    rss = float(np.sum((y - fitted) ** 2))
    gcv = n * rss / (n - edf) ** 2
    aic = gaussian_aic(n, rss, edf)

    term_edf = {"intercept": float(edf_by_col[0])}
    for t in fitted_terms:
        term_edf[t.spec.label] = float(edf_by_col[t.cols].sum())

    return FitResult(
        coefficients=beta,
        lambdas=tuple(float(v) for v in lambdas),
        edf=edf,
        rss=rss,
        n=n,
        aic=aic,
        term_edf=term_edf,
        gcv=gcv,
        fitted_values=fitted,
        _terms=fitted_terms,
    )


def _singularity_report(A: np.ndarray, fitted_terms: list[_FittedTerm]) -> str:
    bad = []
    for t in fitted_terms:
        block = A[t.cols, t.cols]
        if np.linalg.matrix_rank(block) < block.shape[0]:
            bad.append(t.spec.label)
    if bad:
        return f"penalized normal equations singular; offending terms: {', '.join(bad)}"
    return "penalized normal equations singular"


def fit_report(fit: FitResult) -> dict:
    """JSON-ready summary of a fit: per-term edf, lambdas, AIC, n."""
    return {
        "n": fit.n,
        "edf": fit.edf,
        "rss": fit.rss,
        "gcv": fit.gcv,
        "aic": fit.aic,
        "lambdas": list(fit.lambdas),
        "term_edf": dict(fit.term_edf),
    }


def delta_aic(full: FitResult, base: FitResult) -> float:
    """AIC(full) - AIC(base); negative means the extra structure helps.

    Raises:
        NMismatch: the fits do not share a row count (AIC differences
            are only meaningful on identical response rows).
    """
    if full.n != base.n:
        raise NMismatch(f"row counts differ: full n={full.n}, base n={base.n}")
    return full.aic - base.aic


def partial_effect(
    fit: FitResult, term_label: str, grid: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """A smooth term's contribution over ``grid``, centered to mean zero.

    Other terms are held out entirely; the grid is clamped to the
    training range of the covariate.

    Raises:
        UnknownTerm: no such term, or the term is not a smooth.
    """
    term = fit.term(term_label)
    if term.spec.kind != "smooth" or term.spec.basis is None:
        raise UnknownTerm(f"term {term_label!r} is not a univariate smooth")
    grid = np.asarray(grid, dtype=np.float64)
    B = term.spec.basis.evaluate(grid)
    if term.transform is not None:
        B = B @ term.transform
    values = B @ fit.coefficients[term.cols]
    values = values - values.mean()
    return grid, values
