"""Vector extrapolation from an iterate sequence.

Given iterates x_0, x_1, ... of a fixed-point process and their first
differences u_j = x_{j+1} - x_j, stage k builds an accelerated vector

    s_k = sum_i gamma_i x_i,      sum_i gamma_i = 1,

from the difference block U_k = [u_0, ..., u_k].  Two choices of
gamma are computed side by side, both working entirely in the
triangular frame of the weighted QR factorization U_k = Q_k R_k:

* minimal-polynomial coefficients (``mpe``): solve the least-squares
  problem min ||| U_{k-1} c' + u_k ||| by back substitution
  R_{k-1} c' = -rho_k, where rho_k is the last column of R_k above the
  diagonal; set c = (c', 1) and gamma = c / sum(c).  The method is
  defined only when alpha = sum(c) is nonzero; numerically, when
  |alpha| > exist_tol * sum|c_i|.

* reduced-rank coefficients (``rre``): minimize ||| U_k gamma |||
  subject to sum gamma_i = 1 via two triangular solves,
  R_k* y = e then R_k h = y; lam = 1 / sum(h) is real and positive
  whenever R_k is nonsingular, and gamma = lam * h.

Cheap residual estimates come for free from the same factors:
phi = ||| U_k gamma ||| equals r_kk |gamma_k| for ``mpe`` and
sqrt(lam) for ``rre``; no product with U_k is ever formed.

The accelerated vector is assembled as s_k = x_0 + Q_{k-1} eta with
eta = R_{k-1} xi and xi_j = 1 - (gamma_0 + ... + gamma_j), again
avoiding any multiplication by U_k itself.

:func:`run` drives the whole pipeline over a sequence, factoring
incrementally and recording both methods at every stage.  It stops
early when an incoming difference is numerically zero (the iteration
converged on its own) or when the difference block loses rank -- the
latter signals the terminal degree: there the least-squares system is
consistent, the two methods coincide, and the extrapolated vector is
exact for linear problems.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    DimensionMismatch,
    InsufficientVectors,
    LambdaNotPositive,
    MpeNonexistent,
    NonFiniteIterate,
)
from .qr import RANK_TOL, DifferenceMatrix, WQRFactors, _extend, empty_factors, \
    orthogonalize_column
from .weights import validate

__all__ = [
    "EXIST_TOL",
    "CONVERGE_ATOL",
    "CoefficientSolve",
    "ExtrapolationRecord",
    "RunStatus",
    "RunHistory",
    "mpe_coefficients",
    "rre_coefficients",
    "assemble",
    "residual_estimate",
    "run",
    "history_to_dict",
    "history_rows",
]

#: existence threshold: mpe is declared undefined when
#: |sum c_i| <= EXIST_TOL * sum |c_i|
EXIST_TOL = 1e-12

#: an incoming difference with weighted norm at or below this absolute
#: value means the underlying iteration has already converged
CONVERGE_ATOL = 1e-300


@dataclass(frozen=True)
class CoefficientSolve:
    """Outcome of one coefficient solve at a fixed stage.

    ``gamma`` holds the k+1 convex-combination coefficients (summing
    to one), ``phi`` the estimated weighted residual norm
    ||| U_k gamma |||, and ``s`` the assembled vector once attached.
    For ``mpe`` the solve may not exist (``exists`` False, ``gamma``
    and ``phi`` None, ``alpha`` near zero); ``rre`` always exists.
    """

    method: str
    exists: bool
    gamma: np.ndarray | None
    phi: float | None
    alpha: complex | None = None
    lam: float | None = None
    s: np.ndarray | None = None


@dataclass(frozen=True)
class ExtrapolationRecord:
    """Both methods' results at stage k.

    ``u_norm`` is ||| u_k ||| (for a linear iteration this is the true
    weighted residual norm of iterate x_k), ``rdiag`` the diagonal
    entry r_kk produced when u_k was orthogonalized.  On the terminal
    stage ``rdiag`` is the trial value that failed the rank test and
    ``terminal`` is set.
    """

    k: int
    u_norm: float
    rdiag: float
    mpe: CoefficientSolve
    rre: CoefficientSolve
    terminal: bool = False


class RunStatus(enum.Enum):
    COMPLETED = "completed"
    CONVERGED = "converged"
    RANK_DEFICIENT = "rank_deficient"


@dataclass
class RunHistory:
    """Everything :func:`run` saw and produced.

    ``factors`` is the factorization of all difference columns that
    were actually appended; stage k's factors are its leading
    (k+1)-column block, so nothing is stored twice.
    """

    weight: object
    x0: np.ndarray
    differences: DifferenceMatrix
    records: list[ExtrapolationRecord] = field(default_factory=list)
    factors: WQRFactors | None = None
    status: RunStatus = RunStatus.COMPLETED
    detected_k0: int | None = None
    k_max: int = 0
    reorthogonalized: bool = False

    @property
    def stages(self) -> int:
        return len(self.records)

    def record(self, k: int) -> ExtrapolationRecord:
        return self.records[k]

    def factors_at(self, k: int) -> WQRFactors:
        """Factors of U_k; valid for every non-terminal stage."""
        return self.factors.leading(k + 1)


def _mpe_from_parts(r_upper, rho, rdiag, exist_tol):
    """Minimal-polynomial solve given the pieces of R_k's last column.

    ``r_upper`` is R_{k-1} (k x k), ``rho`` the k projection
    coefficients of u_k on the basis, ``rdiag`` the deflated norm.
    """
    k = len(rho)
    c = np.empty(k + 1, dtype=complex)
    if k:
        c[:k] = solve_triangular(r_upper, -np.asarray(rho, dtype=complex),
                                 lower=False)
    c[k] = 1.0
    alpha = complex(c.sum())
    exists = abs(alpha) > exist_tol * float(np.abs(c).sum())
    if not exists:
        return CoefficientSolve("mpe", False, None, None, alpha=alpha)
    gamma = c / alpha
    phi = float(rdiag) * abs(gamma[-1])
    return CoefficientSolve("mpe", True, gamma, phi, alpha=alpha)


def mpe_coefficients(factors: WQRFactors, exist_tol: float = EXIST_TOL
                     ) -> CoefficientSolve:
    """Minimal-polynomial coefficients at stage k = factors.k - 1.

    ``factors`` must factor U_k (k+1 columns).  Solves
    R_{k-1} c' = -rho_k by back substitution; never touches U_k.
    """
    if factors.k < 1:
        raise InsufficientVectors("mpe needs at least one factored column")
    k = factors.k - 1
    r = factors.r
    return _mpe_from_parts(r[:k, :k], r[:k, k], r[k, k].real, exist_tol)


def rre_coefficients(factors: WQRFactors) -> CoefficientSolve:
    """Reduced-rank coefficients at stage k = factors.k - 1.

    Two triangular solves: R_k* y = e (forward substitution), then
    R_k h = y (back substitution); lam = 1/sum(h) and gamma = lam h.
    lam is real and positive for any nonsingular R_k, so sqrt(lam) is
    always a valid residual estimate.
    """
    if factors.k < 1:
        raise InsufficientVectors("rre needs at least one factored column")
    r = factors.r
    e = np.ones(factors.k, dtype=complex)
    y = solve_triangular(r, e, lower=False, trans="C")
    h = solve_triangular(r, y, lower=False)
    denom = complex(h.sum())
    if not np.isfinite([denom.real, denom.imag]).all() or denom.real <= 0.0 \
            or abs(denom.imag) > 1e-10 * denom.real:
        raise LambdaNotPositive(
            f"sum(h) = {denom!r} is not positive real; factors are not a "
            "valid weighted QR"
        )
    lam = 1.0 / denom.real
    gamma = lam * h
    return CoefficientSolve("rre", True, gamma, float(np.sqrt(lam)), lam=lam)


def assemble(x0, factors: WQRFactors, gamma) -> np.ndarray:
    """Build s_k = x_0 + Q_{k-1} R_{k-1} xi from the coefficients.

    ``gamma`` has k+1 entries; only the leading k columns of the
    factorization are used, so passing either stage-k or stage-(k-1)
    factors works.  Stage 0 returns x_0 itself.
    """
    if gamma is None:
        raise MpeNonexistent("cannot assemble an extrapolant without "
                             "coefficients (alpha was numerically zero)")
    gamma = np.asarray(gamma, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)
    k = gamma.size - 1
    if k == 0:
        return x0.copy()
    if factors.k < k:
        raise DimensionMismatch(
            f"assembly at stage {k} needs {k} factored columns, have {factors.k}"
        )
    xi = 1.0 - np.cumsum(gamma)[:k]
    eta = factors.r[:k, :k] @ xi
    return x0 + factors.q[:, :k] @ eta


def residual_estimate(solve: CoefficientSolve, rdiag: float | None = None
                      ) -> float:
    """phi = ||| U_k gamma ||| read off the triangular factors.

    For ``mpe`` this is r_kk |gamma_k| and ``rdiag`` must be supplied;
    for ``rre`` it is sqrt(lam).
    """
    if solve.method == "mpe":
        if not solve.exists:
            raise MpeNonexistent("no residual estimate: alpha is numerically zero")
        if rdiag is None:
            raise ValueError("mpe residual estimate needs the diagonal entry r_kk")
        return float(rdiag) * abs(solve.gamma[-1])
    return float(np.sqrt(solve.lam))


def _terminal_records(x0, factors, coeffs, rnorm, u_norm, k, exist_tol,
                      previous: ExtrapolationRecord | None):
    """Solves for the terminal stage, where the system is consistent.

    The least-squares problem min ||| U_{k-1} c' + u_k ||| now has a
    (numerically) exact solution, so the two methods coincide: the
    reduced-rank coefficients are taken equal to the
    minimal-polynomial ones and lam = phi^2 (both essentially zero).
    If even here alpha vanishes, the minimal-polynomial method is
    undefined at its own terminal degree; the reduced-rank record then
    repeats the previous stage, extending the stagnation one step.
    """
    mpe = _mpe_from_parts(factors.r, coeffs, rnorm, exist_tol)
    if mpe.exists:
        s = assemble(x0, factors, mpe.gamma)
        mpe = replace(mpe, s=s)
        rre = CoefficientSolve("rre", True, mpe.gamma.copy(), mpe.phi,
                               lam=mpe.phi ** 2, s=s.copy())
    elif previous is not None and previous.rre.gamma is not None:
        gamma = np.append(previous.rre.gamma, 0.0)
        rre = CoefficientSolve("rre", True, gamma, previous.rre.phi,
                               lam=previous.rre.lam,
                               s=None if previous.rre.s is None
                               else previous.rre.s.copy())
    else:
        rre = CoefficientSolve("rre", False, None, None)
    return ExtrapolationRecord(k, u_norm, float(rnorm), mpe, rre, terminal=True)


def run(iterates, weight, k_max: int | None = None,
        reorthogonalize: bool = False, rank_tol: float = RANK_TOL,
        exist_tol: float = EXIST_TOL, converge_atol: float = CONVERGE_ATOL
        ) -> RunHistory:
    """Run both extrapolation methods over an iterate sequence.

    Parameters
    ----------
    iterates : array_like, shape (m+1, N)
        The sequence x_0, ..., x_m, one iterate per row.
    weight : WeightOperator or array_like
        Weight defining the inner product; validated via
        :func:`wextrap.weights.validate`.
    k_max : int, optional
        Last stage to compute.  Defaults to every stage the sequence
        supports, capped at the space dimension N (at stage N the
        difference block has N+1 columns and is structurally
        dependent, so no run can go further).
    reorthogonalize : bool
        Apply a second orthogonalization pass per column.
    rank_tol, exist_tol, converge_atol : float
        Thresholds for rank loss, minimal-polynomial existence and
        plain convergence of the underlying iteration.

    Returns
    -------
    RunHistory
        One record per computed stage; ``status`` tells how the run
        ended and ``detected_k0`` the terminal stage if one was hit.
    """
    x = np.asarray(iterates, dtype=complex)
    if x.ndim != 2:
        raise DimensionMismatch(
            f"iterates must form a 2-D (count, dimension) array, got {x.shape}"
        )
    bad = np.flatnonzero(~np.isfinite(x).all(axis=1))
    if bad.size:
        raise NonFiniteIterate(int(bad[0]))
    weight = validate(weight)
    if x.shape[1] != weight.dimension:
        raise DimensionMismatch(
            f"iterates of dimension {x.shape[1]}, weight of dimension "
            f"{weight.dimension}"
        )
    diffs = DifferenceMatrix.from_iterates(x)
    n = weight.dimension
    available = diffs.count - 1  # stage k consumes differences u_0..u_k
    if k_max is None:
        k_max = min(available, n)
    else:
        k_max = min(int(k_max), n)
    if k_max < 0:
        raise InsufficientVectors("k_max must be nonnegative")
    if k_max > available:
        raise InsufficientVectors(
            f"stage {k_max} needs {k_max + 2} iterates, got {x.shape[0]}"
        )

    x0 = x[0].copy()
    history = RunHistory(weight=weight, x0=x0, differences=diffs,
                         k_max=k_max, reorthogonalized=reorthogonalize)
    factors = empty_factors(weight)

    for k in range(k_max + 1):
        u = diffs.column(k)
        u_norm = weight.norm(u)
        coeffs, w, rnorm = orthogonalize_column(factors, u, reorthogonalize)
        previous = history.records[-1] if history.records else None

        if u_norm <= converge_atol:
            history.records.append(_terminal_records(
                x0, factors, coeffs, rnorm, u_norm, k, exist_tol, previous))
            history.status = RunStatus.CONVERGED
            history.detected_k0 = k
            break
        if k == n or rnorm <= rank_tol * u_norm:
            history.records.append(_terminal_records(
                x0, factors, coeffs, rnorm, u_norm, k, exist_tol, previous))
            history.status = RunStatus.RANK_DEFICIENT
            history.detected_k0 = k
            break

        factors = _extend(factors, coeffs, w, rnorm)
        mpe = mpe_coefficients(factors, exist_tol)
        if mpe.exists:
            mpe = replace(mpe, s=assemble(x0, factors, mpe.gamma))
        rre = rre_coefficients(factors)
        rre = replace(rre, s=assemble(x0, factors, rre.gamma))
        history.records.append(ExtrapolationRecord(
            k, u_norm, float(rnorm), mpe, rre))

    history.factors = factors
    return history


# -- serialization ---------------------------------------------------

def _pair(z) -> list[float]:
    z = complex(z)
    return [float(z.real), float(z.imag)]


def _pairs(v) -> list[list[float]]:
    return [_pair(z) for z in np.asarray(v).ravel()]


def _solve_to_dict(solve: CoefficientSolve) -> dict:
    out = {"method": solve.method, "exists": bool(solve.exists)}
    out["gamma"] = None if solve.gamma is None else _pairs(solve.gamma)
    out["phi"] = None if solve.phi is None else float(solve.phi)
    out["alpha"] = None if solve.alpha is None else _pair(solve.alpha)
    out["lam"] = None if solve.lam is None else float(solve.lam)
    out["s"] = None if solve.s is None else _pairs(solve.s)
    return out


def history_to_dict(history: RunHistory) -> dict:
    """JSON-ready dict; complex entries become [re, im] pairs.

    Key order is irrelevant: serialize with sort_keys for byte-stable
    output.
    """
    w = history.weight
    if w.kind == "identity":
        weight_spec = {"kind": "identity"}
    elif w.kind == "diagonal":
        weight_spec = {"kind": "diagonal",
                       "weights": [float(v) for v in w.matrix().diagonal().real]}
    else:
        weight_spec = {"kind": "dense",
                       "matrix": [_pairs(row) for row in w.matrix()]}
    return {
        "format": "wextrap-history",
        "version": 1,
        "dimension": int(w.dimension),
        "k_max": int(history.k_max),
        "reorthogonalized": bool(history.reorthogonalized),
        "status": history.status.value,
        "detected_k0": history.detected_k0,
        "weight": weight_spec,
        "x0": _pairs(history.x0),
        "differences": [_pairs(history.differences.column(j))
                        for j in range(history.differences.count)],
        "records": [
            {
                "k": rec.k,
                "u_norm": float(rec.u_norm),
                "rdiag": float(rec.rdiag),
                "terminal": bool(rec.terminal),
                "mpe": _solve_to_dict(rec.mpe),
                "rre": _solve_to_dict(rec.rre),
            }
            for rec in history.records
        ],
    }


def history_rows(history: RunHistory) -> list[dict]:
    """Flat per-stage scalars for tables and CSV output."""
    rows = []
    for rec in history.records:
        rows.append({
            "k": rec.k,
            "u_norm": rec.u_norm,
            "mpe_exists": rec.mpe.exists,
            "phi_mpe": rec.mpe.phi,
            "phi_rre": rec.rre.phi,
            "terminal": rec.terminal,
        })
    return rows
