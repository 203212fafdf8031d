"""Weighted FOM and GMR solvers for (I - T) x = d.

Both methods search the affine Krylov space x_0 + K_k(A; r_0), with
A = I - T applied as an operator and r_0 = d - A x_0.  The basis of
K_k is built by an Arnoldi process using modified Gram-Schmidt under
the weighted inner product, so the basis satisfies <v_i, v_j> =
delta_ij and the projected problem is a small Hessenberg system:

* FOM imposes the Galerkin condition <z, r(w_k)> = 0 for all z in
  K_k, i.e. solves the square Hessenberg system H_k y = beta e_1.
  That system can be singular; FOM is then not defined at stage k (a
  status, not an error), mirroring the nonexistence of the
  minimal-polynomial extrapolant.

* GMR minimizes the weighted residual norm over the space.  Because
  the basis is orthonormal in <., .>, the weighted norm of
  V_{k+1}(beta e_1 - H~ y) equals the Euclidean norm of the
  coordinate vector, and the minimization reduces to a (k+1) x k
  least-squares problem solved with complex Givens rotations.

The absolute value of the k-th Givens cosine doubles as the FOM
existence test: it vanishes exactly when H_k is singular, and it is
scale-free, so one relative threshold covers all problems.

Applied to the iterates x_{m+1} = T x_m + d, the two extrapolation
methods of :mod:`wextrap.extrapolate` produce the same vectors as FOM
and GMR stage by stage; :func:`equivalence_check` runs both pipelines
and measures the difference, together with the exact-residual
identities that hold in the linear case.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import Breakdown, DimensionMismatch
from .extrapolate import run
from .weights import WeightOperator, validate

__all__ = [
    "BREAKDOWN_TOL",
    "FOM_TOL",
    "KrylovState",
    "initial_state",
    "arnoldi_step",
    "fom_solve",
    "gmr_solve",
    "KrylovComparison",
    "equivalence_check",
]

#: an Arnoldi direction whose deflated weighted norm is at or below
#: this fraction of |||A v_j||| lies in the current space (happy
#: breakdown)
BREAKDOWN_TOL = 1e-13

#: FOM is undefined when the k-th Givens cosine magnitude is at or
#: below this; chosen from the same relative-tolerance family as the
#: extrapolation existence test so the two notions line up
FOM_TOL = 1e-12


def _as_operator(t):
    if callable(t):
        return t
    t = np.asarray(t, dtype=complex)

    def apply(z):
        return t @ z

    return apply


@dataclass(frozen=True)
class KrylovState:
    """Arnoldi data after j steps.

    ``basis`` holds j+1 weighted-orthonormal columns spanning
    K_{j+1}(A; r0); ``hessenberg`` is the (j+1) x j projection of A
    (column i carries <v_1..v_{i+1}, A v_i> plus the deflated norm).
    """

    weight: WeightOperator
    operator: object
    x0: np.ndarray
    r0: np.ndarray
    beta: float
    basis: np.ndarray
    hessenberg: np.ndarray

    @property
    def steps(self) -> int:
        return self.hessenberg.shape[1]


def initial_state(t, d, x0, weight) -> KrylovState:
    """State with the single normalized residual direction."""
    weight = validate(weight)
    apply_t = _as_operator(t)
    d = np.asarray(d, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)
    if d.shape != (weight.dimension,) or x0.shape != (weight.dimension,):
        raise DimensionMismatch(
            f"d and x0 must have dimension {weight.dimension}"
        )
    r0 = apply_t(x0) + d - x0
    beta = weight.norm(r0)
    n = weight.dimension
    if beta == 0.0:
        basis = np.zeros((n, 0), dtype=complex)
    else:
        basis = (r0 / beta).reshape(n, 1)

    def apply_a(z):
        return z - apply_t(z)

    return KrylovState(weight, apply_a, x0, r0, beta, basis,
                       np.zeros((1, 0), dtype=complex))


def arnoldi_step(state: KrylovState, breakdown_tol: float = BREAKDOWN_TOL
                 ) -> KrylovState:
    """Extend the basis by one direction.

    Raises :class:`Breakdown` with the 1-based step index when the new
    direction lies numerically in the current space; the Krylov space
    is then invariant and stage-``steps`` solutions are exact.
    """
    j = state.basis.shape[1]
    if j == 0:
        raise Breakdown(0, "zero initial residual; nothing to extend")
    weight = state.weight
    w = state.operator(state.basis[:, j - 1])
    scale = weight.norm(w)
    h = np.zeros(j + 1, dtype=complex)
    for i in range(j):
        h[i] = weight.inner(state.basis[:, i], w)
        w = w - h[i] * state.basis[:, i]
    hnorm = weight.norm(w)
    h[j] = hnorm
    if hnorm <= breakdown_tol * scale:
        raise Breakdown(j)
    basis = np.column_stack([state.basis, w / hnorm])
    hess = np.zeros((j + 1, j), dtype=complex)
    hess[:j, : j - 1] = state.hessenberg
    hess[:, j - 1] = h
    return KrylovState(state.weight, state.operator, state.x0, state.r0,
                       state.beta, basis, hess)


def _arnoldi(t, d, x0, weight, k):
    """Hessenberg data through k steps, stopping early on breakdown.

    Returns (state-like tuple) basis, hess, beta, x0, invariant flag.
    On breakdown at step j the j-th Hessenberg column is kept (its
    subdiagonal entry is the tiny deflated norm), so stage-j solves
    remain available and are exact.
    """
    weight = validate(weight)
    apply_t = _as_operator(t)
    d = np.asarray(d, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)
    r0 = apply_t(x0) + d - x0
    beta = weight.norm(r0)
    n = weight.dimension
    if beta == 0.0:
        return np.zeros((n, 0), complex), np.zeros((1, 0), complex), 0.0, x0, True
    vs = [r0 / beta]
    hcols = []
    invariant = False
    for j in range(1, k + 1):
        w = apply_t(vs[j - 1])
        w = vs[j - 1] - w  # A v = (I - T) v
        scale = weight.norm(w)
        h = np.zeros(k + 1, dtype=complex)
        for i in range(j):
            h[i] = weight.inner(vs[i], w)
            w = w - h[i] * vs[i]
        hnorm = weight.norm(w)
        h[j] = hnorm
        hcols.append(h)
        if hnorm <= BREAKDOWN_TOL * scale:
            invariant = True
            break
        vs.append(w / hnorm)
    m = len(hcols)
    hess = np.zeros((m + 1, m), dtype=complex)
    for j, h in enumerate(hcols):
        hess[: j + 2, j] = h[: j + 2]
    return np.column_stack(vs), hess, beta, x0, invariant


def _givens(a, b):
    """Unitary 2x2 zeroing b; returns (rotation, |cosine|)."""
    r = np.hypot(abs(a), abs(b))
    if r == 0.0:
        return np.eye(2, dtype=complex), 1.0
    g = np.array([[np.conj(a) / r, np.conj(b) / r],
                  [-b / r, a / r]], dtype=complex)
    return g, abs(a) / r


def _triangularize(hess, beta):
    """Apply Givens rotations column by column.

    Returns (R, g, cosines): R the m x m triangular factor, g the
    rotated right-hand side of length m+1 (|g[m]| is the least-squares
    residual), cosines the per-column |c_j|.
    """
    m = hess.shape[1]
    r = hess.astype(complex).copy()
    g = np.zeros(m + 1, dtype=complex)
    g[0] = beta
    rots = []
    cosines = []
    for j in range(m):
        for i, rot in enumerate(rots):
            r[i:i + 2, j] = rot @ r[i:i + 2, j]
        rot, cos = _givens(r[j, j], r[j + 1, j])
        r[j:j + 2, j] = rot @ r[j:j + 2, j]
        r[j + 1, j] = 0.0
        g[j:j + 2] = rot @ g[j:j + 2]
        rots.append(rot)
        cosines.append(cos)
    return r[:m, :m], g, cosines


def fom_solve(t, d, x0, weight, k: int, fom_tol: float = FOM_TOL):
    """Galerkin solution at stage k, or None when it is not defined.

    None mirrors the nonexistence of the minimal-polynomial
    extrapolant on the induced iterate sequence; it is a status, not a
    failure.  k = 0 returns x0.  Past a happy breakdown the invariant-
    space (exact) solution is returned.
    """
    if k == 0:
        return np.asarray(x0, dtype=complex).copy()
    basis, hess, beta, x0, invariant = _arnoldi(t, d, x0, weight, k)
    if beta == 0.0:
        return x0.copy()
    m = hess.shape[1]
    _, _, cosines = _triangularize(hess, beta)
    if cosines[m - 1] <= fom_tol:
        return None
    rhs = np.zeros(m, dtype=complex)
    rhs[0] = beta
    y = np.linalg.solve(hess[:m, :m], rhs)
    return x0 + basis[:, :m] @ y


def gmr_solve(t, d, x0, weight, k: int, with_residual: bool = False):
    """Weighted-residual minimizer at stage k (always defined).

    With ``with_residual`` the estimated weighted residual norm
    (the rotated right-hand side's last entry) is returned alongside.
    """
    x0 = np.asarray(x0, dtype=complex)
    if k == 0:
        w = x0.copy()
        if with_residual:
            apply_t = _as_operator(t)
            d = np.asarray(d, dtype=complex)
            weight = validate(weight)
            return w, weight.norm(apply_t(x0) + d - x0)
        return w
    basis, hess, beta, x0, invariant = _arnoldi(t, d, x0, weight, k)
    if beta == 0.0:
        return (x0.copy(), 0.0) if with_residual else x0.copy()
    m = hess.shape[1]
    r, g, _ = _triangularize(hess, beta)
    y = solve_triangular(r, g[:m], lower=False)
    w = x0 + basis[:, :m] @ y
    if with_residual:
        return w, float(abs(g[m]))
    return w


@dataclass(frozen=True)
class KrylovComparison:
    """Per-stage agreement between the solver and extrapolation
    pipelines, plus the exact-residual identity defects.

    Lists are indexed by stage; None marks stages where a quantity
    does not apply (undefined method, stage 0 for the two-stage
    identities, terminal stage).
    """

    ks: list
    fom_defined: list
    mpe_exists: list
    definedness_consistent: list
    fom_mpe_defect: list
    gmr_rre_defect: list
    residual_match_mpe: list
    residual_match_rre: list
    gmr_estimate_defect: list
    coupling_222: list
    coupling_223: list
    coupling_224: list
    monotone_225: list


def equivalence_check(t, d, x0, weight, k_max: int) -> KrylovComparison:
    """Run solvers and extrapolation side by side on (I - T) x = d.

    The iterate sequence x_{m+1} = T x_m + d is generated internally
    from the same x0.  All residuals here are exact: r(x) = Tx + d - x.
    """
    weight = validate(weight)
    apply_t = _as_operator(t)
    d = np.asarray(d, dtype=complex)
    x0 = np.asarray(x0, dtype=complex)

    def res(x):
        return apply_t(x) + d - x

    iters = [x0]
    for _ in range(k_max + 1):
        iters.append(apply_t(iters[-1]) + d)
    hist = run(np.array(iters), weight, k_max=k_max)

    r0_norm = weight.norm(res(x0))
    rres = {}  # stage -> exact rre residual vector

    def rel(defect, scale):
        return float(defect / scale) if scale > 0 else float(defect)

    def resid_scale(rnorm):
        return max(rnorm, 1e-14 * r0_norm)

    out = {name: [] for name in ("ks", "fom_defined", "mpe_exists",
                                 "definedness_consistent", "fom_mpe_defect",
                                 "gmr_rre_defect", "residual_match_mpe",
                                 "residual_match_rre", "gmr_estimate_defect",
                                 "coupling_222", "coupling_223",
                                 "coupling_224", "monotone_225")}
    for idx, rec in enumerate(hist.records):
        k = rec.k
        w_fom = fom_solve(t, d, x0, weight, k)
        w_gmr, gmr_res = gmr_solve(t, d, x0, weight, k, with_residual=True)
        fom_def = w_fom is not None
        out["ks"].append(k)
        out["fom_defined"].append(fom_def)
        out["mpe_exists"].append(rec.mpe.exists)
        out["definedness_consistent"].append(fom_def == rec.mpe.exists)
        out["fom_mpe_defect"].append(
            None if not (fom_def and rec.mpe.exists)
            else weight.norm(w_fom - rec.mpe.s))
        out["gmr_rre_defect"].append(
            None if rec.rre.s is None else weight.norm(w_gmr - rec.rre.s))

        u_k = hist.differences.block(k)
        if rec.mpe.exists:
            r_mpe = res(rec.mpe.s)
            out["residual_match_mpe"].append(rel(
                weight.norm(u_k @ rec.mpe.gamma - r_mpe),
                resid_scale(weight.norm(r_mpe))))
        else:
            r_mpe = None
            out["residual_match_mpe"].append(None)
        if rec.rre.s is not None:
            r_rre = res(rec.rre.s)
            rres[idx] = r_rre
            out["residual_match_rre"].append(rel(
                weight.norm(u_k @ rec.rre.gamma - r_rre),
                resid_scale(weight.norm(r_rre))))
            out["gmr_estimate_defect"].append(rel(
                abs(gmr_res - weight.norm(r_rre)),
                resid_scale(weight.norm(r_rre))))
        else:
            out["residual_match_rre"].append(None)
            out["gmr_estimate_defect"].append(None)

        applicable = (idx > 0 and not rec.terminal and rec.mpe.exists
                      and idx - 1 in rres)
        if applicable:
            nr_k = weight.norm(rres[idx])
            nr_prev = weight.norm(rres[idx - 1])
            nr_m = weight.norm(r_mpe)
            out["coupling_222"].append(rel(
                abs(1 / nr_k ** 2 - 1 / nr_prev ** 2 - 1 / nr_m ** 2),
                1 / nr_k ** 2))
            v = rres[idx] / nr_k ** 2 - rres[idx - 1] / nr_prev ** 2 \
                - r_mpe / nr_m ** 2
            out["coupling_223"].append(rel(
                weight.norm(v), weight.norm(rres[idx]) / nr_k ** 2))
            sv = rec.rre.s / nr_k ** 2 \
                - hist.records[idx - 1].rre.s / nr_prev ** 2 \
                - rec.mpe.s / nr_m ** 2
            out["coupling_224"].append(rel(
                weight.norm(sv), weight.norm(rec.rre.s) / nr_k ** 2))
            out["monotone_225"].append(bool(nr_k < nr_prev))
        else:
            out["coupling_222"].append(None)
            out["coupling_223"].append(None)
            out["coupling_224"].append(None)
            out["monotone_225"].append(None)
    return KrylovComparison(**out)
