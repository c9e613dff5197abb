"""Multiplier-plus-kernel operators on L2(eta) and parametric block algebra.

The operators this package manipulates all share one finite-dimensional
shape: ``(T a)(v) = gamma(v) a(v) + sum_u kernel(v, u) a(u) w_u`` with an
optional centering correction ``- sum_u gamma(u) a(u) w_u`` (a constant
function) used on mean-zero tangent spaces. Information operators,
their parametric corrections, and the systems solved for least favorable
directions are all of this form.

Solves respect the geometry of L2(eta): zero-mass grid points are dropped
(their equations carry no weight), and for centering operators the system
is restricted to the mean-zero subspace, where these operators are well
defined. Direct solves are refused with :class:`IllPosedError` when the
relative smallest singular value falls below ``SIGMA_MIN_REL_TOL``;
ridge-regularized solves minimize
``||T a - rhs||^2_eta + ridge ||a||^2_eta`` and never raise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, IllPosedError, NotIdentifiableError
from .measure import DiscreteMeasure, as_values

# Direct solves require sigma_min / sigma_max above this.
SIGMA_MIN_REL_TOL = 1e-8
# Requested accuracy of symmetric eigenvalue computations (numpy's eigvalsh
# delivers much better than this on the sizes we allow).
EIGEN_REL_TOL = 1e-9
# Symmetry validation for information blocks, relative to the matrix scale.
BLOCK_SYMMETRY_TOL = 1e-8


@dataclass(frozen=True)
class KernelOperator:
    """The operator ``a -> gamma * a + K (a deta) [- <gamma, a>_eta]``.

    Parameters
    ----------
    base : DiscreteMeasure
        The measure eta defining the geometry.
    multiplier : array, shape (m,)
        Pointwise multiplier gamma.
    kernel : array, shape (m, m)
        Kernel K(v, u), integrated against ``a(u) deta(u)`` in its second
        argument.
    centering : bool
        If True, subtract the constant ``<gamma, a>_eta``. Used when the
        operator acts on the mean-zero subspace of a probability measure.
    """

    base: DiscreteMeasure
    multiplier: np.ndarray
    kernel: np.ndarray
    centering: bool = False

    def __post_init__(self):
        m = self.base.size
        mult = np.asarray(self.multiplier, dtype=float)
        kern = np.asarray(self.kernel, dtype=float)
        if mult.shape != (m,):
            raise DimensionError(
                f"multiplier has shape {mult.shape}, expected ({m},)"
            )
        if kern.shape != (m, m):
            raise DimensionError(
                f"kernel has shape {kern.shape}, expected ({m}, {m})"
            )
        if not (np.all(np.isfinite(mult)) and np.all(np.isfinite(kern))):
            raise DomainError("operator pieces must be finite")
        mult = mult.copy()
        kern = kern.copy()
        mult.setflags(write=False)
        kern.setflags(write=False)
        object.__setattr__(self, "multiplier", mult)
        object.__setattr__(self, "kernel", kern)
        object.__setattr__(self, "centering", bool(self.centering))

    @property
    def size(self) -> int:
        return self.base.size


def apply(op: KernelOperator, a) -> np.ndarray:
    """Evaluate the operator at a direction, returning grid values."""
    av = as_values(a, op.size)
    w = op.base.masses
    out = op.multiplier * av + op.kernel @ (w * av)
    if op.centering:
        out = out - float(np.sum(op.multiplier * av * w))
    return out


def as_matrix(op: KernelOperator) -> np.ndarray:
    """Dense matrix M with ``M @ a == apply(op, a)`` exactly.

    The construction mirrors apply() term by term (diagonal, kernel times
    mass, rank-one centering), so the agreement is exact, not just up to
    rounding differences.
    """
    w = op.base.masses
    mat = np.diag(op.multiplier) + op.kernel * w[np.newaxis, :]
    if op.centering:
        mat = mat - np.outer(np.ones(op.size), op.multiplier * w)
    return mat


@dataclass(frozen=True)
class SolveResult:
    """Outcome of an operator solve.

    ``solution`` has the shape of ``rhs`` (vector or matrix of columns).
    ``residual`` is the L2(eta) norm of ``T a - rhs`` (max over columns),
    ``relative_residual`` divides by the rhs norm per column. ``condition``
    and the singular values describe the reduced system actually solved
    (support-restricted, centered-projected when applicable).
    """

    solution: np.ndarray
    residual: float
    relative_residual: float
    condition: float
    ridge: float
    sigma_min: float
    sigma_max: float


def _support_root(eta: DiscreteMeasure):
    sup = eta.support()
    if sup.size == 0:
        raise DomainError("measure has empty support")
    root = np.sqrt(eta.masses[sup])
    return sup, root


def _centered_projector(root: np.ndarray) -> np.ndarray:
    """Orthonormal basis (columns) of the mean-zero subspace, expressed in
    the symmetric coordinates ``y = sqrt(w) a`` on the support."""
    n = root.size
    q0 = root / np.linalg.norm(root)
    h = np.eye(n) - np.outer(q0, q0)
    # h is the rank (n-1) orthogonal projector; its leading singular
    # vectors form the basis we need, computed deterministically.
    u_mat, s, _ = np.linalg.svd(h)
    return u_mat[:, : n - 1]


def _reduced_system(op: KernelOperator):
    """Return (B, to_full, sup, root, q) for the solve coordinates.

    B is the reduced matrix; ``to_full(y)`` maps reduced coordinates back
    to grid values (zero off support). q is the centered basis or None.
    """
    sup, root = _support_root(op.base)
    mat = as_matrix(op)[np.ix_(sup, sup)]
    sym_coords = (mat * (1.0 / root)[np.newaxis, :]) * root[:, np.newaxis]
    m = op.size
    if op.centering:
        q = _centered_projector(root)
        reduced = q.T @ sym_coords @ q

        def to_full(y):
            full = np.zeros((m,) + y.shape[1:])
            full[sup] = (q @ y) / (root if y.ndim == 1 else root[:, np.newaxis])
            return full

    else:
        q = None
        reduced = sym_coords

        def to_full(y):
            full = np.zeros((m,) + y.shape[1:])
            full[sup] = y / (root if y.ndim == 1 else root[:, np.newaxis])
            return full

    return reduced, to_full, sup, root, q


def solve(op: KernelOperator, rhs, ridge: float = 0.0) -> SolveResult:
    """Solve ``T a = rhs`` in L2(eta).

    With ``ridge == 0`` this is a direct solve, refused via
    :class:`IllPosedError` (carrying the condition estimate) when the
    reduced system's relative sigma_min is below ``SIGMA_MIN_REL_TOL``.
    With ``ridge > 0`` the ridge-penalized least squares problem is solved
    instead and never raises.

    For centering operators the solve is restricted to the mean-zero
    subspace; the right-hand side is projected onto it (information
    right-hand sides are mean zero up to rounding already) and the
    solution comes back centered.

    ``rhs`` may be a vector ``(m,)`` or a matrix of columns ``(m, k)``.
    """
    ridge = float(ridge)
    if ridge < 0.0:
        raise DomainError(f"ridge must be nonnegative, got {ridge}")
    rhs_arr = np.asarray(rhs, dtype=float)
    single = rhs_arr.ndim == 1
    if rhs_arr.shape[0] != op.size or rhs_arr.ndim > 2:
        raise DimensionError(
            f"rhs has shape {rhs_arr.shape}, expected ({op.size},) or "
            f"({op.size}, k)"
        )

    reduced, to_full, sup, root, q = _reduced_system(op)
    rhs_sup = rhs_arr[sup] if single else rhs_arr[sup, :]
    target = rhs_sup * (root if single else root[:, np.newaxis])
    if q is not None:
        target = q.T @ target

    if reduced.shape[0] == 0:
        solution = np.zeros_like(rhs_arr)
        return SolveResult(solution, 0.0, 0.0, 1.0, ridge, 0.0, 0.0)

    u_mat, svals, vt = np.linalg.svd(reduced)
    sigma_max = float(svals[0]) if svals.size else 0.0
    sigma_min = float(svals[-1]) if svals.size else 0.0
    condition = sigma_max / sigma_min if sigma_min > 0.0 else float("inf")

    if ridge == 0.0:
        if sigma_min <= SIGMA_MIN_REL_TOL * sigma_max or sigma_max == 0.0:
            raise IllPosedError(
                f"direct solve refused: relative sigma_min "
                f"{sigma_min / sigma_max if sigma_max else 0.0:.3e} below "
                f"{SIGMA_MIN_REL_TOL:.1e}",
                condition=condition,
            )
        y = vt.T @ ((u_mat.T @ target).T / svals).T
    else:
        # (B^T B + ridge I) y = B^T target via the SVD of B.
        scale = svals / (svals * svals + ridge)
        y = vt.T @ ((u_mat.T @ target).T * scale).T

    solution = to_full(y)

    w = op.base.masses
    resid_vec = as_matrix(op) @ solution - rhs_arr
    if op.centering:
        # The equation lives on the mean-zero subspace; the residual's
        # constant component is an artifact of the kernel representative.
        total = float(np.sum(w))
        means = np.sum(resid_vec * (w if single else w[:, np.newaxis]),
                       axis=0) / total
        resid_vec = resid_vec - means
    if single:
        residual = float(np.sqrt(np.sum(resid_vec * resid_vec * w)))
        rhs_norm = float(np.sqrt(np.sum(rhs_arr * rhs_arr * w)))
        relative = residual / rhs_norm if rhs_norm > 0.0 else 0.0
    else:
        col_res = np.sqrt(np.sum(resid_vec * resid_vec * w[:, np.newaxis], axis=0))
        col_rhs = np.sqrt(np.sum(rhs_arr * rhs_arr * w[:, np.newaxis], axis=0))
        residual = float(np.max(col_res)) if col_res.size else 0.0
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(col_rhs > 0.0, col_res / col_rhs, 0.0)
        relative = float(np.max(rel)) if rel.size else 0.0

    return SolveResult(solution, residual, relative, condition, ridge,
                       sigma_min, sigma_max)


def min_eigen_sym(mat: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part of a square matrix."""
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {arr.shape}")
    if arr.size == 0:
        return 0.0
    sym = 0.5 * (arr + arr.T)
    return float(np.linalg.eigvalsh(sym).min())


def eta_weighted_min_eigen(mat: np.ndarray, eta: DiscreteMeasure,
                           centered: bool = False) -> float:
    """Smallest eigenvalue of an operator matrix in the L2(eta) geometry.

    The matrix acts on grid values; the eigenproblem is posed on the
    support in the symmetric coordinates ``y = sqrt(w) a`` (restricted to
    the mean-zero subspace when ``centered``), after symmetrizing.
    """
    arr = np.asarray(mat, dtype=float)
    if arr.shape != (eta.size, eta.size):
        raise DimensionError(
            f"matrix has shape {arr.shape}, expected ({eta.size}, {eta.size})"
        )
    sup, root = _support_root(eta)
    sub = arr[np.ix_(sup, sup)]
    sym_coords = (sub * (1.0 / root)[np.newaxis, :]) * root[:, np.newaxis]
    if centered:
        q = _centered_projector(root)
        sym_coords = q.T @ sym_coords @ q
    if sym_coords.shape[0] == 0:
        return 0.0
    return min_eigen_sym(sym_coords)


def operator_min_eigen(op: KernelOperator) -> float:
    """eta-weighted smallest eigenvalue of a kernel operator, on the
    mean-zero subspace when the operator centers."""
    return eta_weighted_min_eigen(as_matrix(op), op.base, centered=op.centering)


def centered_basis(eta: DiscreteMeasure) -> np.ndarray:
    """Columns forming an eta-orthonormal basis of the mean-zero subspace
    on the support, padded with the raw coordinate directions of any
    zero-mass points (those are trivially mean zero and, feeding operators
    built from eta, trivially dead; keeping them makes rank defects from
    dead cells visible instead of silently dropped)."""
    sup, root = _support_root(eta)
    m = eta.size
    q = _centered_projector(root)
    cols = np.zeros((m, q.shape[1]))
    cols[sup, :] = q / root[:, np.newaxis]
    dead = np.setdiff1d(np.arange(m), sup)
    if dead.size:
        extra = np.zeros((m, dead.size))
        extra[dead, np.arange(dead.size)] = 1.0
        cols = np.hstack([cols, extra])
    return cols


# ---------------------------------------------------------------------------
# Parametric block algebra for partitioned information matrices.
# ---------------------------------------------------------------------------


def _check_symmetric(name: str, mat: np.ndarray) -> np.ndarray:
    arr = np.asarray(mat, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionError(f"block {name} must be square, got {arr.shape}")
    if arr.size:
        scale = max(float(np.max(np.abs(arr))), 1.0)
        if float(np.max(np.abs(arr - arr.T))) > BLOCK_SYMMETRY_TOL * scale:
            raise DomainError(f"block {name} is not symmetric")
    return arr


@dataclass(frozen=True)
class BlockInformation:
    """A partitioned information matrix ``[[i_tt, i_tp], [i_tp^T, i_pp]]``
    for a parameter split into an interest block (size p) and a nuisance
    block (size q)."""

    i_tt: np.ndarray
    i_tp: np.ndarray
    i_pp: np.ndarray

    def __post_init__(self):
        tt = _check_symmetric("interest (i_tt)", self.i_tt)
        pp = _check_symmetric("nuisance (i_pp)", self.i_pp)
        tp = np.asarray(self.i_tp, dtype=float)
        if tp.shape != (tt.shape[0], pp.shape[0]):
            raise DimensionError(
                f"cross block has shape {tp.shape}, expected "
                f"({tt.shape[0]}, {pp.shape[0]})"
            )
        for name, arr in (("i_tt", tt), ("i_tp", tp), ("i_pp", pp)):
            if arr.size and not np.all(np.isfinite(arr)):
                raise DomainError(f"block {name} has non-finite entries")
            arr.setflags(write=False)
        object.__setattr__(self, "i_tt", tt)
        object.__setattr__(self, "i_tp", tp)
        object.__setattr__(self, "i_pp", pp)

    @classmethod
    def from_matrix(cls, mat, p: int) -> "BlockInformation":
        arr = np.asarray(mat, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise DimensionError(f"expected a square matrix, got {arr.shape}")
        if not 0 <= p <= arr.shape[0]:
            raise DomainError(
                f"split {p} outside [0, {arr.shape[0]}]"
            )
        return cls(arr[:p, :p], arr[:p, p:], arr[p:, p:])

    @property
    def p(self) -> int:
        return self.i_tt.shape[0]

    @property
    def q(self) -> int:
        return self.i_pp.shape[0]

    def full(self) -> np.ndarray:
        top = np.hstack([self.i_tt, self.i_tp])
        bottom = np.hstack([self.i_tp.T, self.i_pp])
        return np.vstack([top, bottom])


def _solve_psd(name: str, mat: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if mat.shape[0] == 0:
        return np.zeros((0,) + rhs.shape[1:])
    eig = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    if eig[-1] <= 0.0 or eig[0] <= 1e-12 * eig[-1]:
        raise NotIdentifiableError(
            f"block {name} is singular (min eigenvalue {eig[0]:.3e})"
        )
    return np.linalg.solve(mat, rhs)


def efficient_info_parametric(info: BlockInformation) -> np.ndarray:
    """Schur complement ``i_tt - i_tp i_pp^{-1} i_tp^T``: the information
    left for the interest block after profiling out the nuisance block."""
    if info.q == 0:
        return info.i_tt.copy()
    return info.i_tt - info.i_tp @ _solve_psd("nuisance (i_pp)", info.i_pp,
                                              info.i_tp.T)


def block_inverse_identity_check(info: BlockInformation) -> float:
    """Max-abs discrepancy between the two classical expressions for the
    inverse of the profiled information.

    The inverse of the Schur complement must equal
    ``i_tt^{-1} + i_tt^{-1} i_tp (i_pp - i_tp^T i_tt^{-1} i_tp)^{-1}
    i_tp^T i_tt^{-1}``. Exact algebra makes these identical; the returned
    number measures the numerical gap.
    """
    if info.p == 0:
        return 0.0
    eff = efficient_info_parametric(info)
    lhs = _solve_psd("profiled interest", eff, np.eye(info.p))
    itt_inv = _solve_psd("interest (i_tt)", info.i_tt, np.eye(info.p))
    if info.q == 0:
        return float(np.max(np.abs(lhs - itt_inv)))
    schur_pp = info.i_pp - info.i_tp.T @ itt_inv @ info.i_tp
    mid = _solve_psd("profiled nuisance", schur_pp, np.eye(info.q))
    rhs = itt_inv + itt_inv @ info.i_tp @ mid @ info.i_tp.T @ itt_inv
    return float(np.max(np.abs(lhs - rhs)))


def invertibility_verdict(info: BlockInformation,
                          rel_tol: float = 1e-10) -> dict:
    """Report whether the full matrix and the two blocks governing its
    invertibility (nuisance block and profiled interest block) are each
    numerically invertible, and whether the equivalence between 'full
    invertible' and 'both pieces invertible' holds at the given relative
    eigenvalue threshold."""

    def invertible(mat: np.ndarray) -> tuple[bool, float]:
        if mat.shape[0] == 0:
            return True, float("inf")
        eig = np.linalg.eigvalsh(0.5 * (mat + mat.T))
        scale = max(float(eig[-1]), 0.0)
        ok = bool(scale > 0.0 and eig[0] > rel_tol * scale)
        return ok, float(eig[0])

    full_ok, full_min = invertible(info.full())
    pp_ok, pp_min = invertible(info.i_pp)
    try:
        eff = efficient_info_parametric(info)
        eff_ok, eff_min = invertible(eff)
    except NotIdentifiableError:
        eff_ok, eff_min = False, 0.0
    return {
        "full_invertible": full_ok,
        "full_min_eigen": full_min,
        "nuisance_invertible": pp_ok,
        "nuisance_min_eigen": pp_min,
        "profiled_invertible": eff_ok,
        "profiled_min_eigen": eff_min,
        "equivalence_holds": full_ok == (pp_ok and eff_ok),
    }
