"""Dense complex linear-algebra kernel shared by every other module.

All operators in this package are finite complex matrices (``numpy.ndarray``
with dtype ``complex128``) produced by the validating coercers
:func:`as_matrix` / :func:`as_vector`.  The module provides

* a scaling-and-squaring Pade matrix exponential (:func:`expm`),
* linear solves with explicit singularity reporting (:func:`solve`),
* exact induced operator norms for p in {1, 2, inf} and certified
  (lower, upper) brackets for every other exponent
  (:func:`induced_norm`, :func:`norm_bounds`),
* dense eigenvalues (:func:`eigenvalues`),
* seeded random instances (:func:`make_rng`, :func:`random_matrix`).

Everything is a pure function of its inputs; no global state.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

__all__ = [
    "NumkitError",
    "ShapeError",
    "SingularMatrixError",
    "NumericalRangeError",
    "UnsupportedExponentError",
    "ConvergenceError",
    "as_matrix",
    "as_vector",
    "expm",
    "solve",
    "vector_norm",
    "induced_norm",
    "norm_bounds",
    "eigenvalues",
    "spectral_radius_distance",
    "make_rng",
    "random_matrix",
    "random_vector",
]


class NumkitError(Exception):
    """Base class for numerical-kernel failures."""


class ShapeError(NumkitError, ValueError):
    """Operand shapes are inconsistent (non-square, mismatched, ...)."""


class SingularMatrixError(NumkitError, ArithmeticError):
    """A pivot collapsed to working precision during a solve."""


class NumericalRangeError(NumkitError, ArithmeticError):
    """Input or intermediate values left the representable/accurate range."""


class UnsupportedExponentError(NumkitError, ValueError):
    """An exact induced norm was requested for p outside {1, 2, inf}."""


class ConvergenceError(NumkitError, RuntimeError):
    """An iterative eigenvalue computation failed to converge."""


# ---------------------------------------------------------------------------
# validated coercion
# ---------------------------------------------------------------------------

def as_matrix(a) -> np.ndarray:
    """Coerce ``a`` to a finite 2-d complex128 array.

    Raises
    ------
    ShapeError
        if ``a`` is not two-dimensional.
    NumericalRangeError
        if any entry is NaN or infinite.
    """
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {m.shape}")
    if m.size and not np.all(np.isfinite(m.real) & np.isfinite(m.imag)):
        raise NumericalRangeError("matrix entries must be finite")
    return m


def as_vector(a) -> np.ndarray:
    """Coerce ``a`` to a finite 1-d complex128 array."""
    v = np.asarray(a, dtype=np.complex128)
    if v.ndim == 2 and 1 in v.shape:
        v = v.reshape(-1)
    if v.ndim != 1:
        raise ShapeError(f"expected a vector, got shape {v.shape}")
    if v.size and not np.all(np.isfinite(v.real) & np.isfinite(v.imag)):
        raise NumericalRangeError("vector entries must be finite")
    return v


def _require_square(m: np.ndarray, who: str) -> np.ndarray:
    if m.shape[0] != m.shape[1]:
        raise ShapeError(f"{who} requires a square matrix, got {m.shape}")
    return m


# ---------------------------------------------------------------------------
# matrix exponential: scaling and squaring with diagonal Pade approximants
# ---------------------------------------------------------------------------
# Order-m diagonal Pade numerator coefficients b_0..b_m (denominator uses the
# alternating signs) and the 1-norm thresholds theta_m below which the order-m
# approximant meets double-precision accuracy.

_PADE_B = {
    3: (120.0, 60.0, 12.0, 1.0),
    5: (30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0),
    7: (17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0),
    9: (17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0,
        2162160.0, 110880.0, 3960.0, 90.0, 1.0),
    13: (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
         1187353796428800.0, 129060195264000.0, 10559470521600.0,
         670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
         960960.0, 16380.0, 182.0, 1.0),
}

_PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}

_MAX_SQUARINGS = 60  # 2**60 ~ 1.2e18; beyond this the result is garbage anyway


def _pade_uv(M: np.ndarray, order: int):
    """Split numerator of the order-m Pade approximant into (U, V) with
    p_m(M) = V + U and q_m(M) = V - U (odd/even powers)."""
    b = _PADE_B[order]
    n = M.shape[0]
    eye = np.eye(n, dtype=np.complex128)
    M2 = M @ M
    if order == 13:
        M4 = M2 @ M2
        M6 = M4 @ M2
        U = M @ (M6 @ (b[13] * M6 + b[11] * M4 + b[9] * M2)
                 + b[7] * M6 + b[5] * M4 + b[3] * M2 + b[1] * eye)
        V = (M6 @ (b[12] * M6 + b[10] * M4 + b[8] * M2)
             + b[6] * M6 + b[4] * M4 + b[2] * M2 + b[0] * eye)
        return U, V
    # orders 3, 5, 7, 9: plain Horner in M2
    powers = [eye, M2]
    while 2 * len(powers) <= order + 1:
        powers.append(powers[-1] @ M2)
    U = np.zeros_like(M)
    V = np.zeros_like(M)
    for k, Pk in enumerate(powers):
        if 2 * k + 1 <= order:
            U += b[2 * k + 1] * Pk
        if 2 * k <= order:
            V += b[2 * k] * Pk
    return M @ U, V


def expm(A, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{tA}`` by scaling and squaring.

    The Pade order is chosen from the 1-norm of ``tA`` (orders 3/5/7/9/13);
    larger inputs are halved ``s`` times until the order-13 threshold holds
    and the result is squared back.  Relative error is ~1e-13 for moderate
    norms and <= 1e-12 up to ``||tA|| ~ 50``.

    Raises
    ------
    ShapeError
        for non-square ``A``.
    NumericalRangeError
        if ``||tA||`` would need more than 60 halvings (overflow regime) or
        the input contains non-finite entries.
    """
    A = _require_square(as_matrix(A), "expm")
    n = A.shape[0]
    if n == 0:
        return np.zeros((0, 0), dtype=np.complex128)
    with np.errstate(over="ignore"):  # overflow is caught on the next line
        M = t * A
        nrm = np.linalg.norm(M, 1)
    if not np.isfinite(nrm):
        raise NumericalRangeError("||tA|| overflowed double precision")
    for order in (3, 5, 7, 9):
        if nrm <= _PADE_THETA[order]:
            U, V = _pade_uv(M, order)
            return _pade_solve(U, V)
    s = 0
    if nrm > _PADE_THETA[13]:
        s = int(np.ceil(np.log2(nrm / _PADE_THETA[13])))
        if s > _MAX_SQUARINGS:
            raise NumericalRangeError(
                f"||tA|| = {nrm:.3e} needs {s} > {_MAX_SQUARINGS} squarings")
        M = M / (2.0 ** s)
    U, V = _pade_uv(M, 13)
    E = _pade_solve(U, V)
    for _ in range(s):
        E = E @ E
    if not np.all(np.isfinite(E.real) & np.isfinite(E.imag)):
        raise NumericalRangeError("matrix exponential overflowed")
    return E


def _pade_solve(U: np.ndarray, V: np.ndarray) -> np.ndarray:
    try:
        return np.linalg.solve(V - U, V + U)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - pathological
        raise SingularMatrixError(f"Pade denominator singular: {exc}") from exc


# ---------------------------------------------------------------------------
# solves and norms
# ---------------------------------------------------------------------------

def solve(A, b) -> np.ndarray:
    """Solve ``A x = b`` by partial-pivoting LU.

    ``b`` may be a vector or a matrix of stacked right-hand sides.  A pivot
    within ~n*eps of zero (relative to the largest pivot) is reported as
    :class:`SingularMatrixError`; shape mismatches raise :class:`ShapeError`.
    """
    A = _require_square(as_matrix(A), "solve")
    b_arr = np.asarray(b, dtype=np.complex128)
    vector_rhs = b_arr.ndim == 1
    B = b_arr.reshape(-1, 1) if vector_rhs else as_matrix(b_arr)
    if B.shape[0] != A.shape[0]:
        raise ShapeError(f"rhs has {B.shape[0]} rows, matrix is {A.shape}")
    if A.shape[0] == 0:
        return B.reshape(-1) if vector_rhs else B
    lu, piv = scipy.linalg.lu_factor(A, check_finite=True)
    diag = np.abs(np.diag(lu))
    dmax = diag.max() if diag.size else 0.0
    if dmax == 0.0 or diag.min() <= dmax * A.shape[0] * np.finfo(float).eps:
        raise SingularMatrixError(
            "matrix is singular to working precision "
            f"(pivot ratio {0.0 if dmax == 0.0 else diag.min() / dmax:.3e})")
    X = scipy.linalg.lu_solve((lu, piv), B, check_finite=False)
    return X.reshape(-1) if vector_rhs else X


def vector_norm(x, p: float, weight: float = 1.0) -> float:
    """Weighted vector p-norm ``(sum_i w |x_i|^p)^{1/p}``; max-norm for inf."""
    v = np.abs(np.asarray(x, dtype=np.complex128).reshape(-1))
    if np.isinf(p):
        return float(v.max()) if v.size else 0.0
    if p <= 0:
        raise UnsupportedExponentError(f"p = {p} is not a norm exponent")
    return float((weight * np.sum(v ** p)) ** (1.0 / p))


def induced_norm(A, p, weights=None) -> float:
    """Exact induced operator p-norm for p in {1, 2, inf}.

    ``weights`` (positive reals, one per axis point) turn the plain p-norm
    into the quadrature-weighted one via the diagonal similarity
    ``D A D^{-1}`` with ``D = diag(w^{1/p})``; for p = inf weights cancel.
    For any other exponent use :func:`norm_bounds`.
    """
    A = as_matrix(A)
    if weights is not None and not np.isinf(p):
        w_out, w_in = _norm_weights(A, weights)
        D_out = w_out ** (1.0 / p)
        D_in = w_in ** (1.0 / p)
        A = (A * D_out[:, None]) / D_in[None, :]
    if p == 1:
        return float(np.abs(A).sum(axis=0).max()) if A.size else 0.0
    if p == 2:
        return float(np.linalg.norm(A, 2)) if A.size else 0.0
    if np.isinf(p):
        return float(np.abs(A).sum(axis=1).max()) if A.size else 0.0
    raise UnsupportedExponentError(
        f"exact induced norm only for p in {{1, 2, inf}}, got p = {p}; "
        "use norm_bounds for a certified bracket")


def _norm_weights(A: np.ndarray, weights):
    if isinstance(weights, tuple):
        w_out, w_in = weights
    else:
        w_out = w_in = weights
    w_out = np.asarray(w_out, dtype=float).reshape(-1)
    w_in = np.asarray(w_in, dtype=float).reshape(-1)
    if w_out.shape[0] != A.shape[0] or w_in.shape[0] != A.shape[1]:
        raise ShapeError("weight lengths must match matrix dimensions")
    if np.any(w_out <= 0) or np.any(w_in <= 0):
        raise ValueError("weights must be positive")
    return w_out, w_in


def norm_bounds(A, p: float, rng=None, trials: int = 200):
    """Certified (lower, upper) bracket for the induced p-norm, 1 <= p <= inf.

    lower: best ratio ``||Ax||_p / ||x||_p`` over the canonical basis plus
    ``trials`` seeded random vectors (a genuine lower bound).
    upper: the interpolation bound ``||A||_1^{1/p} * ||A||_inf^{1-1/p}``
    (log-convexity of p -> ||A||_p between the exact endpoint norms).
    """
    A = as_matrix(A)
    if p < 1:
        raise UnsupportedExponentError(f"p = {p} < 1 is not supported")
    if p in (1, 2) or np.isinf(p):
        exact = induced_norm(A, p)
        return exact, exact
    if A.size == 0:
        return 0.0, 0.0
    n1 = induced_norm(A, 1)
    ninf = induced_norm(A, np.inf)
    upper = n1 ** (1.0 / p) * ninf ** (1.0 - 1.0 / p)
    rng = make_rng(0) if rng is None else rng
    lower = 0.0
    cols = A.shape[1]
    for j in range(cols):
        lower = max(lower, vector_norm(A[:, j], p))  # unit basis vectors
    for _ in range(max(trials, 1)):
        x = random_vector(rng, cols)
        nx = vector_norm(x, p)
        if nx > 0.0:
            lower = max(lower, vector_norm(A @ x, p) / nx)
    return lower, upper


def eigenvalues(A) -> np.ndarray:
    """All eigenvalues of a square matrix (dense QR iteration).

    Raises :class:`ConvergenceError` if the QR iteration fails — the error
    message carries the LAPACK diagnostic.
    """
    A = _require_square(as_matrix(A), "eigenvalues")
    if A.shape[0] == 0:
        return np.zeros(0, dtype=np.complex128)
    try:
        return np.linalg.eigvals(A)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigenvalue iteration failed: {exc}") from exc


def spectral_radius_distance(A, point: complex) -> float:
    """Distance from ``point`` to the spectrum of ``A`` (min over eigenvalues)."""
    lam = eigenvalues(A)
    if lam.size == 0:
        return float("inf")
    return float(np.min(np.abs(lam - point)))


# ---------------------------------------------------------------------------
# seeded randomness
# ---------------------------------------------------------------------------

def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator; identical seed => identical stream on all platforms."""
    return np.random.Generator(np.random.PCG64(seed))


def random_matrix(rng: np.random.Generator, rows: int, cols: int,
                  scale: float = 1.0) -> np.ndarray:
    """Random complex matrix, re/im parts i.i.d. uniform on [-scale, scale]."""
    re = rng.uniform(-scale, scale, size=(rows, cols))
    im = rng.uniform(-scale, scale, size=(rows, cols))
    return re + 1j * im


def random_vector(rng: np.random.Generator, dim: int,
                  scale: float = 1.0) -> np.ndarray:
    """Random complex vector, re/im parts i.i.d. uniform on [-scale, scale]."""
    return random_matrix(rng, dim, 1, scale).reshape(-1)
