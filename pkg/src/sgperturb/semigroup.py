"""System triples and their semigroups in two closed worlds.

The package never materializes an extrapolation space.  Instead every
computation runs in one of two concrete instantiations:

* **matrix world** — a triple ``(A, B, C)`` of finite complex matrices on
  ``X = C^n`` with ``U = C^m``; the semigroup is ``e^{tA}`` and all
  extrapolated objects coincide with the ordinary ones.
* **transport world** — ``X`` the grid surrogate of ``L^p[0, 1]`` with nodes
  ``s_k = k/N``; the state operator is the generator of the nilpotent left
  shift (`(T(t)f)(s) = f(s+t)`` for ``s+t <= 1``, else 0), the control
  channel is the boundary inflow at ``s = 1`` and the observation is a
  measure functional on ``[0, 1]``.  Wherever the abstract theory applies an
  extrapolated semigroup, this world substitutes the explicit shift /
  boundary closed forms.

Discretization conventions (load-bearing; the admissibility identities are
exact *because* of them):

* grid values live on all ``N + 1`` nodes, but the p-norm uses the
  left-endpoint rule over nodes ``0 .. N-1`` with weight ``1/N`` — node ``N``
  carries no measure, so the open shift below is an exact isometry on
  surviving samples;
* the shift is *open*: a sample dies as soon as it reaches or passes node
  ``N`` (``(shift_j f)[i] = f[i+j]`` iff ``i + j < N``, node ``N`` maps to 0);
* times and measure atoms must sit on the grid; off-grid inputs are rejected
  rather than interpolated.

A non-negative ``mu_shift`` on a triple represents the rescaled state
operator ``A - mu``; transport-world closed forms evaluate their analytic
data at ``lambda + mu`` and the semigroup gains the factor ``e^{-mu t}``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import NamedTuple, TYPE_CHECKING

import numpy as np

from . import numkit
from .numkit import ShapeError, as_matrix, as_vector

if TYPE_CHECKING:  # pragma: no cover - import cycle guard (runtime duck-typed)
    from .transport import BorelMeasure

__all__ = [
    "MatrixTriple",
    "TransportTriple",
    "GridFunction",
    "SpectralAbscissa",
    "shift_open",
    "apply_semigroup",
    "resolvent",
    "volterra_resolvent_values",
    "as_grid_function",
    "rescale",
    "spectral_abscissa",
    "NILPOTENT_SENTINEL",
]

#: JSON-safe stand-in for "-infinity" growth bound of a nilpotent semigroup.
NILPOTENT_SENTINEL = -1e300

#: guard for exp() arguments inside transport closed forms
_EXP_RANGE = 500.0


@dataclass(frozen=True)
class MatrixTriple:
    """Finite-dimensional system ``(A, B, C)`` on ``X = C^n``, ``U = C^m``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.A)
        B = as_matrix(self.B)
        C = as_matrix(self.C)
        n = A.shape[0]
        if A.shape != (n, n):
            raise ShapeError(f"A must be square, got {A.shape}")
        if B.shape[0] != n:
            raise ShapeError(f"B must have {n} rows, got {B.shape}")
        if C.shape[1] != n:
            raise ShapeError(f"C must have {n} columns, got {C.shape}")
        if B.shape[1] != C.shape[0]:
            raise ShapeError(
                f"control dim {B.shape[1]} != observation dim {C.shape[0]}")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "C", C)

    @property
    def world(self) -> str:
        return "matrix"

    @property
    def state_dim(self) -> int:
        return self.A.shape[0]

    @property
    def control_dim(self) -> int:
        return self.B.shape[1]


@dataclass(frozen=True)
class TransportTriple:
    """Grid transport system on ``[0, 1]`` with boundary inflow and a
    measure-functional observation.

    Parameters
    ----------
    N : grid size (``N >= 4``); nodes ``s_k = k / N``.
    p : norm exponent in ``[1, inf)`` for the state space.
    mu : the observation functional, a measure on ``[0, 1]`` whose atoms
        must sit on grid nodes (validated here).
    mu_shift : non-negative spectral shift of the state operator.
    """

    N: int
    p: float
    mu: "BorelMeasure"
    mu_shift: float = 0.0

    def __post_init__(self):
        if self.N < 4:
            raise ValueError(f"need N >= 4, got {self.N}")
        if not (1.0 <= self.p < np.inf):
            raise ValueError(f"need p in [1, inf), got {self.p}")
        if self.mu_shift < 0:
            raise ValueError("mu_shift must be >= 0")
        for loc, _ in self.mu.atoms:
            node = loc * self.N
            if abs(node - round(node)) > 1e-12:
                raise ValueError(
                    f"measure atom at {loc} is off the N = {self.N} grid")
        if len(self.mu.density) not in (0, self.N):
            raise ValueError(
                f"density needs one value per grid cell ({self.N}), "
                f"got {len(self.mu.density)}")

    @property
    def world(self) -> str:
        return "transport"

    @property
    def control_dim(self) -> int:
        return 1


@dataclass(frozen=True)
class GridFunction:
    """``N + 1`` complex samples on the nodes ``k / N`` with a norm exponent.

    The p-norm is the left-endpoint quadrature over nodes ``0 .. N-1`` with
    weight ``1/N``; node ``N`` carries no weight (see module docstring).
    """

    values: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        v = as_vector(self.values)
        if v.shape[0] < 2:
            raise ShapeError("a grid function needs at least 2 nodes")
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return self.values.shape[0] - 1

    def norm(self) -> float:
        return numkit.vector_norm(self.values[:-1], self.p, weight=1.0 / self.N)

    def __len__(self) -> int:
        return self.values.shape[0]


class SpectralAbscissa(NamedTuple):
    value: float
    nilpotent: bool


def shift_open(values: np.ndarray, j: int) -> np.ndarray:
    """Left shift by ``j`` nodes with open right boundary.

    ``out[i] = values[i + j]`` while ``i + j < N``; every other node —
    including node ``N`` itself — is set to zero.  For ``j = 0`` this returns
    a copy with node ``N`` zeroed, which is the stored representative of the
    same L^p class that every semigroup orbit uses.
    """
    v = np.asarray(values, dtype=np.complex128)
    N = v.shape[0] - 1
    out = np.zeros_like(v)
    if j < 0:
        raise ValueError("shift amount must be >= 0")
    if j < N:
        out[: N - j] = v[j:N]
    return out


def _on_grid_steps(t: float, N: int) -> int:
    steps = t * N
    j = int(round(steps))
    if abs(steps - j) > 1e-9 or t < 0:
        raise ValueError(
            f"time {t} is not a non-negative multiple of 1/{N} (exact-shift grid)")
    return j


def apply_semigroup(triple, t: float, x):
    """Unperturbed semigroup action ``T(t) x``.

    matrix world: ``expm(A, t) @ x``; transport world: the exact open left
    shift by ``t N`` nodes (``t`` must be on-grid), times ``e^{-mu_shift t}``.
    """
    if t < 0:
        raise ValueError("semigroup is defined for t >= 0 only")
    if isinstance(triple, MatrixTriple):
        x = as_vector(x)
        return numkit.expm(triple.A, t) @ x
    gf = as_grid_function(triple, x)
    j = _on_grid_steps(t, triple.N)
    out = shift_open(gf.values, j)
    if triple.mu_shift:
        out = out * np.exp(-triple.mu_shift * t)
    return GridFunction(out, p=triple.p)


def as_grid_function(triple: TransportTriple, x) -> GridFunction:
    if isinstance(x, GridFunction):
        if x.N != triple.N:
            raise ShapeError(f"grid function has N = {x.N}, triple N = {triple.N}")
        return x
    v = as_vector(x)
    if v.shape[0] != triple.N + 1:
        raise ShapeError(
            f"expected {triple.N + 1} samples, got {v.shape[0]}")
    return GridFunction(v, p=triple.p)


def volterra_resolvent_values(lam: complex, values: np.ndarray) -> np.ndarray:
    """Trapezoid discretization of ``(R f)(s) = int_s^1 e^{lam (s-r)} f(r) dr``.

    Backward per-cell recursion: with ``h = 1/N`` and ``E = e^{-lam h}``,

        I_N = 0,   I_k = (h/2) (f_k + E f_{k+1}) + E I_{k+1}.

    Exact for constant ``f`` up to O(h^2); used by both the unperturbed
    transport resolvent and the perturbed one.
    """
    f = np.asarray(values, dtype=np.complex128)
    N = f.shape[0] - 1
    h = 1.0 / N
    if abs(lam.real) * h > _EXP_RANGE:
        raise numkit.NumericalRangeError(
            f"Re(lambda) = {lam.real:g} overflows the cell factor e^(-lam/N)")
    E = np.exp(-lam * h)
    out = np.zeros_like(f)
    acc = 0.0 + 0.0j
    for k in range(N - 1, -1, -1):
        acc = (h / 2.0) * (f[k] + E * f[k + 1]) + E * acc
        out[k] = acc
    return out


def resolvent(triple, lam: complex):
    """Resolvent ``R(lam, A)`` of the unperturbed state operator, as a map.

    Returns a callable ``state -> state``.  matrix world: dense solve with a
    spectrum-distance guard of 1e-8; transport world: the explicit Volterra
    integral above, evaluated at ``lam + mu_shift``.
    """
    if isinstance(triple, MatrixTriple):
        A = triple.A
        dist = numkit.spectral_radius_distance(A, lam)
        if dist < 1e-8:
            raise numkit.SingularMatrixError(
                f"lambda = {lam} is within {dist:.2e} of the spectrum")
        n = A.shape[0]
        shifted = lam * np.eye(n, dtype=np.complex128) - A

        def _apply_matrix(x):
            return numkit.solve(shifted, as_vector(x))

        return _apply_matrix

    lam_eff = lam + triple.mu_shift

    def _apply_transport(x):
        gf = as_grid_function(triple, x)
        return GridFunction(volterra_resolvent_values(lam_eff, gf.values),
                            p=triple.p)

    return _apply_transport


def rescale(triple, mu_shift: float):
    """Triple with state operator ``A - mu_shift * Id``; B, C unchanged."""
    if mu_shift < 0:
        raise ValueError("mu_shift must be >= 0")
    if mu_shift == 0:
        return triple
    if isinstance(triple, MatrixTriple):
        n = triple.state_dim
        return MatrixTriple(
            triple.A - mu_shift * np.eye(n, dtype=np.complex128),
            triple.B, triple.C)
    return replace(triple, mu_shift=triple.mu_shift + mu_shift)


def spectral_abscissa(triple) -> SpectralAbscissa:
    """Growth-bound surrogate: max real part of the spectrum.

    transport world: the (shifted) generator is nilpotent — the spectrum of
    the true operator is empty — so the result is the large negative sentinel
    ``NILPOTENT_SENTINEL`` with ``nilpotent=True`` rather than a number that
    pretends to be data.
    """
    if isinstance(triple, MatrixTriple):
        lam = numkit.eigenvalues(triple.A)
        return SpectralAbscissa(float(np.max(lam.real)), False)
    return SpectralAbscissa(NILPOTENT_SENTINEL, True)
