"""Controllability, observability and input-output maps on a time grid.

For a horizon ``t0`` split into ``steps`` uniform intervals of length ``h``
the three maps of admissibility theory are discretized as

* controllability  ``B_t0 u = int_0^t0 T(t0 - s) B u(s) ds``
  (matrix world: left-endpoint quadrature; transport world: the exact
  translate-and-extend closed form — no quadrature at all),
* observability    ``(C_t0 x)(t_k) = C T(t_k) x`` (pointwise samples),
* input-output     ``(F_t0 u)(t_j) = C int_0^{t_j} T(t_j - s) B u(s) ds``
  (matrix world: left-endpoint, which makes the sample matrix *strictly*
  block lower triangular — discretization can never fabricate a feedback
  singularity; transport world: the exact measure-window formula, block
  lower triangular with a diagonal contribution only from an atom at 1).

Signals are sampled at left endpoints ``t_k = k h`` and normed with weight
``h``; since the weights are uniform they cancel in induced operator norms,
so ``io_matrix`` can be fed to :func:`sgperturb.numkit.induced_norm` directly.

A non-negative spectral shift ``mu`` on the triple enters the transport maps
through the exact discrete conjugation

    B^mu = e^{-mu t0} B M,   C^mu_k = e^{-mu t_k} C_k,   F^mu = M^{-1} F M,

with ``M = diag(e^{mu t_k})`` — these are *identities* at the discrete level,
which is what :func:`rescaled_map_identities` verifies.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import CubicSpline

from . import numkit
from .numkit import ShapeError, as_vector
from .semigroup import (GridFunction, MatrixTriple, TransportTriple,
                        as_grid_function, rescale, shift_open)
from .transport import phi_coefficients

__all__ = [
    "TimeGrid",
    "SampledSignal",
    "AdmissibilityReport",
    "FeedbackReport",
    "RescalingResiduals",
    "RegularityReport",
    "controllability_map",
    "observability_map",
    "io_map",
    "io_matrix",
    "estimate_constants",
    "feedback_admissible",
    "rescaled_map_identities",
    "regularity_check",
    "smooth_trial_signals",
]

#: spectrum distance below which 1 counts as belonging to sigma(F_t0)
FEEDBACK_MARGIN = 1e-8

#: io_matrix refuses to materialize anything wider than this
IO_SIZE_CAP = 4096


@dataclass(frozen=True)
class TimeGrid:
    """Uniform partition of ``[0, t0]`` into ``steps`` cells of length h."""

    t0: float
    steps: int

    def __post_init__(self):
        if not self.t0 > 0:
            raise ValueError(f"horizon must be positive, got {self.t0}")
        if self.steps < 1:
            raise ValueError(f"need at least one step, got {self.steps}")

    @property
    def h(self) -> float:
        return self.t0 / self.steps

    @property
    def times(self) -> np.ndarray:
        """Left endpoints ``t_k = k h``, k = 0 .. steps-1."""
        return self.h * np.arange(self.steps, dtype=float)


@dataclass(frozen=True)
class SampledSignal:
    """U-valued signal sampled at the left endpoints of a :class:`TimeGrid`.

    ``values`` has shape ``(steps, m)``; the p-norm is the flat weighted norm
    ``(h sum_{k,i} |u_{k,i}|^p)^(1/p)`` which agrees with the usual
    ``L^p([0, t0], l^p(C^m))`` discretization.
    """

    grid: TimeGrid
    values: np.ndarray
    p: float = 2.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim == 1:
            v = v.reshape(-1, 1)
        if v.ndim != 2 or v.shape[0] != self.grid.steps:
            raise ShapeError(
                f"signal needs shape ({self.grid.steps}, m), got {v.shape}")
        if v.size and not np.all(np.isfinite(v.real) & np.isfinite(v.imag)):
            raise numkit.NumericalRangeError("signal samples must be finite")
        object.__setattr__(self, "values", v)

    def norm(self, p: Optional[float] = None) -> float:
        q = self.p if p is None else p
        return numkit.vector_norm(self.values.reshape(-1), q,
                                  weight=self.grid.h)

    @property
    def control_dim(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class AdmissibilityReport:
    """Constant estimates (lower bounds over the trial set) and feedback data."""

    M_control: float
    M_observe: float
    M_io: float
    p: float
    alpha: float
    beta: float
    feedback_ok: bool
    margin: float
    samples: int


class FeedbackReport(NamedTuple):
    ok: bool
    margin: float
    io_norm: float
    io_norm_certifies: bool


@dataclass(frozen=True)
class RescalingResiduals:
    control: float
    observe: float
    io: float
    mu_shift: float

    def max_residual(self) -> float:
        return max(self.control, self.observe, self.io)


@dataclass(frozen=True)
class RegularityReport:
    times: tuple
    quantities: tuple
    fitted_exponent: float
    predicted_exponent: float
    passes: bool


# ---------------------------------------------------------------------------
# grid compatibility helpers
# ---------------------------------------------------------------------------

def _signal_on(grid: TimeGrid, u: SampledSignal, m: int) -> np.ndarray:
    if u.grid != grid:
        raise ShapeError("signal lives on a different time grid")
    if u.control_dim != m:
        raise ShapeError(
            f"signal has control dim {u.control_dim}, triple needs {m}")
    return u.values


def _transport_stride(triple: TransportTriple, grid: TimeGrid) -> int:
    """Nodes per time step: h must be a positive multiple of 1/N."""
    q = grid.h * triple.N
    qi = int(round(q))
    if qi < 1 or abs(q - qi) > 1e-9:
        raise ValueError(
            f"time step h = {grid.h} is not a multiple of 1/{triple.N}")
    return qi


# ---------------------------------------------------------------------------
# the three maps
# ---------------------------------------------------------------------------

def controllability_map(triple, grid: TimeGrid, u: SampledSignal):
    """State reached from 0 at time ``t0`` under the input ``u``.

    matrix world: ``h sum_k e^{(t0 - t_k) A} B u_k`` (Horner in e^{hA});
    transport world: the translated signal placed on the surviving window
    ``[1 - t0, 1)`` exactly, with the spectral-shift factor folded in at the
    snapped sample times.
    """
    if isinstance(triple, MatrixTriple):
        vals = _signal_on(grid, u, triple.control_dim)
        E = numkit.expm(triple.A, grid.h)
        acc = np.zeros(triple.state_dim, dtype=np.complex128)
        for k in range(grid.steps):
            acc = E @ (acc + triple.B @ vals[k])
        return grid.h * acc

    vals = _signal_on(grid, u, 1)
    q = _transport_stride(triple, grid)
    N = triple.N
    j0 = q * grid.steps
    out = np.zeros(N + 1, dtype=np.complex128)
    mu = triple.mu_shift
    for i in range(N):
        idx = i + j0 - N
        if 0 <= idx < j0:
            k = idx // q
            factor = np.exp(-mu * (grid.t0 - k * grid.h)) if mu else 1.0
            out[i] = factor * vals[k, 0]
    return GridFunction(out, p=triple.p)


def observability_map(triple, grid: TimeGrid, x, *,
                      require_domain: bool = True) -> SampledSignal:
    """Samples ``C T(t_k) x`` of the observed free orbit.

    transport world: ``x`` must represent a state with ``x(1) = 0`` (the
    observation of the *unperturbed* orbit is defined on that domain); pass
    ``require_domain=False`` for constructions that supply perturbed-domain
    states on purpose.
    """
    if isinstance(triple, MatrixTriple):
        x = as_vector(x)
        if x.shape[0] != triple.state_dim:
            raise ShapeError("state dimension mismatch")
        E = numkit.expm(triple.A, grid.h)
        out = np.empty((grid.steps, triple.C.shape[0]), dtype=np.complex128)
        v = x
        for k in range(grid.steps):
            out[k] = triple.C @ v
            v = E @ v
        return SampledSignal(grid, out, p=2.0)

    gf = as_grid_function(triple, x)
    scale = max(1.0, float(np.abs(gf.values).max()))
    if require_domain and abs(gf.values[-1]) > 1e-9 * scale:
        raise ValueError(
            f"state rejected (outside D(A)): boundary sample x(1) = "
            f"{gf.values[-1]:.3e} must vanish")
    q = _transport_stride(triple, grid)
    coef = phi_coefficients(triple.mu, triple.N)
    mu = triple.mu_shift
    out = np.empty((grid.steps, 1), dtype=np.complex128)
    for k in range(grid.steps):
        shifted = shift_open(gf.values, k * q)
        y = coef @ shifted
        if mu:
            y *= np.exp(-mu * k * grid.h)
        out[k, 0] = y
    return SampledSignal(grid, out, p=triple.p)


def io_matrix(triple, grid: TimeGrid) -> np.ndarray:
    """Dense sample matrix of the input-output map on the grid.

    Because signal quadrature weights are uniform they cancel in induced
    norms, so this matrix *is* the discrete ``L^p -> L^p`` operator.  Matrix
    world fills blocks ``h C e^{d h A} B`` on sub-diagonal ``d >= 1``
    (strictly block lower triangular).  Transport world assembles the exact
    measure-window reads: an atom at an interior node lands strictly below
    the diagonal; an atom at ``s = 1`` lands *on* it; density cells read the
    signal at their midpoint through pure integer index arithmetic.
    """
    m = triple.control_dim
    n_cols = grid.steps * m
    if n_cols > IO_SIZE_CAP:
        raise ValueError(
            f"io_matrix would have {n_cols} > {IO_SIZE_CAP} columns")

    if isinstance(triple, MatrixTriple):
        steps = grid.steps
        F = np.zeros((steps * m, steps * m), dtype=np.complex128)
        E = numkit.expm(triple.A, grid.h)
        P = triple.B  # E^d @ B walker
        for d in range(1, steps):
            P = E @ P
            block = grid.h * (triple.C @ P)
            for j in range(d, steps):
                k = j - d
                F[j * m:(j + 1) * m, k * m:(k + 1) * m] = block
        return F

    q = _transport_stride(triple, grid)
    N = triple.N
    steps = grid.steps
    j0 = q * steps
    F = np.zeros((steps, steps), dtype=np.complex128)
    for loc, w in triple.mu.atoms:
        a = int(round(loc * N))
        for j in range(steps):
            idx = a + j * q - N
            if 0 <= idx < j0:
                F[j, idx // q] += w
    if triple.mu.density:
        for cell, d in enumerate(triple.mu.density):
            for j in range(steps):
                t2 = 2 * cell + 1 + 2 * (j * q - N)
                if 0 <= t2 < 2 * j0:
                    F[j, t2 // (2 * q)] += d / N
    mu = triple.mu_shift
    if mu:
        tk = grid.times
        F = np.exp(-mu * tk)[:, None] * F * np.exp(mu * tk)[None, :]
    return F


def io_map(triple, grid: TimeGrid, u: SampledSignal) -> SampledSignal:
    """Input-output map ``u -> F_t0 u``, via the assembled sample matrix.

    Single code path for both worlds so that applying :func:`io_matrix` to
    the stacked samples agrees with this function bit-for-bit.
    """
    m = triple.control_dim
    vals = _signal_on(grid, u, m)
    F = io_matrix(triple, grid)
    out = (F @ vals.reshape(-1)).reshape(grid.steps, m)
    return SampledSignal(grid, out, p=u.p)


# ---------------------------------------------------------------------------
# constants, feedback, rescaling, regularity
# ---------------------------------------------------------------------------

def smooth_trial_signals(grid: TimeGrid, m: int, trials: int,
                         rng: np.random.Generator, p: float = 2.0):
    """Seeded smooth trial signals with ``u(0) = u'(0) = 0``.

    Random complex knot values on six equispaced nodes are interpolated by a
    clamped cubic spline (zero value and slope at t = 0, natural at t0) and
    sampled at the left endpoints — the discrete stand-in for smooth dense
    subspaces of vanishing initial data.
    """
    knots = np.linspace(0.0, grid.t0, 6)
    tk = grid.times
    out = []
    for _ in range(trials):
        samples = np.empty((grid.steps, m), dtype=np.complex128)
        for comp in range(m):
            vals = numkit.random_vector(rng, knots.size)
            vals[0] = 0.0
            sp_re = CubicSpline(knots, vals.real, bc_type=((1, 0.0), (2, 0.0)))
            sp_im = CubicSpline(knots, vals.imag, bc_type=((1, 0.0), (2, 0.0)))
            samples[:, comp] = sp_re(tk) + 1j * sp_im(tk)
        out.append(SampledSignal(grid, samples, p=p))
    return out


def _state_norm(triple, x) -> float:
    if isinstance(triple, MatrixTriple):
        return float(np.linalg.norm(as_vector(x)))
    return x.norm() if isinstance(x, GridFunction) else float(np.linalg.norm(x))


def _random_domain_state(triple, rng: np.random.Generator):
    if isinstance(triple, MatrixTriple):
        x = numkit.random_vector(rng, triple.state_dim)
        return x / np.linalg.norm(x)
    v = numkit.random_vector(rng, triple.N + 1)
    v[-1] = 0.0
    gf = GridFunction(v, p=triple.p)
    nrm = gf.norm()
    return GridFunction(v / nrm, p=triple.p)


def estimate_constants(triple, grid: TimeGrid, p: float, alpha: float,
                       beta: float, trials: int,
                       rng: np.random.Generator) -> AdmissibilityReport:
    """Estimate the three admissibility constants on seeded trial data.

    All three numbers are maxima of Rayleigh-type ratios over the trial set,
    hence *lower bounds* of the true constants: ``M_control`` over smooth
    signals, ``M_observe`` over random unit states (transport states drawn
    in the observation domain), ``M_io`` as the ``alpha -> beta`` ratio of
    the input-output map.  Feedback admissibility and margin ride along.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    if not (alpha <= p <= beta):
        raise ValueError(f"need alpha <= p <= beta, got {alpha}, {p}, {beta}")
    m = triple.control_dim
    signals = smooth_trial_signals(grid, m, trials, rng, p=p)
    M_control = 0.0
    M_io = 0.0
    used = 0
    for u in signals:
        nu_p = u.norm(p)
        nu_a = u.norm(alpha)
        if nu_p <= 1e-14 or nu_a <= 1e-14:
            continue
        used += 1
        Bu = controllability_map(triple, grid, u)
        M_control = max(M_control, _state_norm(triple, Bu) / nu_p)
        Fu = io_map(triple, grid, u)
        M_io = max(M_io, Fu.norm(beta) / nu_a)
    if used == 0:
        raise ValueError("all trial signals had zero norm; nothing estimated")
    M_observe = 0.0
    for _ in range(trials):
        x = _random_domain_state(triple, rng)
        y = observability_map(triple, grid, x)
        M_observe = max(M_observe, y.norm(p))
    fb = feedback_admissible(triple, grid, p)
    return AdmissibilityReport(
        M_control=float(M_control), M_observe=float(M_observe),
        M_io=float(M_io), p=float(p), alpha=float(alpha), beta=float(beta),
        feedback_ok=fb.ok, margin=fb.margin, samples=used)


def feedback_admissible(triple, grid: TimeGrid, p: float) -> FeedbackReport:
    """Distance of 1 from the spectrum of the discretized input-output map.

    ``ok`` iff the margin is >= 1e-8.  The report also carries the induced
    p-norm of the map (exact for p in {1, 2, inf}, interpolation upper bound
    otherwise) and whether that norm certifies admissibility by ``||F|| < 1``
    alone — the sufficient condition that survives to the continuum.
    """
    F = io_matrix(triple, grid)
    margin = numkit.spectral_radius_distance(F, 1.0)
    try:
        nrm = numkit.induced_norm(F, p)
    except numkit.UnsupportedExponentError:
        nrm = numkit.norm_bounds(F, p)[1]
    return FeedbackReport(bool(margin >= FEEDBACK_MARGIN), float(margin),
                          float(nrm), bool(nrm < 1.0))


def _modulated(u: SampledSignal, factors: np.ndarray) -> SampledSignal:
    return SampledSignal(u.grid, factors[:, None] * u.values, p=u.p)


def rescaled_map_identities(triple, grid: TimeGrid, mu_shift: float,
                            trials: int = 4,
                            rng: Optional[np.random.Generator] = None
                            ) -> RescalingResiduals:
    """Residuals of the three exact rescaling identities on trial data.

    With ``M = diag(e^{mu t_k})`` acting on signal samples, the maps of the
    shifted triple must satisfy ``B^mu = e^{-mu t0} B M``,
    ``C^mu = M^{-1} C`` and ``F^mu = M^{-1} F M``.  Both sides are computed
    independently on smooth trial signals / random states; the sup residuals
    are returned and are expected at the 1e-9 level (the identities are exact
    discretely; only floating-point evaluation differs).
    """
    if mu_shift < 0:
        raise ValueError("mu_shift must be >= 0")
    rng = numkit.make_rng(20240) if rng is None else rng
    shifted = rescale(triple, mu_shift)
    tk = grid.times
    grow = np.exp(mu_shift * tk)
    decay = np.exp(-mu_shift * tk)
    m = triple.control_dim
    signals = smooth_trial_signals(grid, m, trials, rng)

    res_control = 0.0
    res_io = 0.0
    for u in signals:
        lhs_B = controllability_map(shifted, grid, u)
        rhs_B = controllability_map(triple, grid, _modulated(u, grow))
        rhs_B_vals = (np.exp(-mu_shift * grid.t0)
                      * (rhs_B.values if isinstance(rhs_B, GridFunction)
                         else rhs_B))
        lhs_B_vals = lhs_B.values if isinstance(lhs_B, GridFunction) else lhs_B
        res_control = max(res_control,
                          float(np.abs(lhs_B_vals - rhs_B_vals).max()))
        lhs_F = io_map(shifted, grid, u)
        rhs_F = _modulated(io_map(triple, grid, _modulated(u, grow)), decay)
        res_io = max(res_io,
                     float(np.abs(lhs_F.values - rhs_F.values).max()))

    res_observe = 0.0
    for _ in range(trials):
        x = _random_domain_state(triple, rng)
        lhs_C = observability_map(shifted, grid, x)
        rhs_C = _modulated(observability_map(triple, grid, x), decay)
        res_observe = max(res_observe,
                          float(np.abs(lhs_C.values - rhs_C.values).max()))
    return RescalingResiduals(control=res_control, observe=res_observe,
                              io=res_io, mu_shift=float(mu_shift))


def regularity_check(triple, v, t_sequence, alpha: float, beta: float,
                     base_steps: int = 64) -> RegularityReport:
    """Decay of the averaged input-output response to a frozen input.

    For each horizon ``t`` the quantity ``|| (1/t) int_0^t (F_t 1 (x) v)(s) ds ||``
    is computed on a grid adapted to ``t``; compatibility-style regularity
    predicts decay like ``t^(1/alpha - 1/beta)``.  The check passes when the
    quantity is non-increasing along the (decreasing) horizon sequence and
    the log-log fitted exponent is >= the predicted one minus 0.25, or when
    the quantity is identically zero.
    """
    ts = [float(t) for t in t_sequence]
    if len(ts) < 3:
        raise ValueError("need at least 3 horizons to fit a rate")
    if any(t <= 0 for t in ts):
        raise ValueError("horizons must be positive")
    if any(ts[i] <= ts[i + 1] for i in range(len(ts) - 1)):
        raise ValueError("horizons must be strictly decreasing")
    v = as_vector(v)
    m = triple.control_dim
    if v.shape[0] != m:
        raise ShapeError(f"direction must have control dim {m}")

    quantities = []
    for t in ts:
        if isinstance(triple, MatrixTriple):
            grid = TimeGrid(t, base_steps)
        else:
            steps = int(round(t * triple.N))
            if steps < 1 or abs(steps - t * triple.N) > 1e-9:
                raise ValueError(f"horizon {t} is off the 1/{triple.N} grid")
            grid = TimeGrid(t, steps)
        u = SampledSignal(grid, np.tile(v, (grid.steps, 1)))
        y = io_map(triple, grid, u)
        avg = (grid.h / t) * y.values.sum(axis=0)
        quantities.append(float(np.linalg.norm(avg)))

    predicted = 1.0 / alpha - 1.0 / beta
    nonzero = [(t, qy) for t, qy in zip(ts, quantities) if qy > 1e-14]
    monotone = all(quantities[i] + 1e-12 >= quantities[i + 1]
                   for i in range(len(quantities) - 1))
    if len(nonzero) < 2:
        fitted = float("inf")
        passes = monotone
    else:
        lt = np.log([t for t, _ in nonzero])
        lq = np.log([qy for _, qy in nonzero])
        fitted = float(np.polyfit(lt, lq, 1)[0])
        passes = monotone and fitted >= predicted - 0.25
    return RegularityReport(times=tuple(ts), quantities=tuple(quantities),
                            fitted_exponent=fitted,
                            predicted_exponent=float(predicted),
                            passes=bool(passes))
