import numpy as np
import pytest
from numpy.testing import assert_allclose

from conftest import stable_triple, taylor_expm
from sgperturb import numkit
from sgperturb.admissibility import TimeGrid
from sgperturb.perturbation import (
    FeedbackSingularError,
    generation_certificate,
    long_horizon_growth_check,
    perturbed_generator,
    perturbed_resolvent,
    transfer_function,
    variation_of_parameters_residual,
    weiss_staffans_semigroup,
)
from sgperturb.semigroup import (
    GridFunction,
    MatrixTriple,
    TransportTriple,
    apply_semigroup,
    rescale,
    volterra_resolvent_values,
)
from sgperturb.transport import (
    BorelMeasure,
    apply_phi,
    phi_coefficients,
    solve_pde,
    transfer_scalar,
    upwind_generator,
)

SCALAR = MatrixTriple(np.array([[-1.0]]), np.array([[1.0]]),
                      np.array([[0.5]]))
LITTLE_MASS_ATOMS = ((0.5, 0.3), (0.875, 0.2))


def transport_triple(N=64, p=2.0, atoms=LITTLE_MASS_ATOMS, density=(),
                     mu_shift=0.0):
    return TransportTriple(N=N, p=p, mu=BorelMeasure(atoms, density),
                           mu_shift=mu_shift)


def zero_observation(seed=2, n=4, m=2):
    rng = numkit.make_rng(seed)
    A = -np.eye(n) + 0.3 * numkit.random_matrix(rng, n, n)
    B = numkit.random_matrix(rng, n, m)
    return MatrixTriple(A, B, np.zeros((m, n)))


def compatible_state(triple):
    N = triple.N
    s = np.arange(N + 1) / N
    v = (np.sin(np.pi * s) * (1.0 - s)).astype(complex)
    c = phi_coefficients(triple.mu, N)
    v[N] = (c[:N] @ v[:N]) / (1.0 - c[N])
    return GridFunction(v, p=triple.p)


# ---------------------------------------------------------------------------
# perturbed generator
# ---------------------------------------------------------------------------

def test_generator_zero_observation_is_A():
    triple = zero_observation()
    gen = perturbed_generator(triple)
    assert gen.world == "matrix"
    assert np.array_equal(gen.matrix, triple.A)


def test_generator_scalar_sum():
    gen = perturbed_generator(SCALAR)
    assert_allclose(gen.matrix, [[-0.5]], atol=0)


def test_generator_transport_half_atom_equals_unperturbed():
    triple = transport_triple(N=16, atoms=((1.0, 0.5),))
    gen = perturbed_generator(triple)
    assert np.array_equal(gen.matrix, upwind_generator(BorelMeasure(), 16))


def test_generator_transport_unit_atom_degenerate():
    triple = transport_triple(N=16, atoms=((1.0, 1.0),))
    gen = perturbed_generator(triple)
    assert gen.degenerate
    assert gen.matrix is None


def test_generator_transport_folds_spectral_shift():
    plain = transport_triple(N=16, atoms=((0.5, 0.4),))
    shifted = transport_triple(N=16, atoms=((0.5, 0.4),), mu_shift=2.0)
    d = perturbed_generator(shifted).matrix - perturbed_generator(plain).matrix
    assert_allclose(d, -2.0 * np.eye(16), atol=1e-14)


# ---------------------------------------------------------------------------
# transfer function
# ---------------------------------------------------------------------------

def test_transfer_zero_control():
    triple = MatrixTriple(np.array([[-1.0]]), np.zeros((1, 1)),
                          np.array([[1.0]]))
    assert np.abs(transfer_function(triple, 2.0)).max() == 0.0


def test_transfer_scalar_at_zero():
    triple = MatrixTriple(np.array([[-1.0]]), np.array([[1.0]]),
                          np.array([[1.0]]))
    assert transfer_function(triple, 0.0)[0, 0] == pytest.approx(1.0)


def test_transfer_transport_atom_is_constant_alpha():
    triple = transport_triple(N=16, atoms=((1.0, 0.5),))
    for lam in (0.0, 1.0, -1.0 + 2.0j):
        assert transfer_function(triple, lam)[0, 0] == pytest.approx(0.5)


def test_transfer_matches_resolvent_lift_quadrature():
    # H(lam) = Phi (Id - lam R(lam, A)) D_0, computed by quadrature,
    # agrees with the exact integral formula to O(1/N)
    N = 512
    mu = BorelMeasure(density=(1.0,) * N)
    lam = 1.0
    ones = np.ones(N + 1, dtype=complex)
    g = ones - lam * volterra_resolvent_values(lam, ones)
    assert abs(apply_phi(mu, g) - transfer_scalar(mu, lam)) <= 10.0 / N


def test_transfer_guards_spectrum():
    with pytest.raises(numkit.SingularMatrixError):
        transfer_function(SCALAR, -1.0)


# ---------------------------------------------------------------------------
# perturbed resolvent
# ---------------------------------------------------------------------------

def test_resolvent_zero_observation_reduces_to_plain():
    triple = zero_observation(3)
    lam = 1.5 + 0.5j
    Q = perturbed_resolvent(triple, lam)
    R = np.linalg.inv(lam * np.eye(4) - triple.A)
    assert np.abs(Q - R).max() <= 1e-12 * np.abs(R).max()


def test_resolvent_scalar_closed_form():
    Q = perturbed_resolvent(SCALAR, 0.0)
    assert_allclose(Q, [[2.0]], rtol=1e-12)


def test_resolvent_matches_direct_inverse_20_lambdas():
    triple = stable_triple(42, n=5, m=2)
    Apert = triple.A + triple.B @ triple.C
    rng = numkit.make_rng(43)
    count = 0
    while count < 20:
        lam = complex(rng.uniform(1.0, 4.0), rng.uniform(-4.0, 4.0))
        try:
            Q = perturbed_resolvent(triple, lam)
        except (FeedbackSingularError, numkit.SingularMatrixError):
            continue
        direct = np.linalg.inv(lam * np.eye(5) - Apert)
        assert np.linalg.norm(Q - direct) <= 1e-10 * np.linalg.norm(Q)
        count += 1


def test_resolvent_equation_for_Q():
    triple = stable_triple(44, n=4, m=2)
    lam, nu = 2.0 + 1.0j, 3.0 - 0.5j
    Ql = perturbed_resolvent(triple, lam)
    Qn = perturbed_resolvent(triple, nu)
    assert np.abs((Ql - Qn) - (nu - lam) * (Ql @ Qn)).max() <= 1e-8


def test_resolvent_transport_atom_identity():
    # alpha delta_1: the lift term vanishes and Q = R acts on any f
    triple = transport_triple(N=64, atoms=((1.0, 0.5),))
    f = GridFunction(np.sin(np.pi * np.arange(65) / 64))
    lam = 1.0
    Q = perturbed_resolvent(triple, lam)
    out = Q(f)
    plain = volterra_resolvent_values(lam, f.values)
    assert np.abs(out.values - plain).max() <= 1e-12


def test_resolvent_feedback_singularity_raises():
    triple = transport_triple(N=32, atoms=((1.0, 1.0),))
    with pytest.raises(FeedbackSingularError):
        perturbed_resolvent(triple, 2.0)


def test_resolvent_transport_residual_small():
    # (lam - A^Phi) Q f = f checked through the upwind discretization
    triple = transport_triple(N=256)
    lam = 1.0 + 1.0j
    rngv = numkit.make_rng(45)
    f = numkit.random_vector(rngv, 257)
    f[-1] = 0.0
    g = perturbed_resolvent(triple, lam)(GridFunction(f)).values
    N = triple.N
    interior = lam * g[:N] - N * (g[1:] - g[:N]) - f[:N]
    coef = phi_coefficients(triple.mu, N)
    boundary = abs(g[N] - coef @ g)
    res = max(np.abs(interior).max(), boundary) / np.abs(f).max()
    assert res <= 50.0 * (1.0 + abs(lam)) ** 2 / N


# ---------------------------------------------------------------------------
# constructed semigroup
# ---------------------------------------------------------------------------

def test_ws_zero_observation_is_unperturbed_matrix():
    triple = zero_observation(5)
    grid = TimeGrid(0.8, 32)
    x = numkit.random_vector(numkit.make_rng(6), 4)
    out = weiss_staffans_semigroup(triple, grid, 0.8, x)
    assert np.abs(out - apply_semigroup(triple, 0.8, x)).max() <= 1e-12


def test_ws_zero_measure_is_unperturbed_transport():
    triple = transport_triple(N=32, atoms=())
    grid = TimeGrid(1.0, 32)
    x = GridFunction(np.r_[np.sin(np.pi * np.arange(32) / 32), 0.0])
    out = weiss_staffans_semigroup(triple, grid, 1.0, x)
    free = apply_semigroup(triple, 1.0, x)
    assert np.abs(out.values - free.values).max() == 0.0


def test_ws_scalar_first_order():
    grid = TimeGrid(1.0, 128)
    out = weiss_staffans_semigroup(SCALAR, grid, 1.0, np.array([1.0]))
    assert abs(out[0] - np.exp(-0.5)) <= 3.0 * grid.h


def test_ws_matrix_error_halves_under_refinement():
    triple = stable_triple(47)
    t = 0.8
    x = numkit.random_vector(numkit.make_rng(48), 4)
    oracle = taylor_expm(triple.A + triple.B @ triple.C, t) @ x
    errors = []
    for steps in (16, 32, 64):
        out = weiss_staffans_semigroup(triple, TimeGrid(t, steps), t, x)
        errors.append(np.linalg.norm(out - oracle))
    for e0, e1 in zip(errors, errors[1:]):
        assert 1.6 <= e0 / e1 <= 2.4


def test_ws_requires_t_equal_to_horizon():
    with pytest.raises(ValueError):
        weiss_staffans_semigroup(SCALAR, TimeGrid(1.0, 8), 0.5,
                                 np.array([1.0]))


def test_ws_transport_equals_pde_solution_at_full_stride():
    # one feedback sample per grid level: the construction solves the same
    # boundary recursion as the method of steps, so the norm-carrying
    # samples agree to rounding (node N holds the zero representative on
    # one side and the boundary value on the other; it carries no weight)
    triple = transport_triple(N=32)
    grid = TimeGrid(1.0, 32)
    x = compatible_state(triple)
    ws = weiss_staffans_semigroup(triple, grid, 1.0, x)
    pde = solve_pde(triple.mu, x, 1.0, 32).states[-1]
    assert np.abs(ws.values[:32] - pde[:32]).max() <= 1e-14


def test_ws_transport_coarse_sampling_converges():
    # coarser feedback sampling (fewer steps at fixed N) leaves a
    # first-order gap to the exact trajectory; doubling steps halves it
    triple = transport_triple(N=64)
    x = compatible_state(triple)
    exact = solve_pde(triple.mu, x, 1.0, 64).states[-1]
    gaps = []
    for steps in (16, 32):
        ws = weiss_staffans_semigroup(triple, TimeGrid(1.0, steps), 1.0, x)
        gaps.append(np.abs(ws.values[:64] - exact[:64]).max())
    assert gaps[1] <= 0.75 * gaps[0]


def test_ws_rescaling_compensation_identity():
    # running the construction on the shifted triple and multiplying by
    # e^{mu t} recovers the unshifted result
    triple = stable_triple(49)
    grid = TimeGrid(0.8, 32)
    x = numkit.random_vector(numkit.make_rng(50), 4)
    plain = weiss_staffans_semigroup(triple, grid, 0.8, x)
    comp = weiss_staffans_semigroup(triple, grid, 0.8, x, mu_shift=1.5)
    assert np.abs(plain - comp).max() <= 1e-9 * np.abs(plain).max()


# ---------------------------------------------------------------------------
# variation of parameters
# ---------------------------------------------------------------------------

def test_vop_zero_observation_residual_zero():
    triple = zero_observation(7)
    grid = TimeGrid(0.8, 16)
    x = numkit.random_vector(numkit.make_rng(8), 4)
    assert variation_of_parameters_residual(triple, grid, 0.8, x) <= 1e-12


def test_vop_scalar_within_first_order_budget():
    grid = TimeGrid(1.0, 64)
    res = variation_of_parameters_residual(SCALAR, grid, 1.0,
                                           np.array([1.0]))
    assert res <= 5.0 * grid.h


def test_vop_transport_halves_under_refinement():
    residuals = []
    for N in (32, 64):
        triple = transport_triple(N=N)
        grid = TimeGrid(1.0, N // 2)  # stride 2: quadrature error visible
        res = variation_of_parameters_residual(triple, grid, 1.0,
                                               compatible_state(triple))
        residuals.append(res)
    assert residuals[1] <= 0.75 * residuals[0]


def test_vop_rejects_state_outside_closed_loop_domain():
    triple = transport_triple(N=32)
    bad = GridFunction(np.ones(33))  # x(1) = 1 != Phi x
    with pytest.raises(ValueError):
        variation_of_parameters_residual(triple, TimeGrid(1.0, 32), 1.0,
                                         bad)


# ---------------------------------------------------------------------------
# growth check
# ---------------------------------------------------------------------------

def test_growth_zero_observation_surrogate_is_semigroup_norm():
    triple = zero_observation(9)
    grid = TimeGrid(0.8, 16)
    rep = long_horizon_growth_check(triple, grid, (0.0, 1.0))
    expected = numkit.induced_norm(numkit.expm(triple.A, 0.8), 2)
    assert rep.surrogate_norm == pytest.approx(expected, rel=1e-9)
    assert rep.all_dominated


def test_growth_scalar_contraction_at_mu_zero():
    grid = TimeGrid(1.0, 64)
    rep = long_horizon_growth_check(SCALAR, grid, (0.0,))
    mu, threshold, passed = rep.mu_entries[0]
    assert mu == 0.0 and threshold == pytest.approx(1.0)
    assert passed
    assert rep.surrogate_norm == pytest.approx(np.exp(-0.5), abs=0.02)


def test_growth_random_stable_block_chain_dominates():
    triple = stable_triple(51, n=3, m=2)
    rep = long_horizon_growth_check(triple, TimeGrid(0.5, 16),
                                    (0.5, 1.0, 2.0), n_max=6)
    assert rep.all_dominated
    assert len(rep.block_entries) == 6
    for _, lhs, rhs in rep.block_entries:
        assert lhs <= rhs * (1.0 + 1e-12)


def test_growth_transport_needs_feedback_margin():
    triple = transport_triple(N=16, atoms=((1.0, 1.0),))
    with pytest.raises(ValueError):
        long_horizon_growth_check(triple, TimeGrid(1.0, 16), (0.0,))


def test_growth_transport_two_atoms():
    triple = transport_triple(N=32)
    rep = long_horizon_growth_check(triple, TimeGrid(1.0, 32),
                                    (0.5, 1.0, 2.0), n_max=4)
    assert rep.all_dominated
    assert any(ok for _, _, ok in rep.mu_entries)


# ---------------------------------------------------------------------------
# generation certificate
# ---------------------------------------------------------------------------

def test_certificate_zero_observation_generated():
    triple = zero_observation(11)
    cert = generation_certificate(triple, TimeGrid(0.8, 16), 2.0, 2.0,
                                  2.0, numkit.make_rng(12))
    assert cert.verdict == "generated"
    assert cert.conditions["M_observe"] == 0.0
    assert cert.conditions["M_io"]["value"] == 0.0
    assert cert.conditions["feedback"]["ok"]
    assert len(cert.resolvent_residuals) == 10
    assert all(res <= thr for _, res, thr in cert.resolvent_residuals)


def test_certificate_transport_two_atoms_generated():
    triple = transport_triple(N=64)
    cert = generation_certificate(triple, TimeGrid(1.0, 64), 2.0, 1.0,
                                  2.0, numkit.make_rng(13))
    assert cert.verdict == "generated"
    assert cert.conditions["compatibility"]["ok"]
    fb = cert.conditions["feedback"]
    assert fb["ok"] or fb["bypass"]["found"]


def test_certificate_unit_atom_not_generated():
    triple = transport_triple(N=64, atoms=((1.0, 1.0),))
    cert = generation_certificate(triple, TimeGrid(1.0, 64), 2.0, 1.0,
                                  2.0, numkit.make_rng(14))
    assert cert.verdict == "not_generated"
    assert not cert.conditions["feedback"]["ok"]
    assert any("identically 1" in note for note in cert.notes)


def test_certificate_half_atom_generated():
    triple = transport_triple(N=64, atoms=((1.0, 0.5),))
    cert = generation_certificate(triple, TimeGrid(1.0, 64), 2.0, 2.0,
                                  2.0, numkit.make_rng(15))
    assert cert.verdict == "generated"
    assert cert.conditions["feedback"]["margin"] == pytest.approx(0.5,
                                                                  abs=1e-9)


def test_certificate_rescaling_coherence():
    triple = transport_triple(N=64)
    grid = TimeGrid(1.0, 64)
    plain = generation_certificate(triple, grid, 2.0, 2.0, 2.0,
                                   numkit.make_rng(16))
    shifted = generation_certificate(rescale(triple, 1.0), grid, 2.0, 2.0,
                                     2.0, numkit.make_rng(16))
    assert plain.verdict == shifted.verdict == "generated"
    m0 = plain.conditions["feedback"]["margin"]
    m1 = shifted.conditions["feedback"]["margin"]
    assert abs(m0 - m1) <= 1e-9
    assert shifted.mu_shift == pytest.approx(1.0)


def test_certificate_validates_exponents():
    with pytest.raises(ValueError):
        generation_certificate(SCALAR, TimeGrid(1.0, 8), 2.0, 3.0, 1.0,
                               numkit.make_rng(17))
    with pytest.raises(ValueError):
        # alpha = beta != p has neither route
        generation_certificate(SCALAR, TimeGrid(1.0, 8), 2.0, 1.5, 1.5,
                               numkit.make_rng(18))


def test_certificate_carries_surrogate_disclaimer():
    cert = generation_certificate(zero_observation(19), TimeGrid(0.5, 8),
                                  2.0, 2.0, 2.0, numkit.make_rng(20))
    assert any("surrogate" in note for note in cert.notes)
