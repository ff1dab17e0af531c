import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from eraser_sim.errors import CompletenessError, DimensionError, ShapeError, SubsystemIndexError
from eraser_sim.qcore import (DensityOperator, HilbertSpace, StateVector, basis_state, embed,
                              expm, factor_projectors, fock_annihilation, partial_trace,
                              project_measure, tensor)
from eraser_sim.validation import random_density

from conftest import erased_state, ket


def test_fock_annihilation_small():
    np.testing.assert_array_equal(fock_annihilation(2), [[0, 1], [0, 0]])
    assert fock_annihilation(3)[1, 2] == pytest.approx(1.41421356, abs=1e-8)


def test_number_operator_eigenvalue():
    a = fock_annihilation(4)
    one = np.array([0, 1, 0, 0])
    np.testing.assert_allclose(a.conj().T @ a @ one, one)


@pytest.mark.parametrize("dim", [0, 1])
def test_fock_annihilation_rejects_small_dim(dim):
    with pytest.raises(DimensionError):
        fock_annihilation(dim)


@pytest.mark.parametrize("dim", [2, 3, 5])
def test_commutator_below_truncation(dim):
    a = fock_annihilation(dim)
    comm = a @ a.conj().T - a.conj().T @ a
    np.testing.assert_allclose(comm[:-1, :-1], np.eye(dim - 1), atol=1e-14)
    # the truncation defect sits in the top level
    assert comm[-1, -1] == pytest.approx(1 - dim)


def test_tensor_identity_and_action():
    np.testing.assert_array_equal(tensor([np.eye(2), np.eye(2)]), np.eye(4))
    op = tensor([fock_annihilation(2), np.eye(2)])
    one_zero = np.kron([0, 1], [1, 0])
    np.testing.assert_array_equal(op @ one_zero, np.kron([1, 0], [1, 0]))


def test_tensor_block_structure():
    sigma = np.array([[0, 1], [0, 0]])
    nz = np.argwhere(tensor([sigma, np.eye(2)]) != 0)
    assert sorted(map(tuple, nz)) == [(0, 2), (1, 3)]


def test_tensor_rejects_non_square():
    with pytest.raises(ShapeError):
        tensor([np.ones((2, 3))])


def test_tensor_associative(rng):
    x, y, z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)) for n in (2, 3, 2))
    np.testing.assert_allclose(tensor([tensor([x, y]), z]), tensor([x, y, z]), atol=1e-12)
    np.testing.assert_allclose(tensor([x, tensor([y, z])]), tensor([x, y, z]), atol=1e-12)


def test_hilbert_space_validation():
    assert HilbertSpace((4, 2, 3)).dim == 24
    with pytest.raises(DimensionError):
        HilbertSpace((1, 2))


def test_partial_trace_product_state():
    rho = basis_state(HilbertSpace((2, 2)), (0, 1)).to_density()
    red = partial_trace(rho, [0])
    np.testing.assert_allclose(red.matrix, [[1, 0], [0, 0]])


@pytest.mark.parametrize("keep", [[0], [1]])
def test_partial_trace_bell(keep):
    s = 1 / math.sqrt(2)
    bell = ket((2, 2), (s, (0, 0)), (s, (1, 1))).to_density()
    np.testing.assert_allclose(partial_trace(bell, keep).matrix, np.eye(2) / 2, atol=1e-15)


def test_partial_trace_branch_state_population():
    """Reduced mode-A population of the e-branch field after the bath equals |zeta_+|^2."""
    zeta, eta = 0.3 + 0.2j, -0.1 + 0.4j
    vac = 1 - abs(zeta) ** 2 - abs(eta) ** 2
    # explicit 4x4 matrix in the |n_A n_B> basis
    s = np.array([0, eta, zeta, 0])
    rho = np.outer(s, s.conj())
    rho[0, 0] += vac
    red = partial_trace(DensityOperator(HilbertSpace((2, 2)), rho), [0])
    assert red.matrix[1, 1].real == pytest.approx(abs(zeta) ** 2, abs=1e-15)


@pytest.mark.parametrize("keep", [[], [3], [0, 0]])
def test_partial_trace_bad_keep(keep):
    rho = basis_state(HilbertSpace((2, 2, 2)), (0, 0, 0)).to_density()
    with pytest.raises(SubsystemIndexError):
        partial_trace(rho, keep)


def test_partial_trace_all_factors_is_identity_map(rng):
    space = HilbertSpace((2, 3, 2))
    rho = DensityOperator(space, random_density(space.dim, rng))
    np.testing.assert_allclose(partial_trace(rho, [0, 1, 2]).matrix, rho.matrix)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), keep=st.sampled_from([[0], [1], [2], [0, 2], [1, 2], [0, 1]]))
def test_partial_trace_preserves_trace(seed, keep):
    rng = np.random.default_rng(seed)
    space = HilbertSpace((2, 3, 2))
    rho = DensityOperator(space, random_density(space.dim, rng))
    assert abs(partial_trace(rho, keep).trace() - 1) < 1e-12


def test_measure_erased_state_gives_half_half():
    rho = erased_state(0.9).to_density()
    br = project_measure(rho, factor_projectors(rho.space, 0))
    probs = [b.probability for b in br]
    np.testing.assert_allclose(probs, [0, 0.5, 0, 0.5], atol=1e-15)
    assert not br[0].realizable and br[1].realizable


def test_measure_erased_state_conditional_field():
    phi1 = 0.9
    rho = erased_state(phi1).to_density()
    e_branch = project_measure(rho, factor_projectors(rho.space, 0))[1]
    field = partial_trace(e_branch.state, [1, 2])
    target = ket((2, 2), (1 / math.sqrt(2), (0, 1)), (np.exp(1j * phi1) / math.sqrt(2), (1, 0)))
    assert field.fidelity_with(target) == pytest.approx(1, abs=1e-12)


def test_measure_eigenstate_is_idempotent():
    rho = basis_state(HilbertSpace((2, 2)), (1, 0)).to_density()
    br = project_measure(rho, factor_projectors(rho.space, 0))
    assert br[1].probability == 1
    np.testing.assert_allclose(br[1].state.matrix, rho.matrix)


def test_measure_requires_complete_projectors():
    rho = basis_state(HilbertSpace((2, 2)), (1, 0)).to_density()
    with pytest.raises(CompletenessError):
        project_measure(rho, factor_projectors(rho.space, 0)[:1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), factor=st.integers(0, 2))
def test_measure_probabilities_sum_to_one(seed, factor):
    rng = np.random.default_rng(seed)
    space = HilbertSpace((2, 3, 2))
    rho = DensityOperator(space, random_density(space.dim, rng))
    probs = [b.probability for b in project_measure(rho, factor_projectors(space, factor))]
    assert min(probs) >= 0
    assert abs(sum(probs) - 1) < 1e-12


def test_density_operator_checks():
    bad = DensityOperator(HilbertSpace((2,)), np.diag([1.5, -0.5]))
    assert any("negative" in v for v in bad.violations())
    with pytest.raises(DimensionError):
        bad.check()
    with pytest.raises(ShapeError):
        DensityOperator(HilbertSpace((2,)), np.eye(3))


def test_state_vector_is_frozen():
    psi = basis_state(HilbertSpace((2,)), (0,))
    with pytest.raises(ValueError):
        psi.amplitudes[0] = 2


def test_embed_checks_shape():
    with pytest.raises(ShapeError):
        embed(np.eye(3), 0, HilbertSpace((2, 2)))


@pytest.mark.parametrize("scale", [1e-3, 1.0, 30.0, 400.0])
def test_expm_matches_scipy(rng, scale):
    a = scale * (rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))) / 12
    ref = scipy.linalg.expm(a)
    np.testing.assert_allclose(expm(a), ref, rtol=1e-10, atol=1e-12 * np.abs(ref).max())


def test_expm_zero_and_diagonal():
    np.testing.assert_allclose(expm(np.zeros((3, 3))), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(expm(np.diag([1.0, -2.0])), np.diag([math.e, math.exp(-2)]), rtol=1e-14)
