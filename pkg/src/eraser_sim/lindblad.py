"""Two-mode zero-temperature master equation with a cross decay rate.

Density matrices are vectorized by column stacking, so that
``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DomainError, ShapeError
from .qcore import DEFAULT_TOL, DensityOperator, HilbertSpace, expm, fock_annihilation


@dataclass(frozen=True)
class SystemParams:
    omega: float = 0.0
    k: float = 1.0
    k_c: float = 0.0
    mode_dim: int = 2

    def __post_init__(self):
        for name in ("omega", "k", "k_c"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.k < 0:
            raise DomainError(f"decay rate k must be >= 0, got {self.k}")
        if self.k_c < 0:
            raise DomainError(f"cross decay rate k_c must be >= 0, got {self.k_c}")
        if self.k_c > self.k:
            raise DomainError(f"cross decay rate k_c={self.k_c} exceeds k={self.k}; "
                              "the antisymmetric channel would amplify")
        if int(self.mode_dim) < 2:
            raise DomainError(f"mode_dim must be >= 2, got {self.mode_dim}")

    @property
    def field_space(self) -> HilbertSpace:
        return HilbertSpace((self.mode_dim, self.mode_dim))


@dataclass(frozen=True, eq=False)
class Superoperator:
    hilbert_dim: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.shape != (self.dim, self.dim):
            raise ShapeError(f"superoperator must be {self.dim}x{self.dim}, got {mat.shape}")
        mat.flags.writeable = False
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.hilbert_dim ** 2

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L(rho) for a plain matrix."""
        n = self.hilbert_dim
        return unvec(self.matrix @ vec(rho), n)

    def trace_preservation_error(self) -> float:
        """max |Tr L(E_ij)| over matrix units; zero for a trace-preserving generator."""
        n = self.hilbert_dim
        tr_row = vec(np.eye(n)).conj() @ self.matrix
        return float(np.max(np.abs(tr_row)))


def vec(m: np.ndarray) -> np.ndarray:
    return np.asarray(m).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape(n, n, order="F")


def mode_operators(mode_dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Annihilators ``a`` (mode A) and ``b`` (mode B) on the two-mode space."""
    a1 = fock_annihilation(mode_dim)
    ident = np.eye(mode_dim)
    return np.kron(a1, ident), np.kron(ident, a1)


def _left(x):
    return np.kron(np.eye(x.shape[0]), x)


def _right(x):
    return np.kron(x.T, np.eye(x.shape[0]))


def _sandwich(x, y):
    """Superoperator for rho -> x rho y."""
    return np.kron(y.T, x)


@lru_cache(maxsize=64)
def build_liouvillian(params: SystemParams) -> Superoperator:
    """Generator of the field-mode dynamics during the bath interval.

    Independent decay at rate k on each mode, free rotation at omega, and the
    cross term ``k_c (2 a.b^dag + 2 b.a^dag - {a^dag b + b^dag a, .})``.
    """
    a, b = mode_operators(params.mode_dim)
    ad, bd = a.conj().T, b.conj().T
    h = params.omega * (ad @ a + bd @ b)
    n = a.shape[0]

    gen = -1j * (_left(h) - _right(h))
    for c in (a, b):
        cdc = c.conj().T @ c
        gen = gen + params.k * (2 * _sandwich(c, c.conj().T) - _left(cdc) - _right(cdc))
    mix = ad @ b + bd @ a
    gen = gen + params.k_c * (2 * _sandwich(a, bd) + 2 * _sandwich(b, ad)
                              - _left(mix) - _right(mix))
    return Superoperator(n, gen)


def _check_inputs(L: Superoperator, rho: DensityOperator, t: float):
    if rho.space.dim != L.hilbert_dim:
        raise ShapeError(f"state dim {rho.space.dim} does not match generator dim {L.hilbert_dim}")
    if not t >= 0:
        raise DomainError(f"propagation time must be >= 0, got {t}")


def propagator(L: Superoperator, t: float) -> np.ndarray:
    """exp(L t) as a matrix on vectorized density operators."""
    if not t >= 0:
        raise DomainError(f"propagation time must be >= 0, got {t}")
    return expm(L.matrix * t)


def propagate_expm(L: Superoperator, rho: DensityOperator, t: float) -> DensityOperator:
    _check_inputs(L, rho, t)
    if t == 0:
        return rho
    out = unvec(propagator(L, t) @ vec(rho.matrix), L.hilbert_dim)
    return DensityOperator(rho.space, out)


def propagate_rk4(L: Superoperator, rho: DensityOperator, t: float, steps: int) -> DensityOperator:
    """Classical fixed-step fourth-order Runge-Kutta integration of d(rho)/dt = L rho."""
    _check_inputs(L, rho, t)
    if steps < 1:
        raise DomainError(f"steps must be >= 1, got {steps}")
    m = L.matrix
    y = vec(rho.matrix).astype(complex)
    h = t / steps
    for _ in range(steps):
        k1 = m @ y
        k2 = m @ (y + 0.5 * h * k1)
        k3 = m @ (y + 0.5 * h * k2)
        k4 = m @ (y + h * k3)
        y = y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return DensityOperator(rho.space, unvec(y, L.hilbert_dim))


def f_coeff(params: SystemParams, t: float) -> complex:
    """Same-mode amplitude of a single photon after time t."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    k, kc = params.k, params.k_c
    return cmath.exp(-1j * params.omega * t) / 2 * (math.exp(-(k + kc) * t) + math.exp(-(k - kc) * t))


def l_coeff(params: SystemParams, t: float) -> complex:
    """Amplitude transferred to the other mode after time t."""
    if t < 0:
        raise DomainError(f"t must be >= 0, got {t}")
    k, kc = params.k, params.k_c
    return cmath.exp(-1j * params.omega * t) / 2 * (math.exp(-(k + kc) * t) - math.exp(-(k - kc) * t))


def single_excitation_propagate(params: SystemParams, alpha: complex, beta: complex,
                                t: float, tol: float = DEFAULT_TOL) -> tuple[complex, complex, float]:
    """Evolve ``alpha|1_A 0_B> + beta|0_A 1_B>`` (plus vacuum) in closed form.

    Returns the new amplitudes and the vacuum population.
    """
    weight = abs(alpha) ** 2 + abs(beta) ** 2
    if weight > 1 + tol:
        raise DomainError(f"|alpha|^2 + |beta|^2 = {weight} exceeds 1")
    f, l = f_coeff(params, t), l_coeff(params, t)
    a2 = alpha * f + beta * l
    b2 = beta * f + alpha * l
    return a2, b2, max(0.0, 1.0 - abs(a2) ** 2 - abs(b2) ** 2)


def single_excitation_density(alpha: complex, beta: complex, p_vac: float,
                              mode_dim: int = 2) -> DensityOperator:
    """Density matrix ``|s><s| + p_vac |00><00|`` with ``|s> = alpha|10> + beta|01>``."""
    space = HilbertSpace((mode_dim, mode_dim))
    s = np.zeros(space.dim, dtype=complex)
    s[1 * mode_dim + 0] = alpha
    s[0 * mode_dim + 1] = beta
    rho = np.outer(s, s.conj())
    rho[0, 0] += p_vac
    return DensityOperator(space, rho)
