"""Dense complex linear algebra on composite Hilbert spaces.

Factor ordering is fixed project-wide: atom factors first, then mode A,
then mode B.  Matrices are plain ``numpy.ndarray`` objects; the state
wrappers below freeze their arrays so they can be shared between threads.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass
from functools import reduce
from typing import Sequence

import numpy as np

from .errors import CompletenessError, DimensionError, ShapeError, SubsystemIndexError

DEFAULT_TOL = 1e-10
PROBABILITY_FLOOR = 1e-12
TOLERANCE_ENV = "ERASER_SIM_TOLERANCE"


def default_tolerance() -> float:
    """Absolute tolerance for invariant checks, honouring ``ERASER_SIM_TOLERANCE``."""
    raw = os.environ.get(TOLERANCE_ENV)
    if raw is None or raw.strip() == "":
        return DEFAULT_TOL
    value = float(raw)
    if not value > 0:
        raise ValueError(f"{TOLERANCE_ENV} must be positive, got {raw!r}")
    return value


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=complex)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class HilbertSpace:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(d) for d in self.dims)
        if not dims:
            raise DimensionError("a Hilbert space needs at least one factor")
        if any(d < 2 for d in dims):
            raise DimensionError(f"every factor dimension must be >= 2, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def dim(self) -> int:
        return math.prod(self.dims)

    def __len__(self):
        return len(self.dims)

    def subspace(self, keep: Sequence[int]) -> "HilbertSpace":
        return HilbertSpace(tuple(self.dims[i] for i in keep))


@dataclass(frozen=True, eq=False)
class StateVector:
    space: HilbertSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = _frozen(self.amplitudes).reshape(-1)
        if amps.size != self.space.dim:
            raise ShapeError(f"expected {self.space.dim} amplitudes, got {amps.size}")
        object.__setattr__(self, "amplitudes", amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def check(self, tol: float = DEFAULT_TOL) -> None:
        if abs(self.norm() ** 2 - 1.0) > tol:
            raise DimensionError(f"state is not normalized (|psi|^2 = {self.norm() ** 2:.3e})")

    def normalized(self) -> "StateVector":
        return StateVector(self.space, self.amplitudes / self.norm())

    def to_density(self) -> "DensityOperator":
        psi = self.amplitudes
        return DensityOperator(self.space, np.outer(psi, psi.conj()))


@dataclass(frozen=True, eq=False)
class DensityOperator:
    space: HilbertSpace
    matrix: np.ndarray

    def __post_init__(self):
        mat = _frozen(self.matrix)
        n = self.space.dim
        if mat.shape != (n, n):
            raise ShapeError(f"expected a {n}x{n} matrix, got {mat.shape}")
        object.__setattr__(self, "matrix", mat)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm)[0])

    def violations(self, tol: float = DEFAULT_TOL) -> list[str]:
        out = []
        if self.hermiticity_error() > tol:
            out.append(f"not Hermitian (max deviation {self.hermiticity_error():.3e})")
        if abs(self.trace() - 1.0) > tol:
            out.append(f"trace is {self.trace():.12g}")
        if self.min_eigenvalue() < -tol:
            out.append(f"negative eigenvalue {self.min_eigenvalue():.3e}")
        return out

    def check(self, tol: float = DEFAULT_TOL) -> None:
        problems = self.violations(tol)
        if problems:
            raise DimensionError("invalid density operator: " + "; ".join(problems))

    def expectation(self, op: np.ndarray) -> complex:
        return complex(np.trace(op @ self.matrix))

    def fidelity_with(self, psi: StateVector) -> float:
        """<psi|rho|psi> for a pure reference state."""
        v = psi.amplitudes
        return float(np.real(v.conj() @ self.matrix @ v))


def fock_annihilation(dim: int) -> np.ndarray:
    """Truncated bosonic lowering operator with ``a[n-1, n] = sqrt(n)``.

    The truncation breaks ``[a, a^dag] = I`` in the top level only, where
    the commutator evaluates to ``1 - dim``.
    """
    if dim < 2:
        raise DimensionError(f"Fock truncation must be >= 2, got {dim}")
    return np.diag(np.sqrt(np.arange(1, dim)), k=1).astype(complex)


def tensor(ops: Sequence[np.ndarray]) -> np.ndarray:
    """Kronecker product of square operators, first operand most significant."""
    if len(ops) == 0:
        raise ShapeError("tensor of an empty operand list")
    mats = []
    for op in ops:
        m = np.asarray(op)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"tensor operands must be square, got shape {m.shape}")
        mats.append(m)
    return reduce(np.kron, mats)


def embed(op: np.ndarray, factor: int, space: HilbertSpace) -> np.ndarray:
    """Lift a single-factor operator to the full space (identity elsewhere)."""
    if not 0 <= factor < len(space):
        raise SubsystemIndexError(f"factor {factor} out of range for {space.dims}")
    ops = [np.eye(d, dtype=complex) for d in space.dims]
    if np.shape(op) != (space.dims[factor],) * 2:
        raise ShapeError(f"operator shape {np.shape(op)} does not match factor dim {space.dims[factor]}")
    ops[factor] = np.asarray(op, dtype=complex)
    return tensor(ops)


def basis_state(space: HilbertSpace, indices: Sequence[int]) -> StateVector:
    """Product basis vector |i0, i1, ...> in the given space."""
    if len(indices) != len(space):
        raise SubsystemIndexError("one index per factor is required")
    amps = np.zeros(space.dim, dtype=complex)
    amps[np.ravel_multi_index(tuple(indices), space.dims)] = 1.0
    return StateVector(space, amps)


def partial_trace(rho: DensityOperator, keep: Sequence[int]) -> DensityOperator:
    keep = list(keep)
    n = len(rho.space)
    if not keep:
        raise SubsystemIndexError("keep set is empty")
    if any(not 0 <= i < n for i in keep) or len(set(keep)) != len(keep):
        raise SubsystemIndexError(f"invalid keep set {keep} for {n} factors")
    keep = sorted(keep)
    dims = rho.space.dims
    t = rho.matrix.reshape(dims + dims)
    # trace out from the highest index so remaining axis positions stay valid
    for i in sorted(set(range(n)) - set(keep), reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=i, axis2=i + m)
    sub = rho.space.subspace(keep)
    return DensityOperator(sub, t.reshape(sub.dim, sub.dim))


def factor_projectors(space: HilbertSpace, factor: int) -> list[np.ndarray]:
    """Rank-one projectors onto each basis level of one factor, on the full space."""
    d = space.dims[factor]
    out = []
    for level in range(d):
        p = np.zeros((d, d), dtype=complex)
        p[level, level] = 1.0
        out.append(embed(p, factor, space))
    return out


@dataclass(frozen=True)
class MeasurementBranch:
    probability: float
    state: DensityOperator | None

    @property
    def realizable(self) -> bool:
        return self.state is not None


def project_measure(state: DensityOperator, projectors: Sequence[np.ndarray],
                    tol: float = DEFAULT_TOL,
                    floor: float = PROBABILITY_FLOOR) -> list[MeasurementBranch]:
    """Projective measurement.

    Returns one branch per projector.  Outcomes whose probability is below
    ``floor`` carry ``state=None`` (unrealizable).
    """
    n = state.space.dim
    total = np.zeros((n, n), dtype=complex)
    for p in projectors:
        if np.shape(p) != (n, n):
            raise ShapeError(f"projector shape {np.shape(p)} does not match state dim {n}")
        total = total + p
    if np.max(np.abs(total - np.eye(n))) > tol:
        raise CompletenessError("projectors do not sum to the identity")
    for i, p in enumerate(projectors):
        for q in projectors[i + 1:]:
            if np.max(np.abs(p @ q)) > tol:
                raise CompletenessError("projectors are not mutually orthogonal")

    branches = []
    for p in projectors:
        prob = float(np.real(np.trace(p @ state.matrix)))
        prob = min(max(prob, 0.0), 1.0)
        if prob < floor:
            branches.append(MeasurementBranch(prob, None))
            continue
        cond = p @ state.matrix @ p / prob
        branches.append(MeasurementBranch(prob, DensityOperator(state.space, cond)))
    return branches


# Pade(13) scaling and squaring, Higham (2005) coefficients.
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0,
           960960.0, 16380.0, 182.0, 1.0)
_THETA13 = 5.371920351148152


def expm(a: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a [13/13] Pade kernel."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ShapeError(f"expm needs a square matrix, got {a.shape}")
    norm = np.linalg.norm(a, 1)
    s = 0
    if norm > _THETA13:
        s = int(math.ceil(math.log2(norm / _THETA13)))
    a = a / 2.0 ** s
    b = _PADE13
    ident = np.eye(a.shape[0], dtype=complex)
    a2 = a @ a
    a4 = a2 @ a2
    a6 = a4 @ a2
    u = a @ (a6 @ (b[13] * a6 + b[11] * a4 + b[9] * a2)
             + b[7] * a6 + b[5] * a4 + b[3] * a2 + b[1] * ident)
    v = (a6 @ (b[12] * a6 + b[10] * a4 + b[8] * a2)
         + b[6] * a6 + b[4] * a4 + b[2] * a2 + b[0] * ident)
    r = np.linalg.solve(v - u, v + u)
    for _ in range(s):
        r = r @ r
    return r
