"""Gate-level simulation of the two-cavity eraser sequence.

Registers
---------
* first atom: ``atom(i, e, f, g) x mode A x mode B``
* second atom: ``atom(e, g) x mode A x mode B``, reduced to ``atom x mode B``
  once mode A has been emptied.

Pulse convention
----------------
A pulse on an ordered level pair ``(upper, lower)`` acts on each doublet
``{|upper, n>, |lower, n+1>}`` of the target mode (or on ``{upper, lower}``
for a classical field) as::

    [[cos(x),                -1j*exp(1j*phase)*sin(x)],
     [-1j*exp(-1j*phase)*sin(x), cos(x)              ]]

with ``x = area*sqrt(n+1)/2``.  Cavity pulses use ``phase = -pi/2`` so that
the rotation is real.  With these phases the state before the second Ramsey
zone is exactly ``(|g 0 1> + e^{i phi1}|e 1 0>)/sqrt(2)``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError, SequencingError
from .lindblad import SystemParams, build_liouvillian, propagate_expm
from .qcore import (DEFAULT_TOL, DensityOperator, HilbertSpace, StateVector, basis_state,
                    embed, factor_projectors, partial_trace, project_measure)

TWO_PI = 2 * math.pi

ATOM1_LEVELS = ("i", "e", "f", "g")
ATOM2_LEVELS = ("e", "g")

CAVITY_PHASE = -math.pi / 2
RAMSEY_FG_PHASE = -math.pi / 2
RAMSEY_EG_PHASE = math.pi / 2
# Level phase on g completing the second Ramsey zone; invisible to the
# subsequent e/g measurement.
RAMSEY_EG_FRAME_PHASE = math.pi

MODE_A_VACUUM_TOL = 1e-10

State = Union[StateVector, DensityOperator]


class Scheme(enum.Enum):
    ANTISYMMETRIC_ABSORBER = "anti"
    SYMMETRIC_ABSORBER = "sym"

    @property
    def cavity_a_area(self) -> float:
        return 3 * math.pi if self is Scheme.ANTISYMMETRIC_ABSORBER else math.pi


class Target(enum.Enum):
    MODE_A = 1
    MODE_B = 2
    CLASSICAL = 0


@dataclass(frozen=True)
class PulseSpec:
    transition: tuple[str, str]
    target: Target
    area: float
    phase: float = 0.0

    def __post_init__(self):
        if len(self.transition) != 2 or self.transition[0] == self.transition[1]:
            raise ConfigError(f"a transition needs two distinct levels, got {self.transition}")
        if not math.isfinite(self.area) or self.area < 0:
            raise ConfigError(f"pulse area must be finite and >= 0, got {self.area}")
        if set(self.transition) == {"e", "f"}:
            raise ConfigError("the e <-> f transition is forbidden")


@dataclass(frozen=True)
class AtomState:
    """Internal state of a single atom as level -> amplitude."""
    amplitudes: dict
    levels: tuple[str, ...] = ATOM1_LEVELS

    def __post_init__(self):
        unknown = set(self.amplitudes) - set(self.levels)
        if unknown:
            raise ConfigError(f"unknown levels {sorted(unknown)}")
        norm = sum(abs(a) ** 2 for a in self.amplitudes.values())
        if abs(norm - 1) > DEFAULT_TOL:
            raise DomainError(f"atomic state is not normalized (norm^2 = {norm})")

    def vector(self) -> np.ndarray:
        return np.array([self.amplitudes.get(lv, 0.0) for lv in self.levels], dtype=complex)


@dataclass(frozen=True)
class ProtocolConfig:
    phi1: float = 0.0
    phi2: float = 0.0
    tau: float = 0.0
    scheme: Scheme = Scheme.ANTISYMMETRIC_ABSORBER
    params: SystemParams = SystemParams()

    def __post_init__(self):
        if not math.isfinite(self.tau) or self.tau < 0:
            raise DomainError(f"bath interval tau must be >= 0, got {self.tau}")
        for name in ("phi1", "phi2"):
            val = getattr(self, name)
            if not math.isfinite(val):
                raise DomainError(f"{name} must be finite")
            object.__setattr__(self, name, math.fmod(val, TWO_PI) % TWO_PI)
        if not isinstance(self.scheme, Scheme):
            object.__setattr__(self, "scheme", Scheme(self.scheme))


@dataclass(frozen=True)
class JointProbabilities:
    p_ee: float
    p_eg: float
    p_ge: float
    p_gg: float

    OUTCOMES = ("ee", "eg", "ge", "gg")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.p_ee, self.p_eg, self.p_ge, self.p_gg)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.OUTCOMES, self.as_tuple()))

    def max_abs_diff(self, other: "JointProbabilities") -> float:
        return max(abs(x - y) for x, y in zip(self.as_tuple(), other.as_tuple()))

    def violations(self, tol: float = DEFAULT_TOL) -> list[str]:
        out = []
        for name, p in self.as_dict().items():
            if not -tol <= p <= 1 + tol:
                out.append(f"P_{name}={p} outside [0, 1]")
        if abs(sum(self.as_tuple()) - 1) > tol:
            out.append(f"probabilities sum to {sum(self.as_tuple())}")
        if abs(self.p_ee + self.p_eg - 0.5) > tol:
            out.append("first-atom marginal P(e) != 1/2")
        if abs(self.p_ge + self.p_gg - 0.5) > tol:
            out.append("first-atom marginal P(g) != 1/2")
        return out


@dataclass(frozen=True)
class AtomBranch:
    outcome: str
    probability: float
    field: DensityOperator | None


def _levels_for(space: HilbertSpace) -> tuple[str, ...]:
    if space.dims[0] == len(ATOM1_LEVELS):
        return ATOM1_LEVELS
    if space.dims[0] == len(ATOM2_LEVELS):
        return ATOM2_LEVELS
    raise ConfigError(f"no atomic level set of size {space.dims[0]}")


def _rotation(area: float, phase: float, photons: int = 0) -> np.ndarray:
    x = area * math.sqrt(photons + 1) / 2
    c, s = math.cos(x), math.sin(x)
    return np.array([[c, -1j * np.exp(1j * phase) * s],
                     [-1j * np.exp(-1j * phase) * s, c]])


def pulse_unitary(space: HilbertSpace, spec: PulseSpec) -> np.ndarray:
    """Unitary of an ideal resonant pulse on ``atom x modes...``."""
    levels = _levels_for(space)
    try:
        up, lo = (levels.index(lv) for lv in spec.transition)
    except ValueError:
        raise ConfigError(f"transition {spec.transition} not available on levels {levels}") from None

    if spec.target is Target.CLASSICAL:
        u_atom = np.eye(len(levels), dtype=complex)
        r = _rotation(spec.area, spec.phase)
        u_atom[np.ix_([up, lo], [up, lo])] = r
        return embed(u_atom, 0, space)

    mode = spec.target.value
    if mode >= len(space):
        raise ConfigError(f"register {space.dims} has no factor for {spec.target.name}")
    d = space.dims[mode]
    u = np.eye(space.dim, dtype=complex)
    other = [range(n) for n in space.dims]
    other[0] = [0]
    other[mode] = [0]
    # iterate over spectator-mode occupations
    for idx in np.ndindex(*[len(r) for r in other]):
        for n in range(d - 1):
            i_up = list(idx)
            i_up[0], i_up[mode] = up, n
            i_lo = list(idx)
            i_lo[0], i_lo[mode] = lo, n + 1
            a = np.ravel_multi_index(tuple(i_up), space.dims)
            b = np.ravel_multi_index(tuple(i_lo), space.dims)
            u[np.ix_([a, b], [a, b])] = _rotation(spec.area, spec.phase, n)
    return u


def _apply(state: State, u: np.ndarray) -> State:
    if isinstance(state, StateVector):
        return StateVector(state.space, u @ state.amplitudes)
    return DensityOperator(state.space, u @ state.matrix @ u.conj().T)


def jc_pulse(state: State, spec: PulseSpec) -> State:
    """Resonant atom-cavity pulse of the given area."""
    if spec.target is Target.CLASSICAL:
        raise ConfigError("jc_pulse needs a cavity mode target")
    return _apply(state, pulse_unitary(state.space, spec))


def ramsey_pulse(state: State, spec: PulseSpec) -> State:
    """Classical-field rotation on the atomic factor only."""
    if spec.target is not Target.CLASSICAL:
        raise ConfigError("ramsey_pulse needs target=CLASSICAL")
    return _apply(state, pulse_unitary(state.space, spec))


def atomic_phase(state: State, level: str, angle: float) -> State:
    """Multiply the amplitude of one atomic level by exp(1j*angle)."""
    levels = _levels_for(state.space)
    diag = np.ones(len(levels), dtype=complex)
    diag[levels.index(level)] = np.exp(1j * angle)
    return _apply(state, embed(np.diag(diag), 0, state.space))


def first_atom_space(params: SystemParams) -> HilbertSpace:
    return HilbertSpace((len(ATOM1_LEVELS), params.mode_dim, params.mode_dim))


def prepare_checkpoint(config: ProtocolConfig) -> StateVector:
    """First atom sequence up to (not including) the e <-> g Ramsey zone."""
    space = first_atom_space(config.params)
    psi = basis_state(space, (ATOM1_LEVELS.index("i"), 0, 0))
    psi = jc_pulse(psi, PulseSpec(("i", "e"), Target.MODE_A, math.pi / 2, CAVITY_PHASE))
    psi = jc_pulse(psi, PulseSpec(("i", "f"), Target.MODE_B, math.pi, CAVITY_PHASE))
    psi = ramsey_pulse(psi, PulseSpec(("f", "g"), Target.CLASSICAL, math.pi, RAMSEY_FG_PHASE))
    return atomic_phase(psi, "e", config.phi1)


def run_first_atom(config: ProtocolConfig) -> DensityOperator:
    psi = prepare_checkpoint(config)
    psi = ramsey_pulse(psi, PulseSpec(("e", "g"), Target.CLASSICAL, math.pi / 2, RAMSEY_EG_PHASE))
    psi = atomic_phase(psi, "g", RAMSEY_EG_FRAME_PHASE)
    return psi.to_density()


def measure_atom1(state: DensityOperator) -> tuple[AtomBranch, AtomBranch]:
    """Measure the first atom in {e, g}; returns the (e, g) branches with the field reduced."""
    levels = _levels_for(state.space)
    projs = factor_projectors(state.space, 0)
    branches = project_measure(state, projs)
    out = {}
    for lv, br in zip(levels, branches):
        field = partial_trace(br.state, (1, 2)) if br.realizable else None
        out[lv] = AtomBranch(lv, br.probability, field)
    leak = sum(out[lv].probability for lv in levels if lv not in ("e", "g"))
    if leak > DEFAULT_TOL:
        raise SequencingError(f"first atom left in i/f with probability {leak:.3e}")
    return out["e"], out["g"]


def bath_interval(field: DensityOperator, params: SystemParams, tau: float) -> DensityOperator:
    return propagate_expm(build_liouvillian(params), field, tau)


def run_absorber(field: DensityOperator, config: ProtocolConfig) -> DensityOperator:
    """Second atom (starting in g) absorbs one normal mode; returns the atom x mode B state."""
    d = config.params.mode_dim
    space = HilbertSpace((len(ATOM2_LEVELS), d, d))
    g = np.zeros((2, 2), dtype=complex)
    g[ATOM2_LEVELS.index("g"), ATOM2_LEVELS.index("g")] = 1.0
    rho = DensityOperator(space, np.kron(g, field.matrix))

    rho = jc_pulse(rho, PulseSpec(("e", "g"), Target.MODE_A, config.scheme.cavity_a_area, CAVITY_PHASE))
    n_a = embed(np.diag(np.arange(d, dtype=complex)), 1, space)
    residual = float(np.real(rho.expectation(n_a)))
    if residual > MODE_A_VACUUM_TOL:
        raise SequencingError(f"mode A not emptied by the absorber (<n_A> = {residual:.3e})")
    rho = jc_pulse(rho, PulseSpec(("e", "g"), Target.MODE_B, math.pi / 2, CAVITY_PHASE))
    # Stark-shift phase accumulated after the B interaction is switched off
    rho = atomic_phase(rho, "e", -config.phi2)
    return partial_trace(rho, (0, 2))


def atom2_excited_probability(state: DensityOperator) -> float:
    branches = project_measure(state, factor_projectors(state.space, 0))
    return branches[ATOM2_LEVELS.index("e")].probability


def joint_probabilities(config: ProtocolConfig) -> JointProbabilities:
    rho = run_first_atom(config)
    out = {}
    for branch in measure_atom1(rho):
        if branch.field is None:
            out[branch.outcome + "e"] = out[branch.outcome + "g"] = 0.0
            continue
        field = bath_interval(branch.field, config.params, config.tau)
        p_e2 = atom2_excited_probability(run_absorber(field, config))
        out[branch.outcome + "e"] = branch.probability * p_e2
        out[branch.outcome + "g"] = branch.probability * (1.0 - p_e2)
    return JointProbabilities(out["ee"], out["eg"], out["ge"], out["gg"])
