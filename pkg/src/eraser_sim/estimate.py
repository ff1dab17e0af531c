"""Finite-shot measurement records and estimation of the cross decay rate.

Sampling uses NumPy's ``Generator`` with the PCG64 bit generator and
``Generator.multinomial``.  A record is bit-reproducible from its ``seed``
within one NumPy release series; per-cell seeds are derived from a master
seed with ``SeedSequence([master, cell_index])``.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError, PairingError, UnidentifiableError
from .oracle import scheme_probabilities, xi_closed_form
from .protocol import JointProbabilities, Scheme

OUTCOMES = JointProbabilities.OUTCOMES
# weights of each outcome in the xi statistic
XI_WEIGHTS = {"ee": -1.0, "eg": 1.0, "ge": 1.0, "gg": -1.0}

GRID_POINTS = 64
GOLDEN_RTOL = 1e-6
COS_PHI1_FLOOR = 1e-9
STDERR_FLOOR = 1e-12


class Method(enum.Enum):
    XI_FIT = "xi_fit"
    JOINT_LSQ = "joint_lsq"


@dataclass(frozen=True)
class ExperimentRecord:
    scheme: Scheme
    phi1: float
    tau: float
    shots: int
    counts: dict
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme(self.scheme))
        if self.shots < 1:
            raise DomainError(f"shots must be >= 1, got {self.shots}")
        if set(self.counts) != set(OUTCOMES):
            raise DomainError(f"counts must have keys {OUTCOMES}, got {sorted(self.counts)}")
        total = sum(self.counts.values())
        if abs(total - self.shots) > 1e-9 * self.shots:
            raise DomainError(f"counts sum to {total}, expected {self.shots}")

    def frequencies(self) -> dict[str, float]:
        return {o: self.counts[o] / self.shots for o in OUTCOMES}

    def to_dict(self) -> dict:
        return {"scheme": self.scheme.value, "phi1": self.phi1, "tau": self.tau,
                "shots": self.shots, "counts": {o: self.counts[o] for o in OUTCOMES},
                "seed": self.seed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentRecord":
        return cls(scheme=Scheme(d["scheme"]), phi1=float(d["phi1"]), tau=float(d["tau"]),
                   shots=int(d["shots"]), counts=dict(d["counts"]), seed=d.get("seed"))

    @classmethod
    def from_json(cls, line: str) -> "ExperimentRecord":
        return cls.from_dict(json.loads(line))


@dataclass(frozen=True)
class EstimationResult:
    kc_hat: float
    stderr: float
    method: Method
    residual: float
    n_records: int
    at_boundary: bool = False
    k_hat: float | None = None
    extra: dict = field(default_factory=dict)
    box_upper: float | None = None

    @property
    def boundary_in_interval(self) -> bool:
        """True when kc_hat +/- 3*stderr reaches k_c = 0 or k_c = k."""
        upper = self.box_upper if self.box_upper is not None else self.k_hat
        if self.kc_hat - 3 * self.stderr <= 0:
            return True
        return upper is not None and self.kc_hat + 3 * self.stderr >= upper

    def to_dict(self) -> dict:
        out = {"kc_hat": self.kc_hat, "stderr": self.stderr, "method": self.method.value,
               "residual": self.residual, "n_records": self.n_records,
               "at_boundary": self.at_boundary,
               "boundary_in_interval": self.boundary_in_interval}
        if self.k_hat is not None:
            out["k_hat"] = self.k_hat
        out.update(self.extra)
        return out


def cell_seed(master_seed: int, cell_index: int) -> int:
    """Independent 32-bit seed for one grid cell."""
    return int(np.random.SeedSequence([master_seed, cell_index]).generate_state(1)[0])


def _checked_probabilities(probs: JointProbabilities) -> np.ndarray:
    p = np.array(probs.as_tuple(), dtype=float)
    if np.any(~np.isfinite(p)) or np.any(p < -1e-12) or abs(p.sum() - 1) > 1e-9:
        raise DomainError(f"invalid outcome probabilities {p}")
    p = np.clip(p, 0.0, None)
    return p / p.sum()


def sample_record(probs: JointProbabilities, shots: int, seed: int, *,
                  scheme: Scheme = Scheme.ANTISYMMETRIC_ABSORBER,
                  phi1: float = 0.0, tau: float = 0.0) -> ExperimentRecord:
    if shots < 1:
        raise DomainError(f"shots must be >= 1, got {shots}")
    p = _checked_probabilities(probs)
    rng = np.random.Generator(np.random.PCG64(seed))
    counts = rng.multinomial(shots, p)
    return ExperimentRecord(scheme, phi1, tau, int(shots),
                            {o: int(c) for o, c in zip(OUTCOMES, counts)}, seed)


def exact_record(probs: JointProbabilities, shots: int, *,
                 scheme: Scheme = Scheme.ANTISYMMETRIC_ABSORBER,
                 phi1: float = 0.0, tau: float = 0.0) -> ExperimentRecord:
    """Noiseless record: counts are the expected (fractional) values."""
    p = _checked_probabilities(probs)
    return ExperimentRecord(scheme, phi1, tau, int(shots),
                            {o: float(c) * shots for o, c in zip(OUTCOMES, p)}, None)


def xi_statistic(rec1: ExperimentRecord, rec2: ExperimentRecord) -> tuple[float, float]:
    """Plug-in estimate of xi and its standard error.

    Per record the signed frequency m = sum_o w_o n_o / N has variance
    (1 - m^2) / N under multinomial sampling (every w_o is +/-1); the two
    records are independent so the variances add.
    """
    if rec1.scheme is not Scheme.ANTISYMMETRIC_ABSORBER or rec2.scheme is not Scheme.SYMMETRIC_ABSORBER:
        raise PairingError("xi needs an (antisymmetric, symmetric) record pair")
    if not (math.isclose(rec1.phi1, rec2.phi1, abs_tol=1e-12)
            and math.isclose(rec1.tau, rec2.tau, abs_tol=1e-12)):
        raise PairingError(f"records disagree on (phi1, tau): "
                           f"({rec1.phi1}, {rec1.tau}) vs ({rec2.phi1}, {rec2.tau})")
    xi_hat, var = 0.0, 0.0
    for rec in (rec1, rec2):
        freq = rec.frequencies()
        m = sum(XI_WEIGHTS[o] * freq[o] for o in OUTCOMES)
        xi_hat += m
        var += max(0.0, 1.0 - m * m) / rec.shots
    return xi_hat, math.sqrt(var)


def golden_section(fun: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    invphi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    # bracket ends are admissible minimizers too
    cands = [(fun(x), x) for x in (lo, hi, 0.5 * (a + b))]
    return min(cands)[1]


def _pair_arrays(pairs: Sequence[tuple[ExperimentRecord, ExperimentRecord]]):
    taus, xis, ses = [], [], []
    phis = set()
    for r1, r2 in pairs:
        x, s = xi_statistic(r1, r2)
        taus.append(r1.tau)
        xis.append(x)
        ses.append(max(s, STDERR_FLOOR))
        phis.add(round(r1.phi1, 12))
    return np.array(taus), np.array(xis), np.array(ses), phis


def _check_design(taus: np.ndarray, phi1: float):
    if np.all(taus == 0):
        raise UnidentifiableError("all tau values are zero; xi vanishes identically")
    if len(set(np.round(taus, 12))) < 3:
        raise UnidentifiableError("at least three distinct tau values are required")
    if abs(math.cos(phi1)) < COS_PHI1_FLOOR:
        raise UnidentifiableError("cos(phi1) = 0 makes xi identically zero")


def fit_kc(pairs: Sequence[tuple[ExperimentRecord, ExperimentRecord]], k_known: float,
           phi1: float) -> EstimationResult:
    """Weighted least-squares fit of k_c to the measured xi over a tau sweep.

    A 64-point grid over [0, k_known] brackets the minimum, golden-section
    search refines it to 1e-6*k_known, and the standard error comes from the
    curvature of chi^2 at the optimum: stderr = sqrt(2 / chi2'').
    ``residual`` is chi^2 per degree of freedom.
    """
    if not k_known > 0:
        raise DomainError(f"k_known must be > 0, got {k_known}")
    taus, xis, ses, phis = _pair_arrays(pairs)
    if len(phis) > 1 or not math.isclose(next(iter(phis), phi1), phi1, abs_tol=1e-9):
        raise PairingError("all records must share the fitted phi1")
    _check_design(taus, phi1)

    def chi2(kc):
        return float(np.sum(((xis - xi_closed_form(phi1, k_known, kc, taus)) / ses) ** 2))

    grid = np.linspace(0.0, k_known, GRID_POINTS)
    vals = [chi2(x) for x in grid]
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS - 1)]
    kc_hat = golden_section(chi2, lo, hi, GOLDEN_RTOL * k_known)

    h = 1e-3 * k_known
    curv = (chi2(kc_hat + h) - 2 * chi2(kc_hat) + chi2(kc_hat - h)) / h ** 2
    stderr = math.sqrt(2.0 / curv) if curv > 0 else math.inf
    edge = 2 * GOLDEN_RTOL * k_known
    at_boundary = bool(kc_hat <= edge or kc_hat >= k_known - edge)
    dof = max(len(taus) - 1, 1)
    return EstimationResult(float(kc_hat), float(stderr), Method.XI_FIT, chi2(kc_hat) / dof,
                            len(taus), at_boundary, box_upper=float(k_known))


def fit_joint(records: Iterable[ExperimentRecord], k_init: float = 1.0) -> EstimationResult:
    """Fit (k, k_c) jointly to all outcome frequencies of both schemes.

    Pearson-weighted least squares with k_c = k * r, r in [0, 1].
    """
    from scipy.optimize import least_squares

    records = list(records)
    if not records:
        raise UnidentifiableError("no records")
    taus = np.array([r.tau for r in records])
    if len(set(np.round(taus, 12))) < 3:
        raise UnidentifiableError("at least three distinct tau values are required")
    phis = np.array([r.phi1 for r in records])
    shots = np.array([r.shots for r in records], dtype=float)
    schemes = [r.scheme for r in records]
    freqs = np.array([[r.frequencies()[o] for o in OUTCOMES] for r in records])

    def model(theta):
        k, ratio = theta
        out = np.empty_like(freqs)
        for s in Scheme:
            mask = np.array([sc is s for sc in schemes])
            if mask.any():
                out[mask] = np.column_stack(scheme_probabilities(phis[mask], k, k * ratio, taus[mask], s))
        return out

    def resid(theta):
        p = model(theta)
        var = np.clip(p * (1 - p), 1.0 / shots[:, None] ** 2, None) / shots[:, None]
        return ((freqs - p) / np.sqrt(var)).ravel()

    sol = least_squares(resid, x0=[k_init, 0.5], bounds=([0.0, 0.0], [np.inf, 1.0]),
                        x_scale=[max(k_init, 1e-3), 1.0])
    k_hat, ratio = sol.x
    jac = sol.jac
    try:
        cov = np.linalg.inv(jac.T @ jac)
        grad = np.array([ratio, k_hat])  # d(k*r)/d(k, r)
        stderr = float(math.sqrt(max(grad @ cov @ grad, 0.0)))
        k_se = float(math.sqrt(max(cov[0, 0], 0.0)))
    except np.linalg.LinAlgError:
        stderr, k_se = math.inf, math.inf
    dof = max(sol.fun.size - 2, 1)
    at_boundary = ratio <= 1e-6 or ratio >= 1 - 1e-6
    return EstimationResult(float(k_hat * ratio), stderr, Method.JOINT_LSQ,
                            float(np.sum(sol.fun ** 2) / dof), len(records), bool(at_boundary),
                            k_hat=float(k_hat), extra={"k_stderr": k_se})


ProbabilitySource = Callable[[float, float, float, float, Scheme], JointProbabilities]


def oracle_source(phi1, k, k_c, tau, scheme) -> JointProbabilities:
    return JointProbabilities(*(float(v) for v in scheme_probabilities(phi1, k, k_c, tau, scheme)))


def cell_probabilities(phi1: float, k: float, k_c: float, taus: Sequence[float],
                       source: ProbabilitySource = oracle_source):
    """[(anti, sym)] probability pairs for each tau."""
    return [(source(phi1, k, k_c, t, Scheme.ANTISYMMETRIC_ABSORBER),
             source(phi1, k, k_c, t, Scheme.SYMMETRIC_ABSORBER)) for t in taus]


def sample_pairs(cell_probs, phi1: float, taus: Sequence[float], shots: int,
                 master_seed: int) -> list[tuple[ExperimentRecord, ExperimentRecord]]:
    """Sample one record per (tau, scheme) cell; cell index = 2*i + scheme offset."""
    pairs = []
    for i, (tau, (p1, p2)) in enumerate(zip(taus, cell_probs)):
        r1 = sample_record(p1, shots, cell_seed(master_seed, 2 * i),
                           scheme=Scheme.ANTISYMMETRIC_ABSORBER, phi1=phi1, tau=tau)
        r2 = sample_record(p2, shots, cell_seed(master_seed, 2 * i + 1),
                           scheme=Scheme.SYMMETRIC_ABSORBER, phi1=phi1, tau=tau)
        pairs.append((r1, r2))
    return pairs


def exact_pairs(cell_probs, phi1: float, taus: Sequence[float], shots: int):
    return [(exact_record(p1, shots, scheme=Scheme.ANTISYMMETRIC_ABSORBER, phi1=phi1, tau=t),
             exact_record(p2, shots, scheme=Scheme.SYMMETRIC_ABSORBER, phi1=phi1, tau=t))
            for t, (p1, p2) in zip(taus, cell_probs)]


def default_tau_grid(k: float = 1.0, n: int = 8) -> list[float]:
    """tau = 0.1/k, 0.2/k, ... (n points)."""
    return [round(0.1 * (i + 1), 12) / k for i in range(n)]


def calibration_study(k: float, k_c: float, phi1: float, taus: Sequence[float], shots: int,
                      replications: int, master_seed: int = 0,
                      source: ProbabilitySource = oracle_source) -> list[EstimationResult]:
    """Repeat sample -> fit; replication r draws from cell_seed(master_seed, 10_000_000 + r)."""
    probs = cell_probabilities(phi1, k, k_c, taus, source)
    out = []
    for r in range(replications):
        seed = cell_seed(master_seed, 10_000_000 + r)
        out.append(fit_kc(sample_pairs(probs, phi1, taus, shots, seed), k, phi1))
    return out
