"""Closed-form outcome statistics of the eraser, in scalar arithmetic only.

Nothing here touches matrices, so these functions are an independent check
on the gate-level simulator in :mod:`eraser_sim.protocol`.
"""
from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .lindblad import SystemParams, f_coeff, l_coeff
from .protocol import JointProbabilities, Scheme

SQRT2 = math.sqrt(2.0)


class Branch(enum.Enum):
    PLUS = "e"   # first atom found in e
    MINUS = "g"  # first atom found in g


@dataclass(frozen=True)
class BranchAmplitudes:
    zeta: complex  # amplitude on |1_A 0_B>
    eta: complex   # amplitude on |0_A 1_B>
    branch: Branch

    @property
    def vacuum(self) -> float:
        return max(0.0, 1.0 - abs(self.zeta) ** 2 - abs(self.eta) ** 2)


def _check_tau(tau):
    if np.any(np.asarray(tau) < 0):
        raise DomainError(f"tau must be >= 0, got {tau}")


def branch_amplitudes(phi1: float, params: SystemParams, tau: float, branch: Branch) -> BranchAmplitudes:
    _check_tau(tau)
    f, l = f_coeff(params, tau), l_coeff(params, tau)
    ph = cmath.exp(1j * phi1)
    if branch is Branch.PLUS:
        return BranchAmplitudes((ph * f + l) / SQRT2, (f + ph * l) / SQRT2, branch)
    return BranchAmplitudes((-ph * f + l) / SQRT2, (f - ph * l) / SQRT2, branch)


def envelope(k, k_c, tau, scheme: Scheme):
    """Fringe envelope exp(-2(k -/+ k_c) tau); accepts arrays."""
    sign = -1.0 if scheme is Scheme.ANTISYMMETRIC_ABSORBER else 1.0
    return np.exp(-2.0 * (np.asarray(k) + sign * np.asarray(k_c)) * np.asarray(tau))


def scheme_probabilities(phi1, k, k_c, tau, scheme: Scheme):
    """(P_ee, P_eg, P_ge, P_gg) as arrays, without parameter validation."""
    c = np.cos(phi1)
    env = envelope(k, k_c, tau, scheme)
    if scheme is Scheme.ANTISYMMETRIC_ABSORBER:
        p_ee, p_ge = 0.25 * (1 - c) * env, 0.25 * (1 + c) * env
    else:
        p_ee, p_ge = 0.25 * (1 + c) * env, 0.25 * (1 - c) * env
    return p_ee, 0.5 - p_ee, p_ge, 0.5 - p_ge


def _as_joint(values) -> JointProbabilities:
    return JointProbabilities(*(float(v) for v in values))


def probabilities_scheme1(phi1: float, params: SystemParams, tau: float) -> JointProbabilities:
    """Antisymmetric-mode absorber."""
    _check_tau(tau)
    return _as_joint(scheme_probabilities(phi1, params.k, params.k_c, tau,
                                          Scheme.ANTISYMMETRIC_ABSORBER))


def probabilities_scheme2(phi1: float, params: SystemParams, tau: float) -> JointProbabilities:
    """Symmetric-mode absorber."""
    _check_tau(tau)
    return _as_joint(scheme_probabilities(phi1, params.k, params.k_c, tau,
                                          Scheme.SYMMETRIC_ABSORBER))


def probabilities(phi1: float, params: SystemParams, tau: float, scheme: Scheme) -> JointProbabilities:
    if Scheme(scheme) is Scheme.ANTISYMMETRIC_ABSORBER:
        return probabilities_scheme1(phi1, params, tau)
    return probabilities_scheme2(phi1, params, tau)


def probabilities_from_amplitudes(phi1: float, params: SystemParams, tau: float,
                                  scheme: Scheme) -> JointProbabilities:
    """Same statistics routed through zeta/eta and the absorber algebra.

    The antisymmetric absorber leaves atom 2 in e with amplitude
    (zeta - eta)/sqrt(2); the symmetric one with (zeta + eta)/sqrt(2).
    """
    sign = -1 if Scheme(scheme) is Scheme.ANTISYMMETRIC_ABSORBER else 1
    out = []
    for br in (Branch.PLUS, Branch.MINUS):
        amp = branch_amplitudes(phi1, params, tau, br)
        p_e2 = abs(amp.zeta + sign * amp.eta) ** 2 / 2
        out += [0.5 * p_e2, 0.5 * (1 - p_e2)]
    return _as_joint(out)


def xi_closed_form(phi1, k, k_c, tau):
    """exp(-2(k-k_c)tau) (1 - exp(-4 k_c tau)) cos(phi1); accepts arrays."""
    tau = np.asarray(tau)
    return np.exp(-2 * (k - k_c) * tau) * (1 - np.exp(-4 * k_c * tau)) * np.cos(phi1)


def xi(phi1: float, params: SystemParams, tau: float) -> float:
    _check_tau(tau)
    return float(xi_closed_form(phi1, params.k, params.k_c, tau))


def xi_signed_sum(p: JointProbabilities, p_prime: JointProbabilities) -> float:
    """P_ge - P_gg - P_ee + P_eg summed over both schemes."""
    return ((p.p_ge - p.p_gg - p.p_ee + p.p_eg)
            + (p_prime.p_ge - p_prime.p_gg - p_prime.p_ee + p_prime.p_eg))


def xi_from_probabilities(phi1: float, params: SystemParams, tau: float) -> float:
    return xi_signed_sum(probabilities_scheme1(phi1, params, tau),
                         probabilities_scheme2(phi1, params, tau))
