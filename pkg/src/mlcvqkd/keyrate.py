"""Secret key rates, asymptotic and finite-size, for four protocols.

The asymptotic rate under collective attack with heterodyne detection and
reverse reconciliation is K = beta * I(A:B) - chi_BE. The mutual
information uses the Gaussian heterodyne formula

    I(A:B) = log2[(V + chi_tot) / (1 + chi_tot)],    V = V_m + 1,

with channel noise chi_line = 1/T - 1 + xi, detection noise
chi_het = [1 + (1 - eta) + 2 v_el] / eta (referred to Bob's input), and
chi_tot = chi_line + chi_het / T. The Holevo bound chi_BE comes from the
symplectic eigenvalues of the Gaussian covariance matrices before and
after Bob's measurement; discrete modulation enters only through the
Alice-Bob correlation Z, which for the four- and eight-state
constellations is the cyclic series

    Z_P = 2 alpha^2 * sum_k l_{k-1}^{3/2} / l_k^{1/2}   (indices mod P)

over the constellation-symmetrized thermal weights l_k, with
alpha^2 = V_m / 2. Gaussian modulation has Z_G = sqrt(V^2 - 1).

The finite-size rate keeps a fraction n/N of the block and subtracts the
privacy-amplification penalty

    Delta(n) = (2 dim_HB + 3) sqrt(log2(2/eps_bar)/n) + (2/n) log2(1/eps_PA)

with dim_HB = 2. The classification-based protocol replaces beta*I with
beta*Lambda*I (Lambda = classifier efficiency) and chi_BE with a pluggable
eavesdropper term that defaults to 0, reflecting private encoding rules
denying the eavesdropper a decoding; setting it to chi_BE recovers the
traditional rate structure for conservative comparisons.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .channel import transmittance_from_distance
from .errors import InvalidParameterError, NumericalDomainError

DIM_HB = 2
_LAMBDA_TOLERANCE = 1e-9


class Protocol(str, Enum):
    GAUSSIAN = "gaussian"
    FOUR_STATE = "four-state"
    EIGHT_STATE = "eight-state"
    ML = "ml"


@dataclass(frozen=True)
class KeyRateParams:
    """Every scalar entering the rate formulas.

    Attributes
    ----------
    vm : float
        Modulation variance V_m > 0; V = V_m + 1.
    transmittance : float
        Channel transmittance T in (0, 1].
    excess_noise : float
        Excess noise xi >= 0, channel input, shot-noise units.
    eta : float
        Heterodyne detector efficiency in (0, 1].
    v_el : float
        Detector electronic noise >= 0.
    beta : float
        Reverse-reconciliation efficiency in (0, 1].
    lam : float
        Classifier efficiency Lambda in (0, 1]; only the ML protocol uses it.
    protocol : Protocol
        Which correlation Z / rate structure to use.
    n, big_n : int or None
        Key-generation length n and block length N for the finite-size
        rate; n <= N. The asymptotic rate ignores them.
    eps_bar, eps_pe, eps_pa : float
        Smoothing, parameter-estimation, and privacy-amplification failure
        probabilities in (0, 1).
    ml_eve_term : float
        Pluggable eavesdropper information for the ML protocol (default 0).
    """

    vm: float
    transmittance: float
    excess_noise: float = 0.01
    eta: float = 0.6
    v_el: float = 0.05
    beta: float = 0.98
    lam: float = 0.927
    protocol: Protocol = Protocol.EIGHT_STATE
    n: int | None = None
    big_n: int | None = None
    eps_bar: float = 1e-10
    eps_pe: float = 1e-10
    eps_pa: float = 1e-10
    ml_eve_term: float = 0.0

    def __post_init__(self):
        if not self.vm > 0:
            raise InvalidParameterError(f"modulation variance must be positive, got {self.vm}")
        if not 0 < self.transmittance <= 1:
            raise InvalidParameterError(f"transmittance must be in (0, 1], got {self.transmittance}")
        if self.excess_noise < 0 or self.v_el < 0:
            raise InvalidParameterError("noise terms must be nonnegative")
        for name, value in (("eta", self.eta), ("beta", self.beta), ("lam", self.lam)):
            if not 0 < value <= 1:
                raise InvalidParameterError(f"{name} must be in (0, 1], got {value}")
        for name, value in (("eps_bar", self.eps_bar), ("eps_pe", self.eps_pe), ("eps_pa", self.eps_pa)):
            if not 0 < value < 1:
                raise InvalidParameterError(f"{name} must be in (0, 1), got {value}")
        if (self.n is None) != (self.big_n is None):
            raise InvalidParameterError("n and big_n must be given together")
        if self.n is not None:
            if self.n <= 0 or self.big_n <= 0 or self.n > self.big_n:
                raise InvalidParameterError(f"need 0 < n <= N, got n={self.n}, N={self.big_n}")

    @property
    def v(self) -> float:
        return self.vm + 1.0

    @property
    def chi_line(self) -> float:
        return 1.0 / self.transmittance - 1.0 + self.excess_noise

    @property
    def chi_het(self) -> float:
        return (1.0 + (1.0 - self.eta) + 2.0 * self.v_el) / self.eta

    @property
    def chi_tot(self) -> float:
        return self.chi_line + self.chi_het / self.transmittance

    @classmethod
    def at_distance(cls, distance_km: float, **kwargs) -> "KeyRateParams":
        return cls(transmittance=transmittance_from_distance(distance_km), **kwargs)


@dataclass(frozen=True)
class RateResult:
    """A key rate with its intermediate quantities."""

    protocol: Protocol
    key_rate: float
    mutual_information: float
    holevo_term: float
    delta_n: float | None = None
    correlation_z: float | None = None
    lambdas: tuple[float, ...] | None = None


def entropy_g(x: float) -> float:
    """G(x) = (x+1) log2(x+1) - x log2(x), continuously extended to G(0) = 0."""
    if x < 0:
        if x > -_LAMBDA_TOLERANCE:
            return 0.0
        raise NumericalDomainError("entropy argument below zero", x=x)
    if x == 0.0:
        return 0.0
    return (x + 1.0) * math.log2(x + 1.0) - x * math.log2(x)


def mutual_information(params: KeyRateParams) -> float:
    """Heterodyne Gaussian mutual information log2[(V+chi_tot)/(1+chi_tot)]."""
    return math.log2((params.v + params.chi_tot) / (1.0 + params.chi_tot))


# below this the closed forms subtract near-equal terms and can return
# negative weights (the smallest true weight falls under the cancellation
# floor), so the equivalent power series takes over
_SERIES_CUTOFF = 2.0


def _weights_series(a2: float, n_states: int) -> list[float]:
    """Weights as Poisson masses summed over residue classes mod n_states.

    l_k = e^-a2 * sum_t a2^(k + n t) / (k + n t)!; every term is positive,
    so small weights keep full relative accuracy where the closed forms
    cancel catastrophically. Sixty terms bound the truncation error below
    1e-60 for a2 <= 2.
    """
    out = [0.0] * n_states
    term = math.exp(-a2)
    out[0] = term
    for t in range(1, 60):
        term *= a2 / t
        out[t % n_states] += term
    return out


def _weights_four(a2: float) -> list[float]:
    if a2 < _SERIES_CUTOFF:
        return _weights_series(a2, 4)
    e = math.exp(-a2)
    return [
        0.5 * e * (math.cosh(a2) + math.cos(a2)),
        0.5 * e * (math.sinh(a2) + math.sin(a2)),
        0.5 * e * (math.cosh(a2) - math.cos(a2)),
        0.5 * e * (math.sinh(a2) - math.sin(a2)),
    ]


def _weights_eight(a2: float) -> list[float]:
    if a2 < _SERIES_CUTOFF:
        return _weights_series(a2, 8)
    e = math.exp(-a2)
    r = a2 / math.sqrt(2.0)
    ch, co, sh, si = math.cosh(a2), math.cos(a2), math.sinh(a2), math.sin(a2)
    chr_, cor, shr, sir = math.cosh(r), math.cos(r), math.sinh(r), math.sin(r)
    root2 = math.sqrt(2.0)
    return [
        0.25 * e * (ch + co + 2.0 * cor * chr_),
        0.25 * e * (sh + si + root2 * (cor * shr + sir * chr_)),
        0.25 * e * (ch - co + 2.0 * sir * shr),
        0.25 * e * (sh - si + root2 * (sir * chr_ - cor * shr)),
        0.25 * e * (ch + co - 2.0 * cor * chr_),
        0.25 * e * (sh + si - root2 * (cor * shr + sir * chr_)),
        0.25 * e * (ch - co - 2.0 * sir * shr),
        0.25 * e * (sh - si - root2 * (sir * chr_ - cor * shr)),
    ]


def covariance_z(protocol: Protocol, vm: float) -> float:
    """Alice-Bob correlation Z for the given protocol at variance vm."""
    if vm < 0:
        raise InvalidParameterError(f"modulation variance must be nonnegative, got {vm}")
    if vm == 0.0:
        return 0.0
    if protocol is Protocol.GAUSSIAN or protocol is Protocol.ML:
        v = vm + 1.0
        return math.sqrt(v * v - 1.0)
    a2 = vm / 2.0
    weights = _weights_four(a2) if protocol is Protocol.FOUR_STATE else _weights_eight(a2)
    if min(weights) <= 0.0:
        raise NumericalDomainError("constellation weight not positive", vm=vm, weights=tuple(weights))
    total = 0.0
    for k, l_k in enumerate(weights):
        l_prev = weights[k - 1]  # k=0 wraps to the last weight
        total += l_prev ** 1.5 / math.sqrt(l_k)
    return 2.0 * a2 * total


def symplectic_eigenvalues(params: KeyRateParams, z: float) -> tuple[float, float, float, float, float]:
    """(lambda_1..lambda_5) of the pre- and post-measurement covariances."""
    v, t = params.v, params.transmittance
    chi_line, chi_het, chi_tot = params.chi_line, params.chi_het, params.chi_tot

    a = v * v + t * t * (v + chi_line) ** 2 - 2.0 * t * z * z
    b = (t * (v * v + v * chi_line - z * z)) ** 2
    lam12 = _eig_pair(a, b, which="lambda_1,2")

    denom = (t * (v + chi_tot)) ** 2
    c = (a * chi_het * chi_het + b + 1.0
         + 2.0 * chi_het * (v * math.sqrt(b) + t * (v + chi_line))
         + 2.0 * t * z * z) / denom
    d = ((v + math.sqrt(b) * chi_het) ** 2) / denom
    lam34 = _eig_pair(c, d, which="lambda_3,4")

    return (*lam12, *lam34, 1.0)


def _eig_pair(s: float, p: float, which: str) -> tuple[float, float]:
    """Eigenvalues from lambda^2 = [s +- sqrt(s^2 - 4p)] / 2."""
    disc = s * s - 4.0 * p
    if disc < 0:
        if disc > -1e-9 * max(s * s, 1.0):
            disc = 0.0
        else:
            raise NumericalDomainError(f"negative discriminant for {which}", s=s, p=p, discriminant=disc)
    root = math.sqrt(disc)
    out = []
    for sign in (+1.0, -1.0):
        sq = (s + sign * root) / 2.0
        if sq < 0:
            raise NumericalDomainError(f"negative squared eigenvalue for {which}", s=s, p=p, value=sq)
        lam = math.sqrt(sq)
        if lam < 1.0 - _LAMBDA_TOLERANCE:
            raise NumericalDomainError(f"unphysical {which} below 1", **{"lambda": lam, "s": s, "p": p})
        out.append(max(lam, 1.0))
    return tuple(out)


def holevo_chi_be(params: KeyRateParams, z: float | None = None) -> tuple[float, float, tuple[float, ...]]:
    """Holevo bound chi_BE; returns (chi, z, lambdas)."""
    if z is None:
        z = covariance_z(params.protocol, params.vm)
    lams = symplectic_eigenvalues(params, z)
    chi = (entropy_g((lams[0] - 1.0) / 2.0) + entropy_g((lams[1] - 1.0) / 2.0)
           - entropy_g((lams[2] - 1.0) / 2.0) - entropy_g((lams[3] - 1.0) / 2.0)
           - entropy_g((lams[4] - 1.0) / 2.0))
    return chi, z, lams


def delta_n(params: KeyRateParams) -> float:
    """Finite-size privacy-amplification penalty Delta(n)."""
    if params.n is None:
        raise InvalidParameterError("finite-size rate needs n and big_n")
    n = params.n
    return (2 * DIM_HB + 3) * math.sqrt(math.log2(2.0 / params.eps_bar) / n) + (2.0 / n) * math.log2(1.0 / params.eps_pa)


def rate_asymptotic(params: KeyRateParams) -> RateResult:
    """K = beta I - chi_BE, or beta Lambda I - chi_E for the ML protocol."""
    i_ab = mutual_information(params)
    if params.protocol is Protocol.ML:
        key = params.beta * params.lam * i_ab - params.ml_eve_term
        return RateResult(params.protocol, key, i_ab, params.ml_eve_term)
    chi, z, lams = holevo_chi_be(params)
    key = params.beta * i_ab - chi
    return RateResult(params.protocol, key, i_ab, chi, correlation_z=z, lambdas=lams)


def rate_finite(params: KeyRateParams) -> RateResult:
    """Finite-size rate (n/N) [beta I - chi - Delta(n)].

    The traditional protocols charge chi_BE evaluated at the nominal
    channel parameters (an optimistic bound: no confidence-interval
    widening of T and xi); the ML protocol charges the pluggable
    eavesdropper term and scales I by Lambda.
    """
    d = delta_n(params)
    ratio = params.n / params.big_n
    i_ab = mutual_information(params)
    if params.protocol is Protocol.ML:
        key = ratio * (params.beta * params.lam * i_ab - params.ml_eve_term - d)
        return RateResult(params.protocol, key, i_ab, params.ml_eve_term, delta_n=d)
    chi, z, lams = holevo_chi_be(params)
    key = ratio * (params.beta * i_ab - chi - d)
    return RateResult(params.protocol, key, i_ab, chi, delta_n=d, correlation_z=z, lambdas=lams)


@dataclass(frozen=True)
class OptimalVariance:
    distance_km: float
    vm: float
    key_rate: float
    no_positive_rate: bool


def _golden_section_max(f, lo: float, hi: float, xtol: float) -> float:
    """Argmax of a unimodal f on [lo, hi] to within xtol."""
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > xtol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def optimize_vm(protocol: Protocol, distances_km, params: KeyRateParams,
                v_lo: float = 0.05, v_hi: float = 20.0, coarse_points: int = 32,
                xtol: float = 0.01, finite: bool = False) -> list[OptimalVariance]:
    """Per-distance argmax of the key rate over modulation variance.

    A 32-point log-spaced coarse grid locates the basin of the optimum
    (the rate surface is near-flat around it at long distance), then
    golden-section search refines within the bracketing grid interval to
    xtol. Distances where even the best rate is nonpositive are flagged.
    """
    if not 0 < v_lo < v_hi:
        raise InvalidParameterError(f"need 0 < v_lo < v_hi, got [{v_lo}, {v_hi}]")
    rate_of = rate_finite if finite else rate_asymptotic

    results = []
    grid = np.geomspace(v_lo, v_hi, coarse_points)
    for distance in distances_km:
        t = transmittance_from_distance(distance)

        def rate(vm: float) -> float:
            p = dataclasses.replace(params, vm=vm, transmittance=t, protocol=protocol)
            return rate_of(p).key_rate

        coarse = [rate(v) for v in grid]
        best = int(np.argmax(coarse))
        lo = grid[max(best - 1, 0)]
        hi = grid[min(best + 1, len(grid) - 1)]
        vm_opt = _golden_section_max(rate, lo, hi, xtol)
        key = rate(vm_opt)
        results.append(OptimalVariance(
            distance_km=float(distance),
            vm=float(vm_opt),
            key_rate=float(key),
            no_positive_rate=bool(key <= 0.0),
        ))
    return results
