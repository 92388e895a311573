"""Closed-form quantities of the pulsed characteristic-function protocol.

Conventions: ``p.nu_tilde = nu - i gamma/2``; products over sequence
segments run in application order (segment 1 first). Empty sums are 0 and
empty products are 1.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from .model import OscillatorParams, ProbeAmplitudes, PulseSequence, total_time

__all__ = [
    "PoleError",
    "DegenerateProbeError",
    "SkewParams",
    "MeasurementPrediction",
    "complex_frequency",
    "epsilon",
    "gamma_interference",
    "skew_params",
    "nbar_t",
    "upsilon",
    "zeta",
    "zeta_equidistant_closed",
    "zeta_equidistant",
    "zeta_batch",
    "beta_n",
    "phi_n",
    "phis",
    "f_exponent",
    "log_scaling",
    "log_scaling_batch",
    "scaling_factor",
    "invert_measurement",
    "predict_pauli",
    "dephasing_compensation",
]


class PoleError(ArithmeticError):
    """Closed form evaluated at (or next to) a pole of the tangent."""


class DegenerateProbeError(ValueError):
    """Probe state without coherence between |+> and |->."""


@dataclass(frozen=True)
class SkewParams:
    xi1: complex
    xi2: complex
    xi3: complex

    def __neg__(self) -> "SkewParams":
        return SkewParams(-self.xi1, -self.xi2, -self.xi3)

    def __add__(self, other: "SkewParams") -> "SkewParams":
        return SkewParams(self.xi1 + other.xi1, self.xi2 + other.xi2, self.xi3 + other.xi3)

    def scaled(self, s: complex) -> "SkewParams":
        return SkewParams(s * self.xi1, s * self.xi2, s * self.xi3)

    def as_tuple(self) -> tuple[complex, complex, complex]:
        return (self.xi1, self.xi2, self.xi3)


@dataclass(frozen=True)
class MeasurementPrediction:
    zeta: complex
    c_plus: complex
    c_minus: complex
    pauli_xy: tuple[complex, complex]
    chi_plus: complex
    chi_minus: complex
    hermiticity_residual: float

    @property
    def chi_symmetrized(self) -> tuple[complex, complex]:
        """(chi(+zeta), chi(-zeta)) with chi(-zeta) = chi(zeta)^* imposed."""
        c = 0.5 * (self.chi_plus + np.conj(self.chi_minus))
        return complex(c), complex(np.conj(c))


def _csum(values) -> complex:
    values = list(values)
    return complex(math.fsum(v.real for v in values), math.fsum(v.imag for v in values))


def complex_frequency(p: OscillatorParams) -> complex:
    return complex(p.nu, -p.gamma / 2)


def epsilon(p: OscillatorParams) -> complex:
    return p.g / (2 * complex_frequency(p))


def _abs_nu2(p: OscillatorParams) -> float:
    return p.nu**2 + p.gamma**2 / 4


def gamma_interference(p: OscillatorParams) -> float:
    """Decay rate of the probe coherence, g^2 (2 nbar + 1) gamma / (2 |nu~|^2)."""
    return p.g**2 * (2 * p.nbar + 1) * p.gamma / (2 * _abs_nu2(p))


def skew_params(p: OscillatorParams) -> SkewParams:
    scale = p.g / (4 * _abs_nu2(p))
    return SkewParams(
        xi1=scale * complex(0, -4 * (2 * p.nbar + 1) * p.gamma),
        xi2=scale * complex(2 * p.nu, (4 * p.nbar + 1) * p.gamma),
        xi3=scale * complex(-2 * p.nu, (4 * p.nbar + 3) * p.gamma),
    )


def nbar_t(p: OscillatorParams, t: float) -> float:
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    return (p.nbar + 0.5) * -math.expm1(-p.gamma * t)


def _segment_terms(w: complex, taus) -> list[complex]:
    """(1 - e^{-i w tau_n})^2 * prod_{k<=n} e^{2 i w tau_k} for every n."""
    terms = []
    phase = 0j
    for tau in taus:
        phase += 2j * w * tau
        terms.append((1 - cmath.exp(-1j * w * tau)) ** 2 * cmath.exp(phase))
    return terms


def upsilon(p: OscillatorParams, seq: PulseSequence) -> complex:
    """Displacement of the probe-diagonal propagators after the full sequence."""
    w = complex_frequency(p)
    big_t = total_time(seq)
    return epsilon(p) * cmath.exp(-1j * w * big_t) * _csum(_segment_terms(w, seq.taus))


def zeta(p: OscillatorParams, seq: PulseSequence) -> complex:
    """Reciprocal-phase-space point sampled by ``seq``."""
    w = complex_frequency(p).conjugate()
    return 2 * epsilon(p).conjugate() * _csum(_segment_terms(w, seq.taus))


def zeta_equidistant_closed(p: OscillatorParams, tau0: float, n: int, pole_tol: float = 1e-6) -> complex:
    """Closed form of ``zeta`` for n equal durations tau0.

    Summing the geometric series of ``zeta`` gives
    -4 eps^* sin(n w tau0) tan(w tau0 / 2) e^{i n w tau0} with w = nu~^*.
    Raises PoleError within ``pole_tol`` of a pole of tan(nu~^* tau0 / 2).
    """
    w = complex_frequency(p).conjugate()
    half = w * tau0 / 2
    k = round((half.real - math.pi / 2) / math.pi)
    if abs(half - (math.pi / 2 + k * math.pi)) < pole_tol:
        raise PoleError(f"tan pole at nu~* tau0 / 2 = {half}")
    return (
        -4 * epsilon(p).conjugate()
        * cmath.sin(n * w * tau0)
        * cmath.tan(half)
        * cmath.exp(1j * n * w * tau0)
    )


def zeta_equidistant(p: OscillatorParams, tau0: float, n: int) -> complex:
    try:
        return zeta_equidistant_closed(p, tau0, n)
    except PoleError:
        return zeta(p, PulseSequence([tau0] * n))


def zeta_batch(p: OscillatorParams, taus: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Vectorized ``zeta`` for a (M, N) array of sequences.

    ``mask`` (M, N) marks which entries belong to each sequence, so that
    sequences of different length can share one array; masked-out entries
    must sit at the end of each row.
    """
    taus = np.atleast_2d(np.asarray(taus, dtype=float))
    if mask is None:
        mask = np.ones_like(taus, dtype=bool)
    w = complex_frequency(p).conjugate()
    t = np.where(mask, taus, 0.0)
    phase = np.cumsum(2j * w * t, axis=1)
    terms = (1 - np.exp(-1j * w * t)) ** 2 * np.exp(phase)
    return 2 * epsilon(p).conjugate() * np.sum(terms, axis=1)


def _check_index(seq: PulseSequence, n: int):
    if not 1 <= n <= len(seq):
        raise IndexError(f"segment index {n} outside 1..{len(seq)}")


def beta_n(p: OscillatorParams, seq: PulseSequence, beta: complex, n: int, sign: int) -> complex:
    """Displacement argument entering segment n when propagating D^dag(beta)."""
    _check_index(seq, n)
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    w = complex_frequency(p).conjugate()
    taus = seq.taus
    shift = []
    for j in range(n - 1):
        rot = cmath.exp(-2j * w * math.fsum(taus[j + 1:n - 1]))
        shift.append((1 - cmath.exp(-1j * w * taus[j])) ** 2 * rot)
    rot_all = cmath.exp(-2j * w * math.fsum(taus[:n - 1]))
    return 2 * epsilon(p).conjugate() * _csum(shift) - sign * beta * rot_all


def phi_n(p: OscillatorParams, seq: PulseSequence, n: int) -> complex:
    """``beta_n`` evaluated on the sampled point (either sign).

    The rotation product runs over k = n..j with positive exponent, the
    reading under which this equals ``beta_n(p, seq, zeta(p, seq), n, +1)``.
    """
    _check_index(seq, n)
    w = complex_frequency(p).conjugate()
    taus = seq.taus
    terms = []
    for j in range(n - 1, len(taus)):
        rot = cmath.exp(2j * w * math.fsum(taus[n - 1:j + 1]))
        terms.append((1 - cmath.exp(-1j * w * taus[j])) ** 2 * rot)
    return -2 * epsilon(p).conjugate() * _csum(terms)


def phis(p: OscillatorParams, seq: PulseSequence) -> list[complex]:
    return [phi_n(p, seq, n) for n in range(1, len(seq) + 1)]


def f_exponent(p: OscillatorParams, t: float, sigma: complex) -> complex:
    """Exponent acquired by D(sigma) in one segment beyond the deterministic part."""
    if t < 0:
        raise ValueError(f"time must be non-negative, got {t}")
    w = complex_frequency(p).conjugate()
    eps_c = epsilon(p).conjugate()
    e = cmath.exp(-1j * w * t)
    gam = gamma_interference(p)
    # Gamma * sigma / g written without the 1/g so that g = 0 is exact
    gam_over_g = p.g * (2 * p.nbar + 1) * p.gamma / (2 * _abs_nu2(p))
    coherent = 2 * (gam * ((2 - e) ** 2 / w) + gam_over_g * sigma * (1 - e) ** 2).imag
    s = 2 * eps_c + sigma
    diffusion = nbar_t(p, t) * math.exp(p.gamma * t) * (abs(s) ** 2 + abs(s * e - 4 * eps_c) ** 2)
    return coherent - diffusion


def log_scaling(p: OscillatorParams, seq: PulseSequence) -> complex:
    """Exponent of C_+- (without the probe prefactor)."""
    gam = gamma_interference(p)
    n = len(seq)
    fs = [f_exponent(p, tau, ph) for tau, ph in zip(seq.taus, phis(p, seq))]
    return gam * total_time(seq) - n * gam * p.gamma / _abs_nu2(p) - _csum(fs)


def log_scaling_batch(p: OscillatorParams, taus: np.ndarray) -> np.ndarray:
    """Vectorized ``log_scaling`` for an (M, N) array of equal-length sequences."""
    taus = np.atleast_2d(np.asarray(taus, dtype=float))
    w = complex_frequency(p).conjugate()
    eps_c = epsilon(p).conjugate()
    e = np.exp(-1j * w * taus)
    rot = np.exp(2j * w * taus)
    seg = (1 - e) ** 2
    # phi_n = -2 eps^* R_n with R_n = rot_n (seg_n + R_{n+1}), run backwards
    acc = np.zeros(taus.shape[0], dtype=complex)
    phi = np.empty(taus.shape, dtype=complex)
    for n in range(taus.shape[1] - 1, -1, -1):
        acc = rot[:, n] * (seg[:, n] + acc)
        phi[:, n] = -2 * eps_c * acc
    gam = gamma_interference(p)
    gam_over_g = p.g * (2 * p.nbar + 1) * p.gamma / (2 * _abs_nu2(p))
    coherent = 2 * (gam * ((2 - e) ** 2 / w) + gam_over_g * phi * seg).imag
    nbt = (p.nbar + 0.5) * -np.expm1(-p.gamma * taus) * np.exp(p.gamma * taus)
    s = 2 * eps_c + phi
    diffusion = nbt * (np.abs(s) ** 2 + np.abs(s * e - 4 * eps_c) ** 2)
    big_t = 2 * taus.sum(axis=1)
    n = taus.shape[1]
    return gam * big_t - n * gam * p.gamma / _abs_nu2(p) - (coherent - diffusion).sum(axis=1)


def _probe_prefactors(probe: ProbeAmplitudes, tol: float = 1e-14) -> tuple[complex, complex]:
    c = probe.coherence
    if abs(c) < tol:
        raise DegenerateProbeError("probe has no |+>/|-> coherence; nothing to read out")
    return 2 * c, 2 * c.conjugate()


def scaling_factor(
    p: OscillatorParams,
    probe: ProbeAmplitudes,
    seq: PulseSequence,
    gamma_d: float = 0.0,
) -> tuple[complex, complex]:
    """(C_+, C_-) so that chi(+-zeta) = C_+- <sigma_x -+ i sigma_y>.

    ``gamma_d`` folds in the compensation for probe pure dephasing.
    """
    pre_plus, pre_minus = _probe_prefactors(probe)
    scale = cmath.exp(log_scaling(p, seq)) * dephasing_compensation(gamma_d, total_time(seq))
    return scale / pre_plus, scale / pre_minus


def invert_measurement(
    p: OscillatorParams,
    probe: ProbeAmplitudes,
    seq: PulseSequence,
    pauli_xy,
    gamma_d: float = 0.0,
) -> MeasurementPrediction:
    """Turn measured <sigma_x -+ i sigma_y> into chi(+-zeta)."""
    xy_plus, xy_minus = (complex(v) for v in pauli_xy)
    if not (cmath.isfinite(xy_plus) and cmath.isfinite(xy_minus)):
        raise ValueError("Pauli expectations must be finite")
    c_plus, c_minus = scaling_factor(p, probe, seq, gamma_d)
    chi_plus = c_plus * xy_plus
    chi_minus = c_minus * xy_minus
    return MeasurementPrediction(
        zeta=zeta(p, seq),
        c_plus=c_plus,
        c_minus=c_minus,
        pauli_xy=(xy_plus, xy_minus),
        chi_plus=chi_plus,
        chi_minus=chi_minus,
        hermiticity_residual=abs(chi_minus - chi_plus.conjugate()),
    )


def predict_pauli(
    p: OscillatorParams,
    probe: ProbeAmplitudes,
    seq: PulseSequence,
    chi,
    gamma_d: float = 0.0,
) -> tuple[complex, complex]:
    """Forward model: <sigma_x -+ i sigma_y> for a state with characteristic function ``chi``."""
    z = zeta(p, seq)
    c_plus, c_minus = scaling_factor(p, probe, seq, gamma_d)
    return complex(chi(z)) / c_plus, complex(chi(-z)) / c_minus


def dephasing_compensation(gamma_d: float, big_t: float) -> float:
    if gamma_d < 0 or big_t < 0:
        raise ValueError("dephasing rate and duration must be non-negative")
    return math.exp(gamma_d * big_t)
