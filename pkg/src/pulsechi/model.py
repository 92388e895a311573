"""Physical parameters, probe state and pulse-sequence families."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np


@dataclass(frozen=True)
class OscillatorParams:
    """Thermalizing oscillator coupled to a probe.

    All rates are in units of ``nu`` (conventionally ``nu = 1``).
    """

    nu: float = 1.0
    gamma: float = 0.0
    nbar: float = 0.0
    g: float = 0.075

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        for name in ("gamma", "nbar", "g"):
            value = getattr(self, name)
            if not (value >= 0 and math.isfinite(value)):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @property
    def nu_tilde(self) -> complex:
        return complex(self.nu, -self.gamma / 2)

    def replace(self, **changes) -> "OscillatorParams":
        values = dict(nu=self.nu, gamma=self.gamma, nbar=self.nbar, g=self.g)
        values.update(changes)
        return OscillatorParams(**values)


@dataclass(frozen=True)
class ProbeAmplitudes:
    psi_plus: complex = 1 / math.sqrt(2)
    psi_minus: complex = 1 / math.sqrt(2)

    def __post_init__(self):
        norm = abs(self.psi_plus) ** 2 + abs(self.psi_minus) ** 2
        if abs(norm - 1) > 1e-12:
            raise ValueError(f"probe amplitudes not normalized: |psi|^2 = {norm!r}")

    @classmethod
    def normalized(cls, psi_plus: complex, psi_minus: complex) -> "ProbeAmplitudes":
        norm = math.sqrt(abs(psi_plus) ** 2 + abs(psi_minus) ** 2)
        if norm == 0:
            raise ValueError("probe amplitudes are both zero")
        return cls(complex(psi_plus) / norm, complex(psi_minus) / norm)

    @property
    def vector(self) -> np.ndarray:
        """State vector in the (|+>, |->) basis."""
        return np.array([self.psi_plus, self.psi_minus], dtype=complex)

    @property
    def coherence(self) -> complex:
        """psi_+ psi_-^*."""
        return complex(self.psi_plus * np.conj(self.psi_minus))


@dataclass(frozen=True)
class PulseSequence:
    """Half-segment durations tau_1..tau_N; segment n is pi-tau_n-pi-tau_n."""

    taus: tuple[float, ...]

    def __init__(self, taus):
        taus = tuple(float(t) for t in np.ravel(np.asarray(taus, dtype=float)))
        if len(taus) == 0:
            raise ValueError("pulse sequence is empty")
        if any(not (t > 0 and math.isfinite(t)) for t in taus):
            raise ValueError("all free-evolution times must be finite and positive")
        object.__setattr__(self, "taus", taus)

    def __len__(self) -> int:
        return len(self.taus)

    @property
    def n_segments(self) -> int:
        return len(self.taus)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.taus, dtype=float)

    def total_time(self) -> float:
        return total_time(self)


@dataclass(frozen=True)
class Equidistant:
    tau0: float
    n: int
    kind: str = field(default="equidistant", init=False)


@dataclass(frozen=True)
class Linear:
    """tau0, 2 tau0, ..., n tau0, ..., 2 tau0, tau0 (2n - 1 segments)."""

    tau0: float
    n: int
    kind: str = field(default="linear", init=False)


@dataclass(frozen=True)
class Random:
    """n i.i.d. uniform durations on ``(0, high]``; ``high`` defaults to 2 pi / nu."""

    n: int
    seed: int
    high: float = 2 * math.pi
    kind: str = field(default="random", init=False)


SequenceFamily = Union[Equidistant, Linear, Random]


def nbar_from_ratio(x: float) -> float:
    """Bose-Einstein occupation for x = hbar nu / (k_B Theta)."""
    if not x > 0:
        raise ValueError(f"hbar nu / k_B Theta must be positive, got {x}")
    if math.isinf(x):
        return 0.0
    return 1.0 / math.expm1(x)


def random_taus(n: int, seed: int, high: float = 2 * math.pi) -> np.ndarray:
    # PCG64 carries 128 bits of state; the open lower end keeps every tau > 0
    rng = np.random.Generator(np.random.PCG64(seed))
    return high - rng.uniform(0.0, high, size=n)


def expand_family(family: SequenceFamily) -> PulseSequence:
    if family.n < 1:
        raise ValueError("sequence family needs n >= 1 segments")
    if isinstance(family, Equidistant):
        _check_tau0(family.tau0)
        return PulseSequence([family.tau0] * family.n)
    if isinstance(family, Linear):
        _check_tau0(family.tau0)
        ramp = list(range(1, family.n + 1)) + list(range(family.n - 1, 0, -1))
        return PulseSequence([k * family.tau0 for k in ramp])
    if isinstance(family, Random):
        if not family.high > 0:
            raise ValueError("random family needs a positive upper bound")
        return PulseSequence(random_taus(family.n, family.seed, family.high))
    raise TypeError(f"unknown sequence family {family!r}")


def _check_tau0(tau0):
    if not tau0 > 0:
        raise ValueError(f"tau0 must be positive, got {tau0}")


def total_time(seq: PulseSequence) -> float:
    return 2.0 * math.fsum(seq.taus)


def family_to_dict(family: SequenceFamily) -> dict:
    if isinstance(family, Random):
        return {"kind": "random", "n": family.n, "seed": family.seed, "high": family.high}
    return {"kind": family.kind, "tau0": family.tau0, "n": family.n}


def family_from_dict(data: dict) -> SequenceFamily:
    data = dict(data)
    kind = data.pop("kind")
    if kind == "equidistant":
        return Equidistant(float(data["tau0"]), int(data["n"]))
    if kind == "linear":
        return Linear(float(data["tau0"]), int(data["n"]))
    if kind == "random":
        return Random(int(data["n"]), int(data["seed"]), float(data.get("high", 2 * math.pi)))
    raise ValueError(f"unknown sequence family kind {kind!r}")
