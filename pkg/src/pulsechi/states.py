"""Reference states and their Wigner characteristic functions."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.special import gammaln

SQRT6 = math.sqrt(6.0)


def laguerre(n: int, k: int, x):
    """Associated Laguerre polynomial L_n^(k)(x) by three-term recurrence."""
    if n < 0 or k < 0:
        raise ValueError("degree and superscript must be non-negative")
    x = np.asarray(x, dtype=float)
    prev = np.ones_like(x)
    if n == 0:
        return prev if prev.ndim else float(prev)
    cur = 1.0 + k - x
    for j in range(1, n):
        prev, cur = cur, ((2 * j + 1 + k - x) * cur - (j + k) * prev) / (j + 1)
    return cur if cur.ndim else float(cur)


def displacement_element(m: int, n: int, beta):
    """<m|D(beta)|n> with D(beta) = exp(beta a^dag - beta^* a)."""
    beta = np.asarray(beta, dtype=complex)
    x = np.abs(beta) ** 2
    if m >= n:
        amp = np.exp(0.5 * (gammaln(n + 1) - gammaln(m + 1)) - x / 2)
        return amp * beta ** (m - n) * laguerre(n, m - n, x)
    amp = np.exp(0.5 * (gammaln(m + 1) - gammaln(n + 1)) - x / 2)
    return amp * (-np.conj(beta)) ** (n - m) * laguerre(m, n - m, x)


def displacement_matrices(betas, d: int) -> np.ndarray:
    """Exact Fock-basis elements of D(beta) for levels < d; shape betas.shape + (d, d)."""
    betas = np.asarray(betas, dtype=complex)
    out = np.empty(betas.shape + (d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            out[..., m, n] = displacement_element(m, n, betas)
    return out


def coherent_ket(alpha: complex, d: int) -> np.ndarray:
    n = np.arange(d)
    log_amp = -abs(alpha) ** 2 / 2 - 0.5 * gammaln(n + 1)
    return np.exp(log_amp) * complex(alpha) ** n


def chi_fock_pair(beta):
    """chi of (|1> + |3>)/sqrt(2)."""
    beta = np.asarray(beta, dtype=complex)
    x = np.abs(beta) ** 2
    val = 0.5 * np.exp(-x / 2) * (
        laguerre(1, 0, x) + laguerre(3, 0, x) + (beta**2 + np.conj(beta) ** 2) * laguerre(1, 2, x) / SQRT6
    )
    return val if val.ndim else complex(val)


def chi_coherent(alpha: complex, beta):
    beta = np.asarray(beta, dtype=complex)
    val = np.exp(-np.abs(beta) ** 2 / 2 + np.conj(alpha) * beta - alpha * np.conj(beta))
    return val if val.ndim else complex(val)


def cat_norm2(alpha: complex) -> float:
    """Squared normalization c^2 of (D(alpha) + D(-alpha))|0> / c."""
    return 2 * (1 + math.exp(-2 * abs(alpha) ** 2))


def chi_cat(alpha: complex, beta):
    beta = np.asarray(beta, dtype=complex)
    u = alpha * np.conj(beta)
    v = np.conj(alpha) * beta
    val = (2 * np.exp(-np.abs(beta) ** 2 / 2) / cat_norm2(alpha)) * (
        np.cosh(u - v) + math.exp(-2 * abs(alpha) ** 2) * np.cosh(u + v)
    )
    return val if val.ndim else complex(val)


@dataclass(frozen=True)
class FockPair:
    n1: int = 1
    n2: int = 3
    c1: complex = 1 / math.sqrt(2)
    c2: complex = 1 / math.sqrt(2)
    kind: str = "fock_pair"

    def __post_init__(self):
        if self.n1 == self.n2 or min(self.n1, self.n2) < 0:
            raise ValueError("Fock labels must be distinct and non-negative")
        if abs(abs(self.c1) ** 2 + abs(self.c2) ** 2 - 1) > 1e-12:
            raise ValueError("Fock-pair amplitudes not normalized")

    def ket(self, d: int) -> np.ndarray:
        if max(self.n1, self.n2) >= d:
            raise ValueError(f"truncation {d} too small for |{max(self.n1, self.n2)}>")
        psi = np.zeros(d, dtype=complex)
        psi[self.n1] = self.c1
        psi[self.n2] = self.c2
        return psi

    def chi(self, beta):
        if (self.n1, self.n2) == (1, 3) and np.isclose(self.c1, self.c2) and np.isclose(self.c1, 1 / math.sqrt(2)):
            return chi_fock_pair(beta)
        # general two-level superposition: sum_ij c_i c_j^* <n_j|D|n_i>
        labels = ((self.n1, self.c1), (self.n2, self.c2))
        val = sum(
            ci * np.conj(cj) * displacement_element(nj, ni, beta)
            for ni, ci in labels
            for nj, cj in labels
        )
        return val if np.ndim(val) else complex(val)


@dataclass(frozen=True)
class Coherent:
    alpha: complex = 1.5
    kind: str = "coherent"

    def ket(self, d: int) -> np.ndarray:
        return coherent_ket(self.alpha, d)

    def chi(self, beta):
        return chi_coherent(self.alpha, beta)


@dataclass(frozen=True)
class Cat:
    alpha: complex = 1.5
    kind: str = "cat"

    @property
    def norm(self) -> float:
        return math.sqrt(cat_norm2(self.alpha))

    def ket(self, d: int) -> np.ndarray:
        return (coherent_ket(self.alpha, d) + coherent_ket(-self.alpha, d)) / self.norm

    def chi(self, beta):
        return chi_cat(self.alpha, beta)


ReferenceState = Union[FockPair, Coherent, Cat]


def density_matrix(state: ReferenceState, d: int) -> np.ndarray:
    psi = state.ket(d)
    return np.outer(psi, psi.conj())


def state_to_dict(state: ReferenceState) -> dict:
    def enc(z):
        z = complex(z)
        return [z.real, z.imag]

    if isinstance(state, FockPair):
        return {"kind": "fock_pair", "n1": state.n1, "n2": state.n2, "c1": enc(state.c1), "c2": enc(state.c2)}
    return {"kind": state.kind, "alpha": enc(state.alpha)}


def state_from_dict(data: dict) -> ReferenceState:
    def dec(v, default):
        if v is None:
            return default
        if isinstance(v, (list, tuple)):
            return complex(v[0], v[1])
        return complex(v)

    kind = data.get("kind")
    if kind == "fock_pair":
        return FockPair(
            int(data.get("n1", 1)),
            int(data.get("n2", 3)),
            dec(data.get("c1"), 1 / math.sqrt(2)),
            dec(data.get("c2"), 1 / math.sqrt(2)),
        )
    if kind == "coherent":
        return Coherent(dec(data.get("alpha"), 1.5))
    if kind == "cat":
        return Cat(dec(data.get("alpha"), 1.5))
    raise ValueError(f"unknown reference state kind {kind!r}")
