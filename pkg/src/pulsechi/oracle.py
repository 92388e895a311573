"""Brute-force truncated-Fock reference for the probe + oscillator dynamics.

Operators on the oscillator are d x d arrays; superoperators act on
(..., d, d) stacks. Vectorization is row-major, so that
vec(A X B) = kron(A, B.T) vec(X).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from . import analytic as an
from .model import OscillatorParams, ProbeAmplitudes, PulseSequence, total_time
from .states import displacement_matrices

LEAKAGE_TOL = 1e-8


@dataclass(frozen=True)
class FockSpace:
    dim: int

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("Fock truncation needs at least two levels")

    @cached_property
    def a(self) -> np.ndarray:
        return np.diag(np.sqrt(np.arange(1, self.dim, dtype=float)), 1).astype(complex)

    @cached_property
    def adag(self) -> np.ndarray:
        return self.a.conj().T

    @cached_property
    def num(self) -> np.ndarray:
        return np.diag(np.arange(self.dim, dtype=float)).astype(complex)

    @cached_property
    def x(self) -> np.ndarray:
        """Dimensionless position a + a^dag."""
        return self.a + self.adag

    @cached_property
    def eye(self) -> np.ndarray:
        return np.eye(self.dim, dtype=complex)

    def projector(self, levels: int) -> np.ndarray:
        proj = np.zeros((self.dim, self.dim), dtype=complex)
        proj[:levels, :levels] = np.eye(levels)
        return proj

    def basis_operators(self) -> np.ndarray:
        """All |n><m| stacked, shape (d*d, d, d)."""
        return np.eye(self.dim * self.dim, dtype=complex).reshape(-1, self.dim, self.dim)


@dataclass
class OscillatorOperator:
    matrix: np.ndarray
    flags: list[str] = field(default_factory=list)


@dataclass
class JointState:
    """Probe (x) oscillator density matrix; probe index major, |+> first."""

    rho: np.ndarray
    time: float = 0.0
    flags: list[str] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.rho.shape[0] // 2

    def block(self, i: int, j: int) -> np.ndarray:
        d = self.dim
        return self.rho[i * d:(i + 1) * d, j * d:(j + 1) * d]

    def reduced_oscillator(self) -> np.ndarray:
        return self.block(0, 0) + self.block(1, 1)

    def check(self, herm_tol=1e-10, trace_tol=1e-9, eig_floor=-1e-8) -> dict:
        herm = float(np.max(np.abs(self.rho - self.rho.conj().T)))
        tr = complex(np.trace(self.rho))
        min_eig = float(np.min(np.linalg.eigvalsh(0.5 * (self.rho + self.rho.conj().T))))
        return {
            "hermiticity": herm,
            "trace_error": abs(tr - 1),
            "min_eigenvalue": min_eig,
            "ok": herm < herm_tol and abs(tr - 1) < trace_tol and min_eig > eig_floor,
        }


# -- superoperators -------------------------------------------------------


class Superop:
    """Linear map on oscillator operators, applied to (..., d, d) stacks."""

    def __init__(self, dim: int, fn, label: str = ""):
        self.dim = dim
        self._fn = fn
        self.label = label

    def __call__(self, ops: np.ndarray) -> np.ndarray:
        return self._fn(np.asarray(ops, dtype=complex))

    def __matmul__(self, other: "Superop") -> "Superop":
        return Superop(self.dim, lambda X: self(other(X)), f"{self.label}{other.label}")

    def __mul__(self, scalar) -> "Superop":
        return Superop(self.dim, lambda X: scalar * self(X), self.label)

    __rmul__ = __mul__

    def __add__(self, other: "Superop") -> "Superop":
        return Superop(self.dim, lambda X: self(X) + other(X))

    def __sub__(self, other: "Superop") -> "Superop":
        return Superop(self.dim, lambda X: self(X) - other(X))

    def matrix(self) -> np.ndarray:
        """Dense d^2 x d^2 representation (column k = vec of image of basis k)."""
        basis = np.eye(self.dim**2, dtype=complex).reshape(-1, self.dim, self.dim)
        return self(basis).reshape(self.dim**2, self.dim**2).T


def sandwich(left: np.ndarray, right: np.ndarray, scale: complex = 1.0, label: str = "") -> Superop:
    return Superop(left.shape[0], lambda X: scale * (left @ X @ right), label)


def identity_superop(dim: int) -> Superop:
    return Superop(dim, lambda X: X.copy(), "I")


class Generator:
    """Sparse generator of a linear ODE on vectorized operators."""

    def __init__(self, matrix: sp.spmatrix, dim: int):
        self.matrix = sp.csr_matrix(matrix)
        self.dim = dim

    def __call__(self, ops: np.ndarray) -> np.ndarray:
        ops = np.asarray(ops, dtype=complex)
        flat = ops.reshape(-1, self.dim * self.dim).T
        return (self.matrix @ flat).T.reshape(ops.shape)

    def as_superop(self) -> Superop:
        return Superop(self.dim, self)

    def propagate(self, ops: np.ndarray, t: float) -> np.ndarray:
        ops = np.asarray(ops, dtype=complex)
        if t == 0:
            return ops.copy()
        if t < 0:
            raise ValueError("negative propagation time")
        flat = ops.reshape(-1, self.dim * self.dim).T
        out = expm_multiply(self.matrix * t, flat)
        return np.asarray(out).T.reshape(ops.shape)

    def expm(self, t: float) -> Superop:
        return Superop(self.dim, lambda X: self.propagate(X, t), "exp")

    def dense_expm(self, t: float) -> np.ndarray:
        return expm(self.matrix.toarray() * t)


def _kron(a, b):
    return sp.kron(sp.csr_matrix(a), sp.csr_matrix(b), format="csr")


def _left(op):
    return _kron(op, np.eye(op.shape[0]))


def _right(op):
    return _kron(np.eye(op.shape[0]), op.T)


def lindbladian(hamiltonian: np.ndarray, jumps) -> sp.csr_matrix:
    """-i[H, .] + sum_k (L . L^dag - {L^dag L, .}/2), row-major vectorized."""
    gen = -1j * (_left(hamiltonian) - _right(hamiltonian))
    for op in jumps:
        ldl = op.conj().T @ op
        gen = gen + _kron(op, op.conj()) - 0.5 * (_left(ldl) + _right(ldl))
    return sp.csr_matrix(gen)


def _oscillator_jumps(p: OscillatorParams, a: np.ndarray) -> list:
    jumps = []
    if p.gamma > 0:
        jumps.append(math.sqrt((p.nbar + 1) * p.gamma) * a)
        if p.nbar > 0:
            jumps.append(math.sqrt(p.nbar * p.gamma) * a.conj().T)
    return jumps


def liouvillian(space: FockSpace, p: OscillatorParams) -> Generator:
    return Generator(lindbladian(p.nu * space.num, _oscillator_jumps(p, space.a)), space.dim)


def _check_sign(sign):
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")


def generator_c(space: FockSpace, p: OscillatorParams, sign: int) -> Generator:
    """L rho -+ (ig/2)[x, rho]."""
    _check_sign(sign)
    mat = liouvillian(space, p).matrix - sign * 0.5j * p.g * (_left(space.x) - _right(space.x))
    return Generator(mat, space.dim)


def generator_a(space: FockSpace, p: OscillatorParams, sign: int) -> Generator:
    """L rho -+ (ig/2){x, rho}."""
    _check_sign(sign)
    mat = liouvillian(space, p).matrix - sign * 0.5j * p.g * (_left(space.x) + _right(space.x))
    return Generator(mat, space.dim)


def displacement_matrix(space: FockSpace, beta: complex) -> OscillatorOperator:
    flags = []
    if abs(beta) ** 2 > space.dim / 4:
        flags.append(f"truncation-unsafe displacement |beta|^2={abs(beta) ** 2:.3g} > d/4")
    return OscillatorOperator(displacement_matrices(complex(beta), space.dim), flags)


def superdisplacement_sym(space: FockSpace, eps: complex) -> Superop:
    dmat = displacement_matrices(complex(eps), space.dim)
    return sandwich(dmat, dmat.conj().T, label="D")


def superdisplacement_skew(space: FockSpace, xi: an.SkewParams, sign: int = 1) -> Superop:
    """rho -> e^{+-xi1 a} D(+-xi2) rho D^dag(+-xi3) e^{-+xi1 a}."""
    _check_sign(sign)
    x1, x2, x3 = (sign * v for v in xi.as_tuple())
    left = expm(x1 * space.a) @ displacement_matrices(x2, space.dim)
    right = displacement_matrices(x3, space.dim).conj().T @ expm(-x1 * space.a)
    return sandwich(left, right, label="S")


# -- test operators and residuals -----------------------------------------


BULK_LEVELS = 15


def bulk_levels(space: FockSpace) -> int:
    """Levels on which truncated identities are compared.

    Fixed rather than tied to d: truncated displacement elements near level
    n scale like (|beta| sqrt(n))^k / k!, so a band a fixed distance below
    the edge gets worse as d grows.
    """
    return min(BULK_LEVELS, max(space.dim - 10, 2))


def test_operators(space: FockSpace, n_dyads: int = 4, sigmas=(0.3 + 0.2j, -0.5 + 0.4j, 0.8j)) -> np.ndarray:
    """Low-lying dyads |n><m| plus a few displacement operators."""
    k = min(n_dyads, space.dim)
    dyads = []
    for n in range(k):
        for m in range(k):
            op = np.zeros((space.dim, space.dim), dtype=complex)
            op[n, m] = 1
            dyads.append(op)
    disp = [displacement_matrices(s, space.dim) for s in sigmas]
    return np.array(dyads + disp)


def bulk_residual(space: FockSpace, lhs: np.ndarray, rhs: np.ndarray, levels: int | None = None) -> float:
    """Largest spectral norm of (lhs - rhs) restricted to the lowest ``levels`` levels."""
    levels = bulk_levels(space) if levels is None else levels
    diff = (lhs - rhs)[..., :levels, :levels]
    if diff.ndim == 2:
        diff = diff[None]
    return float(max(np.linalg.norm(m, 2) for m in diff))


def superop_residual(space: FockSpace, lhs: Superop, rhs: Superop, ops=None, levels=None) -> float:
    ops = test_operators(space) if ops is None else ops
    return bulk_residual(space, lhs(ops), rhs(ops), levels)


def switch_identity_residual(space: FockSpace, p: OscillatorParams, eps: complex, t: float) -> float:
    """e^{Lt} D[eps] versus D[eps e^{-i nu~ t}] e^{Lt}."""
    if t < 0:
        raise ValueError("negative time")
    lv = liouvillian(space, p)
    lhs = lv.expm(t) @ superdisplacement_sym(space, eps)
    rhs = superdisplacement_sym(space, eps * np.exp(-1j * p.nu_tilde * t)) @ lv.expm(t)
    return superop_residual(space, lhs, rhs)


# -- joint probe + oscillator simulation ----------------------------------

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)


def joint_generator(space: FockSpace, p: OscillatorParams, dephasing: float = 0.0) -> sp.csr_matrix:
    """Free-evolution generator of the probe + oscillator density matrix."""
    eye2 = np.eye(2, dtype=complex)
    ham = np.kron(eye2, p.nu * space.num) + 0.5 * p.g * np.kron(SIGMA_Z, space.x)
    jumps = [np.kron(eye2, op) for op in _oscillator_jumps(p, space.a)]
    if dephasing > 0:
        jumps.append(math.sqrt(dephasing / 2) * np.kron(SIGMA_Z, space.eye))
    return lindbladian(ham, jumps)


def _leakage(space: FockSpace, rho: np.ndarray) -> float:
    d = space.dim
    pops = np.real(np.diag(rho))
    return float(pops[d - 2:d].sum() + pops[2 * d - 2:2 * d].sum())


def run_sequence(
    space: FockSpace,
    p: OscillatorParams,
    probe: ProbeAmplitudes,
    seq: PulseSequence,
    rho0: np.ndarray,
    dephasing: float = 0.0,
) -> JointState:
    """Evolve |psi><psi| (x) rho0 through the pulse schedule.

    Segment n: free evolution tau_n, pi pulse, free evolution tau_n, pi
    pulse; segment 1 is applied first.
    """
    d = space.dim
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ValueError(f"initial state must be {d}x{d}")
    psi = probe.vector
    rho = np.kron(np.outer(psi, psi.conj()), rho0)
    gen = joint_generator(space, p, dephasing)
    flip = np.kron(SIGMA_X, space.eye)
    flags = []
    leak = _leakage(space, rho)
    vec = rho.reshape(-1)
    for tau in seq.taus:
        for _ in range(2):
            vec = expm_multiply(gen * tau, vec)
            rho = flip @ vec.reshape(2 * d, 2 * d) @ flip
            vec = rho.reshape(-1)
            leak = max(leak, _leakage(space, rho))
    rho = vec.reshape(2 * d, 2 * d)
    if leak > LEAKAGE_TOL:
        flags.append(f"truncation leakage {leak:.2e} in top two Fock levels")
    return JointState(rho, total_time(seq), flags)


def pauli_expectations(state: JointState) -> dict:
    """<sigma_x>, <sigma_y>, <sigma_z> and the combinations <sigma_x -+ i sigma_y>."""
    d = state.dim
    eye = np.eye(d)
    sx, sy, sz = (complex(np.trace(np.kron(s, eye) @ state.rho)) for s in (SIGMA_X, SIGMA_Y, SIGMA_Z))
    return {
        "sx": sx.real,
        "sy": sy.real,
        "sz": sz.real,
        # upper sign pairs with chi(+zeta), lower with chi(-zeta)
        "xy_minus": sx - 1j * sy,
        "xy_plus": sx + 1j * sy,
    }


def measured_pauli_xy(state: JointState) -> tuple[complex, complex]:
    e = pauli_expectations(state)
    return e["xy_minus"], e["xy_plus"]


def sequence_propagators(space: FockSpace, p: OscillatorParams, seq: PulseSequence, ops: np.ndarray) -> dict:
    """U_+-[tau] and V_+-[tau] applied to ``ops`` from the reduced generators."""
    gens = {
        "U+": (generator_c(space, p, 1), generator_c(space, p, -1)),
        "U-": (generator_c(space, p, -1), generator_c(space, p, 1)),
        "V+": (generator_a(space, p, 1), generator_a(space, p, -1)),
        "V-": (generator_a(space, p, -1), generator_a(space, p, 1)),
    }
    out = {}
    for key, (first, second) in gens.items():
        x = np.asarray(ops, dtype=complex)
        for tau in seq.taus:
            x = second.propagate(first.propagate(x, tau), tau)
        out[key] = x
    return out


def fock_trace_chi(space: FockSpace, rho: np.ndarray, beta: complex) -> complex:
    return complex(np.trace(displacement_matrices(complex(beta), space.dim) @ rho))


def oracle_chi_samples(
    space: FockSpace,
    p: OscillatorParams,
    probe: ProbeAmplitudes,
    seq: PulseSequence,
    rho0: np.ndarray,
    dephasing: float = 0.0,
    compensate: bool = True,
) -> tuple[complex, an.MeasurementPrediction, list[str]]:
    """Simulate one sequence and invert the Pauli readout into chi(+-zeta)."""
    state = run_sequence(space, p, probe, seq, rho0, dephasing)
    pred = an.invert_measurement(
        p, probe, seq, measured_pauli_xy(state), gamma_d=dephasing if compensate else 0.0
    )
    return pred.zeta, pred, state.flags


# -- array dump -----------------------------------------------------------


def dump_arrays(path, arrays: dict, meta: dict) -> tuple[Path, Path]:
    """Write ``arrays`` to ``<path>.npz`` and ``meta`` (plus shapes) to ``<path>.json``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    npz = path.with_suffix(".npz")
    np.savez_compressed(npz, **{k: np.asarray(v) for k, v in arrays.items()})
    info = dict(meta)
    info["arrays"] = {k: {"shape": list(np.shape(v)), "dtype": str(np.asarray(v).dtype)} for k, v in arrays.items()}
    meta_path = path.with_suffix(".json")
    meta_path.write_text(json.dumps(info, indent=2, sort_keys=True, default=str))
    return npz, meta_path


def load_arrays(path) -> tuple[dict, dict]:
    path = Path(path)
    with np.load(path.with_suffix(".npz")) as data:
        arrays = {k: data[k] for k in data.files}
    meta = json.loads(path.with_suffix(".json").read_text())
    return arrays, meta
