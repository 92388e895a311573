"""From sampled characteristic-function values to a density matrix and a fidelity."""
from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property, lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CloughTocher2DInterpolator, LinearNDInterpolator, RBFInterpolator
from scipy.spatial import ConvexHull, Delaunay, QhullError

from . import analytic as an
from .model import (
    Equidistant,
    Linear,
    OscillatorParams,
    ProbeAmplitudes,
    PulseSequence,
    Random,
    SequenceFamily,
    expand_family,
    random_taus,
)
from .states import ReferenceState, density_matrix, displacement_element

KINDS = ("equidistant", "linear", "random")
SOURCES = ("analytic", "oracle", "external")

DEFAULT_EXTENT = 7.0
DEFAULT_SPACING = 0.08
DEFAULT_DIM = 30
DEFAULT_TAU_POINTS = 4000
DEFAULT_DRAWS = 2000
TAIL_TOL = 1e-3
HERMITIAN_TOL = 1e-8
# a Pauli signal below this is not resolvable in double precision
SIGNAL_FLOOR = 1e-300


class CoverageError(ValueError):
    """Sample cloud cannot support the requested interpolation."""

    def __init__(self, message: str, uncovered=()):
        super().__init__(message)
        self.uncovered = list(uncovered)


class TailCoverageError(CoverageError):
    pass


class GridMismatchError(ValueError):
    pass


# -- sampling plans -------------------------------------------------------


def default_tau0_grid(points: int = DEFAULT_TAU_POINTS, period: float = 2 * math.pi) -> np.ndarray:
    """``points`` durations evenly filling (0, period]."""
    if points < 1:
        raise ValueError("tau0 grid needs at least one point")
    return np.linspace(0.0, period, points + 1)[1:]


def _draw_seed(seed: int, n: int, j: int) -> int:
    return int(np.random.SeedSequence(seed, spawn_key=(n, j)).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SamplingPlan:
    """A sweep of one sequence family over N values.

    Equidistant and linear sweeps use ``tau0_grid``; random sweeps draw
    ``draws`` sequences per N, each with its own reproducible seed, so the
    sequences for a smaller N-cap are a subset of those for a larger one.
    """

    kind: str
    n_values: tuple = tuple(range(1, 21))
    tau0_grid: tuple = ()
    draws: int = DEFAULT_DRAWS
    seed: int = 0
    high: float = 2 * math.pi

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sequence family {self.kind!r}")
        object.__setattr__(self, "n_values", tuple(int(n) for n in self.n_values))
        object.__setattr__(self, "tau0_grid", tuple(float(t) for t in np.ravel(self.tau0_grid)))
        if not self.n_values:
            raise ValueError("sampling plan has no N values")
        if min(self.n_values) < 1:
            raise ValueError("N values must be >= 1")
        if self.kind == "random":
            if self.draws < 1:
                raise ValueError("random plan needs draws >= 1")
            if not self.high > 0:
                raise ValueError("random plan needs a positive upper bound")
        else:
            if not self.tau0_grid:
                raise ValueError(f"{self.kind} plan needs a nonempty tau0 grid")
            if any(not (t > 0 and math.isfinite(t)) for t in self.tau0_grid):
                raise ValueError("tau0 grid entries must be finite and positive")

    @classmethod
    def sweep(cls, kind: str, n_max: int = 20, tau_points: int = DEFAULT_TAU_POINTS,
              draws: int = DEFAULT_DRAWS, seed: int = 0) -> "SamplingPlan":
        grid = () if kind == "random" else tuple(default_tau0_grid(tau_points))
        return cls(kind, tuple(range(1, n_max + 1)), grid, draws, seed)

    def capped(self, n_max: int) -> "SamplingPlan":
        kept = tuple(n for n in self.n_values if n <= n_max)
        return SamplingPlan(self.kind, kept, self.tau0_grid, self.draws, self.seed, self.high)

    def labels(self, n: int) -> np.ndarray:
        """tau0 (deterministic families) or seed (random) for each sequence at this N."""
        if self.kind == "random":
            return np.array([_draw_seed(self.seed, n, j) for j in range(self.draws)], dtype=np.uint64)
        return np.asarray(self.tau0_grid)

    def families(self) -> list[SequenceFamily]:
        out: list[SequenceFamily] = []
        for n in self.n_values:
            for label in self.labels(n):
                if self.kind == "equidistant":
                    out.append(Equidistant(float(label), n))
                elif self.kind == "linear":
                    out.append(Linear(float(label), n))
                else:
                    out.append(Random(n, int(label), self.high))
        return out

    def tau_batch(self, n: int) -> np.ndarray:
        """(M, segments) array of durations for all sequences at this N."""
        return self._batches[n]

    @cached_property
    def _batches(self) -> dict:
        out = {}
        for n in self.n_values:
            if self.kind == "equidistant":
                out[n] = np.repeat(np.asarray(self.tau0_grid)[:, None], n, axis=1)
            elif self.kind == "linear":
                ramp = np.r_[np.arange(1, n + 1), np.arange(n - 1, 0, -1)]
                out[n] = np.asarray(self.tau0_grid)[:, None] * ramp[None, :]
            else:
                out[n] = np.array([random_taus(n, int(s), self.high) for s in self.labels(n)])
        return out

    def __len__(self) -> int:
        per = self.draws if self.kind == "random" else len(self.tau0_grid)
        return per * len(self.n_values)


# -- samples --------------------------------------------------------------


@dataclass(frozen=True)
class CharacteristicSample:
    beta: complex
    value: complex
    source: str = "analytic"
    sequence: int = -1
    flags: tuple = ()


@dataclass
class SampleSet:
    """Columnar store of characteristic-function samples.

    ``sequence`` ties each sample to the sequence that produced it (-1 for
    none); ``flags`` maps sequence ids to warning strings.
    """

    beta: np.ndarray
    value: np.ndarray
    source: str = "external"
    sequence: np.ndarray | None = None
    flags: dict = field(default_factory=dict)

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=complex).ravel()
        self.value = np.asarray(self.value, dtype=complex).ravel()
        if self.beta.shape != self.value.shape:
            raise ValueError("beta and value arrays differ in length")
        if self.source not in SOURCES:
            raise ValueError(f"unknown sample source {self.source!r}")
        if self.sequence is None:
            self.sequence = np.full(self.beta.shape, -1, dtype=np.int64)
        self.sequence = np.asarray(self.sequence, dtype=np.int64).ravel()

    @classmethod
    def from_samples(cls, samples: Sequence[CharacteristicSample]) -> "SampleSet":
        samples = list(samples)
        sources = {s.source for s in samples} or {"external"}
        flags: dict = {}
        for s in samples:
            if s.flags:
                flags.setdefault(s.sequence, []).extend(s.flags)
        return cls(
            [s.beta for s in samples],
            [s.value for s in samples],
            sources.pop() if len(sources) == 1 else "external",
            [s.sequence for s in samples],
            flags,
        )

    def __len__(self) -> int:
        return self.beta.size

    def __getitem__(self, i) -> CharacteristicSample:
        seq = int(self.sequence[i])
        return CharacteristicSample(complex(self.beta[i]), complex(self.value[i]), self.source, seq,
                                    tuple(self.flags.get(seq, ())))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @property
    def flagged(self) -> list:
        return sorted(self.flags)

    def concat(self, other: "SampleSet") -> "SampleSet":
        offset = int(self.sequence.max(initial=-1)) + 1
        seq = np.where(other.sequence >= 0, other.sequence + offset, -1)
        flags = dict(self.flags)
        flags.update({k + offset: v for k, v in other.flags.items()})
        source = self.source if self.source == other.source else "external"
        return SampleSet(np.r_[self.beta, other.beta], np.r_[self.value, other.value], source,
                         np.r_[self.sequence, seq], flags)

    def completed(self) -> "SampleSet":
        """Add the mirror point -beta with conjugate value for every sample."""
        return SampleSet(np.r_[self.beta, -self.beta], np.r_[self.value, np.conj(self.value)],
                         self.source, np.r_[self.sequence, self.sequence], dict(self.flags))

    def hermiticity_residual(self) -> float:
        """Largest |chi(-beta) - chi(beta)^*| over sample pairs present in the set."""
        key = _point_keys(self.beta)
        lookup = dict(zip(key, range(len(key))))
        worst = 0.0
        for i, k in enumerate(_point_keys(-self.beta)):
            j = lookup.get(k)
            if j is not None:
                worst = max(worst, abs(self.value[j] - np.conj(self.value[i])))
        return worst

    def unique(self, tol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """Distinct points (merged within ``tol``) and their averaged values."""
        key = np.round(np.c_[self.beta.real, self.beta.imag] / tol).astype(np.int64)
        _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
        inverse = inverse.ravel()
        counts = np.bincount(inverse)
        values = (np.bincount(inverse, self.value.real) + 1j * np.bincount(inverse, self.value.imag)) / counts
        return self.beta[first], values


def _point_keys(beta: np.ndarray, tol: float = 1e-12) -> list:
    return [(int(round(b.real / tol)), int(round(b.imag / tol))) for b in beta]


def _analytic_block(p, probe, state, taus, start):
    """Samples for one equal-length block of sequences."""
    zeta = an.zeta_batch(p, taus)
    pre_plus = 2 * probe.coherence
    log_c = an.log_scaling_batch(p, taus)
    chi_plus = np.asarray(state.chi(zeta), dtype=complex)
    chi_minus = np.asarray(state.chi(-zeta), dtype=complex)
    # the readout <sigma_x -+ i sigma_y> = chi(+-zeta) e^{-log C} 2 psi psi^*
    # is formed in log space; only its size matters for flagging
    with np.errstate(divide="ignore"):
        log_signal = np.log(np.abs(chi_plus)) - log_c.real + math.log(abs(pre_plus))
    flags = {}
    for i in np.nonzero(log_signal < math.log(SIGNAL_FLOOR))[0]:
        flags[start + int(i)] = ["Pauli signal below double-precision floor"]
    ids = start + np.arange(taus.shape[0])
    return zeta, chi_plus, chi_minus, ids, flags


def _oracle_one(args):
    from . import oracle as o

    p, probe, family, rho0, dim, dephasing = args
    space = o.FockSpace(dim)
    seq = expand_family(family)
    zeta, pred, flags = o.oracle_chi_samples(space, p, probe, seq, rho0, dephasing)
    return zeta, pred.chi_plus, pred.chi_minus, list(flags)


def collect_samples(
    p: OscillatorParams,
    probe: ProbeAmplitudes,
    plan: SamplingPlan,
    state: ReferenceState,
    mode: str = "analytic",
    dim: int = 40,
    dephasing: float = 0.0,
    jobs: int = 1,
) -> SampleSet:
    """Characteristic-function samples at +zeta and -zeta for every sequence in ``plan``.

    Both signs are genuine readouts (C_+ and C_- channels); their mutual
    conjugacy is a consistency check, not an assumption.
    """
    an._probe_prefactors(probe)
    if mode not in ("analytic", "oracle"):
        raise ValueError(f"unknown sampling mode {mode!r}")
    zs, plus, minus, ids, flags = [], [], [], [], {}
    if mode == "analytic":
        start = 0
        for n in plan.n_values:
            z, cp, cm, i, f = _analytic_block(p, probe, state, plan.tau_batch(n), start)
            zs.append(z), plus.append(cp), minus.append(cm), ids.append(i)
            flags.update(f)
            start += z.size
    else:
        rho0 = density_matrix(state, dim)
        tasks = [(p, probe, fam, rho0, dim, dephasing) for fam in plan.families()]
        if jobs > 1:
            with ProcessPoolExecutor(max_workers=jobs) as pool:
                results = list(pool.map(_oracle_one, tasks))
        else:
            results = [_oracle_one(t) for t in tasks]
        for k, (z, cp, cm, f) in enumerate(results):
            zs.append([z]), plus.append([cp]), minus.append([cm]), ids.append([k])
            if f:
                flags[k] = f
    zeta = np.concatenate(zs)
    seq_ids = np.concatenate(ids)
    return SampleSet(
        np.r_[zeta, -zeta],
        np.r_[np.concatenate(plus), np.concatenate(minus)],
        mode,
        np.r_[seq_ids, seq_ids],
        flags,
    )


# -- interpolation --------------------------------------------------------


@dataclass(frozen=True)
class GridSpec:
    extent: float = DEFAULT_EXTENT
    spacing: float = DEFAULT_SPACING

    def __post_init__(self):
        if not (self.extent > 0 and self.spacing > 0):
            raise ValueError("grid extent and spacing must be positive")
        if self.spacing > self.extent:
            raise ValueError("grid spacing exceeds extent")

    @property
    def half(self) -> int:
        return int(round(self.extent / self.spacing))

    @property
    def axis(self) -> np.ndarray:
        return np.arange(-self.half, self.half + 1) * self.spacing

    @property
    def points(self) -> np.ndarray:
        """Complex grid; row index runs over Im(beta), column over Re(beta)."""
        ax = self.axis
        return ax[None, :] + 1j * ax[:, None]


@dataclass
class ChiGrid:
    grid: GridSpec
    values: np.ndarray
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        n = 2 * self.grid.half + 1
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != (n, n):
            raise ValueError(f"grid values must be {n}x{n}")

    @property
    def betas(self) -> np.ndarray:
        return self.grid.points


def grid_from_function(chi: Callable, grid: GridSpec | None = None) -> ChiGrid:
    grid = grid or GridSpec()
    return ChiGrid(grid, np.asarray(chi(grid.points), dtype=complex))


def uncovered_annuli(beta: np.ndarray, extent: float, width: float = 0.25) -> list[tuple[float, float]]:
    """Radial shells within ``extent`` that contain no sample point."""
    edges = np.arange(0.0, extent + width, width)
    counts, _ = np.histogram(np.abs(beta), bins=edges)
    return [(float(edges[k]), float(edges[k + 1])) for k in np.nonzero(counts == 0)[0]]


def _rank(points: np.ndarray) -> int:
    centered = points - points.mean(axis=0)
    s = np.linalg.svd(centered, compute_uv=False)
    return int(np.sum(s > 1e-9 * max(s[0], 1e-300)))


def build_interpolant(samples: SampleSet, method: str = "cubic", add_origin: bool = True):
    """Callable beta -> chi~(beta), exact at the sample points and 0 outside their hull."""
    if method not in ("cubic", "linear"):
        raise ValueError(f"unknown interpolation method {method!r}")
    beta, value = samples.unique()
    if add_origin and not np.any(np.abs(beta) < 1e-12):
        beta, value = np.r_[beta, 0j], np.r_[value, 1.0 + 0j]
    pts = np.c_[beta.real, beta.imag]
    if len(beta) < 4 or _rank(pts) < 2:
        raise CoverageError(
            f"need at least 4 non-collinear sample points, got {len(beta)}",
            uncovered_annuli(beta, max(float(np.abs(beta).max(initial=0)), 1.0)),
        )
    try:
        tri = Delaunay(pts)
    except QhullError:
        tri = None
    if tri is not None:
        cls = CloughTocher2DInterpolator if method == "cubic" else LinearNDInterpolator
        ip = cls(tri, value, fill_value=0.0)

        def chi(b):
            b = np.asarray(b, dtype=complex)
            return ip(b.real, b.imag)

        chi.kind = method
        return chi
    # points on curves can defeat the triangulation: fall back to a local RBF
    rbf = RBFInterpolator(pts, value, kernel="thin_plate_spline", neighbors=min(50, len(beta)))
    radius = float(np.abs(beta).max())

    def chi(b):
        b = np.asarray(b, dtype=complex)
        flat = b.ravel()
        out = np.zeros(flat.shape, dtype=complex)
        inside = np.abs(flat) <= radius
        if inside.any():
            out[inside] = rbf(np.c_[flat[inside].real, flat[inside].imag])
        return out.reshape(b.shape)

    chi.kind = "rbf"
    return chi


def interpolate_chi(samples: SampleSet, grid: GridSpec | None = None, method: str = "cubic") -> ChiGrid:
    """Gridded chi~ over [-L, L]^2 with Hermitian symmetry and chi~(0) = 1."""
    grid = grid or GridSpec()
    chi = build_interpolant(samples, method)
    raw = chi(grid.points)
    values = 0.5 * (raw + np.conj(raw[::-1, ::-1]))
    values[grid.half, grid.half] = 1.0
    beta, _ = samples.unique()
    pts = np.c_[beta.real, beta.imag]
    hull_radius = float(np.abs(beta).max())
    if len(beta) >= 3 and _rank(pts) == 2:
        hull = ConvexHull(pts)
        inner = np.abs(hull.equations[:, 2]).min()
    else:
        inner = 0.0
    diag = {
        "method": chi.kind,
        "points": int(len(beta)),
        "hull_radius": hull_radius,
        "hull_inradius": float(inner),
        "uncovered_annuli": uncovered_annuli(beta, min(grid.extent, hull_radius)),
        "hermitian_asymmetry": float(np.abs(raw - np.conj(raw[::-1, ::-1])).max()),
    }
    return ChiGrid(grid, values, diag)


# -- reconstruction -------------------------------------------------------


@lru_cache(maxsize=8)
def _momentum_eigensystem(big: int) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of i (a^dag - a) truncated to ``big`` levels."""
    off = np.sqrt(np.arange(1, big))
    gen = np.diag(1j * off, -1) + np.diag(-1j * off, 1)
    return np.linalg.eigh(gen)


def _enlarged_dim(d: int, rmax: float) -> int:
    # phase-space radius sqrt(d) + rmax, with margin for the Gaussian tails
    return max(2 * d, int(math.ceil(1.3 * (math.sqrt(d) + rmax) ** 2)) + 20)


def displacement_dagger_stack(betas: np.ndarray, d: int, chunk: int = 512) -> np.ndarray:
    """<m|D^dag(beta)|n> for every beta, from the spectral form of the generator.

    With beta = r e^{i theta}, D(beta) = R e^{r (a^dag - a)} R^dag where
    R = e^{i theta N}; the real-axis factor is exponentiated through the
    eigenbasis of i (a^dag - a) in an enlarged space, then truncated to d.
    """
    b = -np.asarray(betas, dtype=complex).ravel()
    out = np.empty((b.size, d, d), dtype=complex)
    if b.size == 0:
        return out
    r = np.abs(b)
    theta = np.angle(b)
    lam, vec = _momentum_eigensystem(_enlarged_dim(d, float(r.max())))
    top = vec[:d, :]
    top_h = top.conj().T
    k = np.arange(d)
    diff = k[:, None] - k[None, :]
    for s in range(0, b.size, chunk):
        ph = np.exp(-1j * r[s:s + chunk, None] * lam[None, :])
        core = (top[None, :, :] * ph[:, None, :]) @ top_h
        out[s:s + chunk] = core * np.exp(1j * theta[s:s + chunk, None, None] * diff[None])
    return out


def _rho_displacement_sum(chi: ChiGrid, d: int, chunk: int = 4096) -> np.ndarray:
    vals = chi.values.ravel()
    betas = chi.betas.ravel()
    keep = vals != 0
    vals, betas = vals[keep], betas[keep]
    rho = np.zeros((d, d), dtype=complex)
    for s in range(0, vals.size, chunk):
        mats = displacement_dagger_stack(betas[s:s + chunk], d)
        rho += np.tensordot(vals[s:s + chunk], mats, axes=(0, 0))
    return rho * chi.grid.spacing**2 / math.pi


def _rho_matrix_elements(chi: ChiGrid, d: int) -> np.ndarray:
    vals = chi.values.ravel()
    betas = chi.betas.ravel()
    keep = vals != 0
    vals, betas = vals[keep], betas[keep]
    rho = np.empty((d, d), dtype=complex)
    for n in range(d):
        for m in range(d):
            # <n|D^dag(beta)|m> = <n|D(-beta)|m>
            rho[n, m] = np.sum(vals * displacement_element(n, m, -betas))
    return rho * chi.grid.spacing**2 / math.pi


def project_density_matrix(rho: np.ndarray) -> np.ndarray:
    """Nearest unit-trace positive matrix in Frobenius norm (eigenvalue simplex projection)."""
    herm = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(herm)
    mu = np.sort(w)[::-1]
    cum = np.cumsum(mu) - 1.0
    idx = np.arange(1, len(mu) + 1)
    r = np.nonzero(mu - cum / idx > 0)[0][-1]
    shifted = np.maximum(w - cum[r] / (r + 1), 0.0)
    return (v * shifted) @ v.conj().T


@dataclass
class ReconstructionResult:
    rho_tilde: np.ndarray
    fidelity: float | None
    grid_spec: GridSpec
    residuals: dict
    flags: list = field(default_factory=list)
    fidelity_rho: float | None = None

    @property
    def nonphysical(self) -> bool:
        return any("nonphysical" in f for f in self.flags)


def check_tail(chi: ChiGrid, tol: float = TAIL_TOL) -> float:
    """Largest |chi~| on the outer ring of the grid relative to the peak."""
    v = np.abs(chi.values)
    peak = v.max()
    if peak == 0:
        return 0.0
    ring = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max())
    ratio = float(ring / peak)
    if ratio > tol:
        raise TailCoverageError(
            f"chi~ on the grid boundary is {ratio:.2e} of its peak (limit {tol:.1e}); enlarge the extent"
        )
    return ratio


def reconstruct_rho(
    chi: ChiGrid,
    d: int = DEFAULT_DIM,
    target: ReferenceState | None = None,
    paths: str = "both",
    project: bool = False,
    tail_tol: float = TAIL_TOL,
) -> ReconstructionResult:
    """rho~ = (dbeta^2 / pi) sum_j chi~(beta_j) D^dag(beta_j), Hermitized.

    ``paths`` selects the displacement-sum route, the Laguerre
    matrix-element route, or both (cross-checked).
    """
    if paths not in ("both", "sum", "elements"):
        raise ValueError(f"unknown reconstruction path {paths!r}")
    if d < 1:
        raise ValueError("output dimension must be >= 1")
    tail = check_tail(chi, tail_tol)
    flags = []
    residuals = {"tail_ratio": tail}
    rho_sum = _rho_displacement_sum(chi, d) if paths in ("both", "sum") else None
    rho_el = _rho_matrix_elements(chi, d) if paths in ("both", "elements") else None
    if rho_sum is not None and rho_el is not None:
        residuals["path_difference"] = float(np.abs(rho_sum - rho_el).max())
    raw = rho_sum if rho_sum is not None else rho_el
    residuals["hermiticity"] = float(np.abs(raw - raw.conj().T).max())
    rho = 0.5 * (raw + raw.conj().T)
    trace = float(np.trace(rho).real)
    eig = np.linalg.eigvalsh(rho)
    residuals["trace"] = trace
    residuals["min_eigenvalue"] = float(eig.min())
    residuals["negativity"] = float(-eig[eig < 0].sum())
    if not np.any(chi.values):
        flags.append("nonphysical: zero characteristic function")
    elif abs(trace - 1) > 1e-2:
        flags.append(f"nonphysical: trace {trace:.4f}")
    if residuals["negativity"] > 1e-3:
        flags.append(f"negative eigenvalues (total {residuals['negativity']:.2e})")
    if project and np.any(chi.values):
        rho = project_density_matrix(rho)
    result = ReconstructionResult(rho, None, chi.grid, residuals, flags)
    if target is not None:
        result.fidelity = fidelity(target.chi, chi)
        result.fidelity_rho = fidelity_pure(rho, target)
    return result


# -- fidelity -------------------------------------------------------------


def fidelity(chi_a, chi_b) -> float:
    """(1/pi) * integral chi_a chi_b^*, on a common grid.

    Either argument may be a ChiGrid or a callable; at least one must be a
    grid.
    """
    if isinstance(chi_a, ChiGrid) and isinstance(chi_b, ChiGrid):
        if chi_a.grid != chi_b.grid:
            raise GridMismatchError(f"grids differ: {chi_a.grid} vs {chi_b.grid}")
        grid = chi_a.grid
    elif isinstance(chi_a, ChiGrid):
        grid = chi_a.grid
    elif isinstance(chi_b, ChiGrid):
        grid = chi_b.grid
    else:
        raise GridMismatchError("need at least one gridded characteristic function")
    va = chi_a.values if isinstance(chi_a, ChiGrid) else np.asarray(chi_a(grid.points))
    vb = chi_b.values if isinstance(chi_b, ChiGrid) else np.asarray(chi_b(grid.points))
    return float((np.sum(va * np.conj(vb)) * grid.spacing**2 / math.pi).real)


def fidelity_pure(rho: np.ndarray, target: ReferenceState) -> float:
    """<phi|rho|phi> for a pure target."""
    phi = target.ket(rho.shape[0])
    return float(np.real(np.conj(phi) @ rho @ phi))


def fidelity_both(chi: ChiGrid, target: ReferenceState, d: int = DEFAULT_DIM) -> dict:
    res = reconstruct_rho(chi, d, target, paths="sum")
    return {"chi_overlap": res.fidelity, "pure_state": res.fidelity_rho}


# -- end-to-end -----------------------------------------------------------


def reconstruct_from_plan(
    p: OscillatorParams,
    plan: SamplingPlan,
    state: ReferenceState,
    probe: ProbeAmplitudes | None = None,
    grid: GridSpec | None = None,
    method: str = "cubic",
    d: int | None = DEFAULT_DIM,
    paths: str = "sum",
) -> tuple[ChiGrid, ReconstructionResult | None, float]:
    """Analytic samples -> chi~ grid -> (optionally) rho~; returns the chi-overlap fidelity too."""
    probe = probe or ProbeAmplitudes()
    samples = collect_samples(p, probe, plan, state, "analytic")
    chi = interpolate_chi(samples, grid, method)
    f = fidelity(state.chi, chi)
    result = None
    if d is not None:
        result = reconstruct_rho(chi, d, state, paths=paths)
    return chi, result, f


def fidelity_sweep(
    state: ReferenceState,
    gammas: Sequence[float],
    kinds: Sequence[str] = KINDS,
    n_caps: Sequence[int] = (20, 10),
    g: float = 0.075,
    tau_points: int = DEFAULT_TAU_POINTS,
    draws: int = DEFAULT_DRAWS,
    seed: int = 0,
    grid: GridSpec | None = None,
    method: str = "cubic",
) -> list[dict]:
    """Chi-overlap fidelity for every (kind, N-cap, gamma), in that nesting order."""
    rows = []
    for kind in kinds:
        base = SamplingPlan.sweep(kind, max(n_caps), tau_points, draws, seed)
        for cap in n_caps:
            plan = base if cap == max(n_caps) else base.capped(cap)
            if plan is not base:
                # share the drawn durations with the larger cap
                object.__setattr__(plan, "_batches", {n: base.tau_batch(n) for n in plan.n_values})
            for gamma in gammas:
                p = OscillatorParams(gamma=float(gamma), g=g)
                _, _, f = reconstruct_from_plan(p, plan, state, grid=grid, method=method, d=None)
                rows.append({"kind": kind, "n_max": cap, "gamma": float(gamma), "fidelity": f})
    return rows
