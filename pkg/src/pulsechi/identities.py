"""Superoperator identities of the protocol, checked on truncated Fock matrices.

Each check returns the residual of ``lhs - rhs`` in the bulk of the Fock
space (see ``oracle.bulk_residual``).
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from . import analytic as an
from . import oracle as o
from .model import OscillatorParams, ProbeAmplitudes, PulseSequence, total_time
from .states import chi_coherent, coherent_ket, displacement_matrices

# parameters chosen so that every term of every identity is switched on
SUITE_PARAMS = OscillatorParams(nu=1.0, gamma=0.05, nbar=0.3, g=0.2)
SUITE_TIME = 1.5
SUITE_SIGMAS = (0.3 + 0.2j, -0.5 + 0.4j, 0.8j)


def _disp(space, beta):
    return displacement_matrices(complex(beta), space.dim)


def sym_factorization(space, p=SUITE_PARAMS, t=SUITE_TIME) -> float:
    """exp(C_+- t) = D[-+eps] e^{Lt} D[+-eps]."""
    eps = an.epsilon(p)
    lt = o.liouvillian(space, p).expm(t)
    res = 0.0
    for s in (1, -1):
        lhs = o.generator_c(space, p, s).expm(t)
        rhs = o.superdisplacement_sym(space, -s * eps) @ lt @ o.superdisplacement_sym(space, s * eps)
        res = max(res, o.superop_residual(space, lhs, rhs))
    return res


def switch_relation(space, p=SUITE_PARAMS, t=SUITE_TIME, eps=0.3 * cmath.exp(0.7j)) -> float:
    return o.switch_identity_residual(space, p, eps, t)


def sym_free_then_shift(space, p=SUITE_PARAMS, t=SUITE_TIME) -> float:
    """exp(C_+- t) = D[-+eps(1 - e^{-i nu~ t})] e^{Lt}."""
    eps = an.epsilon(p)
    lt = o.liouvillian(space, p).expm(t)
    shift = eps * (1 - cmath.exp(-1j * p.nu_tilde * t))
    res = 0.0
    for s in (1, -1):
        lhs = o.generator_c(space, p, s).expm(t)
        rhs = o.superdisplacement_sym(space, -s * shift) @ lt
        res = max(res, o.superop_residual(space, lhs, rhs))
    return res


def _skew_phase(e: an.SkewParams, s: an.SkewParams) -> complex:
    return cmath.exp(
        (e.xi3 - e.xi2) * s.xi1
        + 0.5 * (
            e.xi2 * s.xi2.conjugate() - e.xi2.conjugate() * s.xi2
            - e.xi3 * s.xi3.conjugate() + e.xi3.conjugate() * s.xi3
        )
    )


def skew_product(space, seed=7, draws=3) -> float:
    """S[e] S[s] = phase(e, s) S[e + s] for random parameter pairs."""
    rng = np.random.default_rng(seed)
    res = 0.0
    for _ in range(draws):
        e, s = (an.SkewParams(*(0.3 * complex(*rng.normal(size=2)) for _ in range(3))) for _ in range(2))
        lhs = o.superdisplacement_skew(space, e) @ o.superdisplacement_skew(space, s)
        rhs = _skew_phase(e, s) * o.superdisplacement_skew(space, e + s)
        res = max(res, o.superop_residual(space, lhs, rhs))
    return res


def skew_inverse(space, p=SUITE_PARAMS) -> float:
    """S[xi] S[-xi] = e^{xi1 (xi2 - xi3)} I."""
    xi = an.skew_params(p)
    lhs = o.superdisplacement_skew(space, xi, 1) @ o.superdisplacement_skew(space, xi, -1)
    rhs = cmath.exp(xi.xi1 * (xi.xi2 - xi.xi3)) * o.identity_superop(space.dim)
    return o.superop_residual(space, lhs, rhs)


def skew_reduces_to_sym(space, eps=0.25 - 0.1j) -> float:
    lhs = o.superdisplacement_skew(space, an.SkewParams(0, eps, eps))
    return o.superop_residual(space, lhs, o.superdisplacement_sym(space, eps))


def skew_factorization(space, p=SUITE_PARAMS, t=SUITE_TIME) -> float:
    """exp(A_+- t) = e^{-Gamma t} e^{xi1 (xi3 - xi2)} S[-+xi] e^{Lt} S[+-xi]."""
    xi = an.skew_params(p)
    pref = cmath.exp(-an.gamma_interference(p) * t + xi.xi1 * (xi.xi3 - xi.xi2))
    lt = o.liouvillian(space, p).expm(t)
    res = 0.0
    for s in (1, -1):
        lhs = o.generator_a(space, p, s).expm(t)
        rhs = pref * (o.superdisplacement_skew(space, xi, -s) @ lt @ o.superdisplacement_skew(space, xi, s))
        res = max(res, o.superop_residual(space, lhs, rhs))
    return res


def skew_on_displacement(space, e=an.SkewParams(-0.05j, 0.2 + 0.1j, -0.15 + 0.05j), sigmas=SUITE_SIGMAS) -> float:
    """Action of S[e] on D(sigma): prefactors times D(sigma + e2 - e3)."""
    e1, e2, e3 = e.as_tuple()
    op = o.superdisplacement_skew(space, e)
    res = 0.0
    for sg in sigmas:
        pref = cmath.exp(
            e1 * (e2 - e3)
            + 0.5 * (e2.conjugate() * e3 - e2 * e3.conjugate())
            + 0.5 * ((e2 + e3) * sg.conjugate() - (e2 + e3).conjugate() * sg)
            + e1 * sg
        )
        res = max(res, o.bulk_residual(space, op(_disp(space, sg)), pref * _disp(space, sg + e2 - e3)))
    return res


def thermalized_displacement(space, p=SUITE_PARAMS, t=SUITE_TIME, sigmas=SUITE_SIGMAS) -> float:
    """e^{Lt} D(s) = e^{gamma t} e^{-nbar(t)|s(t)|^2} D(s(t)), s(t) = s e^{-i nu~^* t}."""
    lv = o.liouvillian(space, p)
    res = 0.0
    for sg in sigmas:
        st = sg * cmath.exp(-1j * p.nu_tilde.conjugate() * t)
        pref = math.exp(p.gamma * t - an.nbar_t(p, t) * abs(st) ** 2)
        res = max(res, o.bulk_residual(space, lv.propagate(_disp(space, sg), t), pref * _disp(space, st)))
    return res


def segment_on_displacement(space, p=SUITE_PARAMS, t=SUITE_TIME, sigmas=SUITE_SIGMAS) -> float:
    """One pulse-sequence segment e^{A-+t} e^{A+-t} acting on D(sigma)."""
    w = p.nu_tilde.conjugate()
    eps_c = an.epsilon(p).conjugate()
    gam = an.gamma_interference(p)
    abs2 = abs(p.nu_tilde) ** 2
    res = 0.0
    for s in (1, -1):
        first, second = o.generator_a(space, p, s), o.generator_a(space, p, -s)
        for sg in sigmas:
            lhs = second.propagate(first.propagate(_disp(space, sg), t), t)
            pref = cmath.exp(2 * (p.gamma - gam) * t + gam * p.gamma / abs2 + an.f_exponent(p, t, s * sg))
            arg = sg * cmath.exp(-2j * w * t) + s * 2 * eps_c * (1 - cmath.exp(-1j * w * t)) ** 2
            res = max(res, o.bulk_residual(space, lhs, pref * _disp(space, arg)))
    return res


def sym_on_displacement(space, eps=0.3 - 0.2j, sigmas=SUITE_SIGMAS) -> float:
    """D[eps] D^dag(s) = e^{eps^* s - eps s^*} D^dag(s)."""
    op = o.superdisplacement_sym(space, eps)
    res = 0.0
    for sg in sigmas:
        ddag = _disp(space, -sg)
        pref = cmath.exp(eps.conjugate() * sg - eps * sg.conjugate())
        res = max(res, o.bulk_residual(space, op(ddag), pref * ddag))
    return res


def sequence_on_displacement(space, p=SUITE_PARAMS, seq: PulseSequence | None = None, betas=(0.2 + 0.1j, -0.3j)) -> float:
    """Full off-diagonal propagator V_+-[tau] acting on D^dag(beta)."""
    if seq is None:
        seq = PulseSequence([0.7, 1.9, 1.1])
    w = p.nu_tilde.conjugate()
    gam = an.gamma_interference(p)
    big_t = total_time(seq)
    n = len(seq)
    z = an.zeta(p, seq)
    res = 0.0
    for beta in betas:
        ops = _disp(space, -beta)[None]
        props = o.sequence_propagators(space, p, seq, ops)
        for s, key in ((1, "V+"), (-1, "V-")):
            fsum = sum(an.f_exponent(p, tau, an.beta_n(p, seq, beta, k + 1, s)) for k, tau in enumerate(seq.taus))
            pref = cmath.exp((p.gamma - gam) * big_t + n * gam * p.gamma / abs(p.nu_tilde) ** 2 + fsum)
            rhs = pref * _disp(space, -cmath.exp(-1j * w * big_t) * (beta - s * z))
            res = max(res, o.bulk_residual(space, props[key][0], rhs))
    return res


def diagonal_propagator(space, p=SUITE_PARAMS, seq: PulseSequence | None = None) -> float:
    """U_+-[tau] = D[+-upsilon] e^{LT}."""
    if seq is None:
        seq = PulseSequence([0.7, 1.9, 1.1])
    ops = o.test_operators(space)
    props = o.sequence_propagators(space, p, seq, ops)
    free = o.liouvillian(space, p).propagate(ops, total_time(seq))
    ups = an.upsilon(p, seq)
    res = 0.0
    for s, key in ((1, "U+"), (-1, "U-")):
        res = max(res, o.bulk_residual(space, props[key], o.superdisplacement_sym(space, s * ups)(free)))
    return res


def appendix_a(p=SUITE_PARAMS) -> float:
    """Scalar relations between xi, eps and Gamma, including the general Gamma(xi) expression."""
    xi = an.skew_params(p)
    x1, x2, x3 = xi.as_tuple()
    eps = an.epsilon(p)
    gam = an.gamma_interference(p)
    nu, g, ga, nb = p.nu, p.g, p.gamma, p.nbar
    gamma_general = (
        (1j * nu + (2 * nb + 1) * ga / 2) * x2 * (x2.conjugate() - x1)
        - (nb + 1) * ga * x2 * (x3.conjugate() - x1)
        - (1j * nu - (2 * nb + 1) * ga / 2) * x3 * (x3.conjugate() - x1)
        - nb * ga * x3 * (x2.conjugate() - x1)
        - 0.5j * g * (x2 + x2.conjugate() + x3 + x3.conjugate() - 2 * x1)
    )
    system = np.array([
        [2 * nu - 1j * (2 * nb + 1) * ga, 2j * nb * ga],
        [2j * (nb + 1) * ga, -2 * nu - 1j * (2 * nb + 1) * ga],
    ])
    lin = system @ np.array([x2, x3]) - g
    return max(
        abs(x2 - x3 - 2 * eps.conjugate()),
        abs(gam - 0.5j * g * x1),
        abs(gamma_general - gam),
        float(np.max(np.abs(lin))),
    )


def main_relation(space, p=SUITE_PARAMS, seq: PulseSequence | None = None, alpha=0.4 - 0.3j) -> float:
    """Oracle C_+-<sigma_x -+ i sigma_y> against chi(+-zeta) of a coherent state."""
    seq = seq or PulseSequence([0.7, 1.9, 1.1])
    ket = coherent_ket(alpha, space.dim)
    rho0 = np.outer(ket, ket.conj())
    zeta, pred, _ = o.oracle_chi_samples(space, p, ProbeAmplitudes(), seq, rho0)
    return max(abs(pred.chi_plus - chi_coherent(alpha, zeta)), abs(pred.chi_minus - chi_coherent(alpha, -zeta)))


@dataclass(frozen=True)
class Identity:
    key: str
    label: str
    check: object
    uses_space: bool = True
    uses_params: bool = True


IDENTITIES = (
    Identity("eq13", "exp(C t) = D[-eps] e^{Lt} D[eps]", sym_factorization),
    Identity("eq14", "e^{Lt} D[eps] = D[eps e^{-i nu~ t}] e^{Lt}", switch_relation),
    Identity("eq15", "exp(C t) = D[-eps(1-e^{-i nu~ t})] e^{Lt}", sym_free_then_shift),
    Identity("eq16", "U[tau] = D[upsilon] e^{LT}", diagonal_propagator),
    Identity("eq19", "S[e] S[s] = phase S[e+s]", skew_product, uses_params=False),
    Identity("eq19-inverse", "S[xi] S[-xi] = e^{xi1(xi2-xi3)} I", skew_inverse),
    Identity("eq19-special", "S[(0,eps,eps)] = D[eps]", skew_reduces_to_sym, uses_params=False),
    Identity("eq24", "exp(A t) = e^{-Gamma t} ... S[-xi] e^{Lt} S[xi]", skew_factorization),
    Identity("eq26", "S[e] D(s) = prefactor D(s + e2 - e3)", skew_on_displacement, uses_params=False),
    Identity("eq27", "e^{Lt} D(s) = e^{gamma t - nbar(t)|s(t)|^2} D(s(t))", thermalized_displacement),
    Identity("eq29", "e^{A-t} e^{A+t} D(s) = e^{... + f(t, s)} D(...)", segment_on_displacement),
    Identity("eq35", "V[tau] D^dag(beta) = e^{...} D^dag(e^{-i nu~* T}(beta - zeta))", sequence_on_displacement),
    Identity("eq37", "C+-<sigma_x -+ i sigma_y> = chi(+-zeta)", main_relation),
    Identity("eqC2", "D[eps] D^dag(s) = e^{eps* s - eps s*} D^dag(s)", sym_on_displacement, uses_params=False),
    Identity("appA", "xi2 - xi3 = 2 eps*, Gamma = i g xi1 / 2, Gamma(xi)", appendix_a, uses_space=False),
)

IDENTITY_KEYS = {ident.key: ident for ident in IDENTITIES}


def run_identities(space: o.FockSpace, p: OscillatorParams | None = None, keys=None) -> dict:
    """Residual of every identity (or of ``keys``) at truncation ``space``."""
    out = {}
    for ident in IDENTITIES:
        if keys is not None and ident.key not in keys:
            continue
        kwargs = {"p": p} if p is not None and ident.uses_params else {}
        if ident.uses_space:
            out[ident.key] = float(ident.check(space, **kwargs))
        else:
            out[ident.key] = float(ident.check(**kwargs))
    return out


CONVERGENCE_DIMS = (30, 40, 50, 60)
DEFAULT_TOL = 1e-6
# residuals this small are rounding noise; ordering below it is meaningless
ROUNDOFF_FLOOR = 1e-12


def convergence_study(dims=CONVERGENCE_DIMS, p: OscillatorParams | None = None, keys=None,
                      tol: float = DEFAULT_TOL, floor: float = ROUNDOFF_FLOOR) -> dict:
    """Residuals of each identity over increasing truncations.

    An identity counts as converged when its residual at the largest
    dimension is below ``tol``, and as monotone when no residual rises above
    its predecessor by more than the rounding floor.
    """
    dims = sorted(int(d) for d in dims)
    if not dims:
        raise ValueError("need at least one truncation")
    per_dim = [run_identities(o.FockSpace(d), p, keys) for d in dims]
    report = {}
    for key in per_dim[0]:
        res = [r[key] for r in per_dim]
        monotone = all(b <= max(a, floor) for a, b in zip(res, res[1:]))
        report[key] = {
            "label": IDENTITY_KEYS[key].label,
            "dims": dims,
            "residuals": res,
            "converged": res[-1] < tol,
            "monotone": monotone,
        }
    return report
