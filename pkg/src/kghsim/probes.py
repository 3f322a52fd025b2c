"""Measured-constant probes for the inequalities used by the splitting argument.

Every probe returns a ratio LHS / RHS.  Constants are never asserted; sweeps
report max, min and their quotient.  Where a bound is stated in terms of a
resolution-space norm of ``v`` the probes use ``sup_t H^alpha`` or
``sup_t H^beta`` instead (recorded in each report's ``note``).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .data import gaussian_bump
from .dynamics import _kernel, trilinear_duhamel
from .littlewood_paley import UndefinedRatio, block, build_bank, low_pass
from .propagator import (
    AdmissibleTriple,
    Trajectory,
    free_trajectory,
    resolution_norm,
    sup_sobolev,
    time_norm,
    trapezoid_weights,
)
from .spectral import (
    CauchyPair,
    GridSpec,
    RealField,
    _irfft,
    _rfft,
    gradient_norm,
    lebesgue_norm,
    riesz_potential,
)
from .splitting import derive_exponents, gate_terms

PROXY_NOTE = "v norms: sup_t H^alpha / H^beta in place of resolution-space norms"


@dataclass(frozen=True)
class ProbeReport:
    probe: str
    params: dict
    ratios: tuple
    seed: int | None = None
    note: str = ""

    def __post_init__(self):
        if any(not (r >= 0) for r in self.ratios):
            raise ValueError("probe ratios must be nonnegative")

    @property
    def max(self) -> float:
        return float(np.max(self.ratios))

    @property
    def min(self) -> float:
        return float(np.min(self.ratios))

    @property
    def maxmin_ratio(self) -> float:
        lo = self.min
        return self.max / lo if lo > 0 else math.inf

    @property
    def all_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.ratios)))


# ---------------------------------------------------------------- HLS

def hls_exponent(p: float, gamma: float) -> float:
    """Target exponent ``q`` with ``1/q = 1/p - (3-gamma)/3``."""
    inv = 1.0 / p - (3.0 - gamma) / 3.0
    if inv <= 0:
        raise ValueError(f"p={p}, gamma={gamma} gives 1/q={inv:.4g} <= 0 (q infinite or negative)")
    q = 1.0 / inv
    if not (1.0 < p < q):
        raise ValueError(f"need 1 < p < q, got p={p}, q={q}")
    return q


def hls_ratio(f: RealField, p: float, gamma: float | None = None) -> float:
    """``||I f||_q / ||f||_p`` for the paired exponent ``q``."""
    g = f.grid.gamma if gamma is None else gamma
    q = hls_exponent(p, g)
    den = lebesgue_norm(f, p)
    if den == 0:
        raise UndefinedRatio("zero input")
    return lebesgue_norm(riesz_potential(f, g), q) / den


def mean_free_gaussians(grid: GridSpec, count: int, seed: int,
                        width_range=(0.4, 1.0)) -> list[RealField]:
    """Randomly placed Gaussians of random width with the mean removed."""
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(count):
        c = tuple(rng.uniform(0.0, grid.box_length, 3))
        w = rng.uniform(*width_range)
        f = gaussian_bump(grid, 1.0, w, c)
        out.append(RealField(grid, f.values - f.values.mean()))
    return out


def hls_sweep(grid: GridSpec, count: int = 100, seed: int = 0, p: float = 2.0,
              gamma: float | None = None) -> ProbeReport:
    g = grid.gamma if gamma is None else gamma
    ratios = tuple(hls_ratio(f, p, g) for f in mean_free_gaussians(grid, count, seed))
    return ProbeReport("hls", {"p": p, "q": hls_exponent(p, g), "gamma": g, "count": count},
                       ratios, seed)


# ---------------------------------------------------------------- trilinear

def trilinear_ratio(v: CauchyPair | Trajectory, mu: float, triples: Sequence[AdmissibleTriple],
                    horizon: float | None = None, dt: float | None = None,
                    gamma: float | None = None) -> float:
    """``|B(v,v,v)|_mu / (|v|_mu |v|_{s0}^2)`` with the finite resolution norm."""
    if isinstance(v, CauchyPair):
        if horizon is None or dt is None:
            raise ValueError("horizon and dt are required to evolve Cauchy data")
        v = free_trajectory(v, horizon, dt)
    g = v.grid.gamma if gamma is None else gamma
    s0 = derive_exponents(g).s0
    den = resolution_norm(v, mu, triples) * resolution_norm(v, s0, triples) ** 2
    if den == 0:
        raise UndefinedRatio("zero data")
    return resolution_norm(trilinear_duhamel(v, gamma=g), mu, triples) / den


# ---------------------------------------------------------------- local interaction terms

LOCAL_TERMS = ("I(u^2)u", "I(uv)u", "I(v^2)u", "I(u^2)v", "I(uv)v")


def _l1_l2(series_values: list[np.ndarray], grid: GridSpec, dt: float) -> float:
    norms = [math.sqrt(float(np.sum(a * a)) * grid.cell_volume) for a in series_values]
    return time_norm(norms, 1.0, dt)


def local_nonlinear_ratios(u: Trajectory, v: Trajectory, gamma: float | None = None,
                           T: float | None = None) -> dict:
    """LHS / RHS for the five interaction terms, measured in ``L^1_T L^2``.

    Bounds: ``T |u|^3``, ``T^{(5-g)/3} |u|^2 |v|_alpha`` for ``I(uv)u`` and
    ``I(u^2)v``, ``T^{(4-g)/3} |u| |v|_beta^2`` for ``I(v^2)u`` and ``I(uv)v``,
    with ``|u| = sup_t H^1``.  Zero denominators give ``nan`` for that term.
    """
    if u.grid != v.grid or len(u) != len(v) or abs(u.dt - v.dt) > 1e-12:
        raise ValueError("u and v must share grid and sampling")
    grid = u.grid
    g = grid.gamma if gamma is None else gamma
    if T is None:
        T = u.horizon
    elif abs(T - u.horizon) > 1e-9 * max(1.0, T):
        raise ValueError(f"T={T} differs from the trajectory horizon {u.horizon}")
    e = derive_exponents(g)
    k = _kernel(grid, g, True)
    terms = {name: [] for name in LOCAL_TERMS}
    for i in range(len(u)):
        pu = k.real(u.positions[i] * k.P)
        pv = k.real(v.positions[i] * k.P)
        iuu, iuv, ivv = k.potential(pu, pu), k.potential(pu, pv), k.potential(pv, pv)
        for name, val in zip(LOCAL_TERMS, (iuu * pu, iuv * pu, ivv * pu, iuu * pv, iuv * pv)):
            terms[name].append(_irfft(_rfft(val, grid) * k.P, grid))
    nu = sup_sobolev(u, 1.0)
    na = sup_sobolev(v, e.alpha)
    nb = sup_sobolev(v, e.beta)
    bounds = {
        "I(u^2)u": T * nu ** 3,
        "I(uv)u": T ** ((5 - g) / 3) * nu ** 2 * na,
        "I(v^2)u": T ** ((4 - g) / 3) * nu * nb ** 2,
        "I(u^2)v": T ** ((5 - g) / 3) * nu ** 2 * na,
        "I(uv)v": T ** ((4 - g) / 3) * nu * nb ** 2,
    }
    out = {}
    for name in LOCAL_TERMS:
        lhs = _l1_l2(terms[name], grid, u.dt)
        out[name] = lhs / bounds[name] if bounds[name] > 0 else math.nan
    return out


# ---------------------------------------------------------------- commutator

@dataclass(frozen=True)
class CommutatorResult:
    residual: RealField
    norm: float
    proxy: float

    @property
    def gain(self) -> float:
        return self.proxy / self.norm if self.norm > 0 else math.inf


def commutator_residual(v: RealField, u: RealField, j: int, gamma: float | None = None) -> CommutatorResult:
    """``I(Delta_j v S_{j-1}u) - I(Delta_j v) S_{j-1}u`` and its ``L^2`` norm.

    ``proxy`` is the no-cancellation size ``||I(Delta_j v S_{j-1}u)|| + ||I(Delta_j v) S_{j-1}u||``.
    """
    if j < 2:
        raise ValueError("need j >= 2 so that S_{j-1} is nontrivial")
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    g = v.grid.gamma if gamma is None else gamma
    bank = build_bank(v.grid)
    bv = block(v, j, bank)
    su = low_pass(u, j - 1, bank)
    first = riesz_potential(bv.pointwise(su), g, check_mean=False)
    second = riesz_potential(bv, g, check_mean=False).pointwise(su)
    res = first - second
    return CommutatorResult(res, lebesgue_norm(res, 2),
                            lebesgue_norm(first, 2) + lebesgue_norm(second, 2))


def commutator_bound_check(v: RealField, u: RealField, j: int, r: float,
                           gamma: float | None = None) -> float:
    """``||residual||_2 / (2^{j(gamma-4+3/r)} ||Delta_j v||_r ||grad u||_2)``."""
    if not (2.0 < r < math.inf):
        raise ValueError(f"need 2 < r < inf, got {r}")
    g = v.grid.gamma if gamma is None else gamma
    res = commutator_residual(v, u, j, g)
    den = 2.0 ** (j * (g - 4.0 + 3.0 / r)) * lebesgue_norm(block(v, j), r) * gradient_norm(u)
    if den == 0:
        raise UndefinedRatio("vanishing denominator")
    return res.norm / den


# ---------------------------------------------------------------- symbol

@dataclass(frozen=True)
class SymbolCertificate:
    lower: float
    upper: float
    observed_min: float
    observed_max: float
    samples: int

    @property
    def holds(self) -> bool:
        return self.lower <= self.observed_min and self.observed_max <= self.upper


def coifman_meyer_symbol(xi1, xi2, lam, gamma: float, j: int):
    """Magnitude ``|xi1 + lam xi2|^{gamma-4} |xi1|^{4-gamma}`` and its a priori band.

    Inputs broadcast over leading axes; the last axis has length 3.  Requires
    ``|xi1| >= 2^{j-1}``, ``|xi2| <= 2^{j-2}``, ``0 <= lam <= 1``, under which
    ``|xi1 + lam xi2|`` lies in ``[|xi1|/2, 3|xi1|/2]`` and the magnitude lies in
    ``[(2/3)^{4-gamma}, 2^{4-gamma}]``.
    """
    xi1 = np.asarray(xi1, float)
    xi2 = np.asarray(xi2, float)
    lam = np.asarray(lam, float)
    n1 = np.linalg.norm(xi1, axis=-1)
    n2 = np.linalg.norm(xi2, axis=-1)
    tol = 1e-12 * 2.0 ** j
    if np.any(n1 < 2.0 ** (j - 1) - tol) or np.any(n2 > 2.0 ** (j - 2) + tol):
        raise ValueError(f"frequencies outside the regime |xi1| >= 2^{j - 1}, |xi2| <= 2^{j - 2}")
    if np.any(lam < 0) or np.any(lam > 1):
        raise ValueError("lambda must lie in [0, 1]")
    shifted = np.linalg.norm(xi1 + lam[..., None] * xi2, axis=-1)
    mag = shifted ** (gamma - 4.0) * n1 ** (4.0 - gamma)
    lo, hi = (2.0 / 3.0) ** (4.0 - gamma), 2.0 ** (4.0 - gamma)
    cert = SymbolCertificate(lo, hi, float(np.min(mag)), float(np.max(mag)), int(np.size(mag)))
    return mag, cert


def sample_symbol_regime(j: int, count: int, seed: int = 0):
    """Random ``(xi1, xi2, lam)`` inside the support regime at level ``j``."""
    rng = np.random.default_rng(seed)

    def directions(m):
        d = rng.standard_normal((m, 3))
        return d / np.linalg.norm(d, axis=1, keepdims=True)

    r1 = 2.0 ** (j - 1) * rng.uniform(1.0, 4.0, count)
    r2 = 2.0 ** (j - 2) * rng.uniform(0.0, 1.0, count)
    # Include the worst alignment: xi2 antiparallel to xi1 at full length.
    d1 = directions(count)
    d2 = directions(count)
    d2[: count // 4] = -d1[: count // 4]
    r2[: count // 4] = 2.0 ** (j - 2)
    r1[: count // 4] = 2.0 ** (j - 1)
    lam = rng.uniform(0.0, 1.0, count)
    lam[: count // 8] = 1.0
    return d1 * r1[:, None], d2 * r2[:, None], lam


# ---------------------------------------------------------------- space-time bounds

@dataclass
class SpaceTimeBoundReport:
    J: int
    T: float
    integral_u2v: float
    integral_uvu: float
    rhs_first: float
    rhs_second: float
    E_T: float
    hypothesis_proxy: float
    warnings: list = field(default_factory=list)

    @property
    def ratio_first(self) -> float:
        return abs(self.integral_u2v) / self.rhs_first if self.rhs_first > 0 else math.nan

    @property
    def ratio_second(self) -> float:
        return abs(self.integral_uvu) / self.rhs_second if self.rhs_second > 0 else math.nan


HYPOTHESIS_WARN = 10.0


def lemma6_bound_check(u: Trajectory, v_data: CauchyPair, J: int, s: float, gamma: float,
                       r1: float, r2: float, E_s: float) -> SpaceTimeBoundReport:
    """Space-time integrals of ``I(u^2) v_F u_t`` and ``I(u v_F) u u_t`` against their bounds.

    ``v_F`` is the free evolution of ``v_data`` on the sampling of ``u``.
    The bounds are, with ``g_r = gamma/2 - 3/4 + 1/(2r)``,
    ``(T^{1/2+1/r1} 2^{-2J(s-g_r1)} + T^{1/2+1/r2} 2^{-2J(s-g_r2)} + T 2^{-2J(s-1/2)}) E_s^2 E_T(u)``
    and ``T^{1/2+1/r2} 2^{-2J(s-g_r2)} E_s^2 E_T(u)``.  A warning is attached
    when ``E_T(u) / (2^{2J(1-s)} (E_s^2 + E_s^4))`` exceeds 10.
    """
    from .dynamics import energy_history

    grid = u.grid
    T = u.horizon
    vf = free_trajectory(v_data, T, u.dt)
    k = _kernel(grid, gamma, True)
    first, second = [], []
    for i in range(len(u)):
        pu = k.real(u.positions[i] * k.P)
        ut = k.real(u.velocities[i])
        pv = k.real(vf.positions[i] * k.P)
        first.append(float(np.sum(k.potential(pu, pu) * pv * ut)) * grid.cell_volume)
        second.append(float(np.sum(k.potential(pu, pv) * pu * ut)) * grid.cell_volume)
    w = trapezoid_weights(len(u), u.dt)
    i1 = float(np.dot(w, first))
    i2 = float(np.dot(w, second))
    e_t = max(r.E for r in energy_history(u, with_quartic=False))
    t = gate_terms(gamma, r1, r2)
    scale = E_s ** 2 * e_t
    lead2 = T ** (0.5 + 1.0 / r2) * 2.0 ** (-2 * J * (s - t["r2"]))
    rhs1 = (T ** (0.5 + 1.0 / r1) * 2.0 ** (-2 * J * (s - t["r1"])) + lead2
            + T * 2.0 ** (-2 * J * (s - 0.5))) * scale
    rhs2 = lead2 * scale
    den = 2.0 ** (2 * J * (1 - s)) * (E_s ** 2 + E_s ** 4)
    proxy = e_t / den if den > 0 else math.inf
    rep = SpaceTimeBoundReport(J, T, i1, i2, rhs1, rhs2, e_t, proxy)
    if proxy > HYPOTHESIS_WARN:
        msg = f"energy hypothesis proxy {proxy:.3g} exceeds {HYPOTHESIS_WARN:g} at J={J}"
        rep.warnings.append(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return rep
