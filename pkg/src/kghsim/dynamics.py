"""Hartree nonlinearity, Strang time stepping, conserved functionals and a Picard solver.

The equation is ``phi_tt + (1 - Delta) phi + I(phi^2) phi = 0`` with
``I = (-Delta)^{(gamma-3)/2}``.  With dealiasing the discrete nonlinearity is
``P[ I(P(psi^2)) psi ]`` where ``psi = P phi`` and ``P`` is the 2/3-rule
projection; it is the exact gradient of the discrete quartic term
``(1/4) <I P(psi^2), P(psi^2)>``, so the Strang step below is a symplectic map
and the discrete Hamiltonian has no secular drift.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Literal

import numpy as np

from .propagator import (
    FieldSeries,
    Trajectory,
    _step_count,
    dispersion,
    duhamel_series,
    free_trajectory,
    sup_sobolev,
)
from .spectral import (
    CauchyPair,
    GridSpec,
    RealField,
    _irfft,
    _rfft,
    dealias_mask,
    half_spectrum_weights,
    riesz_symbol,
    wavenumber_squared,
)

Mode = Literal["full", "high", "perturbed"]


class SolverAbort(RuntimeError):
    """A time step produced non-finite values."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite state after step {step}")


class PicardDivergence(RuntimeError):
    """Picard iterates stopped contracting."""

    def __init__(self, factors):
        self.factors = list(factors)
        super().__init__(f"contraction factor >= 1 on three consecutive iterates: {self.factors[-3:]}")


@dataclass(frozen=True)
class SolverConfig:
    dt: float
    T: float
    scheme: str = "strang"
    dealias: bool = True

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.T < self.dt * (1 - 1e-12):
            raise ValueError(f"T={self.T} shorter than dt={self.dt}")
        _step_count(self.T, self.dt)
        if self.scheme != "strang":
            raise ValueError(f"unknown scheme {self.scheme!r}; only 'strang' is available")

    @property
    def steps(self) -> int:
        return _step_count(self.T, self.dt)


@dataclass(frozen=True)
class EnergyReport:
    E: float
    H: float
    quartic: float
    time_stamp: float = 0.0


class _Kernel:
    """Spectral-array workhorse for one grid; holds no state besides cached symbols."""

    def __init__(self, grid: GridSpec, gamma: float | None, dealias: bool):
        self.grid = grid
        self.P = dealias_mask(grid) if dealias else np.ones(grid.half_shape)
        self.I = riesz_symbol(grid, gamma)
        self.PI = self.P * self.I

    def real(self, spec):
        return _irfft(spec, self.grid)

    def potential(self, a, b):
        """Grid values of ``I P(a b)``."""
        return _irfft(_rfft(a * b, self.grid) * self.PI, self.grid)

    def full(self, spec):
        psi = self.real(spec * self.P)
        return _rfft(self.potential(psi, psi) * psi, self.grid) * self.P

    def perturbed(self, spec_u, spec_v):
        pu = self.real(spec_u * self.P)
        pv = self.real(spec_v * self.P)
        iuu = self.potential(pu, pu)
        iuv = self.potential(pu, pv)
        ivv = self.potential(pv, pv)
        total = (iuu + 2.0 * iuv + ivv) * pu + (iuu + 2.0 * iuv) * pv
        return _rfft(total, self.grid) * self.P

    def trilinear(self, s1, s2, s3):
        p1 = self.real(s1 * self.P)
        p2 = p1 if s2 is s1 else self.real(s2 * self.P)
        p3 = p1 if s3 is s1 else self.real(s3 * self.P)
        return _rfft(self.potential(p1, p2) * p3, self.grid) * self.P

    def quartic(self, spec):
        psi = self.real(spec * self.P)
        sq = _rfft(psi * psi, self.grid) * self.P
        w = half_spectrum_weights(self.grid)
        return 0.25 * float(np.sum(w * self.I * np.abs(sq) ** 2)) * self.grid.spectral_cell


def _kernel(grid, gamma=None, dealias=True) -> _Kernel:
    return _Kernel(grid, gamma, dealias)


def hartree_nonlinearity(phi: RealField, gamma: float | None = None, *, dealias: bool = True) -> RealField:
    """``I(phi^2) phi`` with 2/3-rule truncation before and after each product."""
    k = _kernel(phi.grid, gamma, dealias)
    return RealField._wrap_spectrum(phi.grid, k.full(phi.spectrum))


def perturbed_nonlinearity(u: RealField, v: RealField, gamma: float | None = None, *,
                           dealias: bool = True) -> RealField:
    """``I(u^2)u + 2I(uv)u + I(v^2)u + I(u^2)v + 2I(uv)v``.

    Satisfies ``N(u+v) = perturbed(u, v) + I(v^2)v`` exactly.
    """
    if u.grid != v.grid:
        raise ValueError("u and v live on different grids")
    k = _kernel(u.grid, gamma, dealias)
    return RealField._wrap_spectrum(u.grid, k.perturbed(u.spectrum, v.spectrum))


def interaction_term(a: RealField, b: RealField, c: RealField, gamma: float | None = None, *,
                     dealias: bool = True) -> RealField:
    """``I(a b) c``."""
    k = _kernel(a.grid, gamma, dealias)
    return RealField._wrap_spectrum(a.grid, k.trilinear(a.spectrum, b.spectrum, c.spectrum))


# ---------------------------------------------------------------- functionals

def energy(pair: CauchyPair) -> float:
    """``(1/2)||phi||_{H^1}^2 + (1/2)||phi_t||_{L^2}^2``."""
    return _energy_spec(pair.grid, pair.position.spectrum, pair.velocity.spectrum)


def _energy_spec(grid, p, v) -> float:
    w = half_spectrum_weights(grid)
    h1 = np.sum(w * (1.0 + wavenumber_squared(grid)) * np.abs(p) ** 2)
    l2 = np.sum(w * np.abs(v) ** 2)
    return 0.5 * float(h1 + l2) * grid.spectral_cell


def quartic_term(phi: RealField, gamma: float | None = None, *, dealias: bool = True) -> float:
    """``(1/4) <I(phi^2), phi^2>``, nonnegative since the multiplier is."""
    return _kernel(phi.grid, gamma, dealias).quartic(phi.spectrum)


def hamiltonian(pair: CauchyPair, gamma: float | None = None, *, dealias: bool = True) -> EnergyReport:
    e = energy(pair)
    q = quartic_term(pair.position, gamma, dealias=dealias)
    return EnergyReport(e, e + q, q, pair.time_stamp)


def energy_history(traj: Trajectory, gamma: float | None = None, *, dealias: bool = True,
                   with_quartic: bool = True) -> list[EnergyReport]:
    k = _kernel(traj.grid, gamma, dealias)
    out = []
    for i, t in enumerate(traj.times):
        e = _energy_spec(traj.grid, traj.positions[i], traj.velocities[i])
        q = k.quartic(traj.positions[i]) if with_quartic else 0.0
        out.append(EnergyReport(e, e + q, q, float(t)))
    return out


# ---------------------------------------------------------------- stepping

def _sample(series: FieldSeries, t: float) -> np.ndarray:
    """Linear interpolation of a series at time ``t`` (exact on sample points)."""
    x = (t - series.t0) / series.dt
    k = int(math.floor(x + 1e-9))
    if k < 0 or x > len(series) - 1 + 1e-9:
        raise ValueError(f"t={t} outside the sampled window of the background field")
    frac = x - k
    if frac < 1e-9 or k >= len(series) - 1:
        return series.spectra[min(k, len(series) - 1)]
    return (1.0 - frac) * series.spectra[k] + frac * series.spectra[k + 1]


def evolve(data: CauchyPair, config: SolverConfig, mode: Mode = "full",
           v: Trajectory | None = None, gamma: float | None = None) -> Trajectory:
    """Strang kick-drift-kick integration, sampled every step.

    ``mode`` selects the nonlinearity: ``"full"`` and ``"high"`` use
    ``I(phi^2)phi`` (the high-frequency equation has the same form),
    ``"perturbed"`` uses the five-term interaction with the background
    trajectory ``v``, linearly interpolated when its sampling differs.
    """
    grid = data.grid
    k = _kernel(grid, gamma, config.dealias)
    m = config.steps
    dt = config.dt
    if mode == "perturbed":
        if v is None:
            raise ValueError("perturbed mode needs the background trajectory v")
        if v.grid != grid:
            raise ValueError("background trajectory lives on another grid")
        if v.horizon < config.T * (1 - 1e-9):
            raise ValueError(f"background covers [0, {v.horizon}], need [0, {config.T}]")
        vs = v.position_series()

        def force(spec, t):
            return k.perturbed(spec, _sample(vs, t))
    elif mode in ("full", "high"):
        def force(spec, t):
            return k.full(spec)
    else:
        raise ValueError(f"unknown mode {mode!r}")

    w = dispersion(grid)
    c, s = np.cos(dt * w), np.sin(dt * w)
    s_over_w, w_s = s / w, w * s
    pos = np.empty((m + 1,) + grid.half_shape, dtype=complex)
    vel = np.empty_like(pos)
    p = np.array(data.position.spectrum)
    q = np.array(data.velocity.spectrum)
    pos[0], vel[0] = p, q
    t0 = data.time_stamp
    n_now = force(p, t0)
    for step in range(1, m + 1):
        q = q - 0.5 * dt * n_now
        p, q = c * p + s_over_w * q, -w_s * p + c * q
        n_now = force(p, t0 + step * dt)
        q = q - 0.5 * dt * n_now
        if not (np.isfinite(p).all() and np.isfinite(q).all()):
            raise SolverAbort(step)
        pos[step], vel[step] = p, q
    return Trajectory(grid, dt, pos, vel, t0, f"strang:{mode}")


# ---------------------------------------------------------------- Duhamel form

def trilinear_duhamel(u1: Trajectory, u2: Trajectory | None = None, u3: Trajectory | None = None,
                      gamma: float | None = None, *, dealias: bool = True) -> Trajectory:
    """``B(u1,u2,u3)(t) = -int_0^t K(t-tau) I(u1 u2) u3 dtau`` at every sample."""
    u2 = u1 if u2 is None else u2
    u3 = u1 if u3 is None else u3
    k = _kernel(u1.grid, gamma, dealias)
    same = u2 is u1 and u3 is u1
    forcing = np.empty_like(u1.positions)
    for i in range(len(u1)):
        a = u1.positions[i]
        if same:
            forcing[i] = k.full(a)
        else:
            forcing[i] = k.trilinear(a, u2.positions[i], u3.positions[i])
    pos, vel = duhamel_series(FieldSeries(u1.grid, u1.dt, forcing, u1.t0))
    return Trajectory(u1.grid, u1.dt, -pos, -vel, u1.t0, "duhamel")


def duhamel_residual(traj: Trajectory, gamma: float | None = None, *, dealias: bool = True) -> float:
    """``sup_t ||phi - [free part + B(phi,phi,phi)]||_2`` for a computed trajectory."""
    free = free_trajectory(traj[0], traj.horizon, traj.dt)
    b = trilinear_duhamel(traj, gamma=gamma, dealias=dealias)
    diff = traj.positions - free.positions - b.positions
    w = half_spectrum_weights(traj.grid)
    per = np.sum(w * np.abs(diff) ** 2, axis=(1, 2, 3)) * traj.grid.spectral_cell
    return float(np.sqrt(per.max()))


@dataclass
class PicardResult:
    trajectory: Trajectory
    distances: list = field(default_factory=list)
    factors: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    free_norm: float = 0.0
    final_norm: float = 0.0
    epsilon: float = 0.0

    @property
    def within_bound(self) -> bool:
        return self.final_norm <= 2.0 * self.epsilon


def _sup_l2(a: np.ndarray, grid: GridSpec) -> float:
    w = half_spectrum_weights(grid)
    per = np.sum(w * np.abs(a) ** 2, axis=(1, 2, 3)) * grid.spectral_cell
    return float(np.sqrt(per.max()))


def picard_solve(data: CauchyPair, config: SolverConfig, epsilon: float, max_iter: int = 50,
                 gamma: float | None = None, *, s0: float | None = None,
                 tol: float = 1e-10) -> PicardResult:
    """Fixed-point iteration ``v <- free(data) + B(v, v, v)`` on the sampled window.

    The monitored norm is ``sup_t H^{s0}`` (``s0 = gamma/6`` by default); the
    free part must not exceed ``epsilon`` in it.  Iteration stops when the
    ``sup_t L^2`` distance of successive iterates falls below
    ``tol * max(1, sup_t ||v||_2)``.
    """
    grid = data.grid
    g = grid.gamma if gamma is None else gamma
    s0 = g / 6.0 if s0 is None else s0
    free = free_trajectory(data, config.T, config.dt)
    free_norm = sup_sobolev(free, s0)
    if free_norm > epsilon * (1 + 1e-12):
        raise ValueError(f"free part has sup_t H^{s0:g} norm {free_norm:.4g} > epsilon={epsilon:.4g}")
    res = PicardResult(free, free_norm=free_norm, epsilon=epsilon)
    current = free
    prev_d = None
    for it in range(1, max_iter + 1):
        b = trilinear_duhamel(current, gamma=g, dealias=config.dealias)
        nxt = Trajectory(grid, config.dt, free.positions + b.positions,
                         free.velocities + b.velocities, data.time_stamp, "picard")
        d = _sup_l2(nxt.positions - current.positions, grid)
        res.distances.append(d)
        if prev_d is not None:
            res.factors.append(d / prev_d if prev_d > 0 else 0.0)
            if len(res.factors) >= 3 and all(f >= 1.0 for f in res.factors[-3:]):
                raise PicardDivergence(res.factors)
        current = nxt
        res.iterations = it
        if d < tol * max(1.0, _sup_l2(nxt.positions, grid)):
            res.converged = True
            break
        prev_d = d
    res.trajectory = current
    res.final_norm = sup_sobolev(current, s0)
    return res
