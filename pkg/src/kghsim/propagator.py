"""Free Klein-Gordon flow, Duhamel integrals, admissible triples and space-time norms."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .littlewood_paley import (
    BallWindow,
    BesovParams,
    UndefinedRatio,
    ball_localize,
    besov_norm,
)
from .spectral import (
    CauchyPair,
    GridSpec,
    RealField,
    half_spectrum_weights,
    lebesgue_norm,
    wavenumber_squared,
)


def dispersion(grid: GridSpec) -> np.ndarray:
    """``omega(xi) = sqrt(1 + |xi|^2)`` on the half-spectrum lattice."""
    return np.sqrt(1.0 + wavenumber_squared(grid))


def _inv(x: float) -> float:
    return 0.0 if x == math.inf else 1.0 / x


# ---------------------------------------------------------------- admissibility

def _exact(x) -> Fraction | None:
    if x == math.inf:
        return None
    return Fraction(x)


def validate_admissible(q: float, r: float, theta: float) -> bool:
    """Check ``q, r >= 2``, ``(q, r, theta) != (2, inf, 0)`` and
    ``1/q + (2+theta)/(2r) <= (2+theta)/4`` in exact rational arithmetic."""
    for v in (q, r, theta):
        if isinstance(v, float) and math.isnan(v):
            return False
    if not (0 <= theta <= 1) or q < 2 or r < 2:
        return False
    if q == 2 and r == math.inf and theta == 0:
        return False
    fq, fr, ft = _exact(q), _exact(r), Fraction(theta)
    inv_q = Fraction(0) if fq is None else 1 / fq
    inv_r = Fraction(0) if fr is None else 1 / fr
    return inv_q + (2 + ft) * inv_r / 2 <= (2 + ft) / 4


@dataclass(frozen=True)
class AdmissibleTriple:
    q: float
    r: float
    theta: float
    valid: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "valid", validate_admissible(self.q, self.r, self.theta))

    def require_valid(self) -> "AdmissibleTriple":
        if not self.valid:
            raise ValueError(f"triple (q={self.q}, r={self.r}, theta={self.theta}) is not admissible")
        return self

    def sigma(self, mu: float) -> float:
        """Regularity index solving ``1/q = (3+theta)(1/2-1/r) + sigma - mu``."""
        return mu + _inv(self.q) - (3.0 + self.theta) * (0.5 - _inv(self.r))

    def strichartz_exponent(self) -> float:
        """``(3+theta)/2 - (3+theta)/r - 1/q``."""
        return (3.0 + self.theta) * (0.5 - _inv(self.r)) - _inv(self.q)


# ---------------------------------------------------------------- time series

@dataclass(frozen=True)
class FieldSeries:
    """Uniformly sampled scalar field ``f(t_0 + k dt)``, stored as half spectra."""

    grid: GridSpec
    dt: float
    spectra: np.ndarray
    t0: float = 0.0

    def __post_init__(self):
        if self.spectra.ndim != 4 or self.spectra.shape[1:] != self.grid.half_shape:
            raise ValueError(f"spectra shape {self.spectra.shape} does not fit grid {self.grid}")
        if len(self.spectra) == 0:
            raise ValueError("empty series")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.spectra.flags.writeable = False

    def __len__(self):
        return len(self.spectra)

    @property
    def horizon(self) -> float:
        return (len(self) - 1) * self.dt

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    def field(self, k: int) -> RealField:
        return RealField._wrap_spectrum(self.grid, self.spectra[k])

    def fields(self) -> Iterable[RealField]:
        for k in range(len(self)):
            yield self.field(k)

    def scaled(self, c: float) -> "FieldSeries":
        return FieldSeries(self.grid, self.dt, self.spectra * c, self.t0)

    def map_spectra(self, fn) -> "FieldSeries":
        return FieldSeries(self.grid, self.dt, fn(self.spectra), self.t0)

    @classmethod
    def constant(cls, f: RealField, horizon: float, dt: float) -> "FieldSeries":
        m = _step_count(horizon, dt)
        spectra = np.repeat(f.spectrum[None], m + 1, axis=0)
        return cls(f.grid, dt, spectra)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered Cauchy data on a uniform time grid."""

    grid: GridSpec
    dt: float
    positions: np.ndarray
    velocities: np.ndarray
    t0: float = 0.0
    scheme: str = "free"

    def __post_init__(self):
        if self.positions.shape != self.velocities.shape:
            raise ValueError("position and velocity samples differ in shape")
        if self.positions.ndim != 4 or self.positions.shape[1:] != self.grid.half_shape:
            raise ValueError("trajectory arrays do not fit the grid")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        self.positions.flags.writeable = False
        self.velocities.flags.writeable = False

    def __len__(self):
        return len(self.positions)

    def __getitem__(self, k: int) -> CauchyPair:
        k = range(len(self))[k]
        return CauchyPair(
            RealField._wrap_spectrum(self.grid, self.positions[k]),
            RealField._wrap_spectrum(self.grid, self.velocities[k]),
            self.t0 + k * self.dt,
        )

    def __iter__(self):
        for k in range(len(self)):
            yield self[k]

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self))

    @property
    def horizon(self) -> float:
        return (len(self) - 1) * self.dt

    @property
    def final(self) -> CauchyPair:
        return self[-1]

    def position_series(self) -> FieldSeries:
        return FieldSeries(self.grid, self.dt, self.positions, self.t0)

    def velocity_series(self) -> FieldSeries:
        return FieldSeries(self.grid, self.dt, self.velocities, self.t0)

    def __add__(self, other: "Trajectory") -> "Trajectory":
        self._check_compatible(other)
        return Trajectory(self.grid, self.dt, self.positions + other.positions,
                          self.velocities + other.velocities, self.t0, self.scheme)

    def __sub__(self, other: "Trajectory") -> "Trajectory":
        self._check_compatible(other)
        return Trajectory(self.grid, self.dt, self.positions - other.positions,
                          self.velocities - other.velocities, self.t0, self.scheme)

    def scaled(self, c: float) -> "Trajectory":
        return Trajectory(self.grid, self.dt, self.positions * c, self.velocities * c,
                          self.t0, self.scheme)

    def _check_compatible(self, other: "Trajectory"):
        if other.grid != self.grid or len(other) != len(self) or abs(other.dt - self.dt) > 1e-12:
            raise ValueError("trajectories are sampled differently")


def _step_count(horizon: float, dt: float) -> int:
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    ratio = horizon / dt
    m = int(round(ratio))
    if abs(ratio - m) > 1e-9 * max(1.0, ratio) or m < 0:
        raise ValueError(f"horizon {horizon} is not an integer multiple of dt={dt}")
    return m


# ---------------------------------------------------------------- free flow

def free_flow(data: CauchyPair, t: float) -> CauchyPair:
    """Exact solution of the free Klein-Gordon equation after time ``t``."""
    grid = data.grid
    w = dispersion(grid)
    c, s = np.cos(t * w), np.sin(t * w)
    p0, p1 = data.position.spectrum, data.velocity.spectrum
    pos = c * p0 + (s / w) * p1
    vel = -w * s * p0 + c * p1
    return CauchyPair(
        RealField._wrap_spectrum(grid, pos),
        RealField._wrap_spectrum(grid, vel),
        data.time_stamp + t,
    )


def free_trajectory(data: CauchyPair, horizon: float, dt: float) -> Trajectory:
    """Free flow sampled at ``k dt``, ``k = 0..horizon/dt`` (each sample exact)."""
    grid = data.grid
    m = _step_count(horizon, dt)
    w = dispersion(grid)
    p0, p1 = data.position.spectrum, data.velocity.spectrum
    pos = np.empty((m + 1,) + grid.half_shape, dtype=complex)
    vel = np.empty_like(pos)
    for k in range(m + 1):
        c, s = np.cos(k * dt * w), np.sin(k * dt * w)
        pos[k] = c * p0 + (s / w) * p1
        vel[k] = -w * s * p0 + c * p1
    return Trajectory(grid, dt, pos, vel, data.time_stamp, "free")


def mode_energy(data: CauchyPair) -> np.ndarray:
    """Per-wavevector free energy density ``|phi_t_hat|^2 + omega^2 |phi_hat|^2``."""
    w2 = 1.0 + wavenumber_squared(data.grid)
    return np.abs(data.velocity.spectrum) ** 2 + w2 * np.abs(data.position.spectrum) ** 2


# ---------------------------------------------------------------- Duhamel

def duhamel_series(forcing: FieldSeries) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative ``int_0^t K(t-tau) f(tau) dtau`` and its time derivative at every sample.

    Composite trapezoid rule in ``tau``.  The sine of the difference is split
    as ``sin(wt)cos(wtau) - cos(wt)sin(wtau)`` so the integrals accumulate in
    a single pass; the result coincides with the direct trapezoid sum.
    Returns position and velocity half spectra of shape ``(M+1, ...)``.
    """
    grid = forcing.grid
    w = dispersion(grid)
    dt = forcing.dt
    m = len(forcing)
    pos = np.zeros((m,) + grid.half_shape, dtype=complex)
    vel = np.zeros_like(pos)
    acc_c = np.zeros(grid.half_shape, dtype=complex)
    acc_s = np.zeros(grid.half_shape, dtype=complex)
    prev_c = prev_s = None
    for k in range(m):
        tk = k * dt
        ck, sk = np.cos(w * tk), np.sin(w * tk)
        fk = forcing.spectra[k]
        cur_c, cur_s = ck * fk, sk * fk
        if k > 0:
            acc_c += 0.5 * dt * (prev_c + cur_c)
            acc_s += 0.5 * dt * (prev_s + cur_s)
            pos[k] = (sk * acc_c - ck * acc_s) / w
            vel[k] = ck * acc_c + sk * acc_s
        prev_c, prev_s = cur_c, cur_s
    return pos, vel


def duhamel(forcing: FieldSeries, t: float | None = None) -> RealField:
    """``int_0^t K(t-tau) f(tau) dtau`` by the trapezoid rule; ``t`` defaults to the horizon."""
    if t is None:
        t = forcing.horizon
    if t > forcing.horizon * (1 + 1e-12) + 1e-14:
        raise ValueError(f"t={t} lies beyond the forcing horizon {forcing.horizon}")
    k = _step_count(t, forcing.dt)
    sub = FieldSeries(forcing.grid, forcing.dt, forcing.spectra[: k + 1], forcing.t0)
    pos, _ = duhamel_series(sub)
    return RealField._wrap_spectrum(forcing.grid, pos[-1])


def duhamel_trajectory(forcing: FieldSeries, sign: float = 1.0) -> Trajectory:
    pos, vel = duhamel_series(forcing)
    if sign != 1.0:
        pos *= sign
        vel *= sign
    return Trajectory(forcing.grid, forcing.dt, pos, vel, forcing.t0, "duhamel")


# ---------------------------------------------------------------- norms

@dataclass(frozen=True)
class SpaceTimeNormRecord:
    q: float
    r: float
    value: float
    dt: float
    T: float
    sigma: float | None = None

    def __post_init__(self):
        if not self.value >= 0:
            raise ValueError("space-time norm must be nonnegative")


def trapezoid_weights(m: int, dt: float) -> np.ndarray:
    w = np.full(m, dt)
    if m == 1:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * dt
    return w


def time_norm(values: Sequence[float], q: float, dt: float) -> float:
    """``L^q`` norm in time of sampled nonnegative values (trapezoid; max for q = inf)."""
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        raise ValueError("empty trajectory")
    if q == math.inf:
        return float(a.max())
    if q < 1:
        raise ValueError(f"time exponent must be >= 1, got {q}")
    peak = a.max()
    if peak == 0:
        return 0.0
    w = trapezoid_weights(a.size, dt)
    return float(peak * np.sum(w * (a / peak) ** q) ** (1.0 / q))


def _series(obj) -> FieldSeries:
    if isinstance(obj, Trajectory):
        return obj.position_series()
    if isinstance(obj, FieldSeries):
        return obj
    raise TypeError(f"expected Trajectory or FieldSeries, got {type(obj).__name__}")


def spacetime_norm(traj, q: float, r: float) -> SpaceTimeNormRecord:
    """``||phi||_{L^q_t L^r_x}`` over the sampled window."""
    series = _series(traj)
    if r < 1:
        raise ValueError(f"space exponent must be >= 1, got {r}")
    vals = [lebesgue_norm(f, r) for f in series.fields()]
    return SpaceTimeNormRecord(q, r, time_norm(vals, q, series.dt), series.dt, series.horizon)


def spacetime_besov_norm(traj, q: float, r: float, sigma: float) -> SpaceTimeNormRecord:
    """``||phi||_{L^q_t B^sigma_{r,2}}``."""
    series = _series(traj)
    params = BesovParams(sigma, r, 2.0)
    vals = [besov_norm(f, params) for f in series.fields()]
    return SpaceTimeNormRecord(q, r, time_norm(vals, q, series.dt), series.dt, series.horizon, sigma)


def sup_sobolev(traj, mu: float) -> float:
    """``sup_t ||phi(t)||_{H^mu}`` over the samples."""
    series = _series(traj)
    w = half_spectrum_weights(series.grid) * (1.0 + wavenumber_squared(series.grid)) ** mu
    best = 0.0
    for k in range(len(series)):
        best = max(best, float(np.sum(w * np.abs(series.spectra[k]) ** 2)))
    return math.sqrt(best * series.grid.spectral_cell)


def resolution_norm(traj, mu: float, triples: Sequence[AdmissibleTriple] = ()) -> float:
    """Finite stand-in for the resolution-space norm.

    ``sup_t ||phi||_{H^mu}`` plus the largest ``L^q_t B^sigma_{r,2}`` norm over
    the supplied triples, with ``sigma`` fixed by each triple and ``mu``.
    """
    for tr in triples:
        tr.require_valid()
    value = sup_sobolev(traj, mu)
    extra = 0.0
    for tr in triples:
        extra = max(extra, spacetime_besov_norm(traj, tr.q, tr.r, tr.sigma(mu)).value)
    return value + extra


def strichartz_ratio(data: CauchyPair, j: int, triple: AdmissibleTriple, horizon: float,
                     dt: float) -> float:
    """``||u||_{L^q L^r}`` of the free evolution over the scale-adapted data size.

    The caller localizes ``data`` to block ``j``.
    """
    triple.require_valid()
    den = lebesgue_norm(data.position, 2) + 2.0 ** -j * lebesgue_norm(data.velocity, 2)
    if den == 0:
        raise UndefinedRatio("zero data")
    traj = free_trajectory(data, horizon, dt)
    num = spacetime_norm(traj, triple.q, triple.r).value
    return num / (2.0 ** (j * triple.strichartz_exponent()) * den)


# ---------------------------------------------------------------- precise Strichartz

@dataclass(frozen=True)
class SlopeFit:
    slope: float
    residual: float
    h_values: tuple
    mean_log_norms: tuple
    per_trial_slopes: tuple
    q: float
    r: float
    horizon: float
    dt: float
    seed: int


def sharp_wave_exponent(r: float) -> float:
    """Time exponent with ``1/q = 1/2 - 1/r`` (``q = inf`` at ``r = 2``)."""
    inv = 0.5 - _inv(r)
    return math.inf if inv <= 0 else 1.0 / inv


def fit_loglog(x: Sequence[float], y: Sequence[float]) -> tuple[float, float]:
    """Unweighted least-squares slope of ``log y`` against ``log x`` and the RMS residual."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    a = np.vstack([lx, np.ones_like(lx)]).T
    coef, *_ = np.linalg.lstsq(a, ly, rcond=None)
    res = ly - a @ coef
    return float(coef[0]), float(math.sqrt(np.mean(res ** 2)))


def precise_strichartz_slope(grid: GridSpec, j: int, r: float, h_list: Sequence[float],
                             trials: int, *, horizon: float | None = None,
                             dt: float | None = None, seed: int = 0,
                             center: Sequence[float] | None = None) -> SlopeFit:
    """Fit the power of ``h`` in the ball-localized Strichartz norm.

    For each trial and each ``h``, random Cauchy data are restricted to
    ``B(center, h 2^j)`` (plus its mirror), evolved freely over ``[0, T]``,
    and ``||u||_{L^q L^r}`` with ``1/q = 1/2 - 1/r`` is divided by
    ``2^{j(3/2-3/r-1/q)} (||u0||_2 + 2^-j ||u1||_2)``.  The slope fitted to the
    trial-averaged log norms equals the mean of the per-trial slopes.
    """
    from .data import random_band_field

    if len(h_list) < 3:
        raise ValueError("need at least three h values for a slope")
    if horizon is None:
        horizon = grid.box_length / 4.0
    if horizon > grid.box_length / 4.0 * (1 + 1e-12):
        raise ValueError("horizon beyond the pre-wrap window L/4")
    if dt is None:
        dt = horizon / 80.0
    if center is None:
        center = (float(2 ** (j - 2)), 0.0, 0.0)
    q = sharp_wave_exponent(r)
    scale = 2.0 ** (j * (1.5 - 3.0 * _inv(r) - _inv(q)))
    windows = [BallWindow(tuple(center), j, h) for h in h_list]
    logs = np.zeros((trials, len(h_list)))
    for t in range(trials):
        rng = np.random.default_rng([seed, t])
        u0 = random_band_field(grid, rng)
        u1 = random_band_field(grid, rng)
        for i, w in enumerate(windows):
            d = CauchyPair(ball_localize(u0, w), ball_localize(u1, w))
            size = lebesgue_norm(d.position, 2) + 2.0 ** -j * lebesgue_norm(d.velocity, 2)
            if size == 0:
                raise UndefinedRatio(f"ball with h={w.h} holds no lattice modes")
            norm = spacetime_norm(free_trajectory(d, horizon, dt), q, r).value
            logs[t, i] = math.log(norm / (scale * size))
    mean_logs = logs.mean(axis=0)
    slope, resid = fit_loglog(h_list, np.exp(mean_logs))
    per_trial = tuple(fit_loglog(h_list, np.exp(row))[0] for row in logs)
    return SlopeFit(slope, resid, tuple(h_list), tuple(mean_logs), per_trial, q, r,
                    horizon, dt, seed)
