"""Frequency-splitting pipeline: exponents, split data, norm ledgers, bounds and bootstrap times."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .dynamics import SolverConfig, energy_history, evolve
from .littlewood_paley import UndefinedRatio, build_bank, high_pass, low_pass
from .propagator import Trajectory, fit_loglog
from .spectral import CauchyPair, sobolev_norm


# ---------------------------------------------------------------- exponents

def _check_gamma(gamma: float):
    if not (2.0 < gamma < 3.0):
        raise ValueError(f"gamma must lie in (2, 3), got {gamma}")


@dataclass(frozen=True)
class ExponentSet:
    gamma: float
    s0: float
    theta: float
    alpha: float
    beta: float
    s_threshold: float
    scaling_exponent: float
    conformal_exponent: float

    def rows(self) -> list[tuple[str, float]]:
        return [
            ("gamma", self.gamma),
            ("s0", self.s0),
            ("theta", self.theta),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("s_threshold", self.s_threshold),
            ("scaling_exponent", self.scaling_exponent),
            ("conformal_exponent", self.conformal_exponent),
        ]

    def default_sigmas(self, s: float) -> list[float]:
        return [self.s0, self.alpha, self.beta, s, 1.0]


def derive_exponents(gamma: float) -> ExponentSet:
    """Closed-form exponents; ``s0`` is obtained from the general relation
    ``s0 = gamma/2 - 1 + gamma*theta/6`` at ``theta = 6/gamma - 2``."""
    _check_gamma(gamma)
    theta = 6.0 / gamma - 2.0
    return ExponentSet(
        gamma=gamma,
        s0=gamma / 2.0 - 1.0 + gamma * theta / 6.0,
        theta=theta,
        alpha=(2.0 * gamma - 4.0) / 3.0,
        beta=(gamma - 1.0) / 3.0,
        s_threshold=gamma / 4.0,
        scaling_exponent=gamma / 2.0 - 1.0,
        conformal_exponent=gamma / 4.0 - 0.25,
    )


# ---------------------------------------------------------------- splitting

def split_data(data: CauchyPair, J: int) -> tuple[CauchyPair, CauchyPair]:
    """``(S_J data, (I - S_J) data)``.

    ``S_J`` only involves blocks up to ``J - 1``, so ``J`` may reach
    ``j_max + 1``.
    """
    bank = build_bank(data.grid)
    if not (-1 <= J <= bank.j_max + 1):
        raise ValueError(f"split level J={J} outside [-1, {bank.j_max + 1}] for this grid")
    low = CauchyPair(low_pass(data.position, J, bank), low_pass(data.velocity, J, bank), data.time_stamp)
    high = CauchyPair(high_pass(data.position, J, bank), high_pass(data.velocity, J, bank), data.time_stamp)
    return low, high


def data_norm(pair: CauchyPair, sigma: float) -> float:
    """``||phi0||_{H^sigma} + ||phi1||_{H^{sigma-1}}``."""
    a, b = sobolev_norm(pair, sigma)
    return a + b


@dataclass(frozen=True)
class NormLedger:
    E_s: float
    E_h: dict
    E_l: dict
    J: int
    s: float


def norm_ledger(data: CauchyPair, low: CauchyPair, high: CauchyPair, s: float,
                sigma_list: Sequence[float], J: int) -> NormLedger:
    return NormLedger(
        E_s=data_norm(data, s),
        E_h={float(sg): data_norm(high, sg) for sg in sigma_list},
        E_l={float(sg): data_norm(low, sg) for sg in sigma_list},
        J=J,
        s=s,
    )


def ledger_sweep(data: CauchyPair, J_list: Sequence[int], s: float,
                 sigma_list: Sequence[float]) -> list[NormLedger]:
    out = []
    for J in J_list:
        low, high = split_data(data, J)
        out.append(norm_ledger(data, low, high, s, sigma_list, J))
    return out


@dataclass(frozen=True)
class SplitBoundReport:
    J: tuple
    sigma: float
    s: float
    rho_h: tuple
    rho_l: tuple

    @staticmethod
    def _spread(x):
        a = np.asarray(x)
        return float(a.max() / a.min()) if a.min() > 0 else math.inf

    @property
    def rho_h_spread(self) -> float:
        return self._spread(self.rho_h)

    @property
    def rho_l_spread(self) -> float:
        return self._spread(self.rho_l)

    @property
    def sigma_above_s(self) -> bool:
        # The high-part bound is only claimed for sigma <= s; above it the ratio is informational.
        return self.sigma > self.s


def verify_split_bounds(ledgers: Sequence[NormLedger], sigma: float) -> SplitBoundReport:
    """``rho_h(J) = E_{h,sigma} / (2^{J(sigma-s)} E_s)`` and ``rho_l(J) = E_{l,1} / (2^{J(1-s)} E_s)``."""
    rho_h, rho_l = [], []
    s = ledgers[0].s
    for led in ledgers:
        if led.E_s == 0:
            raise UndefinedRatio(f"E_s = 0 at J={led.J}")
        rho_h.append(led.E_h[float(sigma)] / (2.0 ** (led.J * (sigma - s)) * led.E_s))
        rho_l.append(led.E_l[1.0] / (2.0 ** (led.J * (1.0 - s)) * led.E_s))
    return SplitBoundReport(tuple(l.J for l in ledgers), sigma, s, tuple(rho_h), tuple(rho_l))


# ---------------------------------------------------------------- energy growth

@dataclass(frozen=True)
class EnergyBoundReport:
    J: int
    s: float
    E_T: float
    E_s: float
    ratio: float


def energy_bound_report(u_traj: Trajectory, J: int, s: float, E_s: float) -> EnergyBoundReport:
    """``E_T(u) = sup_t E(u)`` against ``2^{2J(1-s)} (E_s^2 + E_s^4)``."""
    e_t = max(r.E for r in energy_history(u_traj, with_quartic=False))
    den = 2.0 ** (2 * J * (1.0 - s)) * (E_s ** 2 + E_s ** 4)
    ratio = e_t / den if den > 0 else (0.0 if e_t == 0 else math.inf)
    return EnergyBoundReport(J, s, e_t, E_s, ratio)


@dataclass(frozen=True)
class EnergyGrowthSweep:
    reports: tuple
    slope: float
    residual: float
    target: float

    @property
    def within_target(self) -> bool:
        return self.slope <= self.target


def split_evolve(data: CauchyPair, J: int, config: SolverConfig, gamma: float | None = None):
    """Evolve the high part with the self-interaction and the low part with the
    five-term interaction against it.  Returns ``(u, v)`` trajectories."""
    low, high = split_data(data, J)
    v = evolve(high, config, "high", gamma=gamma)
    u = evolve(low, config, "perturbed", v=v, gamma=gamma)
    return u, v


def energy_growth_sweep(data: CauchyPair, J_list: Sequence[int], s: float,
                        config: SolverConfig, gamma: float | None = None,
                        slack: float = 0.0) -> EnergyGrowthSweep:
    """Log2-slope of ``E_T(u)`` against ``J``; the target is ``2(1-s) + slack``."""
    e_s = data_norm(data, s)
    reports = []
    for J in J_list:
        u, _ = split_evolve(data, J, config, gamma)
        reports.append(energy_bound_report(u, J, s, e_s))
    et = [r.E_T for r in reports]
    if min(et) <= 0:
        return EnergyGrowthSweep(tuple(reports), 0.0, 0.0, 2 * (1 - s) + slack)
    slope, resid = fit_loglog([2.0 ** J for J in J_list], et)
    return EnergyGrowthSweep(tuple(reports), slope, resid, 2 * (1 - s) + slack)


# ---------------------------------------------------------------- exponent gate

GATE_TERMS = ("beta", "alpha/4+s0/2+1/4", "1/2", "r1", "r2")


@dataclass(frozen=True)
class BootstrapConstants:
    C: float = 1.0
    C1: float = 1.0
    C2: float = 1.0
    C3: float = 1.0
    C4: float = 1.0
    C5: float = 1.0
    r1: float = 3.3
    r2: float = 40.0

    def __post_init__(self):
        for name in ("C", "C1", "C2", "C3", "C4", "C5"):
            if not getattr(self, name) > 0:
                raise ValueError(f"constant {name} must be positive")

    def scaled(self, factor: float) -> "BootstrapConstants":
        return BootstrapConstants(self.C * factor, self.C1 * factor, self.C2 * factor,
                                  self.C3 * factor, self.C4 * factor, self.C5 * factor,
                                  self.r1, self.r2)


def check_exponent_ranges(gamma: float, r1: float, r2: float):
    lo1, hi1 = max(2.0, 1.0 / (3.0 - gamma)), 2.0 / (3.0 - gamma)
    if not (lo1 < r1 < hi1):
        raise ValueError(f"r1={r1} outside ({lo1:.6g}, {hi1:.6g}) for gamma={gamma}")
    lo2 = 4.0 / (gamma - 2.0)
    if not (lo2 <= r2 < math.inf):
        raise ValueError(f"r2={r2} outside [{lo2:.6g}, inf) for gamma={gamma}")


def gate_terms(gamma: float, r1: float, r2: float) -> dict:
    e = derive_exponents(gamma)
    return {
        "beta": e.beta,
        "alpha/4+s0/2+1/4": e.alpha / 4.0 + e.s0 / 2.0 + 0.25,
        "1/2": 0.5,
        "r1": gamma / 2.0 - 0.75 + 1.0 / (2.0 * r1),
        "r2": gamma / 2.0 - 0.75 + 1.0 / (2.0 * r2),
    }


@dataclass(frozen=True)
class GateReport:
    passed: bool
    margin: float
    s: float
    terms: dict
    binding: str

    def __bool__(self):
        return self.passed


def exponent_gate(s: float, gamma: float, r1: float, r2: float) -> GateReport:
    """``s`` against the five lower bounds; ``margin = s - max``."""
    _check_gamma(gamma)
    check_exponent_ranges(gamma, r1, r2)
    terms = gate_terms(gamma, r1, r2)
    binding = max(terms, key=terms.get)
    margin = s - terms[binding]
    return GateReport(margin > 0, margin, s, terms, binding)


class GateFailure(ValueError):
    def __init__(self, report: GateReport):
        self.report = report
        violated = [k for k, v in report.terms.items() if report.s <= v]
        super().__init__(
            f"exponent gate fails at s={report.s}: s <= {', '.join(violated)} "
            f"(largest: {report.binding} = {report.terms[report.binding]:.6g})"
        )


def bootstrap_terms(J: float, s: float, gamma: float, constants: BootstrapConstants,
                    E_s: float) -> dict:
    """The five candidate times whose minimum is the guaranteed existence time."""
    t = gate_terms(gamma, constants.r1, constants.r2)
    r1, r2 = constants.r1, constants.r2
    e2, e4 = E_s ** 2, E_s ** 4

    def term(gain, c, ek, power):
        # (2^gain / (5 c ek))^power evaluated in log2 to stay finite for large J.
        return 2.0 ** (power * (gain - math.log2(5.0 * c * ek)))

    return {
        "beta": term(2 * J * (s - t["beta"]), constants.C1, e2, 3.0 / (4.0 - gamma)),
        "alpha/4+s0/2+1/4": term(4 * J * (s - t["alpha/4+s0/2+1/4"]), constants.C2, e4,
                                 3.0 / (5.0 - gamma)),
        "r1": term(2 * J * (s - t["r1"]), constants.C3, e2, 2.0 * r1 / (r1 + 2.0)),
        "1/2": term(2 * J * (s - 0.5), constants.C4, e2, 1.0),
        "r2": term(2 * J * (s - t["r2"]), constants.C5, e2, 2.0 * r2 / (r2 + 2.0)),
    }


def bootstrap_time(J: float, s: float, gamma: float, constants: BootstrapConstants,
                   E_s: float) -> float:
    """Minimum of the five candidate times; requires a passing gate."""
    report = exponent_gate(s, gamma, constants.r1, constants.r2)
    if not report.passed:
        raise GateFailure(report)
    if not E_s > 0:
        raise ValueError("E_s must be positive")
    return min(bootstrap_terms(J, s, gamma, constants, E_s).values())


# ---------------------------------------------------------------- recombination

@dataclass
class RecombineReport:
    J: int
    dt: float
    T: float
    times: np.ndarray
    h1_error: np.ndarray
    l2_error: np.ndarray
    u: Trajectory | None = field(default=None, repr=False)
    v: Trajectory | None = field(default=None, repr=False)
    phi: Trajectory | None = field(default=None, repr=False)

    @property
    def final_h1(self) -> float:
        return float(self.h1_error[-1])

    @property
    def max_h1(self) -> float:
        return float(self.h1_error.max())


def _trajectory_gap(a: Trajectory, b: Trajectory, s: float) -> np.ndarray:
    from .spectral import half_spectrum_weights, wavenumber_squared

    w = half_spectrum_weights(a.grid) * (1.0 + wavenumber_squared(a.grid)) ** s
    d = a.positions - b.positions
    return np.sqrt(np.sum(w * np.abs(d) ** 2, axis=(1, 2, 3)) * a.grid.spectral_cell)


def recombine_and_compare(data: CauchyPair, J: int, config: SolverConfig,
                          gamma: float | None = None, *, keep: bool = False) -> RecombineReport:
    """Split at ``J``, evolve both parts, and compare ``u + v`` with a direct run."""
    u, v = split_evolve(data, J, config, gamma)
    phi = evolve(data, config, "full", gamma=gamma)
    uv = u + v
    rep = RecombineReport(J, config.dt, config.T, phi.times,
                          _trajectory_gap(uv, phi, 1.0), _trajectory_gap(uv, phi, 0.0))
    if keep:
        rep.u, rep.v, rep.phi = u, v, phi
    return rep


@dataclass(frozen=True)
class ConvergenceReport:
    dts: tuple
    errors: tuple
    orders: tuple
    self_differences: tuple
    reference_dt: float

    @property
    def mean_order(self) -> float:
        return float(np.mean(self.orders))


def recombination_convergence(data: CauchyPair, J: int, dts: Sequence[float], T: float,
                              gamma: float | None = None, reference_factor: int = 8) -> ConvergenceReport:
    """Error of the recombined terminal state against a fine direct reference.

    For every ``dt`` the split pipeline gives ``(u+v)(T)``; its ``H^1``
    distance to a direct run at ``min(dts)/reference_factor`` is recorded,
    together with the same-step gap ``||(u+v)(T) - phi_dt(T)||_{H^1}``.
    Orders are ``log2`` ratios of successive errors for halving steps.
    """
    dts = sorted(dts, reverse=True)
    ref_dt = dts[-1] / reference_factor
    ref = evolve(data, SolverConfig(ref_dt, T), "full", gamma=gamma).final
    errors, gaps = [], []
    for dt in dts:
        cfg = SolverConfig(dt, T)
        rep = recombine_and_compare(data, J, cfg, gamma, keep=True)
        uv = rep.u.final + rep.v.final
        errors.append(data_norm_gap(uv, ref))
        gaps.append(rep.final_h1)
    orders = tuple(math.log(errors[i] / errors[i + 1]) / math.log(dts[i] / dts[i + 1])
                   for i in range(len(dts) - 1))
    return ConvergenceReport(tuple(dts), tuple(errors), orders, tuple(gaps), ref_dt)


def data_norm_gap(a: CauchyPair, b: CauchyPair) -> float:
    return sobolev_norm(a.position - b.position, 1.0)
