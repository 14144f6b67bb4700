"""Boltzmann thermometry on a four-level transmon ladder.

Level energies are built from the three measured transition frequencies,
E0 = 0, E1 = f_ge, E2 = f_ge + f_ef, E3 = f_ge + f_ef + f_fh, expressed in
GHz so that k_B / h converts between temperature and dimensionless
Boltzmann factors.  The working value of k_B / h is the rounded
20.84 GHz/K carried by the device analysis; construct a ladder with
``kb_over_h_ghz_per_k=KB_OVER_H_CODATA`` for the CODATA constant.

The temperature estimate minimizes a chi-square-like cost between the
measured and thermal populations over a bounded interval, and the module
also provides per-ratio temperatures, the quantum Cramer-Rao lower bound
on the normalized single-measurement precision, and windowed precision
statistics (mean, standard deviation, noise-equivalent temperature).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import PopulationVector
from .errors import InvalidPopulations, TooFewWindows

#: Rounded conversion constant used throughout the device analysis (GHz/K).
KB_OVER_H_ROUNDED = 20.84
#: CODATA value of k_B / h in GHz/K.
KB_OVER_H_CODATA = 1.380649e-23 / 6.62607015e-34 / 1e9

# Thermal probabilities are floored here in the chi-square denominator.
_P_TH_FLOOR = 1e-12
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class LevelLadder:
    """Transition frequencies (GHz) of the g-e-f-h ladder."""

    f_ge_ghz: float
    f_ef_ghz: float
    f_fh_ghz: float
    kb_over_h_ghz_per_k: float = KB_OVER_H_ROUNDED

    def __post_init__(self):
        if min(self.f_ge_ghz, self.f_ef_ghz, self.f_fh_ghz) <= 0:
            raise ValueError("transition frequencies must be positive")
        if self.kb_over_h_ghz_per_k <= 0:
            raise ValueError("kb_over_h_ghz_per_k must be positive")

    @property
    def energies_ghz(self) -> np.ndarray:
        """Level energies (E0, E1, E2, E3) in GHz above the ground state."""
        return np.array([
            0.0,
            self.f_ge_ghz,
            self.f_ge_ghz + self.f_ef_ghz,
            self.f_ge_ghz + self.f_ef_ghz + self.f_fh_ghz,
        ])


@dataclass(frozen=True)
class TemperatureEstimate:
    """Best-fit effective temperature with quality metrics."""

    t_eff: float
    r_squared: float
    chi2_min: float
    at_boundary: bool
    ratio_temps: dict[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class WindowSeries:
    """Per-window temperature estimates plus the windowing parameters."""

    temps: np.ndarray
    n_shot_per_window: int
    t_shot: float

    def __post_init__(self):
        temps = np.asarray(self.temps, dtype=float)
        if temps.size == 0:
            raise ValueError("temps must be non-empty")
        if self.n_shot_per_window < 1:
            raise ValueError("n_shot_per_window must be >= 1")
        if self.t_shot <= 0:
            raise ValueError("t_shot must be positive")
        object.__setattr__(self, "temps", temps)

    @property
    def t_meas(self) -> float:
        """Measurement time per window, n_shot * t_shot (s)."""
        return self.n_shot_per_window * self.t_shot


def boltzmann_populations(temperature: float, ladder: LevelLadder) -> PopulationVector:
    """Thermal populations of the truncated four-level manifold."""
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    p = _boltzmann_array(np.array([temperature]), ladder)[0]
    return PopulationVector.from_array(p)


def _boltzmann_array(temps: np.ndarray, ladder: LevelLadder) -> np.ndarray:
    """Thermal populations for an array of temperatures, shape (n, 4)."""
    beta = 1.0 / (ladder.kb_over_h_ghz_per_k * np.asarray(temps, dtype=float))
    w = np.exp(-np.outer(beta, ladder.energies_ghz))
    return w / w.sum(axis=1, keepdims=True)


def _chi2(meas: np.ndarray, temps: np.ndarray, ladder: LevelLadder) -> np.ndarray:
    p_th = _boltzmann_array(temps, ladder)
    return (((meas - p_th) ** 2) / np.maximum(p_th, _P_TH_FLOOR)).sum(axis=1)


def fit_temperature(
    meas: PopulationVector,
    ladder: LevelLadder,
    bounds: tuple[float, float] = (1e-3, 20.0),
) -> TemperatureEstimate:
    """Effective temperature minimizing the chi-square-like population cost.

    The minimum is located by seeding on a 256-point log grid over
    ``bounds`` and refining with a golden-section search to a relative
    width of 1e-10; an optimum within 1e-6 (relative) of either bound is
    flagged ``at_boundary``.  Fitting exact thermal populations returns the
    generating temperature to better than 1e-8 relative.
    """
    t_min, t_max = bounds
    if not 0 < t_min < t_max:
        raise ValueError("bounds must satisfy 0 < t_min < t_max")
    p = meas.as_array()
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-6:
        raise InvalidPopulations(f"populations invalid: {p}")

    grid = np.geomspace(t_min, t_max, 256)
    chi2 = _chi2(p, grid, ladder)
    best = int(np.argmin(chi2))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]

    def cost(log_t: float) -> float:
        return float(_chi2(p, np.array([math.exp(log_t)]), ladder)[0])

    a, b = math.log(lo), math.log(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = cost(c), cost(d)
    while b - a > 1e-10:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = cost(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = cost(d)
    t_eff = math.exp(0.5 * (a + b))
    t_eff = min(max(t_eff, t_min), t_max)

    at_boundary = (t_eff <= t_min * (1.0 + 1e-6)) or (t_eff >= t_max * (1.0 - 1e-6))
    p_fit = _boltzmann_array(np.array([t_eff]), ladder)[0]
    chi2_min = float(_chi2(p, np.array([t_eff]), ladder)[0])
    ss_res = float(((p - p_fit) ** 2).sum())
    ss_tot = float(((p - p.mean()) ** 2).sum())
    if ss_tot > 0.0:
        r_squared = 1.0 - ss_res / ss_tot
    else:
        r_squared = 1.0 if ss_res <= 1e-24 else -math.inf
    ratios = ratio_temperatures(meas, ladder) if p[0] > 0 else {}
    return TemperatureEstimate(t_eff, r_squared, chi2_min, at_boundary, ratios)


def ratio_temperatures(meas: PopulationVector, ladder: LevelLadder) -> dict[str, float]:
    """Independent temperature from each excited-to-ground population ratio.

    T_i = -E_i / ((k_B/h) ln(P_i / P_g)); levels with zero population are
    omitted rather than reported.
    """
    p = meas.as_array()
    if p[0] <= 0:
        raise InvalidPopulations("ratio temperatures need P_g > 0")
    energies = ladder.energies_ghz
    out = {}
    for idx, label in ((1, "e"), (2, "f"), (3, "h")):
        if p[idx] <= 0:
            continue
        log_ratio = math.log(p[idx] / p[0])
        if log_ratio == 0.0:
            out[label] = math.inf
        else:
            out[label] = -energies[idx] / (ladder.kb_over_h_ghz_per_k * log_ratio)
    return out


def qcrb_bound(temperature: float, ladder: LevelLadder, n_levels: int) -> float:
    """Lower bound on the normalized single-measurement precision (dT/T).

    For a thermal state diagonal in energy, the quantum Fisher information
    is Var(E) / (k_B T^2)^2, so (dT/T)_SM >= k_B T / sqrt(Var_T(E)).  The
    bound is evaluated both from the explicit n-level expressions (written
    with decaying exponentials so they cannot overflow) and from the
    energy-variance moments of the truncated Boltzmann distribution; the
    two routes must agree to 1e-10 relative.
    """
    if temperature <= 0:
        raise ValueError("temperature must be positive")
    if n_levels not in (2, 3, 4):
        raise ValueError("n_levels must be 2, 3 or 4")
    x = ladder.energies_ghz[1:n_levels] / (
        ladder.kb_over_h_ghz_per_k * temperature)

    explicit = math.sqrt(_explicit_bound_sq(x))

    # Generic route: energy variance of the truncated thermal state.
    levels = np.concatenate([[0.0], x])
    w = np.exp(-levels)
    prob = w / w.sum()
    var = float((prob * levels**2).sum() - ((prob * levels).sum()) ** 2)
    generic = 1.0 / math.sqrt(var)

    if abs(explicit - generic) > 1e-10 * generic:
        raise ArithmeticError(
            f"explicit ({explicit!r}) and energy-variance ({generic!r}) "
            "bounds disagree beyond 1e-10"
        )
    return explicit


def _explicit_bound_sq(x: np.ndarray) -> float:
    """Explicit truncated-ladder bounds on (dT/T)^2 for n = 2, 3, 4."""
    if x.size == 1:
        x1 = x[0]
        e1 = math.exp(-x1)
        return (1.0 + e1) ** 2 / (x1**2 * e1)
    if x.size == 2:
        x1, x2 = x
        e1, e2 = math.exp(-x1), math.exp(-x2)
        num = (1.0 + e1 + e2) ** 2
        den = x1**2 * e1 + x2**2 * e2 + (x1 - x2) ** 2 * e1 * e2
        return num / den
    x1, x2, x3 = x
    e1, e2, e3 = math.exp(-x1), math.exp(-x2), math.exp(-x3)
    num = (1.0 + e1 + e2 + e3) ** 2
    den = (x1**2 * e1 + x2**2 * e2 + x3**2 * e3
           + (x1 - x2) ** 2 * e1 * e2
           + (x1 - x3) ** 2 * e1 * e3
           + (x2 - x3) ** 2 * e2 * e3)
    return num / den


def window_statistics(series: WindowSeries) -> tuple[float, float, float]:
    """Sample mean, unbiased standard deviation and standard error.

    Returns (mu_T, sigma_T, sigma_mu) with sigma_mu = sigma_T / sqrt(N_win).
    """
    temps = series.temps
    if temps.size < 2:
        raise TooFewWindows("window statistics need at least 2 windows")
    mu = float(temps.mean())
    sigma = float(temps.std(ddof=1))
    return mu, sigma, sigma / math.sqrt(temps.size)


def net(sigma_t: float, t_meas: float) -> float:
    """Noise-equivalent temperature sigma_T * sqrt(t_meas), in K/sqrt(Hz)."""
    if t_meas <= 0:
        raise ValueError("t_meas must be positive")
    return sigma_t * math.sqrt(t_meas)
