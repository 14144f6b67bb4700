"""Lossless network model of a flux-tunable quarter-wave drive-line filter.

The filter is an open-ended transmission-line stub hanging off the qubit
node at ``x = 0``: a uniform section of characteristic impedance ``z0`` and
phase velocity ``v_p`` runs to ``x = x_s``, where a series dc-SQUID array
with flux-tunable inductance is embedded, and continues to the open end at
``x = l_f``.  A small capacitance ``c_g`` models the physical open end, and
``c_d`` couples the qubit to the node.  Near the quarter-wave condition the
stub transforms the open end into a short at the node, cancelling the real
part of the admittance seen by the qubit and with it the radiative decay
channel; detuning the SQUID inductance moves that cancellation frequency.

Impedance chain, referenced at the node::

    Z_end = 1/(i w c_g)                       open-end cap (open if c_g = 0)
    Z_2   = z0 (Z_end + i z0 tan(b l_r)) / (z0 + i Z_end tan(b l_r))
    Z_1   = i w l_s + Z_2                     series SQUID-array inductance
    Z_in  = z0 (Z_1 + i z0 tan(b x_s)) / (z0 + i Z_1 tan(b x_s))

with ``b = w / v_p`` and ``l_r = l_f - x_s``.  The filter frequency is the
root of the shunt-short condition ``Z_1 + i z0 tan(b x_s) = 0``.

Phasor convention is ``exp(+i w t)``: an inductor has impedance ``i w L``
and a capacitor ``1/(i w C)``.  All quantities are strict SI; unit
conversion belongs at the I/O boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    FluxlineError,
    HalfFluxDivergence,
    NoRootFound,
    OverCritical,
    TangentPole,
)

#: Magnetic flux quantum (Wb).
PHI0 = 2.067833848e-15

# |tan| beyond this counts as sitting on a pole of the line tangent.
_POLE_TAN = 1e9
# Residual |F| (ohm) above this after bisection marks a pole, not a root.
_ROOT_ACCEPT_OHM = 1e-3


@dataclass(frozen=True)
class SquidArray:
    """Series array of identical symmetric dc SQUIDs embedded in the line.

    Parameters
    ----------
    n_squids : int
        Number of SQUIDs in series.
    ic_junction : float
        Critical current of a single junction (A); the SQUID critical
        current at zero flux is twice this.
    l_fixed_per_squid : float
        Flux-independent lead inductance per SQUID (H), geometric plus
        kinetic contributions.
    clamp_epsilon : float
        Lower bound on |cos(pi * flux_ratio)| used near half flux; strict
        mode raises below it, clamped mode substitutes it.
    """

    n_squids: int
    ic_junction: float
    l_fixed_per_squid: float = 0.0
    clamp_epsilon: float = 1e-3

    def __post_init__(self):
        if self.n_squids < 1:
            raise ValueError("n_squids must be >= 1")
        if self.ic_junction <= 0:
            raise ValueError("ic_junction must be positive")
        if self.l_fixed_per_squid < 0:
            raise ValueError("l_fixed_per_squid must be >= 0")
        if not 0.0 < self.clamp_epsilon < 0.1:
            raise ValueError("clamp_epsilon must lie in (0, 0.1)")


@dataclass(frozen=True)
class FilterGeometry:
    """Geometry of the quarter-wave stub and its couplings (SI units)."""

    z0: float
    v_p: float
    l_f: float
    x_s: float
    c_g: float = 0.0
    c_d: float = 0.0
    z_source: float = 50.0

    def __post_init__(self):
        if min(self.z0, self.v_p, self.l_f) <= 0:
            raise ValueError("z0, v_p and l_f must be positive")
        if not 0.0 <= self.x_s <= self.l_f:
            raise ValueError("x_s must lie in [0, l_f]")
        if self.c_g < 0 or self.c_d < 0:
            raise ValueError("c_g and c_d must be >= 0")
        if self.z_source <= 0:
            raise ValueError("z_source must be positive")

    @property
    def f0(self) -> float:
        """Bare quarter-wave frequency v_p / (4 l_f) in Hz."""
        return self.v_p / (4.0 * self.l_f)

    @property
    def omega0(self) -> float:
        return 2.0 * math.pi * self.f0


@dataclass(frozen=True)
class QubitLoad:
    """Qubit seen as a load: total capacitance, frequency, internal loss.

    The default ``c_q`` of 143 fF corresponds to a charging energy
    E_C = e^2 / (2 C) of h * 135 MHz, a typical transmon anharmonicity.
    ``t1_internal`` caps the total relaxation time; ``None`` means no
    internal loss channel.
    """

    f_q: float
    c_q: float = 143e-15
    t1_internal: float | None = None

    def __post_init__(self):
        if self.c_q <= 0 or self.f_q <= 0:
            raise ValueError("c_q and f_q must be positive")
        if self.t1_internal is not None and self.t1_internal <= 0:
            raise ValueError("t1_internal must be positive when present")


@dataclass(frozen=True)
class CouplingFigures:
    """Coupling figures of merit at one flux bias and drive frequency."""

    gamma_qf: float
    t1_ext: float
    t1_total: float
    rabi_relative: float


def squid_critical_current(arr: SquidArray, flux_ratio: float) -> float:
    """Flux-dependent SQUID critical current 2 Ic |cos(pi * flux_ratio)|."""
    return 2.0 * arr.ic_junction * abs(math.cos(math.pi * flux_ratio))


def _effective_ic_sq(arr: SquidArray, flux_ratio: float, mode: str) -> float:
    cos_abs = abs(math.cos(math.pi * flux_ratio))
    if cos_abs < arr.clamp_epsilon:
        if mode == "strict":
            raise HalfFluxDivergence(
                f"|cos(pi*flux)| = {cos_abs:.3e} < clamp_epsilon = "
                f"{arr.clamp_epsilon:.3e} at flux_ratio = {flux_ratio}"
            )
        if mode != "clamped":
            raise ValueError(f"mode must be 'strict' or 'clamped', got {mode!r}")
        cos_abs = arr.clamp_epsilon
    elif mode not in ("strict", "clamped"):
        raise ValueError(f"mode must be 'strict' or 'clamped', got {mode!r}")
    return 2.0 * arr.ic_junction * cos_abs


def squid_array_inductance(
    arr: SquidArray,
    flux_ratio: float,
    i_ac: float = 0.0,
    mode: str = "strict",
) -> float:
    """Series inductance of the SQUID array at a given flux bias (H).

    Linear part N (L_fixed + Phi0 / (2 pi Ic_sq)); a nonzero AC current
    amplitude adds the per-SQUID Kerr correction
    (Phi0 / 4 pi) I^2 / Ic_sq^3 summed over the array.
    """
    ic_sq = _effective_ic_sq(arr, flux_ratio, mode)
    l_arr = arr.n_squids * (arr.l_fixed_per_squid + PHI0 / (2.0 * math.pi * ic_sq))
    if i_ac != 0.0:
        if abs(i_ac) >= ic_sq:
            raise OverCritical(
                f"|i_ac| = {abs(i_ac):.3e} A >= Ic_sq = {ic_sq:.3e} A"
            )
        l_arr += arr.n_squids * (PHI0 / (4.0 * math.pi)) * i_ac**2 / ic_sq**3
    return l_arr


def _filter_condition(geom: FilterGeometry, l_s: float, omega):
    """Shunt-short condition F(w) = w l_s + X2(w) + z0 tan(b x_s), in ohms.

    Vectorized over ``omega``.  Values at poles come back inf/nan; the
    caller is responsible for masking them.
    """
    omega = np.asarray(omega, dtype=float)
    beta = omega / geom.v_p
    l_r = geom.l_f - geom.x_s
    s_l = np.sin(beta * geom.x_s)
    c_l = np.cos(beta * geom.x_s)
    s_r = np.sin(beta * l_r)
    c_r = np.cos(beta * l_r)
    z0 = geom.z0
    with np.errstate(divide="ignore", invalid="ignore"):
        if geom.c_g == 0.0:
            x2 = -z0 * c_r / s_r
        else:
            x_e = -1.0 / (omega * geom.c_g)
            x2 = z0 * (x_e * c_r + z0 * s_r) / (z0 * c_r - x_e * s_r)
        f = omega * l_s + x2 + z0 * s_l / c_l
    return f


def input_impedance(geom: FilterGeometry, l_s: float, omega: float) -> complex:
    """Impedance of the stub seen from the node at angular frequency omega.

    Purely imaginary for this lossless network.  Raises TangentPole when a
    line tangent sits within tolerance of one of its poles, or when the
    transform itself lands on an impedance pole; the caller should perturb
    omega.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    beta = omega / geom.v_p
    l_r = geom.l_f - geom.x_s
    s_l = math.sin(beta * geom.x_s)
    c_l = math.cos(beta * geom.x_s)
    s_r = math.sin(beta * l_r)
    c_r = math.cos(beta * l_r)
    z0 = geom.z0

    if abs(s_l) > _POLE_TAN * abs(c_l):
        raise TangentPole(f"tan(beta*x_s) at a pole for omega = {omega:.6e}")

    if geom.c_g == 0.0:
        # Ideal open end: X2 = -z0 cot(beta l_r), open when sin -> 0.
        x2 = math.inf if abs(c_r) > _POLE_TAN * abs(s_r) else -z0 * c_r / s_r
    else:
        x_e = -1.0 / (omega * geom.c_g)
        den = z0 * c_r - x_e * s_r
        x2 = math.inf if den == 0.0 else z0 * (x_e * c_r + z0 * s_r) / den

    t_l = s_l / c_l
    if math.isinf(x2):
        # Series branch open: the left section alone sets the impedance.
        if t_l == 0.0:
            raise TangentPole(
                f"input impedance pole (open series branch) at omega = {omega:.6e}"
            )
        x_in = -z0 / t_l
    else:
        x1 = omega * l_s + x2
        den_in = z0 - x1 * t_l
        if den_in == 0.0:
            raise TangentPole(f"impedance-transform pole at omega = {omega:.6e}")
        x_in = z0 * (x1 + z0 * t_l) / den_in
    if not math.isfinite(x_in):
        raise TangentPole(f"non-finite input reactance at omega = {omega:.6e}")
    return complex(0.0, x_in)


def filter_frequency_first_order(f0: float, l_s: float, z0: float) -> float:
    """First-order pulled filter frequency f0 / (1 + 4 f0 l_s / z0)."""
    if f0 <= 0 or z0 <= 0:
        raise ValueError("f0 and z0 must be positive")
    if l_s < 0:
        raise ValueError("l_s must be >= 0")
    return f0 / (1.0 + 4.0 * f0 * l_s / z0)


def filter_frequency_exact(
    geom: FilterGeometry,
    l_s: float,
    n_scan: int = 4096,
    rtol: float = 1e-12,
) -> float:
    """Filter frequency from the transcendental shunt-short condition (Hz).

    Scans ``n_scan`` points over [0.3 f0, 1.2 f0], discards pole-polluted
    intervals, and bisects the first remaining sign change to relative
    tolerance ``rtol``; each candidate is validated against the residual so
    that tangent poles masquerading as sign changes are rejected.
    """
    f0 = geom.f0
    if geom.c_g == 0.0 and geom.x_s >= geom.l_f:
        # Inductor at the open end carries no current; the condition
        # degenerates to the bare open stub.
        geom = replace(geom, x_s=0.0)
        l_s = 0.0

    freqs = np.linspace(0.3 * f0, 1.2 * f0, n_scan)
    vals = _filter_condition(geom, l_s, 2.0 * math.pi * freqs)
    ok = np.isfinite(vals) & (np.abs(vals) < 1e12)
    sign_change = ok[:-1] & ok[1:] & (np.sign(vals[:-1]) != np.sign(vals[1:]))
    idx = np.nonzero(sign_change)[0]

    def cond(f: float) -> float:
        return float(_filter_condition(geom, l_s, 2.0 * math.pi * f))

    n_rejected = 0
    for i in idx:
        root = _bisect(cond, float(freqs[i]), float(freqs[i + 1]),
                       float(vals[i]), float(vals[i + 1]), rtol)
        if abs(cond(root)) < _ROOT_ACCEPT_OHM:
            return root
        n_rejected += 1
    raise NoRootFound(
        f"no filter-frequency root in [{0.3 * f0:.4e}, {1.2 * f0:.4e}] Hz",
        diagnostics={
            "window_hz": (0.3 * f0, 1.2 * f0),
            "n_scan": n_scan,
            "n_valid_points": int(ok.sum()),
            "n_sign_changes": int(len(idx)),
            "n_rejected_as_poles": n_rejected,
        },
    )


def _bisect(func, a: float, b: float, fa: float, fb: float, rtol: float) -> float:
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    while b - a > rtol * abs(b):
        mid = 0.5 * (a + b)
        fm = func(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b, fb = mid, fm
    return 0.5 * (a + b)


def perturbative_pull(geom: FilterGeometry, l_s: float) -> float:
    """First-order fractional frequency pull, position dependence included.

    df / f0 = -(2/pi) (w0 l_s / z0) cos^2(pi x_s / (2 l_f)); zero when the
    inductor sits at the open-end current node, maximal at the voltage node.
    """
    if l_s < 0:
        raise ValueError("l_s must be >= 0")
    leverage = math.cos(math.pi * geom.x_s / (2.0 * geom.l_f)) ** 2
    return -(2.0 / math.pi) * (geom.omega0 * l_s / geom.z0) * leverage


def _inductor_current_factor(geom: FilterGeometry, l_s: float, omega: float) -> float:
    """I_s / I(0): current at the inductor for unit current at the node.

    Uses the ideal-open standing-wave solution (c_g neglected in the
    profile).
    """
    beta = omega / geom.v_p
    l_r = geom.l_f - geom.x_s
    s_r = math.sin(beta * l_r)
    c_r = math.cos(beta * l_r)
    if abs(c_r) > _POLE_TAN * abs(s_r):
        raise TangentPole(f"cot(beta*l_r) at a pole for omega = {omega:.6e}")
    cot_r = c_r / s_r
    d = (math.cos(beta * geom.x_s)
         + (cot_r - omega * l_s / geom.z0) * math.sin(beta * geom.x_s))
    if d == 0.0 or not math.isfinite(d):
        raise TangentPole(f"current-profile node at the drive point, omega = {omega:.6e}")
    return 1.0 / d


def current_profile(
    geom: FilterGeometry,
    l_s: float,
    omega: float,
    i0: float,
    n_points: int = 201,
) -> tuple[np.ndarray, np.ndarray]:
    """Standing-wave current along the stub, normalized to I(0) = i0.

    Returns ``(x, current)`` arrays.  The open boundary enforces a current
    node at x = l_f; the current is continuous across the series inductor
    while the voltage steps by i w l_s I_s.  Derived for the ideal open end
    (c_g = 0); with l_s = 0 at exact quarter wave it reduces to
    I(x) = I(0) sin(b (l_f - x)) / sin(b l_f).
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    beta = omega / geom.v_p
    l_r = geom.l_f - geom.x_s
    factor = _inductor_current_factor(geom, l_s, omega)
    i_s = i0 * factor

    x = np.linspace(0.0, geom.l_f, n_points)
    current = np.empty(n_points, dtype=complex)
    left = x <= geom.x_s
    if l_r > 0.0:
        cot_r = math.cos(beta * l_r) / math.sin(beta * l_r)
    else:
        cot_r = math.inf
    coeff = cot_r - omega * l_s / geom.z0
    current[left] = i_s * (np.cos(beta * (geom.x_s - x[left]))
                           + coeff * np.sin(beta * (geom.x_s - x[left])))
    right = ~left
    if right.any():
        s_r = math.sin(beta * l_r)
        current[right] = i_s * np.sin(beta * (geom.l_f - x[right])) / s_r
    # The open end is an exact current node of the standing-wave form.
    current[-1] = 0.0 if geom.x_s < geom.l_f else current[-1]
    return x, current


def nonlinearity_margin(i_peak: float, ic_sq: float) -> tuple[float, bool]:
    """Linear-response margin 5 I_peak / Ic_sq and its < 0.25 design gate."""
    if ic_sq <= 0:
        raise ValueError("ic_sq must be positive")
    if i_peak < 0:
        raise ValueError("i_peak must be >= 0")
    margin = 5.0 * i_peak / ic_sq
    return margin, margin < 0.25


def qubit_admittance(geom: FilterGeometry, l_s: float, omega: float) -> complex:
    """Admittance seen by the qubit through the coupling capacitor c_d.

    Y_q = i w c_d / (1 + i w c_d Z_node) with Z_node the source impedance
    in parallel with the stub.  Re Y_q >= 0; it vanishes when omega equals
    the filter frequency (Z_in -> 0), decoupling the qubit from the line.
    """
    if omega <= 0:
        raise ValueError("omega must be positive")
    if geom.c_d == 0.0:
        return 0j
    z_in = input_impedance(geom, l_s, omega)
    zs = geom.z_source
    z_node = zs * z_in / (zs + z_in)
    return 1j * omega * geom.c_d / (1.0 + 1j * omega * geom.c_d * z_node)


def coupling_figures(
    geom: FilterGeometry,
    arr: SquidArray,
    qubit: QubitLoad,
    flux_ratio: float,
    drive_freq: float,
    mode: str = "strict",
    reference_flux: float = 0.0,
) -> CouplingFigures:
    """Qubit-filter coupling gamma_qf and derived figures at one bias.

    gamma_qf = Re Y_q(w, L_arr(flux)) / c_q evaluated at the drive
    frequency; t1_ext is its reciprocal (inf at exact cancellation) and
    t1_total folds in the internal loss channel in parallel.  The relative
    Rabi rate is sqrt(gamma_qf / gamma_ref) with the reference taken at
    ``reference_flux`` (zero flux by convention).
    """
    omega = 2.0 * math.pi * drive_freq
    l_s = squid_array_inductance(arr, flux_ratio, mode=mode)
    gamma = qubit_admittance(geom, l_s, omega).real / qubit.c_q
    gamma = max(gamma, 0.0)

    t1_ext = math.inf if gamma == 0.0 else 1.0 / gamma
    if qubit.t1_internal is None:
        t1_total = t1_ext
    elif math.isinf(t1_ext):
        t1_total = qubit.t1_internal
    else:
        t1_total = 1.0 / (1.0 / t1_ext + 1.0 / qubit.t1_internal)

    l_ref = squid_array_inductance(arr, reference_flux, mode=mode)
    gamma_ref = qubit_admittance(geom, l_ref, omega).real / qubit.c_q
    if gamma_ref > 0.0:
        rabi_relative = math.sqrt(gamma / gamma_ref)
    else:
        rabi_relative = math.nan
    return CouplingFigures(gamma, t1_ext, t1_total, rabi_relative)


@dataclass(frozen=True)
class FluxSweepRow:
    """One flux point of a sweep; ``error`` holds a failure marker, if any."""

    flux_ratio: float
    l_j_arr: float = math.nan
    f_f: float = math.nan
    gamma_qf: float = math.nan
    t1_ext: float = math.nan
    t1_total: float = math.nan
    rabi_rel: float = math.nan
    i_peak: float = math.nan
    margin: float = math.nan
    error: str | None = None


def flux_sweep(
    geom: FilterGeometry,
    arr: SquidArray,
    qubit: QubitLoad,
    flux_grid,
    drive_freq: float,
    mode: str = "clamped",
    i_node: float = 2e-7,
    reference_flux: float = 0.0,
) -> list[FluxSweepRow]:
    """Tabulate inductance, filter frequency and coupling over a flux grid.

    Rows are independent and deterministic; a failing flux point yields a
    row whose ``error`` field names the exception instead of aborting the
    sweep.  ``i_node`` sets the drive-current amplitude at the node used
    for the peak-current and nonlinearity-margin columns (the 0.2 uA
    default corresponds to roughly -80 dBm available drive on a 50 ohm
    line).
    """
    flux_grid = list(flux_grid)
    if not flux_grid:
        raise ValueError("flux_grid must be non-empty")
    omega = 2.0 * math.pi * drive_freq

    try:
        l_ref = squid_array_inductance(arr, reference_flux, mode=mode)
        gamma_ref = qubit_admittance(geom, l_ref, omega).real / qubit.c_q
    except FluxlineError:
        gamma_ref = math.nan

    rows = []
    for flux in flux_grid:
        fields = {"flux_ratio": flux}
        try:
            fields["l_j_arr"] = l_j = squid_array_inductance(arr, flux, mode=mode)
            ic_sq = _effective_ic_sq(arr, flux, mode)
            fields["f_f"] = filter_frequency_exact(geom, l_j)
            gamma = max(qubit_admittance(geom, l_j, omega).real / qubit.c_q, 0.0)
            fields["gamma_qf"] = gamma
            t1_ext = math.inf if gamma == 0.0 else 1.0 / gamma
            fields["t1_ext"] = t1_ext
            if qubit.t1_internal is None:
                fields["t1_total"] = t1_ext
            elif math.isinf(t1_ext):
                fields["t1_total"] = qubit.t1_internal
            else:
                fields["t1_total"] = 1.0 / (1.0 / t1_ext + 1.0 / qubit.t1_internal)
            fields["rabi_rel"] = (math.sqrt(gamma / gamma_ref)
                                  if gamma_ref > 0.0 else math.nan)
            i_peak = abs(i_node * _inductor_current_factor(geom, l_j, omega))
            fields["i_peak"] = i_peak
            fields["margin"] = nonlinearity_margin(i_peak, ic_sq)[0]
        except FluxlineError as exc:
            fields["error"] = type(exc).__name__
        rows.append(FluxSweepRow(**fields))
    return rows
