"""Constitutive laws for concrete at high temperature.

Every law is a vectorised function of temperature ``theta`` [K] and, where
relevant, pore pressure ``P`` [Pa].  Laws that the Newton solver
differentiates also return their derivatives.

Units are SI throughout: K, Pa, kg/m^3, s.  Formulas written in degrees
Celsius use an explicit 273.15 K offset.

The single-phase sorption isotherm and the permeability law follow the
Bazant-Thonguthai (1978) relations:

* drying range (RH <= 0.96)::

      w = c * (w1 * RH / c) ** (1 / m(theta))
      m = 1.04 - T' / (22.34 + T'),   T' = ((T_C + 10) / (25 + 10))**2

  with ``w1`` the saturation water content at 25 C (taken as
  ``porosity * rho_w(298.15 K)``);

* saturated range (RH >= 1.04)::

      w = (porosity * rho_w(theta) + w_d(theta)) * (1 + 0.12 * (RH - 1.04))

  i.e. the pore space grows by the dehydrated water volume, liquid water
  has the saturated-liquid density and the volumetric strain is neglected;

* a C1 cubic Hermite bridge in RH on [0.96, 1.04].

Permeability::

      kappa = kappa_0 * f1(RH) * f2(theta)          theta <= 368.15 K
      kappa = kappa_0 * f2(368.15) * f3(theta)      theta >  368.15 K
      f1 = alpha + (1 - alpha) / (1 + ((1 - RH) / (1 - RH_c))**4),  f1(RH >= 1) = 1
      f2 = exp(Q/R * (1/298.15 - 1/theta)),   Q/R = 2700 K
      f3 = exp((T_C - 95) / (0.881 + 0.214 * (T_C - 95)))
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields

import numpy as np

ZERO_CELSIUS = 273.15
CRITICAL_TEMPERATURE_WATSON = 647.3
# IAPWS-IF97 critical point, used by the steam-table correlations.
CRITICAL_TEMPERATURE = 647.096
CRITICAL_DENSITY = 322.0

RH_DRY_LIMIT = 0.96
RH_WET_LIMIT = 1.04

DEHYDRATION_ONSET = 373.15
DEHYDRATION_END = 973.15

PERMEABILITY_SWITCH = 368.15
PERMEABILITY_REFERENCE = 298.15
PERMEABILITY_ACTIVATION = 2700.0
PERMEABILITY_ALPHA = 0.05
PERMEABILITY_RH_CRITICAL = 0.75

_IF97_N = (
    0.11670521452767e4,
    -0.72421316598320e6,
    -0.17073846940092e2,
    0.12020824702470e5,
    -0.32325550322333e7,
    0.14915108613530e2,
    -0.48232657361591e4,
    0.40511340542057e6,
    -0.23855557567849,
    0.65017534844798e3,
)

_RHO_LIQ_B = (
    1.99274064,
    1.09965342,
    -0.510839303,
    -1.75493479,
    -45.5170352,
    -6.74694450e5,
)
_RHO_LIQ_EXP = (1.0 / 3.0, 2.0 / 3.0, 5.0 / 3.0, 16.0 / 3.0, 43.0 / 3.0, 110.0 / 3.0)


@dataclass(frozen=True)
class MaterialConstants:
    """Material constants of the concrete.

    Parameters
    ----------
    rho_s : float
        Density of the solid microstructure [kg/m^3].
    C_w : float
        Isobaric heat capacity of liquid water [J/(kg K)].
    h_d : float
        Enthalpy of dehydration [J/kg].
    cement : float
        Mass of cement per m^3 of concrete [kg/m^3].
    kappa_0 : float
        Reference permeability [m/s].
    g : float
        Gravitational acceleration [m/s^2].
    porosity : float
        Porosity of concrete [-].
    f_t0 : float
        Initial tensile strength [Pa].
    """

    rho_s: float = 2400.0
    C_w: float = 4181.0
    h_d: float = 2.4e6
    cement: float = 300.0
    kappa_0: float = 1.0e-13
    g: float = 9.81
    porosity: float = 0.1
    f_t0: float = 2.0e6

    def __post_init__(self):
        for f in fields(self):
            value = getattr(self, f.name)
            if not np.isfinite(value) or value <= 0.0:
                raise ValueError(f"material constant {f.name} must be positive, got {value!r}")
        if self.porosity >= 1.0:
            raise ValueError(f"porosity must lie in (0, 1), got {self.porosity!r}")

    @property
    def saturation_water_content(self) -> float:
        """Water content of saturated concrete at 25 C [kg/m^3]."""
        return self.porosity * float(liquid_density(298.15)[0])

    def as_dict(self) -> dict[str, float]:
        return asdict(self)


DEFAULT_MATERIAL = MaterialConstants()


def _arr(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float))


def thermal_conductivity(theta):
    """Mean of the lower and upper Eurocode conductivity limits [W/(m K)]."""
    x = (_arr(theta) - ZERO_CELSIUS) / 100.0
    lower = 2.0 - 0.2451 * x + 0.0107 * x**2
    upper = 1.36 - 0.136 * x + 0.0057 * x**2
    return 0.5 * (lower + upper)


def specific_heat_solid(theta):
    """Isobaric heat capacity of the solid skeleton [J/(kg K)]."""
    x = (_arr(theta) - ZERO_CELSIUS) / 120.0
    return 900.0 + 80.0 * x - 4.0 * x**2


def dehydrated_water(theta, mat: MaterialConstants = DEFAULT_MATERIAL):
    """Mass of water released by dehydration and its temperature slope.

    The slope at the kinks 373.15 K and 973.15 K is the left one-sided value.

    Returns
    -------
    w_d : ndarray
        Dehydrated water [kg/m^3].
    dw_d : ndarray
        d w_d / d theta [kg/(m^3 K)].
    """
    theta = _arr(theta)
    rate = 0.04 * mat.cement / 100.0
    w_d = rate * np.clip(theta - DEHYDRATION_ONSET, 0.0, DEHYDRATION_END - DEHYDRATION_ONSET)
    active = (theta > DEHYDRATION_ONSET) & (theta <= DEHYDRATION_END)
    dw_d = np.where(active, rate, 0.0)
    return w_d, dw_d


def evaporation_enthalpy(theta):
    """Watson equation for the enthalpy of evaporation [J/kg]; zero above 647.3 K."""
    theta = _arr(theta)
    gap = np.maximum(CRITICAL_TEMPERATURE_WATSON - theta, 0.0)
    return 2.672e5 * gap**0.38


def _if97_saturation(theta):
    n1, n2, n3, n4, n5, n6, n7, n8, n9, n10 = _IF97_N
    d = theta - n10
    v = theta + n9 / d
    dv = 1.0 - n9 / d**2
    a = v * v + n1 * v + n2
    b = n3 * v * v + n4 * v + n5
    c = n6 * v * v + n7 * v + n8
    da = (2.0 * v + n1) * dv
    db = (2.0 * n3 * v + n4) * dv
    dc = (2.0 * n6 * v + n7) * dv
    disc = np.sqrt(b * b - 4.0 * a * c)
    ddisc = (b * db - 2.0 * (da * c + a * dc)) / disc
    den = disc - b
    q = 2.0 * c / den
    dq = (2.0 * dc * den - 2.0 * c * (ddisc - db)) / den**2
    p = 1.0e6 * q**4
    dp = 1.0e6 * 4.0 * q**3 * dq
    return p, dp


_P_CRIT, _DP_CRIT = (float(v[0]) for v in _if97_saturation(np.array([CRITICAL_TEMPERATURE])))
_DLNP_CRIT = _DP_CRIT / _P_CRIT


def saturation_pressure(theta, derivative: bool = False):
    """Vapour saturation pressure [Pa] (IAPWS-IF97 saturation line).

    Above the critical temperature the curve is continued linearly in
    ``log(P)`` with the slope it has at the critical point, so that
    relative humidity stays defined in the dry, hot zone.
    """
    theta = _arr(theta)
    below = theta <= CRITICAL_TEMPERATURE
    t_low = np.where(below, theta, CRITICAL_TEMPERATURE)
    p_low, dp_low = _if97_saturation(t_low)
    p_high = _P_CRIT * np.exp(_DLNP_CRIT * (theta - CRITICAL_TEMPERATURE))
    p = np.where(below, p_low, p_high)
    if not derivative:
        return p
    dp = np.where(below, dp_low, _DLNP_CRIT * p_high)
    return p, dp


def liquid_density(theta, derivative: bool = False):
    """Density of saturated liquid water [kg/m^3] (IAPWS auxiliary equation).

    Held at the critical density above the critical temperature.
    """
    theta = _arr(theta)
    tau = np.clip(1.0 - theta / CRITICAL_TEMPERATURE, 0.0, None)
    rho = np.ones_like(tau)
    drho_dtau = np.zeros_like(tau)
    pos = tau > 0.0
    for b, e in zip(_RHO_LIQ_B, _RHO_LIQ_EXP):
        rho = rho + b * tau**e
        drho_dtau[pos] += b * e * tau[pos] ** (e - 1.0)
    rho = CRITICAL_DENSITY * rho
    if not derivative:
        return rho
    drho = -CRITICAL_DENSITY * drho_dtau / CRITICAL_TEMPERATURE
    return rho, drho


def relative_humidity(theta, P):
    return _arr(P) / saturation_pressure(theta)


def permeability(theta, P, mat: MaterialConstants = DEFAULT_MATERIAL):
    """Permeability of concrete kappa(theta, P) [m/s]; strictly positive."""
    theta = _arr(theta)
    rh = np.clip(relative_humidity(theta, P), 0.0, 1.0)
    ratio = (1.0 - rh) / (1.0 - PERMEABILITY_RH_CRITICAL)
    f1 = PERMEABILITY_ALPHA + (1.0 - PERMEABILITY_ALPHA) / (1.0 + ratio**4)

    def f2(t):
        return np.exp(PERMEABILITY_ACTIVATION * (1.0 / PERMEABILITY_REFERENCE - 1.0 / t))

    excess = np.maximum(theta - PERMEABILITY_SWITCH, 0.0)
    f3 = np.exp(excess / (0.881 + 0.214 * excess))
    hot = theta > PERMEABILITY_SWITCH
    factor = np.where(hot, f2(PERMEABILITY_SWITCH) * f3, f1 * f2(np.where(hot, PERMEABILITY_SWITCH, theta)))
    return mat.kappa_0 * np.maximum(factor, np.finfo(float).tiny)


def _isotherm_exponent(theta):
    """m(theta) of the drying branch and its temperature derivative."""
    tc = theta - ZERO_CELSIUS
    tp = ((tc + 10.0) / 35.0) ** 2
    dtp = 2.0 * (tc + 10.0) / 35.0**2
    m = 1.04 - tp / (22.34 + tp)
    dm = -22.34 / (22.34 + tp) ** 2 * dtp
    return m, dm


def _dry_branch(rh, theta, mat):
    """Drying branch value with partials in RH and theta (theta at fixed RH)."""
    c = mat.cement
    a = mat.saturation_water_content / c
    m, dm = _isotherm_exponent(theta)
    x = np.maximum(a * rh, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        logx = np.log(x)
        w = np.where(x > 0.0, c * np.exp(logx / m), 0.0)
        w_rh = np.where(x > 0.0, w / (m * rh), 0.0)
        w_t = np.where(x > 0.0, -w * logx * dm / m**2, 0.0)
        # d(w_rh)/d theta at fixed RH, needed for the Hermite end slopes
        w_rh_t = np.where(x > 0.0, w_t / (m * rh) - w * dm / (m**2 * rh), 0.0)
    return w, w_rh, w_t, w_rh_t


def _wet_branch(rh, theta, mat):
    rho, drho = liquid_density(theta, derivative=True)
    w_d, dw_d = dehydrated_water(theta, mat)
    cap = mat.porosity * rho + w_d
    dcap = mat.porosity * drho + dw_d
    swell = 1.0 + 0.12 * (rh - RH_WET_LIMIT)
    return cap * swell, 0.12 * cap, dcap * swell, 0.12 * dcap


def _isotherm_rh(rh, theta, mat):
    """Sorption isotherm in (RH, theta) coordinates with both partials."""
    w = np.empty_like(rh)
    w_rh = np.empty_like(rh)
    w_t = np.empty_like(rh)

    dry = rh < RH_DRY_LIMIT
    wet = rh > RH_WET_LIMIT
    mid = ~(dry | wet)

    if dry.any():
        v, d, t, _ = _dry_branch(rh[dry], theta[dry], mat)
        w[dry], w_rh[dry], w_t[dry] = v, d, t
    if wet.any():
        v, d, t, _ = _wet_branch(rh[wet], theta[wet], mat)
        w[wet], w_rh[wet], w_t[wet] = v, d, t
    if mid.any():
        th = theta[mid]
        lo = np.full_like(th, RH_DRY_LIMIT)
        hi = np.full_like(th, RH_WET_LIMIT)
        y0, d0, y0t, d0t = _dry_branch(lo, th, mat)
        y1, d1, y1t, d1t = _wet_branch(hi, th, mat)
        span = RH_WET_LIMIT - RH_DRY_LIMIT
        s = (rh[mid] - RH_DRY_LIMIT) / span
        h00 = 2 * s**3 - 3 * s**2 + 1
        h10 = s**3 - 2 * s**2 + s
        h01 = -2 * s**3 + 3 * s**2
        h11 = s**3 - s**2
        dh00 = (6 * s**2 - 6 * s) / span
        dh10 = (3 * s**2 - 4 * s + 1) / span
        dh01 = (-6 * s**2 + 6 * s) / span
        dh11 = (3 * s**2 - 2 * s) / span
        w[mid] = h00 * y0 + h10 * span * d0 + h01 * y1 + h11 * span * d1
        w_rh[mid] = dh00 * y0 + dh10 * span * d0 + dh01 * y1 + dh11 * span * d1
        w_t[mid] = h00 * y0t + h10 * span * d0t + h01 * y1t + h11 * span * d1t
    return w, w_rh, w_t


def isotherm_breakpoints(theta, mat: MaterialConstants = DEFAULT_MATERIAL):
    """Relative humidities where the isotherm changes curvature, shape (n, 3).

    Columns are the dry junction, the inflection point of the cubic bridge
    (or the junction midpoint if the bridge has none) and the wet junction.
    """
    th = _arr(theta)
    lo = np.full_like(th, RH_DRY_LIMIT)
    hi = np.full_like(th, RH_WET_LIMIT)
    span = RH_WET_LIMIT - RH_DRY_LIMIT
    y0, d0, _, _ = _dry_branch(lo, th, mat)
    y1, d1, _, _ = _wet_branch(hi, th, mat)
    m0, m1 = span * d0, span * d1
    a = 2 * y0 + m0 - 2 * y1 + m1
    b = -3 * y0 - 2 * m0 + 3 * y1 - m1
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(a != 0.0, -b / (3 * a), 0.5)
    s = np.where((s > 0.0) & (s < 1.0), s, 0.5)
    return np.column_stack([lo, RH_DRY_LIMIT + s * span, hi])


def sorption_isotherm(theta, P, mat: MaterialConstants = DEFAULT_MATERIAL):
    """Evaporable water content w = Phi(theta, P) and its partial derivatives.

    Returns
    -------
    w : ndarray
        Water content [kg/m^3], zero when ``P <= 0`` or ``theta <= 0``.
    dw_dtheta : ndarray
        Partial derivative at fixed pressure [kg/(m^3 K)].
    dw_dP : ndarray
        Partial derivative at fixed temperature [kg/(m^3 Pa)].
    """
    theta, P = np.broadcast_arrays(_arr(theta), _arr(P))
    theta = theta.astype(float, copy=True)
    P = P.astype(float, copy=True)
    w = np.zeros_like(theta)
    dw_dtheta = np.zeros_like(theta)
    dw_dP = np.zeros_like(theta)
    ok = (P > 0.0) & (theta > 0.0)
    if ok.any():
        th = theta[ok]
        psat, dpsat = saturation_pressure(th, derivative=True)
        rh = P[ok] / psat
        v, v_rh, v_t = _isotherm_rh(rh, th, mat)
        w[ok] = np.maximum(v, 0.0)
        dw_dP[ok] = v_rh / psat
        dw_dtheta[ok] = v_t - v_rh * rh * dpsat / psat
    return w, dw_dtheta, dw_dP


def tensile_strength(theta, mat: MaterialConstants = DEFAULT_MATERIAL):
    """Temperature-dependent tensile strength of concrete [Pa]."""
    theta = _arr(theta)
    factor = np.select(
        [theta <= 373.15, theta <= 823.15, theta <= 1473.15],
        [np.ones_like(theta), (873.15 - theta) / 500.0, (1473.15 - theta) / 6500.0],
        default=0.0,
    )
    return mat.f_t0 * factor
