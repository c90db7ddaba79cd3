#!/usr/bin/env python3
"""Regenerate the material golden fixtures from a standalone reference.

This script deliberately does not import the library.  Every law is
written out again, scalar and in arbitrary precision with mpmath, from
the published formulas; derivatives are taken numerically by mpmath
rather than by hand.  The fixtures it writes are what the library is
compared against in the test-suite and by ``hygrotherm --validate-materials``.

Usage::

    python tools/make_goldens.py [output_dir]
"""

from __future__ import annotations

import csv
import sys
from pathlib import Path

import mpmath as mp

mp.mp.dps = 40

DEFAULT_OUT = Path(__file__).resolve().parents[1] / "src" / "hygrotherm" / "data" / "golden"

# Table-1 constants of the benchmark concrete.
CEMENT = mp.mpf(300)
POROSITY = mp.mpf("0.1")
KAPPA_0 = mp.mpf("1e-13")
F_T0 = mp.mpf("2e6")
T0 = mp.mpf("273.15")


def celsius(theta):
    return theta - T0


# -- thermal and caloric laws ---------------------------------------------

def conductivity(theta):
    x = celsius(theta) / 100
    lower = 2 - mp.mpf("0.2451") * x + mp.mpf("0.0107") * x**2
    upper = mp.mpf("1.36") - mp.mpf("0.136") * x + mp.mpf("0.0057") * x**2
    return (lower + upper) / 2


def heat_capacity(theta):
    x = celsius(theta) / 120
    return 900 + 80 * x - 4 * x**2


def dehydration(theta):
    if theta <= mp.mpf("373.15"):
        return mp.mpf(0)
    if theta <= mp.mpf("973.15"):
        return mp.mpf("0.04") * CEMENT * (theta - mp.mpf("373.15")) / 100
    return mp.mpf("0.24") * CEMENT


def watson(theta):
    gap = mp.mpf("647.3") - theta
    return mp.mpf("2.672e5") * gap ** mp.mpf("0.38") if gap > 0 else mp.mpf(0)


def strength(theta):
    if theta <= mp.mpf("373.15"):
        f = mp.mpf(1)
    elif theta <= mp.mpf("823.15"):
        f = (mp.mpf("873.15") - theta) / 500
    elif theta <= mp.mpf("1473.15"):
        f = (mp.mpf("1473.15") - theta) / 6500
    else:
        f = mp.mpf(0)
    return F_T0 * f


# -- water substance (IAPWS) ----------------------------------------------

TC = mp.mpf("647.096")
RHO_C = mp.mpf(322)
N = [mp.mpf(s) for s in (
    "0.11670521452767e4", "-0.72421316598320e6", "-0.17073846940092e2",
    "0.12020824702470e5", "-0.32325550322333e7", "0.14915108613530e2",
    "-0.48232657361591e4", "0.40511340542057e6", "-0.23855557567849",
    "0.65017534844798e3",
)]


def psat_if97(T):
    v = T + N[8] / (T - N[9])
    A = v**2 + N[0] * v + N[1]
    B = N[2] * v**2 + N[3] * v + N[4]
    C = N[5] * v**2 + N[6] * v + N[7]
    return mp.mpf(10) ** 6 * (2 * C / (-B + mp.sqrt(B**2 - 4 * A * C))) ** 4


def psat(theta):
    if theta <= TC:
        return psat_if97(theta)
    slope = mp.diff(lambda s: mp.log(psat_if97(s)), TC, direction=-1)
    return psat_if97(TC) * mp.exp(slope * (theta - TC))


def rho_liquid(theta):
    if theta >= TC:
        return RHO_C
    tau = 1 - theta / TC
    b = [mp.mpf(s) for s in ("1.99274064", "1.09965342", "-0.510839303", "-1.75493479",
                              "-45.5170352", "-6.74694450e5")]
    e = [mp.mpf(k) / 3 for k in (1, 2, 5, 16, 43, 110)]
    return RHO_C * (1 + sum(bi * tau**ei for bi, ei in zip(b, e)))


# -- Bazant-Thonguthai permeability and isotherm --------------------------

def permeability(theta, P):
    rh = min(max(P / psat(theta), mp.mpf(0)), mp.mpf(1))

    def f2(t):
        return mp.exp(2700 * (1 / mp.mpf("298.15") - 1 / t))

    if theta <= mp.mpf("368.15"):
        f1 = mp.mpf("0.05") + mp.mpf("0.95") / (1 + ((1 - rh) / mp.mpf("0.25")) ** 4)
        return KAPPA_0 * f1 * f2(theta)
    tc = celsius(theta) - 95
    return KAPPA_0 * f2(mp.mpf("368.15")) * mp.exp(tc / (mp.mpf("0.881") + mp.mpf("0.214") * tc))


W1 = POROSITY * rho_liquid(mp.mpf("298.15"))


def dry(rh, theta):
    tp = ((celsius(theta) + 10) / 35) ** 2
    m = mp.mpf("1.04") - tp / (mp.mpf("22.34") + tp)
    return CEMENT * (W1 * rh / CEMENT) ** (1 / m)


def wet(rh, theta):
    return (POROSITY * rho_liquid(theta) + dehydration(theta)) * (1 + mp.mpf("0.12") * (rh - mp.mpf("1.04")))


def isotherm(theta, P):
    if P <= 0 or theta <= 0:
        return mp.mpf(0)
    rh = P / psat(theta)
    lo, hi = mp.mpf("0.96"), mp.mpf("1.04")
    if rh < lo:
        return dry(rh, theta)
    if rh > hi:
        return wet(rh, theta)
    # Cubic in RH matching value and RH-slope of both branches at the junctions.
    y0, y1 = dry(lo, theta), wet(hi, theta)
    d0 = mp.diff(lambda r: dry(r, theta), lo)
    d1 = mp.diff(lambda r: wet(r, theta), hi)
    h = hi - lo
    s = (rh - lo) / h
    return ((2 * s**3 - 3 * s**2 + 1) * y0 + (s**3 - 2 * s**2 + s) * h * d0
            + (-2 * s**3 + 3 * s**2) * y1 + (s**3 - s**2) * h * d1)


# -- sampling --------------------------------------------------------------

def as_double(x):
    """Round to the nearest double so the library sees exactly the same inputs."""
    return mp.mpf(float(x))


def linspace(a, b, n):
    return [as_double(mp.mpf(a) + (mp.mpf(b) - mp.mpf(a)) * k / (n - 1)) for k in range(n)]


def away_from(values, kinks, width="1e-3"):
    return [v for v in values if all(abs(v - k) > mp.mpf(width) for k in kinks)]


KINKS = [mp.mpf("373.15"), mp.mpf("973.15"), TC, mp.mpf("647.3"), mp.mpf("368.15"),
         mp.mpf("823.15"), mp.mpf("1473.15")]


def temperature_table(fn, lo, hi, n=61):
    return [(t, mp.mpf(0), fn(t)) for t in away_from(linspace(lo, hi, n), KINKS)]


def isotherm_points():
    temps = away_from(linspace("275.15", "1100.15", 12), KINKS, "5e-2")
    rhs = [mp.mpf(s) for s in ("0.05", "0.3", "0.6", "0.8689", "0.95", "0.97", "0.99", "1.0",
                               "1.02", "1.03", "1.1", "1.5")]
    return [(t, as_double(r * psat(t))) for t in temps for r in rhs]


def isotherm_tables():
    pts = isotherm_points()
    w = [(t, p, isotherm(t, p)) for t, p in pts]
    dt = [(t, p, mp.diff(lambda s: isotherm(s, p), t)) for t, p in pts]
    dp = [(t, p, mp.diff(lambda s: isotherm(t, s), p)) for t, p in pts]
    return w, dt, dp


def permeability_table():
    temps = away_from(linspace("275.15", "1200.15", 10), KINKS, "5e-2")
    rhs = [mp.mpf(s) for s in ("0.1", "0.5", "0.75", "0.9", "1.0", "1.2")]
    pts = [(t, as_double(r * psat(t))) for t in temps for r in rhs]
    return [(t, p, permeability(t, p)) for t, p in pts]


def tables():
    iso_w, iso_dt, iso_dp = isotherm_tables()
    return {
        "thermal_conductivity": temperature_table(conductivity, 250, 1600),
        "specific_heat_solid": temperature_table(heat_capacity, 250, 1600),
        "dehydrated_water": temperature_table(dehydration, 250, 1600),
        "dehydrated_water_slope": temperature_table(lambda t: mp.diff(dehydration, t), 250, 1600),
        "evaporation_enthalpy": temperature_table(watson, 250, 700),
        "saturation_pressure": temperature_table(psat, "273.15", 900),
        "saturation_pressure_slope": temperature_table(lambda t: mp.diff(psat, t), "273.15", 900),
        "liquid_density": temperature_table(rho_liquid, "273.15", 700),
        "tensile_strength": temperature_table(strength, 250, 1600),
        "permeability": permeability_table(),
        "sorption_isotherm": iso_w,
        "sorption_isotherm_dtheta": iso_dt,
        "sorption_isotherm_dP": iso_dp,
    }


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    out = Path(argv[0]) if argv else DEFAULT_OUT
    out.mkdir(parents=True, exist_ok=True)
    for name, rows in tables().items():
        with (out / f"{name}.csv").open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["theta_K", "P_Pa", "value"])
            for t, p, v in rows:
                writer.writerow([repr(float(t)), repr(float(p)), repr(float(v))])
        print(f"{name}: {len(rows)} points")
    return 0


if __name__ == "__main__":
    sys.exit(main())
