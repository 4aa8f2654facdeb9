#!/usr/bin/env python3
"""Working with Antoine vapor-pressure curves.

The correlation is ln(p/kPa) = A - B/(C + T/K); with B > 0 the curve rises
monotonically, and it inverts in closed form to a boiling temperature.
"""

import numpy as np

from grappa import AntoineParams, boiling_temperature, ln_vapor_pressure, vapor_pressure

params = AntoineParams(A=14.2, B=3800.0, C=-60.0)

print("T [K]    p [kPa]")
for t in np.linspace(300.0, 480.0, 7):
    print(f"{t:6.1f}  {vapor_pressure(params, t) / 1000.0:10.4f}")

t_b = boiling_temperature(params, 101_325.0)
print(f"\nnormal boiling point: {t_b:.2f} K")
print(f"check: p({t_b:.2f} K) = {vapor_pressure(params, t_b):.1f} Pa")

# The inversion is exact: a full round trip returns the input temperature.
t0 = 390.0
roundtrip = boiling_temperature(params, vapor_pressure(params, t0))
print(f"round trip at {t0} K -> {roundtrip:.12f} K")

# ln form, handy for plotting on the usual axes.
temps = np.linspace(320.0, 460.0, 5)
print("\nln(p/kPa):", np.round(ln_vapor_pressure(params, temps), 4))
