"""Reproduce the aliasing instability by freezing the ray grid density.

The discretized physical-optics sum needs several rays per wavelength to
sample the phase term exp(-2jkR). Holding the grid spacing fixed while the
frequency rises must therefore eventually break the prediction: accuracy
holds while spacing <= lambda/5 and collapses once spacing > lambda/2.

Runtime: about a minute.
"""

import math

import sbr

RADIUS = 1.0
SPACING = (2 * math.pi / 50.0) / 5.0  # lambda/5 at kr = 50, then frozen

kr_scan = [20.0, 30.0, 40.0, 50.0, 80.0, 125.0, 150.0, 200.0, 250.0]
report = sbr.validate_sphere(RADIUS, kr_scan, fixed_spacing=SPACING,
                             subdivisions=6, n_directions=32, workers=2)

print(f"frozen spacing {SPACING:.5f} m "
      f"(= lambda/5 at kr=50)\n")
print(f"{'kr':>6} {'spacing/lambda':>15} {'rel_err':>9}  regime")
for row in report.rows:
    lam = 2 * math.pi * RADIUS / row.kr
    ratio = row.spacing_m / lam
    if ratio <= 0.2:
        regime = "compliant (<= lambda/5)"
    elif ratio <= 0.5:
        regime = "marginal"
    else:
        regime = "aliased (> lambda/2)"
    print(f"{row.kr:6g} {ratio:15.3f} {row.rel_error:9.2%}  {regime}")

print("\nThe error stays at the percent level while the sampling rule holds")
print("and grows without bound once the grid undersamples the phase; the")
print("cure is denser rays, at quadratically growing cost.")
