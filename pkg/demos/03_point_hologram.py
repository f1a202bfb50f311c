"""Point-source holograms and angular-spectrum reconstruction.

Computes the hologram of three points at different depths, then propagates
it back to each depth and shows where the light focuses.

    python3 demos/03_point_hologram.py
"""

import numpy as np

from holoquant import optics
from holoquant.optics import ScenePoint

n, pitch, lam = 128, optics.PITCH, 520e-9
points = [
    ScenePoint(0.0, 0.0, 4e-3),
    ScenePoint(0.15e-3, -0.1e-3, 6e-3, amplitude=0.8),
    ScenePoint(-0.2e-3, 0.2e-3, 9e-3, amplitude=0.6),
]
holo = optics.pbm_hologram(points, n, n, pitch, lam)
print(f"hologram {n}x{n}, pitch {pitch * 1e6:.0f} um, wavelength {lam * 1e9:.0f} nm")

for p in points:
    img = optics.intensity(optics.asm_propagate(holo, -p.z))
    # the other two points are out of focus here, so this point is brightest
    cx, cy = p.x / pitch + n / 2, p.y / pitch + n / 2
    iy, ix = np.unravel_index(np.argmax(img), img.shape)
    print(f"z = {p.z * 1e3:4.1f} mm: brightest pixel ({ix:3d}, {iy:3d}), point at ({cx:5.1f}, {cy:5.1f})")

# Propagation is unitary: forward then backward gives the field back.
back = optics.asm_propagate(optics.asm_propagate(holo, 6e-3), -6e-3)
err = np.abs(back.values - holo.values).max() / np.abs(holo.values).max()
print(f"\nround trip +6 mm / -6 mm: max relative error {err:.1e}")
print(f"energy before {holo.energy():.6e}, after 6 mm {optics.asm_propagate(holo, 6e-3).energy():.6e}")
