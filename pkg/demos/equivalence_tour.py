"""
One round of each solver family from a shared starting point.

WMMSE, WSR-FP and WSR-MM land on the same beamformers; WSR-MM+ and WSR-FP+
land on the same projected gradient step. Run with ``python3
demos/equivalence_tour.py``.
"""
import numpy as np

from wsrmax import calculus as calc, miso, mimo
from wsrmax.system_model import (GeometryConfig, generate_mimo, generate_miso,
                                 init_rng, random_beamformers_mimo,
                                 random_beamformers_miso, wsr_miso)

geo = GeometryConfig(seed=21)
scn = generate_miso(geo, 4, 4)
W0 = random_beamformers_miso(scn, init_rng(21))
print(f"MISO start: WSR = {wsr_miso(scn, W0):.6f} nats")

W_wmmse, aux = miso.wmmse_step(scn, W0)
W_fp, _ = miso.fp_step(scn, W0)
W_mm = miso.mm_step(scn, W0)
print("max |WMMSE - MM| =", np.abs(W_wmmse - W_mm).max())
print("max |FP    - MM| =", np.abs(W_fp - W_mm).max())
print(f"shared multiplier mu = {aux.mu:.6g}, "
      f"WSR after one round = {wsr_miso(scn, W_mm):.6f}")

# MM+ is a gradient step of length 1/(2 eta), then a rescale onto the ball
W_plus, q, eta = miso.mm_plus_step(scn, W0)
g = calc.grad_wsr_miso(scn, W0)
print("max |q - (W + g/(2 eta))| =", np.abs(q - (W0 + g / (2 * eta))).max())
W_fpp, _ = miso.fp_plus_step(scn, W0)
print("max |MM+ - FP+| =", np.abs(W_plus - W_fpp).max())

# same story on the interference channel, one power budget per link
mscn = generate_mimo(geo, 3, 4, 4, 2)
Ws = random_beamformers_mimo(mscn, init_rng(21))
a, _ = mimo.wmmse_step_mimo(mscn, Ws)
b, _ = mimo.fp_step_mimo(mscn, Ws)
c = mimo.mm_step_mimo(mscn, Ws)
print("MIMO max |WMMSE - MM| =", max(np.abs(x - y).max() for x, y in zip(a, c)))
print("MIMO max |FP    - MM| =", max(np.abs(x - y).max() for x, y in zip(b, c)))
