# What goes wrong when the adversary moves: forced positions slide past
# each other and the single outer function has to get steep.
import numpy as np

from adversarial_ka import CoordMonotonePoly
from adversarial_ka.engine import lemma_single
from adversarial_ka.probes import affine_commute_check, corner_obstruction, equicontinuity_probe
from adversarial_ka.targets import make_target

f = make_target("xy")
rep = equicontinuity_probe(f)
v = rep.verdict
print("path through pair", rep.params["pair"], "stopping at t* = %.3e" % rep.params["t_star"])
print("smallest gap / baseline %.2e, largest Lip / baseline %.1f" % (v["min_gap_ratio"], v["lip_ratio"]))
print("mechanism observed:", v["mechanism_observed"])
worst = max(rep.rows, key=lambda r: r["lip"])
print("at t = %.4e: Lip %.3g, fresh g error %.4f, stale g error %.4f"
      % (worst["t"], worst["lip"], worst["grid_error"], worst["reuse_error"]))

# applying the adversary after the weighted sum is harmless only for affine maps
h = CoordMonotonePoly.uniform(5, [0, 1, 0, 1])
phi, g, _ = lemma_single(f, h, alpha=1 / 15)
print("cubic adversary: per-neuron vs summed %.3f" % affine_commute_check(h, phi, g))

# and a sum of one-variable functions cannot fit a checkerboard
print("best additive fit of [[1, -1], [-1, 1]]:", corner_obstruction(np.array([[1, -1], [-1, 1]])))
