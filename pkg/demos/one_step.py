# One outer function against one hidden-layer adversary, for f(x, y) = x*y.
import numpy as np

from adversarial_ka import Identity, random_rational_affine
from adversarial_ka.engine import appx_eval, lemma_single
from adversarial_ka.targets import make_target

f = make_target("xy")
rng = np.random.default_rng(0)

for h in (Identity(5), random_rational_affine(5, rng)):
    phi, g, rep = lemma_single(f, h, alpha=1 / 15)
    print(type(h).__name__, "N =", rep.N, "knots =", rep.knots)
    print("  grid error %.4f  (bound %.4f)" % (rep.grid_error, rep.bound))
    print("  |g| = %.6f  Lip(g) = %.3g  closest knots %.2e" % (rep.g_norm, rep.g_lip, rep.min_gap))

# a single step leaves an error of up to about 2/3 of the size of f
pts = np.array([[0.2, 0.3], [0.5, 0.5], [0.9, 0.8]])
print(np.c_[pts, f(pts), appx_eval(phi, g, pts)])
