# Different adversaries on the two input coordinates.
from fractions import Fraction

from adversarial_ka import Identity, Translation
from adversarial_ka.engine import lemma_multi
from adversarial_ka.targets import make_target

hs = [Identity(5), Translation((Fraction(1, 7),) * 5)]
tuples, g, rep = lemma_multi(make_target("xy"), hs, alpha=1 / 15)
print("grid error %.4f (bound %.4f)" % (rep.grid_error, rep.bound))

# the x-tuple carries rational constants, the y-tuple rational multiples of sqrt(2)
for t in tuples:
    print(t.constant_gn(1, 3), t.constant_gn(2, 0))
