# Repeating the step on the residual.  Each level may refine the lattice.
from adversarial_ka import Identity
from adversarial_ka.engine import iterate
from adversarial_ka.targets import make_target

f = make_target("xy")
levels, report = iterate(f, Identity(5), 6, mode="adaptive-cascade", alpha=1 / 15)

print(" m     N   |r_m| grid   |r_m| random   ratio")
for row in report.rows:
    ratio = row["lambda_achieved"]
    print("%2d %5d   %9.5f   %12.5f   %s" % (row["m"], row["N"], row["residual_norm"],
                                             row["offgrid_residual_norm"],
                                             "-" if ratio is None else "%.4f" % ratio))

# a single inner tuple for all levels decays at first, then stalls
_, faithful = iterate(f, Identity(5), 6, mode="theorem-faithful", alpha=1 / 15)
print([round(r["residual_norm"], 4) for r in faithful.rows])
