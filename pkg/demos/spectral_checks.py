"""Power-law exponents of random fields and chance-level subspace alignment."""

from pmanifold.numerics import orthonormal_columns, seeded_rng
from pmanifold.spectral import power_law_field, radial_psd, random_alignment_baseline, subspace_alignment

rng = seeded_rng(3)
for alpha in (0.0, 1.0, 2.0, 3.0):
    fit = radial_psd(power_law_field(64, alpha, rng, n=32))
    print(f"field with alpha {alpha:.1f}: fitted alpha {fit.alpha:.3f} over k in {fit.band}")

print("\nrandom 5-dim subspace vs random m-dim subspace of R^64:")
for m in (5, 10, 20, 40, 64):
    b = random_alignment_baseline(64, 5, m, trials=200, seed=0)
    print(f"  m={m:>2}: mean alignment {b.mean:.3f} +- {b.std:.3f}")

q = orthonormal_columns(rng, 64, 10)
print("\nself:", subspace_alignment(q[:, :5], q[:, :5]), " orthogonal:", subspace_alignment(q[:, :5], q[:, 5:]))
