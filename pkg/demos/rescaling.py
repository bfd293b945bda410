"""Rescaling the state space by k multiplies second moments by k^2 and leaves
the verdict untouched."""

from lamperti import BirthDeath, classify, rescale

base = BirthDeath("0.5 + 1.5/(4*x)")
for k in (1, 2, 3, 5):
    spec = base if k == 1 else rescale(base, k)
    report = classify(spec)
    fit = report.components[0].fit
    print(f"k={k}: xi={fit.xi_hat:.5f} (xi/k^2={fit.xi_hat / k**2:.5f}) "
          f"r2={fit.r2_hat:.5f} R={fit.R_hat:.5f} -> {report.headline.value}")
