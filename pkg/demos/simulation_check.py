"""Monte-Carlo cross-check of two verdicts.

The symmetric walk keeps coming back near the origin; with c = 4 the walk
drifts away roughly like sqrt(n). The run is seeded, so it reproduces exactly.
"""

from lamperti import BirthDeath, SimConfig, classify, consistency_check, simulate

cfg = SimConfig(n_paths=300, n_steps=20_000, x0=50, r=10, master_seed=42)
for label, spec in [("symmetric", BirthDeath("0.5")), ("c=4", BirthDeath("0.5 + 4/(4*x)"))]:
    headline = classify(spec).headline
    rep = simulate(spec, cfg)
    print(f"{label}: {headline.value}; return fraction {rep.return_fraction:.3f}, "
          f"escape {rep.escape_indicator:.3f}, median final {rep.median_final:g}, "
          f"{consistency_check(spec, headline, cfg, rep).value}")
