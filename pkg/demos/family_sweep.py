"""Sweep the drift constant c in p(x) = 1/2 + c/(4x) across the recurrence boundary.

Each row shows the fitted Lamperti ratio, the headline verdict and what the
exact birth-death product series says. Near c = 1 the fitted ratio sits inside
the decision tolerance and the series alone cannot settle it.
"""

from lamperti import BirthDeath, CriteriaConfig, bd_oracle, classify

oracle_cfg = CriteriaConfig(i_max=10**5)

print(f"{'c':>5} {'theta':>8} {'headline':>13} {'oracle':>13}")
for c in (0.25, 0.5, 0.9, 1.0, 1.03, 1.2, 1.5, 2.0, 4.0):
    spec = BirthDeath(f"0.5 + {c}/(4*x)")
    report = classify(spec)
    theta = report.theta()
    oracle = bd_oracle(spec, oracle_cfg)
    shown = f"{theta:8.4f}" if theta is not None else f"{'n/a':>8}"
    print(f"{c:5g} {shown} {report.headline.value:>13} {oracle.label.value:>13}")
