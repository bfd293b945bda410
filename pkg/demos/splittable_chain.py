"""A chain whose state space falls apart into three interleaved value sets.

Unsplit, v(x) keeps jumping between 4 and 16 and the corollary test refuses
the chain. After decomposition each value set is an ordinary chain on its own
lattice, and one transient value set makes the whole chain transient.
"""

from lamperti import FitConfig, SplittableExample, classify, decompose, fit_asymptotics, profile
from lamperti.criteria import NotInClass, corollary_test

slow, fast = "0.5 + 0.5/(4*x)", "0.5 + 2/(4*x)"
grid = FitConfig().grid()

plain = SplittableExample(slow, slow, slow)
print("v(x) on the fit grid:", sorted({q.v for q in profile(plain, grid)}))
try:
    corollary_test(fit_asymptotics(profile(plain, grid)))
except NotInClass as exc:
    print("unsplit chain:", exc)

for comp in decompose(plain).components:
    print(f"value set {comp.index}: x = {comp.residue} mod {comp.modulus}, step {comp.step}")

for rates in [(slow, slow, slow), (slow, fast, slow)]:
    report = classify(SplittableExample(*rates))
    per = ", ".join(c.headline.label.value for c in report.components)
    print(f"rates {rates}: components [{per}] -> {report.headline.value}")
