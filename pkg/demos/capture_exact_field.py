"""Posterior frequency capture on a field whose spectrum is known.

Samples the exact Poisson solution sin(2 pi x) + 0.1 sin(40 pi x) on a uniform
grid, transforms it and thresholds the folded spectrum. The two tones come back
with moduli 0.5 and 0.05, i.e. half of each amplitude.
"""
import numpy as np

from freqadapt.adaptive import capture
from freqadapt.problems import poisson_problem

pb = poisson_problem(high=40 * np.pi)
spectrum, selected = capture(pb.exact, pb, (1000,), lam=0.01)

print(f"{len(spectrum)} folded bins, {len(selected)} above the threshold")
for k, c in zip(selected.k[:, 0], selected.coeff):
    print(f"  k = {k / np.pi:6.2f} pi   |c| = {abs(c):.4f}")

# raising lambda past 0.1 drops the weak tone
_, strict = capture(pb.exact, pb, (1000,), lam=0.2)
print("lam = 0.2 keeps", [f"{k / np.pi:.0f}pi" for k in strict.k[:, 0]])
