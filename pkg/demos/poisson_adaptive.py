"""Adaptive solve of -u'' = f with u = sin(2 pi x) + 0.1 sin(40 pi x).

Phase 0 trains a down-scaling MscaleDNN with inputs x, 2x, 4x, 8x. Its DFT
shows where the energy sits; the next phase is rebuilt with hybrid embeddings
at exactly those frequencies, and the loop stops once the captured set repeats.

The full desk run (20000 epochs per phase) takes several minutes; the first
argument overrides the epoch count. Much shorter runs leave the network
under-trained and its spectrum noisy, so the captured sets grow instead of
settling on the two tones.
"""
import math
import sys

from freqadapt import presets
from freqadapt.adaptive import run_adaptive
from freqadapt.cli import adapt_config

v = presets.preset("poisson", "desk")
v.update(seed=0, M0=4, I=3)
if len(sys.argv) > 1:
    v["epochs"] = int(sys.argv[1])

problem = presets.build_problem(v)
state = run_adaptive(problem, adapt_config(v))



def show(fs, limit=8):
    ks = [f"{k / math.pi:.1f}pi" for k in fs.k[:, 0]]
    return ", ".join(ks[:limit]) + (f", ... ({len(ks)} total)" if len(ks) > limit else "")


for rec in state.records:
    feats, caught = show(rec.features), show(rec.captured)
    print(f"phase {rec.it}: error {rec.error:.3e}")
    print(f"  trained on  {feats}")
    print(f"  captured    {caught}")
print("stopped:", state.stop_reason)
