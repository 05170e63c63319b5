"""Fit sin(40 pi x) with a single sub-network and three input embeddings.

A down-scaling embedding only rescales x, so a wrong guess of k (38 pi instead
of 40 pi) leaves a high-frequency target. The hybrid embedding [k x, cos, sin]
keeps working because the network can still correct the phase drift from the
linear channel. Pass a smaller epoch count as the first argument for a quick look.
"""
import sys

import numpy as np

from freqadapt import presets
from freqadapt.cli import train_config
from freqadapt.network import feature_network
from freqadapt.optim import train

epochs = int(sys.argv[1]) if len(sys.argv) > 1 else 5000
v = presets.preset("fit", "desk")
v.update(seed=0, epochs=epochs)
problem = presets.build_problem(v)

for embedding in ("downscale", "fourier", "hybrid"):
    for k in (38 * np.pi, 40 * np.pi):
        net = feature_network(embedding, [k], v["hidden"], activation=v["activation"], seed=0)
        err = train(net, problem, train_config(v)).error
        print(f"{embedding:>9}  k = {k / np.pi:.0f}pi  relative L2 {err:.3e}")
