"""Two different signals whose magnitudes agree on an undersampled lattice.

With half the required density, sin and cos tones mix into a pair that the
unsigned samples cannot tell apart; at full density the oracle finds one answer.
"""
import numpy as np

from signret.experiments import counterexample_pair, sharpness_bracket, tensor_counterexample

ce = counterexample_pair(0.5)
print(f"lattice sites {ce.lattice.size}, magnitude gap {ce.discrepancy:.1e}, separation {ce.separation:.3f}")
print("first samples |h1|:", np.round(np.abs(ce.h1.values[ce.lattice.sites][:6]), 4))
print("first samples |h2|:", np.round(np.abs(ce.h2.values[ce.lattice.sites][:6]), 4))
print("oracle candidate counts:", sharpness_bracket())
tc = tensor_counterexample((1.0, 0.5))
print(f"2D variant on axis {tc.axis}: gap {tc.discrepancy:.1e}, separation {tc.separation:.3f}")
