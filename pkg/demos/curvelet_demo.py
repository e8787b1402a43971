"""Sign retrieval with curvelet-type windows on a 256 x 256 grid (a few seconds)."""
import time

import numpy as np

from signret import full_pipeline, measure
from signret.experiments import curvelet_setup, random_decaying_signal, redundancy_report
from signret.frames import frame_bounds

frame, lattices, support = curvelet_setup()
A, B = frame_bounds(frame)
print(f"{len(frame)} windows, bounds A={A:.12f} B={B:.12f}")
print("redundancy:", redundancy_report().to_dict())
f = random_decaying_signal(support, np.random.default_rng(2))
t0 = time.perf_counter()
g, report = full_pipeline(measure(f, frame, lattices), frame, reference=f)
print(f"error {report['error']:.2e} in {time.perf_counter() - t0:.1f}s over {len(report['edges'])} sign edges")
