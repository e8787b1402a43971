"""How the pipeline behaves as magnitude noise grows, and why one band alone is unstable."""
import numpy as np

from signret.experiments import meyer_setup, random_decaying_signal, single_band_instability, stability_probe

frame, lattices, support = meyer_setup()
f = random_decaying_signal(support, np.random.default_rng(3))
res = stability_probe(f, frame, lattices, [0.0, 1e-5, 1e-4, 1e-3], trials=5, seed=3)
for d, row in res.summary["per_delta"].items():
    print(f"delta {d:>7}: median error {row['median_error']:.2e}, failures {row['failures']}/{row['trials']}")

for eps in (1e-2, 1e-4, 1e-6):
    r = single_band_instability(f, frame, "psi1", eps)
    print(f"eps {eps:.0e}: perturbation norm {r.difference_norm:.2f}, seen by psi1 {r.filtered_norm:.1e}")
