"""IS, MMD and FID on toy inputs where the answer is easy to reason about.

    python3 demos/gan_metrics.py

A "generator" is a Gaussian whose mean slides towards the real
distribution; both distances should shrink monotonically. The Inception
Score is shown for a confident, diverse classifier output and for a
collapsed one.
"""

import numpy as np

from neuroscore.metrics import fid, fit_gaussian, inception_score, median_bandwidth, mmd_squared

rng = np.random.default_rng(0)
real = rng.normal(size=(400, 8))

print(f"{'shift':>5s} {'MMD^2':>9s} {'FID':>8s}")
for shift in np.linspace(2.0, 0.0, 5):
    fake = rng.normal(loc=shift, size=(400, 8))
    sigma = median_bandwidth(real, fake)
    print(f"{shift:5.1f} {mmd_squared(real, fake, sigma=sigma):9.4f} "
          f"{fid(fit_gaussian(real), fit_gaussian(fake)):8.3f}")

diverse = np.tile(np.eye(10) * 0.9 + 0.01, (20, 1))
collapsed = np.tile(np.eye(10)[0] * 0.9 + 0.01, (200, 1))
print(f"\nIS, confident and diverse: {inception_score(diverse):.2f} (10 classes)")
print(f"IS, all samples one class: {inception_score(collapsed):.2f}")
