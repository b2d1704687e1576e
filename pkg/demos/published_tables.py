"""Recompute the summary numbers of the human study from its bundled tables.

    python3 demos/published_tables.py

Per-participant Neuroscores and behavioural accuracies ship with the
package. This script aggregates them, correlates them with and without
within-participant centring, runs the shuffle bootstrap, and ranks the
three GANs under every metric.
"""

from neuroscore import fixtures
from neuroscore.metrics import metric_report
from neuroscore.scoring import summarize_table
from neuroscore.stats import bootstrap_correlation, correlate_tables

neuro, behav = fixtures.neuroscore_table(), fixtures.behavioral_table()

s = summarize_table(neuro)
print("Neuroscore column means:")
for c, m in s.means.items():
    print(f"  {c:7s} mean {m:.3f}   1/mean {s.reciprocal_means[c]:.3f}")

print("\nNeuroscore vs behavioural accuracy:")
for label, kw in [("raw", {}), ("centred", {"center": True}),
                  ("centred, GANs only", {"center": True,
                                          "categories": ("DCGAN", "BEGAN", "PROGAN")})]:
    r = correlate_tables(neuro, behav, **kw)
    print(f"  {label:20s} r = {r.r:+.3f}  p = {r.p_two_tailed:.3g}  (n = {r.n})")

boot = bootstrap_correlation(neuro, behav, iterations=10000, seed=1)
print(f"\nshuffle bootstrap, 10000 iterations: p = {boot.p_value:.4g}")

rep = metric_report(fixtures.metric_scores(), reference="Human")
print("\nrankings (lower score is better):")
for m, order in rep.orders.items():
    print(f"  {m:13s} " + " > ".join("=".join(g) for g in order))
print("metrics whose order differs from Human:", ", ".join(rep.disagreeing))
