"""Conventional GAN metrics on precomputed matrices: IS, kernel MMD, FID."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.spatial.distance import cdist, pdist

from .errors import (
    BandwidthNonPositive,
    DimensionMismatch,
    FormatError,
    NotPSD,
    TooFewSamples,
    ZeroMarginalWithMass,
)


def check_prob_matrix(p, atol=1e-6):
    p = np.asarray(p, dtype=float)
    if p.ndim != 2 or p.shape[0] < 1 or p.shape[1] < 1:
        raise FormatError(f"probability matrix must be n x c with n, c >= 1, got {p.shape}")
    if not np.isfinite(p).all() or (p < 0).any() or (p > 1).any():
        raise FormatError("probabilities must be finite and within [0, 1]")
    bad = np.flatnonzero(np.abs(p.sum(axis=1) - 1.0) > atol)
    if bad.size:
        raise FormatError(f"rows {bad[:10].tolist()} do not sum to 1")
    return p


def inception_score(p):
    """exp of the mean KL divergence from each row to the column-mean marginal."""
    p = check_prob_matrix(p)
    marginal = p.mean(axis=0)
    if ((marginal == 0) & (p > 0).any(axis=0)).any():
        raise ZeroMarginalWithMass("a class with zero marginal carries probability mass")
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * (np.log(p) - np.log(marginal)), 0.0)
    mean_kl = terms.sum(axis=1).mean()
    return float(np.exp(max(mean_kl, 0.0)))


def _features(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2 or not np.isfinite(x).all():
        raise FormatError(f"feature matrix must be finite and 2-D, got shape {x.shape}")
    return x


def median_bandwidth(xr, xg):
    """Half the median pairwise squared distance over the pooled sample.

    With the kernel ``exp(-d^2 / (2 sigma))`` this sets the exponent's
    scale to the median squared distance.
    """
    pooled = np.vstack([_features(xr), _features(xg)])
    if pooled.shape[0] < 2:
        raise TooFewSamples("median heuristic needs at least two points")
    sigma = float(np.median(pdist(pooled, "sqeuclidean"))) / 2.0
    if not sigma > 0:
        raise BandwidthNonPositive("median pairwise distance is zero")
    return sigma


def gaussian_kernel(a, b, sigma):
    """``exp(-|a - b|^2 / (2 sigma))`` for every row pair.

    Note ``sigma`` sits in the denominator unsquared: it is a variance-like
    bandwidth, not a length scale.
    """
    return np.exp(-cdist(a, b, "sqeuclidean") / (2.0 * sigma))


def mmd_squared(xr, xg, sigma="median", biased=False):
    """Squared kernel MMD between two samples.

    The default unbiased estimator drops the diagonal of the within-sample
    kernel sums; ``biased=True`` gives the V-statistic, which is >= 0.
    """
    xr, xg = _features(xr), _features(xg)
    if xr.shape[1] != xg.shape[1]:
        raise DimensionMismatch(f"feature dims differ: {xr.shape[1]} vs {xg.shape[1]}")
    if isinstance(sigma, str):
        if sigma != "median":
            raise ValueError(f"unknown bandwidth rule {sigma!r}")
        sigma = median_bandwidth(xr, xg)
    if not sigma > 0:
        raise BandwidthNonPositive(f"bandwidth must be positive, got {sigma}")
    n, m = xr.shape[0], xg.shape[0]
    k_rr = gaussian_kernel(xr, xr, sigma)
    k_gg = gaussian_kernel(xg, xg, sigma)
    k_rg = gaussian_kernel(xr, xg, sigma)
    if biased:
        if n < 1 or m < 1:
            raise TooFewSamples("need at least one sample per set")
        return float(k_rr.mean() + k_gg.mean() - 2.0 * k_rg.mean())
    if n < 2 or m < 2:
        raise TooFewSamples(f"unbiased MMD needs n, m >= 2, got {n}, {m}")
    within_r = (k_rr.sum() - np.trace(k_rr)) / (n * (n - 1))
    within_g = (k_gg.sum() - np.trace(k_gg)) / (m * (m - 1))
    return float(within_r + within_g - 2.0 * k_rg.mean())


@dataclass(frozen=True)
class Gaussian:
    mean: np.ndarray
    cov: np.ndarray

    def to_dict(self):
        return {"mean": np.asarray(self.mean).tolist(), "cov": np.asarray(self.cov).tolist()}

    @classmethod
    def from_dict(cls, d):
        try:
            return cls(np.atleast_1d(np.asarray(d["mean"], float)),
                       np.atleast_2d(np.asarray(d["cov"], float)))
        except KeyError as exc:
            raise FormatError(f"Gaussian description lacks {exc}") from exc


def fit_gaussian(features):
    """Sample mean and unbiased (n - 1) covariance."""
    x = _features(features)
    if x.shape[0] < 2:
        raise TooFewSamples("covariance fitting needs at least two samples")
    return Gaussian(x.mean(axis=0), np.atleast_2d(np.cov(x, rowvar=False, ddof=1)))


def _psd_sqrt(cov, name):
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12 * max(np.abs(cov).max(), 1.0)):
        raise NotPSD(f"{name} covariance is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (cov + cov.T))
    top = max(vals.max(), 0.0)
    if vals.min() < -1e-6 * top:
        raise NotPSD(f"{name} covariance has eigenvalue {vals.min():.3g} (max {top:.3g})")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def fid(gr, gg):
    """Frechet distance between two Gaussians, given as (mean, cov) or Gaussian."""
    mu_r, cov_r = (gr.mean, gr.cov) if isinstance(gr, Gaussian) else gr
    mu_g, cov_g = (gg.mean, gg.cov) if isinstance(gg, Gaussian) else gg
    mu_r, mu_g = np.atleast_1d(np.asarray(mu_r, float)), np.atleast_1d(np.asarray(mu_g, float))
    cov_r, cov_g = np.atleast_2d(np.asarray(cov_r, float)), np.atleast_2d(np.asarray(cov_g, float))
    d = mu_r.size
    if mu_g.size != d or cov_r.shape != (d, d) or cov_g.shape != (d, d):
        raise DimensionMismatch(
            f"shapes differ: mean {mu_r.shape}/{mu_g.shape}, cov {cov_r.shape}/{cov_g.shape}")
    root_r = _psd_sqrt(cov_r, "first")
    _psd_sqrt(cov_g, "second")
    middle = root_r @ cov_g @ root_r
    lam = np.linalg.eigvalsh(0.5 * (middle + middle.T))
    top = max(lam.max(), 0.0)
    if lam.min() < -1e-6 * top:
        raise NotPSD(f"product form has eigenvalue {lam.min():.3g}")
    lam = np.where(lam < -1e-8 * top, 0.0, np.clip(lam, 0.0, None))
    diff = mu_r - mu_g
    value = diff @ diff + np.trace(cov_r) + np.trace(cov_g) - 2.0 * np.sqrt(lam).sum()
    if value < -1e-6 * max(1.0, np.trace(cov_r) + np.trace(cov_g)):
        raise NotPSD(f"negative Frechet distance {value}")
    return float(max(value, 0.0))


# --- ranking report --------------------------------------------------------

@dataclass
class MetricReport:
    """Per-metric scores and rankings; lower score is better for every metric."""

    scores: dict
    ranks: dict = field(default_factory=dict)
    orders: dict = field(default_factory=dict)
    ties: dict = field(default_factory=dict)
    reference: str = None
    agreement: dict = field(default_factory=dict)

    @property
    def best(self):
        return {m: [c for c, r in rk.items() if r == 1] for m, rk in self.ranks.items()}

    @property
    def disagreeing(self):
        return sorted(m for m, ok in self.agreement.items() if not ok)

    def rows(self):
        return [(m, c, s, self.ranks[m][c]) for m, sc in self.scores.items()
                for c, s in sc.items()]

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["metric", "category", "score", "rank"])
            w.writerows(self.rows())
        return path

    def to_dict(self):
        return {"scores": self.scores, "ranks": self.ranks,
                "orders": {m: [list(g) for g in o] for m, o in self.orders.items()},
                "ties": self.ties, "reference": self.reference,
                "agreement": self.agreement, "disagreeing": self.disagreeing}


def _ordering(scores: Mapping, tol):
    """Groups of tied categories, best (lowest) first, plus competition ranks."""
    items = sorted(scores.items(), key=lambda kv: kv[1])
    groups = []
    for c, s in items:
        if groups and abs(s - scores[groups[-1][0]]) <= tol:
            groups[-1].append(c)
        else:
            groups.append([c])
    ranks, r = {}, 1
    for g in groups:
        for c in g:
            ranks[c] = r
        r += len(g)
    return [tuple(g) for g in groups], ranks


def metric_report(scores: Mapping[str, Mapping[str, float]], reference="Human", tol=0.0):
    """Rank categories under each metric and compare against a reference metric.

    ``agreement[m]`` is True when metric ``m`` induces exactly the reference
    ordering (ties included).
    """
    report = MetricReport({m: {c: float(v) for c, v in sc.items()} for m, sc in scores.items()})
    for m, sc in report.scores.items():
        if len(sc) < 2:
            raise ValueError(f"metric {m!r} needs at least two categories")
        order, ranks = _ordering(sc, tol)
        report.orders[m] = order
        report.ranks[m] = ranks
        report.ties[m] = [list(g) for g in order if len(g) > 1]
    if reference is not None and reference in report.orders:
        report.reference = reference
        ref = report.orders[reference]
        report.agreement = {m: o == ref for m, o in report.orders.items() if m != reference}
    return report


def read_metric_table(path):
    """CSV ``metric,category,score`` -> ``{metric: {category: score}}``."""
    out = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or not {"metric", "category", "score"} <= set(
                reader.fieldnames):
            raise FormatError(f"{path}: header must include metric,category,score")
        for row in reader:
            out.setdefault(row["metric"], {})[row["category"]] = float(row["score"])
    return out
