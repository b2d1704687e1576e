"""Correlation, within-participant permutation bootstrap, accuracy and ANOVA."""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy.special import gammaln

from .core import GAN_CATEGORIES, ScoreTable
from .errors import (
    DegenerateGroups,
    EmptyCategory,
    LowSampleSize,
    NoVariation,
    TooFewSamples,
    ZeroVariance,
)

LOW_N = 10
RNG_NAME = "numpy.random.PCG64"

_CF_TOL = 1e-12
_CF_MAX_ITER = 500
_TINY = 1e-300


def _betacf(a, b, x):
    """Continued fraction for the incomplete beta (modified Lentz)."""
    x = np.asarray(x, dtype=float)
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < _TINY, _TINY, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < _TINY, _TINY, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < _TINY, _TINY, c)
        d = 1.0 / d
        delta = d * c
        h = np.where(done, h, h * delta)
        done |= np.abs(delta - 1.0) < _CF_TOL
        if done.all():
            break
    else:
        raise ArithmeticError("incomplete beta continued fraction did not converge")
    return h


def betainc(a, b, x):
    """Regularized incomplete beta I_x(a, b) for scalar a, b > 0 and array x."""
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    if ((x < 0) | (x > 1)).any():
        raise ValueError("x must lie in [0, 1]")
    out = np.where(x >= 1.0, 1.0, 0.0)
    inner = (x > 0) & (x < 1)
    xi = x[inner]
    log_front = (gammaln(a + b) - gammaln(a) - gammaln(b)
                 + a * np.log(xi) + b * np.log1p(-xi))
    direct = xi < (a + 1.0) / (a + b + 2.0)
    vals = np.empty_like(xi)
    if direct.any():
        vals[direct] = np.exp(log_front[direct]) * _betacf(a, b, xi[direct]) / a
    if (~direct).any():
        vals[~direct] = 1.0 - np.exp(log_front[~direct]) * _betacf(b, a, 1.0 - xi[~direct]) / b
    out[inner] = vals
    return float(out[0]) if scalar else out


def t_two_tailed_p(t, df):
    """P(|T| >= |t|) for Student's t with ``df`` degrees of freedom."""
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        x = np.where(np.isinf(t), 0.0, df / (df + t * t))
    return betainc(df / 2.0, 0.5, x)


def _p_from_r(r, n):
    r = np.asarray(r, dtype=float)
    df = n - 2
    r2 = np.clip(r * r, 0.0, 1.0)
    # t^2 = r^2 df / (1 - r^2)  =>  df / (df + t^2) = 1 - r^2
    return betainc(df / 2.0, 0.5, 1.0 - r2)


@dataclass(frozen=True)
class CorrelationResult:
    r: float
    p_two_tailed: float
    n: int
    df: int

    @property
    def low_n(self):
        return self.n < LOW_N

    def to_dict(self):
        return {"r": self.r, "p_two_tailed": self.p_two_tailed, "n": self.n,
                "df": self.df, "low_n": self.low_n}


def pearson(x, y):
    """Product-moment r with a two-tailed p-value on n - 2 degrees of freedom."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError(f"length mismatch {x.size} vs {y.size}")
    n = x.size
    if n < 3:
        raise TooFewSamples(f"Pearson correlation needs n >= 3, got {n}")
    dx, dy = x - x.mean(), y - y.mean()
    sxx, syy = dx @ dx, dy @ dy
    if sxx <= 0 or syy <= 0:
        raise ZeroVariance("an input has zero variance")
    r = float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))
    if n < LOW_N:
        warnings.warn(f"correlation on only {n} pairs", LowSampleSize, stacklevel=2)
    return CorrelationResult(r, float(_p_from_r(r, n)), n, n - 2)


def mean_center_within(table: ScoreTable):
    """Subtract each participant's own mean across categories."""
    v = table.values
    return ScoreTable(table.participants, table.categories, v - v.mean(axis=1, keepdims=True))


def _prepare(neuro: ScoreTable, behav: ScoreTable, center, categories):
    behav = neuro.aligned_with(behav)
    if center:
        neuro, behav = mean_center_within(neuro), mean_center_within(behav)
    if categories is not None:
        neuro, behav = neuro.restrict(categories), behav.restrict(categories)
    return neuro, behav


def correlate_tables(neuro: ScoreTable, behav: ScoreTable, center=False, categories=None):
    """Pearson correlation over all (participant, category) cells.

    With ``center`` each participant is centred over all of its categories
    before any restriction to ``categories``.
    """
    a, b = _prepare(neuro, behav, center, categories)
    return pearson(a.values.ravel(), b.values.ravel())


def gan_only_correlation(neuro: ScoreTable, behav: ScoreTable, center=True,
                         categories=GAN_CATEGORIES):
    return correlate_tables(neuro, behav, center=center, categories=categories)


@dataclass(frozen=True)
class BootstrapResult:
    p_value: float
    count: int
    iterations: int
    seed: int
    observed: CorrelationResult
    center: bool = False
    categories: tuple = None
    rng: str = RNG_NAME

    def to_dict(self):
        return {"bootstrapped_p": self.p_value, "count_smaller": self.count,
                "iterations": self.iterations, "seed": self.seed, "rng": self.rng,
                "center": self.center,
                "categories": list(self.categories) if self.categories else None,
                "observed": self.observed.to_dict()}


def _batch_r(a, b):
    """Pearson r of ``a`` (flat) against each row of ``b``."""
    da = a - a.mean()
    db = b - b.mean(axis=1, keepdims=True)
    return (db @ da) / np.sqrt((da @ da) * np.einsum("ij,ij->i", db, db))


def bootstrap_correlation(neuro: ScoreTable, behav: ScoreTable, iterations=10000, seed=0,
                          center=False, categories=None):
    """Within-participant shuffle test of the Pearson correlation.

    Each iteration permutes, independently for every participant, which
    category's behavioural value pairs with which neural value, and
    recomputes the p-value. The result is the fraction of iterations whose
    p-value is strictly smaller than the unshuffled one. Iteration ``i``
    draws from its own stream seeded by ``(seed, i)``.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    a, b = _prepare(neuro, behav, center, categories)
    observed = pearson(a.values.ravel(), b.values.ravel())
    av, bv = a.values, b.values
    n_p, n_c = bv.shape
    n = av.size

    movable = (np.ptp(av, axis=1) > 0) & (np.ptp(bv, axis=1) > 0)
    if not movable.any():
        warnings.warn("within-participant shuffling cannot change any pairing",
                      NoVariation, stacklevel=2)
        return BootstrapResult(1.0, 0, iterations, seed, observed, center,
                               tuple(categories) if categories else None)

    rows = np.arange(n_p)[:, None]
    shuffled = np.empty((iterations, n))
    for i in range(iterations):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, i])))
        perm = np.argsort(rng.random((n_p, n_c)), axis=1)
        shuffled[i] = bv[rows, perm].ravel()

    flat_a = av.ravel()
    p_obs = _p_from_r(_batch_r(flat_a, bv.ravel()[None, :]), n)[0]
    p_shuf = _p_from_r(np.clip(_batch_r(flat_a, shuffled), -1.0, 1.0), n)
    count = int(np.count_nonzero(p_shuf < p_obs))
    return BootstrapResult(count / iterations, count, iterations, seed, observed, center,
                           tuple(categories) if categories else None)


def behavioral_accuracy(trials: Iterable, categories: Sequence[str] = None):
    """Fraction correct per category from ``(category, correct)`` pairs."""
    hits, totals = {}, {}
    for cat, ok in trials:
        totals[cat] = totals.get(cat, 0) + 1
        hits[cat] = hits.get(cat, 0) + bool(ok)
    cats = list(totals) if categories is None else list(categories)
    empty = [c for c in cats if totals.get(c, 0) == 0]
    if empty:
        raise EmptyCategory(f"no trials for categories {empty}")
    return {c: hits[c] / totals[c] for c in cats}


@dataclass(frozen=True)
class FMap:
    channel_names: tuple
    f_values: np.ndarray = field(repr=False)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["channel", "f_value"])
            for ch, f in zip(self.channel_names, self.f_values):
                w.writerow([ch, repr(float(f))])
        return path

    def as_dict(self):
        return dict(zip(self.channel_names, self.f_values.tolist()))


def channel_anova_f(groups, channel_names=None):
    """One-way ANOVA F per channel.

    ``groups`` maps category -> (trials, channels) array, or is a sequence
    of such arrays; a 1-D group counts as one channel.
    """
    arrays = list(groups.values()) if isinstance(groups, Mapping) else list(groups)
    arrays = [np.asarray(g, dtype=float) for g in arrays]
    arrays = [g[:, None] if g.ndim == 1 else g for g in arrays]
    if len(arrays) < 2 or any(g.shape[0] < 2 for g in arrays):
        raise DegenerateGroups("ANOVA needs >= 2 groups with >= 2 values each")
    n_ch = arrays[0].shape[1]
    if any(g.shape[1] != n_ch for g in arrays):
        raise DegenerateGroups("groups disagree on channel count")
    k = len(arrays)
    n_total = sum(g.shape[0] for g in arrays)
    grand = np.concatenate(arrays).mean(axis=0)
    ss_between = sum(g.shape[0] * (g.mean(axis=0) - grand) ** 2 for g in arrays)
    ss_within = sum(((g - g.mean(axis=0)) ** 2).sum(axis=0) for g in arrays)
    if (ss_within <= 0).any():
        raise DegenerateGroups("zero within-group variance on some channel")
    f = (ss_between / (k - 1)) / (ss_within / (n_total - k))
    if channel_names is None:
        channel_names = tuple(f"ch{i}" for i in range(n_ch))
    return FMap(tuple(channel_names), f)
