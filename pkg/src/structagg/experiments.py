"""Simulation harness: clustered sparse signals, metrics and paired comparisons.

Replicates are independent jobs.  Each draws its data and its chain seed
from ``SeedSequence(seed, spawn_key=(rep, stream))`` so results do not depend on
the number of workers or on scheduling order.
"""
from __future__ import annotations

import csv
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from io import StringIO

import numpy as np

from .aggregate import aggregate
from .core import Dataset, restricted_ols, SparsityPattern
from .priors import PriorSpec
from .structure import DistanceSpec, PenaltySpec, penalty_clusters

GEOMETRIES = ("line", "lattice")
METHODS = ("spa", "ssa", "stepwise")


@dataclass
class SimSpec:
    """One simulation setting.

    ``sigma=None`` uses the default noise level ``sqrt(||beta||_0 / 9)``.
    Lattice geometry needs ``M = width**2`` (``width`` defaults to sqrt(M))
    and a square ``C_on``.
    """

    n: int
    M: int
    C: int
    C_on: int
    sigma: float | None = None
    geometry: str = "line"
    width: int | None = None
    reps: int = 250
    seed: int = 0
    h: float = 3.0
    iterations: int = 7000
    burn_in: int = 3000

    def __post_init__(self):
        if self.geometry not in GEOMETRIES:
            raise ValueError(f"geometry must be one of {GEOMETRIES}, got {self.geometry!r}")
        if self.C < 1 or self.C_on < 1 or self.C * self.C_on > self.M:
            raise ValueError("need C, C_on >= 1 and C * C_on <= M")
        if self.geometry == "lattice":
            if self.width is None:
                self.width = math.isqrt(self.M)
            if self.width ** 2 != self.M:
                raise ValueError("lattice geometry needs M = width**2")
            side = math.isqrt(self.C_on)
            if side * side != self.C_on:
                raise ValueError("lattice clusters are square blocks; C_on must be a square")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("need 0 <= burn_in < iterations")

    @property
    def noise_sd(self) -> float:
        if self.sigma is not None:
            return float(self.sigma)
        return math.sqrt(self.C * self.C_on / 9.0)

    def distance(self) -> DistanceSpec:
        if self.geometry == "line":
            return DistanceSpec.line(self.M)
        return DistanceSpec.lattice(self.width)

    def label(self) -> str:
        return f"({self.n}, {self.M}, {self.C}, {self.C_on}, {self.noise_sd:g})"

    def to_json(self):
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


def _rng(seed, rep, stream=0):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rep, stream)))


def _cluster_supports(spec: SimSpec, rng, max_tries=10000):
    """Supports of C clusters, uniform over placements more than h apart."""
    if spec.geometry == "line":
        starts = spec.M - spec.C_on + 1
        blocks = [np.arange(s, s + spec.C_on) for s in range(starts)]
    else:
        w, side = spec.width, math.isqrt(spec.C_on)
        blocks = []
        for r in range(w - side + 1):
            for c in range(w - side + 1):
                rows, cols = np.meshgrid(np.arange(r, r + side), np.arange(c, c + side),
                                         indexing="ij")
                blocks.append((rows * w + cols).ravel())
    dist = spec.distance()
    for _ in range(max_tries):
        pick = rng.choice(len(blocks), size=spec.C, replace=False)
        chosen = [blocks[k] for k in pick]
        ok = all(dist.block(a, b).min() > spec.h
                 for i, a in enumerate(chosen) for b in chosen[i + 1:])
        if ok:
            return chosen
    raise ValueError(f"could not place {spec.C} clusters of {spec.C_on} "
                     f"more than h={spec.h} apart in this geometry")


@dataclass
class Trial:
    train: Dataset
    test: Dataset
    beta_true: np.ndarray
    clusters: list


def generate_trial(spec: SimSpec, rep: int) -> Trial:
    """Draw designs, a clustered +-1 coefficient vector and Gaussian noise."""
    rng = _rng(spec.seed, rep)
    X = rng.standard_normal((spec.n, spec.M))
    X_test = rng.standard_normal((spec.n, spec.M))
    clusters = _cluster_supports(spec, rng)
    beta = np.zeros(spec.M)
    support = np.concatenate(clusters)
    beta[support] = rng.choice([-1.0, 1.0], size=support.size)
    sigma = spec.noise_sd
    y = X @ beta + sigma * rng.standard_normal(spec.n)
    y_test = X_test @ beta + sigma * rng.standard_normal(spec.n)
    return Trial(Dataset(y, X, sigma ** 2), Dataset(y_test, X_test, sigma ** 2), beta,
                 [c.tolist() for c in clusters])


def metric_prediction(beta_hat, beta_true, X_test, n=None) -> float:
    """``||X_test (beta_true - beta_hat)||^2 / n``."""
    X_test = np.asarray(X_test, dtype=float)
    n = X_test.shape[0] if n is None else n
    r = X_test @ (np.asarray(beta_true, dtype=float) - np.asarray(beta_hat, dtype=float))
    return float(r @ r) / n


def metric_recovery(beta_hat, beta_true) -> float:
    """``||beta_true - beta_hat||^2 / ||beta_true||^2``."""
    beta_true = np.asarray(beta_true, dtype=float)
    denom = float(beta_true @ beta_true)
    if denom == 0:
        raise ValueError("recovery is undefined for a zero true coefficient vector")
    d = beta_true - np.asarray(beta_hat, dtype=float)
    return float(d @ d) / denom


def forward_stepwise(data: Dataset, max_steps=None, return_path=False):
    """Greedy forward selection by residual sum of squares, stopped by BIC.

    At each step the covariate giving the largest drop in RSS is added; the
    search stops as soon as ``n log(RSS/n) + k log n`` fails to decrease.
    Returns the OLS refit on the selected set (and the selection order).
    """
    n, M = data.n, data.M
    max_steps = min(n - 1, M) if max_steps is None else max_steps
    if max_steps > min(n, M):
        raise ValueError("max_steps cannot exceed min(n, M)")
    tiny = np.finfo(float).tiny

    def bic(rss, k):
        return n * math.log(max(rss, tiny) / n) + k * math.log(n)

    fit = restricted_ols(data, SparsityPattern.empty(M))
    order = []
    current = bic(fit.error, 0)
    X = data.X
    norms2 = np.einsum("ij,ij->j", X, X)
    for _ in range(max_steps):
        resid = data.y - X @ fit.beta
        if fit.active:
            # project candidates off the selected columns
            Q, _ = np.linalg.qr(X[:, fit.active])
            Xp = X - Q @ (Q.T @ X)
        else:
            Xp = X
        pn = np.einsum("ij,ij->j", Xp, Xp)
        gain = np.where(pn > 1e-10 * np.maximum(norms2, tiny),
                        (Xp.T @ resid) ** 2 / np.maximum(pn, tiny), -np.inf)
        gain[fit.active] = -np.inf
        j = int(np.argmax(gain))
        if not np.isfinite(gain[j]):
            break
        cand = restricted_ols(data, fit.pattern.flip(j))
        score = bic(cand.error, len(order) + 1)
        if score >= current:
            break
        fit, current = cand, score
        order.append(j)
    return (fit.beta, order) if return_path else fit.beta


@dataclass
class TrialResult:
    rep: int
    prediction: dict
    recovery: dict
    wall_time: dict
    selection_freq: dict = field(default_factory=dict)


def _method_labels(methods):
    labels, seen = [], {}
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; expected one of {METHODS}")
        seen[m] = seen.get(m, 0) + 1
        labels.append(m if seen[m] == 1 else f"{m}#{seen[m]}")
    return labels


def run_trial(spec: SimSpec, rep: int, methods=METHODS) -> TrialResult:
    """Fit every method on one replicate.  All chains share one seed."""
    trial = generate_trial(spec, rep)
    chain_seed = int(_rng(spec.seed, rep, 1).integers(2 ** 63))
    sigma2 = spec.noise_sd ** 2
    R = min(spec.n, spec.M)
    pred, rec, wall, freq = {}, {}, {}, {}
    for label, m in zip(_method_labels(methods), methods):
        t0 = time.perf_counter()
        if m == "stepwise":
            beta = forward_stepwise(trial.train)
        else:
            if m == "spa":
                prior = PriorSpec.spa(spec.M, R)
            else:
                prior = PriorSpec.ssa(PenaltySpec.clusters(spec.distance(), spec.h), R)
            fit = aggregate(trial.train, prior, sigma2, iterations=spec.iterations,
                            burn_in=spec.burn_in, seed=chain_seed)
            beta = fit.beta
            freq[label] = fit.selection_freq
        wall[label] = time.perf_counter() - t0
        pred[label] = metric_prediction(beta, trial.beta_true, trial.test.X, spec.n)
        rec[label] = metric_recovery(beta, trial.beta_true)
    return TrialResult(rep, pred, rec, wall, freq)


def _win_rate(a, b):
    """Fraction of pairs with a < b, ties counted as one half."""
    a, b = np.asarray(a), np.asarray(b)
    return float(np.mean((a < b) + 0.5 * (a == b)))


@dataclass
class ComparisonSummary:
    spec: SimSpec
    methods: list
    trials: list

    def values(self, metric, method):
        return np.array([getattr(t, metric)[method] for t in self.trials])

    def paired_win(self, method, reference="spa", metric="prediction"):
        return _win_rate(self.values(metric, method), self.values(metric, reference))

    def rows(self):
        out = []
        ref = "spa" if "spa" in self.methods else self.methods[0]
        for m in self.methods:
            row = {"method": m}
            for metric, short in (("prediction", "pred"), ("recovery", "rec")):
                v = self.values(metric, m)
                row[f"{short}_mean"] = float(v.mean())
                row[f"{short}_se"] = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
            row["paired_win"] = self.paired_win(m, ref, "prediction")
            row["paired_win_recovery"] = self.paired_win(m, ref, "recovery")
            row["reps"] = len(self.trials)
            out.append(row)
        return out

    def to_csv(self, path_or_buf):
        rows = self.rows()
        own = isinstance(path_or_buf, (str, bytes)) or hasattr(path_or_buf, "__fspath__")
        fh = open(path_or_buf, "w", newline="") if own else path_or_buf
        try:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
        finally:
            if own:
                fh.close()
        return None if own else (fh.getvalue() if isinstance(fh, StringIO) else None)

    def to_text(self):
        lines = [f"setting (n, M, C, C_on, sigma) = {self.spec.label()}, "
                 f"{len(self.trials)} reps, geometry={self.spec.geometry}",
                 f"{'method':<12}{'Prediction':>20}{'Recovery':>20}{'win vs ref':>12}"]
        for r in self.rows():
            lines.append(f"{r['method']:<12}{r['pred_mean']:>11.3f} ({r['pred_se']:.3f})"
                         f"{r['rec_mean']:>11.3f} ({r['rec_se']:.3f}){r['paired_win']:>12.2f}")
        return "\n".join(lines)


def run_comparison(spec: SimSpec, methods=METHODS, jobs: int = 1) -> ComparisonSummary:
    """Run ``spec.reps`` replicates of every method and collect the metrics.

    ``paired_win`` compares each method with SPA on the same replicate.
    """
    methods = list(methods)
    labels = _method_labels(methods)
    reps = range(spec.reps)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            trials = list(ex.map(run_trial, [spec] * spec.reps, reps, [methods] * spec.reps))
    else:
        trials = [run_trial(spec, r, methods) for r in reps]
    trials.sort(key=lambda t: t.rep)
    return ComparisonSummary(spec, labels, trials)


def true_cluster_count(trial: Trial, spec: SimSpec) -> int:
    p = SparsityPattern(trial.beta_true != 0)
    return penalty_clusters(p, spec.distance(), spec.h)
