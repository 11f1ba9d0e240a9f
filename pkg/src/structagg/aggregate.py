"""Exponentially weighted aggregation of restricted least squares fits.

Each pattern ``p`` gets the log weight

    -Error(p) / (4 sigma2) - ||p||_0 / 2 + log prior(p)

where ``Error`` is the raw residual sum of squares of the restricted fit.
:func:`exact_aggregate` sums over every pattern (small M only);
:func:`metropolis_run` approximates the same average with a random walk on
the hypercube of patterns (or of groups) and averages the fits visited
after burn-in.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .core import (ColumnScaling, Dataset, RestrictedFit, SparsityPattern,
                   normalize_columns, ols_update, restricted_ols)
from .groups import group_union_pattern, grouped_l0
from .priors import NEG_INF, PriorSpec, log_prior_ratio, log_prior_unnormalized

log = logging.getLogger(__name__)

EXACT_LIMIT = 20
WALKS = ("covariate", "group")


@dataclass
class ChainConfig:
    prior: PriorSpec
    sigma2: float | None = None
    iterations: int = 7000
    burn_in: int = 3000
    seed: int = 0
    walk: str = "covariate"
    refit_every: int = 1000
    trace: bool = False

    def __post_init__(self):
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError(f"need 0 <= burn_in < iterations, got {self.burn_in}, {self.iterations}")
        if self.walk not in WALKS:
            raise ValueError(f"walk must be one of {WALKS}, got {self.walk!r}")
        if self.walk == "group" and self.prior.groups is None:
            raise ValueError("group walk needs a prior with a group structure")
        if self.sigma2 is not None and not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")

    def replace(self, **kw) -> "ChainConfig":
        d = {f: getattr(self, f) for f in self.__dataclass_fields__}
        d.update(kw)
        return ChainConfig(**d)

    def to_json(self):
        return {"prior": self.prior.to_json(), "sigma2": self.sigma2,
                "iterations": self.iterations, "burn_in": self.burn_in,
                "seed": self.seed, "walk": self.walk, "refit_every": self.refit_every}


@dataclass
class AggregateFit:
    """Aggregated coefficients and diagnostics.

    ``selection_freq`` holds post-burn-in visit frequencies (chain) or exact
    posterior inclusion probabilities (enumeration).  ``pattern_counts``
    (chain) and ``log_weights`` (exact, normalized) are keyed by the integer
    bitmask of the pattern, bit ``i`` for covariate ``i``.
    """

    beta: np.ndarray
    selection_freq: np.ndarray
    acceptance_rate: float
    visited: int
    sigma2: float
    method: str
    mean_error: float = math.nan
    log_weights: dict | None = None
    pattern_counts: dict | None = None
    trace: list | None = None
    metadata: dict = field(default_factory=dict)
    wall_time: float = math.nan

    def thresholded(self, cutoff: float) -> np.ndarray:
        """Coefficients with covariates selected less often than ``cutoff`` zeroed."""
        return np.where(self.selection_freq >= cutoff, self.beta, 0.0)

    def visit_distribution(self) -> dict:
        total = sum(self.pattern_counts.values())
        return {k: v / total for k, v in self.pattern_counts.items()}

    def to_json(self):
        out = {"method": self.method, "beta": self.beta.tolist(),
               "selection_freq": self.selection_freq.tolist(),
               "acceptance_rate": None if math.isnan(self.acceptance_rate) else self.acceptance_rate,
               "visited": self.visited, "sigma2": self.sigma2,
               "mean_error": None if math.isnan(self.mean_error) else self.mean_error,
               "metadata": self.metadata}
        return out


def _log_weight(error, count, log_prior, sigma2):
    return -error / (4.0 * sigma2) - 0.5 * count + log_prior


def log_acceptance(fit_p: RestrictedFit, fit_q: RestrictedFit, prior: PriorSpec,
                   sigma2: float) -> float:
    """Log Metropolis acceptance probability for a move from ``p`` to ``q``.

    ``min(0, -(Error_q - Error_p) / (4 sigma2) - (|q| - |p|) / 2 + log(pi_q / pi_p))``;
    -inf when ``q`` has zero prior mass.
    """
    lr = log_prior_ratio(fit_q.pattern, fit_p.pattern, prior)
    if lr == NEG_INF:
        return NEG_INF
    dq = -(fit_q.error - fit_p.error) / (4.0 * sigma2)
    return min(0.0, dq - 0.5 * (fit_q.pattern.count - fit_p.pattern.count) + lr)


def _gray_sequence(M):
    """Bit flipped at each step of the reflected Gray code over M bits."""
    for t in range(1, 1 << M):
        yield (t & -t).bit_length() - 1


def exact_aggregate(data: Dataset, prior: PriorSpec, sigma2: float,
                    walk: str = "covariate", limit: int = EXACT_LIMIT) -> AggregateFit:
    """Aggregate over every pattern with nonzero prior mass.

    ``walk="group"`` enumerates unions of groups only, which are exactly the
    patterns a grouped prior gives mass to.
    """
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    if prior.M != data.M:
        raise ValueError("prior dimension does not match the data")
    M = data.M
    keys, logw, betas = [], [], []

    def visit(fit, p):
        lp = log_prior_unnormalized(p, prior)
        if lp == NEG_INF:
            return
        keys.append(p.to_int())
        logw.append(_log_weight(fit.error, p.count, lp, sigma2))
        betas.append(fit.beta)

    if walk == "covariate":
        if M > limit:
            raise ValueError(f"exact enumeration limited to M <= {limit}, got M={M}")
        fit = restricted_ols(data, SparsityPattern.empty(M))
        visit(fit, fit.pattern)
        for i in _gray_sequence(M):
            fit = ols_update(fit, i, data)
            visit(fit, fit.pattern)
    elif walk == "group":
        G = prior.groups
        if G is None:
            raise ValueError("group enumeration needs a prior with groups")
        if len(G) > limit:
            raise ValueError(f"exact enumeration limited to {limit} groups, got {len(G)}")
        seen = set()
        for key in range(1 << len(G)):
            sel = [g for g in range(len(G)) if key >> g & 1]
            p = group_union_pattern(sel, G)
            h = p.bits.tobytes()
            if h in seen:
                continue
            seen.add(h)
            visit(restricted_ols(data, p), p)
    else:
        raise ValueError(f"walk must be one of {WALKS}")
    if not keys:
        raise ValueError("every pattern has zero prior mass")

    logw = np.array(logw)
    logw -= logsumexp(logw)
    w = np.exp(logw)
    betas = np.array(betas)
    beta = w @ betas
    bits = np.array([[(k >> i) & 1 for i in range(M)] for k in keys], dtype=float)
    incl = w @ bits
    return AggregateFit(beta=beta, selection_freq=np.clip(incl, 0.0, 1.0),
                        acceptance_rate=math.nan, visited=len(keys), sigma2=sigma2,
                        method=f"exact-{prior.variant}",
                        log_weights=dict(zip(keys, logw.tolist())),
                        metadata={"walk": walk, "simplified": prior.simplified})


class _Chain:
    """Mutable state of one Metropolis chain."""

    def __init__(self, data, config):
        self.data = data
        self.config = config
        self.prior = config.prior
        self.groups = config.prior.groups
        self.cover_exact = 0
        self.cover_fallback = 0

    def prior_of(self, p, selected=None):
        prior = self.prior
        if selected is not None and prior.variant == "gsa":
            k, exact = grouped_l0(p, self.groups, return_exact=True,
                                  exact_limit=prior.cover_limit)
            if exact:
                self.cover_exact += 1
            else:
                self.cover_fallback += 1
                k = int(selected.sum())
            return log_prior_unnormalized(p, prior, k=k)
        return log_prior_unnormalized(p, prior)

    def refit(self, fit, new_bits):
        changed = np.flatnonzero(fit.pattern.bits != new_bits)
        if len(changed) > 4:
            return restricted_ols(self.data, SparsityPattern(new_bits))
        for i in changed:
            fit = ols_update(fit, int(i), self.data, self.config.refit_every)
        return fit


def metropolis_run(data: Dataset, config: ChainConfig) -> AggregateFit:
    """Metropolis random walk over patterns, starting from the empty model.

    Each step toggles one covariate (or one group, for ``walk="group"``)
    chosen uniformly at random and accepts with probability
    ``min(1, exp(dlogw))``.  Proposals with zero prior mass are rejected
    without a fit.  The returned coefficients average the restricted fits
    of the states after steps ``burn_in + 1 .. iterations``.
    """
    if config.sigma2 is None:
        raise ValueError("metropolis_run needs sigma2; see estimate_sigma2")
    if config.prior.M != data.M:
        raise ValueError("prior dimension does not match the data")
    t0 = time.perf_counter()
    M = data.M
    sigma2 = config.sigma2
    rng = np.random.default_rng(config.seed)
    chain = _Chain(data, config)
    group_walk = config.walk == "group"
    G = chain.groups
    n_moves = len(G) if group_walk else M

    selected = np.zeros(len(G), dtype=bool) if group_walk else None
    fit = restricted_ols(data, SparsityPattern.empty(M))
    lp = chain.prior_of(fit.pattern, selected)
    if lp == NEG_INF:
        raise ValueError("empty model has zero prior mass")
    logw = _log_weight(fit.error, 0, lp, sigma2)

    window = config.iterations - config.burn_in
    beta_sum = np.zeros(M)
    freq_sum = np.zeros(M)
    error_sum = 0.0
    counts: dict = {}
    accepted = 0
    trace = [] if config.trace else None
    moves = rng.integers(n_moves, size=config.iterations)
    uniforms = rng.random(config.iterations)

    for t in range(config.iterations):
        i = int(moves[t])
        if group_walk:
            new_sel = selected.copy()
            new_sel[i] = not new_sel[i]
            q_bits = G.masks[new_sel].any(axis=0) if new_sel.any() else np.zeros(M, dtype=bool)
            q = SparsityPattern(q_bits)
            lq = chain.prior_of(q, new_sel)
        else:
            q = fit.pattern.flip(i)
            lq = chain.prior_of(q)
        ok = False
        if lq != NEG_INF:
            fit_q = chain.refit(fit, q.bits) if group_walk else ols_update(
                fit, i, data, config.refit_every)
            logw_q = _log_weight(fit_q.error, q.count, lq, sigma2)
            if logw_q >= logw or math.log(uniforms[t]) < logw_q - logw:
                ok = True
                fit, lp, logw = fit_q, lq, logw_q
                if group_walk:
                    selected = new_sel
                accepted += 1
        if trace is not None:
            trace.append((t + 1, fit.pattern.count, fit.error, ok))
        if t >= config.burn_in:
            beta_sum += fit.beta
            freq_sum += fit.pattern.bits
            error_sum += fit.error
            key = fit.pattern.bits.tobytes()
            counts[key] = counts.get(key, 0) + 1

    pattern_counts = {SparsityPattern(np.frombuffer(k, dtype=bool)).to_int(): c
                      for k, c in counts.items()}
    meta = {"walk": config.walk, "seed": config.seed, "iterations": config.iterations,
            "burn_in": config.burn_in, "final_support": fit.pattern.support.tolist()}
    if group_walk and config.prior.variant == "gsa":
        meta["gsa_complexity"] = {"exact_cover": chain.cover_exact,
                                  "selected_group_count": chain.cover_fallback}
    return AggregateFit(beta=beta_sum / window, selection_freq=freq_sum / window,
                        acceptance_rate=accepted / config.iterations,
                        visited=len(counts), sigma2=sigma2,
                        method=f"mcmc-{config.prior.variant}",
                        mean_error=error_sum / window, pattern_counts=pattern_counts,
                        trace=trace, metadata=meta, wall_time=time.perf_counter() - t0)


@dataclass
class Sigma2Estimate:
    sigma2: float
    fallback: bool
    path: list = field(default_factory=list)
    fit: AggregateFit | None = None


def _residual_variance(data, beta, coef_scale=None):
    resid = data.y - data.X @ beta
    b = beta if coef_scale is None else coef_scale.to_original(beta)
    dof = data.n - int(np.sum(np.abs(b) > 1.0 / data.n))
    if dof <= 0:
        return None
    return float(resid @ resid) / dof


def estimate_sigma2(data: Dataset, config: ChainConfig, alpha: float, grid,
                    scaling: ColumnScaling | None = None) -> Sigma2Estimate:
    """Fixed-point search for the noise variance over a grid of trial values.

    For each trial value d (scanned from large to small) the chain is run
    with ``sigma2 = d`` and ``s(d) = ||y - X b_d||^2 / (n - M_n(b_d))`` is
    computed, ``M_n`` counting coefficients above ``1/n`` in absolute value
    (in original units when ``scaling`` is given).  The first d with
    ``|s(d) - d| <= alpha`` is returned; otherwise the d with the smallest
    discrepancy, flagged as a fallback.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    grid = sorted({float(d) for d in grid}, reverse=True)
    if not grid or grid[-1] <= 0:
        raise ValueError("grid must be a nonempty set of positive values")
    path = []
    best = None
    for d in grid:
        fit = metropolis_run(data, config.replace(sigma2=d))
        s = _residual_variance(data, fit.beta, scaling)
        if s is None:
            log.warning("skipping sigma2=%g: no residual degrees of freedom", d)
            path.append((d, None))
            continue
        path.append((d, s))
        if abs(s - d) <= alpha:
            return Sigma2Estimate(d, False, path, fit)
        if best is None or abs(s - d) < abs(best[1] - best[0]):
            best = (d, s, fit)
    if best is None:
        raise ValueError("no grid value left residual degrees of freedom")
    log.warning("no grid value within alpha=%g; using closest sigma2=%g", alpha, best[0])
    return Sigma2Estimate(best[0], True, path, best[2])


def two_stage_sigma2(data: Dataset, config: ChainConfig, pilot: float | None = None,
                     scaling: ColumnScaling | None = None) -> Sigma2Estimate:
    """Run at a pilot variance (sample variance of y by default), then rerun
    at the residual variance of the first run."""
    d0 = float(np.var(data.y, ddof=1)) if pilot is None else float(pilot)
    first = metropolis_run(data, config.replace(sigma2=d0))
    s0 = _residual_variance(data, first.beta, scaling)
    if s0 is None:
        raise ValueError("pilot fit left no residual degrees of freedom")
    d1 = max(s0, np.finfo(float).tiny)
    second = metropolis_run(data, config.replace(sigma2=d1))
    return Sigma2Estimate(d1, False, [(d0, s0), (d1, _residual_variance(data, second.beta, scaling))],
                          second)


def aggregate(data: Dataset, prior: PriorSpec, sigma2: float | None = None, *,
              iterations=7000, burn_in=3000, seed=0, walk="covariate",
              exact=False, normalize=True) -> AggregateFit:
    """Normalize columns, fit, and report coefficients in the original units.

    Without ``sigma2`` (and without ``data.sigma2``) the two-stage variance
    estimate is used.
    """
    sigma2 = data.sigma2 if sigma2 is None else sigma2
    work, scaling = normalize_columns(data) if normalize else (data, None)
    if exact:
        if sigma2 is None:
            raise ValueError("exact aggregation needs sigma2")
        fit = exact_aggregate(work, prior, sigma2, walk=walk)
    else:
        config = ChainConfig(prior=prior, sigma2=sigma2, iterations=iterations,
                             burn_in=burn_in, seed=seed, walk=walk)
        if sigma2 is None:
            est = two_stage_sigma2(work, config, scaling=scaling)
            fit = est.fit
            fit.metadata["sigma2_path"] = est.path
        else:
            fit = metropolis_run(work, config)
    if scaling is not None:
        fit.beta = scaling.to_original(fit.beta)
        fit.metadata["column_scales"] = scaling.scales.tolist()
    return fit
