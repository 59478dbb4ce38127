"""Sufficient statistics, invariance tests and local BIC scores.

Everything downstream of :func:`suff_stats` only touches per-environment
means and second moments, so the same code runs on sample data and on exact
population covariances (``SuffStats.from_covariances``).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy import optimize
from scipy import stats as sps

from .graphs import Edge, InterventionFamily

log = logging.getLogger(__name__)

RHO_CLIP = 1.0 - 1e-12
MIN_TEST_SAMPLES = 5
MIN_SCORE_SAMPLES = 2
SCORE_TIE = 1e-9
F_RESIDUAL_PARAMS = 2
LOG_2PI = math.log(2.0 * math.pi)


class NumericalError(RuntimeError):
    """Optimisation or scoring produced non-finite values."""


@dataclass
class SuffStats:
    """Per-environment sizes, means and (MLE) covariances.

    Either full covariance matrices or centred data are held; with data only,
    small covariance blocks are computed on request.
    """

    ns: np.ndarray
    means: np.ndarray
    degenerate: np.ndarray
    _cov: np.ndarray | None = None
    _data: list[np.ndarray] | None = field(default=None, repr=False)

    @classmethod
    def from_covariances(cls, covs, ns, means=None) -> "SuffStats":
        covs = np.asarray(covs, dtype=float)
        ns = np.asarray(ns, dtype=float)
        k, p, _ = covs.shape
        means = np.zeros((k, p)) if means is None else np.asarray(means, dtype=float)
        diag = np.diagonal(covs, axis1=1, axis2=2)
        return cls(ns, means, _degenerate(diag, means), _cov=covs)

    @property
    def k(self) -> int:
        return len(self.ns)

    @property
    def p(self) -> int:
        return self.means.shape[1]

    @property
    def n_total(self) -> float:
        return float(self.ns.sum())

    def cov(self, env: int, idx: Sequence[int]) -> np.ndarray:
        idx = list(idx)
        if self._cov is not None:
            return self._cov[env][np.ix_(idx, idx)]
        x = self._data[env][:, idx]
        return x.T @ x / self.ns[env]

    def covariance(self, env: int) -> np.ndarray:
        if self._cov is not None:
            return self._cov[env]
        x = self._data[env]
        return x.T @ x / self.ns[env]

    def correlation(self, env: int) -> np.ndarray:
        """Correlation matrix; pairs touching a zero-variance column are 0."""
        return _correlation(self.covariance(env), self.degenerate[env])

    def pooled_correlation(self) -> np.ndarray:
        """Correlation of the row-concatenated (uncentred) data."""
        n = self.n_total
        grand = (self.ns[:, None] * self.means).sum(axis=0) / n
        total = np.zeros((self.p, self.p))
        for i in range(self.k):
            d = self.means[i] - grand
            total += self.ns[i] * (self.covariance(i) + np.outer(d, d))
        total /= n
        return _correlation(total, _degenerate(np.diag(total)[None], grand[None])[0])

    def usable(self, env: int, vertices: Sequence[int], min_n: int) -> bool:
        return self.ns[env] >= min_n and not self.degenerate[env, list(vertices)].any()


def _degenerate(var: np.ndarray, means: np.ndarray) -> np.ndarray:
    return var <= 1e-12 * (1.0 + means**2)


def _correlation(cov: np.ndarray, degenerate: np.ndarray) -> np.ndarray:
    sd = np.sqrt(np.where(degenerate, 1.0, np.diag(cov)))
    r = cov / np.outer(sd, sd)
    r[degenerate, :] = 0.0
    r[:, degenerate] = 0.0
    np.fill_diagonal(r, 1.0)
    return np.clip(r, -1.0, 1.0)


def suff_stats(data: Sequence[np.ndarray], keep_covariance: bool | None = None) -> SuffStats:
    """Centre each environment and accumulate its second moments.

    Covariance matrices are materialised unless ``p`` is large, in which case
    the centred data are kept instead.
    """
    data = [np.asarray(x, dtype=float) for x in data]
    if not data:
        raise ValueError("need at least one environment")
    p = data[0].shape[1]
    for x in data:
        if x.ndim != 2 or x.shape[1] != p:
            raise ValueError("all environments need the same number of columns")
        if x.shape[0] < 2:
            raise ValueError("each environment needs at least two rows")
    ns = np.array([x.shape[0] for x in data], dtype=float)
    means = np.array([x.mean(axis=0) for x in data])
    centred = [x - m for x, m in zip(data, means)]
    if keep_covariance is None:
        keep_covariance = len(data) * p * p <= 5e7
    if keep_covariance:
        covs = np.array([c.T @ c / n for c, n in zip(centred, ns)])
        diag = np.diagonal(covs, axis1=1, axis2=2)
        return SuffStats(ns, means, _degenerate(diag, means), _cov=covs)
    diag = np.array([(c**2).mean(axis=0) for c in centred])
    return SuffStats(ns, means, _degenerate(diag, means), _data=centred)


# --------------------------------------------------------------------------
# aggregation primitives


def fisher_weight(rhos, ns) -> float:
    """``-sum(n_I / 2 * log(1 - rho_I^2))`` with ``|rho|`` clipped below one."""
    r = np.clip(np.abs(np.asarray(rhos, dtype=float)), 0.0, RHO_CLIP)
    return float(-(np.asarray(ns, dtype=float) / 2.0 * np.log1p(-(r**2))).sum())


def weighted_mean(values, weights) -> float:
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValueError("empty input")
    return float((values * weights).sum() / weights.sum())


def weighted_median(values, weights) -> float:
    """Smallest value whose cumulative weight reaches half the total."""
    values = np.asarray(values, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if values.size == 0:
        raise ValueError("empty input")
    order = np.argsort(values, kind="stable")
    cum = np.cumsum(weights[order])
    return float(values[order][np.searchsorted(cum, 0.5 * cum[-1] * (1 - 1e-12))])


# --------------------------------------------------------------------------
# invariance of regression coefficients


class Direction(str, Enum):
    U_TO_V = "u_to_v"
    V_TO_U = "v_to_u"
    UNDECIDED = "undecided"


@dataclass(frozen=True)
class EdgeTestResult:
    direction: Direction
    p_value: float | None
    tests_run: int


def _slope_moments(cov2: np.ndarray, n: float) -> tuple[float, float, float, float]:
    """``(n, Sxx, Sxy, Syy)`` sums of squares from a 2x2 MLE covariance."""
    return n, n * cov2[0, 0], n * cov2[0, 1], n * cov2[1, 1]


def f_test_from_moments(m0, m1) -> float | None:
    """p-value for equal slopes in two centred regressions of ``y`` on ``x``.

    Heteroscedastic Chow statistic referred to ``F(1, f)`` with the
    Satterthwaite degrees of freedom of the pooled residual variance.
    Returns ``None`` when a regressor or residual has no variance.
    """
    n0, sxx0, sxy0, syy0 = m0
    n1, sxx1, sxy1, syy1 = m1
    if min(n0, n1) <= F_RESIDUAL_PARAMS or sxx0 <= 0 or sxx1 <= 0:
        return None
    rss0 = max(syy0 - sxy0**2 / sxx0, 0.0)
    rss1 = max(syy1 - sxy1**2 / sxx1, 0.0)
    rss = max(syy0 + syy1 - (sxy0 + sxy1) ** 2 / (sxx0 + sxx1), 0.0)
    split = rss0 + rss1
    if split <= 1e-300:
        return None
    d0 = n0 - F_RESIDUAL_PARAMS
    d1 = n1 - F_RESIDUAL_PARAMS
    dof = split**2 / (rss0**2 / d0 + rss1**2 / d1)
    stat = max(rss - split, 0.0) / (split / dof)
    return float(sps.f.sf(stat, 1, dof))


def irc_f_test(x_u0, x_v0, x_uI, x_vI) -> float | None:
    """Test that regressing ``x_v`` on ``x_u`` gives the same slope in two environments."""
    moments = []
    for xu, xv in ((x_u0, x_v0), (x_uI, x_vI)):
        xu = np.asarray(xu, dtype=float)
        xv = np.asarray(xv, dtype=float)
        xu = xu - xu.mean()
        xv = xv - xv.mean()
        moments.append((len(xu), xu @ xu, xu @ xv, xv @ xv))
    return f_test_from_moments(*moments)


def _irc_pvalues(x: int, y: int, stats: SuffStats, fam: InterventionFamily) -> list[float]:
    """p-values of "x -> y" against every environment targeting x but not y."""
    obs = fam.observational
    if not stats.usable(obs, (x, y), MIN_TEST_SAMPLES):
        return []
    m0 = _slope_moments(stats.cov(obs, (x, y)), stats.ns[obs])
    out = []
    for env in fam.only(x, y):
        if not stats.usable(env, (x, y), MIN_TEST_SAMPLES):
            continue
        pv = f_test_from_moments(m0, _slope_moments(stats.cov(env, (x, y)), stats.ns[env]))
        if pv is not None:
            out.append(pv)
    return out


def irc_orient_edge(
    u: int, v: int, stats: SuffStats, fam: InterventionFamily, alpha: float = 0.05
) -> EdgeTestResult:
    """Orient ``u - v`` from slope invariance with Bonferroni-corrected tests.

    Environments targeting ``u`` only test ``u -> v``; those targeting ``v``
    only test ``v -> u``.  A rejected hypothesis orients the edge the other
    way.  With both families available, the smaller significant p-value wins.
    """
    fwd = _irc_pvalues(u, v, stats, fam)
    rev = _irc_pvalues(v, u, stats, fam)
    tests = len(fwd) + len(rev)
    if not fwd and not rev:
        return EdgeTestResult(Direction.UNDECIDED, None, 0)
    p_fwd = min(fwd) if fwd else None
    p_rev = min(rev) if rev else None
    rej_fwd = p_fwd is not None and p_fwd < alpha / len(fwd)
    rej_rev = p_rev is not None and p_rev < alpha / len(rev)
    if fwd and not rev:
        return EdgeTestResult(Direction.V_TO_U if rej_fwd else Direction.U_TO_V, p_fwd, tests)
    if rev and not fwd:
        return EdgeTestResult(Direction.U_TO_V if rej_rev else Direction.V_TO_U, p_rev, tests)
    if rej_fwd and (not rej_rev or p_fwd <= p_rev):
        return EdgeTestResult(Direction.V_TO_U, p_fwd, tests)
    if rej_rev:
        return EdgeTestResult(Direction.U_TO_V, p_rev, tests)
    return EdgeTestResult(Direction.UNDECIDED, min(p_fwd, p_rev), tests)


# --------------------------------------------------------------------------
# bounded maximisation


def brent_maximize(
    f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-10, grid: int = 0
) -> tuple[float, float]:
    """Maximise ``f`` on ``[lo, hi]`` with bounded Brent iterations.

    ``grid > 0`` first scans that many points and narrows the bracket to the
    neighbourhood of the best one, which guards against secondary modes.
    """
    if not lo < hi:
        raise ValueError("need lo < hi")

    def neg(x):
        val = f(x)
        if not np.isfinite(val):
            raise NumericalError(f"objective is not finite at x={x!r}: {val!r}")
        return -val

    if grid > 0:
        xs = np.linspace(lo, hi, grid)
        vals = np.array([f(x) for x in xs])
        if not np.isfinite(vals).all():
            raise NumericalError("objective is not finite on the scan grid")
        j = int(np.argmax(vals))
        lo, hi = xs[max(j - 1, 0)], xs[min(j + 1, grid - 1)]
    res = optimize.minimize_scalar(
        neg, bounds=(lo, hi), method="bounded", options={"xatol": tol, "maxiter": 500}
    )
    x = float(res.x)
    best = (x, -float(res.fun))
    # the bounded method never evaluates the endpoints themselves
    for edge in (lo, hi):
        val = -neg(edge)
        if val > best[1]:
            best = (float(edge), val)
    return best


# --------------------------------------------------------------------------
# Gaussian log-likelihood pieces, all from sums of squares


def _gauss_ll(n: float, rss: float) -> float:
    """Maximised log-likelihood of ``n`` draws with MLE variance ``rss / n``."""
    return -0.5 * n * (LOG_2PI + math.log(rss / n)) - 0.5 * n


def profile_objective(moments: Sequence[tuple[float, float, float, float]]) -> Callable[[float], float]:
    """``lambda -> -sum(n_I / 2 * log ||y_I - lambda x_I||^2)`` over the given environments."""
    arr = np.array(moments, dtype=float)
    n, sxx, sxy, syy = arr.T

    def f(lam: float) -> float:
        q = syy - 2.0 * lam * sxy + lam * lam * sxx
        return float(-(0.5 * n * np.log(q)).sum())

    return f


def profile_bracket(moments) -> float:
    arr = np.array(moments, dtype=float)
    slopes = arr[:, 2] / arr[:, 1]
    return 2.0 * float(np.abs(slopes).max()) + 1.0


def shared_slope(moments, tol: float = 1e-10) -> tuple[float, float]:
    """Common slope maximising the free-variance profile likelihood, and its value."""
    b = profile_bracket(moments)
    return brent_maximize(profile_objective(moments), -b, b, tol=tol, grid=33)


def _cond_ll_free_var(
    stats: SuffStats, y: int, x: int, envs: Sequence[int], fam: InterventionFamily
) -> float:
    """log L of ``y | x`` with per-environment variances; slope shared where ``y`` is not a target."""
    shared, own = [], []
    for env in envs:
        m = _slope_moments(stats.cov(env, (x, y)), stats.ns[env])
        (own if y in fam[env] else shared).append(m)
    ll = 0.0
    for n, sxx, sxy, syy in own:
        ll += _gauss_ll(n, syy - sxy**2 / sxx)
    if shared:
        lam, _ = shared_slope(shared)
        for n, sxx, sxy, syy in shared:
            ll += _gauss_ll(n, syy - 2 * lam * sxy + lam * lam * sxx)
    return ll


def _marginal_ll_free_var(stats: SuffStats, x: int, envs: Sequence[int]) -> float:
    return sum(_gauss_ll(stats.ns[e], stats.ns[e] * stats.cov(e, (x,))[0, 0]) for e in envs)


@dataclass(frozen=True)
class BicScore:
    score: float
    loglik: float
    dim: int
    n: float


def _bic(loglik: float, dim: int, n: float) -> BicScore:
    return BicScore(math.log(n) * dim - 2.0 * loglik, loglik, dim, n)


def _score_envs(stats: SuffStats, vertices: Sequence[int]) -> list[int]:
    envs = [e for e in range(stats.k) if stats.usable(e, vertices, MIN_SCORE_SAMPLES)]
    dropped = stats.k - len(envs)
    if dropped:
        log.debug("dropped %d environments for vertices %s", dropped, list(vertices))
    return envs


def bic_edge_score(u: int, v: int, stats: SuffStats, fam: InterventionFamily) -> BicScore:
    """BIC of ``u -> v`` from the bivariate margin; lower is better."""
    envs = _score_envs(stats, (u, v))
    ll = _marginal_ll_free_var(stats, u, envs) + _cond_ll_free_var(stats, v, u, envs, fam)
    n_v = sum(1 for e in envs if v in fam[e])
    dim = 2 * len(envs) + 1 + n_v
    return _bic(ll, dim, float(stats.ns[envs].sum()))


def bic_orient_edge(u: int, v: int, stats: SuffStats, fam: InterventionFamily) -> EdgeTestResult:
    fwd = bic_edge_score(u, v, stats, fam).score
    rev = bic_edge_score(v, u, stats, fam).score
    gap = rev - fwd
    if abs(gap) < SCORE_TIE:
        return EdgeTestResult(Direction.UNDECIDED, gap, 2)
    return EdgeTestResult(Direction.U_TO_V if gap > 0 else Direction.V_TO_U, gap, 2)


# --------------------------------------------------------------------------
# tree-component scores with shared variances


@dataclass
class _RootTerms:
    """Per-vertex and per-directed-edge pieces of the rooted component likelihood."""

    marginal: dict[int, tuple[float, int]]
    conditional: dict[Edge, tuple[float, int]]
    n: float


def _pooled_ll(ns, rss) -> float:
    n = float(sum(ns))
    return _gauss_ll(n, float(sum(rss)))


def _root_terms(edges: Sequence[Edge], vertices: Sequence[int], stats: SuffStats, fam) -> _RootTerms:
    envs = _score_envs(stats, vertices)
    marginal = {}
    for r in vertices:
        shared = [e for e in envs if r not in fam[e]]
        own = [e for e in envs if r in fam[e]]
        ll = 0.0
        if shared:
            ll += _pooled_ll([stats.ns[e] for e in shared],
                             [stats.ns[e] * stats.cov(e, (r,))[0, 0] for e in shared])
        ll += sum(_gauss_ll(stats.ns[e], stats.ns[e] * stats.cov(e, (r,))[0, 0]) for e in own)
        marginal[r] = (ll, 1 + len(own))
    conditional = {}
    for a, b in edges:
        for x, y in ((a, b), (b, a)):
            mom = {e: _slope_moments(stats.cov(e, (x, y)), stats.ns[e]) for e in envs}
            shared = [mom[e] for e in envs if y not in fam[e]]
            own = [mom[e] for e in envs if y in fam[e]]
            ll = 0.0
            if shared:
                lam = sum(m[2] for m in shared) / sum(m[1] for m in shared)
                ll += _pooled_ll([m[0] for m in shared],
                                 [m[3] - 2 * lam * m[2] + lam * lam * m[1] for m in shared])
            ll += sum(_gauss_ll(m[0], m[3] - m[2] ** 2 / m[1]) for m in own)
            conditional[(x, y)] = (ll, 2 * (1 + len(own)))
    return _RootTerms(marginal, conditional, float(stats.ns[envs].sum()))


def bic_root_score(
    edges: Sequence[Edge], root: int, stats: SuffStats, fam: InterventionFamily, vertices=None
) -> BicScore:
    """BIC of the component with every edge directed away from ``root``."""
    from .graphs import orient_away

    edges = [tuple(e) for e in edges]
    if vertices is None:
        vertices = sorted({root} | {x for e in edges for x in e})
    terms = _root_terms(edges, vertices, stats, fam)
    ll, dim = terms.marginal[root]
    for a, b in orient_away(stats.p, edges, root):
        cll, cdim = terms.conditional[(a, b)]
        ll += cll
        dim += cdim
    return _bic(ll, dim, terms.n)


def all_root_scores(
    edges: Sequence[Edge], vertices: Sequence[int], stats: SuffStats, fam: InterventionFamily
) -> dict[int, BicScore]:
    """Root scores for every vertex of a component by rerooting in linear time."""
    edges = [tuple(e) for e in edges]
    terms = _root_terms(edges, vertices, stats, fam)
    adj: dict[int, list[int]] = {v: [] for v in vertices}
    for a, b in edges:
        adj[a].append(b)
        adj[b].append(a)
    start = vertices[0]
    ll, dim = terms.marginal[start]
    order = [start]
    parent = {start: None}
    for a in order:
        for b in adj[a]:
            if b not in parent:
                parent[b] = a
                order.append(b)
                cll, cdim = terms.conditional[(a, b)]
                ll += cll
                dim += cdim
    # edge-only totals; swapping the root along (a, b) flips one conditional term
    edge_ll = {start: ll - terms.marginal[start][0]}
    edge_dim = {start: dim - terms.marginal[start][1]}
    for b in order[1:]:
        a = parent[b]
        fwd_ll, fwd_dim = terms.conditional[(a, b)]
        rev_ll, rev_dim = terms.conditional[(b, a)]
        edge_ll[b] = edge_ll[a] - fwd_ll + rev_ll
        edge_dim[b] = edge_dim[a] - fwd_dim + rev_dim
    out = {}
    for r in vertices:
        out[r] = _bic(edge_ll[r] + terms.marginal[r][0], edge_dim[r] + terms.marginal[r][1], terms.n)
    return out


# --------------------------------------------------------------------------
# collider decisions


def collider_statistic(u: int, w: int, stats: SuffStats) -> tuple[float, float]:
    """Return ``(2 * fisher_weight(rho_uw), log(n) * |envs|)`` over usable environments."""
    envs = [e for e in range(stats.k) if stats.usable(e, (u, w), MIN_SCORE_SAMPLES)]
    rhos = []
    for e in envs:
        c = stats.cov(e, (u, w))
        rhos.append(c[0, 1] / math.sqrt(c[0, 0] * c[1, 1]))
    ns = stats.ns[envs]
    return 2.0 * fisher_weight(rhos, ns), math.log(float(ns.sum())) * len(envs)


def collider_test_simple(u: int, v: int, w: int, stats: SuffStats, fam: InterventionFamily) -> bool:
    """``u -> v <- w`` iff independence of ``u`` and ``w`` wins the BIC comparison."""
    stat, penalty = collider_statistic(u, w, stats)
    return stat <= penalty


def _shared_pair_coefficients(blocks) -> np.ndarray:
    """Common ``(beta_u, beta_w)`` maximising ``-sum(n/2 log RSS)``.

    ``blocks`` holds ``(n, M, s, syy)`` with ``M`` the 2x2 regressor scatter and
    ``s`` the regressor/response cross products.
    """
    ns = np.array([b[0] for b in blocks])
    ms = np.array([b[1] for b in blocks])
    ss = np.array([b[2] for b in blocks])
    yy = np.array([b[3] for b in blocks])
    own = np.array([np.linalg.solve(m, s) for m, s in zip(ms, ss)])
    bound = 2.0 * float(np.abs(own).max()) + 1.0
    start = np.linalg.solve(ms.sum(axis=0), ss.sum(axis=0))

    def neg(beta):
        q = yy - 2.0 * ss @ beta + np.einsum("i,kij,j->k", beta, ms, beta)
        if (q <= 0).any():
            return np.inf, np.zeros(2)
        grad_q = -2.0 * ss + 2.0 * ms @ beta
        val = 0.5 * (ns * np.log(q)).sum()
        grad = 0.5 * ((ns / q)[:, None] * grad_q).sum(axis=0)
        return val, grad

    res = optimize.minimize(
        neg, np.clip(start, -bound, bound), jac=True, method="L-BFGS-B",
        bounds=[(-bound, bound)] * 2, options={"ftol": 1e-14, "gtol": 1e-10},
    )
    if not np.isfinite(res.fun):
        raise NumericalError("collider likelihood is not finite")
    return res.x


def refined_scores(
    u: int, v: int, w: int, stats: SuffStats, fam: InterventionFamily
) -> tuple[BicScore, BicScore] | None:
    """BIC of the chain ``u -> v -> w`` and of the collider ``u -> v <- w``.

    ``None`` signals a singular regressor block in some environment.
    """
    envs = _score_envs(stats, (u, v, w))
    k = len(envs)
    n_total = float(stats.ns[envs].sum())
    n_v = sum(1 for e in envs if v in fam[e])
    n_w = sum(1 for e in envs if w in fam[e])

    ll_u = _marginal_ll_free_var(stats, u, envs)
    chain_ll = ll_u + _cond_ll_free_var(stats, v, u, envs, fam) + _cond_ll_free_var(stats, w, v, envs, fam)
    chain = _bic(chain_ll, 3 * k + n_v + n_w + 2, n_total)

    coll_ll = ll_u + _marginal_ll_free_var(stats, w, envs)
    shared = []
    for e in envs:
        n = stats.ns[e]
        c = n * stats.cov(e, (u, w, v))
        m, s, syy = c[:2, :2], c[:2, 2], c[2, 2]
        det = m[0, 0] * m[1, 1] - m[0, 1] ** 2
        if det <= 1e-12 * m[0, 0] * m[1, 1]:
            return None
        if v in fam[e]:
            beta = np.linalg.solve(m, s)
            coll_ll += _gauss_ll(n, syy - s @ beta)
        else:
            shared.append((n, m, s, syy))
    if shared:
        beta = _shared_pair_coefficients(shared)
        for n, m, s, syy in shared:
            coll_ll += _gauss_ll(n, syy - 2 * s @ beta + beta @ m @ beta)
    collider = _bic(coll_ll, 2 * (2 * k + n_v + 1), n_total)
    return chain, collider


def collider_test_refined(u: int, v: int, w: int, stats: SuffStats, fam: InterventionFamily) -> bool:
    """Given ``u -> v``, decide ``w -> v`` (True) against ``v -> w`` by BIC."""
    scores = refined_scores(u, v, w, stats, fam)
    if scores is None:
        log.info("singular regressors for %d -> %d <- %d; using the independence test", u, v, w)
        return collider_test_simple(u, v, w, stats, fam)
    chain, collider = scores
    return chain.score - collider.score > SCORE_TIE
