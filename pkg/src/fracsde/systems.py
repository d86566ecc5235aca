"""Locally interacting SDE systems on graphs.

Each vertex carries its own fractional noise; drifts read the vertex's own
state and the sum over its neighbors at the left endpoint of each step. Two
constructions of the same drifted law coexist here on purpose: an explicit
Euler loop, and importance reweighting of the driftless product law one
vertex at a time. Their agreement is a checkable statement, so nothing in
this module is allowed to share code between the two routes beyond the
kernel matrix itself.

Noise streams are keyed by vertex label alone (lane "noise/<label>"), never
by vertex count or graph identity. Two graphs sharing a vertex label see the
same noise for it under the same seed, which is what makes truncation sweeps
common-random-number comparable and truncation locality bit-exact.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import SeparatorDegenerateError
from .girsanov import (
    NOVIKOV_CAP_DEFAULT,
    ConstantDrift,
    Drift,
    girsanov_log_weight,
)
from .graphs import LocallyFiniteGraph, TruncatedGraph, boundary, truncate, two_cliques
from .kernels import fbm_spec
from .paths import (
    KIND_VOLTERRA,
    DiscretizedKernel,
    PathEnsemble,
    TimeGrid,
    discretize_kernel,
    sample_bm,
    volterra_paths,
)
from .rng import lane, normals, permutations, uniforms

ZERO_DRIFT = ConstantDrift(0.0)


# ----------------------------------------------------------------------
# Initial laws and drift assignments
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class InitialLaw:
    """Product initial law: the same point mass or Gaussian at every vertex.

    Gaussians draw from lane "init/<label>", so initial values follow the
    same vertex-identity convention as the noise.
    """

    kind: str = "point"
    loc: float = 0.0
    scale: float = 0.0

    def __post_init__(self):
        if self.kind not in ("point", "gauss"):
            raise ValueError(f"unknown initial law {self.kind!r}")
        if self.kind == "gauss" and not self.scale > 0:
            raise ValueError("gaussian initial law needs a positive scale")

    def sample(self, label, m: int, seed: int) -> np.ndarray:
        if self.kind == "point":
            return np.full(m, self.loc)
        g = normals(seed, lane(f"init/{label}"), m, 1)[:, 0]
        return self.loc + self.scale * g

    def spec_string(self) -> str:
        if self.kind == "point":
            return f"point:{self.loc!r}"
        return f"gauss:{self.loc!r}:{self.scale!r}"


def parse_initial(text: str) -> InitialLaw:
    parts = text.split(":")
    try:
        if parts[0] == "point" and len(parts) == 2:
            return InitialLaw("point", float(parts[1]))
        if parts[0] == "gauss" and len(parts) == 3:
            return InitialLaw("gauss", float(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ValueError(f"bad initial-law spec {text!r}") from exc
    raise ValueError(f"unknown initial-law spec {text!r}")


@dataclass
class VertexDriftSpec:
    """Per-vertex drift assignment with an optional truncation kill set.

    Vertices in zero_set get zero drift regardless of the default or any
    override; level records the truncation radius that produced the kill
    set, when there is one.
    """

    default: Drift
    overrides: Mapping = field(default_factory=dict)
    zero_set: FrozenSet = frozenset()
    level: Optional[int] = None

    def drift_for(self, v) -> Drift:
        if v in self.zero_set:
            return ZERO_DRIFT
        return self.overrides.get(v, self.default)

    def growth_certificate(self, graph: LocallyFiniteGraph) -> float:
        return max(self.drift_for(v).growth_bound(graph.degree(v))
                   for v in graph.require_finite())


def uniform_drifts(drift: Drift) -> VertexDriftSpec:
    return VertexDriftSpec(default=drift)


def truncated_drift(spec: VertexDriftSpec, trunc: TruncatedGraph) -> VertexDriftSpec:
    """Drift assignment for a truncated graph: untouched on the interior
    V_{n-2}, forced to zero on the shell U_n."""
    return VertexDriftSpec(default=spec.default, overrides=dict(spec.overrides),
                           zero_set=frozenset(spec.zero_set | trunc.u_n),
                           level=trunc.level)


# ----------------------------------------------------------------------
# Joint ensembles
# ----------------------------------------------------------------------


@dataclass
class SystemEnsemble:
    """Joint paths for every vertex, sharing the path index.

    values[v] is m x (N+1) with column 0 the initial value. drifted records
    whether an Euler drift was applied (False = sampled under the driftless
    product law and eligible for reweighting).
    """

    grid: TimeGrid
    vertices: Tuple
    values: Dict
    initial: Dict
    hurst: Dict
    seed: int
    init_law: InitialLaw
    drifted: bool

    @property
    def m(self) -> int:
        return self.values[self.vertices[0]].shape[0]

    def terminal(self, v) -> np.ndarray:
        return self.values[v][:, -1]

    def driftless_part(self, v) -> PathEnsemble:
        """X^v - X^v_0 as a volterra-path ensemble (driftless systems only)."""
        if self.drifted:
            raise ValueError("ensemble was sampled with drift; not a volterra path")
        z = self.values[v] - self.initial[v][:, None]
        return PathEnsemble(self.grid, KIND_VOLTERRA, z, self.seed, f"noise/{v}")


def _kernel_cache(hurst: Dict, grid: TimeGrid) -> Dict[float, DiscretizedKernel]:
    out: Dict[float, DiscretizedKernel] = {}
    for h in set(hurst.values()):
        out[h] = discretize_kernel(fbm_spec(h, horizon=grid.horizon), grid)
    return out


def _hurst_map(hurst, vertices) -> Dict:
    if isinstance(hurst, dict):
        missing = [v for v in vertices if v not in hurst]
        if missing:
            raise ValueError(f"no Hurst index for vertices {missing!r}")
        return {v: float(hurst[v]) for v in vertices}
    return {v: float(hurst) for v in vertices}


def simulate_system_euler(graph: LocallyFiniteGraph, drifts: VertexDriftSpec,
                          hurst, grid: TimeGrid, m: int, seed: int,
                          init: Optional[InitialLaw] = None) -> SystemEnsemble:
    """Left-endpoint Euler scheme driven by per-vertex fractional noise.

    X^u_{i+1} = X^u_i + b_u(X^u_i, sum of neighbor states at t_i) dt + dZ^u_i
    with dZ^u the increments of an independent Volterra path per vertex.
    """
    init = init or InitialLaw()
    vertices = tuple(graph.vertices())
    hmap = _hurst_map(hurst, vertices)
    kernels = _kernel_cache(hmap, grid)
    n = grid.n_steps
    dt = grid.dt
    dz: Dict = {}
    x: Dict = {}
    x0: Dict = {}
    for v in vertices:
        z = volterra_paths(kernels[hmap[v]], sample_bm(grid, m, seed, f"noise/{v}"))
        dz[v] = np.diff(z.values, axis=1)
        x0[v] = init.sample(v, m, seed)
        arr = np.empty((m, n + 1))
        arr[:, 0] = x0[v]
        x[v] = arr
    drift_of = {v: drifts.drift_for(v) for v in vertices}
    any_drift = any(not (d.is_constant and d.growth_bound() == 0.0) for d in drift_of.values())
    for i in range(n):
        state = {v: x[v][:, i] for v in vertices}
        for v in vertices:
            d = drift_of[v]
            if d.uses_neighbors:
                nbr = sum((state[w] for w in graph.neighbors(v)),
                          start=np.zeros(m))
                b = d.values(state[v], nbr)
            else:
                b = d.values(state[v])
            x[v][:, i + 1] = state[v] + b * dt + dz[v][:, i]
    return SystemEnsemble(grid, vertices, x, x0, hmap, seed, init, any_drift)


def driftless_system(graph: LocallyFiniteGraph, hurst, grid: TimeGrid, m: int,
                     seed: int, init: Optional[InitialLaw] = None) -> SystemEnsemble:
    """Sample the zero-drift product law directly (no step loop needed)."""
    sys = simulate_system_euler(graph, uniform_drifts(ZERO_DRIFT), hurst, grid, m, seed, init)
    sys.drifted = False
    return sys


# ----------------------------------------------------------------------
# Reweighting and the clique factorization
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class SystemWeights:
    """Per-vertex reweighting of a driftless system, with clique bookkeeping.

    factors maps each 2-clique to its per-path log factor: the closed
    neighborhood of u accumulates log Z^u, every other clique stays zero.
    bookkeeping_gap is the max over paths of |sum of factors - total|,
    exactly zero in exact arithmetic and tested to stay at float rounding.
    """

    per_vertex: Dict
    total: np.ndarray
    factors: Dict
    bookkeeping_gap: float
    results: Dict


def system_log_weights(graph: LocallyFiniteGraph, drifts: VertexDriftSpec,
                       system: SystemEnsemble,
                       cap: float = NOVIKOV_CAP_DEFAULT) -> SystemWeights:
    if system.drifted:
        raise ValueError("reweighting needs a driftless ensemble")
    kernels = _kernel_cache(system.hurst, system.grid)
    per_vertex: Dict = {}
    results: Dict = {}
    m = system.m
    for v in system.vertices:
        d = drifts.drift_for(v)
        z = system.driftless_part(v)
        nbr = None
        if d.uses_neighbors:
            nbr = sum((system.values[w] for w in graph.neighbors(v)),
                      start=np.zeros((m, system.grid.n_steps + 1)))
        res = girsanov_log_weight(kernels[system.hurst[v]], z, d,
                                  x0=system.initial[v], neighbor_values=nbr, cap=cap,
                                  degree=graph.degree(v))
        per_vertex[v] = res.log_weights
        results[v] = res
    total = np.zeros(m)
    for v in system.vertices:
        total = total + per_vertex[v]
    factors: Dict = {c: np.zeros(m) for c in two_cliques(graph)}
    for v in system.vertices:
        home = frozenset((v,) + graph.neighbors(v))
        factors[home] = factors[home] + per_vertex[v]
    recomposed = np.zeros(m)
    for c in sorted(factors, key=lambda s: sorted(map(repr, s))):
        recomposed = recomposed + factors[c]
    gap = float(np.max(np.abs(recomposed - total))) if m else 0.0
    return SystemWeights(per_vertex, total, factors, gap, results)


def reweighted_expectation(weights: SystemWeights, phi: np.ndarray) -> Tuple[float, float]:
    """Unnormalized importance estimate mean(w phi) with its standard error."""
    w = np.exp(weights.total)
    prod = w * np.asarray(phi, dtype=float)
    m = prod.shape[0]
    return float(np.mean(prod)), float(np.std(prod, ddof=1) / np.sqrt(m))


# ----------------------------------------------------------------------
# Conditional-independence testing
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class CITestReport:
    set_a: Tuple
    set_b: Tuple
    separator: Tuple
    statistic: float
    p_value: float
    m: int
    perms: int
    seed: int
    m_used: int
    ess: float


def _summaries(system: SystemEnsemble, region: Sequence, count: int) -> np.ndarray:
    n = system.grid.n_steps
    idx = sorted({max(1, round(k * n / count)) for k in range(1, count + 1)})
    cols = [system.values[v][:, j] for v in sorted(region) for j in idx]
    return np.column_stack(cols)


def _design_basis(design: np.ndarray) -> np.ndarray:
    """Orthonormal column basis of the separator design, or a rank error."""
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise SeparatorDegenerateError(
            "separator summaries are rank deficient; enlarge m or change summary times")
    q, _ = np.linalg.qr(design)
    return q


def _residualize(feats: np.ndarray, basis: np.ndarray) -> np.ndarray:
    return feats - basis @ (basis.T @ feats)


def _max_abs_correlation(ra: np.ndarray, rb: np.ndarray) -> float:
    num = ra.T @ rb
    den = np.outer(np.linalg.norm(ra, axis=0), np.linalg.norm(rb, axis=0))
    safe = den > 1e-300
    corr = np.zeros_like(num)
    np.divide(num, den, out=corr, where=safe)
    return float(np.max(np.abs(corr)))


def conditional_independence_test(system: SystemEnsemble, log_weights: np.ndarray,
                                  set_a, set_b, separator, perms: int = 500,
                                  seed: int = 0, a_times: int = 4,
                                  s_times: Optional[int] = None) -> CITestReport:
    """Permutation test of conditional independence given the separator.

    Path summaries (values at a_times equispaced nodes per vertex in A and
    B) are residualized against the separator paths by least squares; the
    statistic is the largest absolute correlation between residual pairs.
    The null distribution permutes the B residuals across paths and then
    re-residualizes them against the same design, so every permuted
    statistic carries exactly the nuisance-fitting noise of the observed
    one. Skipping that second projection leaves the observed correlations
    on the 1/(m - p) variance scale while the permuted ones sit on 1/m,
    which rejects too often for no reason beyond the design width.

    s_times = None conditions on every grid node of the separator paths.
    That is the faithful grid-level reading of conditioning on the
    separator trajectories; a smaller count leaves dependence through the
    unobserved part of the separator and inflates rejection even when the
    independence structure holds.

    Non-uniform weights are consumed by importance resampling: a weighted
    rejection sample keeps row i when u_i <= w_i / max(w), which makes the
    kept rows independent draws from exactly the reweighted law, where the
    graph separation property actually holds; the unweighted permutation
    test then runs on those rows. Permuting weighted rows directly is not
    an option because the weight of a path is a function of, among other
    things, its own B-side values, and the permutation null cannot
    reproduce that coupling. Nor is any fixed-size weighted subsample:
    keeping the top rows of a weighted draw conditions on an event of the
    form {phi(A side) psi(B side) > threshold}, which does not factorize
    and so induces spurious A-B dependence inside the subsample.
    """
    set_a, set_b, separator = map(tuple, (sorted(set_a), sorted(set_b), sorted(separator)))
    if set(set_b) & (set(set_a) | set(separator)):
        raise ValueError("B must be disjoint from A and the separator")
    if perms < 500:
        raise ValueError("need at least 500 permutations")
    m = system.m
    log_w = np.asarray(log_weights, dtype=float)
    w = np.exp(log_w - np.max(log_w))
    w = w / np.mean(w)
    ess = m / (1.0 + float(np.var(w)))
    if np.ptp(log_w) > 1e-12:
        u = uniforms(seed, lane("ci-sir"), m, 1)[:, 0]
        rows = np.nonzero(u * np.max(w) <= w)[0]
        m_used = int(rows.size)
    else:
        m_used = m
        rows = np.arange(m)
    feats_a = _summaries(system, set_a, a_times)[rows]
    feats_b = _summaries(system, set_b, a_times)[rows]
    if s_times is None:
        s_times = system.grid.n_steps
    if separator:
        design = np.column_stack([np.ones(m_used),
                                  _summaries(system, separator, s_times)[rows]])
    else:
        design = np.ones((m_used, 1))
    basis = _design_basis(design)
    ra = _residualize(feats_a, basis)
    rb = _residualize(feats_b, basis)
    observed = _max_abs_correlation(ra, rb)
    perm_rows = permutations(seed, lane("ci-perm"), perms, m_used)
    hits = 0
    for p in range(perms):
        stat = _max_abs_correlation(ra, _residualize(rb[perm_rows[p]], basis))
        if stat >= observed:
            hits += 1
    p_value = (1.0 + hits) / (perms + 1.0)
    return CITestReport(set_a, set_b, separator, observed, p_value, m, perms, seed,
                        m_used, float(ess))


# ----------------------------------------------------------------------
# Truncation-convergence sweeps
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class TruncationEntry:
    level: int
    n_vertices: int
    estimate: float
    stderr: float


@dataclass(frozen=True)
class TruncationSweep:
    entries: List[TruncationEntry]
    diffs: List[float]
    diff_stderrs: List[float]


def clipped_terminal(vertex, lo: float = -10.0, hi: float = 10.0):
    """psi(X) = terminal value at one vertex, clipped to [lo, hi]."""

    def psi(system: SystemEnsemble) -> np.ndarray:
        return np.clip(system.terminal(vertex), lo, hi)

    return psi


def truncation_convergence(base: LocallyFiniteGraph, drifts: VertexDriftSpec,
                           psi, region, n_list: Sequence[int], hurst,
                           grid: TimeGrid, m: int, seed: int,
                           init: Optional[InitialLaw] = None,
                           root=None) -> TruncationSweep:
    """Estimate E[psi] on a ladder of graph truncations under shared noise.

    All levels reuse the same seed, and noise lanes are keyed by vertex
    label, so estimates at successive n are positively coupled and their
    differences isolate the truncation effect.
    """
    levels = sorted(set(int(n) for n in n_list))
    if levels and levels[0] < 4:
        raise ValueError("truncation levels must be at least 4")
    region = tuple(sorted(region))
    entries = []
    for n in levels:
        trunc = truncate(base, root, n)
        missing = [v for v in region if v not in trunc.interior]
        if missing:
            raise ValueError(f"region {missing!r} not interior to the n={n} truncation")
        drifts_n = truncated_drift(drifts, trunc)
        sysn = simulate_system_euler(trunc.graph, drifts_n, hurst, grid, m, seed, init)
        vals = np.asarray(psi(sysn), dtype=float)
        entries.append(TruncationEntry(n, len(trunc.v_n), float(np.mean(vals)),
                                       float(np.std(vals, ddof=1) / np.sqrt(m))))
    diffs = [abs(b.estimate - a.estimate) for a, b in zip(entries, entries[1:])]
    diff_se = [float(np.hypot(a.stderr, b.stderr)) for a, b in zip(entries, entries[1:])]
    return TruncationSweep(entries, diffs, diff_se)


# ----------------------------------------------------------------------
# Entropy estimate and bound
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyReport:
    region: Tuple
    h_hat: float
    stderr: float
    growth_bound: float
    second_moment: float
    c_t: float
    bound: float
    passed: bool


def entropy_estimate(system: SystemEnsemble, weights: SystemWeights, region,
                     graph: LocallyFiniteGraph, drifts: VertexDriftSpec) -> EntropyReport:
    """Monte Carlo bound H[P^A | P^{*,A}] <= E[Z^(A) log Z^(A)] vs C_t |A|.

    Z^(A) collects the factors of the vertices whose closed neighborhood
    meets the region, i.e. the region plus its first boundary. The constant
    C_t is assembled from the drift growth certificate M and an importance
    weighted estimate of the worst per-vertex running second moment:
    C_t = 1/2 (M t) (1 + 2 sup_u E[sup_s |X^u_s|^2]).
    """
    region = tuple(sorted(region))
    relevant = set(region) | set(boundary(graph, region))
    log_za = np.zeros(system.m)
    for v in sorted(relevant):
        log_za = log_za + weights.per_vertex[v]
    za = np.exp(log_za)
    vals = za * log_za
    h_hat = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / np.sqrt(system.m))
    w_total = np.exp(weights.total)
    second = 0.0
    for v in system.vertices:
        sup_sq = np.max(system.values[v] ** 2, axis=1)
        second = max(second, float(np.mean(w_total * sup_sq)))
    m_cert = drifts.growth_certificate(graph)
    t = system.grid.horizon
    c_t = 0.5 * m_cert * t * (1.0 + 2.0 * second)
    bound = c_t * len(region)
    return EntropyReport(region, h_hat, se, m_cert, second, c_t, bound,
                         h_hat <= bound)
