"""Self-contained checks of the package's headline numerical contracts.

Each criterion function runs one end-to-end validation at a declared
tolerance and returns a structured result. The test suite runs them at full
Monte Carlo scale; the CLI selftest runs the same functions with a reduced
paths_scale, where statistical checks keep their 3-standard-error form (the
thresholds scale with the noise) and the repetition-loop contracts switch to
single-shot smoke versions.

Seeds are fixed constants plus a caller-chosen offset (seed0). Every
statistical pass/fail below is a deterministic function of (seed0, scale),
and the defaults were chosen once and then frozen, so a green run is
reproducible rather than a lucky draw.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np

from .fundamental import (
    build_covariance,
    gershgorin_margin,
    martingale_orthogonality_stat,
    recursive_inverse,
)
from .girsanov import girsanov_log_weight, parse_drift, weight_mean_check
from .graphs import LocallyFiniteGraph, integer_line, path_graph
from .kernels import QuadratureSpec, fbm_spec, isometry_residual
from .paths import (
    TimeGrid,
    discretize_kernel,
    drift_q_transform,
    fundamental_transform,
    sample_bm,
    volterra_paths,
)
from .systems import (
    clipped_terminal,
    conditional_independence_test,
    driftless_system,
    entropy_estimate,
    reweighted_expectation,
    simulate_system_euler,
    system_log_weights,
    truncation_convergence,
    uniform_drifts,
)

QCONST_03 = 1.21713822346654  # constant-drift pre-image scale at H = 0.3


@dataclass
class CriterionResult:
    key: str
    title: str
    passed: bool
    runtime_seconds: float
    budget_seconds: float
    details: Dict

    @property
    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.key}: {self.title} ({self.runtime_seconds:.1f}s of {self.budget_seconds:.0f}s budget)"


def _single_vertex() -> LocallyFiniteGraph:
    return LocallyFiniteGraph(0, lambda v: (), frozenset({0}), "single")


def _paths(base: int, scale: float, floor: int = 1000) -> int:
    return max(floor, int(round(base * scale)))


def _ks_uniform(pvals: np.ndarray) -> float:
    ps = np.sort(np.asarray(pvals, dtype=float))
    n = len(ps)
    hi = np.arange(1, n + 1) / n
    return float(max(np.max(np.abs(hi - ps)), np.max(np.abs(hi - 1.0 / n - ps))))


def criterion_1(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Kernel isometry against the closed-form covariance on a probe grid."""
    t0 = time.time()
    worst = 0.0
    per_h = {}
    nodes = np.linspace(1.0 / 8, 1.0, 8)
    quad = QuadratureSpec(panels=64)
    for h in (0.3, 0.5, 0.7):
        spec = fbm_spec(h)
        res = max(isometry_residual(spec, t, s, quad)
                  for t in nodes for s in nodes if s <= t)
        per_h[str(h)] = res
        worst = max(worst, res)
    rt = time.time() - t0
    passed = worst < 1e-4 and rt < 10
    return CriterionResult("criterion-1", "kernel isometry < 1e-4 on 8x8 probe",
                           passed, rt, 10,
                           {"worst_residual": worst, "per_hurst": per_h,
                            "tolerance": 1e-4})


def criterion_2(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Recursive Toeplitz inverse, positivity, Gershgorin, MC orthogonality."""
    t0 = time.time()
    details: Dict = {}
    worst_inv = 0.0
    min_lam = np.inf
    for h in (0.1, 0.3, 0.5, 0.7, 0.9):
        state, lams = recursive_inverse(h, 64)
        dense = np.linalg.inv(build_covariance(h, 64).matrix)
        worst_inv = max(worst_inv, float(np.max(np.abs(state.inv - dense))))
        min_lam = min(min_lam, min(lams))
    details["worst_inverse_gap"] = worst_inv
    details["min_schur_complement"] = float(min_lam)
    margins = [gershgorin_margin(0.3, n) for n in range(2, 65)]
    details["min_gershgorin_margin_h03"] = float(min(margins))
    m = _paths(100000, scale)
    worst_z = 0.0
    for h in (0.3, 0.5, 0.7):
        for n in (2, 4, 8):
            stat, se = martingale_orthogonality_stat(h, n, m, seed=101 + seed0)
            worst_z = max(worst_z, abs(stat) / se)
    details["orthogonality_paths"] = m
    details["worst_orthogonality_z"] = worst_z
    rt = time.time() - t0
    passed = (worst_inv < 1e-8 and min_lam > 0
              and min(margins) >= 0.5 and worst_z < 3.0 and rt < 60)
    return CriterionResult("criterion-2", "discrete fundamental martingale",
                           passed, rt, 60, details)


def criterion_3(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Round trip Z <-> W* and Brownianness of W* at the covariance level."""
    t0 = time.time()
    grid = TimeGrid(1.0, 32)
    pairs = [(8, 8), (16, 16), (32, 32), (8, 16), (16, 32), (8, 32)]
    m = _paths(100000, scale)
    details: Dict = {}
    worst_rt = 0.0
    worst_z = 0.0
    for h in (0.3, 0.7):
        dk = discretize_kernel(fbm_spec(h), grid)
        bm = sample_bm(grid, 256, seed=103 + seed0)
        back = fundamental_transform(dk, volterra_paths(dk, bm))
        worst_rt = max(worst_rt, float(np.max(np.abs(back.values - bm.values))))
        z = volterra_paths(dk, sample_bm(grid, m, seed=104 + seed0))
        wstar = np.cumsum(fundamental_transform(dk, z).steps, axis=1)
        for i, j in pairs:
            prod = wstar[:, i - 1] * wstar[:, j - 1]
            target = min(grid.nodes[i], grid.nodes[j])
            se = float(np.std(prod, ddof=1) / np.sqrt(m))
            worst_z = max(worst_z, abs(float(np.mean(prod)) - target) / se)
    details.update(roundtrip_max_gap=worst_rt, covariance_paths=m,
                   worst_covariance_z=worst_z, probe_pairs=pairs)
    rt = time.time() - t0
    passed = worst_rt < 1e-10 and worst_z < 3.0 and rt < 60
    return CriterionResult("criterion-3", "fundamental transform round trip + Brownian covariance",
                           passed, rt, 60, details)


def criterion_4(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Drift transform: exact grid reconstruction and the closed-form check."""
    t0 = time.time()
    grid = TimeGrid(1.0, 64)
    dk = discretize_kernel(fbm_spec(0.3), grid)
    B = grid.nodes[1:]
    res = drift_q_transform(dk, B)
    recon = dk.matrix @ (res.q * grid.dt)
    recon_gap = float(np.max(np.abs(recon - B)))
    mids = grid.midpoints
    mask = mids >= 0.2
    form_gap = float(np.max(np.abs(res.q[mask] - QCONST_03 * mids[mask] ** 0.2)))
    cc = res.crosscheck
    rt = time.time() - t0
    passed = (recon_gap < 1e-12 and form_gap < 1e-3
              and cc is not None and cc["max_interior_gap"] < 1e-3 and rt < 5)
    return CriterionResult("criterion-4", "drift transform reconstruction + closed form",
                           passed, rt, 5,
                           {"reconstruction_gap": recon_gap,
                            "power_form_gap": form_gap,
                            "fitted_constant": cc["fitted_constant"],
                            "crosscheck_gap": cc["max_interior_gap"],
                            "tolerance": 1e-3})


def criterion_5(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Martingale property of the Girsanov weight at five time indices."""
    t0 = time.time()
    grid = TimeGrid(1.0, 32)
    m = _paths(100000, scale)
    indices = [4, 11, 18, 25, 32]
    worst_z = 0.0
    per_case = {}
    for h in (0.3, 0.5, 0.7):
        dk = discretize_kernel(fbm_spec(h), grid)
        z = volterra_paths(dk, sample_bm(grid, m, seed=105 + seed0))
        for spec in ("const:0.7", "tanh:1.0:0.5"):
            res = girsanov_log_weight(dk, z, parse_drift(spec))
            checks = weight_mean_check(res, grid.dt, indices)
            zmax = max(abs(c.mean - 1.0) / c.stderr for c in checks)
            per_case[f"H={h} {spec}"] = zmax
            worst_z = max(worst_z, zmax)
    rt = time.time() - t0
    passed = worst_z < 3.0 and rt < 120
    return CriterionResult("criterion-5", "mean Girsanov weight = 1 at 5 indices",
                           passed, rt, 120,
                           {"paths": m, "indices": indices,
                            "worst_z": worst_z, "per_case": per_case})


def criterion_6(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Reweighted driftless vs direct Euler moments, two graphs."""
    t0 = time.time()
    grid = TimeGrid(1.0, 32)
    m = _paths(100000, scale)
    configs = [
        (_single_vertex(), "tanh:0.8:0.7", 0.3, 21),
        (_single_vertex(), "linear:0.2:-0.6", 0.7, 22),
        (path_graph(5), "neighbor:0.2:-0.5:0.3", 0.3, 23),
        (path_graph(5), "neighbor:0.1:-0.3:0.25", 0.5, 24),
    ]
    worst_z = 0.0
    per_case = {}
    for graph, spec, h, seed in configs:
        drifts = uniform_drifts(parse_drift(spec))
        direct = simulate_system_euler(graph, drifts, h, grid, m, seed + seed0)
        star = driftless_system(graph, h, grid, m, seed + seed0 + 1000)
        weights = system_log_weights(graph, drifts, star)
        zmax = 0.0
        for v in graph.vertices():
            for phi_d, phi_s in ((direct.terminal(v), star.terminal(v)),
                                 (direct.terminal(v) ** 2, star.terminal(v) ** 2)):
                e1 = float(np.mean(phi_d))
                s1 = float(np.std(phi_d, ddof=1) / np.sqrt(m))
                e2, s2 = reweighted_expectation(weights, phi_s)
                zmax = max(zmax, abs(e1 - e2) / float(np.hypot(s1, s2)))
        per_case[f"{graph.name} {spec} H={h}"] = zmax
        worst_z = max(worst_z, zmax)
    rt = time.time() - t0
    passed = worst_z < 3.0 and rt < 300
    return CriterionResult("criterion-6", "weak-solution equivalence (reweighting vs Euler)",
                           passed, rt, 300,
                           {"paths": m, "worst_z": worst_z, "per_case": per_case})


def criterion_7(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Conditional-independence contract on the 5-path graph.

    Full scale: 50 drifted repetitions (rejection rate at level 0.05 must
    stay within 0.05 + 3 binomial sigma), 200 zero-drift repetitions
    (KS distance of the p-values from uniform < 0.1), and the too-small
    separator power probe, reported without assertion. Reduced scale runs
    single-shot smoke versions of each.
    """
    t0 = time.time()
    grid = TimeGrid(1.0, 32)
    p5 = path_graph(5)
    set_a, set_b, sep = (0,), (4,), (1, 2)
    drift = parse_drift("neighbor:0.2:-0.5:0.4")
    details: Dict = {}
    if scale >= 1.0:
        rejections = 0
        for rep in range(50):
            sysd = driftless_system(p5, 0.3, grid, 6000, seed=seed0 + 2000 + rep)
            w = system_log_weights(p5, uniform_drifts(drift), sysd)
            r = conditional_independence_test(sysd, w.total, set_a, set_b, sep,
                                              perms=500, seed=seed0 + 700 + rep)
            rejections += r.p_value <= 0.05
        limit = 0.05 + 3.0 * np.sqrt(0.05 * 0.95 / 50)
        details["drifted_rejections"] = rejections
        details["drifted_reps"] = 50
        details["rate_limit"] = float(limit)
        drifted_ok = rejections / 50 <= limit
        pvals = []
        for rep in range(200):
            sys0 = driftless_system(p5, 0.5, grid, 2000, seed=seed0 + 4000 + rep)
            r = conditional_independence_test(sys0, np.zeros(sys0.m), set_a, set_b, sep,
                                              perms=500, seed=seed0 + 4500 + rep)
            pvals.append(r.p_value)
        ks = _ks_uniform(np.array(pvals))
        details["null_reps"] = 200
        details["null_ks"] = ks
        null_ok = ks < 0.1
        power_hits = 0
        for rep in range(10):
            sysd = driftless_system(p5, 0.3, grid, 6000, seed=seed0 + 2000 + rep)
            w = system_log_weights(p5, uniform_drifts(drift), sysd)
            r = conditional_independence_test(sysd, w.total, set_a, set_b, (1,),
                                              perms=500, seed=seed0 + 700 + rep)
            power_hits += r.p_value <= 0.05
        details["small_separator_rejections_of_10"] = power_hits
        passed_stat = drifted_ok and null_ok
    else:
        # the rejection resample keeps roughly m / max-weight rows, and the
        # separator design needs more rows than columns, so the drifted
        # smoke run cannot shrink below a few thousand paths
        sysd = driftless_system(p5, 0.3, grid, max(4000, _paths(6000, scale)), seed=seed0 + 2000)
        w = system_log_weights(p5, uniform_drifts(drift), sysd)
        r = conditional_independence_test(sysd, w.total, set_a, set_b, sep,
                                          perms=500, seed=seed0 + 700)
        details["drifted_p_value"] = r.p_value
        null_rej = 0
        for rep in range(10):
            sys0 = driftless_system(p5, 0.5, grid, _paths(2000, scale), seed=seed0 + 1000 + rep)
            rn = conditional_independence_test(sys0, np.zeros(sys0.m), set_a, set_b, sep,
                                               perms=500, seed=seed0 + 500 + rep)
            null_rej += rn.p_value <= 0.05
        details["null_rejections_of_10"] = null_rej
        details["smoke_mode"] = True
        passed_stat = r.p_value > 0.01 and null_rej <= 3
    rt = time.time() - t0
    passed = passed_stat and rt < 600
    return CriterionResult("criterion-7", "2-MRF conditional-independence contract",
                           passed, rt, 600, details)


def criterion_8(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Truncation convergence on the integer line under shared noise."""
    t0 = time.time()
    grid = TimeGrid(1.0, 32)
    m = _paths(30000, scale)
    drifts = uniform_drifts(parse_drift("neighbor:0.3:-0.4:0.35"))
    sweep = truncation_convergence(integer_line(), drifts, clipped_terminal(0), (0,),
                                   [4, 5, 6, 7], hurst=0.3, grid=grid, m=m, seed=77 + seed0)
    late = sweep.diffs[-1]
    early = sweep.diffs[0]
    comb = float(np.hypot(sweep.diff_stderrs[-1], sweep.diff_stderrs[0]))
    rt = time.time() - t0
    passed = late < early + 3.0 * comb and rt < 300
    return CriterionResult("criterion-8", "truncation-sweep successive differences shrink",
                           passed, rt, 300,
                           {"paths": m,
                            "estimates": {str(e.level): e.estimate for e in sweep.entries},
                            "early_diff": early, "late_diff": late,
                            "combined_3se": 3.0 * comb})


def criterion_9(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Entropy estimates against the C_t |A| bound and the Brownian closed form."""
    t0 = time.time()
    grid = TimeGrid(1.0, 32)
    m = _paths(40000, scale)
    p5 = path_graph(5)
    drifts = uniform_drifts(parse_drift("neighbor:0.2:-0.4:0.3"))
    sysd = driftless_system(p5, 0.3, grid, m, seed=109 + seed0)
    weights = system_log_weights(p5, drifts, sysd)
    details: Dict = {"paths": m, "regions": {}}
    bound_ok = True
    for region in ((2,), (1, 2), (1, 2, 3)):
        rep = entropy_estimate(sysd, weights, region, p5, drifts)
        details["regions"][",".join(map(str, region))] = {
            "h_hat": rep.h_hat, "stderr": rep.stderr, "bound": rep.bound}
        bound_ok = bound_ok and rep.passed
    single = _single_vertex()
    theta = 0.7
    sysb = driftless_system(single, 0.5, grid, m, seed=110 + seed0)
    wb = system_log_weights(single, uniform_drifts(parse_drift(f"const:{theta}")), sysb)
    repb = entropy_estimate(sysb, wb, (0,), single,
                            uniform_drifts(parse_drift(f"const:{theta}")))
    target = theta ** 2 * grid.horizon / 2
    z = abs(repb.h_hat - target) / repb.stderr
    details["brownian"] = {"h_hat": repb.h_hat, "target": target, "z": z,
                           "bound": repb.bound}
    rt = time.time() - t0
    passed = bound_ok and repb.passed and z < 3.0 and rt < 120
    return CriterionResult("criterion-9", "entropy bound and Brownian closed form",
                           passed, rt, 120, details)


def criterion_10(scale: float = 1.0, seed0: int = 0) -> CriterionResult:
    """Selftest determinism: repeated runs and worker counts agree byte for byte.

    Runs the CLI selftest in subprocesses on a fast criteria subset at a
    small fixed paths scale (determinism does not depend on scale, and the
    subset keeps the subprocess cost bounded). Two runs with the same seed
    must produce identical stdout and identical JSON reports once the
    wall-clock line is dropped, a third run with --workers 3 must match
    both, and a run with a shifted seed must change the results section,
    which rules out a report that is constant rather than reproducible.
    """
    import json
    import os
    import subprocess
    import sys
    import tempfile

    t0 = time.time()
    inner = "criterion-2,criterion-4,criterion-5"

    def run_one(tmp: str, tag: str, seed: int, workers: int):
        out = os.path.join(tmp, f"{tag}.json")
        proc = subprocess.run(
            [sys.executable, "-m", "fracsde.cli", "selftest",
             "--paths-scale", "0.05", "--seed", str(seed),
             "--criteria", inner, "--workers", str(workers), "--out", out],
            capture_output=True, check=False)
        with open(out, "rb") as fh:
            raw = fh.read()
        body = b"".join(line for line in raw.splitlines(keepends=True)
                        if b'"runtime_seconds"' not in line)
        return proc.returncode, proc.stdout, body, json.loads(raw)["results"]

    with tempfile.TemporaryDirectory() as tmp:
        code_a, out_a, body_a, res_a = run_one(tmp, "a", seed0, 1)
        code_b, out_b, body_b, _ = run_one(tmp, "b", seed0, 1)
        code_c, out_c, body_c, _ = run_one(tmp, "c", seed0, 3)
        _, _, _, res_d = run_one(tmp, "d", seed0 + 1, 1)
    repeat_ok = (code_a, out_a, body_a) == (code_b, out_b, body_b)
    workers_ok = (code_a, out_a, body_a) == (code_c, out_c, body_c)
    reseed_differs = res_a != res_d
    rt = time.time() - t0
    passed = repeat_ok and workers_ok and reseed_differs and code_a != 1
    return CriterionResult("criterion-10", "selftest report determinism",
                           passed, rt, 300,
                           {"inner_criteria": inner, "inner_exit_code": code_a,
                            "repeat_identical": repeat_ok,
                            "workers_invariant": workers_ok,
                            "reseed_results_differ": reseed_differs})


CRITERIA: Dict[str, Callable[[float, int], CriterionResult]] = {
    "criterion-1": criterion_1,
    "criterion-2": criterion_2,
    "criterion-3": criterion_3,
    "criterion-4": criterion_4,
    "criterion-5": criterion_5,
    "criterion-6": criterion_6,
    "criterion-7": criterion_7,
    "criterion-8": criterion_8,
    "criterion-9": criterion_9,
    "criterion-10": criterion_10,
}


def warm_kernels() -> None:
    """Compile the accelerated kernels on a tiny problem.

    First use of the point-evaluation and counter-generator routines pays a
    one-time compilation cost; calling this before any timed region keeps
    that cost out of every runtime budget.
    """
    grid = TimeGrid(1.0, 4)
    dk = discretize_kernel(fbm_spec(0.3), grid)
    volterra_paths(dk, sample_bm(grid, 2, seed=0, lane_name="noise/warm"))
    isometry_residual(fbm_spec(0.7), 0.5, 0.25, QuadratureSpec(panels=8, abs_tol=1.0))


def run_criteria(scale: float = 1.0, keys: Optional[List[str]] = None,
                 workers: int = 1, seed0: int = 0) -> List[CriterionResult]:
    """Run the numbered criteria and return results in numeric order.

    The ordering never depends on the worker count; each criterion owns its
    seeds and lanes, so concurrency cannot change any number in any result.
    """
    chosen = keys or sorted(CRITERIA, key=lambda k: int(k.rsplit("-", 1)[1]))
    bad = [k for k in chosen if k not in CRITERIA]
    if bad:
        raise ValueError(f"unknown criteria {bad!r}")
    warm_kernels()
    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = {k: pool.submit(CRITERIA[k], scale, seed0) for k in chosen}
            return [futures[k].result() for k in chosen]
    return [CRITERIA[k](scale, seed0) for k in chosen]
