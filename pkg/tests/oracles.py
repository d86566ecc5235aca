"""High-precision reference evaluators used to generate frozen test constants.

Run as a script to print the constant block that the unit tests quote:

    python tests/oracles.py

Everything here is deliberately independent of the library under test. Kernel
integrals are computed twice, through mpmath's adaptive Gauss-Legendre
quadrature and through a plain double-precision adaptive Simpson rule, and the
two routes must agree before a value is frozen. Integrable endpoint
singularities of the form (u - s)^(a-1) are removed analytically with the
substitution u = s + (t - s) v^(1/a), after which both integrators see a
bounded integrand.
"""

from __future__ import annotations

import mpmath as mp

mp.mp.dps = 30

HALF = mp.mpf("0.5")


# ----------------------------------------------------------------------
# Normalization constant and covariance
# ----------------------------------------------------------------------

def c_h(H):
    """Kernel normalization making the squared kernel integrate to t^(2H)."""
    H = mp.mpf(H)
    if H == HALF:
        return mp.mpf(1)
    if H > HALF:
        return mp.sqrt(H * (2 * H - 1) / mp.beta(2 - 2 * H, H - HALF))
    return mp.sqrt(2 * H / ((1 - 2 * H) * mp.beta(1 - 2 * H, H + HALF)))


def covariance(H, t, s):
    H, t, s = mp.mpf(H), mp.mpf(t), mp.mpf(s)
    return HALF * (t ** (2 * H) + s ** (2 * H) - abs(t - s) ** (2 * H))


# ----------------------------------------------------------------------
# Adaptive Simpson (double precision, plain recursion)
# ----------------------------------------------------------------------

def _simpson(f, a, b, fa, fm, fb):
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(f, a, b, tol=1e-10, depth=60):
    """Classic recursive Simpson with Richardson acceptance test."""
    m = 0.5 * (a + b)
    fa, fm, fb = f(a), f(m), f(b)
    whole = _simpson(f, a, b, fa, fm, fb)

    def rec(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = _simpson(f, a, m, fa, flm, fm)
        right = _simpson(f, m, b, fm, frm, fb)
        if depth <= 0 or abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return rec(a, m, fa, flm, fm, left, tol / 2.0, depth - 1) + rec(
            m, b, fm, frm, fb, right, tol / 2.0, depth - 1
        )

    return rec(a, b, fa, fm, fb, whole, tol, depth)


# ----------------------------------------------------------------------
# Volterra kernels
# ----------------------------------------------------------------------

def _inner_kernel_integral(H, t, s, quad):
    """Inner integral of the kernel with the endpoint singularity substituted away.

    The branches carry different integrands. Above one half it is
    (u-s)^(H-3/2) u^(H-1/2), singular factor exponent H-3/2, so
    alpha = H - 1/2. Below one half it is u^(H-3/2) (u-s)^(H-1/2),
    singular factor exponent H-1/2, so alpha = H + 1/2. In both cases
    u = s + (t-s) v^(1/alpha) absorbs the (u-s) power exactly and leaves
    the bounded factor to integrate over v in [0, 1].
    """
    H, t, s = mp.mpf(H), mp.mpf(t), mp.mpf(s)
    if H > HALF:
        alpha = H - HALF
        power = H - HALF          # the smooth factor u^(H-1/2)
    else:
        alpha = H + HALF
        power = H - mp.mpf("1.5")  # the smooth factor u^(H-3/2)
    scale = (t - s) ** alpha / alpha

    def g(v):
        u = s + (t - s) * v ** (1 / alpha)
        return u ** power

    if quad == "mp":
        return scale * mp.quad(g, [0, 1])
    return float(scale) * adaptive_simpson(lambda v: float(g(mp.mpf(v))), 0.0, 1.0)


def kernel_k(H, t, s, quad="mp"):
    """Volterra kernel for the moving-average representation of the process."""
    H, t, s = mp.mpf(H), mp.mpf(t), mp.mpf(s)
    if s >= t:
        return mp.mpf(0)
    if H == HALF:
        return mp.mpf(1)
    inner = _inner_kernel_integral(H, t, s, quad)
    if H > HALF:
        return c_h(H) * s ** (HALF - H) * inner
    lead = (t * (t - s) / s) ** (H - HALF)
    return c_h(H) * (lead - (H - HALF) * s ** (HALF - H) * inner)


def kernel_l(H, t, s, quad="mp"):
    """Companion kernel, evaluated exactly as displayed (branch by branch)."""
    H, t, s = mp.mpf(H), mp.mpf(t), mp.mpf(s)
    if s >= t:
        return mp.mpf(0)
    if H == HALF:
        return mp.mpf(1)
    if H > HALF:
        alpha = mp.mpf("1.5") - H      # exponent of (r - s)^(1/2 - H) plus one
        power = H - mp.mpf("1.5")
    else:
        alpha = HALF - H               # exponent of (r - s)^(-H - 1/2) plus one
        power = H - HALF
    scale = (t - s) ** alpha / alpha

    def g(v):
        r = s + (t - s) * v ** (1 / alpha)
        return r ** power

    if quad == "mp":
        inner = scale * mp.quad(g, [0, 1])
    else:
        inner = float(scale) * adaptive_simpson(lambda v: float(g(mp.mpf(v))), 0.0, 1.0)
    if H > HALF:
        return (s * (t - s) / t) ** (HALF - H) - (H - HALF) * s ** (HALF - H) * inner
    return s ** (HALF - H) * inner


def isometry_value(H, t, s):
    """int_0^(t^s) K(t,u) K(s,u) du, which must reproduce the covariance."""
    H, t, s = mp.mpf(H), mp.mpf(t), mp.mpf(s)
    lo, hi = (s, t) if s <= t else (t, s)

    def f(u):
        return kernel_k(H, t, u) * kernel_k(H, s, u)

    return mp.quad(f, [0, lo / 2, lo * mp.mpf("0.99"), lo])


# ----------------------------------------------------------------------
# Discrete-increment machinery
# ----------------------------------------------------------------------

def autocov(H, k):
    H = mp.mpf(H)
    k = mp.mpf(k)
    return HALF * (abs(k - 1) ** (2 * H) + abs(k + 1) ** (2 * H) - 2 * abs(k) ** (2 * H))


def gershgorin_margin(H, n):
    return autocov(H, 0) - mp.fsum(abs(autocov(H, k)) for k in range(1, n))


def listing_weights(H, n, e):
    """Row sums of the inverse scaled Toeplitz increment covariance.

    Deliberately the dumb route (autocovariance vector, Toeplitz matrix,
    dense inverse, all-ones row vector times the inverse) on the correctly
    signed autocovariance e^(2H) A(k), with no recursion anywhere.
    """
    H, e = mp.mpf(H), mp.mpf(e)
    a = [e ** (2 * H) * autocov(H, k) for k in range(n)]
    m = mp.matrix(n, n)
    for i in range(n):
        for j in range(n):
            m[i, j] = a[abs(i - j)]
    inv = m ** -1
    return [mp.fsum(inv[i, j] for i in range(n)) for j in range(n)]


def covariance_difference_entry(H, n, i, j):
    """E[Z_i Z_j] for unit-horizon grid increments, straight from R(t,s)."""
    t = lambda k: mp.mpf(k) / n
    return (
        covariance(H, t(i), t(j))
        - covariance(H, t(i), t(j - 1))
        - covariance(H, t(i - 1), t(j))
        + covariance(H, t(i - 1), t(j - 1))
    )


# ----------------------------------------------------------------------
# Constant-drift transform and kernel-pair constants
# ----------------------------------------------------------------------

def preimage_constant(H):
    """q with int_0^t K(t,s) q s^(1/2-H) ds = t, i.e. 1/int_0^1 K(1,s)s^(1/2-H)ds."""
    H = mp.mpf(H)
    if H > HALF:
        f1 = c_h(H) * mp.beta(2 - 2 * H, H - HALF)
    else:
        f1 = c_h(H) * (mp.mpf("1.5") - H) * mp.beta(2 - 2 * H, H + HALF)
    return 1 / f1


def display_ratio(H):
    """Scale between the displayed companion kernel and the exact inverse."""
    H = mp.mpf(H)
    return abs(mp.cos(mp.pi * H)) / (mp.pi * c_h(H))


def lgamma_probe(x):
    return mp.loggamma(mp.mpf(x))


def main():
    out = []
    add = out.append

    add("# normalization constants")
    for H in ("0.25", "0.3", "0.7", "0.75"):
        add(f"C_H[{H}] = {mp.nstr(c_h(H), 15)}")

    add("# kernel point values (mp route / simpson route)")
    for H, t, s in (("0.3", 1, "0.5"), ("0.7", 1, "0.5"), ("0.3", 1, "0.99"), ("0.3", 1, "0.01")):
        v_mp = kernel_k(H, t, mp.mpf(s))
        v_si = kernel_k(H, t, mp.mpf(s), quad="simpson")
        assert abs(float(v_mp) - float(v_si)) < 1e-8, (H, t, s, v_mp, v_si)
        add(f"K[{H},{t},{s}] = {mp.nstr(v_mp, 15)}")
    for H, t, s in (("0.3", 1, "0.5"), ("0.7", 1, "0.5")):
        v_mp = kernel_l(H, t, mp.mpf(s))
        v_si = kernel_l(H, t, mp.mpf(s), quad="simpson")
        assert abs(float(v_mp) - float(v_si)) < 1e-8, (H, t, s, v_mp, v_si)
        add(f"L[{H},{t},{s}] = {mp.nstr(v_mp, 15)}")

    add("# isometry sanity (should equal the covariance)")
    for H, t, s in (("0.3", 1, "0.5"), ("0.7", 1, "0.5"), ("0.7", 1, 1)):
        iso = isometry_value(H, t, s)
        cov = covariance(H, t, s)
        add(f"ISO[{H},{t},{s}] = {mp.nstr(iso, 15)}  R = {mp.nstr(cov, 15)}  gap = {mp.nstr(iso - cov, 3)}")

    add("# increment autocovariance and margins")
    add(f"A[0.3,1] = {mp.nstr(autocov('0.3', 1), 15)}")
    add(f"A[0.7,1] = {mp.nstr(autocov('0.7', 1), 15)}")
    add(f"GERSH[0.3,10] = {mp.nstr(gershgorin_margin('0.3', 10), 15)}")
    add(f"GERSH[0.7,10] = {mp.nstr(gershgorin_margin('0.7', 10), 15)}")

    add("# listing-style weights, H=0.3 n=5 e=0.1")
    w = listing_weights("0.3", 5, "0.1")
    add("W[0.3,5,0.1] = [" + ", ".join(mp.nstr(x, 15) for x in w) + "]")

    add("# covariance-difference entries, H=0.7 n=3 unit horizon")
    for i in range(1, 4):
        for j in range(1, i + 1):
            add(f"COVDIFF[0.7,3,{i},{j}] = {mp.nstr(covariance_difference_entry('0.7', 3, i, j), 15)}")

    add("# constant-drift transform constants")
    for H in ("0.3", "0.7"):
        add(f"QCONST[{H}] = {mp.nstr(preimage_constant(H), 15)}")
    add(f"BETA_DISPLAY[0.3] = {mp.nstr(mp.beta(mp.mpf('1.2'), mp.mpf('0.2')), 15)}")
    for H in ("0.3", "0.7"):
        add(f"DISPLAY_RATIO[{H}] = {mp.nstr(display_ratio(H), 15)}")

    add("# reconstruction identity: QCONST * int_0^1 K(1,s) s^(1/2-H) ds must be 1")
    for Hs in ("0.3", "0.7"):
        H = mp.mpf(Hs)
        f1 = mp.quad(lambda s: kernel_k(H, 1, s) * s ** (HALF - H), [0, HALF, mp.mpf("0.95"), 1])
        add(f"RECON[{Hs}] = {mp.nstr(preimage_constant(Hs) * f1, 15)}")

    add("# sonine and log-gamma probes")
    add(f"BETA[0.25,0.75] = {mp.nstr(mp.beta(mp.mpf('0.25'), mp.mpf('0.75')), 15)}")
    for x in ("0.2", "0.8", "1.5", "3.7", "10.3", "0.05"):
        add(f"LGAMMA[{x}] = {mp.nstr(lgamma_probe(x), 16)}")

    print("\n".join(out))


if __name__ == "__main__":
    main()
