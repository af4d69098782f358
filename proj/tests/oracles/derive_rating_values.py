"""High-precision reference values for the rating tests.

Everything here is computed by direct numerical integration of the exact
posterior with mpmath, independent of the closed-form update code. The
printed numbers are frozen into tests/rating_test.cpp.
"""
import mpmath as mp

mp.mp.dps = 40


def pdf(x):
    return mp.npdf(x)


def cdf(x):
    return mp.ncdf(x)


def truncated_moments_by_quadrature(t, eps, kind):
    # Moments of z ~ N(0,1) restricted to the outcome region, expressed as
    # v = E[z - (-t)]... derived straight from the truncated density:
    # win:  z > eps - t     -> v = E[z], w = 1 - Var[z]
    # draw: |z + t| < eps   -> v = -E[z], w = 1 - Var[z] (sign per update rule)
    if kind == "win":
        lo, hi = eps - t, mp.inf
    else:
        lo, hi = -eps - t, eps - t
    z0 = mp.quad(pdf, [lo, hi])
    z1 = mp.quad(lambda z: z * pdf(z), [lo, hi]) / z0
    z2 = mp.quad(lambda z: (z - z1) ** 2 * pdf(z), [lo, hi]) / z0
    v = z1
    w = 1 - z2
    return v, w


def draw_margin(p, beta):
    return mp.sqrt(2) * beta * mp.sqrt(2) * mp.erfinv(2 * ((p + 1) / 2) - 1)


def posterior_by_2d_quadrature(ma, sa, mb, sb, beta, tau, p_draw, outcome):
    sa2 = sa ** 2 + tau ** 2
    sb2 = sb ** 2 + tau ** 2
    eps = draw_margin(p_draw, beta)
    s = mp.sqrt(2) * beta

    def lik(xa, xb):
        d = xa - xb
        if outcome == "first":
            return cdf((d - eps) / s)
        if outcome == "second":
            return cdf((-d - eps) / s)
        return cdf((eps - d) / s) - cdf((-eps - d) / s)

    def prior(xa, xb):
        return mp.npdf(xa, ma, mp.sqrt(sa2)) * mp.npdf(xb, mb, mp.sqrt(sb2))

    ra = [ma - 10 * mp.sqrt(sa2), ma, ma + 10 * mp.sqrt(sa2)]
    rb = [mb - 10 * mp.sqrt(sb2), mb, mb + 10 * mp.sqrt(sb2)]
    f = lambda g: mp.quad(lambda x, y: g(x, y) * prior(x, y) * lik(x, y), ra, rb)
    z = f(lambda x, y: 1)
    ea = f(lambda x, y: x) / z
    eb = f(lambda x, y: y) / z
    va = f(lambda x, y: (x - ea) ** 2) / z
    vb = f(lambda x, y: (y - eb) ** 2) / z
    return ea, mp.sqrt(va), eb, mp.sqrt(vb)


if __name__ == "__main__":
    print("win t=0 eps=0", truncated_moments_by_quadrature(0, 0, "win"))
    print("win t=1 eps=0", truncated_moments_by_quadrature(1, 0, "win"))
    print("draw t=0 eps=.5", truncated_moments_by_quadrature(0, mp.mpf("0.5"), "draw"))
    print("draw t=1.3 eps=.7", truncated_moments_by_quadrature(mp.mpf("1.3"), mp.mpf("0.7"), "draw"))
    print("win t=-3 eps=.4", truncated_moments_by_quadrature(-3, mp.mpf("0.4"), "win"))
    beta = mp.mpf(25) / 6
    print("margin 0.1", draw_margin(mp.mpf("0.1"), beta))
    print("margin 0.5 beta1", draw_margin(mp.mpf("0.5"), 1))
    s0 = mp.mpf(25) / 3
    mp.mp.dps = 20
    print("update ex1", posterior_by_2d_quadrature(25, s0, 25, s0, beta, 0, 0, "first"))
    print("update ex2", posterior_by_2d_quadrature(25, s0, 25, s0, beta, s0 / 100, mp.mpf("0.1"), "first"))
    print("update draw", posterior_by_2d_quadrature(25, s0, 25, s0, beta, s0 / 100, mp.mpf("0.1"), "draw"))
    print("update asym", posterior_by_2d_quadrature(31, 2, 24, 5, 3, mp.mpf("0.5"), mp.mpf("0.2"), "second"))
    c2 = 2 * beta ** 2 + 2 * s0 ** 2
    print("quality default", mp.sqrt(2 * beta ** 2 / c2))
    c2 = 2 * beta ** 2 + 2
    print("quality 30/20", mp.sqrt(2 * beta ** 2 / c2) * mp.exp(-100 / (2 * c2)))
