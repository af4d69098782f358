"""Reference values for the normal primitives and the far-tail moments.

mpmath at 50 digits; printed numbers are frozen into tests/rating_test.cpp.
"""
import mpmath as mp

mp.mp.dps = 50


def mills(z):
    return mp.erfc(z / mp.sqrt(2)) / 2 / mp.npdf(z)


def win_moments(x):
    v = mp.npdf(x) / mp.ncdf(x)
    return v, v * (v + x)


if __name__ == "__main__":
    print("log_cdf(-40)", mp.log(mp.ncdf(-40)))
    print("log_cdf(-5)", mp.log(mp.ncdf(-5)))
    for z in (-3, 0, 10, 40):
        print("mills(%s)" % z, mills(mp.mpf(z)))
    print("quantile(0.975)", mp.sqrt(2) * mp.erfinv(mp.mpf("0.95")))
    print("quantile(1e-10)", -mp.sqrt(2) * mp.erfinv(1 - 2 * mp.mpf("1e-10")))
    for x in (-50, -30, 30):
        print("win x=%s" % x, win_moments(mp.mpf(x)))
