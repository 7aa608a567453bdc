"""Extended-precision reference implementations used only by the tests."""
import mpmath as mp


def ml_mp(a, b, z, digits=30):
    """E_{a,b}(z), z <= 0, to roughly ``digits`` significant digits.

    Series with enough working precision to absorb the cancellation when
    ``|z|^{1/a}`` is moderate, otherwise the optimally truncated asymptotic
    expansion in high precision; ``a == 1`` goes through 1F1.
    """
    a_, b_ = mp.mpf(a), mp.mpf(b)
    with mp.workdps(digits + 10):
        z_ = mp.mpf(z)
        if z_ == 0:
            return mp.rgamma(b_)
        if a_ == 1:
            with mp.workdps(digits + 20):
                return mp.hyp1f1(1, b_, z_) * mp.rgamma(b_)
        x = -z_
        y = x ** (1 / a_)
        if y < 150:
            with mp.workdps(int(digits + 15 + y / 2.3)):
                s = mp.mpf(0)
                k = 0
                tiny = mp.mpf(10) ** (-(digits + 15 + y / 2.3))
                while True:
                    t = z_ ** k * mp.rgamma(a_ * k + b_)
                    s += t
                    if k > 5 and abs(t) < tiny and k * a_ > y:
                        break
                    k += 1
                return +s
        s = mp.mpf(0)
        best = None
        k = 1
        while True:
            sk = b_ - a_ * k
            bound = x ** (-k) * (mp.mpf("1.13") if sk > 0 else mp.gamma(1 - sk) / mp.pi)
            if best is not None and bound > best:
                break
            best = bound
            s -= z_ ** (-k) * mp.rgamma(sk)
            if bound < mp.mpf(10) ** (-(digits + 10)) * abs(s):
                break
            k += 1
        assert best < mp.mpf(10) ** (-digits) * abs(s) or s == 0
        return s


def gamma_mp(x, digits=30):
    with mp.workdps(digits):
        return mp.gamma(mp.mpf(x))
