"""Plain-Python reference computations used as test oracles."""
import math


def percentile_oracle(values, p):
    """Linear interpolation between the closest order statistics."""
    xs = sorted(values)
    h = (len(xs) - 1) * p / 100.0
    lo = math.floor(h)
    hi = min(lo + 1, len(xs) - 1)
    return xs[lo] + (h - lo) * (xs[hi] - xs[lo])


def ue_oracle(errors, U, E):
    per_user = [percentile_oracle(v, E) for _, v in sorted(errors.items())]
    return percentile_oracle(per_user, U)


def s2s_oracle(xs, ys):
    total = 0.0
    for i in range(len(xs) - 1):
        total += (xs[i + 1] - xs[i]) ** 2 + (ys[i + 1] - ys[i]) ** 2
    return math.sqrt(total / (len(xs) - 1))
