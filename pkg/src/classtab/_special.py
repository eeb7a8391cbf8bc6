"""Log-gamma via the Lanczos approximation (g=7, 9 terms)."""

import math

_G = 7.0
_COEF = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def lgamma(x):
    """Natural log of |Gamma(x)| for real x not a non-positive integer."""
    x = float(x)
    if x <= 0.0 and x == math.floor(x):
        raise ValueError(f"Gamma has a pole at {x}")
    if x < 0.5:
        # reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x)
        return math.log(math.pi / abs(math.sin(math.pi * x))) - lgamma(1.0 - x)
    x -= 1.0
    acc = _COEF[0]
    for i, c in enumerate(_COEF[1:], start=1):
        acc += c / (x + i)
    t = x + _G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(acc)


def gamma(x):
    x = float(x)
    sign = 1.0
    if x < 0.0 and math.floor(x) % 2 == 1:
        sign = -1.0
    return sign * math.exp(lgamma(x))
