"""Independent evaluation of the soft-score examples at 50 digits.

Run: python3 scoring_values.py
The printed values are frozen in tests/scoring.rs and tests/acceptance.rs.
"""
from mpmath import mp, mpf, exp, log

mp.dps = 50


def sig(x):
    return 1 / (1 + exp(-x))


def soft_order(o, alpha):
    return 1 / (1 + exp(alpha * o))


alpha, tau = mpf(4), mpf(2)
vul = soft_order(-1, alpha)
safe = soft_order(1, alpha)
two_raw = log(exp(vul) + exp(safe))
rows = {
    "soft_order_neg": vul,
    "soft_order_pos": safe,
    "single_raw": vul,
    "single_pred": sig(alpha * vul - tau),
    "two_raw": two_raw,
    "two_centered": two_raw - log(2),
    "two_pred": sig(alpha * (two_raw - log(2)) - tau),
    "zero_pred": sig(-tau),
}
for k, v in rows.items():
    print(f"{k} = {mp.nstr(v, 20)}")
