"""High-precision reference values for the statistics functions.

Everything is computed with mpmath at 50 significant digits, from the
textbook formulas, with no shared code with the Rust implementation.
Writes ../fixtures/stats_oracle.json. Run once; the output is committed.
"""

import json
import os
import random

import mpmath as mp

mp.mp.dps = 50
HERE = os.path.dirname(os.path.abspath(__file__))
OUT = os.path.join(HERE, "..", "fixtures", "stats_oracle.json")


def ztest(x1, n1, x2, n2):
    p1, p2 = mp.mpf(x1) / n1, mp.mpf(x2) / n2
    pooled = mp.mpf(x1 + x2) / (n1 + n2)
    se = mp.sqrt(pooled * (1 - pooled) * (mp.mpf(1) / n1 + mp.mpf(1) / n2))
    z = (p1 - p2) / se
    p = mp.erfc(abs(z) / mp.sqrt(2))
    return z, p


def cohen_h(p1, p2):
    return 2 * mp.asin(mp.sqrt(p1)) - 2 * mp.asin(mp.sqrt(p2))


def mean_var(xs):
    n = len(xs)
    m = mp.fsum(xs) / n
    v = mp.fsum([(x - m) ** 2 for x in xs]) / (n - 1)
    return n, m, v


def t_p(t, df):
    if t == 0:
        return mp.mpf(1)
    x = df / (df + t * t)
    return mp.betainc(df / 2, mp.mpf(1) / 2, 0, x, regularized=True)


def ttest(a, b, variant):
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    n1, m1, v1 = mean_var(a)
    n2, m2, v2 = mean_var(b)
    dfp = n1 + n2 - 2
    sp = mp.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / dfp)
    d = (m1 - m2) / sp
    if variant == "pooled":
        t = (m1 - m2) / (sp * mp.sqrt(mp.mpf(1) / n1 + mp.mpf(1) / n2))
        df = mp.mpf(dfp)
    else:
        s1, s2 = v1 / n1, v2 / n2
        t = (m1 - m2) / mp.sqrt(s1 + s2)
        df = (s1 + s2) ** 2 / (s1 ** 2 / (n1 - 1) + s2 ** 2 / (n2 - 1))
    return t, df, t_p(t, df), d


def ci95(xs):
    xs = [mp.mpf(x) for x in xs]
    n, m, v = mean_var(xs)
    half = mp.mpf("1.96") * mp.sqrt(v) / mp.sqrt(n)
    return m, m - half, m + half


def five_point(rng, n, weights):
    return [rng.choices([-1, -0.5, 0, 0.5, 1], weights=weights)[0] for _ in range(n)]


def expand(counts):
    out = []
    for c, v in zip(counts, [-1, -0.5, 0, 0.5, 1]):
        out += [v] * c
    return out


def f(x):
    return float(x)


def main():
    rng = random.Random(20240611)
    samples = {
        "hand_a": [-1, -1, 0],
        "hand_b": [0, 0, 1],
        "table_reform": expand([668, 317, 139, 0, 0]),
        "table_plaid": expand([147, 235, 103, 25, 119]),
        "small_a": five_point(rng, 30, [4, 3, 2, 1, 1]),
        "small_b": five_point(rng, 45, [1, 1, 3, 3, 2]),
        "uneven_a": five_point(rng, 7, [1, 1, 1, 1, 1]),
        "uneven_b": five_point(rng, 300, [5, 1, 1, 1, 5]),
        "pm_one": [-1, 1],
    }
    z_cases = [(1124, 7237, 629, 8346), (8, 20, 2, 20), (50, 100, 50, 100), (3, 50, 17, 60), (1, 1000, 999, 1000)]
    h_cases = [(1124 / 7237, 629 / 8346), (0.4, 0.1), (0.05, 0.95), (0.0, 1.0), (0.3, 0.3)]
    t_pairs = [("hand_a", "hand_b"), ("table_reform", "table_plaid"), ("small_a", "small_b"), ("uneven_a", "uneven_b")]

    # (party, article_type, sample) cells for baseline-relative figure data
    figure_cells = [
        ("A", "news", "small_a"),
        ("B", "news", "small_b"),
        ("A", "opinion", "uneven_a"),
        ("B", "opinion", "uneven_b"),
    ]

    out = {"samples": samples, "ztest": [], "cohen_h": [], "ttest": [], "mean_ci95": [], "figure": []}
    for c in z_cases:
        z, p = ztest(*c)
        out["ztest"].append({"args": list(c), "z": f(z), "p": f(p)})
    for p1, p2 in h_cases:
        out["cohen_h"].append({"args": [p1, p2], "h": f(cohen_h(mp.mpf(p1), mp.mpf(p2)))})
    for a, b in t_pairs:
        for variant in ("pooled", "welch"):
            t, df, p, d = ttest(samples[a], samples[b], variant)
            out["ttest"].append({"a": a, "b": b, "variant": variant, "t": f(t), "df": f(df), "p": f(p), "d": f(d)})
    for name in samples:
        m, lo, hi = ci95(samples[name])
        out["mean_ci95"].append({"sample": name, "mean": f(m), "ci_low": f(lo), "ci_high": f(hi)})

    for party, ty, name in figure_cells:
        pooled = [mp.mpf(x) for p_, t_, n_ in figure_cells if t_ == ty for x in samples[n_]]
        base = mp.fsum(pooled) / len(pooled)
        m, lo, hi = ci95(samples[name])
        out["figure"].append({
            "party": party, "article_type": ty, "sample": name, "baseline": f(base),
            "mean_minus_baseline": f(m - base), "ci_low": f(lo - base), "ci_high": f(hi - base),
        })

    with open(OUT, "w") as fh:
        json.dump(out, fh, indent=1)
        fh.write("\n")


if __name__ == "__main__":
    main()
