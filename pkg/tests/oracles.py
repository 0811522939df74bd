"""Independent reference computations used to check the package.

Nothing here imports the code under test except plain data containers.
"""

import math

import numpy as np


def conv1d_loops(x, filters, bias):
    """Triple-loop valid convolution."""
    length, depth = x.shape
    n_filters, width, _ = filters.shape
    out = np.zeros((length - width + 1, n_filters))
    for t in range(length - width + 1):
        for j in range(n_filters):
            acc = bias[j]
            for a in range(width):
                for d in range(depth):
                    acc += x[t + a, d] * filters[j, a, d]
            out[t, j] = acc
    return out


def max_pool_loops(x):
    out = []
    for j in range(x.shape[1]):
        best = x[0, j]
        for t in range(1, x.shape[0]):
            if x[t, j] > best:
                best = x[t, j]
        out.append(best)
    return np.array(out)


def central_differences(f, arrays, h=1e-5):
    """Numerical gradient of scalar ``f(arrays)`` w.r.t. every entry of every array."""
    grads = []
    for k, a in enumerate(arrays):
        g = np.zeros_like(a)
        for idx in np.ndindex(a.shape):
            plus = [b.copy() for b in arrays]
            minus = [b.copy() for b in arrays]
            plus[k][idx] += h
            minus[k][idx] -= h
            g[idx] = (f(plus) - f(minus)) / (2 * h)
        grads.append(g)
    return grads


def relative_error(analytic, numeric, floor=1e-8):
    analytic, numeric = np.asarray(analytic), np.asarray(numeric)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return float(np.max(np.abs(analytic - numeric) / denom)) if analytic.size else 0.0


def adam_reference(theta, grads_seq, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook Adam over a sequence of gradients for a single array."""
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    for t, g in enumerate(grads_seq, start=1):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g ** 2
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + eps)
    return theta


# ------------------------------------------------------------------ rule tracer

TRACE_CONSTANTS = dict(window=3, neg=-0.74, caps=0.733, excl=0.292, excl_cap=4,
                       before=0.5, after=1.5, alpha=15.0, decay=(1.0, 0.95, 0.9))


def trace_valence(words, caps, lexicon, negators, boosters, c=TRACE_CONSTANTS,
                  rules=("boost", "caps", "neg", "but", "excl")):
    """Score a token list by spelling out each rule step.

    Returns (score, steps) where steps is a list of human-readable strings.
    """
    steps = []
    cased = [flag for w, flag in zip(words, caps) if any(ch.isalpha() for ch in w)]
    emphasis = "caps" in rules and any(cased) and not all(cased)
    first_but = words.index("but") if ("but" in rules and "but" in words) else -1
    adjusted = []
    for i, w in enumerate(words):
        if w in boosters or w not in lexicon:
            adjusted.append(0.0)
            continue
        val = lexicon[w]
        positive = val > 0
        steps.append(f"{w}: lexicon {val}")
        if "boost" in rules:
            for back in (1, 2, 3):
                if i - back < 0:
                    break
                prev = words[i - back]
                if prev in boosters:
                    amount = boosters[prev] if positive else -boosters[prev]
                    if emphasis and caps[i - back]:
                        amount = amount + (c["caps"] if positive else -c["caps"])
                    val = val + amount * c["decay"][back - 1]
                    steps.append(f"  booster {prev} at -{back} -> {val}")
        if emphasis and caps[i]:
            val = val + (c["caps"] if positive else -c["caps"])
            steps.append(f"  caps -> {val}")
        if "neg" in rules:
            lo = max(0, i - c["window"])
            if any(x in negators for x in words[lo:i]):
                val = val * c["neg"]
                steps.append(f"  negated -> {val}")
        if first_but >= 0 and i != first_but:
            val = val * (c["before"] if i < first_but else c["after"])
            steps.append(f"  but-weight -> {val}")
        adjusted.append(val)
    s = 0.0
    for v in adjusted:
        s += v
    if "excl" in rules and s != 0.0:
        bonus = min(words.count("!"), c["excl_cap"]) * c["excl"]
        s = s + bonus if s > 0 else s - bonus
        steps.append(f"exclamation bonus {bonus} -> {s}")
    score = s / math.sqrt(s * s + c["alpha"])
    steps.append(f"normalised {score}")
    return max(-1.0, min(1.0, score)), steps
