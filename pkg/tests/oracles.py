"""Independent re-implementations used as test oracles.

Everything here is deliberately naive (explicit loops, textbook formulas)
and shares no code with the package, so it stays a meaningful check.
"""

import numpy as np


def matmul_oracle(a, b):
    """Triple-loop matrix multiply."""
    n, k = a.shape
    k2, m = b.shape
    assert k == k2
    out = np.zeros((n, m))
    for i in range(n):
        for j in range(m):
            acc = 0.0
            for t in range(k):
                acc += a[i, t] * b[t, j]
            out[i, j] = acc
    return out


def softmax_attention_oracle(q, k, v, heads=1):
    """Row-by-row softmax(q k^T / sqrt(d)) v, one head slice at a time."""
    n_q, c = q.shape
    d = c // heads
    out = np.zeros((n_q, c))
    for h in range(heads):
        qs = q[:, h * d:(h + 1) * d]
        ks = k[:, h * d:(h + 1) * d]
        vs = v[:, h * d:(h + 1) * d]
        for i in range(n_q):
            logits = np.array([qs[i] @ ks[j] / np.sqrt(d) for j in range(ks.shape[0])])
            weights = np.exp(logits - logits.max())
            weights = weights / weights.sum()
            out[i, h * d:(h + 1) * d] = weights @ vs
    return out


def two_pass_variance_oracle(features):
    """Mean first, then mean of squared deviations, per channel."""
    n, c = features.shape
    out = np.zeros(c)
    for ch in range(c):
        mu = 0.0
        for i in range(n):
            mu += features[i, ch]
        mu /= n
        acc = 0.0
        for i in range(n):
            acc += (features[i, ch] - mu) ** 2
        out[ch] = acc / n
    return out


def welford_variance_oracle(features):
    """Streaming (Welford) population variance per channel."""
    n, c = features.shape
    mean = np.zeros(c)
    m2 = np.zeros(c)
    for i in range(n):
        delta = features[i] - mean
        mean += delta / (i + 1)
        m2 += delta * (features[i] - mean)
    return m2 / n


def low_variance_selection_oracle(variances, k):
    """Sort (variance, index) pairs and take the first k indices."""
    order = sorted(range(len(variances)), key=lambda i: (variances[i], i))
    return sorted(order[:k])


def high_variance_selection_oracle(variances, k):
    order = sorted(range(len(variances)), key=lambda i: (-variances[i], i))
    return sorted(order[:k])


def conv3x3_oracle(image, kernel):
    """Direct 3x3 convolution with replicated borders (correlation form
    mirrored to match convolution)."""
    h, w = image.shape
    padded = np.pad(image, 1, mode="edge")
    flipped = kernel[::-1, ::-1]
    out = np.zeros((h, w))
    for i in range(h):
        for j in range(w):
            out[i, j] = (padded[i:i + 3, j:j + 3] * flipped).sum()
    return out


def patch_embed_oracle(pixels, patch_size, w):
    """Loop-based patchify + projection."""
    res = pixels.shape[0]
    g = res // patch_size
    tokens = np.zeros((g * g, w.shape[1]))
    idx = 0
    for gy in range(g):
        for gx in range(g):
            patch = pixels[gy * patch_size:(gy + 1) * patch_size,
                           gx * patch_size:(gx + 1) * patch_size, :]
            tokens[idx] = patch.reshape(-1) @ w
            idx += 1
    return tokens


def occupancy_oracle(features, w, b, threshold):
    """Re-evaluate the sigmoid readout row by row; indices above threshold."""
    kept = []
    for i in range(features.shape[0]):
        score = 1.0 / (1.0 + np.exp(-(features[i] @ w + b)))
        if score > threshold:
            kept.append(i)
    return kept
