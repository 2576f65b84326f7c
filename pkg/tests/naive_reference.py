# Independent straight-line reference implementations used as oracles.
# Deliberately written with explicit loops and without importing any of
# the package's pipeline code. Arithmetic is float64 with float32
# rounding at operation boundaries (the same storage convention the
# package documents), so comparisons at 1e-5 are meaningful.

import math

import numpy as np


def ref_softmax_rows(m):
    m = np.asarray(m, dtype=np.float64)
    out = np.zeros_like(m)
    for i in range(m.shape[0]):
        mx = max(m[i])
        es = [math.exp(v - mx) for v in m[i]]
        tot = sum(es)
        out[i] = [e / tot for e in es]
    return out.astype(np.float32)


def ref_layer_norm(x, gamma, beta, eps=1e-6):
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for i in range(x.shape[0]):
        row = x[i]
        mu = sum(row) / len(row)
        var = sum((v - mu) ** 2 for v in row) / len(row)
        out[i] = [(v - mu) / math.sqrt(var + eps) * g + b
                  for v, g, b in zip(row, gamma, beta)]
    return out.astype(np.float32)


def ref_gelu(x):
    x = np.asarray(x, dtype=np.float64)
    return np.vectorize(
        lambda v: 0.5 * v * (1.0 + math.erf(v / math.sqrt(2.0))))(x).astype(np.float32)


def ref_matmul(a, b):
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    out = np.zeros((a.shape[0], b.shape[1]))
    for i in range(a.shape[0]):
        for j in range(b.shape[1]):
            acc = 0.0
            for k in range(a.shape[1]):
                acc += a[i, k] * b[k, j]
            out[i, j] = acc
    return out.astype(np.float32)


def ref_block(tokens, blk, heads):
    """Pre-norm transformer block, vectorized float64 with f32 rounding."""
    tokens = np.asarray(tokens, dtype=np.float32)
    n, d = tokens.shape
    dh = d // heads
    h = ref_layer_norm(tokens, blk.ln1_gamma, blk.ln1_beta)
    qkv = (h.astype(np.float64) @ blk.w_qkv.astype(np.float64)
           + blk.b_qkv.astype(np.float64)).astype(np.float32)
    q, k, v = qkv[:, :d], qkv[:, d:2 * d], qkv[:, 2 * d:]
    attn = np.zeros((n, d), dtype=np.float32)
    for hd in range(heads):
        sl = slice(hd * dh, (hd + 1) * dh)
        logits = (q[:, sl].astype(np.float64) @ k[:, sl].astype(np.float64).T
                  / math.sqrt(dh)).astype(np.float32)
        p = ref_softmax_rows(logits)
        attn[:, sl] = (p.astype(np.float64)
                       @ v[:, sl].astype(np.float64)).astype(np.float32)
    x = tokens + (attn.astype(np.float64) @ blk.w_proj.astype(np.float64)
                  + blk.b_proj.astype(np.float64)).astype(np.float32)
    h2 = ref_layer_norm(x, blk.ln2_gamma, blk.ln2_beta)
    inner = (h2.astype(np.float64) @ blk.w_fc1.astype(np.float64)
             + blk.b_fc1.astype(np.float64)).astype(np.float32)
    mlp = (ref_gelu(inner).astype(np.float64) @ blk.w_fc2.astype(np.float64)
           + blk.b_fc2.astype(np.float64)).astype(np.float32)
    return x + mlp


def ref_tome_step(patches, sizes, r):
    """One ToMe merge step: sequential split, plain-cosine best match,
    top-r links, size-weighted averaging. Output: surviving A then B."""
    patches = np.asarray(patches, dtype=np.float32)
    n = patches.shape[0]
    n_a = (n + 1) // 2
    xa, xb = patches[:n_a], patches[n_a:]
    n_b = n - n_a
    if n_b == 0 or r <= 0:
        return patches.copy(), list(sizes)

    # cosine scores
    cand = []  # (score, i, j)
    for i in range(n_a):
        best_j, best_s = 0, -np.inf
        ni = math.sqrt(float(np.dot(xa[i].astype(np.float64),
                                    xa[i].astype(np.float64))))
        for j in range(n_b):
            nj = math.sqrt(float(np.dot(xb[j].astype(np.float64),
                                        xb[j].astype(np.float64))))
            if ni == 0 or nj == 0:
                s = 0.0
            else:
                s = float(np.dot(xa[i].astype(np.float64),
                                 xb[j].astype(np.float64))) / (ni * nj)
            s = np.float32(s)
            if s > best_s:
                best_j, best_s = j, s
        cand.append((float(best_s), i, best_j))

    order = sorted(range(n_a), key=lambda i: (-cand[i][0], i))
    take = sorted(order[:min(r, n_a)])

    groups = {}
    for i in take:
        groups.setdefault(cand[i][2], []).append(i)

    new_b = xb.astype(np.float64).copy()
    new_sizes_b = [sizes[n_a + j] for j in range(n_b)]
    for j, sources in groups.items():
        num = sizes[n_a + j] * xb[j].astype(np.float64)
        tot = sizes[n_a + j]
        for i in sources:
            num = num + sizes[i] * xa[i].astype(np.float64)
            tot += sizes[i]
        new_b[j] = num / tot
        new_sizes_b[j] = tot

    taken = set(take)
    keep = [i for i in range(n_a) if i not in taken]
    out = np.concatenate([xa[keep],
                          new_b.astype(np.float32)], axis=0)
    out_sizes = [sizes[i] for i in keep] + new_sizes_b
    return out, out_sizes


def ref_tome_forward(cls_vec, patches, weights, r):
    """Full forward with a ToMe merge step before every block."""
    cls_vec = np.asarray(cls_vec, dtype=np.float32)
    patches = np.asarray(patches, dtype=np.float32)
    sizes = [1] * patches.shape[0]
    for blk in weights.blocks:
        patches, sizes = ref_tome_step(patches, sizes, r)
        tokens = np.concatenate([cls_vec[None, :], patches], axis=0)
        tokens = ref_block(tokens, blk, weights.dims.heads)
        cls_vec, patches = tokens[0], tokens[1:]
    final = ref_layer_norm(cls_vec[None, :], weights.final_gamma,
                           weights.final_beta)
    logits = (final.astype(np.float64) @ weights.w_head.astype(np.float64)
              + weights.b_head.astype(np.float64)).astype(np.float32)[0]
    return logits, patches
