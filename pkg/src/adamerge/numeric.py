# Dense kernels for the merging pipeline.
#
# Convention: float32 storage, float64 accumulation. Summation order is
# numpy's, which is fixed on a given platform, so repeated runs produce
# bit-identical results.

import numpy as np
from scipy.special import erf

DTYPE = np.float32

_SQRT2 = np.sqrt(2.0)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product with float64 accumulation, returned as float32."""
    if a.ndim != 2 or b.ndim != 2:
        raise ValueError(f"matmul expects 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul shape mismatch: {a.shape} x {b.shape}")
    return (a.astype(np.float64) @ b.astype(np.float64)).astype(DTYPE)


def row_softmax(m: np.ndarray) -> np.ndarray:
    """Softmax over each row, with per-row max subtraction for stability."""
    m64 = m.astype(np.float64)
    m64 = m64 - m64.max(axis=1, keepdims=True)
    e = np.exp(m64)
    return (e / e.sum(axis=1, keepdims=True)).astype(DTYPE)


def cosine_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise cosine similarity between rows of a and rows of b.

    Zero-norm rows yield similarity 0 against everything.
    """
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"cosine_matrix dim mismatch: {a.shape} vs {b.shape}")
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    na = np.linalg.norm(a64, axis=1)
    nb = np.linalg.norm(b64, axis=1)
    dots = a64 @ b64.T
    denom = np.outer(na, nb)
    out = np.divide(dots, denom, out=np.zeros_like(dots), where=denom > 0)
    return out.astype(DTYPE)


def layer_norm(x: np.ndarray, gamma: np.ndarray, beta: np.ndarray,
               eps: float = 1e-6) -> np.ndarray:
    """Per-row normalization to zero mean / unit variance, then affine."""
    if gamma.shape[0] != x.shape[1] or beta.shape[0] != x.shape[1]:
        raise ValueError(
            f"layer_norm param mismatch: x has {x.shape[1]} cols, "
            f"gamma {gamma.shape[0]}, beta {beta.shape[0]}")
    x64 = x.astype(np.float64)
    mu = x64.mean(axis=1, keepdims=True)
    var = x64.var(axis=1, keepdims=True)
    normed = (x64 - mu) / np.sqrt(var + eps)
    out = normed * gamma.astype(np.float64) + beta.astype(np.float64)
    return out.astype(DTYPE)


def gelu(x: np.ndarray) -> np.ndarray:
    """Exact-erf GELU (not the tanh approximation)."""
    x64 = x.astype(np.float64)
    return (0.5 * x64 * (1.0 + erf(x64 / _SQRT2))).astype(DTYPE)
