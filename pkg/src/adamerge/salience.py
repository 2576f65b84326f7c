# Per-token salience as feature-affinity centrality: column sums of the
# row-softmaxed token affinity matrix, min-max normalized to [0, 1].

from dataclasses import dataclass

import numpy as np

from .numeric import matmul, row_softmax

DEGENERATE_RANGE = 1e-9


@dataclass(frozen=True)
class SalienceVector:
    raw: np.ndarray         # column sums; sums to N over the sequence
    normalized: np.ndarray  # min-max rescaled into [0, 1]

    def __len__(self) -> int:
        return len(self.raw)


def compute_salience(x: np.ndarray) -> np.ndarray:
    """Raw salience of each token: column sum of softmax(x @ x.T).

    Expects patch tokens only (CLS stripped by the caller). The result
    sums to N because each softmax row carries total mass 1.
    """
    affinity = row_softmax(matmul(x, x.T))
    return affinity.astype(np.float64).sum(axis=0)


def minmax_normalize(raw: np.ndarray) -> np.ndarray:
    """Rescale to [0, 1]. A (near-)constant vector maps to all ones.

    All-ones rather than all-zeros: zero salience would annihilate every
    weighted matching score, so the degenerate case instead falls back to
    plain cosine matching.
    """
    raw = np.asarray(raw, dtype=np.float64)
    lo = raw.min()
    hi = raw.max()
    if hi - lo < DEGENERATE_RANGE:
        return np.ones_like(raw)
    return np.clip((raw - lo) / (hi - lo), 0.0, 1.0)


def salience_of(x: np.ndarray) -> SalienceVector:
    raw = compute_salience(x)
    return SalienceVector(raw=raw, normalized=minmax_normalize(raw))
