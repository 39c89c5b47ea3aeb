"""Hard-negative triplet ranking loss plus attention-diversity regularization.

The triplet term pulls each matched image/sentence pair together while
pushing away only the single hardest mismatched item in the batch, in both
query directions. The diversity term penalizes ||AA^T - I||_F^2 of each
attention matrix, which is zero only for mutually orthogonal one-hot rows,
so it pushes heads toward sparse, distinct focus regions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractError, ShapeError
from .tensor import (
    Tensor,
    add,
    frobenius_sq,
    matmul,
    mul,
    normalize_rows,
    relu,
    sub,
    take_entries,
    tensor,
    transpose,
)


@dataclass
class LossConfig:
    margin: float = 0.2
    diversity_weight: float = 0.1
    diversity_reduction: str = "mean"  # "mean" keeps the weight batch-size independent

    def __post_init__(self):
        if self.margin < 0 or self.diversity_weight < 0:
            raise ContractError("margin and diversity weight must be nonnegative")
        if self.diversity_reduction not in ("mean", "sum"):
            raise ContractError(f"unknown diversity reduction {self.diversity_reduction!r}")


@dataclass
class BatchEmbeddings:
    """Paired joint vectors and the attention weights that produced them.

    Index n pairs image n with sentence n; attention matrices ride along
    because the diversity term and the logs need them.
    """

    image_vectors: Tensor            # (N, d_joint)
    text_vectors: Tensor             # (N, d_joint)
    image_attention: list[Tensor]    # N matrices (r, l)
    text_attention: list[Tensor]     # N matrices (r, n_tokens)

    def __post_init__(self):
        n = self.image_vectors.shape[0]
        if not (n == self.text_vectors.shape[0] == len(self.image_attention) == len(self.text_attention)):
            raise ContractError("batch components disagree on item count")

    @property
    def count(self):
        return self.image_vectors.shape[0]


def similarity_matrix(image_vectors, text_vectors):
    """S[n][m] = cos(image n, sentence m); the diagonal holds positive pairs."""
    return matmul(normalize_rows(image_vectors), transpose(normalize_rows(text_vectors)))


def triplet_hard_negative_loss(similarities, margin):
    """Mean hinge on the hardest negative per anchor, both directions.

    For each anchor n the single off-diagonal maximum of its row (mismatched
    sentences) and of its column (mismatched images) is penalized:
    [margin - S[n][n] + max]_+. Ties break toward the lowest index, and the
    gradient flows through exactly the selected entries.
    """
    n_items = similarities.shape[0]
    if similarities.ndim != 2 or similarities.shape[1] != n_items:
        raise ShapeError(f"similarity matrix must be square, got {similarities.shape}")
    if n_items < 2:
        raise ContractError(f"hard-negative loss needs at least 2 items, got {n_items}")

    masked = np.array(similarities.data, dtype=np.float64)
    np.fill_diagonal(masked, -np.inf)
    hardest_text = masked.argmax(axis=1)   # per image row
    hardest_image = masked.argmax(axis=0)  # per sentence column

    idx = np.arange(n_items)
    positives = take_entries(similarities, idx, idx)
    text_neg = take_entries(similarities, idx, hardest_text)
    image_neg = take_entries(similarities, hardest_image, idx)

    hinge_text = relu(add(sub(text_neg, positives), margin))
    hinge_image = relu(add(sub(image_neg, positives), margin))
    return mul(add(hinge_text.sum(), hinge_image.sum()), 1.0 / n_items)


def diversity_loss(image_weights, text_weights, heads=None):
    """||MM^T - I||_F^2 + ||QQ^T - I||_F^2 for one item's attention pair.

    Zero exactly when both Gram matrices equal the identity; for
    row-stochastic weights that forces distinct one-hot rows.
    """
    if image_weights.shape[0] != text_weights.shape[0]:
        raise ShapeError(
            f"attention matrices disagree on head count: {image_weights.shape[0]} vs {text_weights.shape[0]}")
    if heads is not None and image_weights.shape[0] != heads:
        raise ShapeError(f"expected {heads} attention rows, got {image_weights.shape[0]}")

    def off_identity(a):
        gram = matmul(a, transpose(a))
        eye = tensor(np.eye(a.shape[0]), dtype=a.dtype)
        return frobenius_sq(sub(gram, eye))

    return add(off_identity(image_weights), off_identity(text_weights))


def total_loss(batch, cfg):
    """Triplet term plus weighted diversity term; returns (loss, breakdown).

    The diversity term is reduced over batch items by mean (default) or sum,
    per config. The breakdown dict carries plain floats for logging.
    """
    sims = similarity_matrix(batch.image_vectors, batch.text_vectors)
    triplet = triplet_hard_negative_loss(sims, cfg.margin)

    div_terms = [diversity_loss(m, q) for m, q in zip(batch.image_attention, batch.text_attention)]
    diversity = div_terms[0]
    for term in div_terms[1:]:
        diversity = add(diversity, term)
    if cfg.diversity_reduction == "mean":
        diversity = mul(diversity, 1.0 / batch.count)

    loss = add(triplet, mul(diversity, cfg.diversity_weight))
    breakdown = {
        "triplet": float(triplet.data),
        "diversity": float(diversity.data),
        "total": float(loss.data),
    }
    return loss, breakdown
