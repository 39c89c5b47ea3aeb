"""The ranking objective and the retrieval metric, on hand-made embeddings.

    python3 demos/03_losses_and_retrieval.py
"""

import numpy as np

from vsembed.losses import diversity_loss, similarity_matrix, triplet_hard_negative_loss
from vsembed.retrieval import evaluate_protocol, format_report_table, recall_at_k
from vsembed.tensor import backward, tensor

# --- triplet ranking loss with hard negatives ------------------------------
# Two image/sentence pairs; entry (n, m) is cos(image n, sentence m).
sims = tensor([[0.9, 0.8], [0.7, 0.95]], dtype=np.float64, requires_grad=True)
loss = triplet_hard_negative_loss(sims, margin=0.2)
print("hard-negative triplet loss:", float(loss.data))  # 0.075 by hand

backward(loss)
print("gradient flows only through positives and the selected negatives:\n", sims.grad)

# --- diversity regularization ----------------------------------------------
# Uniform attention rows are maximally redundant; one-hot rows are not.
uniform = tensor([[0.5, 0.5], [0.5, 0.5]], dtype=np.float64)
one_hot = tensor(np.eye(2), dtype=np.float64)
print("\ndiversity penalty, uniform rows:", float(diversity_loss(uniform, one_hot).data))
print("diversity penalty, one-hot rows:", float(diversity_loss(one_hot, one_hot).data))

# --- Recall@K ----------------------------------------------------------------
rng = np.random.default_rng(0)
scores = rng.normal(size=(6, 9))
truth = [[i] for i in range(6)]  # candidate i is correct for query i
for k in (1, 5):
    print(f"\nR@{k} on random scores: {recall_at_k(scores, truth, k):.1f}%")

# --- the full protocol: both directions, 5 captions per image ---------------
images = rng.normal(size=(10, 8))
images /= np.linalg.norm(images, axis=1, keepdims=True)
captions = np.repeat(images, 5, axis=0) + rng.normal(scale=0.1, size=(50, 8))
captions /= np.linalg.norm(captions, axis=1, keepdims=True)

sentence_report, image_report = evaluate_protocol(images, captions, captions_per_item=5)
print()
print(format_report_table([sentence_report, image_report]))
