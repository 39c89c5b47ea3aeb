"""Cross-modal Recall@K evaluation in both query directions.

Sentence retrieval ranks all candidate captions for each image query (each
image has captions_per_item correct answers); image retrieval ranks all
images for each caption query (exactly one correct answer). The fold
protocol averages Recall@K over disjoint consecutive blocks of the test
set; full-set mode evaluates everything at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ContractError
from .tensor import Tensor

RECALL_KS = (1, 5, 10)


@dataclass
class RetrievalReport:
    direction: str        # "sentence-retrieval" | "image-retrieval"
    recalls: dict         # k -> percentage
    fold_count: int
    query_count: int
    candidate_count: int

    @property
    def mean_recall(self):
        """Mean of the R@K values; a convenience summary, not a benchmark metric."""
        return float(np.mean(list(self.recalls.values())))

    def csv_line(self):
        ks = sorted(self.recalls)
        cells = [self.direction, str(self.fold_count), str(self.query_count),
                 str(self.candidate_count)]
        cells += [f"{self.recalls[k]:.4f}" for k in ks]
        return ",".join(cells)


def recall_at_k(similarities, ground_truth, k):
    """Percentage of queries whose true match ranks in the top k.

    `similarities` is (queries x candidates); candidates sort by descending
    similarity with ties broken by ascending index. `ground_truth[q]` is a
    nonempty collection of correct candidate indices for query q.
    """
    sims = similarities.data if isinstance(similarities, Tensor) else np.asarray(similarities)
    n_queries, n_candidates = sims.shape
    if k < 1 or k > n_candidates:
        raise ContractError(f"k={k} outside 1..{n_candidates}")
    if len(ground_truth) != n_queries:
        raise ContractError(f"{len(ground_truth)} truth entries for {n_queries} queries")

    hits = 0
    for q in range(n_queries):
        truth = set(ground_truth[q])
        if not truth:
            raise ContractError(f"query {q} has no ground-truth match")
        top = np.argsort(-sims[q], kind="stable")[:k]
        if truth.intersection(top.tolist()):
            hits += 1
    return 100.0 * hits / n_queries


def _direction_recalls(sims, truth):
    return {k: recall_at_k(sims, truth, k) for k in RECALL_KS if k <= sims.shape[1]}


def evaluate_protocol(image_vectors, caption_vectors, captions_per_item,
                      mode="full", fold_size=0):
    """Both retrieval directions as a (sentence_report, image_report) pair.

    Caption j belongs to image j // captions_per_item. In "folds" mode the
    test set is split into disjoint consecutive blocks of `fold_size` images
    (with their captions) and the R@K values are averaged across folds.
    """
    images = np.asarray(image_vectors.data if isinstance(image_vectors, Tensor) else image_vectors)
    captions = np.asarray(caption_vectors.data if isinstance(caption_vectors, Tensor) else caption_vectors)
    n_images = images.shape[0]
    if captions.shape[0] != n_images * captions_per_item:
        raise ContractError(
            f"{captions.shape[0]} caption vectors do not cover {n_images} images "
            f"x {captions_per_item} captions")

    if mode == "full":
        folds = [(0, n_images)]
    elif mode == "folds":
        if fold_size < 1 or fold_size > n_images:
            raise ConfigError(f"fold size {fold_size} invalid for {n_images} test images")
        if n_images % fold_size:
            raise ConfigError(f"{n_images} test images do not divide into folds of {fold_size}")
        folds = [(start, start + fold_size) for start in range(0, n_images, fold_size)]
    else:
        raise ConfigError(f"unknown evaluation mode {mode!r}")

    per_fold = {"sentence-retrieval": [], "image-retrieval": []}
    for start, stop in folds:
        img = images[start:stop]
        cap = captions[start * captions_per_item:stop * captions_per_item]
        sims = img @ cap.T  # joint vectors are unit norm, so dot = cosine

        sent_truth = [range(i * captions_per_item, (i + 1) * captions_per_item)
                      for i in range(img.shape[0])]
        per_fold["sentence-retrieval"].append(_direction_recalls(sims, sent_truth))

        img_truth = [[j // captions_per_item] for j in range(cap.shape[0])]
        per_fold["image-retrieval"].append(_direction_recalls(sims.T, img_truth))

    reports = []
    for direction, counts in (("sentence-retrieval", (n_images, n_images * captions_per_item)),
                              ("image-retrieval", (n_images * captions_per_item, n_images))):
        folded = per_fold[direction]
        averaged = {k: float(np.mean([f[k] for f in folded])) for k in folded[0]}
        reports.append(RetrievalReport(
            direction=direction,
            recalls=averaged,
            fold_count=len(folds),
            query_count=counts[0] if len(folds) == 1 else counts[0] // len(folds),
            candidate_count=counts[1] if len(folds) == 1 else counts[1] // len(folds),
        ))
    return reports[0], reports[1]


def format_report_table(reports):
    """Aligned text table over any number of reports."""
    ks = sorted({k for r in reports for k in r.recalls})
    header = ["direction", "folds", "queries", "candidates"] + [f"R@{k}" for k in ks] + ["mean"]
    rows = [header]
    for r in reports:
        rows.append([r.direction, str(r.fold_count), str(r.query_count), str(r.candidate_count)]
                    + [f"{r.recalls[k]:.2f}" if k in r.recalls else "-" for k in ks]
                    + [f"{r.mean_recall:.2f}"])
    widths = [max(len(row[i]) for row in rows) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
             for row in rows]
    return "\n".join(lines)


def report_csv_lines(reports):
    ks = sorted({k for r in reports for k in r.recalls})
    header = "direction,folds,queries,candidates," + ",".join(f"r_at_{k}" for k in ks)
    return [header] + [r.csv_line() for r in reports]


def combined_mean_recall(reports):
    """Mean over all R@K values of all reports (six numbers for the usual
    two-direction pair); a convenience summary, not a benchmark metric."""
    values = [v for r in reports for v in r.recalls.values()]
    return float(np.mean(values))
