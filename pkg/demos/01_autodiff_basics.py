"""Tour of the tensor core: forward ops, reverse-mode gradients, checking.

Run from the repository root after `pip install -e .`:
    python3 demos/01_autodiff_basics.py
"""

import numpy as np

from vsembed.tensor import (
    backward,
    cosine,
    frobenius_sq,
    grad_check,
    l2_normalize,
    matmul,
    softmax_rows,
    tensor,
    wide_precision,
)

# Build a small computation: every op records how it was produced, so a
# scalar at the end can be differentiated back to the leaves.
a = tensor([[1.0, 2.0], [3.0, 4.0]], requires_grad=True)
b = tensor([[5.0], [6.0]], requires_grad=True)

product = matmul(a, b)
print("matmul([[1,2],[3,4]], [[5],[6]]) =", product.data.tolist())

loss = frobenius_sq(product)
backward(loss)
print("d(|A.B|^2)/dA =\n", a.grad)
print("d(|A.B|^2)/dB =\n", b.grad)

# Softmax rows are computed with per-row max subtraction, so huge logits
# are fine, and each row sums to one.
logits = tensor([[1000.0, 1000.0, 999.0]])
print("\nsoftmax of [1000, 1000, 999]:", softmax_rows(logits).data.round(4).tolist())

# Cosine similarity and normalization reject degenerate inputs instead of
# dividing by zero.
u = tensor([3.0, 4.0])
print("l2_normalize([3, 4]) =", l2_normalize(u).data.tolist())
print("cosine([1,0], [1,1]) =", float(cosine(tensor([1.0, 0.0]), tensor([1.0, 1.0])).data))

# The gradient checker compares analytic gradients against central finite
# differences. Wide precision (float64) makes the comparison meaningful.
with wide_precision():
    point = tensor(np.random.default_rng(0).normal(size=(3, 4)), requires_grad=True)
    err = grad_check(lambda x: frobenius_sq(softmax_rows(x)), [point])
print(f"\ngrad_check(softmax -> frobenius): max relative error {err:.2e}")
