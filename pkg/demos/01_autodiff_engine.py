"""A walk through the reverse-mode engine the classifier trains on.

Every operation records itself on the active Graph; backward() then
replays the tape in reverse, accumulating gradients into each Tensor's
.grad slot.  Tensors are immutable float64 arrays, so a recorded graph
can never be invalidated by an in-place edit.
"""

import numpy as np

from stormstack.tensor import (
    Graph, Tensor, backward, grad_check, matmul, mul, relu, sigmoid,
    softmax, sum_all,
)

print("== a scalar chain ==")
x = Tensor([1.0, -2.0, 0.5])
with Graph() as g:
    loss = sum_all(mul(x, x))  # sum of squares
backward(g, loss)
print("x          ", x.array)
print("d/dx sum x^2 =", x.grad, " (expect 2x)")

print()
print("== gradients flow through reuse ==")
y = Tensor([3.0])
with Graph() as g:
    # y appears twice; its gradient must accumulate, not overwrite
    loss = sum_all(mul(y, sigmoid(y)))
backward(g, loss)
print("d/dy y*sigmoid(y) =", y.grad[0])
s = 1.0 / (1.0 + np.exp(-3.0))
print("hand value        =", s + 3.0 * s * (1.0 - s))

print()
print("== matmul and the two-sided rule ==")
a = Tensor(np.arange(6.0).reshape(2, 3))
b = Tensor(np.ones((3, 2)))
with Graph() as g:
    loss = sum_all(matmul(a, b))
backward(g, loss)
print("dL/dA =\n", a.grad, " (ones @ B^T)")
print("dL/dB =\n", b.grad, " (A^T @ ones)")

print()
print("== checking a composite against finite differences ==")
rng = np.random.default_rng(4)
point = Tensor(rng.standard_normal((3, 4)))


def f(t):
    return sum_all(softmax(mul(t, t)))


err = grad_check(f, point, 1e-5)
print(f"max relative error on softmax(x*x): {err:.3e}")

# relu has a kink at zero; grad_check drops coordinates where the two
# one-sided difference quotients disagree, so a point sitting exactly
# on the kink cannot produce a false alarm
kinked = Tensor([0.0, 1.0, -1.0])
err = grad_check(lambda t: sum_all(relu(t)), kinked, 1e-5)
print(f"max relative error on relu with a kink in the batch: {err:.3e}")

print()
print("== no graph, no bookkeeping ==")
out = mul(x, x)
print("inference-mode grad slot:", out.grad, "(ops outside a Graph record nothing)")
