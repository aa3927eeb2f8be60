"""Walk through the reverse-mode tape: record a computation, pull gradients,
and confirm them against finite differences."""

import numpy as np

from hyperagg import GradientTape, Tensor, gradient_check
from hyperagg import autodiff as ad

print("=== recording a computation ===")
tape = GradientTape()
w = tape.tensor([[0.5, -1.0], [2.0, 0.25]])
x = Tensor([[1.0, 2.0]])

# y = sum(relu(x @ w)) -- every op returns a new tensor on the same tape
y = ad.relu(ad.matmul(x, w)).sum()
print("forward value:", y.item())

tape.backward(y)
print("dy/dw:\n", tape.grad(w))

print()
print("=== gradients vs. finite differences ===")


def f(t):
    return (ad.sigmoid(t) * t).sum()


x0 = np.random.default_rng(0).normal(size=(3, 3))
err = gradient_check(f, x0)
print(f"max relative error for sigmoid(x)*x: {err:.2e} (want < 1e-4)")

print()
print("=== unused inputs get zero gradients ===")
tape = GradientTape()
a = tape.tensor([1.0, 2.0])
b = tape.tensor([3.0, 4.0])  # never used below
loss = (a * a).sum()
tape.backward(loss)
print("grad wrt a:", tape.grad(a))
print("grad wrt b:", tape.grad(b), "(b never participated)")
