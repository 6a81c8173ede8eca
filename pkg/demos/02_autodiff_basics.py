"""Tour of the reverse-mode tensor core the package trains with.

Everything downstream (networks, losses, the trainer) is built from one
Tensor type holding a float64 array, an op name, and parent links. backward()
replays the recorded graph once, accumulating exact gradients into leaves.
"""

import numpy as np

from jointmatch.autodiff import Tensor, backward

# ------------------------------------------------------------ scalars

x = Tensor(np.array([[2.0]]))
y = x.square().mul(3.0).add(1.0)   # y = 3 x^2 + 1
backward(y.sum(), [x])
print(f"y = 3x^2 + 1 at x=2: value {y.data[0, 0]:.1f}, dy/dx {x.grad[0, 0]:.1f} (expect 12)")

# -------------------------------------------------- shared subexpression

x = Tensor(np.array([[1.5]]))
u = x.mul(2.0)
z = u.mul(u)                        # z = 4 x^2, u enters twice
backward(z.sum(), [x])
print(f"z = (2x)(2x) at x=1.5: dz/dx {x.grad[0, 0]:.1f} (expect 8x = 12)")

# ------------------------------------------------- a tiny critic-shaped net

rng = np.random.default_rng(0)
w1 = Tensor(rng.standard_normal((3, 8)) * 0.3)
b1 = Tensor(np.zeros(8))
w2 = Tensor(rng.standard_normal((8, 1)) * 0.3)
batch = Tensor(rng.standard_normal((16, 3)))

hidden = batch.matmul(w1).add(b1).relu()
score = hidden.matmul(w2).sigmoid().clip(1e-7, 1 - 1e-7)
loss = score.log().mean().mul(-1.0)
backward(loss, [w1, b1, w2])
print(f"\ntiny critic loss {loss.data:.4f}; grad norms "
      f"w1 {np.linalg.norm(w1.grad):.4f}, b1 {np.linalg.norm(b1.grad):.4f}, "
      f"w2 {np.linalg.norm(w2.grad):.4f}")

# ------------------------------------------- central-difference agreement

step = 1e-5
flat_index = (1, 4)
keep = w1.data[flat_index]
w1.data[flat_index] = keep + step
up = batch.matmul(w1).add(b1).relu().matmul(w2).sigmoid().clip(1e-7, 1 - 1e-7)
up_val = up.log().mean().mul(-1.0).data
w1.data[flat_index] = keep - step
dn = batch.matmul(w1).add(b1).relu().matmul(w2).sigmoid().clip(1e-7, 1 - 1e-7)
dn_val = dn.log().mean().mul(-1.0).data
w1.data[flat_index] = keep

numeric = (up_val - dn_val) / (2 * step)
analytic = w1.grad[flat_index]
print(f"w1[{flat_index}]: analytic {analytic:.10f}, central diff {numeric:.10f}, "
      f"abs err {abs(analytic - numeric):.2e}")
