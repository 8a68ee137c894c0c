"""Parameter storage, Adam with decoupled weight decay, and gradient checks."""
import numpy as np

from .autograd import Tensor


class NonFiniteGradientError(FloatingPointError):
    pass


class ParamStore:
    """Named float64 parameters with matching gradient and Adam-moment buffers."""

    def __init__(self):
        self.params = {}
        self.grads = {}
        self.m = {}
        self.v = {}
        self.step = 0

    def add(self, name, value):
        value = np.array(value, dtype=np.float64)
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)
        return value

    def tensor(self, name):
        """A leaf whose gradient accumulates into this store's buffer."""
        return Tensor(self.params[name], sink=self.grads[name])

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def names(self):
        return list(self.params)

    def copy(self):
        out = ParamStore()
        for k, v in self.params.items():
            out.add(k, v)
            out.m[k][...] = self.m[k]
            out.v[k][...] = self.v[k]
        out.step = self.step
        return out

    def __iter__(self):
        return iter(self.params.items())

    def __len__(self):
        return len(self.params)


def adam_step(params, lr, weight_decay=0.0, beta1=0.9, beta2=0.999, eps=1e-8):
    """One AdamW update over every parameter, then zero the gradients.

    Weight decay is decoupled: ``p -= lr * weight_decay * p`` before the
    adaptive step.
    """
    for name, g in params.grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"non-finite gradient for parameter {name!r}")
    params.step += 1
    t = params.step
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t
    for name, p in params.params.items():
        g = params.grads[name]
        m, v = params.m[name], params.v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * (g * g)
        if weight_decay:
            p -= lr * weight_decay * p
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    params.zero_grad()


def grad_check(f, params, eps=1e-5):
    """Max relative error between backprop and central differences.

    ``f(params)`` must return a scalar :class:`Tensor` built from leaves
    obtained through ``params.tensor``. Error per entry is
    ``|analytic - numeric| / max(1, |numeric|)``.
    """
    params.zero_grad()
    f(params).backward()
    analytic = {k: g.copy() for k, g in params.grads.items()}
    params.zero_grad()
    worst = 0.0
    for name, p in params.params.items():
        flat = p.reshape(-1)
        ana = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = f(params).item()
            flat[i] = orig - eps
            down = f(params).item()
            flat[i] = orig
            num = (up - down) / (2.0 * eps)
            worst = max(worst, abs(ana[i] - num) / max(1.0, abs(num)))
    params.zero_grad()
    return worst
