import numpy as np


class AdamW:
    """Adam with decoupled weight decay on matrices (ndim >= 2) only."""

    def __init__(self, params, beta1=0.9, beta2=0.95, eps=1e-8, weight_decay=0.1):
        self.params = dict(params)
        self.beta1, self.beta2, self.eps, self.weight_decay = beta1, beta2, eps, weight_decay
        self.m = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in self.params.items()}
        self.t = 0

    def step(self, lr):
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for k, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            g = g.astype(p.data.dtype, copy=False)
            m, v = self.m[k], self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            upd = (m / c1) / (np.sqrt(v / c2) + self.eps)
            if self.weight_decay and p.data.ndim >= 2:
                upd = upd + self.weight_decay * p.data
            p.data = (p.data - lr * upd).astype(p.data.dtype, copy=False)

    def state(self):
        return self.m, self.v, self.t

    def load(self, m, v, t):
        for k in self.params:
            self.m[k] = np.array(m[k], dtype=self.params[k].data.dtype)
            self.v[k] = np.array(v[k], dtype=self.params[k].data.dtype)
        self.t = int(t)


def global_grad_norm(params):
    total = 0.0
    for p in params:
        if p.grad is not None:
            g = p.grad.astype(np.float64)
            total += float(np.dot(g.ravel(), g.ravel()))
    return float(np.sqrt(total))


def clip_grad_norm(params, max_norm):
    """Scale gradients in place so their global norm is at most ``max_norm``.

    Returns ``(norm_before, norm_after)``.
    """
    params = list(params)
    norm = global_grad_norm(params)
    if not np.isfinite(norm):
        return norm, norm
    if norm > max_norm:
        scale = max_norm / (norm + 1e-6)
        for p in params:
            if p.grad is not None:
                p.grad = (p.grad * scale).astype(p.grad.dtype, copy=False)
    return norm, global_grad_norm(params)
