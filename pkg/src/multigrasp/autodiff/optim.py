"""Plain SGD with optional momentum and the step-decay schedule."""
import numpy as np

from ..errors import ShapeMismatch


def step_lr(base_lr, iteration, step=10000, gamma=0.1):
    """Learning rate after ``iteration`` updates: divided by 1/gamma every ``step``."""
    return base_lr * gamma ** (iteration // step)


def sgd_step(params, grads, lr, momentum=0.0, velocity=None):
    """In-place ``p <- p - lr * g`` (or the heavy-ball form when momentum > 0).

    ``params`` and ``grads`` are parallel sequences of arrays; ``velocity``
    holds the momentum buffers and is updated in place.
    """
    if len(params) != len(grads):
        raise ShapeMismatch(f"{len(params)} parameters but {len(grads)} gradients")
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        if p.shape != g.shape:
            raise ShapeMismatch(f"parameter {i}: shape {p.shape} vs gradient {g.shape}")
        if momentum:
            v = velocity[i]
            v *= momentum
            v += g
            g = v
        p -= np.asarray(lr, dtype=p.dtype) * g
    return params


class SGD:
    def __init__(self, params, lr=1e-4, momentum=0.0, lr_step=10000, gamma=0.1):
        self.params = list(params)
        self.base_lr = lr
        self.momentum = momentum
        self.lr_step = lr_step
        self.gamma = gamma
        self.iteration = 0
        self.velocity = [np.zeros_like(p.value) for p in self.params]

    @property
    def lr(self):
        return step_lr(self.base_lr, self.iteration, self.lr_step, self.gamma)

    def zero_grad(self):
        for p in self.params:
            p.zero_grad()

    def step(self):
        sgd_step([p.value for p in self.params], [p.grad for p in self.params], self.lr,
                 self.momentum, self.velocity)
        self.iteration += 1
