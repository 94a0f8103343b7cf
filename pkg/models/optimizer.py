"""
SGD with momentum and a step learning-rate schedule.
"""

import numpy as np

from numerics.tensor import accumulate
from utils.errors import SnnError

MILESTONE_PERCENTS = (50, 70, 90)


def lr_milestones(epochs):
    return tuple(epochs * pct // 100 for pct in MILESTONE_PERCENTS)


def lr_at(epoch, epochs, base_lr, decay=0.1):
    """Base rate times ``decay`` for every milestone already reached."""
    passed = sum(1 for milestone in lr_milestones(epochs) if epoch >= milestone)
    return base_lr * decay**passed


def sgd_step(net, grads, lr, momentum=0.9, weight_decay=5e-4):
    """
    In-place update of every weight and gamma:
        v <- momentum * v + g (+ weight_decay * W for weights)
        W <- W - lr * v
    Gamma is not decayed. Missing buffers start at zero.
    """
    grad_map = grads.as_dict()
    params = net.parameters()
    missing = set(params) - set(grad_map)
    if missing:
        raise SnnError(f"No gradient for parameters {sorted(missing)}")
    for name, param in params.items():
        g = accumulate(grad_map[name])
        if g.shape != param.shape:
            raise SnnError(f"Gradient shape {g.shape} does not match {name} {param.shape}")
        if name.endswith(".weight") and weight_decay:
            g = g + weight_decay * accumulate(param)
        velocity = net.velocity.get(name)
        if velocity is None:
            velocity = g
        else:
            velocity = momentum * accumulate(velocity) + g
        net.velocity[name] = velocity.astype(param.dtype)
        param[...] = (accumulate(param) - lr * velocity).astype(param.dtype)
    return net


def parameter_norm(net):
    return float(
        np.sqrt(sum(float(np.sum(accumulate(p) ** 2)) for p in net.parameters().values()))
    )
