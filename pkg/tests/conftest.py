import numpy as np
import pytest

from koopgait.factorgraph import KIND_ROT
from koopgait.skeleton import GaitState, default_skeleton
from koopgait.so3 import so3_exp


@pytest.fixture
def skel():
    return default_skeleton()


def perturb_value(key, value, delta):
    """Retract one variable; mirrors the solver's update rule."""
    if key.kind == KIND_ROT:
        return value @ so3_exp(delta)
    if key.dim == 1:
        return float(value) + float(delta[0])
    return value + delta


def factor_fd_check(factor, values, h=1e-6, rtol=1e-5):
    """Max relative error between analytic and central-FD factor Jacobians."""
    jac = factor.jacobians(values)
    worst = 0.0
    for key in factor.keys:
        block = jac[key]
        fd = np.zeros_like(block)
        for c in range(key.dim):
            d = np.zeros(key.dim)
            d[c] = h
            vp = dict(values)
            vp[key] = perturb_value(key, values[key], d)
            vm = dict(values)
            vm[key] = perturb_value(key, values[key], -d)
            fd[:, c] = (factor.residual(vp) - factor.residual(vm)) / (2 * h)
        scale = max(1.0, float(np.max(np.abs(block))))
        worst = max(worst, float(np.max(np.abs(fd - block))) / scale)
    assert worst < rtol, f"FD mismatch {worst:.2e} for {factor!r}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_rotation(rng, max_angle=np.pi * 0.9):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    return so3_exp(axis * rng.uniform(0.0, max_angle))


def random_state(rng, root_scale=1.0):
    root = rng.normal(size=3) * root_scale
    rots = np.stack([random_rotation(rng) for _ in range(6)])
    return GaitState(root, rots)


def random_lengths(rng):
    return rng.uniform(0.3, 0.6, size=6)
