import math

import numpy as np
import pytest

from mixradon import profiles as pr


def rel_err(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return float(np.max(np.abs(a - b) / np.abs(b)))


@pytest.fixture
def gauss():
    return pr.gaussian()


@pytest.fixture
def gauss_table():
    """Gaussian tabulated on a fine grid out to r = 8."""
    return pr.materialize(lambda r: np.exp(-r * r), pr.default_grid(8.0), name="gauss_tab")


def beta_plus(mu, alpha, t):
    """``I^alpha_+ [r^mu](t)`` in closed form."""
    return math.gamma(mu / 2 + 1) / math.gamma(mu / 2 + 1 + alpha) * t ** (mu + 2 * alpha)


def beta_minus(lam, alpha, t):
    """``I^alpha_- [r^-lam](t)`` in closed form."""
    return math.gamma(lam / 2 - alpha) / math.gamma(lam / 2) * t ** (2 * alpha - lam)
