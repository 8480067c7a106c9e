"""Closed-form references used by tests and acceptance criteria: the
Ornstein-Uhlenbeck stationary law of the sheared harmonic model, the exact
transport coefficient it implies, and total-variation distances between the
one-step Gaussian kernels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dynamics import ModelSpec, SimParams
from .errors import ParameterError

__all__ = ["OUStationary", "ou_stationary", "gaussian_tv_isotropic", "em_kernel_means"]


@dataclass(frozen=True)
class OUStationary:
    """Stationary law of the linearly sheared 2-d harmonic dynamics: covariance
    matrix and the exact transport coefficient of the coordinate-covariance
    response."""

    sigma: np.ndarray
    alpha: float


def ou_stationary(beta: float, eta: float) -> OUStationary:
    """Stationary covariance (1/(2 beta)) [[2 + eta^2, eta], [eta, 2]] of the
    harmonic model with linear shear, and the transport coefficient 1/(2 beta).

    The cross-covariance is exactly eta/(2 beta), so the finite-difference
    response of the coordinate product is eta-independent here.
    """
    if not beta > 0:
        raise ParameterError(f"beta must be > 0, got {beta}")
    sigma = np.array([[2.0 + eta * eta, eta], [eta, 2.0]]) / (2.0 * beta)
    return OUStationary(sigma=sigma, alpha=1.0 / (2.0 * beta))


def gaussian_tv_isotropic(mu1: np.ndarray, mu2: np.ndarray, sigma: float) -> float:
    """Total-variation distance between N(mu1, sigma^2 Id) and N(mu2, sigma^2 Id).

    Equal isotropic covariances reduce the d-dimensional distance to the
    one-dimensional form 2*Phi(delta/(2 sigma)) - 1 with delta = |mu1 - mu2|;
    Phi is evaluated through the complementary error function.
    """
    if not sigma > 0:
        raise ParameterError(f"sigma must be > 0, got {sigma}")
    delta = float(np.linalg.norm(np.asarray(mu1, dtype=np.float64) - np.asarray(mu2, dtype=np.float64)))
    # 2*Phi(z) - 1 = 1 - erfc(z / sqrt(2)) with z = delta / (2 sigma)
    return 1.0 - math.erfc(delta / (2.0 * sigma * math.sqrt(2.0)))


def em_kernel_means(x: np.ndarray, y: np.ndarray, model: ModelSpec, p: SimParams):
    """Means and common scale of the one-step Euler-Maruyama transition kernels
    started from x (perturbed chain) and y (reference chain):

        mu_x = x + dt*(b(x) + eta*F(x)),  mu_y = y + dt*b(y),
        sigma = sqrt(2*dt/beta).
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    mu_x = x + p.dt * (model.drift(x) + p.eta * model.forcing.eval(x))
    mu_y = y + p.dt * model.drift(y)
    return mu_x, mu_y, p.sigma
