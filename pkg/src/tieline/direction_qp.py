"""Minimum-norm point of ``conv(alphas) + cone(generators)``.

With ``P`` the matrix of collected slopes and ``G`` the normal-cone
generators, the nonnegative least-squares problem

    min_{u >= 0} || [P  G; 1^T  0^T] u - e_last ||

has the solution ``u = s (eta, mu)`` with ``s = 1 / (1 + ||v*||^2)``, where
``v* = P eta + G mu`` is the sought minimum-norm point.  So one nonnegative least-squares solve
gives ``v*`` together with its convex and conic multipliers.  Euclidean
projection onto a polytope uses the same routine through the classical
least-distance reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import lsq_linear

from .errors import NumericalError


@dataclass
class SubgradientSet:
    """Slopes collected at the incumbent ``anchor`` (the set D)."""

    anchor: np.ndarray
    alphas: list = field(default_factory=list)
    J: float = np.inf

    def add(self, alpha):
        self.alphas.append(np.asarray(alpha, dtype=float).copy())

    def matrix(self):
        return np.column_stack(self.alphas)


@dataclass(frozen=True)
class NormalCone:
    """Cone generated by the outward normals of the rows of ``Y`` active at a point."""

    generators: tuple = ()

    @classmethod
    def at(cls, coupling, y, tol=1e-8):
        G, h = coupling.G, coupling.h
        norms = np.linalg.norm(G, axis=1)
        slack = (h - G @ np.asarray(y, dtype=float)) / norms
        act = np.flatnonzero(slack <= tol)
        return cls(tuple(G[j] / norms[j] for j in act))


@dataclass(frozen=True)
class DirectionCertificate:
    eta: np.ndarray
    mu: np.ndarray
    norm: float
    scaled_norm: float
    residual: float  # worst violation of the optimality conditions
    is_zero: bool


def _nnls(M, target):
    """Nonnegative least squares by bounded-variable least squares."""
    res = lsq_linear(M, target, bounds=(0.0, np.inf), method="bvls", tol=1e-15, max_iter=50 * (M.shape[1] + 10))
    return np.maximum(res.x, 0.0)


def min_norm_direction(D: SubgradientSet, N: NormalCone, tol_v: float = 1e-7):
    """Return ``(v, certificate)``; ``v`` is exactly zero when the scaled norm is within ``tol_v``."""
    if not D.alphas:
        raise ValueError("subgradient set is empty")
    P = D.matrix()
    dim = P.shape[0]
    amax = max(np.linalg.norm(P, axis=0).max(), 1.0)
    Gm = np.column_stack(N.generators) if N.generators else np.zeros((dim, 0))
    gn = np.linalg.norm(Gm, axis=0) if Gm.size else np.zeros(0)
    if Gm.size:
        Gm = Gm / gn
    k, r = P.shape[1], Gm.shape[1]
    M = np.zeros((dim + 1, k + r))
    M[:dim, :k] = P / amax
    M[:dim, k:] = Gm
    M[dim, :k] = 1.0
    target = np.zeros(dim + 1)
    target[dim] = 1.0
    u = _nnls(M, target)
    s = u[:k].sum()
    if not s > 0:
        raise NumericalError("min-norm solve returned no convex weight")
    eta = u[:k] / s
    mu = u[k:] / s * amax
    v = P @ eta + Gm @ mu
    norm = float(np.linalg.norm(v))
    scaled = norm / (1.0 + max(np.linalg.norm(P, axis=0).max(), 0.0))
    # optimality: alpha_j^T v >= |v|^2 for every j, g^T v >= 0 for every generator
    vv = norm * norm
    resid = max(0.0, float((vv - P.T @ v).max()))
    if r:
        resid = max(resid, float((-(Gm.T @ v)).max()))
    resid /= 1.0 + amax * amax
    zero = scaled <= tol_v
    cert = DirectionCertificate(eta, mu / np.where(gn > 0, gn, 1.0) if r else mu, norm, scaled, resid, zero)
    return (np.zeros(dim) if zero else v), cert


def project_onto_polytope(G, h, p):
    """Euclidean projection of ``p`` onto ``{z : G z <= h}``."""
    G = np.asarray(G, dtype=float)
    h = np.asarray(h, dtype=float)
    p = np.asarray(p, dtype=float)
    if (G @ p <= h).all():
        return p.copy()
    # least-distance problem in u = z - p:  min |u|  s.t.  -G u >= G p - h
    norms = np.linalg.norm(G, axis=1)
    norms[norms == 0] = 1.0
    E = -G / norms[:, None]
    f = (G @ p - h) / norms
    n = p.size
    M = np.vstack([E.T, f[None, :]])
    target = np.zeros(n + 1)
    target[n] = 1.0
    w = _nnls(M, target)
    r = M @ w - target
    if abs(r[n]) < 1e-14:
        raise NumericalError("projection target set is empty")
    u = -r[:n] / r[n]
    return p + u
