"""Quadrature rules on segments, triangles, and boxes.

Rules are generated, not tabulated: Gauss-Legendre in 1d and a Duffy
(collapsed tensor) rule on the reference triangle.  A rule built for
exactness degree ``d`` integrates every bivariate monomial of total
degree up to ``d`` exactly and has positive weights.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss_1d(npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Points and weights on [-1, 1], exact to degree 2*npts - 1."""
    return np.polynomial.legendre.leggauss(npts)


def points_for_degree(degree: int) -> int:
    """Smallest Gauss point count integrating 1d degree exactly."""
    return max(1, (degree + 2) // 2)


def segment_rule(p0, p1, npts: int) -> tuple[np.ndarray, np.ndarray]:
    """Mapped Gauss rule on the segment p0-p1; weights sum to its length."""
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    length = float(np.linalg.norm(p1 - p0))
    if length == 0.0:
        return np.zeros((0, 2)), np.zeros(0)
    t, w = gauss_1d(npts)
    pts = 0.5 * (p0 + p1) + 0.5 * np.outer(t, p1 - p0)
    return pts, 0.5 * length * w


def triangle_rule(degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Duffy rule on the reference triangle (0,0)-(1,0)-(0,1).

    The collapse x = u, y = v*(1-u) raises the u-degree by one, hence the
    extra point in that direction.  Weights are positive and sum to 1/2.
    """
    mu = points_for_degree(degree + 1)
    mv = points_for_degree(degree)
    xu, wu = gauss_1d(mu)
    xv, wv = gauss_1d(mv)
    u = 0.5 * (xu + 1.0)
    v = 0.5 * (xv + 1.0)
    wu = 0.5 * wu
    wv = 0.5 * wv
    U, V = np.meshgrid(u, v, indexing="ij")
    WU, WV = np.meshgrid(wu, wv, indexing="ij")
    x = U.ravel()
    y = (V * (1.0 - U)).ravel()
    w = (WU * WV * (1.0 - U)).ravel()
    return np.column_stack([x, y]), w


def map_to_triangles(tris: np.ndarray, ref_pts: np.ndarray, ref_w: np.ndarray):
    """Push a reference-triangle rule onto physical triangles.

    tris has shape (m, 3, 2); the returned weights integrate over the
    union, scaling each copy by twice the (positive) triangle area.
    """
    tris = np.asarray(tris, dtype=float)
    if tris.size == 0:
        return np.zeros((0, 2)), np.zeros(0)
    v0 = tris[:, 0]
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    jac = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    pts = (
        v0[:, None, :]
        + ref_pts[None, :, 0:1] * e1[:, None, :]
        + ref_pts[None, :, 1:2] * e2[:, None, :]
    )
    w = np.abs(jac)[:, None] * ref_w[None, :]
    return pts.reshape(-1, 2), w.ravel()


def box_rule(x0: float, y0: float, x1: float, y1: float, npts: int):
    """Tensor Gauss rule on an axis-aligned box."""
    t, w = gauss_1d(npts)
    xs = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * t
    ys = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * t
    wx = 0.5 * (x1 - x0) * w
    wy = 0.5 * (y1 - y0) * w
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    W = np.outer(wx, wy)
    return np.column_stack([X.ravel(), Y.ravel()]), W.ravel()


def triangle_areas(tris: np.ndarray) -> np.ndarray:
    tris = np.asarray(tris, dtype=float)
    if tris.size == 0:
        return np.zeros(0)
    e1 = tris[:, 1] - tris[:, 0]
    e2 = tris[:, 2] - tris[:, 0]
    return 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
