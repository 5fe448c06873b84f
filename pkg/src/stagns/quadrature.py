"""Gauss quadrature on [0,1] and the bilinear quadrilateral reference map."""

import numpy as np


def gauss_1d(n):
    """Gauss-Legendre points and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def gauss_2d(n):
    """Tensor Gauss rule on the unit square, returned as (points, weights)."""
    x, w = gauss_1d(n)
    xi, eta = np.meshgrid(x, x, indexing="ij")
    pts = np.stack([xi.ravel(), eta.ravel()], axis=1)
    wts = np.outer(w, w).ravel()
    return pts, wts


def q1_basis(ref_pts):
    """Bilinear shape functions at reference points, shape (npts, 4).

    Corner order (0,0), (1,0), (1,1), (0,1), matching counter-clockwise
    cell connectivity.
    """
    xi, eta = ref_pts[:, 0], ref_pts[:, 1]
    return np.stack([(1 - xi) * (1 - eta), xi * (1 - eta),
                     xi * eta, (1 - xi) * eta], axis=1)


def q1_basis_grad(ref_pts):
    """Reference gradients of the bilinear shape functions, shape (npts, 4, 2)."""
    xi, eta = ref_pts[:, 0], ref_pts[:, 1]
    g = np.empty((len(ref_pts), 4, 2))
    g[:, 0, 0] = -(1 - eta); g[:, 0, 1] = -(1 - xi)
    g[:, 1, 0] = (1 - eta);  g[:, 1, 1] = -xi
    g[:, 2, 0] = eta;        g[:, 2, 1] = xi
    g[:, 3, 0] = -eta
    g[:, 3, 1] = 1 - xi
    return g


def map_points(cell_verts, ref_pts):
    """Physical images of reference points under the bilinear map, (npts, 2)."""
    return q1_basis(ref_pts) @ cell_verts


def map_jacobians(cell_verts, ref_pts):
    """Jacobians of the bilinear map at reference points, (npts, 2, 2)."""
    g = q1_basis_grad(ref_pts)
    return np.einsum("pkr,kd->pdr", g, cell_verts)
