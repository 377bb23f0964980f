"""Normalized probabilists' Hermite polynomials and Gauss--Hermite grids.

The polynomials H_0, H_1, ... are orthonormal for the standard Gaussian
weight g(y) = exp(-y^2/2)/sqrt(2*pi):

    H_0 = 1,  H_1 = y,
    H_{k+1}(y) = (y*H_k(y) - sqrt(k)*H_{k-1}(y)) / sqrt(k+1).

The order-m interpolation grid consists of the m+1 roots of H_{m+1},
addressed by a signed index that is symmetric about the origin.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal


def hermite_eval(k, y):
    """Evaluate the normalized Hermite polynomial H_k at y.

    Parameters
    ----------
    k : int
        Polynomial degree, >= 0.
    y : float or ndarray
        Evaluation point(s).

    Returns
    -------
    float or ndarray with the shape of y.
    """
    y = np.asarray(y, dtype=float)
    if k < 0:
        raise ValueError("degree must be >= 0")
    h_prev = np.ones_like(y)
    if k == 0:
        return h_prev if h_prev.ndim else float(h_prev)
    h = y.copy()
    for n in range(1, k):
        h_prev, h = h, (y * h - np.sqrt(n) * h_prev) / np.sqrt(n + 1)
    return h if h.ndim else float(h)


def hermite_eval_all(max_k, y):
    """Evaluate H_0..H_max_k at y in one recurrence sweep.

    Returns an array of shape (max_k+1,) + y.shape.
    """
    y = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty((max_k + 1,) + y.shape)
    out[0] = 1.0
    if max_k >= 1:
        out[1] = y
    for n in range(1, max_k):
        out[n + 1] = (y * out[n] - np.sqrt(n) * out[n - 1]) / np.sqrt(n + 1)
    return out


def gaussian_density(y):
    """Standard Gaussian density; product across the last axis for vectors.

    gaussian_density(1.0) is the univariate density at 1; for an array of
    shape (..., d) the result has shape (...) and equals the product of the
    univariate densities along the last axis.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 0:
        return float(np.exp(-0.5 * y * y) / np.sqrt(2.0 * np.pi))
    dens = np.exp(-0.5 * y * y) / np.sqrt(2.0 * np.pi)
    return dens.prod(axis=-1)


def signed_indices(m):
    """Signed node index set for order m, in ascending node order.

    Even m = 2j gives {-j..-1, 0, 1..j}; odd m = 2j-1 gives
    {-j..-1, 1..j} (no zero index, no zero node).
    """
    j = (m + 1) // 2
    if m % 2 == 0:
        return list(range(-j, j + 1))
    return [k for k in range(-j, j + 1) if k != 0]


def gauss_hermite_nodes(m):
    """Nodes and weights of the (m+1)-point Gauss--Hermite rule.

    The nodes are the roots of H_{m+1}, computed as eigenvalues of the
    symmetric tridiagonal Jacobi matrix (zero diagonal, off-diagonal
    sqrt(1..m)); the weights are the squared first components of the
    normalized eigenvectors, so they sum to one for the Gaussian measure.

    Returns
    -------
    nodes : ndarray, shape (m+1,), ascending, exactly symmetric
    weights : ndarray, shape (m+1,), positive, sums to 1
    """
    if m < 0:
        raise ValueError("order must be >= 0")
    if m == 0:
        return np.zeros(1), np.ones(1)
    off = np.sqrt(np.arange(1.0, m + 1))
    vals, vecs = eigh_tridiagonal(np.zeros(m + 1), off)
    order = np.argsort(vals)
    nodes = vals[order]
    weights = vecs[0, order] ** 2
    # enforce exact symmetry: the rule is invariant under y -> -y
    nodes = 0.5 * (nodes - nodes[::-1])
    if m % 2 == 0:
        nodes[m // 2] = 0.0
    weights = 0.5 * (weights + weights[::-1])
    weights = weights / weights.sum()
    return nodes, weights


class NodeFamily:
    """Order-m Gauss--Hermite grid addressed by signed index.

    Attributes
    ----------
    order : int
    indices : list of int, signed indices in ascending node order
    nodes : ndarray, nodes ascending
    weights : ndarray, Gaussian quadrature weights (sum 1)
    """

    def __init__(self, order):
        self.order = int(order)
        self.indices = signed_indices(self.order)
        self.nodes, self.weights = gauss_hermite_nodes(self.order)
        self._by_index = dict(zip(self.indices, range(len(self.indices))))

    def position(self, k):
        """Row of signed index k in the ascending node order."""
        return self._by_index[k]

    def node(self, k):
        """Node value for signed index k."""
        return float(self.nodes[self._by_index[k]])

    def weight(self, k):
        """Quadrature weight for signed index k."""
        return float(self.weights[self._by_index[k]])

    def __len__(self):
        return self.order + 1

    def __repr__(self):
        return f"NodeFamily(order={self.order})"


class HermiteBasis:
    """Evaluator for the normalized Hermite family up to a fixed degree."""

    def __init__(self, max_degree):
        if max_degree < 0:
            raise ValueError("max_degree must be >= 0")
        self.max_degree = int(max_degree)

    def eval(self, k, y):
        if not 0 <= k <= self.max_degree:
            raise ValueError(f"degree {k} outside [0, {self.max_degree}]")
        return hermite_eval(k, y)

    def eval_all(self, y):
        """Table of H_0..H_max_degree at y, shape (max_degree+1,)+y.shape."""
        return hermite_eval_all(self.max_degree, y)


def hermite_tensor_eval(s, y):
    """Product of H_{s_j}(y_j) over the entries of a sparse multi-index.

    Parameters
    ----------
    s : sequence of (coord, degree) pairs with 1-based coords, or a
        MultiIndex-like object exposing .pairs.
    y : ndarray of shape (d,) or (n, d); coordinates beyond those named in
        s contribute a factor of one.

    Returns
    -------
    float or ndarray of shape (n,).
    """
    pairs = getattr(s, "pairs", s)
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    pts = y[None, :] if single else y
    out = np.ones(pts.shape[0])
    for coord, deg in pairs:
        if coord < 1 or coord > pts.shape[1]:
            raise ValueError(f"coordinate {coord} outside sampled dims")
        out *= hermite_eval(int(deg), pts[:, coord - 1])
    return float(out[0]) if single else out
