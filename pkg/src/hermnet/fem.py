"""Piecewise-linear FEM for -(a u')' = f on (0,1) with zero boundary.

The coefficient is lognormal in the parameters, a(y, x) =
exp(sum_j y_j psi_j(x)), evaluated once per element at its midpoint
(second-order quadrature); the load uses the trapezoidal rule, which for
interior hat functions reduces to h*f(x_i).  The resulting symmetric
positive-definite tridiagonal system is solved with a banded Cholesky
factorization.  Solves at distinct parameter points are independent:
the problem object is immutable and every solve allocates its own
workspace, so caller-side parallel maps are safe.
"""

import math
import warnings

import numpy as np
from scipy.linalg import solveh_banded


def sine_family(c, alpha, dims):
    """The preset basis functions psi_j(x) = c * j^-alpha * sin(j pi x).

    alpha > 1 keeps sum_j ||psi_j||_inf finite; the matching weight
    sequence grows like j^(alpha - 1 - eps).
    """
    if alpha <= 1.0:
        raise ValueError("alpha must exceed 1 for a summable family")
    if dims < 0:
        raise ValueError("dims must be >= 0")

    def make(j):
        amp = c * float(j) ** -alpha

        def psi(x):
            return amp * np.sin(j * math.pi * np.asarray(x, dtype=float))

        return psi

    return [make(j) for j in range(1, dims + 1)]


class LognormalProblem:
    """Immutable problem description: mesh, right-hand side, basis.

    mesh_n interior nodes on (0,1), so h = 1/(mesh_n+1) and mesh_n+1
    elements.  `f` is a callable or the preset "one"; `psi` is a list of
    callables on [0,1], or `psi_table` gives their values directly at
    the element midpoints as an array of shape (J, mesh_n+1).
    `active_dims` truncates the expansion to its first J terms.
    """

    def __init__(self, mesh_n, f="one", psi=(), active_dims=None,
                 psi_table=None):
        if mesh_n < 3:
            raise ValueError("mesh_n must be >= 3")
        self.mesh_n = int(mesh_n)
        self.h = 1.0 / (self.mesh_n + 1)
        if f == "one":
            self.f = lambda x: np.ones_like(np.asarray(x, dtype=float))
        elif callable(f):
            self.f = f
        else:
            raise ValueError(f"unknown right-hand side preset {f!r}")
        if psi_table is not None:
            table = np.asarray(psi_table, dtype=float)
            if table.ndim != 2 or table.shape[1] != self.mesh_n + 1:
                raise ValueError(
                    "psi_table needs shape (J, mesh_n+1): one row of "
                    "element-midpoint values per basis function")
            self._psi_mid = table
            self.psi = None
        else:
            self.psi = list(psi)
            self._psi_mid = None
        n_terms = (self._psi_mid.shape[0] if self._psi_mid is not None
                   else len(self.psi))
        self.active_dims = n_terms if active_dims is None else int(active_dims)
        if self.active_dims < 0:
            raise ValueError("active_dims must be >= 0")
        self.active_dims = min(self.active_dims, n_terms)

    @property
    def nodes(self):
        """All mesh nodes including the boundary, length mesh_n+2."""
        return np.linspace(0.0, 1.0, self.mesh_n + 2)

    @property
    def interior(self):
        return self.nodes[1:-1]

    @property
    def midpoints(self):
        """Element midpoints, length mesh_n+1."""
        return (np.arange(self.mesh_n + 1) + 0.5) * self.h

    def psi_matrix(self):
        """(active_dims, n_elements) values of psi_j at the midpoints."""
        if self._psi_mid is not None:
            return self._psi_mid[: self.active_dims]
        if not hasattr(self, "_psi_cache"):
            xm = self.midpoints
            rows = [np.asarray(p(xm), dtype=float) for p in self.psi]
            cache = (np.stack(rows) if rows
                     else np.zeros((0, self.mesh_n + 1)))
            object.__setattr__(self, "_psi_cache", cache)
        return self._psi_cache[: self.active_dims]

    def load_vector(self):
        """Trapezoidal load: F_i = h * f(x_i) at the interior nodes."""
        if not hasattr(self, "_load_cache"):
            object.__setattr__(
                self, "_load_cache",
                self.h * np.asarray(self.f(self.interior), dtype=float))
        return self._load_cache


def _dense_point(y_point, dims):
    """Accept a dense vector or sparse ((coord, value), ...) pairs."""
    if isinstance(y_point, dict):
        items = y_point.items()
    else:
        seq = list(y_point) if not isinstance(y_point, np.ndarray) else y_point
        if len(seq) and np.ndim(seq[0]) > 0:
            items = [(int(j), float(v)) for j, v in seq]
        else:
            return np.asarray(seq, dtype=float)[:dims]
    out = np.zeros(dims)
    for j, v in items:
        if j < 1:
            raise ValueError("coordinates are 1-based")
        if j <= dims:
            out[j - 1] = float(v)
    return out


def assemble_coefficient(problem, y_point):
    """a(y, x) = exp(sum_{j<=J} y_j psi_j(x)) at the element midpoints.

    Values are clamped into [1e-300, 1e300] with a RuntimeWarning:
    anything outside would overflow or make the stiffness matrix
    singular, and under the Gaussian measure at the scales used here the
    clamp never activates.
    """
    psi = problem.psi_matrix()
    y = _dense_point(y_point, problem.active_dims)
    if not np.all(np.isfinite(y)):
        raise ValueError("parameter point has non-finite entries")
    b = np.zeros(problem.mesh_n + 1)
    for j in range(len(y)):
        if y[j] != 0.0:
            b += y[j] * psi[j]
    with np.errstate(over="ignore"):
        a = np.exp(b)
    clipped = np.clip(a, 1e-300, 1e300)
    if not np.array_equal(a, clipped):
        warnings.warn("lognormal coefficient clamped at 1e+/-300",
                      RuntimeWarning, stacklevel=2)
    return clipped


class FemSolution:
    """Nodal values over the full mesh; boundary entries exactly 0."""

    def __init__(self, values, h):
        self.values = np.asarray(values, dtype=float)
        self.h = float(h)
        self._norm = None

    @property
    def interior(self):
        return self.values[1:-1]

    @property
    def energy_norm(self):
        if self._norm is None:
            self._norm = solution_norm(self)
        return self._norm


def fem_solve(problem, y_point):
    """Galerkin solution at one parameter point.

    Stiffness entries from midpoint quadrature: the diagonal couples the
    two elements around a node, (a_i + a_{i+1})/h, off-diagonal
    -a_{i+1}/h; the system is SPD tridiagonal for any positive a.
    """
    a = assemble_coefficient(problem, y_point)
    n = problem.mesh_n
    ab = np.zeros((2, n))
    ab[1] = (a[:-1] + a[1:]) / problem.h
    ab[0, 1:] = -a[1:-1] / problem.h
    u = solveh_banded(ab, problem.load_vector(), lower=False)
    full = np.zeros(n + 2)
    full[1:-1] = u
    return FemSolution(full, problem.h)


def solution_norm(u, h=None):
    """Discrete H^1_0 seminorm sqrt(sum_e (du/h)^2 h) = sqrt(sum du^2/h).

    `u` is a FemSolution, or a full nodal vector (boundary included)
    with the mesh width passed as `h`.
    """
    if isinstance(u, FemSolution):
        values, h = u.values, u.h
    else:
        if h is None:
            raise ValueError("pass h when giving raw nodal values")
        values = np.asarray(u, dtype=float)
    d = np.diff(values)
    return math.sqrt(float(d @ d) / h)
