"""Discrete conductivity operator and its spectral calculus.

``A`` is the conservative finite-difference discretisation of
``-div(sigma grad .)`` on the interior nodes of a :class:`~fracdn.grid.Grid`
with homogeneous Dirichlet data on the box boundary.  Its dense symmetric
eigendecomposition is the single representation from which fractional
powers, the heat semigroup and the jump kernel are derived.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, linalg, special

from .errors import DataError, NumericError, ParameterError
from .grid import Grid, RegionMask

__all__ = [
    "Conductivity",
    "SpectralOperator",
    "make_conductivity",
    "edge_weights",
    "stiffness_matrix",
    "assemble_operator",
    "stiffness_derivative",
    "spectral_decompose",
    "gamma_neg",
    "fractional_apply",
    "fractional_matrix",
    "heat_apply",
    "heat_matrix",
    "kernel_entry",
    "kernel_row",
    "kernel_matrix",
    "fit_kernel_exponent",
    "dirichlet_form",
    "dirichlet_form_kernel",
    "frechet_fractional",
]


@dataclass(frozen=True)
class Conductivity:
    """Nodal conductivity with its ellipticity constant."""

    sigma: np.ndarray
    lam: float = 0.1

    def __post_init__(self):
        sig = np.array(self.sigma, dtype=float)
        if not 0.0 < self.lam < 1.0:
            raise DataError(f"ellipticity constant must lie in (0, 1), got {self.lam}")
        if not np.all(np.isfinite(sig)):
            raise DataError("conductivity has non-finite entries")
        lo, hi = sig.min(), sig.max()
        if lo < self.lam or hi > 1.0 / self.lam:
            raise DataError(
                f"conductivity range [{lo:.4g}, {hi:.4g}] violates ellipticity "
                f"[{self.lam:.4g}, {1 / self.lam:.4g}]"
            )
        sig.setflags(write=False)
        object.__setattr__(self, "sigma", sig)

    def check_exterior(self, regions: RegionMask, atol: float = 0.0):
        """Raise unless the conductivity equals one at every exterior node."""
        dev = np.abs(self.sigma[regions.idx_ext] - 1.0)
        if dev.size and dev.max() > atol:
            raise DataError(f"conductivity differs from 1 outside the region by {dev.max():.3g}")


def make_conductivity(grid: Grid, regions: RegionMask, values, lam: float = 0.1) -> Conductivity:
    """Conductivity equal to ``values`` on the region and to one elsewhere.

    ``values`` is either a full nodal array or a callable evaluated at the
    node coordinates; entries outside the region are overwritten with one.
    """
    if callable(values):
        vals = np.array([float(np.squeeze(values(x))) for x in grid.coords])
    else:
        vals = np.array(values, dtype=float).ravel()
    sig = np.ones(grid.n_nodes)
    sig[regions.idx_omega] = vals[regions.idx_omega]
    return Conductivity(sig, lam)


def edge_weights(grid: Grid, sigma: np.ndarray):
    """Return ``(pairs, weights, wall)`` of the flux stencil.

    ``weights[e]`` is the harmonic mean of sigma over edge ``pairs[e]``
    divided by ``h**2``.  ``wall[i]`` counts how many of node ``i``'s
    neighbours sit on the box boundary; such an edge carries ``sigma[i]``.
    """
    sigma = np.asarray(sigma, dtype=float)
    pairs = grid.neighbours()
    a, b = sigma[pairs[:, 0]], sigma[pairs[:, 1]]
    w = 2.0 * a * b / (a + b) / grid.h**2
    ks = np.stack(grid.multi_index(np.arange(grid.n_nodes)), axis=1)
    wall = np.sum(ks == 0, axis=1) + np.sum(ks == grid.nodes_per_axis - 1, axis=1)
    return pairs, w, wall


def _assemble(n: int, pairs, w, diag_extra) -> np.ndarray:
    A = np.zeros((n, n))
    i, j = pairs[:, 0], pairs[:, 1]
    A[i, j] -= w
    A[j, i] -= w
    np.add.at(A, (i, i), w)
    np.add.at(A, (j, j), w)
    A[np.diag_indices(n)] += diag_extra
    return A


def stiffness_matrix(grid: Grid, sigma) -> np.ndarray:
    """Dense stiffness matrix of ``-div(sigma grad .)``; no ellipticity checks."""
    sigma = np.asarray(sigma, dtype=float)
    pairs, w, wall = edge_weights(grid, sigma)
    return _assemble(grid.n_nodes, pairs, w, wall * sigma / grid.h**2)


def assemble_operator(grid: Grid, conductivity: Conductivity, regions: RegionMask | None = None) -> np.ndarray:
    """Symmetric positive definite matrix of the conductivity operator.

    When ``regions`` is given the conductivity must also equal one on the
    exterior nodes.
    """
    if regions is not None:
        conductivity.check_exterior(regions)
    if conductivity.sigma.shape != (grid.n_nodes,):
        raise DataError("conductivity does not match the grid")
    return stiffness_matrix(grid, conductivity.sigma)


def stiffness_derivative(grid: Grid, sigma, node: int) -> np.ndarray:
    """Partial derivative of the stiffness matrix with respect to ``sigma[node]``."""
    sigma = np.asarray(sigma, dtype=float)
    pairs, _, wall = edge_weights(grid, sigma)
    touch = (pairs[:, 0] == node) | (pairs[:, 1] == node)
    p = pairs[touch]
    other = np.where(p[:, 0] == node, p[:, 1], p[:, 0])
    a, b = sigma[node], sigma[other]
    dw = 2.0 * b**2 / (a + b) ** 2 / grid.h**2
    extra = np.zeros(grid.n_nodes)
    extra[node] = wall[node] / grid.h**2
    return _assemble(grid.n_nodes, p, dw, extra)


@dataclass(frozen=True)
class SpectralOperator:
    """Eigendecomposition ``A = V diag(eigenvalues) V^T``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    matrix: np.ndarray = field(repr=False)
    grid: Grid | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.eigenvalues.size

    def function(self, values) -> np.ndarray:
        """Dense matrix ``V diag(values) V^T``."""
        V = self.eigenvectors
        return (V * values) @ V.T

    def apply(self, values, u) -> np.ndarray:
        V = self.eigenvectors
        return V @ (values * (V.T @ np.asarray(u, dtype=float)))


def spectral_decompose(A, grid: Grid | None = None) -> SpectralOperator:
    """Symmetric eigendecomposition with ascending positive eigenvalues."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DataError(f"expected a square matrix, got shape {A.shape}")
    asym = np.abs(A - A.T).max()
    if asym > 1e-12 * max(np.abs(A).max(), 1.0):
        raise DataError(f"matrix is not symmetric (max deviation {asym:.3g})")
    A = 0.5 * (A + A.T)
    try:
        lam, V = linalg.eigh(A)
    except linalg.LinAlgError as exc:
        raise NumericError(f"symmetric eigensolver failed: {exc}") from exc
    if lam[0] <= 0:
        raise NumericError(f"operator is not positive definite (smallest eigenvalue {lam[0]:.3g})")
    for arr in (lam, V, A):
        arr.setflags(write=False)
    return SpectralOperator(lam, V, A, grid)


def _check_power(s: float, allow_one: bool = True):
    ok = 0.0 < s <= 1.0 if allow_one else 0.0 < s < 1.0
    if not ok:
        interval = "(0, 1]" if allow_one else "(0, 1)"
        raise ParameterError(f"fractional order must lie in {interval}, got {s}")


def gamma_neg(s: float) -> float:
    """``Gamma(-s)`` through ``-Gamma(1 - s) / s``."""
    return -special.gamma(1.0 - s) / s


def fractional_apply(S: SpectralOperator, s: float, u) -> np.ndarray:
    _check_power(s)
    return S.apply(S.eigenvalues**s, u)


def fractional_matrix(S: SpectralOperator, s: float) -> np.ndarray:
    """Dense symmetric ``A^s``."""
    _check_power(s)
    P = S.function(S.eigenvalues**s)
    return 0.5 * (P + P.T)


def heat_apply(S: SpectralOperator, t: float, u) -> np.ndarray:
    if t < 0:
        raise ParameterError(f"heat time must be non-negative, got {t}")
    if t == 0:
        return np.array(u, dtype=float)
    return S.apply(np.exp(-t * S.eigenvalues), u)


def heat_matrix(S: SpectralOperator, t: float) -> np.ndarray:
    if t < 0:
        raise ParameterError(f"heat time must be non-negative, got {t}")
    return S.function(np.exp(-t * S.eigenvalues))


def _short_time_part(S: SpectralOperator, s: float, i: int, t_split: float, j=None):
    """Integral of the heat entries over ``(0, t_split)`` against ``t^{-1-s}``.

    The exponential series of ``exp(-tA)`` is integrated term by term.  Its
    zeroth term only touches the diagonal, so the result is exact for the
    off-diagonal entries once ``t_split * ||A|| <= 1/2``.
    """
    B = t_split * S.matrix
    row = np.zeros(S.n)
    row[i] = 1.0
    total = np.zeros(S.n)
    fact = 1.0
    m = 0
    while True:
        m += 1
        fact *= m
        row = row @ B
        total += (-1.0) ** m * row / (fact * (m - s))
        if 0.5**m / fact < 1e-20:
            break
    total *= t_split ** (-s)
    return total if j is None else total[j]


def _kernel_long_time(S: SpectralOperator, s: float, i: int, j: int, t_split: float, short: float, rtol: float):
    lam = S.eigenvalues
    wk = S.eigenvectors[i] * S.eigenvectors[j]

    def integrand(tau):
        t = math.exp(tau)
        return math.exp(-s * tau) * float(wk @ np.exp(-t * lam))

    total_w = float(np.abs(wk).sum())
    t_max = 40.0 / lam[0]
    tau_lo, tau_hi = math.log(t_split), math.log(t_max)
    value, err = short, 0.0
    tail = float("nan")
    for _ in range(60):
        val, e = integrate.quad(integrand, tau_lo, tau_hi, epsabs=0.0, epsrel=rtol, limit=400)
        value += val
        err += e
        # |tail| <= sum|w_k| e^{-t lam_1} t^{-1-s} / lam_1 beyond t_max
        tail = total_w * math.exp(-t_max * lam[0]) * t_max ** (-1.0 - s) / lam[0]
        if tail <= 1e-10 * abs(value):
            break
        tau_lo, t_max = tau_hi, 2.0 * t_max
        tau_hi = math.log(t_max)
    achieved = err / abs(value) if value != 0 else float("inf")
    diag = {"t_min": t_split, "t_max": t_max, "abs_error": err, "rel_error": achieved, "tail_bound": tail}
    if not achieved <= max(100 * rtol, 1e-8):
        raise NumericError(f"kernel quadrature for ({i}, {j}) reached only {achieved:.3g}", diag)
    return -value / gamma_neg(s), diag


def kernel_entry(S: SpectralOperator, s: float, i: int, j: int, rtol: float = 1e-10, full_output: bool = False):
    """Jump kernel entry from the heat semigroup.

    Evaluates ``-(1/Gamma(-s)) int_0^inf (e^{-tA})_{ij} t^{-1-s} dt``.  The
    short-time part is integrated exactly through the exponential series;
    the rest uses adaptive quadrature in ``tau = log t`` up to a cut-off
    whose neglected tail is below ``1e-10`` of the accumulated value.  The
    result is positive and equals ``-(A^s)_{ij}``.

    With ``full_output=True`` a dict of diagnostics is returned as well.
    """
    _check_power(s, allow_one=False)
    if i == j:
        raise ParameterError("kernel formula only holds off the diagonal")
    t_split = 0.5 / S.eigenvalues[-1]
    short = _short_time_part(S, s, i, t_split, j)
    K, diag = _kernel_long_time(S, s, i, j, t_split, short, rtol)
    return (K, diag) if full_output else K


def kernel_row(S: SpectralOperator, s: float, i: int, columns=None, rtol: float = 1e-10) -> np.ndarray:
    """Quadrature kernel between node ``i`` and ``columns`` (default: all others)."""
    _check_power(s, allow_one=False)
    cols = [j for j in range(S.n) if j != i] if columns is None else list(columns)
    if i in cols:
        raise ParameterError("kernel formula only holds off the diagonal")
    t_split = 0.5 / S.eigenvalues[-1]
    short = _short_time_part(S, s, i, t_split)
    return np.array([_kernel_long_time(S, s, i, j, t_split, short[j], rtol)[0] for j in cols])


def kernel_matrix(S: SpectralOperator, s: float, rtol: float = 1e-10) -> np.ndarray:
    """Quadrature kernel for every off-diagonal entry; zero diagonal."""
    K = np.zeros((S.n, S.n))
    for i in range(S.n - 1):
        cols = np.arange(i + 1, S.n)
        K[i, cols] = kernel_row(S, s, i, cols, rtol)
    return K + K.T


def fit_kernel_exponent(S: SpectralOperator, s: float, center=None, kernel: str = "quadrature"):
    """Log-log slope of the kernel against distance from one node.

    Distances are measured from ``center`` (default: the node nearest the
    origin) and the fit uses the middle third of their range on a log
    scale, which keeps clear of both the grid scale and the box wall.

    Returns ``(slope, expected)`` with ``expected = -(dim + 2s)``.
    """
    grid = S.grid
    if grid is None:
        raise ParameterError("exponent fit needs an operator built on a grid")
    c = grid.nearest_node(np.zeros(grid.dim)) if center is None else int(center)
    X = grid.coords
    d = np.linalg.norm(X - X[c], axis=1)
    lo, hi = np.log(d[d > 0].min()), np.log(d.max())
    sel = (d > 0) & (np.log(np.where(d > 0, d, 1.0)) >= lo + (hi - lo) / 3) & (np.log(np.where(d > 0, d, 1.0)) <= lo + 2 * (hi - lo) / 3)
    cols = np.flatnonzero(sel)
    if kernel == "quadrature":
        K = kernel_row(S, s, c, cols)
    elif kernel == "spectral":
        K = -fractional_matrix(S, s)[c, cols]
    else:
        raise ParameterError(f"unknown kernel route {kernel!r}")
    slope = float(np.polyfit(np.log(d[cols]), np.log(K), 1)[0])
    return slope, -(grid.dim + 2.0 * s)


def dirichlet_form(S: SpectralOperator, s: float, u, w) -> float:
    """``B(u, w) = u . A^s w``."""
    _check_power(s, allow_one=False)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(u @ fractional_apply(S, s, w))


def dirichlet_form_kernel(S: SpectralOperator, s: float, u, w, kernel=None) -> float:
    """Same form through jump differences weighted by the kernel.

    ``(1/2) sum_{i != j} (u_i - u_j)(w_i - w_j) K_ij + sum_i r_i u_i w_i`` with
    ``r`` the row sums of ``A^s``.  ``kernel`` defaults to ``-(A^s)`` off the
    diagonal; pass the quadrature kernel for an independent evaluation.
    """
    _check_power(s, allow_one=False)
    u = np.asarray(u, dtype=float)
    w = np.asarray(w, dtype=float)
    P = fractional_matrix(S, s)
    K = -P if kernel is None else np.asarray(kernel, dtype=float)
    K = K.copy()
    np.fill_diagonal(K, 0.0)
    du = u[:, None] - u[None, :]
    dw = w[:, None] - w[None, :]
    r = P.sum(axis=1)
    return float(0.5 * np.sum(du * dw * K) + np.sum(r * u * w))


def frechet_fractional(S: SpectralOperator, s: float, dA) -> np.ndarray:
    """Directional derivative of ``A -> A^s`` at ``A`` along symmetric ``dA``.

    Uses the first divided differences of ``x -> x^s`` on the spectrum
    (Daleckii-Krein formula).
    """
    _check_power(s)
    dA = np.asarray(dA, dtype=float)
    lam = S.eigenvalues
    V = S.eigenvectors
    ls = lam**s
    diff = lam[:, None] - lam[None, :]
    near = np.abs(diff) < 1e-10 * np.maximum(lam[:, None], lam[None, :])
    safe = np.where(near, 1.0, diff)
    phi = np.where(near, 0.0, (ls[:, None] - ls[None, :]) / safe)
    # near-degenerate pairs: derivative at the mean eigenvalue
    mean = 0.5 * (lam[:, None] + lam[None, :])
    phi = np.where(near, s * mean ** (s - 1.0), phi)
    D = V @ (phi * (V.T @ dA @ V)) @ V.T
    return 0.5 * (D + D.T)
