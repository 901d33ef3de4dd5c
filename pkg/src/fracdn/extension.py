"""Degenerate elliptic extension of the fractional operator.

For the discrete operator ``A = V diag(lam) V^T`` the extension problem
separates over eigenmodes: ``u~(., y) = sum_k c_k psi_s(sqrt(lam_k) y) phi_k``
with ``c = V^T u`` and ``psi_s`` the decaying solution of
``psi'' + (1 - 2s)/z psi' - psi = 0`` normalised by ``psi_s(0) = 1``.
The solution is exact in ``y``; no half-space mesh is involved.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special

from .errors import NumericError, ParameterError
from .grid import RegionMask
from .operator import SpectralOperator, _check_power

__all__ = [
    "ExtensionSolution",
    "DecayReport",
    "extension_profile",
    "extension_profile_derivative",
    "trace_coefficient",
    "d_s_constant",
    "d_s_closed_form",
    "solve_extension",
    "neumann_trace",
    "neumann_trace_limit",
    "reduce_to_local",
    "check_decay",
]


def _profile_scale(s: float) -> float:
    return 2.0 ** (1.0 - s) / special.gamma(s)


def extension_profile(s: float, z):
    """``psi_s(z) = 2^{1-s}/Gamma(s) z^s K_s(z)``, with ``psi_s(0) = 1``."""
    _check_power(s, allow_one=False)
    z = np.asarray(z, dtype=float)
    if np.any(z < 0):
        raise ParameterError("profile argument must be non-negative")
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        zz = np.where(z > 0, z, 1.0)
        val = _profile_scale(s) * zz**s * special.kve(s, zz) * np.exp(-zz)
    val = np.where(z > 0, val, 1.0)
    val = np.where(np.isfinite(val), val, 0.0)
    return float(val) if val.ndim == 0 else val


def extension_profile_derivative(s: float, z):
    """``psi_s'(z) = -2^{1-s}/Gamma(s) z^s K_{1-s}(z)``."""
    _check_power(s, allow_one=False)
    z = np.asarray(z, dtype=float)
    if np.any(z <= 0):
        raise ParameterError("profile derivative needs a positive argument")
    with np.errstate(under="ignore"):
        val = -_profile_scale(s) * z**s * special.kve(1.0 - s, z) * np.exp(-z)
    return float(val) if val.ndim == 0 else val


def trace_coefficient(s: float) -> float:
    """``-2s`` times the ``z^{2s}`` coefficient of ``psi_s`` at the origin."""
    _check_power(s, allow_one=False)
    a = 2.0 ** (-2.0 * s) * (-special.gamma(1.0 - s) / s) / special.gamma(s)
    return -2.0 * s * a


def d_s_closed_form(s: float) -> float:
    """``2^{1-2s} Gamma(1-s) / Gamma(s)``; diagnostic only."""
    return 2.0 ** (1.0 - 2.0 * s) * special.gamma(1.0 - s) / special.gamma(s)


def d_s_constant(s: float, tol: float = 1e-12) -> float:
    """Weighted profile mass ``m_s = int_0^inf z^{1-2s} psi_s(z) dz``.

    This is the constant relating the weighted Neumann trace of the
    extension to ``A^s``, obtained by quadrature.
    """
    _check_power(s, allow_one=False)
    f = lambda z: extension_profile(s, z)  # noqa: E731
    head, e1 = integrate.quad(f, 0.0, 1.0, weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=0.0, epsrel=tol, limit=200)
    tail, e2 = integrate.quad(lambda z: z ** (1.0 - 2.0 * s) * f(z), 1.0, np.inf, epsabs=0.0, epsrel=tol, limit=200)
    m = head + tail
    if (e1 + e2) > 1e-9 * abs(m):
        raise NumericError(f"profile mass quadrature reached only {(e1 + e2) / abs(m):.3g}", {"m_s": m})
    return m


@dataclass(frozen=True)
class ExtensionSolution:
    """Modal representation of the extension of ``u``."""

    coeffs: np.ndarray
    s: float
    S: SpectralOperator = field(repr=False)

    def modal(self, weights) -> np.ndarray:
        """``sum_k weights_k c_k phi_k``; columns of ``u`` are handled alike."""
        c = self.coeffs
        w = weights if c.ndim == 1 else weights[:, None]
        return self.S.eigenvectors @ (w * c)

    def evaluate(self, y: float) -> np.ndarray:
        """``u~(., y)`` at every node."""
        if y < 0:
            raise ParameterError("height must be non-negative")
        z = np.sqrt(self.S.eigenvalues) * y
        return self.modal(extension_profile(self.s, z))

    def evaluate_dy(self, y: float) -> np.ndarray:
        """``d u~ / dy`` at height ``y > 0``."""
        r = np.sqrt(self.S.eigenvalues)
        return self.modal(r * extension_profile_derivative(self.s, r * y))

    def weighted_flux(self, y: float) -> np.ndarray:
        """``-y^{1-2s} d u~ / dy`` at height ``y > 0``."""
        return -(y ** (1.0 - 2.0 * self.s)) * self.evaluate_dy(y)


def solve_extension(S: SpectralOperator, s: float, u) -> ExtensionSolution:
    _check_power(s, allow_one=False)
    c = S.eigenvectors.T @ np.asarray(u, dtype=float)
    c.setflags(write=False)
    return ExtensionSolution(c, s, S)


def neumann_trace(ext: ExtensionSolution) -> np.ndarray:
    """``-lim_{y->0} y^{1-2s} d_y u~`` from the small-z expansion of the profile."""
    return trace_coefficient(ext.s) * ext.modal(ext.S.eigenvalues**ext.s)


def neumann_trace_limit(ext: ExtensionSolution, y0: float | None = None, ratio: float = 0.5, n_points: int = 7, rtol: float = 1e-7):
    """Numerical limit of the weighted flux on a shrinking height ladder.

    The flux behaves like ``T + sum_j b_j y^{p_j}`` with exponents
    ``2 - 2s, 2, 4 - 2s, 4, ...``; generalised Richardson extrapolation
    removes them.  Two extrapolants from overlapping ladders are compared
    and a :class:`NumericError` is raised if they disagree beyond ``rtol``.

    Returns ``(trace, diagnostics)``.
    """
    s = ext.s
    if y0 is None:
        y0 = 1e-2 / math.sqrt(ext.S.eigenvalues[-1])
    ys = y0 * ratio ** np.arange(n_points)
    flux = np.array([ext.weighted_flux(y) for y in ys])
    exps = sorted({2.0 * k - 2.0 * s for k in range(1, n_points)} | {2.0 * k for k in range(1, n_points)})
    m = n_points - 1

    def extrap(sl):
        yy = ys[sl]
        X = np.column_stack([np.ones_like(yy)] + [yy**p for p in exps[: m - 1]])
        rhs = flux[sl].reshape(len(yy), -1)
        return np.linalg.solve(X, rhs)[0].reshape(flux.shape[1:])

    a = extrap(slice(0, m))
    b = extrap(slice(1, m + 1))
    scale = max(np.abs(b).max(), 1e-300)
    spread = float(np.abs(a - b).max() / scale)
    diag = {"heights": ys.tolist(), "spread": spread}
    if spread > rtol:
        raise NumericError(f"weighted flux extrapolation did not settle (spread {spread:.3g})", diag)
    return b, diag


def reduce_to_local(ext: ExtensionSolution, method: str = "closed", m_s: float | None = None) -> np.ndarray:
    """``v = int_0^inf y^{1-2s} u~(., y) dy``.

    ``method="closed"`` sums ``c_k m_s lam_k^{s-1} phi_k``; ``"quadrature"``
    integrates the extension in ``y`` directly.
    """
    s = ext.s
    lam = ext.S.eigenvalues
    if method == "closed":
        if m_s is None:
            m_s = d_s_constant(s)
        return ext.modal(m_s * lam ** (s - 1.0))
    if method != "quadrature":
        raise ParameterError(f"unknown reduction method {method!r}")
    r = np.sqrt(lam)

    def modal(y):
        return y ** (1.0 - 2.0 * s) * extension_profile(s, r * y)

    # split at the slowest mode's scale; algebraic weight at the origin
    y1 = 1.0 / r[0]
    head = np.zeros_like(lam)
    for k in range(lam.size):
        head[k], _ = integrate.quad(
            lambda y: extension_profile(s, r[k] * y), 0.0, y1, weight="alg", wvar=(1.0 - 2.0 * s, 0.0), epsabs=0.0, epsrel=1e-12, limit=200
        )
    tail, err, info = integrate.quad_vec(modal, y1, np.inf, epsabs=0.0, epsrel=1e-12, full_output=True)
    if not info.success:
        raise NumericError("y-quadrature of the extension failed", {"error": err})
    return ext.modal(head + tail)


@dataclass
class DecayReport:
    heights: np.ndarray
    sup_norm: np.ndarray
    r_norm: np.ndarray
    l2_norm: np.ndarray
    grad_sup_norm: np.ndarray
    grad_r_norm: np.ndarray
    ratio_sup: np.ndarray
    ratio_grad_sup: np.ndarray
    ratio_r: np.ndarray
    ratio_grad_r: np.ndarray
    fitted: dict
    tail_rate: float
    exponents: dict

    def all_finite(self) -> bool:
        arrs = (self.ratio_sup, self.ratio_grad_sup, self.ratio_r, self.ratio_grad_r)
        return all(np.all(np.isfinite(a)) for a in arrs)

    def l2_nonincreasing(self, rtol: float = 1e-12) -> bool:
        d = np.diff(self.l2_norm)
        return bool(np.all(d <= rtol * self.l2_norm[:-1] + 1e-300))

    def rows(self):
        cols = self.columns()
        return [dict(zip(cols, vals)) for vals in zip(*(self._col(c) for c in cols))]

    def columns(self):
        return [
            "y", "sup_norm", "r_norm", "l2_norm", "grad_sup_norm", "grad_r_norm",
            "ratio_sup", "ratio_grad_sup", "ratio_r", "ratio_grad_r",
            "C_sup", "C_grad_sup", "C_r", "C_grad_r",
        ]  # fmt: skip

    def _col(self, name):
        if name == "y":
            return self.heights
        if name.startswith("C_"):
            return np.full(self.heights.size, self.fitted[name])
        return getattr(self, name)

    def to_csv(self, path):
        cols = self.columns()
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(cols)
            for vals in zip(*(self._col(c) for c in cols)):
                wr.writerow([repr(float(v)) for v in vals])


def _lnorm(v, p, cell):
    if np.isinf(p):
        return float(np.abs(v).max(initial=0.0))
    return float((cell * np.sum(np.abs(v) ** p)) ** (1.0 / p))


def _grad_x(grid, v):
    """Forward differences along every axis, zero beyond the box wall."""
    arr = v.reshape(grid.shape)
    comps = []
    for ax in range(grid.dim):
        pad = [(0, 0)] * grid.dim
        pad[ax] = (0, 1)
        comps.append(np.diff(np.pad(arr, pad), axis=ax).ravel() / grid.h)
    return np.stack(comps, axis=1)


def check_decay(ext: ExtensionSolution, u, heights, p: float = 2.0, q: float = 2.0, r: float = np.inf, regions: RegionMask | None = None) -> DecayReport:
    """Measure the extension's decay in ``y`` against the polynomial bounds.

    For every height the sup norm and grid ``L^r`` norm of ``u~(., y)`` and
    of its full gradient are divided by ``y^{-n} ||u||_1`` (pointwise
    bounds, gradient with one more power) and by ``y^{n/p - n} ||u||_q``
    (Young-type bounds).  The fitted constants are the largest ratios.
    """
    grid = ext.S.grid
    if grid is None:
        raise ParameterError("extension needs an operator built on a grid")
    inv = lambda x: 0.0 if np.isinf(x) else 1.0 / x  # noqa: E731
    for name, x in (("p", p), ("q", q), ("r", r)):
        if not 1.0 <= x <= np.inf:
            raise ParameterError(f"{name} must lie in [1, inf], got {x}")
    if abs(1.0 + inv(r) - inv(p) - inv(q)) > 1e-12:
        raise ParameterError(f"exponents violate 1 + 1/r = 1/p + 1/q (p={p}, q={q}, r={r})")
    u = np.asarray(u, dtype=float)
    if regions is not None:
        allowed = np.zeros(u.size, dtype=bool)
        allowed[regions.idx_omega] = True
        allowed[regions.idx_w] = True
        if np.any(u[~allowed] != 0):
            raise ParameterError("u must be supported in the region and the window")
    n = grid.dim
    cell = grid.h**n
    ys = np.asarray(heights, dtype=float)
    u1 = _lnorm(u, 1.0, cell)
    uq = _lnorm(u, q, cell)

    sup, rn, l2, gsup, grn = (np.zeros(ys.size) for _ in range(5))
    for k, y in enumerate(ys):
        val = ext.evaluate(y)
        grad = np.column_stack([_grad_x(grid, val), ext.evaluate_dy(y)])
        gmag = np.linalg.norm(grad, axis=1)
        sup[k] = _lnorm(val, np.inf, cell)
        rn[k] = _lnorm(val, r, cell)
        l2[k] = _lnorm(val, 2.0, cell)
        gsup[k] = _lnorm(gmag, np.inf, cell)
        grn[k] = _lnorm(gmag, r, cell)

    def ratio(num, base, power):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = num / (base * ys**power)
        return np.where(num == 0, 0.0, out)

    e_b = n * inv(p) - n
    ratios = {
        "ratio_sup": ratio(sup, u1, -n),
        "ratio_grad_sup": ratio(gsup, u1, -n - 1),
        "ratio_r": ratio(rn, uq, e_b),
        "ratio_grad_r": ratio(grn, uq, e_b - 1),
    }
    fitted = {"C" + k[5:]: float(np.max(v)) if v.size else 0.0 for k, v in ratios.items()}
    tail_rate = float("nan")
    if ys.size >= 2 and l2[-1] > 0 and l2[-2] > 0:
        tail_rate = float(-(math.log(l2[-1]) - math.log(l2[-2])) / (ys[-1] - ys[-2]))
    return DecayReport(
        ys, sup, rn, l2, gsup, grn, fitted=fitted, tail_rate=tail_rate,
        exponents={"p": p, "q": q, "r": r, "pointwise": -n, "young": e_b}, **ratios,
    )  # fmt: skip
