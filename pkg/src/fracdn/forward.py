"""Forward solvers and Dirichlet-to-Neumann maps.

Nonlocal maps take exterior data supported in the measurement window W and
return ``(A^s u)`` on W.  Local maps take Dirichlet data on the outermost
layer of the region and return the discrete conormal flux there.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .errors import DataError, NumericError
from .grid import RegionMask
from .operator import SpectralOperator, fractional_matrix, stiffness_matrix

__all__ = [
    "DNSample",
    "DNDataset",
    "ExteriorSolver",
    "solve_exterior",
    "nonlocal_dn",
    "homogenized_dn",
    "nonlocal_dn_matrix",
    "neumann_stiffness",
    "solve_local",
    "local_dn",
    "local_dn_matrix",
    "gauge_source",
]


@dataclass
class DNSample:
    f: np.ndarray
    g: np.ndarray
    s: float
    tag: str = "nonlocal"

    def __post_init__(self):
        self.f = np.asarray(self.f, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        if self.f.shape != self.g.shape:
            raise DataError(f"input and output lengths differ: {self.f.shape} vs {self.g.shape}")
        if not (np.all(np.isfinite(self.f)) and np.all(np.isfinite(self.g))):
            raise DataError("DN sample has non-finite entries")
        if self.tag not in ("nonlocal", "local", "homogenized"):
            raise DataError(f"unknown DN sample tag {self.tag!r}")


@dataclass
class DNDataset:
    """Measurement set: DN samples sharing geometry, order and tag."""

    samples: list
    geometry: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    noise_level: float = 0.0

    def __post_init__(self):
        if self.samples:
            s0, t0 = self.samples[0].s, self.samples[0].tag
            n0 = self.samples[0].f.shape
            for smp in self.samples:
                if smp.s != s0 or smp.tag != t0 or smp.f.shape != n0:
                    raise DataError("DN samples in a dataset must share order, tag and size")

    @property
    def s(self) -> float:
        return self.samples[0].s

    @property
    def tag(self) -> str:
        return self.samples[0].tag

    def inputs(self) -> np.ndarray:
        return np.array([smp.f for smp in self.samples])

    def outputs(self) -> np.ndarray:
        return np.array([smp.g for smp in self.samples])

    def to_dict(self) -> dict:
        return {
            "geometry": self.geometry,
            "provenance": self.provenance,
            "noise_level": self.noise_level,
            "samples": [
                {"s": smp.s, "tag": smp.tag, "f": smp.f.tolist(), "g": smp.g.tolist()} for smp in self.samples
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "DNDataset":
        samples = [DNSample(d["f"], d["g"], d["s"], d["tag"]) for d in doc["samples"]]
        return cls(samples, doc.get("geometry", {}), doc.get("provenance", {}), doc.get("noise_level", 0.0))

    def to_json(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True, indent=2))

    @classmethod
    def from_json(cls, path) -> "DNDataset":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_csv(self, path):
        """One row per sample: tag, order, then input and output columns."""
        n = self.samples[0].f.size if self.samples else 0
        header = ["sample", "tag", "s"] + [f"f{k}" for k in range(n)] + [f"g{k}" for k in range(n)]
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(header)
            for k, smp in enumerate(self.samples):
                wr.writerow([k, smp.tag, repr(float(smp.s))] + [repr(float(x)) for x in (*smp.f, *smp.g)])

    @classmethod
    def from_csv(cls, path) -> "DNDataset":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        n = (len(rows[0]) - 3) // 2
        samples = []
        for r in rows[1:]:
            vals = [float(x) for x in r[3:]]
            samples.append(DNSample(vals[:n], vals[n:], float(r[2]), r[1]))
        return cls(samples)


class ExteriorSolver:
    """Factorised exterior problem for one operator, order and geometry.

    Caches ``A^s`` and the Cholesky factor of its region block so that many
    right-hand sides are cheap.
    """

    def __init__(self, S: SpectralOperator, s: float, regions: RegionMask, power=None):
        self.S = S
        self.s = s
        self.regions = regions
        self.P = fractional_matrix(S, s) if power is None else power
        io = regions.idx_omega
        try:
            self._chol = linalg.cho_factor(self.P[np.ix_(io, io)])
        except linalg.LinAlgError as exc:
            raise NumericError(f"region block of A^s is not positive definite: {exc}") from exc

    def solve(self, F, f) -> np.ndarray:
        """Solution equal to ``f`` off the region with ``(A^s u) = F`` on it."""
        io, ie = self.regions.idx_omega, self.regions.idx_ext
        F = _on(F, io, self.P.shape[0])
        f = _on(f, ie, self.P.shape[0])
        u = np.zeros(self.P.shape[0])
        u[ie] = f
        rhs = F - self.P[np.ix_(io, ie)] @ f
        u[io] = linalg.cho_solve(self._chol, rhs)
        return u

    def dn(self, F, f_w) -> np.ndarray:
        iw = self.regions.idx_w
        f = np.zeros(self.P.shape[0])
        f[iw] = _window(f_w, iw.size)
        u = self.solve(F, f[self.regions.idx_ext])
        return self.P[iw] @ u


def _on(x, idx, n) -> np.ndarray:
    """Accept values either on ``idx`` or as a full nodal vector vanishing elsewhere."""
    x = np.asarray(x, dtype=float)
    if x.shape == (idx.size,):
        return x
    if x.shape == (n,):
        off = np.ones(n, dtype=bool)
        off[idx] = False
        if np.any(x[off] != 0):
            raise DataError("data is not supported on the required index set")
        return x[idx]
    raise DataError(f"data of shape {x.shape} matches neither the index set ({idx.size}) nor the grid ({n})")


def _window(f_w, nw) -> np.ndarray:
    f_w = np.asarray(f_w, dtype=float)
    if f_w.shape != (nw,):
        raise DataError(f"window data must have length {nw}, got shape {f_w.shape}")
    return f_w


def _solver(S, s, regions, solver):
    if solver is not None:
        return solver
    return ExteriorSolver(S, s, regions)


def solve_exterior(S: SpectralOperator, s: float, regions: RegionMask, F, f, solver=None) -> np.ndarray:
    """Solve ``(A^s u) = F`` on the region with ``u = f`` off it.

    ``F`` is given on the region nodes (or as a full vector vanishing off
    them); ``f`` likewise on the exterior nodes.
    """
    return _solver(S, s, regions, solver).solve(F, f)


def _full_window(regions, f_w):
    iw = regions.idx_w
    n = regions.grid.n_nodes
    f_w = np.asarray(f_w, dtype=float)
    if f_w.shape == (n,):
        return _on(f_w, iw, n)
    return _window(f_w, iw.size)


def nonlocal_dn(S: SpectralOperator, s: float, regions: RegionMask, F, f_w, solver=None) -> DNSample:
    """Exterior data ``f_w`` on W to ``(A^s u_f)`` on W."""
    f_w = _full_window(regions, f_w)
    g = _solver(S, s, regions, solver).dn(F, f_w)
    return DNSample(f_w, g, s, "nonlocal")


def homogenized_dn(S: SpectralOperator, s: float, regions: RegionMask, F, f_w, solver=None) -> DNSample:
    """``Lambda(f) - Lambda(0)``: the source-free DN map."""
    sol = _solver(S, s, regions, solver)
    f_w = _full_window(regions, f_w)
    g = sol.dn(F, f_w) - sol.dn(F, np.zeros_like(f_w))
    return DNSample(f_w, g, s, "homogenized")


def nonlocal_dn_matrix(S: SpectralOperator, s: float, regions: RegionMask, solver=None) -> np.ndarray:
    """Source-free DN matrix on W, assembled column by column from indicators."""
    sol = _solver(S, s, regions, solver)
    nw = regions.idx_w.size
    zero = np.zeros(regions.idx_omega.size)
    return np.column_stack([sol.dn(zero, e) for e in np.eye(nw)])


def neumann_stiffness(A, regions: RegionMask) -> np.ndarray:
    """Stiffness of the region with every edge leaving it removed.

    Built from the off-diagonal couplings of ``A`` so that region-interior
    rows coincide with those of ``A``.
    """
    io = regions.idx_omega
    K = -np.asarray(A, dtype=float)[np.ix_(io, io)]
    np.fill_diagonal(K, 0.0)
    return np.diag(K.sum(axis=1)) - K


def _local_split(regions: RegionMask):
    io = regions.idx_omega
    ib = regions.idx_omega_boundary
    ii = regions.idx_omega_interior
    pos = {v: k for k, v in enumerate(io)}
    return np.array([pos[v] for v in ib], dtype=int), np.array([pos[v] for v in ii], dtype=int)


def solve_local(A, regions: RegionMask, F, g) -> np.ndarray:
    """Local Dirichlet problem on the region.

    ``F`` lives on the region-interior nodes, ``g`` on the outermost layer.
    Returns the solution on all region nodes (ordered as ``idx_omega``).
    """
    A = np.asarray(A, dtype=float)
    io = regions.idx_omega
    bpos, ipos = _local_split(regions)
    F = np.asarray(F, dtype=float)
    g = np.asarray(g, dtype=float)
    if F.shape != (ipos.size,) or g.shape != (bpos.size,):
        raise DataError(f"need {ipos.size} source values and {bpos.size} boundary values")
    Aoo = A[np.ix_(io, io)]
    v = np.zeros(io.size)
    v[bpos] = g
    if ipos.size:
        try:
            v[ipos] = linalg.solve(Aoo[np.ix_(ipos, ipos)], F - Aoo[np.ix_(ipos, bpos)] @ g, assume_a="pos")
        except linalg.LinAlgError as exc:
            raise NumericError(f"local Dirichlet system is singular: {exc}") from exc
    return v


def local_dn(A, regions: RegionMask, F, g) -> DNSample:
    """Boundary data to the discrete conormal flux on the outermost layer.

    The flux at a boundary node sums ``sigma_face (v_b - v_nb) / h^2`` over
    its edges inside the region, so that
    ``flux . g = v . N v - F . v_interior`` with ``N`` the region stiffness.
    """
    v = solve_local(A, regions, F, g)
    bpos, _ = _local_split(regions)
    flux = (neumann_stiffness(A, regions) @ v)[bpos]
    return DNSample(g, flux, 1.0, "local")


def local_dn_matrix(A, regions: RegionMask) -> np.ndarray:
    """Source-free local DN matrix over the indicator basis of the boundary layer."""
    bpos, ipos = _local_split(regions)
    zero = np.zeros(ipos.size)
    return np.column_stack([local_dn(A, regions, zero, e).g for e in np.eye(bpos.size)])


def gauge_source(A, regions: RegionMask, F, phi) -> np.ndarray:
    """Source of the gauge-equivalent local problem, ``F + A phi`` on the interior.

    ``phi`` must vanish off the region and on its two outermost node
    layers, so the boundary flux cannot see it.  Inputs and output are
    given on the region-interior nodes, except ``phi`` which may also be a
    full nodal vector.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    io = regions.idx_omega
    layers = regions.omega_layers()
    phi = np.asarray(phi, dtype=float)
    full = np.zeros(n)
    if phi.shape == (n,):
        full = phi.copy()
    elif phi.shape == (io.size,):
        full[io] = phi
    else:
        raise DataError(f"phi of shape {phi.shape} matches neither region nor grid")
    forbidden = np.ones(n, dtype=bool)
    forbidden[io] = False
    for layer in layers[:2]:
        forbidden[layer] = True
    if np.any(full[forbidden] != 0):
        raise DataError("phi must vanish outside the region and on its two outermost layers")
    ii = regions.idx_omega_interior
    return np.asarray(F, dtype=float) + (A @ full)[ii]
