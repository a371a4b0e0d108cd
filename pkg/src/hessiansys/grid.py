"""Box grids, discrete fields with implicit zero boundary, and discrete norms.

Fields store interior node values only; the homogeneous Dirichlet condition
enters through implicit zeros one spacing outside the stored array.  Second
derivatives use the standard central stencils (3-point pure, 4-point cross
for mixed), which keeps the minor symmetry of the discrete Hessian exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DimensionMismatchError


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box with m interior grid points per axis."""

    lower: tuple
    upper: tuple
    m: int

    def __post_init__(self):
        lower = tuple(float(v) for v in self.lower)
        upper = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        if len(lower) != len(upper):
            raise DimensionMismatchError("lower and upper must have equal length")
        if self.n not in (2, 3):
            raise DimensionMismatchError(f"grid solver supports n in {{2, 3}}, got n={self.n}")
        if self.m < 3:
            raise ValueError("need at least 3 interior points per axis")
        if not all(u > l for l, u in zip(lower, upper)):
            raise ValueError("upper corner must exceed lower corner component-wise")

    @property
    def n(self):
        return len(self.lower)

    @property
    def h(self):
        """Grid spacing per axis."""
        return tuple((u - l) / (self.m + 1) for l, u in zip(self.lower, self.upper))

    @property
    def shape(self):
        return (self.m,) * self.n

    @property
    def cell_volume(self):
        return float(np.prod(self.h))

    def axis_coords(self, k):
        """Interior node coordinates along axis k."""
        return self.lower[k] + self.h[k] * np.arange(1, self.m + 1)

    def node_coords(self):
        """Array of node coordinates, shape grid_shape + (n,)."""
        axes = [self.axis_coords(k) for k in range(self.n)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack(mesh, axis=-1)


@dataclass(frozen=True, eq=False)
class DiscreteField:
    """Interior node values of an N-component field, shape (N,) + grid_shape."""

    domain: BoxDomain
    N: int
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        want = (self.N,) + self.domain.shape
        if v.shape != want:
            raise DimensionMismatchError(f"values shape {v.shape} != {want}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        v = v.copy()
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zero(cls, domain, N):
        return cls(domain, N, np.zeros((N,) + domain.shape))

    @classmethod
    def from_function(cls, domain, N, func):
        """Sample func(x) -> length-N vector at the interior nodes."""
        coords = domain.node_coords()
        flat = coords.reshape(-1, domain.n)
        vals = np.stack([np.asarray(func(x), dtype=float) for x in flat])
        return cls(domain, N, vals.T.reshape((N,) + domain.shape))

    def ravel_component_major(self):
        """Flatten to the solver ordering: component-major, lexicographic nodes."""
        return self.values.reshape(self.N, -1).ravel()

    @classmethod
    def from_ravel(cls, domain, N, vec):
        return cls(domain, N, np.asarray(vec, dtype=float).reshape((N,) + domain.shape))

    def __add__(self, other):
        _check_compatible(self, other)
        return DiscreteField(self.domain, self.N, self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return DiscreteField(self.domain, self.N, self.values - other.values)

    def __mul__(self, s):
        return DiscreteField(self.domain, self.N, self.values * float(s))

    __rmul__ = __mul__

    def save(self, path_prefix):
        """Write <prefix>.csv (node index, component, value) and <prefix>.json header."""
        header = {
            "domain": {"lower": list(self.domain.lower), "upper": list(self.domain.upper)},
            "m": self.domain.m,
            "N": self.N,
        }
        with open(f"{path_prefix}.json", "w") as fh:
            json.dump(header, fh, sort_keys=True)
        flat = self.values.reshape(self.N, -1)
        with open(f"{path_prefix}.csv", "w") as fh:
            fh.write("node,component,value\n")
            for alpha in range(self.N):
                for node in range(flat.shape[1]):
                    fh.write(f"{node},{alpha},{float(flat[alpha, node])!r}\n")

    @classmethod
    def load(cls, path_prefix):
        with open(f"{path_prefix}.json") as fh:
            header = json.load(fh)
        domain = BoxDomain(
            tuple(header["domain"]["lower"]), tuple(header["domain"]["upper"]), int(header["m"])
        )
        N = int(header["N"])
        flat = np.zeros((N, domain.m ** domain.n))
        with open(f"{path_prefix}.csv") as fh:
            next(fh)
            for line in fh:
                node, comp, val = line.split(",")
                flat[int(comp), int(node)] = float(val)
        return cls(domain, N, flat.reshape((N,) + domain.shape))


def _check_compatible(a, b):
    if a.domain != b.domain or a.N != b.N:
        raise DimensionMismatchError("fields live on different grids")


def _padded(values, n):
    """Zero-pad the grid axes (the trailing n axes) by one node on each side."""
    pad = [(0, 0)] * (values.ndim - n) + [(1, 1)] * n
    return np.pad(values, pad)


@dataclass(frozen=True, eq=False)
class DiscreteHessian:
    """Per-node Hessian values, shape (N, n, n) + grid_shape, minor-symmetric."""

    domain: BoxDomain
    N: int
    values: np.ndarray = field(repr=False)


def discrete_hessian(u: DiscreteField) -> DiscreteHessian:
    """Second-order central differences with implicit zero boundary values.

    Pure derivatives use (u_{k+1} - 2 u_k + u_{k-1}) / h^2; mixed
    derivatives use the 4-point cross stencil / (4 h_i h_j).
    """
    dom = u.domain
    n, m = dom.n, dom.m
    h = dom.h
    up = _padded(u.values, n)

    def sl(shifts):
        idx = [slice(None)]
        for k in range(n):
            s = shifts.get(k, 0)
            idx.append(slice(1 + s, 1 + s + m))
        return up[tuple(idx)]

    out = np.zeros((u.N, n, n) + dom.shape)
    for i in range(n):
        out[:, i, i] = (sl({i: 1}) - 2.0 * sl({}) + sl({i: -1})) / h[i] ** 2
        for j in range(i + 1, n):
            mixed = (
                sl({i: 1, j: 1}) - sl({i: 1, j: -1}) - sl({i: -1, j: 1}) + sl({i: -1, j: -1})
            ) / (4.0 * h[i] * h[j])
            out[:, i, j] = mixed
            out[:, j, i] = mixed
    return DiscreteHessian(dom, u.N, out)


def hessian_l2(H: DiscreteHessian) -> float:
    """L2 norm of the Hessian field (midpoint quadrature, h^n cell weights)."""
    return float(np.sqrt(np.sum(H.values ** 2) * H.domain.cell_volume))


def field_l2(u: DiscreteField) -> float:
    return float(np.sqrt(np.sum(u.values ** 2) * u.domain.cell_volume))


def gradient_seminorm(u: DiscreteField) -> float:
    """L2 norm of the forward-difference gradient over the m+1 gaps per axis."""
    dom = u.domain
    up = _padded(u.values, dom.n)
    total = 0.0
    for k in range(dom.n):
        d = np.diff(up, axis=1 + k) / dom.h[k]
        total += np.sum(d ** 2)
    return float(np.sqrt(total * dom.cell_volume))


def discrete_norms(u: DiscreteField):
    """(L2 norm, H1 seminorm, H2 seminorm) of a discrete field."""
    return field_l2(u), gradient_seminorm(u), hessian_l2(discrete_hessian(u))


def h2_norm(u: DiscreteField) -> float:
    """Sum of L2 norm and the two seminorms (the full second-order norm)."""
    return sum(discrete_norms(u))


def random_zero_boundary_field(domain, N, rng, smooth=True):
    """Random interior field; smooth=True applies one Jacobi-type averaging pass."""
    vals = rng.standard_normal((N,) + domain.shape)
    if smooth:
        padded = _padded(vals, domain.n)
        acc = np.zeros_like(vals)
        for k in range(domain.n):
            idx_lo = [slice(None)] + [
                slice(1, 1 + domain.m) if a != k else slice(0, domain.m) for a in range(domain.n)
            ]
            idx_hi = [slice(None)] + [
                slice(1, 1 + domain.m) if a != k else slice(2, 2 + domain.m)
                for a in range(domain.n)
            ]
            acc += padded[tuple(idx_lo)] + padded[tuple(idx_hi)]
        vals = 0.5 * vals + 0.5 * acc / (2 * domain.n)
    return DiscreteField(domain, N, vals)
