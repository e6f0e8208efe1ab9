"""
Fourier pseudospectral operators on periodic 1D/2D grids.

Fields are plain ``numpy`` arrays whose trailing ``grid.dims`` axes are the
spatial axes. A scalar field has shape ``grid.shape``; a 3-vector field has
shape ``(3, *grid.shape)``. Axis 0 of the grid is ``x``, axis 1 is ``y``, and
arrays are stored row-major, so ``f[i, j]`` is the sample at
``(x_i, y_j)``.

Derivatives are spectral multipliers:

    ∂_j  ↔  i k_j          (Nyquist mode zeroed)
    Δ    ↔  -|k|^2         (Nyquist mode kept)

Nonlinear products are formed pointwise in physical space. ``Grid.dealias``
switches on a 2/3-rule filter that callers may apply to such products.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import UsageError

__all__ = [
    "Grid",
    "forward",
    "inverse",
    "laplacian",
    "partial_derivative",
    "gradient",
    "gradient_norm_sq",
    "cross",
    "dot",
    "inner_l2",
    "norm_l2",
    "norm_h1",
    "norm_h2",
    "sobolev_norms",
    "sup_grad_norm",
    "dealias",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid.

    Parameters
    ----------
    modes : tuple of int
        Points per axis, each even and >= 4.
    lengths : tuple of float
        Domain extent per axis.
    origin : tuple of float, optional
        Lower-left corner; defaults to zeros.
    dealias : bool
        Whether :func:`dealias` filters (otherwise it is the identity).
    """

    modes: tuple
    lengths: tuple
    origin: tuple = None
    dealias: bool = False

    def __post_init__(self):
        modes = tuple(int(n) for n in np.atleast_1d(self.modes))
        lengths = tuple(float(v) for v in np.atleast_1d(self.lengths))
        origin = (0.0,) * len(modes) if self.origin is None else tuple(
            float(v) for v in np.atleast_1d(self.origin))
        if len(modes) not in (1, 2):
            raise UsageError(f"only 1D and 2D grids are supported, got dims={len(modes)}")
        if len(lengths) != len(modes) or len(origin) != len(modes):
            raise UsageError("modes, lengths and origin must have one entry per axis")
        for n in modes:
            if n < 4 or n % 2:
                raise UsageError(f"grid modes must be even and >= 4, got {n}")
        for v in lengths:
            if not v > 0:
                raise UsageError(f"domain lengths must be positive, got {v}")
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "lengths", lengths)
        object.__setattr__(self, "origin", origin)

    @classmethod
    def square(cls, n, length=2 * np.pi, origin=0.0, dealias=False):
        """2D ``n x n`` grid on ``[origin, origin + length)^2``."""
        return cls((n, n), (length, length), (origin, origin), dealias)

    @property
    def dims(self):
        return len(self.modes)

    @property
    def shape(self):
        return self.modes

    @property
    def axes(self):
        return tuple(range(-self.dims, 0))

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.modes))

    @property
    def cell_area(self):
        return float(np.prod(self.spacing))

    @property
    def size(self):
        return int(np.prod(self.modes))

    def coords(self, sparse=False):
        """Coordinate arrays, one per axis, each of shape ``grid.shape``
        (or broadcastable to it when ``sparse``)."""
        axes_1d = [o + h * np.arange(n) for o, h, n in zip(self.origin, self.spacing, self.modes)]
        return np.meshgrid(*axes_1d, indexing="ij", sparse=sparse)

    # ---- wavenumber tables (rfft layout: last axis is half-spectrum) ----

    @cached_property
    def _indices(self):
        idx = [np.fft.fftfreq(n, 1.0 / n) for n in self.modes[:-1]]
        idx.append(np.fft.rfftfreq(self.modes[-1], 1.0 / self.modes[-1]))
        out = []
        for axis, k in enumerate(idx):
            shape = [1] * self.dims
            shape[axis] = k.size
            out.append(k.reshape(shape))
        return out

    @cached_property
    def wavenumbers(self):
        """Physical wavenumbers ``2πk/L`` per axis, broadcastable to spectral shape."""
        return [2 * np.pi * k / L for k, L in zip(self._indices, self.lengths)]

    @cached_property
    def derivative_symbols(self):
        """``i k_j`` per axis with the unmatched Nyquist coefficient set to zero."""
        out = []
        for k, idx, n in zip(self.wavenumbers, self._indices, self.modes):
            out.append(np.where(np.abs(idx) == n // 2, 0.0, 1j * k))
        return out

    @cached_property
    def ksq(self):
        """``|k|^2`` on the spectral grid, Nyquist included."""
        return sum(k**2 for k in self.wavenumbers)

    @cached_property
    def parseval_weights(self):
        """Multiplicity of each rfft coefficient in the full spectrum."""
        n = self.modes[-1]
        w = np.full(n // 2 + 1, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        shape = [1] * self.dims
        shape[-1] = w.size
        return w.reshape(shape)

    @cached_property
    def sobolev_weights(self):
        """Parseval-weighted ``(1, Σ|∂_j|^2, Σ|∂_i∂_j|^2)`` multipliers for the norms."""
        syms = self.derivative_symbols
        grad_w = sum(np.abs(s) ** 2 for s in syms)
        hess_w = sum(k**4 for k in self.wavenumbers)
        for i in range(self.dims):
            for j in range(self.dims):
                if i != j:
                    hess_w = hess_w + np.abs(syms[i] * syms[j]) ** 2
        shape = self.ksq.shape
        return tuple(np.broadcast_to(self.parseval_weights * w, shape).copy()
                     for w in (1.0, grad_w, hess_w))

    @cached_property
    def dealias_mask(self):
        mask = np.ones(self.ksq.shape, dtype=bool)
        for idx, n in zip(self._indices, self.modes):
            mask = mask & (np.abs(idx) < n / 3.0)
        return mask

    def _check(self, f):
        if f.shape[-self.dims:] != self.shape:
            raise UsageError(f"field of shape {f.shape} does not live on grid {self.shape}")


def forward(f, grid):
    """Real-to-complex transform over the spatial axes."""
    return scipy.fft.rfftn(f, axes=grid.axes)


def inverse(F, grid):
    return scipy.fft.irfftn(F, s=grid.shape, axes=grid.axes)


def laplacian(f, grid):
    """Spectral Laplacian of a scalar or vector field."""
    grid._check(f)
    return inverse(-grid.ksq * forward(f, grid), grid)


def partial_derivative(f, grid, axis):
    """First derivative along ``axis`` (0 for x, 1 for y)."""
    if not 0 <= axis < grid.dims:
        raise UsageError(f"axis {axis} out of range for a {grid.dims}D grid")
    grid._check(f)
    return inverse(grid.derivative_symbols[axis] * forward(f, grid), grid)


def gradient(f, grid, f_hat=None):
    """All first partials, stacked on a new leading axis of length ``grid.dims``."""
    grid._check(f)
    if f_hat is None:
        f_hat = forward(f, grid)
    return np.stack([inverse(s * f_hat, grid) for s in grid.derivative_symbols])


def gradient_norm_sq(m, grid, m_hat=None):
    """Pointwise ``|∇m|^2 = Σ_{i,j} (∂_j m_i)^2``."""
    g = gradient(m, grid, m_hat)
    return np.sum(g * g, axis=tuple(range(g.ndim - grid.dims)))


def _same_shape(a, b):
    if a.shape != b.shape:
        raise UsageError(f"field shapes differ: {a.shape} vs {b.shape}")


def cross(a, b):
    """Pointwise cross product of two vector fields on the same grid."""
    _same_shape(a, b)
    return np.stack([
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ])


def dot(a, b):
    """Pointwise dot product of two vector fields."""
    _same_shape(a, b)
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def inner_l2(f, g, grid):
    """Grid-quadrature L2 inner product (components summed for vector fields)."""
    _same_shape(f, g)
    grid._check(f)
    return float(np.sum(f * g) * grid.cell_area)


def norm_l2(f, grid):
    return np.sqrt(inner_l2(f, f, grid))


def norm_h1(f, grid):
    """``sqrt(||f||^2 + ||∇f||^2)``, evaluated in physical space."""
    g = gradient(f, grid)
    return np.sqrt(inner_l2(f, f, grid) + inner_l2(g, g, grid))


def norm_h2(f, grid):
    """``sqrt(||f||_1^2 + Σ_{i,j} ||∂_i ∂_j f||^2)``, evaluated in physical space."""
    f_hat = forward(f, grid)
    syms = grid.derivative_symbols
    total = norm_h1(f, grid) ** 2
    for i in range(grid.dims):
        for j in range(grid.dims):
            # pure second derivatives keep the Nyquist mode, like the Laplacian
            sym = -grid.wavenumbers[i] ** 2 if i == j else syms[i] * syms[j]
            d = inverse(sym * f_hat, grid)
            total += inner_l2(d, d, grid)
    return np.sqrt(total)


def sobolev_norms(f, grid, f_hat=None):
    """``(||f||, ||f||_1, ||f||_2)`` from one transform via Parseval.

    Uses the same multipliers as the physical-space routines, so it agrees
    with :func:`norm_l2`, :func:`norm_h1` and :func:`norm_h2` to rounding.
    """
    if f_hat is None:
        f_hat = forward(f, grid)
    # Parseval for the rfft layout: Σ|f|^2 = (1/N) Σ_full |F|^2
    p = f_hat.real**2 + f_hat.imag**2
    if p.ndim > grid.dims:
        p = p.sum(axis=tuple(range(p.ndim - grid.dims)))
    scale = grid.cell_area / grid.size
    w0, w1, w2 = grid.sobolev_weights
    l2 = scale * float(np.vdot(w0, p))
    h1 = l2 + scale * float(np.vdot(w1, p))
    h2 = h1 + scale * float(np.vdot(w2, p))
    return np.sqrt(l2), np.sqrt(h1), np.sqrt(h2)


def sup_grad_norm(m, grid, m_hat=None):
    """Discrete W^{1,∞} seminorm: ``max_x sqrt(Σ_{i,j} (∂_j m_i)^2)``."""
    return float(np.sqrt(np.max(gradient_norm_sq(m, grid, m_hat))))


def dealias(f, grid):
    """2/3-rule filter when ``grid.dealias`` is set; identity otherwise."""
    if not grid.dealias:
        return f
    return inverse(grid.dealias_mask * forward(f, grid), grid)
