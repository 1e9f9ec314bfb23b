"""Grid-tabulated densities and smoothing operators for desk-scale checks.

Everything here runs on small uniform rectangular grids (one or two
dimensions, at most 64 nodes per axis) with a shared midpoint quadrature
rule, so algebraic identities between the operators hold to rounding
rather than to quadrature mismatch. This module is a verification
instrument, not a production code path.

The discretized one-dimensional Gaussian kernel is balanced into a
symmetric doubly stochastic matrix (rows and columns both integrate to
one on the grid), which makes smoothing exactly mass-preserving, makes
the geometric-mean smoother fix constants exactly, and keeps the
convexity bound between the two smoothers exact in floating point.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import linalg
from .exceptions import InvalidInputError

MAX_NODES = 64
MAX_DIMS = 2


def uniform_axis(lo, hi, count):
    """Uniformly spaced axis nodes (midpoint-rule sample points)."""
    if count < 2 or count > MAX_NODES:
        raise InvalidInputError(f"need 2 <= nodes <= {MAX_NODES}, got {count}")
    return np.linspace(lo, hi, count)


def _validate_axis(axis):
    axis = np.asarray(axis, dtype=float)
    if axis.ndim != 1 or axis.size < 2 or axis.size > MAX_NODES:
        raise InvalidInputError(
            f"axis must be 1-D with 2..{MAX_NODES} nodes, got shape {axis.shape}"
        )
    diffs = np.diff(axis)
    if np.any(diffs <= 0.0):
        raise InvalidInputError("axis nodes must be strictly increasing")
    step = diffs.mean()
    if np.abs(diffs - step).max() > 1e-9 * step:
        raise InvalidInputError("axis spacing must be uniform")
    return axis


@dataclass(frozen=True)
class GridDensity:
    """A nonnegative function tabulated on a uniform rectangular grid."""

    axes: tuple
    values: np.ndarray

    def __post_init__(self):
        axes = tuple(_validate_axis(ax) for ax in self.axes)
        if not 1 <= len(axes) <= MAX_DIMS:
            raise InvalidInputError(f"grids support 1..{MAX_DIMS} dimensions")
        values = np.asarray(self.values, dtype=float)
        if values.shape != tuple(ax.size for ax in axes):
            raise InvalidInputError(
                f"values shape {values.shape} disagrees with axes "
                f"{tuple(ax.size for ax in axes)}"
            )
        if not np.all(np.isfinite(values)) or np.any(values < 0.0):
            raise InvalidInputError("grid values must be finite and nonnegative")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", values)

    @property
    def ndim(self):
        return len(self.axes)

    @property
    def spacings(self):
        return tuple(float(ax[1] - ax[0]) for ax in self.axes)

    @property
    def cell(self):
        return float(np.prod(self.spacings))

    def integral(self):
        return float(self.values.sum() * self.cell)

    def normalized(self):
        total = self.integral()
        if total <= 0.0:
            raise InvalidInputError("cannot normalize a zero-mass grid density")
        return GridDensity(self.axes, self.values / total)


@dataclass(frozen=True)
class FactoredDensity:
    """A separable density theta * prod_k factors_k on a product grid."""

    theta: float
    factors: tuple

    def __post_init__(self):
        if not self.theta > 0.0:
            raise InvalidInputError(f"theta must be > 0, got {self.theta}")
        factors = tuple(self.factors)
        for f in factors:
            if f.ndim != 1:
                raise InvalidInputError("factors must be one-dimensional grids")
        object.__setattr__(self, "factors", factors)

    @property
    def ndim(self):
        return len(self.factors)

    def full(self):
        """Tabulate the product on the factors' product grid."""
        axes = tuple(f.axes[0] for f in self.factors)
        if self.ndim == 1:
            values = self.theta * self.factors[0].values
        else:
            values = self.theta * np.outer(
                self.factors[0].values, self.factors[1].values
            )
        return GridDensity(axes, values)

    def integral(self):
        return self.theta * math.prod(f.integral() for f in self.factors)


@dataclass(frozen=True)
class Kernel1D:
    """Discretized Gaussian smoothing kernel on one axis.

    ``matrix[a, b]`` approximates the kernel density s_h(v_a, z_b); the
    matrix is symmetric and balanced so both row and column quadrature
    sums equal one, exactly realizing the normalization the continuous
    kernel satisfies on the line.
    """

    bandwidth: float
    spacing: float
    matrix: np.ndarray

    def smooth(self, values_1d):
        """Apply (S f)(v_a) = sum_b matrix[a, b] f(z_b) * spacing."""
        return self.matrix @ np.asarray(values_1d, dtype=float) * self.spacing


@lru_cache(maxsize=128)
def _kernel_cached(axis_key, spacing, h):
    nodes = np.asarray(axis_key)
    z = (nodes[:, None] - nodes[None, :]) / h
    raw = np.exp(-0.5 * z * z)
    # Symmetric Sinkhorn balancing toward a doubly stochastic quadrature.
    for _ in range(10_000):
        sums = raw.sum(axis=1) * spacing
        if np.abs(sums - 1.0).max() < 1e-14:
            break
        raw = raw / np.sqrt(np.outer(sums, sums))
    raw.setflags(write=False)  # shared through the cache
    return raw


def kernel_for(axis, h):
    """Build (and cache) the balanced kernel matrix for an axis."""
    if not h > 0.0:
        raise InvalidInputError(f"bandwidth must be > 0, got {h}")
    axis = _validate_axis(axis)
    spacing = float(axis[1] - axis[0])
    matrix = _kernel_cached(tuple(axis.tolist()), spacing, float(h))
    return Kernel1D(bandwidth=float(h), spacing=spacing, matrix=matrix)


def _smooth_values(values, axes, h, transpose=False):
    out = np.asarray(values, dtype=float)
    for axis_index, axis in enumerate(axes):
        ker = kernel_for(axis, h)
        mat = ker.matrix.T if transpose else ker.matrix
        out = np.moveaxis(
            np.tensordot(mat, out, axes=([1], [axis_index])) * ker.spacing,
            0,
            axis_index,
        )
    return out


def op_S(f, h):
    """Convolution smoother: (S f)(x) = integral of s(x, u) f(u) du."""
    return GridDensity(f.axes, _smooth_values(f.values, f.axes, h))


def op_S_star(f, h):
    """Adjoint smoother: (S* f)(x) = integral of s(u, x) f(u) du."""
    return GridDensity(f.axes, _smooth_values(f.values, f.axes, h, transpose=True))


def op_N(f, h):
    """Geometric-mean smoother: exp of the adjoint-smoothed log density.

    Requires a strictly positive density; any zero cell makes the log
    undefined.
    """
    if np.any(f.values <= 0.0):
        raise InvalidInputError("geometric-mean smoothing needs strictly positive values")
    return GridDensity(
        f.axes, np.exp(_smooth_values(np.log(f.values), f.axes, h, transpose=True))
    )


def op_N_factored(e, h):
    """Geometric-mean smoothing of a separable density, factor by factor.

    Separability is exact here: smoothing the log of a product splits
    into per-axis smoothing of the log factors because the balanced
    kernel fixes constants along the other axes.
    """
    factors = []
    for f in e.factors:
        if np.any(f.values <= 0.0):
            raise InvalidInputError("geometric-mean smoothing needs strictly positive values")
        smoothed = np.exp(kernel_for(f.axes[0], h).matrix.T
                          @ np.log(f.values) * f.spacings[0])
        factors.append(GridDensity(f.axes, smoothed))
    return FactoredDensity(theta=e.theta, factors=tuple(factors))


def op_P(f):
    """Projection onto products: outer product of marginals over total mass."""
    total = f.integral()
    if total <= 0.0:
        raise InvalidInputError("projection needs positive total mass")
    if f.ndim == 1:
        return GridDensity(f.axes, f.values.copy())
    d0, d1 = f.spacings
    marg0 = f.values.sum(axis=1) * d1
    marg1 = f.values.sum(axis=0) * d0
    return GridDensity(f.axes, np.outer(marg0, marg1) / total)


def _same_grid(g1, g2):
    if g1.ndim != g2.ndim or any(
        a1.size != a2.size or np.abs(a1 - a2).max() > 1e-12
        for a1, a2 in zip(g1.axes, g2.axes)
    ):
        raise InvalidInputError("grid densities must share one grid")


def kl_div(g1, g2):
    """Generalized Kullback-Leibler divergence for nonnegative functions.

    Quadrature of g1*log(g1/g2) + g2 - g1 with the 0*log(0) = 0
    convention; returns +inf when g1 has mass where g2 vanishes.
    """
    _same_grid(g1, g2)
    a, b = g1.values, g2.values
    positive = a > 0.0
    if np.any(positive & (b <= 0.0)):
        return float("inf")
    cross = np.zeros_like(a)
    cross[positive] = a[positive] * np.log(a[positive] / b[positive])
    return float((cross + b - a).sum() * g1.cell)


def _interp_weights(axis, coords):
    """Linear interpolation indices/weights; zero weight outside the axis.

    A one-ulp overshoot of the boundary (from the matrix solve or the
    index arithmetic) still counts as inside.
    """
    step = axis[1] - axis[0]
    t = (coords - axis[0]) / step
    eps = 1e-9 * axis.size
    inside = (t >= -eps) & (t <= axis.size - 1.0 + eps)
    t = np.clip(t, 0.0, axis.size - 1.0)
    i0 = np.minimum(t.astype(int), axis.size - 2)
    frac = t - i0
    return i0, frac, inside


def transform_values(q, a, out_axes):
    """Tabulate the pushforward density q_A(x) = q(A^-1 x) / |det A|.

    ``q`` is interpolated linearly (bilinearly in 2-D) at the pulled-back
    points and treated as zero outside its grid.
    """
    a = np.asarray(a, dtype=float)
    r = len(out_axes)
    if a.shape != (r, r):
        raise InvalidInputError(f"matrix must be {r}x{r}, got {a.shape}")
    a_inv = linalg.invert(a)
    det = abs(linalg.determinant(a))
    if r == 1:
        pts = np.asarray(out_axes[0])[:, None]
    else:
        g0, g1 = np.meshgrid(out_axes[0], out_axes[1], indexing="ij")
        pts = np.column_stack([g0.ravel(), g1.ravel()])
    pulled = pts @ a_inv.T
    if r == 1:
        i0, frac, inside = _interp_weights(q.axes[0], pulled[:, 0])
        vals = q.values[i0] * (1.0 - frac) + q.values[i0 + 1] * frac
        vals = np.where(inside, vals, 0.0)
        out_shape = (len(out_axes[0]),)
    else:
        i0, f0, in0 = _interp_weights(q.axes[0], pulled[:, 0])
        j0, f1, in1 = _interp_weights(q.axes[1], pulled[:, 1])
        v = q.values
        vals = (
            v[i0, j0] * (1 - f0) * (1 - f1)
            + v[i0 + 1, j0] * f0 * (1 - f1)
            + v[i0, j0 + 1] * (1 - f0) * f1
            + v[i0 + 1, j0 + 1] * f0 * f1
        )
        vals = np.where(in0 & in1, vals, 0.0)
        out_shape = (len(out_axes[0]), len(out_axes[1]))
    return (vals / det).reshape(out_shape)


def mixture_surface(e_list, a_list, h, axes):
    """Sum over components of the transformed geometric-mean smoothed e_j."""
    total = np.zeros(tuple(len(ax) for ax in axes))
    for e_j, a_j in zip(e_list, a_list):
        smoothed = op_N_factored(e_j, h).full()
        total += transform_values(smoothed, a_j, axes)
    return GridDensity(axes, total)


def objective_ell(g, e_list, a_list, h):
    """The population objective on the grid.

    Cross-entropy of the target against the transformed smoothed mixture
    plus the (untransformed) total mass of the components; linear
    transforms leave one-dimensional masses unchanged, so the second term
    is evaluated on the component side to avoid interpolation error.
    """
    mix = mixture_surface(e_list, a_list, h, g.axes)
    gv, mv = g.values, mix.values
    positive = gv > 0.0
    if np.any(positive & (mv <= 0.0)):
        return float("inf")
    cross = np.zeros_like(gv)
    cross[positive] = gv[positive] * np.log(gv[positive] / mv[positive])
    term1 = float(cross.sum() * g.cell)
    term2 = sum(e_j.integral() for e_j in e_list)
    return term1 + term2


def penalty(g_axes_or_grid, e_list, a_list, h):
    """Roughness penalty: component mass minus smoothed transformed mass.

    Accepts the target grid (or a GridDensity, whose axes are used) to fix
    where the transformed smoothed mixture is tabulated.
    """
    axes = getattr(g_axes_or_grid, "axes", g_axes_or_grid)
    mix = mixture_surface(e_list, a_list, h, axes)
    mass_raw = sum(e_j.integral() for e_j in e_list)
    return float(mass_raw - mix.integral())


def majorizer_b(g, e_list, a_list, w0_list, h):
    """Surrogate objective built from pointwise weights w0 (summing to 1).

    Computes -integral of g * sum_j w0_j * log[(smoothed e_j)_Aj] plus the
    component mass term. Weight cells where g * w0_j vanishes contribute
    nothing even if the smoothed surface is zero there.
    """
    total = 0.0
    for e_j, a_j, w_j in zip(e_list, a_list, w0_list):
        _same_grid(g, w_j)
        surface = transform_values(op_N_factored(e_j, h).full(), a_j, g.axes)
        mass = g.values * w_j.values
        active = mass > 0.0
        if np.any(active & (surface <= 0.0)):
            return float("inf")
        total -= float(
            (mass[active] * np.log(surface[active])).sum() * g.cell
        )
    total += sum(e_j.integral() for e_j in e_list)
    return total


def pointwise_weights(e_list, a_list, h, axes):
    """Normalized per-component share of the smoothed transformed mixture."""
    surfaces = [
        transform_values(op_N_factored(e_j, h).full(), a_j, axes)
        for e_j, a_j in zip(e_list, a_list)
    ]
    denom = np.sum(surfaces, axis=0)
    m = len(surfaces)
    out = []
    for s in surfaces:
        w = np.where(denom > 0.0, s / np.where(denom > 0.0, denom, 1.0), 1.0 / m)
        out.append(GridDensity(axes, w))
    return out


def closed_form_minimizer(g, w0, a, h, out_axes=None):
    """Separable minimizer of one component's surrogate at fixed transform.

    Pulls the weighted target g * w0 back through the transform, smooths
    each marginal of the pullback, and assembles the product with the
    normalizing power of the pullback's total mass. Returns a
    FactoredDensity on ``out_axes`` (the target grid by default).
    """
    _same_grid(g, w0)
    axes = g.axes if out_axes is None else tuple(
        _validate_axis(ax) for ax in out_axes
    )
    weighted = GridDensity(g.axes, g.values * w0.values)
    a = np.asarray(a, dtype=float)
    pullback = transform_values(weighted, linalg.invert(a), axes)
    pullback_grid = GridDensity(axes, np.maximum(pullback, 0.0))
    total = pullback_grid.integral()
    if total <= 0.0:
        raise InvalidInputError("weighted target has zero mass under the pullback")
    r = len(axes)
    factors = []
    for k in range(r):
        other = 1 - k
        if r == 1:
            marg = pullback_grid.values
        else:
            marg = pullback_grid.values.sum(axis=other) * pullback_grid.spacings[other]
        smoothed = kernel_for(axes[k], h).smooth(marg)
        factors.append(GridDensity((axes[k],), np.maximum(smoothed, 0.0)))
    return FactoredDensity(theta=total ** (1 - r), factors=tuple(factors))


def ica_objective(marginals, a):
    """Rotation-selection score: log |det A| plus summed marginal entropies.

    Each marginal's differential entropy is computed by quadrature with
    the 0*log(0) = 0 convention. Over volume-preserving transforms the
    score is smallest when the recovered coordinates are independent,
    which is what makes it a selection criterion for the transform.
    """
    a = np.asarray(a, dtype=float)
    total = float(np.log(abs(linalg.determinant(a))))
    for q in marginals:
        v = q.values
        positive = v > 0.0
        entropy = -float((v[positive] * np.log(v[positive])).sum() * q.cell)
        total += entropy
    return total


def rotation(theta):
    """2-D rotation matrix."""
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])
