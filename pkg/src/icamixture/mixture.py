"""Iterative estimation of nonparametric ICA mixture models.

One outer iteration recomputes, in order: posterior responsibilities,
mixing weights, a weighted FastICA pass per component, and per-coordinate
weighted kernel density estimates over the recovered coordinates. In
``npem`` mode the ICA pass is disabled (every mixing matrix stays the
identity, only the weighted mean is removed), which reduces the model to
the conditional-independence baseline.

Responsibilities computed in one iteration are reused for the weight, ICA
and density updates of that iteration; an optional flag inserts a second
posterior pass between the ICA and density updates for experiments.
"""

import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import evaluate, linalg
from .exceptions import (
    DegenerateCovarianceError,
    DyingComponentError,
    DyingComponentWarning,
    FitWarning,
    InvalidInputError,
    NumericalError,
)
from .ica import (
    Nonlinearity,
    Whitening,
    fixed_point,
    ica_transform,
    weighted_center,
    weighted_whiten,
)
from .kde import WeightedKde1D, bandwidth_update

# log of the smallest positive normal double; rows whose density underflows
# entirely contribute this floor to the log-likelihood.
_LOG_FLOOR = -745.0

_DYING_STRIKES = 3


@dataclass(frozen=True)
class Component:
    """One mixture component: weight, recovering map, and coordinate KDEs.

    The component density at x is
    ``|det A|^-1 * prod_k q_k([A^-1 (x - mean)]_k)``
    where q_k is the k-th coordinate's weighted KDE.
    """

    lam: float
    mean: np.ndarray
    a: np.ndarray
    a_inv: np.ndarray
    kdes: tuple

    def __post_init__(self):
        if not self.lam > 0.0:
            raise InvalidInputError(f"component weight must be > 0, got {self.lam}")
        r = self.a.shape[0]
        if np.abs(self.a @ self.a_inv - np.eye(r)).max() > 1e-8:
            raise InvalidInputError("a and a_inv are not inverses to 1e-8")
        if len(self.kdes) != r:
            raise InvalidInputError(
                f"expected {r} coordinate densities, got {len(self.kdes)}"
            )
        object.__setattr__(self, "kdes", tuple(self.kdes))

    @property
    def log_abs_det_a(self):
        return linalg.log_abs_det(self.a)


@dataclass(frozen=True)
class FitReport:
    """Per-fit metadata: iteration count, traces, and diagnostics."""

    outer_iters: int
    loglik_trace: np.ndarray
    lambda_trace: np.ndarray
    converged: bool
    warnings: tuple = ()


@dataclass(frozen=True)
class MixtureModel:
    """A fitted (or hand-assembled) mixture of ICA components."""

    m: int
    r: int
    components: tuple
    fit_report: FitReport = None

    def __post_init__(self):
        if self.m != len(self.components):
            raise InvalidInputError("component count disagrees with m")
        total = sum(c.lam for c in self.components)
        if abs(total - 1.0) > 1e-8:
            raise InvalidInputError(f"mixing weights sum to {total!r}, not 1")
        object.__setattr__(self, "components", tuple(self.components))

    @property
    def lambdas(self):
        return np.array([c.lam for c in self.components])


@dataclass(frozen=True)
class FitConfig:
    """Knobs for :func:`fit`; defaults match the documented CLI defaults."""

    m: int
    mode: str = "ica"
    max_outer: int = 300
    outer_tol: float = 1e-7
    ica_tol: float = 3e-3
    ica_max_inner: int = 100
    nonlinearity: Nonlinearity = field(default_factory=Nonlinearity)
    bandwidth_coef: float = 0.5
    init: str = "kmeans"
    seed: int = 0
    min_lambda: float = 1e-4
    recompute_posterior_after_ica: bool = True
    reinit_dying: bool = False
    threads: int = 1

    def __post_init__(self):
        if self.m < 1:
            raise InvalidInputError(f"need at least one component, got m={self.m}")
        if self.mode not in ("ica", "npem"):
            raise InvalidInputError(f"mode must be 'ica' or 'npem', got {self.mode!r}")
        if self.init not in ("kmeans", "random"):
            raise InvalidInputError(f"init must be 'kmeans' or 'random', got {self.init!r}")
        if min(self.outer_tol, self.ica_tol, self.bandwidth_coef) <= 0.0:
            raise InvalidInputError("tolerances and bandwidth coefficient must be > 0")
        if self.max_outer < 1 or self.ica_max_inner < 1:
            raise InvalidInputError("iteration caps must be >= 1")
        if self.min_lambda < 0.0:
            raise InvalidInputError(f"min_lambda must be >= 0, got {self.min_lambda}")
        if self.threads < 1:
            raise InvalidInputError(f"threads must be >= 1, got {self.threads}")


def _coordinate_log_densities(model, x, threads=1):
    """Per-(component, coordinate) KDE log densities, shape (m, r, n)."""
    n = x.shape[0]
    out = np.empty((model.m, model.r, n))
    tasks = []
    for j, comp in enumerate(model.components):
        u = ica_transform(x, comp.mean, comp.a_inv)
        for k in range(model.r):
            tasks.append((j, k, comp.kdes[k], u[:, k]))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda t: out.__setitem__((t[0], t[1]), t[2].log_evaluate(t[3])), tasks))
    else:
        for j, k, kde, col in tasks:
            out[j, k] = kde.log_evaluate(col)
    return out


def log_density_matrix(model, x, threads=1):
    """n x m matrix of log(lambda_j * f_j(x_i)); entries may be -inf."""
    x = _check_data(x, model.r)
    coord = _coordinate_log_densities(model, x, threads)
    cols = []
    for j, comp in enumerate(model.components):
        base = np.log(comp.lam) - comp.log_abs_det_a
        cols.append(base + coord[j].sum(axis=0))
    return np.stack(cols, axis=1)


def posterior(model, x, threads=1):
    """Responsibility matrix with rows normalized to sum to one.

    Rows where every component's log density underflows to -inf are
    assigned the uniform distribution and reported with a warning, so no
    NaN ever propagates into the update steps.
    """
    log_dens = log_density_matrix(model, x, threads)
    return _normalize_rows(log_dens)


def _normalize_rows(log_dens):
    shift = log_dens.max(axis=1, keepdims=True)
    dead = ~np.isfinite(shift[:, 0])
    if np.any(dead):
        warnings.warn(
            f"{int(dead.sum())} observation(s) have zero density under every "
            "component; assigning uniform responsibilities",
            FitWarning,
            stacklevel=3,
        )
        shift[dead] = 0.0
    p = np.exp(log_dens - shift)
    p[dead] = 1.0
    p /= p.sum(axis=1, keepdims=True)
    return p


def update_lambda(p, min_lambda=None):
    """Mixing weights as column means of the responsibility matrix."""
    p = np.asarray(p, dtype=float)
    lam = p.mean(axis=0)
    if min_lambda is not None:
        for j in np.nonzero(lam < min_lambda)[0]:
            warnings.warn(
                f"component {j} weight {lam[j]:.3e} fell below {min_lambda:g}",
                DyingComponentWarning,
                stacklevel=2,
            )
    return lam


def ica_step(x, p_j, cfg, warm=None):
    """Weighted centering, whitening and FastICA for one component.

    Returns ``(a, a_inv, whitening, unmixing)``. In ``npem`` mode only the
    weighted mean is removed and both matrices are the identity. If the
    component's effective sample size is below the dimension, or its
    weighted covariance is degenerate, the ICA pass is skipped with a
    warning: the previous matrices (from ``warm``) are kept, or the
    identity is used when there is no previous iterate.
    """
    x = np.asarray(x, dtype=float)
    p_j = np.asarray(p_j, dtype=float).ravel()
    r = x.shape[1]
    centered, mean = weighted_center(x, p_j)
    if cfg.mode == "npem":
        eye = np.eye(r)
        return eye, eye, Whitening(mean=mean, v=eye, v_inv=eye), None

    def _fallback(reason):
        warnings.warn(
            f"skipping ICA update this iteration ({reason}); keeping the "
            "previous mixing matrix",
            FitWarning,
            stacklevel=3,
        )
        eye = np.eye(r)
        if warm is None:
            return eye, eye, Whitening(mean=mean, v=eye, v_inv=eye), None
        return warm.a, warm.a_inv, Whitening(mean=mean, v=eye, v_inv=eye), warm

    if p_j.sum() < r:
        return _fallback(f"effective sample size {p_j.sum():.3g} < dimension {r}")
    try:
        z, whitening = weighted_whiten(centered, p_j)
    except DegenerateCovarianceError as exc:
        return _fallback(str(exc))
    whitening = Whitening(mean=mean, v=whitening.v, v_inv=whitening.v_inv)
    # Continuation across outer iterations lives in the recovering matrix:
    # the previous W is expressed in the previous whitening basis, so it is
    # mapped through the new basis before restarting the inner loop.
    w_init = None if warm is None else warm.a_inv @ whitening.v_inv
    try:
        unmixing = fixed_point(
            z,
            p_j,
            nl=cfg.nonlinearity,
            tau=cfg.ica_tol,
            max_inner=cfg.ica_max_inner,
            w_init=w_init,
            whitening=whitening,
        )
    except NumericalError as exc:
        # A collapsed update row (near-Gaussian direction) degenerates the
        # orthogonalization; treat it like a degenerate covariance.
        return _fallback(str(exc))
    if not unmixing.converged:
        # The sweep cap yields an arbitrary rotation, not an update; using
        # it would inject noise into the outer loop every iteration.
        return _fallback(
            f"inner loop hit the sweep cap ({cfg.ica_max_inner}) without "
            "converging"
        )
    return unmixing.a, unmixing.a_inv, whitening, unmixing


def density_step(x, p, a_invs, means, lambdas, cfg):
    """Per-component, per-coordinate weighted KDEs over recovered coordinates.

    Every coordinate of component j shares the bandwidth
    ``bandwidth_update(n, lambda_j)``; the support is the recovered
    coordinates ``A_j^-1 (x_i - mean_j)`` weighted by the normalized
    responsibilities of component j.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[0]
    all_kdes = []
    for j in range(len(lambdas)):
        h = bandwidth_update(n, lambdas[j], cfg.bandwidth_coef)
        u = ica_transform(x, means[j], a_invs[j])
        w_j = p[:, j]
        all_kdes.append(tuple(
            WeightedKde1D(u[:, k], w_j, h) for k in range(x.shape[1])
        ))
    return all_kdes


def log_likelihood(model, x, threads=1):
    """Observed-data log-likelihood, log-sum-exp stabilized.

    Rows with zero density under every component contribute a floor of
    -745 each (the log of the smallest positive normal double) and a
    warning is emitted.
    """
    log_dens = log_density_matrix(model, x, threads)
    return _loglik_from_matrix(log_dens)


def _loglik_from_matrix(log_dens):
    shift = log_dens.max(axis=1)
    dead = ~np.isfinite(shift)
    if np.any(dead):
        warnings.warn(
            f"{int(dead.sum())} observation(s) have zero mixture density; "
            f"contributing the floor {_LOG_FLOOR} each",
            FitWarning,
            stacklevel=3,
        )
    row_ll = np.full(log_dens.shape[0], _LOG_FLOOR)
    ok = ~dead
    if np.any(ok):
        row_ll[ok] = shift[ok] + np.log(
            np.exp(log_dens[ok] - shift[ok, None]).sum(axis=1)
        )
    return float(row_ll.sum())


def _check_data(x, r=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise InvalidInputError(f"data must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError("data contains non-finite entries")
    if r is not None and x.shape[1] != r:
        raise InvalidInputError(
            f"data has {x.shape[1]} columns but the model expects {r}"
        )
    return x


def _initial_responsibilities(x, cfg, rng):
    n = x.shape[0]
    if cfg.m == 1:
        return np.ones((n, 1))
    if cfg.init == "random":
        return rng.dirichlet(np.ones(cfg.m), size=n)
    labels = evaluate.kmeans(x, cfg.m, restarts=10, seed=cfg.seed)
    p = np.full((n, cfg.m), 0.1 / (cfg.m - 1))
    p[np.arange(n), labels] = 0.9
    return p


def fit(x, cfg):
    """Estimate a mixture model from data; see the module docstring.

    Stops when the relative change of the observed-data log-likelihood
    drops below ``cfg.outer_tol`` or after ``cfg.max_outer`` iterations.
    A component whose weight stays below ``cfg.min_lambda`` for three
    consecutive iterations aborts the fit with
    :class:`DyingComponentError`, unless ``cfg.reinit_dying`` is set, in
    which case its responsibilities are redrawn and the fit continues.
    """
    x = _check_data(x)
    n, r = x.shape
    if not n > r:
        raise InvalidInputError(f"need more observations than coordinates, got {n} <= {r}")

    rng = np.random.default_rng(cfg.seed)
    p = _initial_responsibilities(x, cfg, rng)
    warm = [None] * cfg.m
    dying_streak = np.zeros(cfg.m, dtype=int)
    prev_ll = None
    ll_trace = []
    lam_trace = []
    converged = False
    prev_kdes = None
    model = None

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        for iteration in range(1, cfg.max_outer + 1):
            lam = update_lambda(p, cfg.min_lambda)
            dying = lam < cfg.min_lambda
            dying_streak = np.where(dying, dying_streak + 1, 0)
            doomed = (dying_streak >= _DYING_STRIKES) | (lam <= 0.0)
            if np.any(doomed):
                j = int(np.nonzero(doomed)[0][0])
                if not cfg.reinit_dying:
                    raise DyingComponentError(
                        f"component {j} weight stayed below {cfg.min_lambda:g}; "
                        "aborting (set reinit_dying to reinitialize instead)",
                        component=j,
                    )
                for jj in np.nonzero(doomed)[0]:
                    p[:, jj] = rng.uniform(0.1, 1.0, size=n)
                    dying_streak[jj] = 0
                p /= p.sum(axis=1, keepdims=True)
                warnings.warn(
                    f"reinitialized dying component(s) {np.nonzero(doomed)[0].tolist()}",
                    DyingComponentWarning,
                    stacklevel=2,
                )
                lam = update_lambda(p)

            means, mats_a, mats_a_inv = [], [], []
            for j in range(cfg.m):
                a, a_inv, whitening, unmix = ica_step(x, p[:, j], cfg, warm[j])
                warm[j] = unmix
                means.append(whitening.mean)
                mats_a.append(a)
                mats_a_inv.append(a_inv)

            p_density = p
            if cfg.recompute_posterior_after_ica and prev_kdes is not None:
                interim = MixtureModel(
                    m=cfg.m,
                    r=r,
                    components=tuple(
                        Component(lam[j], means[j], mats_a[j], mats_a_inv[j],
                                  prev_kdes[j])
                        for j in range(cfg.m)
                    ),
                )
                p_density = posterior(interim, x, cfg.threads)

            kdes = density_step(x, p_density, mats_a_inv, means, lam, cfg)
            prev_kdes = kdes
            model = MixtureModel(
                m=cfg.m,
                r=r,
                components=tuple(
                    Component(lam[j], means[j], mats_a[j], mats_a_inv[j], kdes[j])
                    for j in range(cfg.m)
                ),
            )

            log_dens = log_density_matrix(model, x, cfg.threads)
            ll = _loglik_from_matrix(log_dens)
            ll_trace.append(ll)
            lam_trace.append(lam)
            if prev_ll is not None and abs(ll - prev_ll) / (abs(ll) + 1.0) < cfg.outer_tol:
                converged = True
                break
            prev_ll = ll
            p = _normalize_rows(log_dens)

    # The same diagnostic tends to recur every iteration; keep and re-emit
    # each distinct message once, in first-appearance order.
    unique = {}
    for warning in caught:
        unique.setdefault(str(warning.message), warning)
    report = FitReport(
        outer_iters=len(ll_trace),
        loglik_trace=np.asarray(ll_trace),
        lambda_trace=np.asarray(lam_trace),
        converged=converged,
        warnings=tuple(unique),
    )
    for warning in unique.values():
        warnings.warn_explicit(
            warning.message, warning.category, warning.filename, warning.lineno
        )
    return MixtureModel(m=cfg.m, r=r, components=model.components,
                        fit_report=report)


def predict(model, x, threads=1):
    """Hard labels by maximum posterior; ties break to the smallest index."""
    p = posterior(model, x, threads)
    return p.argmax(axis=1), p
