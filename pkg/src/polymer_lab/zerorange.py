"""Zero-range polymer measures on the unit time horizon.

After diffusive rescaling the attractive region shrinks to a point and the
path measure remembers it only through a single coupling ``gamma``.  Every
observable quantity then reduces to two scalar transforms of the radius:
the interaction kernel I (excess transition density picked up by visiting
the origin) and the partition correction J (its integral in time).  This
module exposes the transition density ``pbar``, the partition factor
``zbar``, finite-dimensional densities of the pinned measure, the
origin-started transition kernel, radial marginals, and an inverse-CDF
path sampler built on per-step transition tables.

Point-level operations (`pbar`, `zbar`, and everything composed from them)
go through the Bromwich quadrature in :mod:`.laplace`; grid-level machinery
(marginals, sampler tables) uses the closed forms, which the test suite
pins against the quadrature route.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import simpson

from .laplace import (
    ContourSpec,
    kernel_closed_form,
    kernel_integral,
    zbar_correction,
    zbar_correction_quadrature,
    zeta_constant,
)
from .radial import RadialDensity, default_radial_grid, gauss_sphere_integral

__all__ = [
    "GridExhaustionError",
    "ZeroRangeParams",
    "pbar",
    "zbar",
    "fdd_density",
    "transition_R",
    "transition_R0",
    "marginal_radial",
    "pbar_sphere_mean",
    "sample_path",
    "sample_paths",
]

# A transition row whose grid captures less than this fraction of its mass
# cannot be inverted honestly; the sampler refuses and asks for a larger grid.
_TAIL_DEFICIT = 1e-6

_TWO_PI = 2.0 * math.pi


class GridExhaustionError(RuntimeError):
    """Radial grid too short for the requested transition; enlarge it."""


@dataclass(frozen=True)
class ZeroRangeParams:
    """Coupling of the limiting measure, plus an optional contour override.

    gamma > 0 tilts paths toward the origin, gamma < 0 away from it,
    gamma = 0 reduces every formula to the free Wiener quantities.
    """

    gamma: float
    contour: ContourSpec | None = None

    def __post_init__(self) -> None:
        if not (isinstance(self.gamma, (int, float)) and math.isfinite(self.gamma)):
            raise ValueError("gamma must be a finite real number")
        object.__setattr__(self, "gamma", float(self.gamma))
        if self.contour is not None and self.gamma > 0.0:
            pole = 0.5 * self.gamma * self.gamma
            if self.contour.apex <= pole:
                raise ValueError(
                    f"contour apex {self.contour.apex:.6g} must exceed the "
                    f"kernel pole at gamma^2/2 = {pole:.6g}"
                )


def _point(x, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != (3,):
        raise ValueError(f"{name} must be a point in R^3, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _radius(x, name: str) -> tuple[np.ndarray, float]:
    arr = _point(x, name)
    r = float(np.sqrt(arr @ arr))
    if r == 0.0:
        raise ValueError(
            f"{name} is the origin; the interaction term 1/|{name}| is "
            "singular there (use transition_R0 for origin-started kernels)"
        )
    return arr, r


def _check_time(t: float, name: str = "t") -> float:
    if not (isinstance(t, (int, float)) and math.isfinite(t) and t > 0.0):
        raise ValueError(f"{name} must be a finite positive time, got {t!r}")
    return float(t)


def pbar(p: ZeroRangeParams, t: float, x, y) -> float:
    """Transition density of the zero-range evolution between off-origin points.

    Free Gaussian kernel plus the interaction excess
    I(gamma, |x|+|y|, t) / (2 pi |x| |y|), the latter evaluated by contour
    quadrature.  Symmetric in (x, y); strictly positive.
    """
    t = _check_time(t)
    xa, rx = _radius(x, "x")
    ya, ry = _radius(y, "y")
    d = xa - ya
    p0 = math.exp(-(d @ d) / (2.0 * t)) / (_TWO_PI * t) ** 1.5
    inter = kernel_integral(p.gamma, rx + ry, t, p.contour) / (_TWO_PI * rx * ry)
    return p0 + inter


def zbar(p: ZeroRangeParams, t: float, x) -> float:
    """Partition factor Z(t, x) = 1 + J(gamma, |x|, t) / |x|, quadrature route."""
    t = _check_time(t)
    _, rx = _radius(x, "x")
    return 1.0 + zbar_correction_quadrature(p.gamma, rx, t, p.contour) / rx


def _zbar_closed(gamma: float, r: np.ndarray, t: float) -> np.ndarray:
    # t = 0 means no remaining horizon: the factor degenerates to 1.
    if t == 0.0:
        return np.ones_like(np.asarray(r, dtype=float))
    return 1.0 + zbar_correction(gamma, r, t) / np.asarray(r, dtype=float)


def fdd_density(p: ZeroRangeParams, T: float, x0, times, points) -> float:
    """Finite-dimensional density of the measure on horizon T started at x0.

    For strictly increasing times 0 < t_1 < ... < t_n <= T and points
    x_1 ... x_n, returns

        (1 / Z(T, x0)) * prod pbar(t_{i+1} - t_i, x_i, x_{i+1}) * Z(T - t_n, x_n)

    with the terminal factor dropped when t_n = T.
    """
    T = _check_time(T, "T")
    _, _ = _radius(x0, "x0")
    ts = np.asarray(times, dtype=float)
    if ts.ndim != 1 or ts.size == 0:
        raise ValueError("times must be a non-empty 1-d sequence")
    if not np.all(np.isfinite(ts)):
        raise ValueError("times must be finite")
    if ts[0] <= 0.0 or np.any(np.diff(ts) <= 0.0) or ts[-1] > T:
        raise ValueError("times must be strictly increasing with 0 < t_1 and t_n <= T")
    pts = [_point(q, f"points[{i}]") for i, q in enumerate(points)]
    if len(pts) != ts.size:
        raise ValueError(f"{ts.size} times but {len(pts)} points")

    dens = 1.0
    prev, prev_t = np.asarray(x0, dtype=float), 0.0
    for t_i, x_i in zip(ts, pts):
        dens *= pbar(p, float(t_i) - prev_t, prev, x_i)
        prev, prev_t = x_i, float(t_i)
    tail = T - prev_t
    if tail > 0.0:
        dens *= zbar(p, tail, prev)
    return dens / zbar(p, T, x0)


def transition_R(p: ZeroRangeParams, s: float, t: float, y, x) -> float:
    """Markov kernel of the unit-horizon bridge of the measure, 0 <= s < t <= 1.

    R(s, t, y, x) = pbar(t - s, y, x) Z(1 - t, x) / Z(1 - s, y); at t = 1 the
    numerator partition factor is absent.
    """
    if not (0.0 <= s < t <= 1.0):
        raise ValueError(f"need 0 <= s < t <= 1, got s = {s!r}, t = {t!r}")
    num = pbar(p, t - s, y, x)
    if t < 1.0:
        num *= zbar(p, 1.0 - t, x)
    return num / zbar(p, 1.0 - s, y)


def transition_R0(p: ZeroRangeParams, t: float, x) -> float:
    """Origin-started kernel R(0, t, 0, x) for 0 < t <= 1, in closed form.

    The 1/|y| blowups of pbar and of Z(1, y) cancel as y -> 0, leaving

        [I(gamma, |x|, t) / (2 pi |x|)] * Z(1 - t, x) / zeta(gamma).
    """
    t = _check_time(t)
    if t > 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t!r}")
    _, rx = _radius(x, "x")
    val = float(kernel_closed_form(p.gamma, rx, t)) / (_TWO_PI * rx)
    if t < 1.0:
        val *= float(_zbar_closed(p.gamma, np.asarray(rx), 1.0 - t))
    return val / zeta_constant(p.gamma)


def marginal_radial(
    p: ZeroRangeParams, t: float, grid: np.ndarray | None = None
) -> RadialDensity:
    """Radial density of |path(t)| under the origin-started unit bridge.

    4 pi r^2 R0(t, x) collapses to (2 / zeta) r I(gamma, r, t) Z(1 - t, r).
    Normalized analytically; the returned table must integrate to 1 within
    1e-3 or the grid is rejected.
    """
    t = _check_time(t)
    if t > 1.0:
        raise ValueError(f"t must lie in (0, 1], got {t!r}")
    if grid is None:
        grid = default_radial_grid()
    r = np.asarray(grid, dtype=float)
    if r.ndim != 1 or r.size < 8 or r[0] != 0.0 or np.any(np.diff(r) <= 0.0):
        raise ValueError("grid must be 1-d, start at 0, and strictly increase")
    body = r[1:]
    vals = (
        (2.0 / zeta_constant(p.gamma))
        * body
        * kernel_closed_form(p.gamma, body, t)
        * _zbar_closed(p.gamma, body, 1.0 - t)
    )
    # r Z(1-t, r) -> J(gamma, 0, 1-t) as r -> 0, so the density does not
    # vanish at the origin for t < 1: the pinned path revisits it
    if t < 1.0:
        d0 = (
            (2.0 / zeta_constant(p.gamma))
            * float(kernel_closed_form(p.gamma, 0.0, t))
            * float(zbar_correction(p.gamma, 0.0, 1.0 - t))
        )
    else:
        d0 = 0.0
    dens = RadialDensity(grid=r, values=np.concatenate(([d0], vals)))
    dens.require_normalized(1e-3)
    return dens


def pbar_sphere_mean(p: ZeroRangeParams, t, r_from, r_to):
    """Mean of pbar(t, y, x) over the directions of x at fixed radii.

    Closed form: the sphere average of the free Gaussian kernel plus the
    (direction-independent) interaction term.  Broadcasts over radii.
    Underlies the radial chain: integrating r_to^2 * 4 pi * this against
    the tail partition factor reproduces Z at the earlier time, which the
    table builder checks row by row.
    """
    t = _check_time(t)
    a = np.asarray(r_from, dtype=float)
    b = np.asarray(r_to, dtype=float)
    if np.any(a <= 0.0) or np.any(b <= 0.0):
        raise ValueError("radii must be positive; use transition_R0 at the origin")
    free = gauss_sphere_integral(t, a, b) / (4.0 * math.pi)
    inter = kernel_closed_form(p.gamma, a + b, t) / (_TWO_PI * a * b)
    return free + inter


# ---------------------------------------------------------------------------
# Path sampler
# ---------------------------------------------------------------------------
#
# The bridge radius is Markov, so a path is a chain of one-dimensional
# inverse-CDF draws: the first step from the radial marginal at t_1, each
# later step from the radial transition row anchored at the current radius.
# Rows are tabulated once per (params, n_steps) on a fixed radial grid and
# shared by every path; y-anchoring interpolates quantiles linearly between
# the two bracketing rows.


class _ChainTables:
    def __init__(
        self,
        x_grid: np.ndarray,
        y_grid: np.ndarray,
        first_cdf: np.ndarray,
        step_cdfs: np.ndarray,
        row_ok: np.ndarray,
        n_steps: int,
    ) -> None:
        self.x_grid = x_grid
        self.y_grid = y_grid
        self.first_cdf = first_cdf
        self.step_cdfs = step_cdfs  # (n_steps - 1, ny, nx), normalized rows
        self.row_ok = row_ok  # (n_steps - 1, ny) tail-coverage flags
        self.n_steps = n_steps


def _row_cdf(x: np.ndarray, rows: np.ndarray) -> np.ndarray:
    # cumulative trapezoid along the last axis, normalized to end at 1
    dx = np.diff(x)
    inc = 0.5 * (rows[..., 1:] + rows[..., :-1]) * dx
    cdf = np.concatenate(
        [np.zeros(rows.shape[:-1] + (1,)), np.cumsum(inc, axis=-1)], axis=-1
    )
    return cdf / cdf[..., -1:]


@lru_cache(maxsize=4)
def _tables(p: ZeroRangeParams, n_steps: int) -> _ChainTables:
    x = default_radial_grid()
    # anchor radii: geometric, same span as the sample grid so a drawn
    # radius always brackets
    y = np.geomspace(1e-3, x[-1], 256)
    dt = 1.0 / n_steps

    marg = marginal_radial(p, dt, grid=x)
    # the marginal is normalized analytically, so its Simpson mass doubles
    # as a tail-coverage certificate for the first draw
    reach = float(simpson(marg.values, x=x))
    if reach < 1.0 - _TAIL_DEFICIT:
        raise GridExhaustionError(
            f"radial grid [0, {x[-1]:g}] captures only {reach:.8f} of the "
            f"time-{dt:g} marginal; enlarge the grid"
        )
    first_cdf = _row_cdf(x, marg.values[None, :])[0]

    step_cdfs = np.empty((n_steps - 1, y.size, x.size))
    row_ok = np.empty((n_steps - 1, y.size), dtype=bool)
    body = x[1:]
    for k in range(2, n_steps + 1):
        tail = (n_steps - k) * dt
        mean = pbar_sphere_mean(p, dt, y[:, None], body[None, :])
        # x = 0 column: x^2 * [I/(2 pi x y)] * [J(x, tail)/x] survives the
        # limit, everything else dies; zero only on the final step
        if tail > 0.0:
            col0 = (
                2.0
                * kernel_closed_form(p.gamma, y, dt)
                * float(zbar_correction(p.gamma, 0.0, tail))
                / y
            )
        else:
            col0 = np.zeros(y.size)
        rows = np.concatenate(
            [
                col0[:, None],
                4.0
                * math.pi
                * body[None, :] ** 2
                * mean
                * _zbar_closed(p.gamma, body, tail)[None, :],
            ],
            axis=1,
        )
        # row mass should match the partition factor still ahead of the anchor
        expected = _zbar_closed(p.gamma, y, tail + dt)
        mass = simpson(rows, x=x, axis=1)
        row_ok[k - 2] = mass >= (1.0 - _TAIL_DEFICIT) * expected
        step_cdfs[k - 2] = _row_cdf(x, rows)
    return _ChainTables(x, y, first_cdf, step_cdfs, row_ok, n_steps)


def _inverse_cdf(xs: np.ndarray, cdf: np.ndarray, u: np.ndarray) -> np.ndarray:
    idx = np.clip(np.searchsorted(cdf, u, side="left"), 1, xs.size - 1)
    c0 = cdf[idx - 1]
    span = np.maximum(cdf[idx] - c0, 1e-300)
    w = np.clip((u - c0) / span, 0.0, 1.0)
    return xs[idx - 1] + w * (xs[idx] - xs[idx - 1])


def _walk(tab: _ChainTables, uniforms: np.ndarray) -> np.ndarray:
    m, n_steps = uniforms.shape
    x, y = tab.x_grid, tab.y_grid
    out = np.zeros((m, n_steps + 1))
    out[:, 1] = _inverse_cdf(x, tab.first_cdf, uniforms[:, 0])
    for k in range(2, n_steps + 1):
        r_prev = out[:, k - 1]
        if np.any(r_prev > y[-1]):
            raise GridExhaustionError(
                f"path radius {r_prev.max():.4g} left the anchor grid "
                f"[0, {y[-1]:g}] at step {k}; enlarge the grid"
            )
        hi = np.clip(np.searchsorted(y, r_prev), 1, y.size - 1)
        lo = hi - 1
        ok = tab.row_ok[k - 2]
        if not np.all(ok[lo] & ok[hi]):
            bad = r_prev[~(ok[lo] & ok[hi])][0]
            raise GridExhaustionError(
                f"transition CDF from r = {bad:.4g} at step {k} misses more "
                f"than {_TAIL_DEFICIT:g} of its mass on [0, {x[-1]:g}]; "
                "enlarge the grid"
            )
        # quantile interpolation between the bracketing anchor rows
        frac = np.clip((r_prev - y[lo]) / (y[hi] - y[lo]), 0.0, 1.0)
        u = uniforms[:, k - 1]
        cdfs = tab.step_cdfs[k - 2]
        q_lo = np.empty(m)
        q_hi = np.empty(m)
        for j in np.unique(lo):
            sel = lo == j
            q_lo[sel] = _inverse_cdf(x, cdfs[j], u[sel])
        for j in np.unique(hi):
            sel = hi == j
            q_hi[sel] = _inverse_cdf(x, cdfs[j], u[sel])
        out[:, k] = (1.0 - frac) * q_lo + frac * q_hi
    return out


def _check_steps(n_steps: int) -> int:
    if not (isinstance(n_steps, (int, np.integer)) and n_steps >= 1):
        raise ValueError(f"n_steps must be a positive integer, got {n_steps!r}")
    return int(n_steps)


def sample_path(
    p: ZeroRangeParams, n_steps: int, seed: int, path_index: int = 0
) -> np.ndarray:
    """One radial bridge path at times k / n_steps, k = 0 .. n_steps.

    Deterministic in (seed, path_index): the draw stream is spawned from
    SeedSequence(seed) at the given index, so row i of
    :func:`sample_paths` is exactly ``sample_path(..., path_index=i)``.
    """
    n_steps = _check_steps(n_steps)
    tab = _tables(p, n_steps)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(int(path_index),))
    u = np.random.Generator(np.random.PCG64(ss)).random(n_steps)
    return _walk(tab, u[None, :])[0]


def sample_paths(
    p: ZeroRangeParams, n_steps: int, n_paths: int, seed: int
) -> np.ndarray:
    """Radial bridge paths, shape (n_paths, n_steps + 1), per-path streams."""
    n_steps = _check_steps(n_steps)
    if not (isinstance(n_paths, (int, np.integer)) and n_paths >= 1):
        raise ValueError(f"n_paths must be a positive integer, got {n_paths!r}")
    tab = _tables(p, n_steps)
    children = np.random.SeedSequence(seed).spawn(int(n_paths))
    uniforms = np.empty((int(n_paths), n_steps))
    for i, child in enumerate(children):
        uniforms[i] = np.random.Generator(np.random.PCG64(child)).random(n_steps)
    return _walk(tab, uniforms)
