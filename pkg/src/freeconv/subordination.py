"""Subordination fixed-point solver for the free additive convolution.

Solves, for two discrete measures and a spectral parameter z in the upper
half-plane, the analytic system

    F_1(w2) - w1 - w2 + z = 0,      F_2(w1) - w1 - w2 + z = 0,

whose unique upper half-plane solution (w1, w2) defines the free additive
convolution through F(z) = F_1(w2(z)).  The solver iterates the analytic
self-map w1 -> z + H_1(z + H_2(w1)) with H_j(w) = F_j(w) - w, which
contracts on the upper half-plane, and accelerates with a damped Newton
step on the residual whenever plain iteration is slow.  On top of the
solver sit the convolution's Stieltjes transform, density, interval
masses, linear-stability report, and regular-bulk window scans.
"""

from dataclasses import dataclass

import numpy as np

from .measures import (
    DiscreteMeasure,
    GridDensity,
    _as_z,
    richardson_pair,
)

__all__ = [
    "SubordinationPair",
    "StabilityReport",
    "BulkWindow",
    "SubordinationError",
    "UnstablePointError",
    "phi_residual",
    "solve_subordination",
    "stability_constant",
    "free_conv_stieltjes",
    "convolution_density",
    "convolution_interval_mass",
    "regular_bulk",
    "DEFAULT_TOL",
    "DEFAULT_MAX_ITER",
    "DEFAULT_ETA_SCHEDULE",
]

DEFAULT_TOL = 1e-12
DEFAULT_MAX_ITER = 10000
DEFAULT_ETA_SCHEDULE = (1e-2, 5e-3, 2.5e-3)

# Try a Newton step on lanes that are still active every this many
# fixed-point sweeps; plain iteration contracts at rate 1 - O(eta) near the
# real axis, so waiting for a literal stall would cost thousands of sweeps.
_NEWTON_EVERY = 10
_NEWTON_BURST = 8


class SubordinationError(RuntimeError):
    """Solver failed to converge; carries the best iterate and its residual."""

    def __init__(self, message, omega1=None, omega2=None, residual=None,
                 iterations=None):
        super().__init__(message)
        self.omega1 = omega1
        self.omega2 = omega2
        self.residual = residual
        self.iterations = iterations


class UnstablePointError(RuntimeError):
    """The 2x2 linearization of the subordination system is numerically singular."""


@dataclass(frozen=True)
class SubordinationPair:
    """Solved subordination point: (w1, w2), F and m values, residual, iterations."""

    omega1: complex
    omega2: complex
    f_value: complex
    m_value: complex
    residual: float
    iterations: int
    z: complex

    def __post_init__(self):
        im_floor = self.z.imag - 1e-10
        if self.omega1.imag < im_floor or self.omega2.imag < im_floor:
            raise ValueError("subordination point left the upper half-plane")
        slack = max(1e-10, 10.0 * self.residual)
        if abs(self.omega1 + self.omega2 - self.z - self.f_value) > slack:
            raise ValueError("pair violates the second defining equation")


@dataclass(frozen=True)
class StabilityReport:
    """Linear stability of the solved system at one spectral parameter.

    ``s_constant`` is the operator norm of the inverse 2x2 linearization;
    the Im/abs fields record the solved point's bounds (the data entering
    upper/lower subordination bounds on a compact z-set).
    """

    s_constant: float
    fprime1: complex
    fprime2: complex
    im_omega1: float
    im_omega2: float
    abs_omega1: float
    abs_omega2: float

    def __post_init__(self):
        if not (self.s_constant > 0):
            raise ValueError("s_constant must be positive")


@dataclass(frozen=True)
class BulkWindow:
    """A maximal interval on which the convolution density is positive and finite."""

    lo: float
    hi: float
    min_density: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise ValueError("window must have lo < hi")
        if not (self.min_density > 0):
            raise ValueError("min_density must be positive")


# ---------------------------------------------------------------------------
# vectorized transform helpers over complex arrays
# ---------------------------------------------------------------------------

def _m_vec(mu, w):
    return (mu.weights[:, None] / (mu.atoms[:, None] - w[None, :])).sum(axis=0)


def _f_vec(mu, w):
    return -1.0 / _m_vec(mu, w)


def _fp_vec(mu, w):
    d = mu.atoms[:, None] - w[None, :]
    m = (mu.weights[:, None] / d).sum(axis=0)
    mp = (mu.weights[:, None] / (d * d)).sum(axis=0)
    return mp / (m * m)


def _phi_vec(mu1, mu2, w1, w2, z):
    common = -w1 - w2 + z
    return _f_vec(mu1, w2) + common, _f_vec(mu2, w1) + common


def phi_residual(mu1, mu2, omega1, omega2, z):
    """The two components of the subordination residual map at (w1, w2, z)."""
    w1 = np.atleast_1d(np.asarray(omega1, dtype=complex))
    w2 = np.atleast_1d(np.asarray(omega2, dtype=complex))
    zz = np.atleast_1d(np.asarray(_as_z(z), dtype=complex))
    p1, p2 = _phi_vec(mu1, mu2, w1, w2, zz)
    return complex(p1[0]), complex(p2[0])


def _residual_norm(p1, p2):
    return np.sqrt(np.abs(p1) ** 2 + np.abs(p2) ** 2)


def _newton_step(mu1, mu2, w1, w2, z, r, mask):
    """One damped Newton step on the lanes in ``mask``; rejects on worsening."""
    p1, p2 = _phi_vec(mu1, mu2, w1, w2, z)
    b = _fp_vec(mu1, w2) - 1.0
    c = _fp_vec(mu2, w1) - 1.0
    det = 1.0 - b * c
    bad = np.abs(det) < 1e-300
    det = np.where(bad, 1.0, det)
    d1 = np.where(bad, 0.0, (p1 + b * p2) / det)
    d2 = np.where(bad, 0.0, (c * p1 + p2) / det)

    best1, best2, bestr = w1.copy(), w2.copy(), r.copy()
    improved = np.zeros(w1.shape, dtype=bool)
    step = 1.0
    for _ in range(5):
        c1 = w1 + step * d1
        c2 = w2 + step * d2
        ok = mask & (c1.imag > 0) & (c2.imag > 0)
        q1, q2 = _phi_vec(mu1, mu2, c1, c2, z)
        rn = _residual_norm(q1, q2)
        take = ok & (rn < bestr) & ~improved
        best1 = np.where(take, c1, best1)
        best2 = np.where(take, c2, best2)
        bestr = np.where(take, rn, bestr)
        improved |= take
        step *= 0.5
    return best1, best2, bestr, improved


def _solve_many(mu1, mu2, z, tol, max_iter, w1_start=None):
    """Solve the subordination system at each entry of the complex array z.

    Returns (w1, w2, residual, iterations, converged) arrays of z's shape.
    A lane is frozen as soon as its residual norm drops below tol, and each
    lane's update schedule depends only on the global sweep counter and its
    own state, so batching does not change any individual result.
    """
    z = np.asarray(z, dtype=complex)
    shape = z.shape
    z = z.ravel()
    if np.any(z.imag <= 0):
        raise ValueError("spectral parameters must lie in the upper half-plane")

    if w1_start is None:
        w1 = z + 1j
    else:
        w1 = np.asarray(w1_start, dtype=complex).ravel().copy()
        w1 = np.where(w1.imag > 0, w1, z + 1j)
    w2 = z + (_f_vec(mu2, w1) - w1)

    p1, p2 = _phi_vec(mu1, mu2, w1, w2, z)
    r = _residual_norm(p1, p2)
    iters = np.zeros(z.shape, dtype=np.int64)
    done = r <= tol
    stalled = np.zeros(z.shape, dtype=bool)
    best1, best2, bestr = w1.copy(), w2.copy(), r.copy()

    it = 0
    while it < max_iter and not np.all(done | stalled):
        active = ~(done | stalled)
        # fixed-point sweep on active lanes
        w2_new = z + (_f_vec(mu2, w1) - w1)
        w1_new = z + (_f_vec(mu1, w2_new) - w2_new)
        move = np.abs(w1_new - w1)
        w1 = np.where(active, w1_new, w1)
        w2 = np.where(active, w2_new, w2)
        iters = iters + active
        it += 1

        p1, p2 = _phi_vec(mu1, mu2, w1, w2, z)
        r = np.where(active, _residual_norm(p1, p2), r)
        done |= r <= tol

        flat = active & (move < 1e-15 * (1.0 + np.abs(w1))) & ~done
        newton_mask = flat | (~(done | stalled) if it % _NEWTON_EVERY == 0 else flat)
        if it >= 2 and np.any(newton_mask):
            any_improved = np.zeros(z.shape, dtype=bool)
            for _ in range(_NEWTON_BURST + 1):
                w1, w2, r, improved = _newton_step(
                    mu1, mu2, w1, w2, z, r, newton_mask & ~done)
                done |= r <= tol
                any_improved |= improved
                if not np.any(improved & ~done):
                    break
            # lanes that neither the map nor Newton can move are spent
            stalled |= flat & ~any_improved & ~done

        better = r < bestr
        best1 = np.where(better, w1, best1)
        best2 = np.where(better, w2, best2)
        bestr = np.where(better, r, bestr)

    w1 = np.where(done, w1, best1)
    w2 = np.where(done, w2, best2)
    r = np.where(done, r, bestr)
    return (w1.reshape(shape), w2.reshape(shape), r.reshape(shape),
            iters.reshape(shape), done.reshape(shape))


def solve_subordination(mu1, mu2, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                        warm_start=None):
    """Solve the subordination system at one spectral parameter.

    Parameters
    ----------
    mu1, mu2 : DiscreteMeasure
        The two measures being convolved.
    z : complex or SpectralParam
        Spectral parameter in the upper half-plane.
    tol : float
        Euclidean norm bound on the residual at acceptance.
    max_iter : int
        Fixed-point sweep budget.
    warm_start : SubordinationPair, optional
        Previous solution (typically at a nearby z) used as the initial
        iterate; continuation along a decreasing eta path.

    Returns
    -------
    SubordinationPair

    Raises
    ------
    SubordinationError
        On non-convergence; the exception carries the best iterate and its
        residual rather than returning a silently bad answer.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    zz = _as_z(z)
    start = None
    if warm_start is not None:
        start = np.array([warm_start.omega1], dtype=complex)
    w1, w2, r, iters, ok = _solve_many(
        mu1, mu2, np.array([zz]), tol, max_iter, start)
    if not ok[0]:
        raise SubordinationError(
            f"subordination solver did not reach tol={tol:g} at z={zz:g} "
            f"(residual {r[0]:.3e} after {int(iters[0])} sweeps)",
            omega1=complex(w1[0]), omega2=complex(w2[0]),
            residual=float(r[0]), iterations=int(iters[0]))
    f_val = complex(_f_vec(mu1, w2)[0])
    return SubordinationPair(
        omega1=complex(w1[0]), omega2=complex(w2[0]), f_value=f_val,
        m_value=-1.0 / f_val, residual=float(r[0]),
        iterations=int(iters[0]), z=zz)


def stability_constant(mu1, mu2, pair):
    """Operator norm of the inverse 2x2 linearization at a solved pair.

    The linearization is [[-1, F_1'(w2) - 1], [F_2'(w1) - 1, -1]]; its
    inverse's operator norm (1/sigma_min) controls how residuals in the
    system propagate to errors in (w1, w2).
    """
    fp1 = complex(_fp_vec(mu1, np.array([pair.omega2]))[0])
    fp2 = complex(_fp_vec(mu2, np.array([pair.omega1]))[0])
    mat = np.array([[-1.0, fp1 - 1.0], [fp2 - 1.0, -1.0]], dtype=complex)
    smin = float(np.linalg.svd(mat, compute_uv=False)[-1])
    if smin < 1e-14:
        raise UnstablePointError(
            f"linearization singular at z={pair.z:g} (sigma_min={smin:.3e})")
    return StabilityReport(
        s_constant=1.0 / smin, fprime1=fp1, fprime2=fp2,
        im_omega1=pair.omega1.imag, im_omega2=pair.omega2.imag,
        abs_omega1=abs(pair.omega1), abs_omega2=abs(pair.omega2))


def free_conv_stieltjes(mu1, mu2, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                        warm_start=None):
    """Stieltjes transform of the free additive convolution at z."""
    return solve_subordination(mu1, mu2, z, tol, max_iter, warm_start).m_value


def _m_conv_on_grid(mu1, mu2, grid, eta_schedule, tol, max_iter):
    """m of the convolution at grid x {i*eta} for the two smallest etas.

    Sweeps eta downward through the schedule with per-lane warm starting.
    Returns (m_coarse, m_fine, ok) for the last two eta levels.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    sched = np.asarray(eta_schedule, dtype=float)
    if sched.size < 2 or np.any(sched <= 0) or np.any(np.diff(sched) >= 0):
        raise ValueError("eta schedule must be positive, strictly decreasing, >= 2 entries")
    w1 = None
    ok = np.ones(grid.shape, dtype=bool)
    m_levels = []
    for eta in sched:
        z = grid + 1j * eta
        w1, w2, r, _, conv = _solve_many(mu1, mu2, z, tol, max_iter, w1)
        ok &= conv
        if eta in (sched[-1], sched[-2]):
            m_levels.append(-1.0 / _f_vec(mu1, w2))
    return m_levels[0], m_levels[1], ok


def convolution_density(mu1, mu2, grid, eta_schedule=DEFAULT_ETA_SCHEDULE,
                        tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Density of the convolution's absolutely continuous part on a grid.

    Each grid point is solved by sweeping eta downward through the schedule
    (warm-starting each level from the previous one) and extrapolating
    Im m / pi to eta -> 0.  Solver failures are flagged per point in
    ``GridDensity.failed``, with the density set to 0 there; they are not
    fatal for the other points.
    """
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    sched = np.asarray(eta_schedule, dtype=float)
    m1, m0, ok = _m_conv_on_grid(mu1, mu2, grid, sched, tol, max_iter)
    dens = richardson_pair(m1.imag, m0.imag, sched[-2], sched[-1]) / np.pi
    dens = np.where(ok, np.maximum(dens, 0.0), 0.0)
    failed = tuple(int(i) for i in np.nonzero(~ok)[0])
    return GridDensity(grid, dens, float(sched[-1]), failed=failed)


def _point_mass_shift_mass(mu, shift, lo, hi):
    # convolving with a single point mass is an exact translation
    in_iv = (mu.atoms + shift > lo) & (mu.atoms + shift <= hi)
    return float(mu.weights[in_iv].sum())


_BULK_CACHE = {}


def _measure_key(mu):
    return (mu.atoms.tobytes(), mu.weights.tobytes())


def _scan_window(mu1, mu2):
    lo1, hi1 = mu1.support_bounds()
    lo2, hi2 = mu2.support_bounds()
    lo, hi = lo1 + lo2, hi1 + hi2
    pad = 0.1 * max(hi - lo, 1.0)
    return lo - pad, hi + pad


def regular_bulk(mu1, mu2, scan_lo, scan_hi, resolution=601, density_floor=0.01,
                 density_cap=1e3, eta_schedule=DEFAULT_ETA_SCHEDULE,
                 f_floor=1e-6, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """Maximal intervals where the convolution density is positive and finite.

    The scanned (extrapolated) density must lie in [density_floor,
    density_cap]; points where |F| at the smallest probing scale falls
    under ``f_floor`` are excluded, as are points whose Im m still grows as
    eta decreases (the signature of a point mass rather than an absolutely
    continuous part: for an atom Im m scales like 1/eta, for a density it
    is flat in eta).  Returns possibly-empty list of windows.
    """
    if not (scan_lo < scan_hi):
        raise ValueError("scan range must have scan_lo < scan_hi")
    if density_floor <= 0:
        raise ValueError("density_floor must be positive")
    if mu1.is_point_mass() or mu2.is_point_mass():
        return []  # translate of a pure-point measure: no a.c. part
    grid = np.linspace(scan_lo, scan_hi, int(resolution))
    sched = np.asarray(eta_schedule, dtype=float)
    m1, m0, ok = _m_conv_on_grid(mu1, mu2, grid, sched, tol, max_iter)
    dens = richardson_pair(m1.imag, m0.imag, sched[-2], sched[-1]) / np.pi

    ratio_cap = np.sqrt(sched[-2] / sched[-1])
    stable = m0.imag <= ratio_cap * np.maximum(m1.imag, 1e-300)
    admitted = (ok & stable
                & (dens >= density_floor) & (dens <= density_cap)
                & (np.abs(m0) <= 1.0 / f_floor))

    windows = []
    i = 0
    n = grid.size
    while i < n:
        if not admitted[i]:
            i += 1
            continue
        j = i
        while j + 1 < n and admitted[j + 1]:
            j += 1
        if j > i:
            windows.append(BulkWindow(
                lo=float(grid[i]), hi=float(grid[j]),
                min_density=float(dens[i:j + 1].min())))
        i = j + 1
    return windows


def _bulk_windows_cached(mu1, mu2, **kw):
    key = (_measure_key(mu1), _measure_key(mu2),
           tuple(sorted((k, tuple(v) if isinstance(v, (list, tuple)) else v)
                        for k, v in kw.items())))
    if key not in _BULK_CACHE:
        lo, hi = _scan_window(mu1, mu2)
        _BULK_CACHE[key] = regular_bulk(mu1, mu2, lo, hi, **kw)
    return _BULK_CACHE[key]


def convolution_interval_mass(mu1, mu2, lo, hi, n_points=2001,
                              eta_schedule=DEFAULT_ETA_SCHEDULE,
                              tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER,
                              bulk_floor=1e-3, skip_bulk_check=False):
    """Mass the convolution assigns to (lo, hi], by extrapolated quadrature.

    Integrates the extrapolated density on >= 2000 trapezoid nodes across
    [lo, hi]; absolute accuracy target 1e-4 inside the regular bulk.  When
    either measure is a single point mass the convolution is an exact
    translation and the mass is computed discretely instead.  Otherwise the
    interval must sit inside a regular-bulk window (scanned at
    ``bulk_floor``), or a ValueError is raised.
    """
    if not (lo < hi):
        raise ValueError("interval must have lo < hi")
    if mu1.is_point_mass():
        return _point_mass_shift_mass(mu2, float(mu1.atoms[0]), lo, hi)
    if mu2.is_point_mass():
        return _point_mass_shift_mass(mu1, float(mu2.atoms[0]), lo, hi)
    if not skip_bulk_check:
        windows = _bulk_windows_cached(mu1, mu2, density_floor=bulk_floor,
                                       eta_schedule=tuple(eta_schedule))
        slack = 1e-9
        if not any(w.lo - slack <= lo and hi <= w.hi + slack for w in windows):
            raise ValueError(
                f"interval [{lo:g}, {hi:g}] is not inside a regular-bulk window")
    n_points = max(int(n_points), 2001)
    dens = convolution_density(mu1, mu2, np.linspace(lo, hi, n_points),
                               eta_schedule, tol, max_iter)
    if dens.failed:
        raise SubordinationError(
            f"solver failed at {len(dens.failed)} quadrature nodes in [{lo:g}, {hi:g}]")
    return dens.trapezoid_mass()
