"""Discrete probability measures on the real line and their transforms.

Provides the measure container used throughout the package together with
the Stieltjes transform, the negative reciprocal (F) transform and its
derivative, the exact Levy distance between step CDFs, and a Richardson
extrapolation scheme that recovers densities from a Stieltjes transform
evaluated at small imaginary offsets.
"""

import json
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DiscreteMeasure",
    "SpectralParam",
    "GridDensity",
    "make_measure",
    "stieltjes",
    "f_transform",
    "f_prime",
    "levy_distance",
    "cdf",
    "invert_density",
    "quantile_atoms",
    "load_measure",
    "dump_measure",
    "measure_from_dict",
    "measure_to_dict",
]

# Atoms closer than this are merged into a single atom at construction.
MERGE_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """A purely atomic probability measure: sorted atoms with positive weights.

    Instances are immutable and should be built through :func:`make_measure`,
    which sorts, merges duplicates and renormalizes.
    """

    atoms: np.ndarray
    weights: np.ndarray

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (np.array_equal(self.atoms, other.atoms)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.atoms.tobytes(), self.weights.tobytes()))

    def __post_init__(self):
        a = np.asarray(self.atoms, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if a.ndim != 1 or w.ndim != 1 or a.size != w.size or a.size == 0:
            raise ValueError("atoms and weights must be 1-d of equal nonzero length")
        if not np.all(np.isfinite(a)):
            raise ValueError("non-finite atom position")
        if np.any(w < 0):
            raise ValueError("negative weight")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        if np.any(np.diff(a) <= 0):
            raise ValueError("atoms must be strictly increasing (use make_measure)")
        a.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "atoms", a)
        object.__setattr__(self, "weights", w)

    @property
    def n_atoms(self):
        return self.atoms.size

    def support_bounds(self):
        return float(self.atoms[0]), float(self.atoms[-1])

    def is_point_mass(self):
        return self.atoms.size == 1

    def shifted(self, s):
        """Measure translated by ``s``."""
        return DiscreteMeasure(self.atoms + float(s), self.weights)


@dataclass(frozen=True)
class SpectralParam:
    """A point z = e + i*eta in the open upper half-plane."""

    e: float
    eta: float

    def __post_init__(self):
        if not (self.eta > 0):
            raise ValueError("eta must be positive")

    @property
    def z(self):
        return complex(self.e, self.eta)


@dataclass(frozen=True)
class GridDensity:
    """Density estimates on a grid, with the final inversion scale used."""

    grid: np.ndarray
    values: np.ndarray
    eta_used: float
    failed: tuple = field(default=())

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if g.ndim != 1 or v.shape != g.shape:
            raise ValueError("grid and values must be 1-d of equal length")
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("grid must be strictly increasing")
        if np.any(v < 0):
            raise ValueError("density values must be nonnegative")
        g.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "grid", g)
        object.__setattr__(self, "values", v)

    def trapezoid_mass(self, lo=None, hi=None):
        """Trapezoid integral of the density over [lo, hi] (full grid by default)."""
        g, v = self.grid, self.values
        if lo is not None or hi is not None:
            lo = g[0] if lo is None else lo
            hi = g[-1] if hi is None else hi
            keep = (g >= lo) & (g <= hi)
            g, v = g[keep], v[keep]
        if g.size < 2:
            return 0.0
        return float(np.trapezoid(v, g))


def make_measure(atoms, weights=None):
    """Build a :class:`DiscreteMeasure` from raw atom/weight lists.

    Atoms are sorted ascending; atoms closer than ``MERGE_TOL`` are merged
    with their weights added; weights are renormalized to sum to exactly 1.
    When ``weights`` is omitted the measure is uniform on the atoms.

    Raises
    ------
    ValueError
        On length mismatch, negative weight, non-finite atom, or zero
        total mass (each with a distinct message).
    """
    a = np.atleast_1d(np.asarray(atoms, dtype=float))
    if weights is None:
        w = np.full(a.size, 1.0 / max(a.size, 1))
    else:
        w = np.atleast_1d(np.asarray(weights, dtype=float))
    if a.size == 0 or w.size == 0:
        raise ValueError("empty atom or weight list")
    if a.size != w.size:
        raise ValueError("length mismatch between atoms and weights")
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite atom position")
    if not np.all(np.isfinite(w)):
        raise ValueError("non-finite weight")
    if np.any(w < 0):
        raise ValueError("negative weight")
    total = w.sum()
    if total <= 0:
        raise ValueError("zero total mass")
    if abs(total - 1.0) > 1e-9:
        raise ValueError("weights must sum to 1 within 1e-9")

    order = np.argsort(a, kind="stable")
    a, w = a[order], w[order]
    # merge runs of near-identical atoms, weight at the run's first position
    keep_a, keep_w = [a[0]], [w[0]]
    for x, m in zip(a[1:], w[1:]):
        if x - keep_a[-1] <= MERGE_TOL:
            keep_w[-1] += m
        else:
            keep_a.append(x)
            keep_w.append(m)
    a = np.array(keep_a)
    w = np.array(keep_w)
    w = w / w.sum()
    return DiscreteMeasure(a, w)


def _as_z(z):
    """Accept a SpectralParam or a bare complex number in the upper half-plane."""
    if isinstance(z, SpectralParam):
        return z.z
    z = complex(z)
    if z.imag <= 0:
        raise ValueError("spectral parameter must lie in the upper half-plane")
    return z


def stieltjes(mu, z):
    """Stieltjes transform sum_k w_k / (a_k - z) at one upper half-plane point."""
    zz = _as_z(z)
    return complex(np.sum(mu.weights / (mu.atoms - zz)))


def stieltjes_many(mu, z):
    """Vectorized Stieltjes transform over an array of complex points."""
    z = np.asarray(z, dtype=complex)
    return (mu.weights[:, None] / (mu.atoms[:, None] - z.ravel()[None, :])).sum(axis=0).reshape(z.shape)


def f_transform(mu, z):
    """Negative reciprocal Stieltjes transform F = -1/m; satisfies Im F >= Im z."""
    return -1.0 / stieltjes(mu, z)


def f_prime(mu, z):
    """Analytic derivative F'(z) = m'(z)/m(z)^2; tends to 1 as Im z grows."""
    zz = _as_z(z)
    d = mu.atoms - zz
    m = complex(np.sum(mu.weights / d))
    mp = complex(np.sum(mu.weights / (d * d)))
    return mp / (m * m)


def cdf(mu, x):
    """Right-continuous step CDF: total weight of atoms <= x. Vectorizes over x."""
    idx = np.searchsorted(mu.atoms, np.asarray(x, dtype=float), side="right")
    cum = np.concatenate([[0.0], np.cumsum(mu.weights)])
    out = cum[idx]
    return float(out) if np.ndim(x) == 0 else out


def _envelope_ok(mu1, mu2, eps):
    # Levy envelope F(x-eps)-eps <= G(x) <= F(x+eps)+eps for all x. For step
    # CDFs it suffices to test each CDF's own jump points against the other
    # CDF shifted by eps.
    if np.any(cdf(mu2, mu1.atoms + eps) + eps < cdf(mu1, mu1.atoms) - 1e-15):
        return False
    if np.any(cdf(mu1, mu2.atoms + eps) + eps < cdf(mu2, mu2.atoms) - 1e-15):
        return False
    return True


def levy_distance(mu1, mu2, tol=1e-10):
    """Exact Levy distance between two step CDFs, by bisection on the envelope.

    The envelope criterion is checked only at the (finite) jump sets, which
    is sufficient for step CDFs; bisection runs to absolute tolerance
    ``tol`` on the candidate slack. The result lies in [0, 1].
    """
    if _envelope_ok(mu1, mu2, 0.0):
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if _envelope_ok(mu1, mu2, mid):
            hi = mid
        else:
            lo = mid
    return hi


def _check_schedule(eta_schedule):
    sched = np.asarray(eta_schedule, dtype=float)
    if sched.size < 2:
        raise ValueError("eta schedule needs at least 2 entries")
    if np.any(sched <= 0) or np.any(np.diff(sched) >= 0):
        raise ValueError("eta schedule must be positive and strictly decreasing")
    return sched


def richardson_pair(v_coarse, v_fine, eta_coarse, eta_fine):
    """Extrapolate v(eta) = v0 + c*eta to eta -> 0 from two evaluations."""
    return (eta_coarse * v_fine - eta_fine * v_coarse) / (eta_coarse - eta_fine)


def invert_density(m_evaluator, grid, eta_schedule):
    """Recover a density from a Herglotz function by extrapolated inversion.

    Evaluates ``m_evaluator(E + i*eta)`` along the decreasing ``eta_schedule``
    and extrapolates Im m / pi to eta -> 0 with the two smallest scales,
    assuming a bias linear in eta. Values are clamped at zero from below.
    """
    sched = _check_schedule(eta_schedule)
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    e1, e0 = sched[-2], sched[-1]
    v1 = np.array([(m_evaluator(complex(E, e1))).imag for E in grid])
    v0 = np.array([(m_evaluator(complex(E, e0))).imag for E in grid])
    dens = richardson_pair(v1, v0, e1, e0) / np.pi
    return GridDensity(grid, np.maximum(dens, 0.0), float(e0))


def quantile_atoms(mu, n):
    """Deterministic n-point quantile sample a_i = inf{x : CDF(x) >= (i-1/2)/n}."""
    if n < 1:
        raise ValueError("n must be >= 1")
    probs = (np.arange(1, n + 1) - 0.5) / n
    cum = np.cumsum(mu.weights)
    idx = np.searchsorted(cum, probs - 1e-15, side="left")
    idx = np.minimum(idx, mu.atoms.size - 1)
    return mu.atoms[idx].copy()


# ---------------------------------------------------------------------------
# JSON interchange format: {"atoms": [...], "weights": [...]}; the weights
# key is optional and defaults to uniform.
# ---------------------------------------------------------------------------

def measure_from_dict(obj):
    if not isinstance(obj, dict) or "atoms" not in obj:
        raise ValueError("measure object must be a JSON object with an 'atoms' key")
    extra = set(obj) - {"atoms", "weights"}
    if extra:
        raise ValueError(f"unknown measure keys: {sorted(extra)}")
    return make_measure(obj["atoms"], obj.get("weights"))


def measure_to_dict(mu):
    return {"atoms": [float(x) for x in mu.atoms],
            "weights": [float(w) for w in mu.weights]}


def load_measure(path):
    """Read a measure from a UTF-8 JSON file in the interchange format."""
    with open(path, "r", encoding="utf-8") as fh:
        return measure_from_dict(json.load(fh))


def dump_measure(mu, path):
    """Write a measure to a UTF-8 JSON file in the interchange format."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(measure_to_dict(mu), fh)
        fh.write("\n")
