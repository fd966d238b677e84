"""Random-matrix model H = A + U B U* with Haar unitaries.

Covers exact Haar sampling by Ginibre QR with phase correction, assembly
and diagonalization of H, interval masses of the empirical spectrum, and
the rank-one partial-randomness decomposition of a Haar unitary

    U = -exp(i theta_i) R_i U<i>,

which isolates the randomness of column i into a Householder reflection
R_i = I - r_i r_i* while U<i> fixes e_i.  All randomness flows through
named, seedable, splittable streams so replicas are reproducible
regardless of scheduling.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

__all__ = [
    "EnsembleSpec",
    "HaarUnitary",
    "Decomposition",
    "SpectralData",
    "rng_stream",
    "sample_haar",
    "sample_haar_with_column",
    "build_h",
    "eigen_h",
    "empirical_interval_mass",
    "partial_decomposition",
    "h_bracket",
]


def rng_stream(*key):
    """Independent PCG64 generator derived from an integer key tuple.

    ``rng_stream(seed, r)`` gives replica r its own stream; distinct key
    tuples give statistically independent, reproducible streams.
    """
    ints = [int(k) & 0xFFFFFFFFFFFFFFFF for k in key]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(ints)))


@dataclass(frozen=True)
class EnsembleSpec:
    """Deterministic data of one H = A + U B U* ensemble.

    ``a_diag`` and ``b_diag`` are the eigenvalues of the diagonal matrices
    A and B; ``seed`` is the 64-bit master seed.  With ``center=True`` both
    diagonals are shifted to zero trace at construction.  ``norm_bound``,
    when given, is enforced on max |a_i| and max |b_i|.
    """

    n: int
    a_diag: np.ndarray
    b_diag: np.ndarray
    seed: int
    center: bool = False
    norm_bound: float | None = None

    def __post_init__(self):
        a = np.asarray(self.a_diag, dtype=float).copy()
        b = np.asarray(self.b_diag, dtype=float).copy()
        if self.n < 1:
            raise ValueError("dimension must be >= 1")
        if a.shape != (self.n,) or b.shape != (self.n,):
            raise ValueError("a_diag and b_diag must have length n")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("diagonal entries must be finite")
        if self.center:
            a -= a.mean()
            b -= b.mean()
        if self.norm_bound is not None:
            top = max(np.abs(a).max(), np.abs(b).max())
            if top > self.norm_bound + 1e-12:
                raise ValueError(
                    f"diagonal norm {top:g} exceeds declared bound {self.norm_bound:g}")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a_diag", a)
        object.__setattr__(self, "b_diag", b)

    def replica_rng(self, *subkey):
        return rng_stream(self.seed, *subkey)


@dataclass(frozen=True)
class HaarUnitary:
    """An n x n unitary; unitarity is verified at construction."""

    u: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise ValueError("u must be square")
        n = u.shape[0]
        err = np.abs(u.conj().T @ u - np.eye(n)).max()
        if err > 1e-12:
            raise ValueError(f"matrix is not unitary (defect {err:.3e})")
        u.setflags(write=False)
        object.__setattr__(self, "u", u)

    @property
    def n(self):
        return self.u.shape[0]


@dataclass(frozen=True)
class SpectralData:
    """Ascending eigenvalues of a Hermitian matrix, with the matrix itself."""

    eigenvalues: np.ndarray
    h: np.ndarray

    def __post_init__(self):
        ev = np.asarray(self.eigenvalues, dtype=float)
        if np.any(np.diff(ev) < 0):
            raise ValueError("eigenvalues must be ascending")
        ev.setflags(write=False)
        object.__setattr__(self, "eigenvalues", ev)

    @property
    def n(self):
        return self.eigenvalues.size


@dataclass(frozen=True)
class Decomposition:
    """Partial-randomness data of one column of a Haar unitary.

    Fields follow U = -exp(i theta) R U<i> with r = sqrt(2) (e_i +
    exp(-i theta) v) / ||.||, R = I - r r*, h = exp(-i theta) v and
    ell = sqrt(2)/||e_i + h||.  ``g_norm`` is the norm of the Gaussian
    vector that generated the column when one was supplied, else 1.
    """

    i: int
    v_i: np.ndarray
    theta_i: float
    h_i: np.ndarray
    g_norm: float
    ell_i: float
    r_i: np.ndarray
    big_r_i: np.ndarray
    u_bracket_i: np.ndarray
    b_tilde_i: np.ndarray
    b_diag: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        n = self.v_i.size
        e_i = np.zeros(n, dtype=complex)
        e_i[self.i] = 1.0
        if abs(np.linalg.norm(self.r_i) - np.sqrt(2.0)) > 1e-10:
            raise ValueError("r_i must have norm sqrt(2)")
        if np.abs(self.big_r_i @ self.big_r_i - np.eye(n)).max() > 1e-10:
            raise ValueError("R_i must be an involution")
        if np.linalg.norm(self.u_bracket_i[:, self.i] - e_i) > 1e-10:
            raise ValueError("column i of U<i> must be e_i")


def sample_haar(n, seed):
    """Exact Haar unitary: QR of a complex Ginibre matrix, R-phases divided out.

    Deterministic in ``seed``.  The diagonal phases of R are moved into Q
    column by column so that the R factor has positive diagonal, which
    makes Q exactly Haar distributed (not just approximately for large n).
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    rng = rng_stream(seed) if not isinstance(seed, np.random.Generator) else seed
    zmat = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(zmat)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))[None, :]
    return HaarUnitary(q)


def build_h(spec, u):
    """Assemble H = diag(a) + U diag(b) U*, re-Hermitized against roundoff."""
    if u.n != spec.n:
        raise ValueError("dimension mismatch between spec and unitary")
    um = u.u
    h = np.diag(spec.a_diag).astype(complex) + (um * spec.b_diag[None, :]) @ um.conj().T
    return 0.5 * (h + h.conj().T)


def eigen_h(h):
    """Full ascending spectrum of a Hermitian matrix (backward-stable solver)."""
    h = np.asarray(h)
    asym = np.abs(h - h.conj().T).max()
    if asym > 1e-8:
        raise ValueError(f"input is not Hermitian (asymmetry {asym:.3e})")
    ev = scipy.linalg.eigh(h, eigvals_only=True)
    return SpectralData(np.sort(ev), h)


def empirical_interval_mass(s, lo, hi):
    """Fraction of eigenvalues in (lo, hi], by binary search on the sorted spectrum."""
    if not (lo < hi):
        raise ValueError("interval must have lo < hi")
    ev = s.eigenvalues
    count = np.searchsorted(ev, hi, side="right") - np.searchsorted(ev, lo, side="right")
    return float(count) / ev.size


def _decomposition_from_column(u, b_diag, i, v, g_norm):
    n = v.size
    vi_i = v[i]
    if abs(vi_i) < 1e-14:
        raise ValueError(
            f"degenerate phase: column {i} has (v_i)_i = 0 (probability-zero event)")
    theta = float(np.angle(vi_i))
    h = np.exp(-1j * theta) * v
    e_i = np.zeros(n, dtype=complex)
    e_i[i] = 1.0
    ell = float(np.sqrt(2.0) / np.linalg.norm(e_i + h))
    r = ell * (e_i + h)
    big_r = np.eye(n, dtype=complex) - np.outer(r, r.conj())
    u_bracket = -np.exp(-1j * theta) * (big_r @ u)
    b_tilde_i = (u_bracket * np.asarray(b_diag, dtype=float)[None, :]) @ u_bracket.conj().T
    b_tilde_i = 0.5 * (b_tilde_i + b_tilde_i.conj().T)
    return Decomposition(
        i=int(i), v_i=v, theta_i=theta, h_i=h, g_norm=float(g_norm),
        ell_i=ell, r_i=r, big_r_i=big_r, u_bracket_i=u_bracket,
        b_tilde_i=b_tilde_i, b_diag=np.asarray(b_diag, dtype=float))


def partial_decomposition(u, b_diag, i):
    """Rank-one partial-randomness decomposition at column i of a sampled U.

    The Gaussian radial degree of freedom is not recoverable from U alone,
    so ``g_norm`` is stored as 1; use :func:`sample_haar_with_column` when
    the explicit Gaussian representation of the column is needed.
    """
    um = u.u
    n = um.shape[0]
    if not (0 <= i < n):
        raise ValueError("column index out of range")
    if len(b_diag) != n:
        raise ValueError("b_diag length must match the unitary dimension")
    v = um[:, i].copy()
    return _decomposition_from_column(um, b_diag, i, v, 1.0)


def sample_haar_with_column(n, b_diag, i, seed):
    """Sample (U, decomposition at i) with the column built from explicit Gaussians.

    Draws g ~ complex N(0, I/n) for the column direction and an independent
    Haar unitary of size n-1 for the complement, then assembles
    U = -exp(i theta) R U<i>.  This is the measure-preserving construction
    of Haar measure from (column, minor) randomness; the returned
    decomposition carries the true ``g_norm``.
    """
    if n < 1:
        raise ValueError("dimension must be >= 1")
    if not (0 <= i < n):
        raise ValueError("column index out of range")
    rng = rng_stream(seed) if not isinstance(seed, np.random.Generator) else seed
    g_tilde = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2 * n)
    v = g_tilde / np.linalg.norm(g_tilde)
    if n > 1:
        minor = sample_haar(n - 1, rng).u
    else:
        minor = np.zeros((0, 0), dtype=complex)
    u_bracket = np.zeros((n, n), dtype=complex)
    keep = [k for k in range(n) if k != i]
    u_bracket[i, i] = 1.0
    u_bracket[np.ix_(keep, keep)] = minor

    theta = float(np.angle(v[i])) if abs(v[i]) >= 1e-14 else None
    if theta is None:
        raise ValueError("degenerate phase in sampled Gaussian column")
    e_i = np.zeros(n, dtype=complex)
    e_i[i] = 1.0
    h = np.exp(-1j * theta) * v
    ell = float(np.sqrt(2.0) / np.linalg.norm(e_i + h))
    r = ell * (e_i + h)
    big_r = np.eye(n, dtype=complex) - np.outer(r, r.conj())
    um = -np.exp(1j * theta) * (big_r @ u_bracket)
    g_norm = float(np.linalg.norm(np.exp(-1j * theta) * g_tilde))
    dec = _decomposition_from_column(um, b_diag, i, um[:, i].copy(), g_norm)
    return HaarUnitary(um), dec


def h_bracket(spec, d):
    """The column-independent comparison matrix diag(a) + B-tilde<i>."""
    if d.b_tilde_i.shape[0] != spec.n:
        raise ValueError("dimension mismatch between spec and decomposition")
    h = np.diag(spec.a_diag).astype(complex) + d.b_tilde_i
    return 0.5 * (h + h.conj().T)
