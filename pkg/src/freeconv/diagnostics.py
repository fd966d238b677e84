"""Green-function diagnostics for H = A + U B U*.

A snapshot of the resolvent G(z) = (H - z)^(-1) carries every tracial
quantity the subordination analysis runs on: the Stieltjes transform m_H,
the trace ratios defining the approximate subordination functions, the
correction functional Upsilon, and the fluctuation scale Psi = 1/sqrt(N
eta).  Per-row quantities (S_i, T_i, Z_i), weighted fluctuation averages,
finite-N stochastic-domination verdicts, rank-one perturbation checks and
Gaussian large-deviation statistics complete the toolbox.

Convention: for a reference subordination pair solved as
solve_subordination(mu_A, mu_B, z), the slot ``omega2`` is the
subordination function paired with A's atoms (the argument of F_{mu_A}),
and every consumer here goes through :func:`omega_slots` to read it.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .measures import SpectralParam, make_measure, _as_z
from .subordination import phi_residual

__all__ = [
    "GreenSnapshot",
    "RowDiagnostics",
    "DominationStat",
    "green",
    "row_quantities",
    "all_row_quantities",
    "weighted_average",
    "local_law_error",
    "entrywise_error",
    "omega_slots",
    "domination_test",
    "rank_one_check",
    "c1_c2_identity",
    "gaussian_ldp_check",
]


@dataclass(frozen=True)
class GreenSnapshot:
    """Resolvent of one sampled H at one spectral parameter, with diagnostics.

    All traces are normalized (divided by N).  ``omega_a_c`` and
    ``omega_b_c`` are the trace-ratio approximate subordination functions
    z - tr(AG)/m and z - tr(B~G)/m; ``upsilon`` is the correction
    functional tr(B~G) - (tr B~G)^2 + tr G * tr(B~G B~).
    """

    z: SpectralParam
    g: np.ndarray
    m_h: complex
    tr_ag: complex
    tr_bg: complex
    tr_bgb: complex
    omega_a_c: complex
    omega_b_c: complex
    upsilon: complex
    psi: float
    a_diag: np.ndarray = field(repr=False, default=None)
    b_diag: np.ndarray = field(repr=False, default=None)
    u: np.ndarray = field(repr=False, default=None)
    h: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.m_h.imag <= 0:
            raise ValueError("snapshot has non-Herglotz trace")
        zz = self.z.z
        slack = 1e-10 * (1.0 + 1.0 / self.z.eta ** 2)
        # exact tracial identity: -1/m = wA^c + wB^c - z (the F-transform of
        # the empirical measure written through the two trace ratios)
        if abs(-1.0 / self.m_h - (self.omega_a_c + self.omega_b_c - zz)) > slack:
            raise ValueError("trace consistency -1/m = wA + wB - z violated")

    @property
    def n(self):
        return self.g.shape[0]

    @cached_property
    def b_tilde(self):
        """The rotated matrix U B U*, recovered exactly as H - diag(a)."""
        return self.h - np.diag(self.a_diag.astype(complex))


@dataclass(frozen=True)
class RowDiagnostics:
    """The row quantities S_i = h_i* B~<i> G e_i, T_i = h_i* G e_i and Z_i."""

    i: int
    s_i: complex
    t_i: complex
    z_i: complex


@dataclass(frozen=True)
class DominationStat:
    """Finite-N exceedance test of |X| against N^epsilon * bound.

    ``exceed_fraction`` is the fraction of samples with |X| > N^eps *
    bound; the verdict passes when it does not exceed 1 - pass_fraction.
    """

    statistic_name: str
    samples: tuple
    bound: float
    epsilon: float
    exceed_fraction: float
    n: int
    pass_fraction: float
    passed: bool

    def __post_init__(self):
        if not (0.0 <= self.exceed_fraction <= 1.0):
            raise ValueError("exceed_fraction must be in [0, 1]")


def green(h, spec, u, z):
    """Resolvent snapshot of H at z, by dense linear solve against the identity.

    The tracial quantities tr(B~G) and tr(B~G B~) are evaluated through the
    exact resolvent identities B~G = I - (A - z)G and B~ G B~ = B~ - A + z
    + (A - z)G(A - z), which only need the diagonal of G; no extra matrix
    products are formed.
    """
    if not isinstance(z, SpectralParam):
        zz = _as_z(z)
        z = SpectralParam(zz.real, zz.imag)
    n = spec.n
    a = spec.a_diag
    gmat = np.linalg.solve(h - z.z * np.eye(n), np.eye(n, dtype=complex))
    gdiag = np.diagonal(gmat)
    m = complex(gdiag.mean())
    az = a - z.z
    tr_ag = complex((a * gdiag).mean())
    tr_bg = complex(1.0 - (az * gdiag).mean())
    tr_bgb = complex(spec.b_diag.mean() - a.mean() + z.z + (az * az * gdiag).mean())
    upsilon = tr_bg - tr_bg ** 2 + m * tr_bgb
    return GreenSnapshot(
        z=z, g=gmat, m_h=m, tr_ag=tr_ag, tr_bg=tr_bg, tr_bgb=tr_bgb,
        omega_a_c=z.z - tr_ag / m, omega_b_c=z.z - tr_bg / m,
        upsilon=upsilon, psi=1.0 / np.sqrt(n * z.eta),
        a_diag=a, b_diag=spec.b_diag, u=(u.u if u is not None else None), h=h)


def _z_row(snapshot, i, gdiag_i):
    # Z_i from the snapshot's traces alone; never re-derives G
    bg_ii = 1.0 - (snapshot.a_diag[i] - snapshot.z.z) * gdiag_i
    return bg_ii * snapshot.m_h - gdiag_i * (snapshot.tr_bg - snapshot.upsilon)


def row_quantities(snapshot, d):
    """S_i, T_i and Z_i for the row of one partial-randomness decomposition."""
    i = d.i
    if not (0 <= i < snapshot.n) or d.v_i.size != snapshot.n:
        raise ValueError("decomposition index does not match the snapshot")
    g_col = snapshot.g[:, i]
    t_i = complex(d.h_i.conj() @ g_col)
    s_i = complex((d.b_tilde_i @ d.h_i).conj() @ g_col)
    z_i = complex(_z_row(snapshot, i, snapshot.g[i, i]))
    return RowDiagnostics(i=i, s_i=s_i, t_i=t_i, z_i=z_i)


def all_row_quantities(snapshot):
    """Arrays (S, T, Z) over every row, without forming any per-row matrices.

    Uses the reflection identities of the decomposition to reduce S_i to
    -(B~ e_i)* (R_i G e_i), which needs only columns of G and of B~.
    """
    gmat = snapshot.g
    n = snapshot.n
    udiag = np.diagonal(snapshot.u)
    if np.any(np.abs(udiag) < 1e-14):
        raise ValueError("degenerate phase on some column (probability-zero event)")
    phases = udiag / np.abs(udiag)
    hcols = snapshot.u * phases.conj()[None, :]
    ecols = np.eye(n, dtype=complex)
    r_raw = ecols + hcols
    ell = np.sqrt(2.0) / np.linalg.norm(r_raw, axis=0)
    rcols = r_raw * ell[None, :]

    t_all = np.einsum("ij,ij->j", hcols.conj(), gmat)
    r_dot_g = np.einsum("ij,ij->j", rcols.conj(), gmat)
    rg_cols = gmat - rcols * r_dot_g[None, :]
    s_all = -np.einsum("ij,ij->j", snapshot.b_tilde.conj(), rg_cols)

    gdiag = np.diagonal(gmat)
    z_all = _z_row(snapshot, np.arange(n), gdiag)
    return s_all, t_all, z_all


def weighted_average(rows, weights):
    """(1/N) sum of d_i Z_i over the given rows; weights must have modulus <= 1."""
    w = np.asarray(weights, dtype=complex)
    if len(rows) != w.size:
        raise ValueError("weights length must match rows")
    if np.any(np.abs(w) > 1.0 + 1e-12):
        raise ValueError("weight modulus exceeds 1")
    zs = np.array([r.z_i for r in rows]) if not isinstance(rows, np.ndarray) else rows
    return complex((w * zs).mean())


def omega_slots(reference):
    """(omega_A, omega_B) of a pair solved as solve_subordination(mu_A, mu_B, z).

    The second defining slot (the argument of F_{mu_A}) is omega_B; this
    helper is the single place that pins the convention.
    """
    return reference.omega1, reference.omega2


def _check_reference(snapshot, reference):
    if abs(reference.z - snapshot.z.z) > 1e-12:
        raise ValueError("reference pair solved at a different z than the snapshot")
    mu_a = make_measure(snapshot.a_diag)
    mu_b = make_measure(snapshot.b_diag)
    p1, p2 = phi_residual(mu_a, mu_b, reference.omega1, reference.omega2,
                          reference.z)
    if np.hypot(abs(p1), abs(p2)) > max(1e-6, 100 * reference.residual):
        raise ValueError(
            "reference pair does not solve the (mu_A, mu_B) system; "
            "omega slots are likely swapped")


def local_law_error(snapshot, reference, weights):
    """Weighted average of G_ii minus the subordination prediction.

    Computes (1/N) sum_i d_i (G_ii - 1/(a_i - omega_B)); with unit weights
    this equals m_H - m of the convolution.  The reference pair must solve
    the (mu_A, mu_B) system at the snapshot's z (checked).
    """
    _check_reference(snapshot, reference)
    _, omega_b = omega_slots(reference)
    w = np.asarray(weights, dtype=complex)
    if w.size != snapshot.n:
        raise ValueError("weights length must match the dimension")
    if np.any(np.abs(w) > 1.0 + 1e-12):
        raise ValueError("weight modulus exceeds 1")
    gdiag = np.diagonal(snapshot.g)
    return complex((w * (gdiag - 1.0 / (snapshot.a_diag - omega_b))).mean())


def entrywise_error(snapshot, reference):
    """max_ij |G_ij - delta_ij / (a_i - omega_B)| against the reference pair."""
    _check_reference(snapshot, reference)
    _, omega_b = omega_slots(reference)
    delta = snapshot.g - np.diag(1.0 / (snapshot.a_diag - omega_b))
    return float(np.abs(delta).max())


def domination_test(samples, bound, n, epsilon, pass_fraction, name=""):
    """Exceedance-fraction verdict for |X| <= N^eps * bound over replicas."""
    s = np.abs(np.asarray(samples, dtype=float))
    if s.size == 0:
        raise ValueError("samples must be nonempty")
    if not (bound > 0):
        raise ValueError("bound must be positive")
    if not (epsilon > 0):
        raise ValueError("epsilon must be positive")
    threshold = n ** epsilon * bound
    exceed = float(np.mean(s > threshold))
    return DominationStat(
        statistic_name=name, samples=tuple(float(x) for x in s),
        bound=float(bound), epsilon=float(epsilon), exceed_fraction=exceed,
        n=int(n), pass_fraction=float(pass_fraction),
        passed=exceed <= 1.0 - pass_fraction)


def rank_one_check(snapshot, d, z=None):
    """Trace distances between G and the column-independent resolvent G<i>.

    Solves with H<i> = diag(a) + B~<i> (a rank <= 2 perturbation of H) and
    returns the three absolute differences |tr G - tr G<i>|,
    |tr B~<i> G<i> - tr B~G| and |tr B~<i> G<i> B~<i> - tr B~ G B~|, each
    divided by Psi^2 = 1/(N eta).
    """
    zz = snapshot.z.z if z is None else _as_z(z)
    n = snapshot.n
    a = snapshot.a_diag
    h_br = np.diag(a).astype(complex) + d.b_tilde_i
    g_br = np.linalg.solve(h_br - zz * np.eye(n), np.eye(n, dtype=complex))
    gdiag = np.diagonal(g_br)
    az = a - zz
    m_br = gdiag.mean()
    tr_bg_br = 1.0 - (az * gdiag).mean()
    tr_bgb_br = snapshot.b_diag.mean() - a.mean() + zz + (az * az * gdiag).mean()
    psi2 = snapshot.psi ** 2
    return (abs(snapshot.m_h - m_br) / psi2,
            abs(snapshot.tr_bg - tr_bg_br) / psi2,
            abs(snapshot.tr_bgb - tr_bgb_br) / psi2)


def c1_c2_identity(m, omega, z, m_prime):
    """The two polynomial coefficients of the Upsilon self-consistency equation.

    Both expressions vanish identically for every complex (m, omega, z,
    m_prime); they are returned unevaluated against that fact so callers
    can verify the cancellation numerically.
    """
    m = complex(m)
    w = complex(omega)
    z = complex(z)
    mp = complex(m_prime)
    s = z - w
    t = w - z
    c1 = s * m - s * s * m * m + m * (t + t * t * m)
    c2 = (-(m + t * mp)
          + 2.0 * s * m * (m + t * mp)
          + m * (1.0 + 2.0 * t * m + t * t * mp)
          + mp * (t + t * t * m))
    return c1, c2


def gaussian_ldp_check(n, replicas, seed, epsilon=0.3, pass_fraction=0.95,
                       y=None, x_mat=None):
    """Large-deviation domination stats for complex Gaussian vectors.

    Samples g with i.i.d. complex N(0, 1/n) entries and tests the linear
    statistic |y* g| against sigma * ||y||_2 and the quadratic statistic
    |g* X g - sigma^2 N tr X| against sigma^2 ||X||_2, with sigma^2 = 1/n.
    Defaults: y the uniform unit vector, X a centered diagonal.
    """
    from .ensemble import rng_stream

    if replicas < 30:
        raise ValueError("need at least 30 replicas")
    if y is None:
        y = np.full(n, 1.0 / np.sqrt(n), dtype=complex)
    if x_mat is None:
        x_mat = np.diag(np.linspace(-1.0, 1.0, n))
    y = np.asarray(y, dtype=complex)
    x_mat = np.asarray(x_mat, dtype=complex)
    sigma2 = 1.0 / n
    target = sigma2 * np.trace(x_mat)
    lin_bound = np.sqrt(sigma2) * np.linalg.norm(y)
    quad_bound = sigma2 * np.linalg.norm(x_mat, "fro")

    lin, quad = np.zeros(replicas), np.zeros(replicas)
    for r in range(replicas):
        rng = rng_stream(seed, r)
        g = (rng.standard_normal(n) + 1j * rng.standard_normal(n)) / np.sqrt(2 * n)
        lin[r] = abs(y.conj() @ g)
        quad[r] = abs(g.conj() @ x_mat @ g - target)

    make = lambda s, b, tag: domination_test(
        s, b, n, epsilon, pass_fraction, name=tag) if b > 0 else DominationStat(
        statistic_name=tag, samples=tuple(s), bound=0.0, epsilon=epsilon,
        exceed_fraction=float(np.mean(s > 0)), n=n,
        pass_fraction=pass_fraction, passed=bool(np.all(s == 0)))
    return (make(lin, lin_bound, "gaussian_linear"),
            make(quad, quad_bound, "gaussian_quadratic"))
