"""Functionals, inequalities, constants, and bounds for the coupled dynamics.

Everything here is a pure function of states, discrete distributions, or
parameters.  Expectations over discrete coupled distributions are exact
weighted sums over the K^2 atom pairs; particle functionals average over all
N^2 ordered index pairs.  Monte Carlo estimators report standard errors and
take an explicit Generator.

Contents:

* spectral quantities: ``max_eigenvalue``, ``kappa``;
* the coupling creation functional and its pair integrand;
* alignment inequalities: ``fund_inequality_report``,
  ``trace_inequality_report``, ``area_decomposition``;
* Hölder machinery: ``holder_constants``, ``pathwise_weak_inequality``;
* fourth-moment dynamics: ``delta4``, ``order4_bound``, ``gamma_exponent``,
  ``time_integral_floor``, ``decay_envelope``;
* equilibrium estimates: ``wishart_kappa_moment``, ``k_main_estimate``;
* two degeneration studies: ``counterexample_heavy_tail`` and
  ``counterexample_radial_band``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import chi as chi_law

from .system import check_configuration, sample_equilibrium

__all__ = [
    "AnalysisError",
    "BadParams",
    "RhsInfinite",
    "PreconditionFailed",
    "DegenerateBand",
    "MomentBlowup",
    "InequalityReport",
    "DiscreteCoupledDistribution",
    "MCEstimate",
    "HolderConstants",
    "AreaDecomposition",
    "max_eigenvalue",
    "kappa",
    "coupling_creation",
    "creation_integrand",
    "fund_inequality_report",
    "trace_inequality_report",
    "area_decomposition",
    "holder_constants",
    "conjugate_exponent",
    "pathwise_weak_inequality",
    "delta4",
    "order4_bound",
    "gamma_exponent",
    "time_integral_floor",
    "decay_envelope",
    "wishart_kappa_moment",
    "k_main_estimate",
    "gaussian_even_moment",
    "counterexample_heavy_tail",
    "counterexample_radial_band",
    "HeavyTailRow",
    "RadialBandRow",
]

SYMMETRY_TOL = 1e-12
TRACE_TOL = 1e-10
NORMALIZED_TOL = 1e-10
CORRELATION_TOL = 1e-12
RANK_DEFECT_TOL = 1e-12


class AnalysisError(ValueError):
    pass


class BadParams(AnalysisError):
    """Parameter outside its legal range."""


class RhsInfinite(AnalysisError):
    """Both marginals are rank-1 while the left side is positive."""


class PreconditionFailed(AnalysisError):
    """Input state violates a stated hypothesis."""


class DegenerateBand(AnalysisError):
    """Radial band carries no probability mass."""


class MomentBlowup(UserWarning):
    """Requested spectral moment sits outside the integrability regime."""


@dataclass
class InequalityReport:
    """One checked inequality: lhs <= rhs with slack = rhs - lhs."""

    name: str
    lhs: float
    rhs: float
    slack: float
    aux: dict = field(default_factory=dict)
    n_samples: int = 0
    stderr: float = 0.0

    def to_dict(self):
        out = asdict(self)
        out["aux"] = {k: (bool(v) if isinstance(v, (bool, np.bool_)) else float(v))
                      for k, v in self.aux.items()}
        return out


@dataclass
class MCEstimate:
    value: float
    stderr: float
    n_samples: int
    aux: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)


@dataclass
class HolderConstants:
    """Closed-form and estimated constants of the weak alignment bound."""

    delta: float
    p: float
    q: float
    k1: float
    k2: float
    k_main: float = None
    c_delta_n: float = None
    k_main_stderr: float = None
    j_factor: float = None
    j_stderr: float = None
    j_limit: float = None
    blowup: bool = False


@dataclass
class AreaDecomposition:
    """Exact split of the pair alignment area into three nonneg-led terms."""

    term_pointwise: float
    term_antisym: float
    term_trace: float
    total: float
    residual: float


def _as_matrix(s, name="S"):
    s = np.asarray(s, dtype=np.float64)
    if s.ndim != 2 or s.shape[0] != s.shape[1]:
        raise BadParams(f"{name} must be square, got shape {s.shape}")
    return s


def max_eigenvalue(s):
    """Largest eigenvalue of a symmetric matrix (symmetry within 1e-12)."""
    s = _as_matrix(s)
    scale = 1.0 + np.max(np.abs(s))
    if np.max(np.abs(s - s.T)) > SYMMETRY_TOL * scale:
        raise BadParams("matrix is not symmetric within tolerance")
    return float(np.linalg.eigvalsh(0.5 * (s + s.T))[-1])


def kappa(s):
    """Spectral alignment quantity (1 - lambda_max(S))^(-1) of a trace-1 S.

    Ranges over [d/(d-1), +inf]; returns +inf when the top eigenvalue
    reaches 1 (rank-1 alignment).  The complementary mass 1 - lambda_max is
    evaluated as the sum of the non-top eigenvalues, which avoids the
    cancellation of the direct subtraction.
    """
    s = _as_matrix(s)
    tr = float(np.trace(s))
    if abs(tr - 1.0) > TRACE_TOL:
        raise PreconditionFailed(f"kappa needs unit trace, got {tr:.12g}")
    scale = 1.0 + np.max(np.abs(s))
    if np.max(np.abs(s - s.T)) > SYMMETRY_TOL * scale:
        raise BadParams("matrix is not symmetric within tolerance")
    spectrum = np.linalg.eigvalsh(0.5 * (s + s.T))
    if spectrum[-1] >= 1.0 - RANK_DEFECT_TOL:
        return np.inf
    return float(1.0 / np.sum(spectrum[:-1]))


def _pair_sq_dists(x):
    """Matrix of |x_i - x_j|^2 over all ordered pairs, clipped at 0."""
    sq = np.einsum("id,id->i", x, x)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _pair_dots(u, v):
    """Matrix of (u_i - u_j) . (v_i - v_j) over all ordered pairs."""
    g = u @ v.T
    dg = np.einsum("id,id->i", u, v)
    return dg[:, None] + dg[None, :] - g - g.T


def creation_integrand(u, v, weights=None):
    """E(|U - U*||V - V*| - (U - U*).(V - V*)) over independent pairs.

    For configurations (equal weights) this is the all-ordered-pairs
    average; a weight vector turns it into the atom-pair sum of a discrete
    law.  Nonnegative by Cauchy-Schwarz, zero iff all difference pairs are
    positively aligned.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape or u.ndim != 2:
        raise BadParams(f"configurations differ in shape: {u.shape} vs {v.shape}")
    ru = np.sqrt(_pair_sq_dists(u))
    rv = np.sqrt(_pair_sq_dists(v))
    integ = ru * rv - _pair_dots(u, v)
    if weights is None:
        return float(np.mean(integ))
    return float(weights @ integ @ weights)


def coupling_creation(u, v):
    """Two-body coupling creation (d-2)/(2d-2) <|du||dv| - du.dv>_N.

    The expected decrease rate of the mean squared pair distance under one
    shared-randomness collision step, multiplied by the event rate, equals
    this functional exactly.
    """
    d = np.asarray(u).shape[1]
    return (d - 2.0) / (2.0 * d - 2.0) * creation_integrand(u, v)


@dataclass
class DiscreteCoupledDistribution:
    """Finitely supported law of a coupled pair (U, V) on R^d x R^d."""

    atoms_u: np.ndarray
    atoms_v: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.atoms_u = np.asarray(self.atoms_u, dtype=np.float64)
        self.atoms_v = np.asarray(self.atoms_v, dtype=np.float64)
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.atoms_u.shape != self.atoms_v.shape or self.atoms_u.ndim != 2:
            raise BadParams("atom arrays must share a (K, d) shape")
        if self.weights.shape != (self.atoms_u.shape[0],):
            raise BadParams("need one weight per atom")
        if np.any(self.weights < 0):
            raise BadParams("weights must be nonnegative")
        total = self.weights.sum()
        if abs(total - 1.0) > 1e-9:
            raise BadParams(f"weights sum to {total:.12g}, not 1")
        self.weights = self.weights / total

    @classmethod
    def from_configurations(cls, u, v):
        u = np.asarray(u, dtype=np.float64)
        k = u.shape[0]
        return cls(u, v, np.full(k, 1.0 / k))

    @property
    def d(self):
        return self.atoms_u.shape[1]

    @property
    def n_atoms(self):
        return self.atoms_u.shape[0]

    def mean_u(self):
        return self.weights @ self.atoms_u

    def mean_v(self):
        return self.weights @ self.atoms_v

    def second_moment(self, which):
        """Weighted second-moment matrix: 'uu', 'vv', or the cross 'uv'."""
        w = self.weights
        if which == "uu":
            return (self.atoms_u * w[:, None]).T @ self.atoms_u
        if which == "vv":
            return (self.atoms_v * w[:, None]).T @ self.atoms_v
        if which == "uv":
            return (self.atoms_u * w[:, None]).T @ self.atoms_v
        raise BadParams(f"unknown moment block {which!r}")

    def mean_dot(self):
        return float(self.weights @ np.einsum("kd,kd->k", self.atoms_u, self.atoms_v))

    def is_centered(self, tol=NORMALIZED_TOL):
        return (np.max(np.abs(self.mean_u())) <= tol
                and np.max(np.abs(self.mean_v())) <= tol)

    def is_normalized(self, tol=NORMALIZED_TOL):
        if not self.is_centered(tol):
            return False
        eu = float(np.trace(self.second_moment("uu")))
        ev = float(np.trace(self.second_moment("vv")))
        return abs(eu - 1.0) <= tol and abs(ev - 1.0) <= tol

    def normalize(self):
        """Centered copy with unit second moment in each marginal."""
        u = self.atoms_u - self.mean_u()
        v = self.atoms_v - self.mean_v()
        w = self.weights
        eu = float(w @ np.einsum("kd,kd->k", u, u))
        ev = float(w @ np.einsum("kd,kd->k", v, v))
        if eu <= 0.0 or ev <= 0.0:
            raise BadParams("cannot normalize a marginal with zero energy")
        return DiscreteCoupledDistribution(u / np.sqrt(eu), v / np.sqrt(ev), w)

    def alignment_area(self):
        """E(|U-U*|^2 |V-V*|^2 - ((U-U*).(V-V*))^2), exact K^2 sum."""
        w = self.weights
        d2u = _pair_sq_dists(self.atoms_u)
        d2v = _pair_sq_dists(self.atoms_v)
        dots = _pair_dots(self.atoms_u, self.atoms_v)
        return float(w @ (d2u * d2v - dots * dots) @ w)

    def creation_integrand(self):
        return creation_integrand(self.atoms_u, self.atoms_v, self.weights)


def fund_inequality_report(dist):
    """Check 1 - (E U.V)^2 <= (kappa_bar / 2) E(|dU|^2 |dV|^2 - (dU.dV)^2).

    ``kappa_bar`` is the smaller kappa of the two marginal second-moment
    matrices; the distribution must be normalized.  The factor 1/2 is the
    equality-attaining constant (strongly isotropic co-linear two-radius
    couplings saturate it); the unhalved variant is also reported in aux.
    """
    if not isinstance(dist, DiscreteCoupledDistribution):
        raise BadParams("expected a DiscreteCoupledDistribution")
    if not dist.is_normalized():
        raise PreconditionFailed("distribution must be centered with unit energy")
    kap_u = kappa(dist.second_moment("uu"))
    kap_v = kappa(dist.second_moment("vv"))
    kbar = min(kap_u, kap_v)
    area = dist.alignment_area()
    md = dist.mean_dot()
    lhs = 1.0 - md * md
    if np.isinf(kbar):
        if lhs > 1e-12:
            raise RhsInfinite(
                "both marginals are rank-1 and the left side is positive")
        rhs = np.inf if area > 0 else 0.0
    else:
        rhs = 0.5 * kbar * area
    aux = {
        "kappa_u": kap_u,
        "kappa_v": kap_v,
        "area": area,
        "mean_dot": md,
        "rhs_unhalved": kbar * area if not np.isinf(kbar) else np.inf,
    }
    aux["slack_unhalved"] = aux["rhs_unhalved"] - lhs
    return InequalityReport(name="fundamental_alignment", lhs=lhs, rhs=rhs,
                            slack=rhs - lhs, aux=aux,
                            n_samples=dist.n_atoms)


def trace_inequality_report(c_uu, c_vv, c_uv):
    """Check Tr(C_UU C_VV) - Tr(C_UV C_VU) <= factor (Tr C_UU Tr C_VV - (Tr C_UV)^2).

    ``factor`` is the smaller of the two normalized top eigenvalues
    lambda_max(C)/Tr(C).  C_UV is the cross block E[U V^T] (need not be
    symmetric); C_VU is its transpose.
    """
    c_uu = _as_matrix(c_uu, "C_UU")
    c_vv = _as_matrix(c_vv, "C_VV")
    c_uv = _as_matrix(c_uv, "C_UV")
    tr_u = float(np.trace(c_uu))
    tr_v = float(np.trace(c_vv))
    if tr_u <= 0 or tr_v <= 0:
        raise PreconditionFailed("marginal covariances need positive trace")
    lam_u = max_eigenvalue(c_uu)
    lam_v = max_eigenvalue(c_vv)
    factor = min(lam_u / tr_u, lam_v / tr_v)
    lhs = float(np.trace(c_uu @ c_vv)) - float(np.sum(c_uv * c_uv))
    rhs = factor * (tr_u * tr_v - float(np.trace(c_uv)) ** 2)
    aux = {"factor": factor, "lambda_u": lam_u, "lambda_v": lam_v,
           "trace_u": tr_u, "trace_v": tr_v}
    return InequalityReport(name="trace", lhs=lhs, rhs=rhs, slack=rhs - lhs,
                            aux=aux)


def area_decomposition(dist):
    """Exact three-term split of the pair alignment area.

    total = 2 E(|U|^2 |V|^2 - (U.V)^2)                    [pointwise, >= 0]
          + |C_UV - C_VU|_F^2                              [antisymmetric, >= 0]
          + 2 (Tr C_UU Tr C_VV - (Tr C_UV)^2
               - Tr(C_UU C_VV) + Tr(C_UV C_VU))            [trace]

    for any centered coupled law; the residual against the direct K^2 sum
    is reported and stays below 1e-11.
    """
    if not isinstance(dist, DiscreteCoupledDistribution):
        raise BadParams("expected a DiscreteCoupledDistribution")
    if not dist.is_centered():
        raise PreconditionFailed("distribution must be centered")
    w = dist.weights
    u, v = dist.atoms_u, dist.atoms_v
    uu = np.einsum("kd,kd->k", u, u)
    vv = np.einsum("kd,kd->k", v, v)
    uv = np.einsum("kd,kd->k", u, v)
    term1 = 2.0 * float(w @ (uu * vv - uv * uv))
    c_uu = dist.second_moment("uu")
    c_vv = dist.second_moment("vv")
    c_uv = dist.second_moment("uv")
    m = c_uv - c_uv.T
    term2 = float(np.sum(m * m))
    term3 = 2.0 * (float(np.trace(c_uu)) * float(np.trace(c_vv))
                   - float(np.trace(c_uv)) ** 2
                   - float(np.trace(c_uu @ c_vv))
                   + float(np.sum(c_uv * c_uv)))
    total = dist.alignment_area()
    return AreaDecomposition(term_pointwise=term1, term_antisym=term2,
                             term_trace=term3, total=total,
                             residual=total - (term1 + term2 + term3))


def conjugate_exponent(p):
    """q with 1/p + 1/q = 1."""
    p = float(p)
    if p <= 1.0:
        raise BadParams(f"need p > 1, got {p}")
    return p / (p - 1.0)


def holder_constants(delta, p, d):
    """Closed-form constants of the weak alignment bound.

    k1 = 2^(-3 - 1/(2 delta)) (d-2)/(d-1) (1+delta)^(1+1/delta)
         / (1+2 delta)^(1+1/(2 delta))
    k2 = 2^(-9/2 - 2/delta) (d-2)/(d-1) (1+delta)^(1+1/delta)
         / (1+2 delta)^(1+1/(2 delta))

    Both are strictly positive for every d >= 3 and delta > 0.
    """
    delta = float(delta)
    p = float(p)
    if delta <= 0:
        raise BadParams(f"need delta > 0, got {delta}")
    if d < 3:
        raise BadParams(f"need d >= 3, got {d}")
    q = conjugate_exponent(p)
    shared = ((d - 2.0) / (d - 1.0)
              * (1.0 + delta) ** (1.0 + 1.0 / delta)
              / (1.0 + 2.0 * delta) ** (1.0 + 1.0 / (2.0 * delta)))
    k1 = 2.0 ** (-3.0 - 1.0 / (2.0 * delta)) * shared
    k2 = 2.0 ** (-4.5 - 2.0 / delta) * shared
    return HolderConstants(delta=delta, p=p, q=q, k1=k1, k2=k2)


def pathwise_weak_inequality(u, v, delta, p=None):
    """Check the weak alignment bound on one constrained pair state.

    c(u, v) built from k1, the smaller kappa, and the two pair moments
    <|u-u*|^(2p(1+delta))>_N, <|v-v*|^(2q(1+delta))>_N must not exceed half
    the coupling creation divided by the pair distance to the power
    1 + 1/(2 delta).  Requires nonnegative velocity correlation.  The
    coincident case u = v is 0/0 and is returned flagged with nan sides.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    check_configuration(u)
    check_configuration(v)
    if u.shape != v.shape:
        raise BadParams(f"copies differ in shape: {u.shape} vs {v.shape}")
    delta = float(delta)
    if delta <= 0:
        raise BadParams(f"need delta > 0, got {delta}")
    if p is None:
        if delta >= 1.0:
            raise BadParams("delta >= 1 needs an explicit p")
        p = 2.0 / (1.0 - delta)
    hc = holder_constants(delta, p, u.shape[1])
    p, q = hc.p, hc.q

    corr = float(np.mean(np.einsum("id,id->i", u, v)))
    if corr < -CORRELATION_TOL:
        raise PreconditionFailed(f"velocity correlation {corr:.3e} is negative")
    dist = float(np.mean(np.sum((u - v) ** 2, axis=1)))
    kap_u = kappa(u.T @ u / u.shape[0])
    kap_v = kappa(v.T @ v / v.shape[0])
    kbar = min(kap_u, kap_v)
    mom_u = float(np.mean(_pair_sq_dists(u) ** (p * (1.0 + delta))))
    mom_v = float(np.mean(_pair_sq_dists(v) ** (q * (1.0 + delta))))
    c_val = (hc.k1 * kbar ** (-1.0 - 1.0 / (2.0 * delta))
             * mom_u ** (-1.0 / (2.0 * p * delta))
             * mom_v ** (-1.0 / (2.0 * q * delta)))
    c2 = coupling_creation(u, v)
    degenerate = dist == 0.0
    if degenerate:
        rhs = np.nan
        slack = np.nan
    else:
        rhs = 0.5 * c2 / dist ** (1.0 + 1.0 / (2.0 * delta))
        slack = rhs - c_val
    aux = {
        "kappa_u": kap_u,
        "kappa_v": kap_v,
        "pair_moment_u": mom_u,
        "pair_moment_v": mom_v,
        "correlation": corr,
        "mean_sq_distance": dist,
        "creation": c2,
        "degenerate_zero_distance": degenerate,
    }
    return InequalityReport(name="pathwise_weak", lhs=c_val, rhs=rhs,
                            slack=slack, aux=aux, n_samples=u.shape[0])


def delta4(v, v_star, d=None):
    """Expected jump of |v|^4 + |v*|^4 across one collision, halved.

    delta4 = -(|v|^4 + |v*|^4)/4 + (d+1)/(2(d-1)) |v|^2 |v*|^2
             - (v . v*)^2 / (d-1)

    Valid for any angular kernel with unit sin^2-weighted mass.  Broadcasts
    over leading axes.
    """
    v = np.asarray(v, dtype=np.float64)
    v_star = np.asarray(v_star, dtype=np.float64)
    if d is None:
        d = v.shape[-1]
    if d < 3:
        raise BadParams(f"need d >= 3, got {d}")
    a = np.sum(v * v, axis=-1)
    b = np.sum(v_star * v_star, axis=-1)
    ip = np.sum(v * v_star, axis=-1)
    out = (-(a * a + b * b) / 4.0
           + (d + 1.0) / (2.0 * (d - 1.0)) * a * b
           - ip * ip / (d - 1.0))
    return out if out.ndim else float(out)


def order4_bound(m4_0, d, t):
    """Exponential fourth-moment bound and its relaxation time shift.

    bound(t) = e^(-t/2) (m4_0 - (d+2)/d) + (d+2)/d
    t_star   = 2 (ln(d m4_0/(d+2) - 1))^+     (0 when the log argument < 1)

    After t_star the bound is at most (2d+4)/d.  Returns (bound, t_star);
    ``t`` may be an array.
    """
    m4_0 = float(m4_0)
    if m4_0 < 1.0:
        raise BadParams(f"m4_0 below the Cauchy-Schwarz floor: {m4_0}")
    t = np.asarray(t, dtype=np.float64)
    eq = (d + 2.0) / d
    bound = np.exp(-t / 2.0) * (m4_0 - eq) + eq
    arg = m4_0 / eq - 1.0
    t_star = 2.0 * np.log(arg) if arg > 1.0 else 0.0
    return (bound if bound.ndim else float(bound)), float(t_star)


def gamma_exponent(delta):
    """Exponent gamma = 1/4 + 1/(4 delta) of the time-integral bound."""
    delta = float(delta)
    if delta <= 0:
        raise BadParams(f"need delta > 0, got {delta}")
    return 0.25 + 0.25 / delta


def time_integral_floor(t, t_star, d, gamma):
    """Lower bound ((2d+4)/d)^(-gamma) (t - t_star)^+ for int_0^t m4(s)^(-gamma) ds."""
    t = np.asarray(t, dtype=np.float64)
    out = ((2.0 * d + 4.0) / d) ** (-gamma) * np.maximum(t - t_star, 0.0)
    return out if out.ndim else float(out)


def decay_envelope(t, d0, delta, c_delta_n, t_star):
    """Power-law envelope (d0^(-1/delta) + c (t - t_star)^+)^(-delta).

    Integrated form of the differential bound D' <= -delta c D^(1+1/delta)
    past the relaxation shift; advisory companion curve for decay runs, not
    an asserted invariant.
    """
    t = np.asarray(t, dtype=np.float64)
    base = d0 ** (-1.0 / delta) + c_delta_n * np.maximum(t - t_star, 0.0)
    out = base ** (-delta)
    return out if out.ndim else float(out)


def wishart_kappa_moment(n, d, p, samples, rng):
    """Monte Carlo estimate of E[(1 - L)^(-p)]^(-1/p) at equilibrium.

    L is the top eigenvalue of the empirical second-moment matrix of a
    uniform constraint-sphere configuration.  The estimate is bounded by
    (d-1)/d and approaches it as n grows.  Requires n - 2p/(d-1) > d so the
    inverse moment is finite.
    """
    if p < 1:
        raise BadParams(f"need p >= 1, got {p}")
    if n - 2.0 * p / (d - 1.0) <= d:
        raise BadParams(
            f"n = {n} too small for moment order p = {p} in dimension {d}")
    xs = np.empty(samples)
    for s in range(samples):
        conf = sample_equilibrium(n, d, rng)
        lam = float(np.linalg.eigvalsh(conf.T @ conf / n)[-1])
        xs[s] = (1.0 - lam) ** (-p)
    m = float(np.mean(xs))
    se_m = float(np.std(xs, ddof=1) / np.sqrt(samples))
    est = m ** (-1.0 / p)
    se_est = est * se_m / (p * m)
    return MCEstimate(value=est, stderr=se_est, n_samples=samples,
                      aux={"inverse_moment": m, "inverse_moment_stderr": se_m})


def gaussian_even_moment(d, m):
    """E |G|^(2m) for G ~ N(0, Id/d), via log-gamma for stability."""
    return float(np.exp(m * np.log(2.0 / d) + gammaln(d / 2.0 + m)
                        - gammaln(d / 2.0)))


def k_main_estimate(delta, p, q, n, d, samples, rng):
    """Equilibrium estimate of the main decay constant and c_delta_n.

    Estimates J = E[kappa^(p(1+2 delta)) <(|U-U*|/sqrt(2))^(2p(1+delta))>_N]
    ^(-1/(2 p delta)) by sampling uniform configurations, then

        k_main    = k2 J
        c_delta_n = k_main ((2d+4)/d)^(-1/2 - 1/(2 delta)).

    The closed-form n -> infinity limit of J,

        ((d-1)/d)^(1+1/(2 delta)) E(|G_d|^(2p(1+delta)))^(-1/(2 p delta)),

    is returned alongside for convergence checks.  A MomentBlowup warning
    flags parameter choices whose kappa-moment is not integrable.
    """
    delta = float(delta)
    if not (0.0 < delta < 1.0):
        raise BadParams(f"need 0 < delta < 1, got {delta}")
    if abs(1.0 / p + 1.0 / q - 1.0) > 1e-10:
        raise BadParams(f"p = {p} and q = {q} are not conjugate")
    hc = holder_constants(delta, p, d)
    m_kappa = p * (1.0 + 2.0 * delta)
    m_pair = p * (1.0 + delta)
    blowup = n - 2.0 * m_kappa / (d - 1.0) <= d
    if blowup:
        warnings.warn(
            f"kappa moment of order {m_kappa:.3g} is outside the integrable "
            f"regime at n = {n}, d = {d}", MomentBlowup)
    xs = np.empty(samples)
    for s in range(samples):
        conf = sample_equilibrium(n, d, rng)
        kap = kappa(conf.T @ conf / n)
        pairs = float(np.mean((_pair_sq_dists(conf) / 2.0) ** m_pair))
        xs[s] = kap ** m_kappa * pairs
    m = float(np.mean(xs))
    se_m = float(np.std(xs, ddof=1) / np.sqrt(samples))
    expo = 1.0 / (2.0 * p * delta)
    j = m ** (-expo)
    j_se = j * expo * se_m / m
    j_limit = ((d - 1.0) / d) ** (1.0 + 1.0 / (2.0 * delta)) * gaussian_even_moment(
        d, m_pair) ** (-expo)
    hc.j_factor = j
    hc.j_stderr = j_se
    hc.j_limit = j_limit
    hc.k_main = hc.k2 * j
    hc.k_main_stderr = hc.k2 * j_se
    hc.c_delta_n = hc.k_main * ((2.0 * d + 4.0) / d) ** (-0.5 - 1.0 / (2.0 * delta))
    hc.blowup = bool(blowup)
    return hc


@dataclass
class HeavyTailRow:
    m: float
    m_q: float
    mean_sq_distance: float
    distance_stderr: float
    creation: float
    creation_stderr: float


def _unit_rows(rng, size, d):
    g = rng.standard_normal((size, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def counterexample_heavy_tail(m_values, q, d, samples, rng):
    """Creation starves while distance persists under a heavy radial tail.

    V is radial two-point: |V| = M with probability 1/M^2, else 0, so
    E|V|^2 = 1 exactly while the q-norm m_q = M^(1-2/q) vanishes as M grows
    (1 < q < 2).  U is an independent isotropic Gaussian with E|U|^2 = 1.
    Because the rare radius M carries all of V's energy, the pair law is
    sampled by exact case weights: the Monte Carlo part covers the Gaussian
    pair distance and the unit-sphere chord, never the rare event itself.
    Cross terms vanish exactly by independence and centering.
    """
    q = float(q)
    if not (1.0 < q < 2.0):
        raise BadParams(f"need 1 < q < 2, got {q}")
    rows = []
    for m_val in m_values:
        m_val = float(m_val)
        if m_val <= 1.0:
            raise BadParams(f"need radius M > 1, got {m_val}")
        prob = 1.0 / (m_val * m_val)
        m_q = m_val ** (1.0 - 2.0 / q)

        g1 = rng.standard_normal((samples, d)) / np.sqrt(d)
        g2 = rng.standard_normal((samples, d)) / np.sqrt(d)
        a = np.linalg.norm(g1 - g2, axis=1)
        mean_a = float(np.mean(a))
        se_a = float(np.std(a, ddof=1) / np.sqrt(samples))

        u2 = np.einsum("id,id->i", g1, g1)
        mean_u2 = float(np.mean(u2))
        se_u2 = float(np.std(u2, ddof=1) / np.sqrt(samples))

        chord = np.linalg.norm(_unit_rows(rng, samples, d)
                               - _unit_rows(rng, samples, d), axis=1)
        mean_chord = float(np.mean(chord))
        se_chord = float(np.std(chord, ddof=1) / np.sqrt(samples))

        # |V - V*| is 0 (both radii 0), M (exactly one at M), or M times a
        # unit chord (both at M); weights are exact
        e_dv = (2.0 * prob * (1.0 - prob) * m_val
                + prob * prob * m_val * mean_chord)
        se_e_dv = prob * prob * m_val * se_chord
        creation = mean_a * e_dv
        creation_se = float(np.sqrt((se_a * e_dv) ** 2 + (mean_a * se_e_dv) ** 2))

        rows.append(HeavyTailRow(
            m=m_val, m_q=m_q,
            mean_sq_distance=mean_u2 + 1.0, distance_stderr=se_u2,
            creation=creation, creation_stderr=creation_se))
    return rows


@dataclass
class RadialBandRow:
    r_minus: float
    band_prob: float
    band_radius: float
    ratio: float
    ratio_stderr: float


def counterexample_radial_band(r_minus_values, band_eps, d, samples, rng):
    """Creation-to-distance ratio decays like r^(-2) for band couplings.

    U is isotropic Gaussian with E|U|^2 = 1; V equals U except when the
    radius falls in [r, r + band_eps], where the radius is replaced by the
    band's conditional rms value (co-linear coupling).  The ratio

        E(|U-U*||V-V*| - (U-U*).(V-V*)) / E|U-V|^2

    is tabulated against r.  Band radii are drawn by conditional inverse
    survival sampling, so arbitrarily deep tails keep exact occupancy; the
    band mass itself multiplies in analytically.
    """
    if band_eps <= 0:
        raise DegenerateBand(f"band width must be positive, got {band_eps}")
    law = chi_law(d, scale=1.0 / np.sqrt(d))
    rows = []
    for r in r_minus_values:
        r = float(r)
        if r <= 0:
            raise BadParams(f"need r > 0, got {r}")
        sf_lo = float(law.sf(r))
        sf_hi = float(law.sf(r + band_eps))
        beta = sf_lo - sf_hi
        if not beta > 0.0:
            raise DegenerateBand(
                f"band [{r}, {r + band_eps}] carries no probability mass")

        r_in = law.isf(rng.uniform(sf_hi, sf_lo, size=samples))
        c_band = float(np.sqrt(np.mean(r_in * r_in)))

        r_out = law.isf(rng.random(samples))
        mask = (r_out >= r) & (r_out <= r + band_eps)
        while np.any(mask):
            r_out[mask] = law.isf(rng.random(int(mask.sum())))
            mask = (r_out >= r) & (r_out <= r + band_eps)

        w1 = _unit_rows(rng, samples, d)
        w2 = _unit_rows(rng, samples, d)

        # one endpoint in the band, the other outside (V* = U* there)
        du = r_in[:, None] * w1 - r_out[:, None] * w2
        dv = c_band * w1 - r_out[:, None] * w2
        g_io = (np.linalg.norm(du, axis=1) * np.linalg.norm(dv, axis=1)
                - np.einsum("id,id->i", du, dv))
        # both endpoints in the band
        r_in2 = law.isf(rng.uniform(sf_hi, sf_lo, size=samples))
        du = r_in[:, None] * w1 - r_in2[:, None] * w2
        dv = c_band * (w1 - w2)
        g_ii = (np.linalg.norm(du, axis=1) * np.linalg.norm(dv, axis=1)
                - np.einsum("id,id->i", du, dv))

        num = (2.0 * (1.0 - beta) * float(np.mean(g_io))
               + beta * float(np.mean(g_ii)))
        se_num = float(np.sqrt(
            (2.0 * (1.0 - beta) * np.std(g_io, ddof=1)) ** 2
            + (beta * np.std(g_ii, ddof=1)) ** 2) / np.sqrt(samples))
        den_samples = (r_in - c_band) ** 2
        den = float(np.mean(den_samples))
        se_den = float(np.std(den_samples, ddof=1) / np.sqrt(samples))
        ratio = num / den
        ratio_se = abs(ratio) * float(np.sqrt((se_num / num) ** 2
                                              + (se_den / den) ** 2))
        rows.append(RadialBandRow(r_minus=r, band_prob=beta, band_radius=c_band,
                                  ratio=ratio, ratio_stderr=ratio_se))
    return rows
