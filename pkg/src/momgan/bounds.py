"""Closed-form error bounds for MoM-GAN and Monte Carlo checks of them.

The evaluators are plain functions of their arguments.  ``theorem_total_bound``
assembles the full high-probability bound from the component estimates:

* discriminator approximation (bias) term,
* sup-deviation of the MoM estimator,
* generator approximation error (MoM deviation plus inlier empirical process),
* empirical process of the simulated latent sample.
"""

import json
import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from typing import NamedTuple

import numpy as np

from .mom import fixed_partition, mom, partition

LOG_OVERFLOW = math.log(1e300)


class VacuousBound(ValueError):
    """Raised when a requested bound has no content at the given parameters."""


# -- component evaluators ----------------------------------------------------


def rademacher_nn_bound(r, M, a, L, n, E_max_norm):
    """``2 r sqrt(L) (a M)^L / sqrt(n) * E max_i ||x_i||``."""
    return 2.0 * r * math.sqrt(L) * (a * M) ** L / math.sqrt(n) * E_max_norm


def eta_fraction(eps, alpha_val):
    """Guaranteed fraction of sane blocks ``1 - eps / alpha``; needs ``2 eps < alpha < 1``."""
    if not 2.0 * eps < alpha_val < 1.0:
        raise ValueError(f"need 2*eps < alpha < 1, got eps={eps}, alpha={alpha_val}")
    return 1.0 - eps / alpha_val


def default_alpha(eps, K, n):
    return min(0.99, max(2.0 * eps * 1.01, K / n))


def _eta_gap(eta):
    if not eta > 0.5:
        raise VacuousBound(f"eta = {eta} <= 1/2 leaves no sane majority")
    return 1.0 - 1.0 / (2.0 * eta)


def mom_supremum_bound(rad_block, sigma, B, K, n, eta):
    """Deviation level of the MoM sup-process.

    ``16 R_{n/K} / gap`` or ``sqrt(min(16 sigma^2, 32 B^2 / e) K^2 / (gap n))``,
    whichever is larger, with ``gap = 1 - 1/(2 eta)``.
    """
    gap = _eta_gap(eta)
    rad_branch = 16.0 * rad_block / gap
    var_branch = math.sqrt(min(16.0 * sigma**2, 32.0 * B**2 / math.e) * K**2 / (gap * n))
    return max(rad_branch, var_branch)


def _generator_capacity(N_G, L_G, p):
    c = N_G - p - 1
    return Fraction(c, 2) * (c // (6 * p)) * (L_G // 2) + 2


def capacity_max_n(N_G, L_G, p, eps):
    """Largest ``n`` with ``(1 - eps) n`` inside the generator's interpolation capacity."""
    if N_G < 7 * p + 1 or L_G < 2:
        raise ValueError(f"generator too small: need N_G >= {7 * p + 1} and L_G >= 2")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    cap = _generator_capacity(N_G, L_G, p)
    return math.floor(cap / (1 - Fraction(eps)))


class LipschitzJ(NamedTuple):
    value: float  # inf when it overflows a double
    log_value: float  # natural log
    overflow: bool


def lipschitz_J(s, p, N_D, L_D, b):
    """Lipschitz constant of the Hoelder-approximating discriminator network.

    ``(s+1) p^{s+1/2} L (NL)^{max(4b-4, 0)/p} (1260 N^2 L^2 2^{L^2} + 19 s 7^s)``,
    evaluated in log space.
    """
    log_a = math.log(1260.0) + 2.0 * math.log(N_D * L_D) + L_D**2 * math.log(2.0)
    if s > 0:
        log_b = math.log(19.0 * s) + s * math.log(7.0)
        log_tail = float(np.logaddexp(log_a, log_b))
    else:
        log_tail = log_a
    log_j = (
        math.log(s + 1)
        + (s + 0.5) * math.log(p)
        + math.log(L_D)
        + max(4.0 * b - 4.0, 0.0) / p * math.log(N_D * L_D)
        + log_tail
    )
    if log_j > LOG_OVERFLOW:
        return LipschitzJ(math.inf, log_j, True)
    if s == 0 and max(4.0 * b - 4.0, 0.0) == 0.0 and L_D**2 < 1000:
        # exact integer arithmetic when the formula has no fractional powers
        exact = math.sqrt(p) * L_D * 1260 * N_D**2 * L_D**2 * 2 ** (L_D**2)
        return LipschitzJ(float(exact), log_j, False)
    return LipschitzJ(math.exp(log_j), log_j, False)


def _floor_root(base, p):
    """``floor(base^(1/p))`` for integers, exact."""
    k = int(round(base ** (1.0 / p)))
    while k**p > base:
        k -= 1
    while (k + 1) ** p <= base:
        k += 1
    return k


def approx_error_bound(s, b, p, N, L):
    """``6 (s+1)^2 p^{max(s + b/2, 1)} floor((NL)^{2/p})^{-b}``; needs ``N >= 6, L >= 2``."""
    if N < 6 or L < 2:
        raise ValueError("approximation bound needs N >= 6 and L >= 2")
    fl = _floor_root((N * L) ** 2, p)
    if fl < 1:
        raise ValueError("floor((NL)^(2/p)) < 1")
    return 6.0 * (s + 1) ** 2 * p ** max(s + b / 2.0, 1.0) * fl ** (-b)


class ProbabilityBound(NamedTuple):
    probability: float
    raw: float
    vacuous: bool


def failure_probability(K, eta, t):
    """Success probability ``1 - e^{-K/32} - 2 e^{-K/(8 eta) gap^2} - e^{-t}``.

    Despite the historical name this returns the *success* level of the
    main bound, clamped to ``[0, 1]``, with ``vacuous`` set when the raw value
    is not positive.
    """
    gap = 1.0 - 1.0 / (2.0 * eta)
    raw = 1.0 - math.exp(-K / 32.0) - 2.0 * math.exp(-K / (8.0 * eta) * gap**2) - math.exp(-t)
    if not eta > 0.5:
        return ProbabilityBound(0.0, raw, True)
    return ProbabilityBound(min(1.0, max(0.0, raw)), raw, raw <= 0.0)


def mom_concentration_level(K, eta):
    """Failure probability ``e^{-K eta/8 gap^2}`` of the MoM sup-deviation event."""
    gap = _eta_gap(eta)
    return math.exp(-K * eta / 8.0 * gap**2)


# -- the assembled bound ------------------------------------------------------


@dataclass
class BoundInputs:
    n: int
    m: int
    p: int
    K: int
    N_G: int
    L_G: int
    N_D: int
    L_D: int
    r: float = 1.0
    M: float = 1.0
    sigma: float = 1.0
    t: float = math.log(100.0)
    eps: float = 0.0
    alpha_val: float = None
    eta: float = None
    a: float = 1.0
    B: float = 1.0
    s: int = 0
    q: float = 1.0
    E_max_norm: float = None
    E_max_norm_block: float = None
    E_max_norm_latent: float = None
    C_p: float = 1.0

    def __post_init__(self):
        for name in ("n", "m", "p", "K", "N_G", "L_G", "N_D", "L_D"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0.0 <= self.eps < 0.5:
            raise ValueError("eps must lie in [0, 0.5)")
        if not 0.0 < self.q <= 1.0:
            raise ValueError("q must lie in (0, 1]")
        if self.s < 0:
            raise ValueError("s must be >= 0")
        if self.E_max_norm is None:
            # inliers live in [0, 1]^p
            self.E_max_norm = math.sqrt(self.p)

    @property
    def b(self):
        return self.s + self.q

    def resolved_eta(self):
        if self.eta is not None:
            return self.eta
        alpha = self.alpha_val
        if alpha is None:
            alpha = default_alpha(self.eps, self.K, self.n)
        return eta_fraction(self.eps, alpha)

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class BoundReport:
    terms: dict
    total: float
    probability: float
    probability_raw: float
    vacuous: bool
    eta: float
    notes: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def theorem_total_bound(inp):
    """Itemised high-probability bound on the evaluation IPM.

    Terms follow the error decomposition of the estimator, each replaced by
    its explicit bound (``a`` and ``B`` kept general):

    ``bias``            2 x 6(s+1)^2 p^{max(s+b/2,1)} / [C_p^{2/p} n^{1/p} - 1]^b
    ``mom_deviation``   MoM sup-deviation level with R_{n/K} from ``rademacher_nn_bound``
    ``generator_rad``   2 R_{(1-eps)n}
    ``generator_mom``   the MoM deviation level again (generator approximation)
    ``generator_tail``  B sqrt(K / ((1-eps) n))
    ``latent_rad``      2 x 2 R_m of the composed network (depth L_D + L_G + 1)
    ``latent_tail``     2 x 2B sqrt(8t/m)
    """
    notes = {}
    try:
        eta = inp.resolved_eta()
        vac_eta = not eta > 0.5
    except ValueError as exc:
        eta = math.nan
        vac_eta = True
        notes["eta_error"] = str(exc)
    b = inp.b
    eb = inp.E_max_norm_block if inp.E_max_norm_block is not None else inp.E_max_norm
    ez = inp.E_max_norm_latent if inp.E_max_norm_latent is not None else inp.E_max_norm
    n_in = (1.0 - inp.eps) * inp.n

    denom = inp.C_p ** (2.0 / inp.p) * inp.n ** (1.0 / inp.p) - 1.0
    coef = 12.0 * (inp.s + 1) ** 2 * inp.p ** max(inp.s + b / 2.0, 1.0)
    bias = coef / denom**b if denom > 0 else math.inf

    rad_block = rademacher_nn_bound(inp.r, inp.M, inp.a, inp.L_D, inp.n / inp.K, eb)
    if vac_eta:
        mom_dev = math.inf
    else:
        mom_dev = mom_supremum_bound(rad_block, inp.sigma, inp.B, inp.K, inp.n, eta)
    terms = {
        "bias": bias,
        "mom_deviation": mom_dev,
        "generator_rad": 2.0
        * rademacher_nn_bound(inp.r, inp.M, inp.a, inp.L_D, n_in, inp.E_max_norm),
        "generator_mom": mom_dev,
        "generator_tail": inp.B * math.sqrt(inp.K / n_in),
        "latent_rad": 2.0
        * 2.0
        * rademacher_nn_bound(inp.r, inp.M, inp.a, inp.L_D + inp.L_G + 1, inp.m, ez),
        "latent_tail": 2.0 * 2.0 * inp.B * math.sqrt(8.0 * inp.t / inp.m),
    }
    total = sum(terms.values())
    prob = failure_probability(inp.K, eta if not vac_eta else 0.5, inp.t)

    cap = None
    try:
        cap = capacity_max_n(inp.N_G, inp.L_G, inp.p, inp.eps)
    except ValueError as exc:
        notes["capacity_error"] = str(exc)
    disc_cap = (inp.N_D * inp.L_D / inp.C_p) ** 2
    notes["sample_size_ok"] = cap is not None and inp.n <= min(cap, disc_cap)
    notes["generator_capacity_n"] = cap
    notes["discriminator_capacity_n"] = disc_cap
    j = lipschitz_J(inp.s, inp.p, inp.N_D, inp.L_D, b)
    notes["log_J"] = j.log_value
    notes["J_overflow"] = j.overflow
    return BoundReport(
        terms=terms,
        total=total,
        probability=prob.probability,
        probability_raw=prob.raw,
        vacuous=prob.vacuous or vac_eta or not math.isfinite(total),
        eta=eta,
        notes=notes,
    )


# -- Monte Carlo helpers ---------------------------------------------------------


def mc_rademacher(values, rng, draws=500):
    """Monte Carlo ``E sup_f |(1/n) sum_i xi_i f(x_i)|`` for a finite family.

    ``values`` has shape ``(n_funcs, n)``: row ``j`` holds ``f_j(x_1..x_n)``.
    """
    values = np.atleast_2d(np.asarray(values, dtype=np.float64))
    n = values.shape[1]
    xi = rng.choice(np.array([-1.0, 1.0]), size=(draws, n))
    return float(np.mean(np.max(np.abs(xi @ values.T), axis=1)) / n)


def estimate_max_norm(sampler, n, rng, resamples=100):
    """Average of ``max_i ||x_i||`` over ``resamples`` fresh samples of size ``n``."""
    return float(
        np.mean([np.max(np.linalg.norm(sampler(n, rng), axis=1)) for _ in range(resamples)])
    )


class ConcentrationResult(NamedTuple):
    failure_rate: float
    failures: int
    trials: int
    bound: float
    threshold: float
    eta: float
    stderr: float


def verify_mom_concentration(
    trials,
    K,
    rng,
    n=None,
    corrupt_blocks=0,
    coefs=None,
    outlier_value=1e6,
    rademacher_draws=4000,
):
    """Simulate the MoM sup-deviation event for linear functionals of Uniform(0, 1).

    The family is ``f_c(x) = c x`` over ``coefs`` (symmetric, ``|c| <= 1``), so
    ``B = max|c|``, ``sigma^2 = max c^2 / 12`` and ``E f_c = c / 2``.  The
    threshold is the MoM sup-deviation level with an empirical Rademacher
    term; ``corrupt_blocks`` whole blocks are overwritten by ``outlier_value``,
    giving ``eta = 1 - corrupt_blocks / K``.
    """
    if coefs is None:
        coefs = np.linspace(-1.0, 1.0, 9)
    coefs = np.asarray(coefs, dtype=np.float64)
    if n is None:
        n = 50 * K
    b = n // K
    eta = (K - corrupt_blocks) / K
    B = float(np.max(np.abs(coefs)))
    sigma = B / math.sqrt(12.0)

    # empirical Rademacher complexity of the family on one block of size n/K
    xs = rng.random((rademacher_draws, b))
    xi = rng.choice(np.array([-1.0, 1.0]), size=(rademacher_draws, b))
    rad_block = B * float(np.mean(np.abs(np.mean(xi * xs, axis=1))))

    gap_ok = eta > 0.5
    threshold = mom_supremum_bound(rad_block, sigma, B, K, n, eta) if gap_ok else math.nan
    bound = mom_concentration_level(K, eta) if gap_ok else 1.0

    failures = 0
    for _ in range(trials):
        x = rng.random(n)
        part = partition(n, K, rng)
        if corrupt_blocks:
            bad = rng.choice(K, size=corrupt_blocks, replace=False)
            x[part.blocks[bad].ravel()] = outlier_value
        worst = 0.0
        for c in coefs:
            val, _ = mom(c * x, part)
            worst = max(worst, abs(val - c / 2.0))
        if not gap_ok or worst > threshold:
            failures += 1
    rate = failures / trials
    return ConcentrationResult(
        failure_rate=rate,
        failures=failures,
        trials=trials,
        bound=bound,
        threshold=threshold,
        eta=eta,
        stderr=math.sqrt(rate * (1.0 - rate) / trials),
    )


def error_decomposition_check(rng, n=60, m=80, K=5, n_outliers=2, quad=2000):
    """Evaluate both sides of the four-term error decomposition on a 1-D instance.

    Everything is finite so every sup/inf is attained: the target ``mu`` and
    each push-forward are represented by quadrature atoms, the discriminator
    family is a symmetric set of clipped ramps, the evaluation family is a set
    of randomly shifted ramps, and the generator family is a set of power maps of
    ``z ~ Uniform(0, 1)``.  Returns a dict with ``lhs``, ``rhs`` and the terms.
    """
    u = (np.arange(quad) + 0.5) / quad
    gamma_mu = float(np.exp(rng.uniform(np.log(0.5), np.log(2.0))))
    mu_atoms = u**gamma_mu

    gammas = np.exp(rng.uniform(np.log(0.4), np.log(2.5), size=6))
    gen_atoms = [u**gk for gk in gammas]

    d_funcs = [
        (lambda x, a=a, sg=sg: sg * np.clip(x - a, -0.5, 0.5))
        for a in np.linspace(0.0, 1.0, 11)
        for sg in (1.0, -1.0)
    ]
    h_funcs = [
        (lambda x, c=c, sg=sg: sg * np.clip(x - c, -0.5, 0.5))
        for c, sg in zip(rng.uniform(0.0, 1.0, size=7), rng.choice([-1.0, 1.0], size=7))
    ]

    x = rng.random(n) ** gamma_mu
    x[rng.choice(n, size=n_outliers, replace=False)] = rng.uniform(2.0, 5.0, size=n_outliers)
    z = rng.random(m)
    part = fixed_partition(n, K)

    omega = np.concatenate([mu_atoms, *gen_atoms])
    mom_d = np.array([mom(f(x), part)[0] for f in d_funcs])
    e_mu_d = np.array([f(mu_atoms).mean() for f in d_funcs])
    e_gen_d = np.array([[f(ga).mean() for f in d_funcs] for ga in gen_atoms])
    emp_gen_d = np.array([[f(z**gk).mean() for f in d_funcs] for gk in gammas])

    g_hat = int(np.argmin(np.max(mom_d[None, :] - emp_gen_d, axis=1)))
    lhs = max(h(mu_atoms).mean() - h(gen_atoms[g_hat]).mean() for h in h_funcs)

    approx = max(
        min(float(np.max(np.abs(h(omega) - f(omega)))) for f in d_funcs) for h in h_funcs
    )
    terms = {
        "approximation": 2.0 * approx,
        "mom_deviation": float(np.max(np.abs(e_mu_d - mom_d))),
        "generator": float(np.min(np.max(mom_d[None, :] - e_gen_d, axis=1))),
        "latent": 2.0 * float(np.max(np.abs(emp_gen_d - e_gen_d))),
    }
    return {"lhs": float(lhs), "rhs": float(sum(terms.values())), "terms": terms}
