"""Sample size and figure of merit for telling the TQM arrival-time variance from the SQM one."""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import InputError
from .parallel import thread_count

TESTS = ("chi2", "normal")
_RAW_DRAW_LIMIT = 5_000_000
_CHUNK = 2_500


@dataclass(frozen=True)
class MeritInputs:
    sigma_sqm: float
    sigma_tqm_total: float
    sigmas: float = 5.0
    rate_T: float = 1.0
    power: float = 0.5
    two_sided: bool = False

    def __post_init__(self):
        if not self.sigma_sqm > 0:
            raise InputError("sigma_sqm must be positive")
        if self.sigma_tqm_total < self.sigma_sqm:
            raise InputError("sigma_tqm_total must be at least sigma_sqm")
        if not self.rate_T > 0:
            raise InputError("rate_T must be positive")
        if not self.sigmas > 0:
            raise InputError("sigmas must be positive")
        if not 0 < self.power < 1:
            raise InputError("power must lie in (0, 1)")

    @property
    def variance_ratio(self) -> float:
        return (self.sigma_tqm_total / self.sigma_sqm) ** 2

    @property
    def alpha(self) -> float:
        """Test size: the one-sided (or two-sided) Gaussian tail beyond ``sigmas``."""
        tail = stats.norm.sf(self.sigmas)
        return 2 * tail if self.two_sided else tail

    @property
    def z_alpha(self) -> float:
        return float(self.sigmas) if not self.two_sided else float(stats.norm.isf(self.alpha))


@dataclass(frozen=True)
class MeritReport:
    N: int
    seconds: float
    M: float
    test_name: str


def required_samples(inp: MeritInputs) -> int:
    """Normal approximation: the sample variance of N draws has sd sigma^2 sqrt(2/N).

    Smallest N with (r - 1) sqrt(N/2) >= z_alpha + z_power r; at 50% power this is
    ceil(2 z_alpha^2 / (r - 1)^2).
    """
    r = inp.variance_ratio
    if r <= 1:
        raise InputError("variance ratio must exceed 1 for a discriminable signal")
    z_beta = float(stats.norm.ppf(inp.power))
    need = 2.0 * (inp.z_alpha + z_beta * r) ** 2 / (r - 1.0) ** 2
    return max(1, math.ceil(need * (1.0 - 1e-9)))


def figure_of_merit(N: int, rate_T: float, test_name: str = "variance") -> MeritReport:
    if N < 1:
        raise InputError("N must be at least 1")
    if not rate_T > 0:
        raise InputError("rate_T must be positive")
    seconds = N / rate_T
    return MeritReport(int(N), seconds, math.log10(seconds), test_name)


def critical_value(inp: MeritInputs, N: int, test: str = "chi2") -> float:
    """Rejection threshold on sum((t - tbar)^2) / sigma_sqm^2 with the mean known."""
    if test == "chi2":
        return float(stats.chi2.isf(inp.alpha, N))
    if test == "normal":
        return N * (1.0 + inp.z_alpha * math.sqrt(2.0 / N))
    raise InputError(f"unknown test {test!r}; expected one of {TESTS}")


def _rejections(seed_seq: np.random.SeedSequence, n_trials: int, N: int, sigma: float,
                sigma_null: float, crit: float) -> int:
    rng = np.random.default_rng(seed_seq)
    if n_trials * N <= _RAW_DRAW_LIMIT:
        draws = rng.normal(0.0, sigma, size=(n_trials, N))
        stat = np.sum(draws * draws, axis=1) / sigma_null**2
    else:
        # sum of N squared normals, drawn directly
        stat = rng.chisquare(N, size=n_trials) * (sigma / sigma_null) ** 2
    return int(np.count_nonzero(stat >= crit))


def rejection_rate(inp: MeritInputs, N: int, trials: int, seed: int, test: str = "chi2") -> float:
    """Fraction of simulated experiments of N arrivals that reject the SQM variance."""
    crit = critical_value(inp, N, test)
    root = np.random.SeedSequence([int(seed) & (2**63 - 1), int(N)])
    sizes = [min(_CHUNK, trials - i) for i in range(0, trials, _CHUNK)]
    streams = root.spawn(len(sizes))
    args = [(s, n, N, inp.sigma_tqm_total, inp.sigma_sqm, crit) for s, n in zip(streams, sizes)]
    workers = min(thread_count(), len(args))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            counts = list(pool.map(lambda a: _rejections(*a), args))
    else:
        counts = [_rejections(*a) for a in args]
    return sum(counts) / trials


def mc_power_oracle(inp: MeritInputs, trials: int = 10_000, seed: int = 0, test: str = "chi2",
                    n_max: int = 10_000_000) -> int:
    """Smallest N whose simulated rejection rate reaches the target power."""
    if trials < 10_000:
        raise InputError("mc_power_oracle needs at least 1e4 trials")
    if inp.variance_ratio <= 1:
        raise InputError("variance ratio must exceed 1")
    cache: dict[int, bool] = {}

    def ok(n: int) -> bool:
        if n not in cache:
            cache[n] = rejection_rate(inp, n, trials, seed, test) >= inp.power
        return cache[n]

    lo, hi = 0, max(1, required_samples(inp))
    while not ok(hi):
        lo, hi = hi, hi * 2
        if hi > n_max:
            raise InputError("no N below n_max reaches the target power")
    # lo fails (or is 0); bisect for the first passing N
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def exact_required_samples(inp: MeritInputs, n_max: int = 10_000_000) -> int:
    """Smallest N at which the exact chi-square variance test reaches the target power."""
    r = inp.variance_ratio

    def power(n):
        return stats.chi2.sf(stats.chi2.isf(inp.alpha, n) / r, n)

    lo, hi = 0, max(1, required_samples(inp))
    while power(hi) < inp.power:
        lo, hi = hi, hi * 2
        if hi > n_max:
            raise InputError("no N below n_max reaches the target power")
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if power(mid) >= inp.power:
            hi = mid
        else:
            lo = mid
    return hi


def merit_sweep(variance_ratios, sigmas: float = 5.0, rate_T: float = 1.0, trials: int = 10_000,
                seed: int = 0, test: str = "chi2", two_sided: bool = False):
    """Rows of (sigma_ratio, N_analytic, N_mc, M) with M computed from the Monte Carlo N."""
    rows = []
    for r in variance_ratios:
        inp = MeritInputs(1.0, math.sqrt(r), sigmas, rate_T, two_sided=two_sided)
        n_an = required_samples(inp)
        n_mc = mc_power_oracle(inp, trials, seed, test)
        rows.append((math.sqrt(r), n_an, n_mc, figure_of_merit(n_mc, rate_T).M))
    return rows
