"""Expected forced idle time per frame.

When a work-conserving server only serves the tasks in ``S``, the idle time
in a frame is ``(T - X)^+`` where ``X`` is the total processing time of the
jobs of ``S`` that arrived.  For a fixed arrival set ``X`` is a sum of
independent exponentials (hypoexponential), and

    E[(T - X)^+] = int_0^T F_X(s) ds = T - sum_i C_i (1 - exp(-r_i T)) / r_i,
    C_i = prod_{j != i} r_j / (r_j - r_i).

The alternating sum is only usable for well separated rates.  Near-equal
rates fall back to the phase-type form (matrix exponential) or to Monte
Carlo.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import expm

from .model import ArrivalModel, MarkovArrivals, SystemSpec, arrival_subset_distribution
from .rng import IDLE_STREAM, make_rng

log = logging.getLogger(__name__)

EPS_RATE = 1e-9
LOG_SPACE_ABOVE = 8
CLAMP_WARN = 1e-8
MC_CHUNK = 1 << 18


class NearEqualRates(ValueError):
    def __init__(self, a: float, b: float):
        self.rates = (a, b)
        super().__init__(f"rates {a!r} and {b!r} are within {EPS_RATE:g} relative of each other")


@dataclass(frozen=True)
class IdleEstimate:
    value: float
    std_error: float = 0.0
    method: str = "analytic"
    samples: int | None = None

    @property
    def is_analytic(self) -> bool:
        return self.method != "monte_carlo"


def _clamp(value: float, T: float) -> float:
    if value < -CLAMP_WARN * T or value > T * (1 + CLAMP_WARN):
        log.warning("idle value %.3e outside [0, %g]; clamped", value, T)
    return min(max(value, 0.0), T)


def _check_rates(rates: Sequence[float], T: float) -> None:
    if not T > 0:
        raise ValueError(f"frame length must be positive, got {T}")
    for r in rates:
        if not r > 0:
            raise ValueError(f"rates must be positive, got {r}")


def _check_separation(rates: Sequence[float]) -> None:
    s = sorted(rates)
    for a, b in zip(s, s[1:]):
        if b - a <= EPS_RATE * b:
            raise NearEqualRates(a, b)


def _weights(rates: Sequence[float]) -> list[float]:
    # C_i = prod_{j != i} r_j / (r_j - r_i)
    k = len(rates)
    if k <= LOG_SPACE_ABOVE:
        out = []
        for i, ri in enumerate(rates):
            c = 1.0
            for j, rj in enumerate(rates):
                if j != i:
                    c *= rj / (rj - ri)
            out.append(c)
        return out
    out = []
    for i, ri in enumerate(rates):
        logc, sign = 0.0, 1.0
        for j, rj in enumerate(rates):
            if j != i:
                d = rj - ri
                logc += math.log(rj) - math.log(abs(d))
                if d < 0:
                    sign = -sign
        out.append(sign * math.exp(logc))
    return out


def residual_deficit(rates: Iterable[float], T: float) -> float:
    """E[(T - X)^+] for X a sum of independent exponentials with ``rates``.

    Raises NearEqualRates when two rates are too close for the closed form.
    """
    rates = [float(r) for r in rates]
    _check_rates(rates, T)
    if not rates:
        return float(T)
    _check_separation(rates)
    total = math.fsum(
        c * -math.expm1(-r * T) / r for c, r in zip(_weights(rates), rates)
    )
    return _clamp(T - total, T)


def phase_type_deficit(rates: Iterable[float], T: float) -> float:
    """Same quantity as :func:`residual_deficit`, valid for repeated rates.

    X is phase type with a bidiagonal sub-generator Q, so
    E[(T - X)^+] = T - e_1 (int_0^T exp(Qs) ds) 1, and the integral is the
    upper-right block of exp([[Q, I], [0, 0]] T).
    """
    rates = [float(r) for r in rates]
    _check_rates(rates, T)
    k = len(rates)
    if k == 0:
        return float(T)
    Q = np.diag([-r for r in rates]) + np.diag(rates[:-1], k=1)
    M = np.zeros((2 * k, 2 * k))
    M[:k, :k] = Q
    M[:k, k:] = np.eye(k)
    integral = expm(M * T)[:k, k:]
    survival_area = float(integral[0].sum())
    return _clamp(T - survival_area, T)


@lru_cache(maxsize=4096)
def _deficit(rates: tuple[float, ...], T: float, fallback: str) -> float | None:
    try:
        return residual_deficit(rates, T)
    except NearEqualRates:
        if fallback == "phase_type":
            return phase_type_deficit(rates, T)
        return None


def idle_time_expected(
    S: Iterable[int],
    spec: SystemSpec,
    *,
    fallback: str = "phase_type",
    samples: int = 200_000,
    seed: int = 0,
) -> IdleEstimate:
    """E[I_S] averaged over the arrival law marginalised onto ``S``.

    ``fallback`` picks what happens for near-equal rates: ``"phase_type"``
    stays exact, ``"monte_carlo"`` returns a sampled estimate for the whole
    subset.
    """
    if fallback not in ("phase_type", "monte_carlo"):
        raise ValueError(f"unknown fallback {fallback!r}")
    S = sorted(set(S))
    T = spec.frame_length
    if not S:
        return IdleEstimate(float(T))
    rates = {t.id: t.rate for t in spec.tasks}
    missing = [n for n in S if n not in rates]
    if missing:
        raise KeyError(f"tasks {missing} not in spec")
    terms = []
    for arrived, prob in arrival_subset_distribution(spec.arrivals, S).items():
        if prob == 0.0:
            continue
        key = tuple(sorted(rates[n] for n in arrived))
        d = _deficit(key, float(T), fallback)
        if d is None:
            return idle_time_monte_carlo(S, spec, samples, seed)
        terms.append(prob * d)
    return IdleEstimate(_clamp(math.fsum(terms), T))


def idle_time_monte_carlo(S: Iterable[int], spec: SystemSpec, samples: int, seed: int) -> IdleEstimate:
    """Sample mean of (T - sum of arrived processing times)^+ over ``samples`` frames."""
    if samples < 1:
        raise ValueError("samples must be >= 1")
    S = sorted(set(S))
    T = float(spec.frame_length)
    if not S:
        return IdleEstimate(T, 0.0, "monte_carlo", samples)
    rates = np.array([spec.task(n).rate for n in S])
    rng = make_rng(seed, IDLE_STREAM)
    if isinstance(spec.arrivals, MarkovArrivals):
        # i.i.d. draws from the stationary law
        draw = ArrivalModel.sampler(spec.arrivals, S, rng)
    else:
        draw = spec.arrivals.sampler(S, rng)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        m = min(MC_CHUNK, samples - done)
        arrived = draw(m)
        times = rng.standard_exponential((m, len(S))) / rates
        idle = np.maximum(T - (times * arrived).sum(axis=1), 0.0)
        total += float(idle.sum())
        total_sq += float(np.dot(idle, idle))
        done += m
    mean = total / samples
    if samples > 1:
        var = max(total_sq - samples * mean * mean, 0.0) / (samples - 1)
        se = math.sqrt(var / samples)
    else:
        se = 0.0
    return IdleEstimate(mean, se, "monte_carlo", samples)
