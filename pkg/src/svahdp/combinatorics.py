"""Exact log-space CRP / CRF partition probabilities and Stirling numbers.

Everything here works in natural-log space. Concentration parameters may be
passed as logs so that values such as ``exp(-lambda * 2**20)`` never have to be
materialised as floats.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np
from scipy.special import logsumexp

# Direct log-sum is used for rising factorials up to this length.
_DIRECT_RISING_MAX = 64
_SEATING_GUARD = 6
_CRP_ENUM_MAX = 9


@dataclass(frozen=True)
class Concentrations:
    """Concentrations of a Chinese restaurant franchise, stored as logs.

    ``log_kappa`` belongs to the top-level restaurant and ``log_alpha`` to the
    per-group restaurants.
    """

    log_kappa: float
    log_alpha: float

    def __post_init__(self):
        for name in ("log_kappa", "log_alpha"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")

    @classmethod
    def of(cls, kappa: float, alpha: float) -> "Concentrations":
        if not (kappa > 0 and alpha > 0) or not (math.isfinite(kappa) and math.isfinite(alpha)):
            raise ValueError(f"concentrations must be positive and finite, got {kappa}, {alpha}")
        return cls(math.log(kappa), math.log(alpha))

    @property
    def kappa(self) -> float:
        return math.exp(self.log_kappa)

    @property
    def alpha(self) -> float:
        return math.exp(self.log_alpha)


@dataclass(frozen=True)
class CrfCounts:
    """Table counts ``t`` and customer counts ``C`` of a restaurant franchise.

    Both are ``N x K`` integer matrices: row ``i`` is a restaurant, column
    ``j`` a dish. Empty restaurants (all-zero rows) are permitted; every dish
    column must be used somewhere.
    """

    t: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=np.int64)
        C = np.asarray(self.C, dtype=np.int64)
        if t.ndim != 2 or t.shape != C.shape:
            raise ValueError(f"t and C must be matrices of equal shape, got {t.shape} and {C.shape}")
        if (t < 0).any() or (C < 0).any():
            raise ValueError("counts must be non-negative")
        if ((t >= 1) != (C >= 1)).any():
            raise ValueError("t_ij >= 1 must hold exactly where C_ij >= 1")
        if (t > C).any():
            raise ValueError("t_ij <= C_ij violated")
        if t.shape[1] and (C.sum(axis=0) == 0).any():
            raise ValueError("every dish column must be used by some restaurant")
        t.setflags(write=False)
        C.setflags(write=False)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "C", C)

    @property
    def n_dishes(self) -> int:
        return self.t.shape[1]


# --------------------------------------------------------------------------
# Stirling numbers of the first kind (unsigned)
# --------------------------------------------------------------------------


class _StirlingTable:
    """Triangular tables of [n k], exact (Python int) and log-domain, grown on demand."""

    def __init__(self):
        self._lock = threading.Lock()
        self._exact = [[1]]
        self._log = [[0.0]]

    def _grow(self, n):
        with self._lock:
            while len(self._exact) <= n:
                m = len(self._exact) - 1  # extend row m -> row m+1
                prev, lprev = self._exact[m], self._log[m]
                row = [0] * (m + 2)
                lrow = [-math.inf] * (m + 2)
                logm = math.log(m) if m > 0 else -math.inf
                for k in range(1, m + 2):
                    a = prev[k] if k <= m else 0
                    b = prev[k - 1]
                    row[k] = m * a + b
                    la = lprev[k] + logm if k <= m else -math.inf
                    lrow[k] = np.logaddexp(la, lprev[k - 1])
                self._exact.append(row)
                self._log.append([float(v) for v in lrow])

    def exact(self, n, k):
        if len(self._exact) <= n:
            self._grow(n)
        return self._exact[n][k]

    def log(self, n, k):
        if len(self._log) <= n:
            self._grow(n)
        return self._log[n][k]


_STIRLING = _StirlingTable()


def _check_nk(n, k):
    if n < 0 or k < 0:
        raise ValueError(f"n and k must be non-negative, got n={n}, k={k}")
    if k > n:
        raise ValueError(f"k must not exceed n, got n={n}, k={k}")


def stirling1u(n: int, k: int) -> int:
    """Exact unsigned Stirling number of the first kind ``[n k]``."""
    _check_nk(n, k)
    return _STIRLING.exact(n, k)


def log_stirling1u(n: int, k: int) -> float:
    """Natural log of ``[n k]``; ``-inf`` when the number is zero (``k = 0 < n``).

    The log table follows the recurrence ``[n+1, k] = n [n, k] + [n, k-1]``
    directly in log space.
    """
    _check_nk(n, k)
    return _STIRLING.log(n, k)


# --------------------------------------------------------------------------
# Gamma-ratio helpers
# --------------------------------------------------------------------------


def log_rising_factorial(x: float, n: int) -> float:
    """``log(x (x+1) ... (x+n-1)) = lgamma(x+n) - lgamma(x)``."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    if n <= _DIRECT_RISING_MAX:
        return math.fsum(math.log(x + i) for i in range(n))
    return math.lgamma(x + n) - math.lgamma(x)


def _log_gamma_ratio(log_x: float, n: int) -> float:
    """``log(Gamma(x+1) / Gamma(x+n))`` for ``x = exp(log_x)``, exact for ``n = 0``."""
    if n == 0:
        return log_x
    # x may underflow to 0.0; the ratio is still exact since it starts at x + 1.
    return -log_rising_factorial(math.exp(log_x) + 1.0, n - 1)


def _log_factorial(n: int) -> float:
    return math.lgamma(n + 1)


def _resolve_log(value, log_value, name):
    if log_value is not None:
        return float(log_value)
    if value is None or not value > 0:
        raise ValueError(f"{name} must be positive, got {value}")
    return math.log(value)


def _check_table_counts(c):
    c = [int(v) for v in c]
    if any(v < 1 for v in c):
        raise ValueError(f"table counts must be >= 1, got {c}")
    if not c:
        raise ValueError("at least one table is required")
    return c


# --------------------------------------------------------------------------
# CRP
# --------------------------------------------------------------------------


def crp_log_prob(c: Sequence[int], kappa: float | None = None, *, log_kappa: float | None = None) -> float:
    """CRP table-count probability with ``c_l!`` per table, exactly as printed.

    ``(L-1) log k + log Gamma(k+1) - log Gamma(k + c.) + sum_l log c_l!``

    This weight is *not* normalised over set partitions; see
    :func:`crp_partition_log_prob` for the normalised law.
    """
    c = _check_table_counts(c)
    lk = _resolve_log(kappa, log_kappa, "kappa")
    return (len(c) - 1) * lk + _log_gamma_ratio(lk, sum(c)) + math.fsum(_log_factorial(v) for v in c)


def crp_partition_log_prob(block_sizes: Sequence[int], kappa: float | None = None, *,
                           log_kappa: float | None = None) -> float:
    """Log probability of one particular set partition under a CRP.

    Same as :func:`crp_log_prob` with ``(c_l - 1)!`` in place of ``c_l!``.
    Exponentiated and summed over all set partitions of ``{1..n}`` it gives 1.
    """
    c = _check_table_counts(block_sizes)
    lk = _resolve_log(kappa, log_kappa, "kappa")
    return (len(c) - 1) * lk + _log_gamma_ratio(lk, sum(c)) + math.fsum(_log_factorial(v - 1) for v in c)


def set_partitions(n: int) -> Iterator[list[list[int]]]:
    """Yield every set partition of ``{0..n-1}``, blocks in order of first element."""

    def rec(i, blocks):
        if i == n:
            yield [list(b) for b in blocks]
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        blocks.append([i])
        yield from rec(i + 1, blocks)
        blocks.pop()

    if n == 0:
        yield []
        return
    yield from rec(0, [])


def enumerate_crp_outcomes(n: int, kappa: float = 1.0) -> list[tuple[tuple[tuple[int, ...], ...], float]]:
    """Every set partition of ``{1..n}`` with its probability under the sequential CRP.

    Probabilities are accumulated arrival by arrival: customer ``m+1`` joins a
    table of size ``c`` with probability ``c / (kappa + m)`` or opens a new one
    with probability ``kappa / (kappa + m)``.
    """
    if not 1 <= n <= _CRP_ENUM_MAX:
        raise ValueError(f"n must be in [1, {_CRP_ENUM_MAX}], got {n}")
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    out = []

    def rec(m, blocks, p):
        if m == n:
            out.append((tuple(tuple(b) for b in blocks), p))
            return
        denom = kappa + m
        for b in blocks:
            b.append(m + 1)
            rec(m + 1, blocks, p * (len(b) - 1) / denom)
            b.pop()
        blocks.append([m + 1])
        rec(m + 1, blocks, p * kappa / denom if m else p)
        blocks.pop()

    rec(0, [], 1.0)
    return out


# --------------------------------------------------------------------------
# CRF
# --------------------------------------------------------------------------

SEATING_CONVENTIONS = ("partition", "printed")


def _seatings_to_counts(seatings):
    dishes = sorted({int(d) for tables in seatings for d, _ in tables})
    if dishes != list(range(len(dishes))):
        raise ValueError(f"dish labels must be exactly 0..K-1, got {dishes}")
    K = len(dishes)
    t = np.zeros((len(seatings), K), dtype=np.int64)
    C = np.zeros((len(seatings), K), dtype=np.int64)
    for i, tables in enumerate(seatings):
        for d, c in tables:
            if int(c) < 1:
                raise ValueError(f"restaurant {i}: table of dish {d} has {c} customers")
            t[i, d] += 1
            C[i, d] += int(c)
    return t, C


def _crf_top_level(t, lk):
    K = t.shape[1]
    col = t.sum(axis=0)
    return (K - 1) * lk + _log_gamma_ratio(lk, int(t.sum())) + math.fsum(_log_factorial(int(v)) for v in col)


def _crf_restaurant(t_row_total, C_row_total, la):
    return (t_row_total - 1) * la + _log_gamma_ratio(la, C_row_total)


def crf_log_prob_seatings(seatings: Sequence[Sequence[tuple[int, int]]], conc: Concentrations,
                          convention: str = "partition") -> float:
    """Log CRF probability of a full seating arrangement.

    ``seatings[i]`` lists the tables of restaurant ``i`` as ``(dish, customers)``
    pairs. With ``convention="printed"`` each table contributes ``c_ijt!``
    exactly as in the displayed formula; with the default ``"partition"`` it
    contributes ``(c_ijt - 1)!``, which is the probability of one labelled
    seating and the form whose sum over seatings reproduces
    :func:`crf_log_prob_counts`.
    """
    if convention not in SEATING_CONVENTIONS:
        raise ValueError(f"convention must be one of {SEATING_CONVENTIONS}, got {convention!r}")
    t, C = _seatings_to_counts(seatings)
    shift = 0 if convention == "printed" else 1
    total = _crf_top_level(t, conc.log_kappa)
    for i, tables in enumerate(seatings):
        total += _crf_restaurant(int(t[i].sum()), int(C[i].sum()), conc.log_alpha)
        total += math.fsum(_log_factorial(int(c) - shift) for _, c in tables)
    return total


def crf_log_prob_counts(counts: CrfCounts, conc: Concentrations) -> float:
    """Log CRF probability of table counts ``t`` and customer counts ``C``.

    Customer seatings within each (restaurant, dish) are summed out, which
    brings in ``[C_ij t_ij]``.
    """
    t, C = counts.t, counts.C
    total = _crf_top_level(t, conc.log_kappa)
    for i in range(t.shape[0]):
        total += _crf_restaurant(int(t[i].sum()), int(C[i].sum()), conc.log_alpha)
        total += math.fsum(log_stirling1u(int(c), int(k)) for c, k in zip(C[i], t[i]))
    return total


def enumerate_crf_seatings(counts: CrfCounts) -> Iterator[list[list[tuple[int, int]]]]:
    """Every labelled seating consistent with ``counts``.

    Customers of dish ``j`` in restaurant ``i`` are split into exactly
    ``t_ij`` non-empty tables in every possible way (set partitions).
    Guarded to at most six customers in total.
    """
    C, t = counts.C, counts.t
    if int(C.sum()) > _SEATING_GUARD:
        raise ValueError(f"seating enumeration is limited to {_SEATING_GUARD} customers, got {int(C.sum())}")
    cells = [(i, j) for i in range(C.shape[0]) for j in range(C.shape[1]) if C[i, j] > 0]
    options = []
    for i, j in cells:
        sizes = [sorted(len(b) for b in p) for p in set_partitions(int(C[i, j])) if len(p) == t[i, j]]
        options.append(sizes)

    def rec(idx, acc):
        if idx == len(cells):
            seat = [[] for _ in range(C.shape[0])]
            for (i, j), sizes in zip(cells, acc):
                seat[i].extend((j, s) for s in sizes)
            yield seat
            return
        for sizes in options[idx]:
            acc.append(sizes)
            yield from rec(idx + 1, acc)
            acc.pop()

    yield from rec(0, [])


def crf_marginal_by_enumeration(counts: CrfCounts, conc: Concentrations, convention: str = "partition") -> float:
    """log-sum-exp of :func:`crf_log_prob_seatings` over :func:`enumerate_crf_seatings`."""
    vals = [crf_log_prob_seatings(s, conc, convention) for s in enumerate_crf_seatings(counts)]
    return float(logsumexp(vals))
