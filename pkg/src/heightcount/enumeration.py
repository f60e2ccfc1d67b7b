"""Exhaustive, exact counting of rational points of bounded height.

Three targets are enumerated at desk scale:

* P^n(Q): primitive integer (n+1)-vectors modulo sign, height = max |entry|;
* PGL_2(Q) under the adjoint embedding: primitive 2x2 integer matrices with
  canonical sign and nonzero determinant, height = max |entry| of the 3x3
  adjoint-embedding image (an integer; see the heights module).  Since that
  height is at least max|g|^2, scanning the entry box [-B, B]^4 with
  B = floor(sqrt(T)) is provably complete for the ball H < T;
* products PGL_2 x PGL_2 with weighted height H1^w1 H2^w2, counted exactly
  by convolving two single-factor height spectra.

Counts are bucketed by exact integer height (a HeightSpectrum), which is a
sufficient statistic for every threshold T' <= T and for convolutions.  The
PGL_2 scan also records, per tracked prime p, the joint distribution of
(height, k) where k is the middle elementary-divisor exponent of the
adjoint image at p -- equivalently val_p(det g) for primitive g -- feeding
the local equidistribution checks.

The scan is organized so the inner two entries form a vectorized 2d grid;
an exact symmetry (b, c) -> (-b, -c) of the a >= 1 slice halves the work.
Work partitions merge by addition, so any slicing (including threaded runs)
produces identical results.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

__all__ = [
    "CountQuery",
    "HeightSpectrum",
    "CartanHistogram",
    "PGL2Scan",
    "EnumerationError",
    "ResourceGuardError",
    "IncompleteSpectrumError",
    "count_projective",
    "count_pgl2_adjoint",
    "scan_pgl2_adjoint",
    "convolve_counts",
    "cartan_statistics",
]

# elementwise operations allowed in one scan, ~minutes of numpy time
DEFAULT_WORK_LIMIT = 3 * 10**10


class EnumerationError(ValueError):
    pass


class ResourceGuardError(EnumerationError):
    """The requested scan exceeds the configured work limit."""


class IncompleteSpectrumError(EnumerationError):
    """A spectrum does not cover the height range a computation needs."""


@dataclass(frozen=True)
class CountQuery:
    """What to count: target, threshold, and primes whose Cartan statistics
    to track."""

    target: str  # "projective:<n>" | "pgl2-adjoint" | "product-pgl2:<w1>,<w2>"
    T: int
    primes_tracked: tuple[int, ...] = ()

    def __post_init__(self):
        if self.T < 1:
            raise EnumerationError("threshold T must be >= 1")


@dataclass
class HeightSpectrum:
    """Multiset {integer height -> point count}, complete for heights < threshold."""

    counts: dict[int, int]
    threshold: int

    def __post_init__(self):
        if any(h < 1 for h in self.counts):
            raise EnumerationError("height values must be >= 1")
        if any(c < 0 for c in self.counts.values()):
            raise EnumerationError("counts must be non-negative")
        self.counts = {h: c for h, c in self.counts.items() if c != 0}

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def count_below(self, T: int) -> int:
        """Number of points with height < T; requires T <= threshold."""
        if T > self.threshold:
            raise IncompleteSpectrumError(
                f"spectrum complete below {self.threshold}, asked for {T}"
            )
        return sum(c for h, c in self.counts.items() if h < T)

    def merge(self, other: "HeightSpectrum") -> "HeightSpectrum":
        merged = dict(self.counts)
        for h, c in other.counts.items():
            merged[h] = merged.get(h, 0) + c
        return HeightSpectrum(merged, min(self.threshold, other.threshold))

    def as_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        hs = np.array(sorted(self.counts), dtype=np.int64)
        cs = np.array([self.counts[int(h)] for h in hs], dtype=np.int64)
        return hs, cs


@dataclass
class CartanHistogram:
    """Per-prime frequencies of the middle elementary-divisor exponent of
    the adjoint image, over all points counted."""

    p: int
    freq: dict[int, int]

    @property
    def total(self) -> int:
        return sum(self.freq.values())


def cartan_statistics(hist: CartanHistogram) -> dict[int, Fraction]:
    """Empirical cell frequencies; exact rationals summing to 1."""
    total = hist.total
    if total <= 0:
        raise EnumerationError("empty histogram")
    return {k: Fraction(c, total) for k, c in sorted(hist.freq.items()) if c}


# --------------------------------------------------------------------------
# P^n(Q)


def count_projective(n: int, T: int, work_limit: int = DEFAULT_WORK_LIMIT) -> HeightSpectrum:
    """Exact height spectrum of P^n(Q) points with height < T.

    Enumerates the canonical representatives directly (first nonzero entry
    positive), vectorizing the last coordinate; since height and gcd are
    even in the last coordinate, it runs over y >= 0 with y > 0 counted for
    both signs whenever the prefix already fixed the canonical sign.
    """
    if n < 1 or n > 4:
        raise EnumerationError("projective enumeration supports 1 <= n <= 4")
    if T < 1:
        raise EnumerationError("T must be >= 1")
    work = T * (2 * T - 1) ** n
    if work > work_limit:
        raise ResourceGuardError(
            f"T (2T-1)^n = {work} exceeds work limit {work_limit}"
        )
    if T == 1:
        return HeightSpectrum({}, threshold=1)

    last = np.arange(0, T, dtype=np.int64)
    buckets = np.zeros(T, dtype=np.int64)

    def rec(prefix_gcd: int, prefix_max: int, depth: int, sign_fixed: bool):
        if depth == n:
            if not sign_fixed:
                buckets[1] += 1  # the single point (0, ..., 0, 1)
                return
            g = np.gcd(prefix_gcd, last)
            h = np.maximum(prefix_max, last)
            ok = g == 1
            hsel = h[ok]
            np.add(buckets, 2 * np.bincount(hsel, minlength=T), out=buckets)
            if ok[0]:  # y = 0 has no sign partner
                buckets[prefix_max] -= 1
            return
        lo = 0 if not sign_fixed else -(T - 1)
        for x in range(lo, T):
            rec(
                math.gcd(prefix_gcd, abs(x)),
                max(prefix_max, abs(x)),
                depth + 1,
                sign_fixed or x > 0,
            )

    rec(0, 0, 0, False)
    counts = {h: int(c) for h, c in enumerate(buckets) if c and h >= 1}
    return HeightSpectrum(counts, threshold=T)


# --------------------------------------------------------------------------
# PGL_2(Q) under the adjoint embedding


def _val_table(p: int, nmax: int) -> np.ndarray:
    v = np.zeros(nmax + 1, dtype=np.int64)
    pk = p
    while pk <= nmax:
        v[pk::pk] += 1
        pk *= p
    return v


@dataclass
class PGL2Scan:
    """Raw output of one adjoint-height scan: per-height counts (complete
    below ``threshold``) and, per tracked prime, joint (k, height) counts."""

    threshold: int
    radius: int
    height_counts: np.ndarray  # shape (threshold,), index = height
    joint: dict[int, np.ndarray]  # p -> shape (kmax+1, threshold)

    def spectrum(self, T: int | None = None) -> HeightSpectrum:
        T = self.threshold if T is None else T
        if T > self.threshold:
            raise IncompleteSpectrumError(
                f"scan complete below {self.threshold}, asked for {T}"
            )
        hc = self.height_counts[:T]
        return HeightSpectrum(
            {int(h): int(c) for h, c in enumerate(hc) if c},
            threshold=T,
        )

    def histogram(self, p: int, T: int | None = None) -> CartanHistogram:
        T = self.threshold if T is None else T
        if T > self.threshold:
            raise IncompleteSpectrumError(
                f"scan complete below {self.threshold}, asked for {T}"
            )
        if p not in self.joint:
            raise EnumerationError(f"prime {p} was not tracked in this scan")
        per_k = self.joint[p][:, :T].sum(axis=1)
        return CartanHistogram(p=p, freq={int(k): int(c) for k, c in enumerate(per_k) if c})


def _pgl2_slice(a_values, B, T, primes, vluts, kmaxs, bchunk=48):
    """Scan the canonical-sign slices with leading entry a in a_values.

    Returns (height_counts, joint) accumulators for this slice only.
    """
    rng = np.arange(-B, B + 1, dtype=np.int32)
    C2d = rng[:, None]
    D2d = rng[None, :]
    gcd_cd = np.gcd(np.abs(C2d), np.abs(D2d)).astype(np.int32)
    abs1 = np.abs(rng)
    inner_max = np.maximum(np.maximum(C2d * C2d, D2d * D2d), 2 * np.abs(C2d * D2d))
    C3 = rng[None, :, None]
    D3 = rng[None, None, :]
    gcd_lut = np.gcd.outer(
        np.arange(B + 1, dtype=np.int32), np.arange(B + 1, dtype=np.int32)
    )
    height_counts = np.zeros(T, dtype=np.int64)
    joint = {p: np.zeros((kmaxs[p] + 1) * T, dtype=np.int64) for p in primes}

    def do(a: int, bs: np.ndarray, weight: int):
        b3 = bs[:, None, None]
        det = np.int32(a) * D3 - b3 * C3
        cross = np.abs(np.int32(a) * D3 + b3 * C3)  # |ad + bc|
        col_max = np.maximum(inner_max, abs(a) * abs1[:, None])  # per-a 2d part
        H = np.maximum(col_max[None, :, :], cross)
        np.maximum(H, (np.abs(bs)[:, None] * abs1[None, :])[:, None, :], out=H)
        s_ab = np.maximum(a * a, np.maximum(bs * bs, 2 * np.abs(a * bs))).astype(np.int32)
        np.maximum(H, s_ab[:, None, None], out=H)
        mask = (H < T) & (det != 0)
        g_ab = gcd_lut[abs(a), np.abs(bs)]
        mask &= gcd_lut[g_ab[:, None, None], gcd_cd[None, :, :]] == 1
        hsel = H[mask].astype(np.int64)
        np.add(height_counts, weight * np.bincount(hsel, minlength=T), out=height_counts)
        if primes:
            dsel = np.abs(det[mask]).astype(np.int64)
            for p in primes:
                k = vluts[p][dsel]
                joint[p] += weight * np.bincount(
                    k * T + hsel, minlength=(kmaxs[p] + 1) * T
                )

    bpos = np.arange(1, B + 1, dtype=np.int32)
    for a in a_values:
        if a == 0:
            # canonical sign: a = 0 forces b >= 1; no symmetry shortcut
            for lo in range(0, B, bchunk):
                do(0, bpos[lo : lo + bchunk], 1)
        else:
            # (b, c) -> (-b, -c) preserves height, det, and primitivity,
            # so b > 0 stands for both signs
            do(a, np.zeros(1, dtype=np.int32), 1)
            for lo in range(0, B, bchunk):
                do(a, bpos[lo : lo + bchunk], 2)
    return height_counts, joint


def scan_pgl2_adjoint(
    T: int,
    primes_tracked: Iterable[int] = (),
    radius: int | None = None,
    threads: int = 1,
    work_limit: int = DEFAULT_WORK_LIMIT,
) -> PGL2Scan:
    """Scan primitive canonical-sign 2x2 integer matrices with det != 0 and
    adjoint height < T, with entries in [-radius, radius].

    The default radius floor(sqrt(T)) is complete because the adjoint height
    dominates max|entry|^2; a larger radius must not change any count.
    """
    if T < 1:
        raise EnumerationError("T must be >= 1")
    primes = tuple(sorted(set(int(p) for p in primes_tracked)))
    B = math.isqrt(T) if radius is None else int(radius)
    if radius is not None and B < math.isqrt(T):
        raise EnumerationError(
            f"radius {B} cannot cover the ball H < {T}: need at least {math.isqrt(T)}"
        )
    if B < 1:
        B = 1
    if (2 * B + 1) ** 4 > work_limit:
        raise ResourceGuardError(
            f"(2B+1)^4 = {(2 * B + 1) ** 4} exceeds work limit {work_limit}"
        )
    dmax = 2 * B * B
    vluts = {p: _val_table(p, dmax) for p in primes}
    kmaxs = {p: int(vluts[p].max()) for p in primes}

    a_all = list(range(0, B + 1))
    threads = max(1, int(threads))
    if threads == 1:
        hc, joint = _pgl2_slice(a_all, B, T, primes, vluts, kmaxs)
    else:
        slices = [a_all[i::threads] for i in range(threads)]
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(
                ex.map(lambda s: _pgl2_slice(s, B, T, primes, vluts, kmaxs), slices)
            )
        hc = sum((part[0] for part in parts), np.zeros(T, dtype=np.int64))
        joint = {
            p: sum(part[1][p] for part in parts) for p in primes
        }
    joint2 = {p: joint[p].reshape(kmaxs[p] + 1, T) for p in primes}
    return PGL2Scan(threshold=T, radius=B, height_counts=hc, joint=joint2)


def count_pgl2_adjoint(
    T: int,
    primes_tracked: Iterable[int] = (),
    radius: int | None = None,
    threads: int = 1,
    work_limit: int = DEFAULT_WORK_LIMIT,
) -> tuple[HeightSpectrum, list[CartanHistogram]]:
    """Exact spectrum of PGL_2(Q) adjoint heights < T plus per-prime Cartan
    histograms of the counted points."""
    scan = scan_pgl2_adjoint(
        T, primes_tracked, radius=radius, threads=threads, work_limit=work_limit
    )
    spectrum = scan.spectrum()
    hists = [scan.histogram(p) for p in sorted(scan.joint)]
    return spectrum, hists


# --------------------------------------------------------------------------
# product groups by convolution


def _int_kth_root(x: int, k: int) -> int:
    """floor(x^(1/k)) for x >= 0, exact."""
    if x < 0:
        raise EnumerationError("negative radicand")
    if x == 0:
        return 0
    if k == 1:
        return x
    r = int(round(x ** (1.0 / k)))
    while r > 0 and r**k > x:
        r -= 1
    while (r + 1) ** k <= x:
        r += 1
    return r


def convolve_counts(
    s1: HeightSpectrum,
    s2: HeightSpectrum,
    w1: int,
    w2: int,
    T: int,
) -> int:
    """#{(g, h): H(g)^w1 * H(h)^w2 < T}, exactly, from two spectra.

    For each height h2 in s2, the fiber count is the number of g with
    H(g)^w1 <= (T-1) // h2^w2, read off prefix sums of s1.  Raises if either
    spectrum is not complete over the range the threshold requires.
    """
    if w1 < 1 or w2 < 1:
        raise EnumerationError("weights must be positive integers")
    if T < 1:
        raise EnumerationError("T must be >= 1")
    h2_max = _int_kth_root(T - 1, w2) if T > 1 else 0
    if h2_max >= s2.threshold:
        raise IncompleteSpectrumError(
            f"second spectrum complete below {s2.threshold}, need heights up to {h2_max}"
        )
    h1_needed = _int_kth_root(T - 1, w1) if T > 1 else 0
    if h1_needed >= s1.threshold:
        raise IncompleteSpectrumError(
            f"first spectrum complete below {s1.threshold}, need heights up to {h1_needed}"
        )
    hs1, cs1 = s1.as_arrays()
    cum1 = np.cumsum(cs1)

    total = 0
    for h2, c2 in s2.counts.items():
        if h2 > h2_max:
            continue
        budget = (T - 1) // (h2**w2)  # H1^w1 <= budget
        h1_max = _int_kth_root(budget, w1)
        idx = np.searchsorted(hs1, h1_max, side="right")
        n1 = int(cum1[idx - 1]) if idx > 0 else 0
        total += c2 * n1
    return total
