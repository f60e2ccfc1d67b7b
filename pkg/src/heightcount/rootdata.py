"""Weight-lattice combinatorics behind the point-count growth exponents.

A semisimple root datum is described here by its Cartan matrix together with
a partition of the simple-root indices into almost-simple factors.  Everything
this module computes is linear algebra over the rationals in the simple-root
basis:

* the coefficients ``u`` of the sum of positive roots, ``2rho = sum u_i a_i``,
  obtained exactly as ``2 * C^{-T} * (1,...,1)``;
* the coefficients ``m`` of a dominant weight in the simple-root basis;
* the growth invariants ``a = max_i (u_i + 1)/m_i`` and the log-power ``b``
  (number of Galois orbits achieving the max), plus the saturation flag
  (does the argmax set meet every almost-simple factor?).

All arithmetic uses ``fractions.Fraction``; ties in the argmax are resolved
by exact equality.  Indices are 1-based throughout the public API, matching
the usual numbering of simple roots.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

__all__ = [
    "RootSystem",
    "WeightVector",
    "GaloisOrbits",
    "ManinInvariants",
    "RootDataError",
    "named_root_system",
    "parse_root_system_config",
    "adjoint_weight_root_coords",
    "two_rho_coeffs",
    "weight_to_root_basis",
    "manin_invariants",
    "is_saturated",
]


class RootDataError(ValueError):
    """Structural problem with root data (singular block, bad partition...)."""


# --------------------------------------------------------------------------
# exact linear algebra over Q (small dense systems only)


def _solve_exact(A: list[list[Fraction]], rhs: list[Fraction]) -> list[Fraction]:
    """Solve A x = rhs by fraction-exact Gauss-Jordan. Raises on singular A."""
    n = len(A)
    M = [row[:] + [rhs[i]] for i, row in enumerate(A)]
    for col in range(n):
        piv = next((r for r in range(col, n) if M[r][col] != 0), None)
        if piv is None:
            raise RootDataError("singular Cartan block")
        M[col], M[piv] = M[piv], M[col]
        inv = Fraction(1) / M[col][col]
        M[col] = [x * inv for x in M[col]]
        for r in range(n):
            if r != col and M[r][col] != 0:
                f = M[r][col]
                M[r] = [x - f * y for x, y in zip(M[r], M[col])]
    return [M[r][n] for r in range(n)]


# --------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class RootSystem:
    """Cartan matrix plus a partition of {1..rank} into almost-simple factors.

    The Cartan matrix convention is ``C[i][j] = <alpha_i, alpha_j^vee>`` so
    that fundamental coordinates of a weight ``w = sum m_j alpha_j`` are
    ``C^T m``.  For simply-laced systems the distinction is invisible.
    """

    rank: int
    cartan_matrix: tuple[tuple[int, ...], ...]
    factor_partition: tuple[frozenset[int], ...]
    label: str = ""

    def __post_init__(self):
        if self.rank < 1:
            raise RootDataError("rank must be positive")
        C = self.cartan_matrix
        if len(C) != self.rank or any(len(row) != self.rank for row in C):
            raise RootDataError("Cartan matrix shape does not match rank")
        for i in range(self.rank):
            if C[i][i] != 2:
                raise RootDataError("Cartan diagonal entries must equal 2")
            for j in range(self.rank):
                if i != j and C[i][j] > 0:
                    raise RootDataError("off-diagonal Cartan entries must be <= 0")
        seen: set[int] = set()
        for block in self.factor_partition:
            if seen & block:
                raise RootDataError("factor blocks overlap")
            seen |= block
        if seen != set(range(1, self.rank + 1)):
            raise RootDataError("factor_partition must partition {1..rank}")
        # off-block entries must vanish, and each block must be invertible
        for block in self.factor_partition:
            for i in block:
                for j in range(1, self.rank + 1):
                    if j not in block and C[i - 1][j - 1] != 0:
                        raise RootDataError("Cartan matrix couples distinct factors")
        for block in self.factor_partition:
            idx = sorted(block)
            sub = [[Fraction(C[i - 1][j - 1]) for j in idx] for i in idx]
            _solve_exact(sub, [Fraction(0)] * len(idx))  # raises if singular

    @property
    def factor_blocks(self) -> tuple[frozenset[int], ...]:
        return self.factor_partition


@dataclass(frozen=True)
class WeightVector:
    """A weight in both the fundamental-weight and simple-root bases."""

    fund_coords: tuple[Fraction, ...]
    root_coords: tuple[Fraction, ...]

    @classmethod
    def from_fundamental(cls, rs: RootSystem, fund: Sequence) -> "WeightVector":
        fund_f = tuple(Fraction(x) for x in fund)
        m = weight_to_root_basis(rs, fund_f)
        return cls(fund_coords=fund_f, root_coords=tuple(m))

    @classmethod
    def from_root_basis(cls, rs: RootSystem, m: Sequence) -> "WeightVector":
        m_f = tuple(Fraction(x) for x in m)
        C = rs.cartan_matrix
        fund = tuple(
            sum(Fraction(C[j][i]) * m_f[j] for j in range(rs.rank))
            for i in range(rs.rank)
        )
        return cls(fund_coords=fund, root_coords=m_f)


@dataclass(frozen=True)
class GaloisOrbits:
    """Orbit partition of the simple-root indices under the Galois twist.

    Split/inner forms have the trivial action: all orbits singletons.
    """

    orbits: tuple[frozenset[int], ...]

    @classmethod
    def trivial(cls, rank: int) -> "GaloisOrbits":
        return cls(tuple(frozenset([i]) for i in range(1, rank + 1)))

    def validate(self, rank: int) -> None:
        seen: set[int] = set()
        for orb in self.orbits:
            if not orb:
                raise RootDataError("empty Galois orbit")
            if seen & orb:
                raise RootDataError("Galois orbits overlap")
            seen |= orb
        if seen != set(range(1, rank + 1)):
            raise RootDataError("Galois orbits must partition {1..rank}")


@dataclass(frozen=True)
class ManinInvariants:
    """Growth data of the height count N(T) ~ c T^a (log T)^(b-1)."""

    a: Fraction
    b: int
    delta_iota: frozenset[int]
    u: tuple[int, ...]
    saturated: bool


# --------------------------------------------------------------------------
# named systems

_MARKS = {
    # coefficients of the highest root in the simple-root basis, per family
    "A": lambda n: [1] * n,
    "B": lambda n: [1] + [2] * (n - 1),
    "C": lambda n: [2] * (n - 1) + [1],
    "D": lambda n: [1] + [2] * (n - 3) + [1, 1],
    "E": {6: [1, 2, 2, 3, 2, 1], 7: [2, 2, 3, 4, 3, 2, 1], 8: [2, 3, 4, 6, 5, 4, 3, 2]},
    "F": {4: [2, 3, 4, 2]},
    "G": {2: [3, 2]},
}


def _cartan_block(family: str, n: int) -> list[list[int]]:
    """Cartan matrix of one simple factor, Bourbaki numbering."""
    if family == "A":
        ok = n >= 1
    elif family == "B" or family == "C":
        ok = n >= 2
    elif family == "D":
        ok = n >= 3
    elif family == "E":
        ok = n in (6, 7, 8)
    elif family == "F":
        ok = n == 4
    elif family == "G":
        ok = n == 2
    else:
        ok = False
    if not ok:
        raise RootDataError(f"unsupported type {family}{n}")

    C = [[2 if i == j else 0 for j in range(n)] for i in range(n)]

    def link(i, j, cij=-1, cji=-1):
        C[i][j] = cij
        C[j][i] = cji

    if family in ("A", "B", "C"):
        for i in range(n - 1):
            link(i, i + 1)
        if family == "B" and n >= 2:
            link(n - 2, n - 1, -2, -1)
        if family == "C" and n >= 2:
            link(n - 2, n - 1, -1, -2)
    elif family == "D":
        for i in range(n - 2):
            link(i, i + 1)
        link(n - 3, n - 1)
    elif family == "E":
        # Bourbaki: chain 1-3-4-5-6(-7(-8)), node 2 attached to 4
        chain = [0, 2, 3, 4, 5, 6, 7][: n - 1]
        for x, y in zip(chain, chain[1:]):
            link(x, y)
        link(1, 3)
    elif family == "F":
        link(0, 1)
        link(1, 2, -2, -1)
        link(2, 3)
    elif family == "G":
        link(0, 1, -1, -3)
    return C


def _parse_factor_names(label: str) -> list[tuple[str, int]]:
    parts = label.replace(" ", "").split("x")
    out = []
    for part in parts:
        if len(part) < 2 or part[0].upper() not in "ABCDEFG" or not part[1:].isdigit():
            raise RootDataError(f"cannot parse root-system type {label!r}")
        out.append((part[0].upper(), int(part[1:])))
    return out


def named_root_system(label: str) -> RootSystem:
    """Build a root system from a name like ``A3``, ``B2``, or ``A1xA1``."""
    factors = _parse_factor_names(label)
    blocks = [_cartan_block(f, n) for f, n in factors]
    rank = sum(n for _, n in factors)
    C = [[0] * rank for _ in range(rank)]
    partition = []
    off = 0
    for blk in blocks:
        n = len(blk)
        for i in range(n):
            for j in range(n):
                C[off + i][off + j] = blk[i][j]
        partition.append(frozenset(range(off + 1, off + n + 1)))
        off += n
    return RootSystem(
        rank=rank,
        cartan_matrix=tuple(tuple(row) for row in C),
        factor_partition=tuple(partition),
        label=label,
    )


def adjoint_weight_root_coords(label: str) -> tuple[int, ...]:
    """Simple-root coefficients of the adjoint highest weight (the highest
    root), per factor, concatenated.  Tabulated marks; no root enumeration."""
    coords: list[int] = []
    for family, n in _parse_factor_names(label):
        entry = _MARKS[family]
        coords.extend(entry(n) if callable(entry) else entry[n])
    return tuple(coords)


def parse_root_system_config(text: str) -> tuple[RootSystem, GaloisOrbits]:
    """Parse a key=value config describing a root system.

    Recognized keys: ``type=A3`` or an explicit ``cartan=[[2,-1,...],...]``,
    plus optional ``factors=[[1,2,3]]`` and ``galois=[[1],[2],[3]]``.
    """
    import json

    kv: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise RootDataError(f"bad config line {line!r}")
        k, v = line.split("=", 1)
        kv[k.strip()] = v.strip()

    if "type" in kv:
        rs = named_root_system(kv["type"])
    elif "cartan" in kv:
        C = json.loads(kv["cartan"])
        rank = len(C)
        if "factors" in kv:
            partition = tuple(frozenset(b) for b in json.loads(kv["factors"]))
        else:
            partition = (frozenset(range(1, rank + 1)),)
        rs = RootSystem(
            rank=rank,
            cartan_matrix=tuple(tuple(int(x) for x in row) for row in C),
            factor_partition=partition,
            label=kv.get("label", "custom"),
        )
    else:
        raise RootDataError("config needs either type= or cartan=")

    if "galois" in kv:
        gal = GaloisOrbits(tuple(frozenset(o) for o in json.loads(kv["galois"])))
        gal.validate(rs.rank)
    else:
        gal = GaloisOrbits.trivial(rs.rank)
    return rs, gal


# --------------------------------------------------------------------------
# operations


def _blockwise_solve_transposed(rs: RootSystem, rhs: Sequence[Fraction]) -> list[Fraction]:
    """Solve C^T x = rhs block by block (blocks are the almost-simple factors)."""
    C = rs.cartan_matrix
    x = [Fraction(0)] * rs.rank
    for block in rs.factor_partition:
        idx = sorted(block)
        A = [[Fraction(C[j - 1][i - 1]) for j in idx] for i in idx]  # transpose
        sol = _solve_exact(A, [rhs[i - 1] for i in idx])
        for pos, i in enumerate(idx):
            x[i - 1] = sol[pos]
    return x


def two_rho_coeffs(rs: RootSystem) -> tuple[int, ...]:
    """Coefficients u with 2rho = sum_i u_i alpha_i.

    2rho has fundamental coordinates (2,...,2), so u = 2 C^{-T} (1,...,1);
    the result is always integral.
    """
    sol = _blockwise_solve_transposed(rs, [Fraction(2)] * rs.rank)
    out = []
    for v in sol:
        if v.denominator != 1:
            raise RootDataError(f"non-integral 2rho coefficient {v}")
        out.append(int(v))
    return tuple(out)


def weight_to_root_basis(rs: RootSystem, fund: Sequence) -> tuple[Fraction, ...]:
    """Convert fundamental coordinates of a weight to simple-root coordinates."""
    if len(fund) != rs.rank:
        raise RootDataError("weight length does not match rank")
    rhs = [Fraction(x) for x in fund]
    return tuple(_blockwise_solve_transposed(rs, rhs))


def is_saturated(rs: RootSystem, delta_iota: frozenset[int] | set[int]) -> bool:
    """True iff the critical set meets every almost-simple factor."""
    if not set(delta_iota) <= set(range(1, rs.rank + 1)):
        raise RootDataError("delta_iota contains out-of-range indices")
    return all(block & set(delta_iota) for block in rs.factor_partition)


def manin_invariants(
    rs: RootSystem,
    m: Sequence,
    gal: GaloisOrbits | None = None,
) -> ManinInvariants:
    """Growth invariants of the height count for a weight with simple-root
    coefficients ``m`` (all must be positive).

    a is the exact maximum of (u_i + 1)/m_i, delta_iota its argmax set, and
    b the number of Galois orbits meeting delta_iota.  Orbits that straddle
    the delta_iota boundary are rejected: for inner forms this cannot occur,
    and the orbit count would be ambiguous.
    """
    m_f = [Fraction(x) for x in m]
    if len(m_f) != rs.rank:
        raise RootDataError("weight length does not match rank")
    if any(x <= 0 for x in m_f):
        raise RootDataError("all simple-root coefficients must be positive")
    if gal is None:
        gal = GaloisOrbits.trivial(rs.rank)
    gal.validate(rs.rank)

    u = two_rho_coeffs(rs)
    ratios = [Fraction(u[i] + 1) / m_f[i] for i in range(rs.rank)]
    a = max(ratios)
    delta = frozenset(i + 1 for i in range(rs.rank) if ratios[i] == a)

    b = 0
    for orb in gal.orbits:
        inside = orb & delta
        if inside and inside != orb:
            raise RootDataError(
                "Galois orbit straddles the critical set; orbit count undefined"
            )
        if inside:
            b += 1

    return ManinInvariants(
        a=a,
        b=b,
        delta_iota=delta,
        u=u,
        saturated=is_saturated(rs, delta),
    )
