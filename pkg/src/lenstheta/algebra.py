"""Quadratic Lie algebras, isotropic splittings, and split structure constants.

All coefficient data is exact rational.  The split constants use the index
convention

    g_low[i,j,k]  = <xi_i, [xi_j, xi_k]>      (all V)
    g_mid[i,j,k]  = <xi^i, [xi_j, xi_k]>      (one W, two V)
    h_mid[i,j,k]  = <xi_i, [xi^j, xi^k]>      (one V, two W)
    h_up[i,j,k]   = <xi^i, [xi^j, xi^k]>      (all W)

with V-indices lowered and W-indices raised throughout, and indices running
over 0..r-1 internally (r = dim/2).
"""

from __future__ import annotations

import enum
import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Optional

Vector = tuple[Fraction, ...]


class SplittingClass(enum.Enum):
    MANIN_TRIPLE = "ManinTriple"
    QUASI_MANIN_V = "QuasiManinV"
    QUASI_MANIN_W = "QuasiManinW"
    GENERAL = "General"


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    check: Optional[str] = None
    indices: Optional[tuple] = None
    detail: str = ""

    def __bool__(self) -> bool:
        return self.ok


@dataclass(frozen=True)
class QuadraticLieAlgebra:
    """Bracket coefficients c^a_{bc} and a symmetric bilinear form B_{ab}.

    ``bracket`` is sparse: {(a,b,c): coeff} means [e_b, e_c] has e_a-component
    coeff.  ``form`` is a dense tuple-of-tuples.
    """

    dim: int
    bracket: dict
    form: tuple

    def c(self, a: int, b: int, c_: int) -> Fraction:
        return self.bracket.get((a, b, c_), Fraction(0))

    def b(self, a: int, b: int) -> Fraction:
        return self.form[a][b]

    def bracket_vec(self, x: Vector, y: Vector) -> Vector:
        out = [Fraction(0)] * self.dim
        for (a, b, c_), v in self.bracket.items():
            if x[b] and y[c_]:
                out[a] += v * x[b] * y[c_]
        return tuple(out)

    def pair(self, x: Vector, y: Vector) -> Fraction:
        return sum(
            (x[a] * self.form[a][b] * y[b] for a in range(self.dim) for b in range(self.dim) if x[a] and y[b]),
            Fraction(0),
        )


def _det_exact(rows: list[list[Fraction]]) -> Fraction:
    """Determinant by fraction-free-ish Gaussian elimination, exact."""
    n = len(rows)
    m = [row[:] for row in rows]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if m[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            m[col], m[piv] = m[piv], m[col]
            det = -det
        det *= m[col][col]
        inv = Fraction(1) / m[col][col]
        for r in range(col + 1, n):
            if m[r][col]:
                f = m[r][col] * inv
                for cc in range(col, n):
                    m[r][cc] -= f * m[col][cc]
    return det


def validate_algebra(alg: QuadraticLieAlgebra) -> ValidationReport:
    """Check antisymmetry, Jacobi, symmetry/nondegeneracy of B, and invariance.

    Returns the first violated identity together with its index tuple.
    """
    n = alg.dim
    for (a, b, c), v in alg.bracket.items():
        if not all(0 <= i < n for i in (a, b, c)):
            return ValidationReport(False, "dimension", (a, b, c), "bracket index out of range")
    if len(alg.form) != n or any(len(row) != n for row in alg.form):
        return ValidationReport(False, "dimension", None, "form matrix has wrong shape")

    for a, b, c in product(range(n), repeat=3):
        if alg.c(a, b, c) != -alg.c(a, c, b):
            return ValidationReport(False, "antisymmetry", (a, b, c),
                                    f"c^{a}_{{{b}{c}}} != -c^{a}_{{{c}{b}}}")
    for a, b, c, e in product(range(n), repeat=4):
        s = sum(
            alg.c(d, a, b) * alg.c(e, d, c)
            + alg.c(d, b, c) * alg.c(e, d, a)
            + alg.c(d, c, a) * alg.c(e, d, b)
            for d in range(n)
        )
        if s != 0:
            return ValidationReport(False, "jacobi", (a, b, c, e), f"Jacobi sum = {s}")
    for a, b in product(range(n), repeat=2):
        if alg.form[a][b] != alg.form[b][a]:
            return ValidationReport(False, "symmetry", (a, b), "B not symmetric")
    if _det_exact([list(row) for row in alg.form]) == 0:
        return ValidationReport(False, "nondegeneracy", None, "det B = 0")
    # Invariance <=> f_abc := sum_d c^d_{ab} B_dc totally antisymmetric.
    f = {}
    for a, b, c in product(range(n), repeat=3):
        f[(a, b, c)] = sum(alg.c(d, a, b) * alg.form[d][c] for d in range(n))
    for a, b, c in product(range(n), repeat=3):
        if f[(a, b, c)] != -f[(a, c, b)] or f[(a, b, c)] != -f[(b, a, c)]:
            return ValidationReport(False, "invariance", (a, b, c),
                                    "<[e_a,e_b],e_c> not totally antisymmetric")
    return ValidationReport(True)


@dataclass(frozen=True)
class IsotropicSplitting:
    """Dual maximal isotropic bases: B(xi_i, xi_j) = B(xi^i, xi^j) = 0,
    B(xi_i, xi^j) = delta."""

    basis_v: tuple[Vector, ...]
    basis_w: tuple[Vector, ...]

    def __post_init__(self):
        if len(self.basis_v) != len(self.basis_w):
            raise ValueError("V and W bases must have equal size")

    @property
    def r(self) -> int:
        return len(self.basis_v)

    def validate(self, alg: QuadraticLieAlgebra) -> ValidationReport:
        r = self.r
        if alg.dim != 2 * r:
            return ValidationReport(False, "dimension", None,
                                    f"ambient dim {alg.dim} != 2*{r}; maximal isotropic splitting needs even dim")
        for i in range(r):
            for j in range(r):
                if alg.pair(self.basis_v[i], self.basis_v[j]) != 0:
                    return ValidationReport(False, "isotropy", (i, j), "B(xi_i, xi_j) != 0")
                if alg.pair(self.basis_w[i], self.basis_w[j]) != 0:
                    return ValidationReport(False, "isotropy", (i, j), "B(xi^i, xi^j) != 0")
                want = Fraction(1) if i == j else Fraction(0)
                if alg.pair(self.basis_v[i], self.basis_w[j]) != want:
                    return ValidationReport(False, "duality", (i, j), "B(xi_i, xi^j) != delta")
        rows = [list(v) for v in self.basis_v] + [list(w) for w in self.basis_w]
        if _det_exact(rows) == 0:
            return ValidationReport(False, "span", None, "V + W does not span")
        return ValidationReport(True)


@dataclass(frozen=True)
class SplitConstants:
    """The four split structure-constant tensors, stored sparsely."""

    r: int
    g_low: dict = field(default_factory=dict)
    g_mid: dict = field(default_factory=dict)
    h_mid: dict = field(default_factory=dict)
    h_up: dict = field(default_factory=dict)

    def entry(self, kind: str, idx: tuple[int, int, int]) -> Fraction:
        return getattr(self, kind).get(idx, Fraction(0))

    def validate(self) -> ValidationReport:
        for kind in ("g_low", "h_up"):
            t = getattr(self, kind)
            for (i, j, k), v in t.items():
                if t.get((i, k, j), Fraction(0)) != -v or t.get((j, i, k), Fraction(0)) != -v:
                    return ValidationReport(False, f"{kind} antisymmetry", (i, j, k), "not totally antisymmetric")
        for kind in ("g_mid", "h_mid"):
            t = getattr(self, kind)
            for (i, j, k), v in t.items():
                if t.get((i, k, j), Fraction(0)) != -v:
                    return ValidationReport(False, f"{kind} antisymmetry", (i, j, k), "not antisymmetric in last two")
        return ValidationReport(True)


def _prune(d: dict) -> dict:
    return {k: v for k, v in d.items() if v != 0}


def build_split_constants(alg: QuadraticLieAlgebra, split: IsotropicSplitting) -> SplitConstants:
    rep = split.validate(alg)
    if not rep:
        raise ValueError(f"invalid splitting: {rep.check} at {rep.indices}: {rep.detail}")
    r = split.r
    g_low, g_mid, h_mid, h_up = {}, {}, {}, {}
    for i, j, k in product(range(r), repeat=3):
        br_vv = alg.bracket_vec(split.basis_v[j], split.basis_v[k])
        br_ww = alg.bracket_vec(split.basis_w[j], split.basis_w[k])
        g_low[(i, j, k)] = alg.pair(split.basis_v[i], br_vv)
        g_mid[(i, j, k)] = alg.pair(split.basis_w[i], br_vv)
        h_mid[(i, j, k)] = alg.pair(split.basis_v[i], br_ww)
        h_up[(i, j, k)] = alg.pair(split.basis_w[i], br_ww)
    return SplitConstants(r, _prune(g_low), _prune(g_mid), _prune(h_mid), _prune(h_up))


def classify_splitting(sc: SplitConstants) -> SplittingClass:
    g0 = not sc.g_low
    h0 = not sc.h_up
    if g0 and h0:
        return SplittingClass.MANIN_TRIPLE
    if g0:
        return SplittingClass.QUASI_MANIN_V
    if h0:
        return SplittingClass.QUASI_MANIN_W
    return SplittingClass.GENERAL


def coeff_e(sc: SplitConstants) -> Fraction:
    """e = sum_{ijk} g^k_{ij} h_k^{ij}, the mixed-vertex theta coefficient."""
    return sum((v * sc.h_mid.get(idx, Fraction(0)) for idx, v in sc.g_mid.items()), Fraction(0))


def coeff_e_prime(sc: SplitConstants) -> Fraction:
    """e' = sum_{ijk} g_{ijk} h^{ijk}, the fully split theta coefficient."""
    return sum((v * sc.h_up.get(idx, Fraction(0)) for idx, v in sc.g_low.items()), Fraction(0))


def change_split_basis(sc: SplitConstants, gl: list[list[Fraction]]) -> SplitConstants:
    """Transform V-indices by gl and W-indices by its inverse-transpose.

    New bases: xi'_i = sum_a gl[i][a] xi_a and xi'^i = sum_a inv(gl)[a][i] xi^a,
    preserving duality.  coeff_e and coeff_e_prime are invariant.
    """
    r = sc.r
    m = [[Fraction(x) for x in row] for row in gl]
    if _det_exact([row[:] for row in m]) == 0:
        raise ValueError("basis change matrix is singular")
    inv = _invert(m)
    # W transforms with columns of inv: xi'^i = sum_a inv[a][i] xi^a.
    def tr(tensor: dict, raised: tuple[bool, bool, bool]) -> dict:
        out: dict = {}
        for idx in product(range(r), repeat=3):
            tot = Fraction(0)
            for src in product(range(r), repeat=3):
                v = tensor.get(src, None)
                if v is None:
                    continue
                coefp = Fraction(1)
                for pos in range(3):
                    coefp *= inv[src[pos]][idx[pos]] if raised[pos] else m[idx[pos]][src[pos]]
                if coefp:
                    tot += v * coefp
            if tot:
                out[idx] = tot
        return out

    return SplitConstants(
        r,
        tr(sc.g_low, (False, False, False)),
        tr(sc.g_mid, (True, False, False)),
        tr(sc.h_mid, (False, True, True)),
        tr(sc.h_up, (True, True, True)),
    )


def _invert(m: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(m)
    a = [row[:] + [Fraction(1) if i == j else Fraction(0) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next(r for r in range(col, n) if a[r][col] != 0)
        a[col], a[piv] = a[piv], a[col]
        f = Fraction(1) / a[col][col]
        a[col] = [x * f for x in a[col]]
        for r in range(n):
            if r != col and a[r][col]:
                g = a[r][col]
                a[r] = [x - g * y for x, y in zip(a[r], a[col])]
    return [row[n:] for row in a]


@dataclass(frozen=True)
class LieBialgebra:
    """Bracket constants c^k_{ij} on g and cobracket constants gamma^{ij}_k
    (= bracket on the dual), both sparse."""

    dim: int
    bracket: dict
    cobracket: dict

    def c(self, k: int, i: int, j: int) -> Fraction:
        return self.bracket.get((k, i, j), Fraction(0))

    def gamma(self, i: int, j: int, k: int) -> Fraction:
        return self.cobracket.get((i, j, k), Fraction(0))

    def validate(self) -> ValidationReport:
        # The cobracket stores gamma^{ij}_k (output index last); re-key it to
        # bracket layout (output index first) for the shared checks.
        cob = {(k, i, j): v for (i, j, k), v in self.cobracket.items()}
        for name, t in (("bracket", self.bracket), ("cobracket", cob)):
            def get(x, y, z, _t=t):
                return _t.get((x, y, z), Fraction(0))
            for a, b, c in product(range(self.dim), repeat=3):
                if get(a, b, c) != -get(a, c, b):
                    return ValidationReport(False, f"{name} antisymmetry", (a, b, c), "")
            for a, b, c, e in product(range(self.dim), repeat=4):
                s = sum(
                    get(d, a, b) * get(e, d, c) + get(d, b, c) * get(e, d, a) + get(d, c, a) * get(e, d, b)
                    for d in range(self.dim)
                )
                if s != 0:
                    return ValidationReport(False, f"{name} jacobi", (a, b, c, e), "")
        # 1-cocycle condition: delta([x,y]) = ad_x delta(y) - ad_y delta(x),
        # componentwise: sum_m gamma^{ab}_m c^m_{ij}
        #   = sum_m [ c^a_{im} gamma^{mb}_j + c^b_{im} gamma^{am}_j
        #           - c^a_{jm} gamma^{mb}_i - c^b_{jm} gamma^{am}_i ].
        n = self.dim
        for a, b, i, j in product(range(n), repeat=4):
            lhs = sum(self.gamma(a, b, m) * self.c(m, i, j) for m in range(n))
            rhs = sum(
                self.c(a, i, m) * self.gamma(m, b, j)
                + self.c(b, i, m) * self.gamma(a, m, j)
                - self.c(a, j, m) * self.gamma(m, b, i)
                - self.c(b, j, m) * self.gamma(a, m, i)
                for m in range(n)
            )
            if lhs != rhs:
                return ValidationReport(False, "cocycle", (a, b, i, j),
                                        "cobracket is not a 1-cocycle for the bracket")
        return ValidationReport(True)


def drinfeld_double(b: LieBialgebra) -> tuple[QuadraticLieAlgebra, IsotropicSplitting]:
    """Double d = g (+) g* with the canonical pairing and mixed bracket

    [e_i, e^j] = sum_k ( gamma^{jk}_i e_k - c^j_{ik} e^k ).
    """
    rep = b.validate()
    if not rep:
        raise ValueError(f"invalid bialgebra: {rep.check} at {rep.indices}")
    n = b.dim
    dim = 2 * n
    # Ambient basis: e_0..e_{n-1} (= g), e_n..e_{2n-1} (= g*).
    br: dict = {}
    for (k, i, j), v in b.bracket.items():
        br[(k, i, j)] = br.get((k, i, j), Fraction(0)) + v
    for (i, j, k), v in b.cobracket.items():
        br[(n + k, n + i, n + j)] = br.get((n + k, n + i, n + j), Fraction(0)) + v
    for i in range(n):
        for j in range(n):
            for k in range(n):
                g = b.gamma(j, k, i)
                if g:
                    br[(k, i, n + j)] = br.get((k, i, n + j), Fraction(0)) + g
                    br[(k, n + j, i)] = br.get((k, n + j, i), Fraction(0)) - g
                c = b.c(j, i, k)
                if c:
                    br[(n + k, i, n + j)] = br.get((n + k, i, n + j), Fraction(0)) - c
                    br[(n + k, n + j, i)] = br.get((n + k, n + j, i), Fraction(0)) + c
    form = [[Fraction(0)] * dim for _ in range(dim)]
    for i in range(n):
        form[i][n + i] = Fraction(1)
        form[n + i][i] = Fraction(1)
    alg = QuadraticLieAlgebra(dim, _prune(br), tuple(tuple(row) for row in form))
    basis_v = tuple(_unit(dim, i) for i in range(n))
    basis_w = tuple(_unit(dim, n + i) for i in range(n))
    split = IsotropicSplitting(basis_v, basis_w)
    vrep = validate_algebra(alg)
    if not vrep:
        raise ValueError(f"double failed validation: {vrep.check} at {vrep.indices}: {vrep.detail}")
    return alg, split


def _unit(n: int, i: int) -> Vector:
    return tuple(Fraction(1) if j == i else Fraction(0) for j in range(n))


def example_bialgebra() -> LieBialgebra:
    """The 2d bialgebra [x,y] = y with dual bracket [x*,y*] = y*."""
    br = {(1, 0, 1): Fraction(1), (1, 1, 0): Fraction(-1)}
    cb = {(0, 1, 1): Fraction(1), (1, 0, 1): Fraction(-1)}
    return LieBialgebra(2, br, cb)


def default_split_constants() -> SplitConstants:
    """Split constants of the Drinfeld double of example_bialgebra(); e = 2."""
    alg, split = drinfeld_double(example_bialgebra())
    return build_split_constants(alg, split)


def random_gl(r: int, rng: random.Random) -> list[list[Fraction]]:
    """A random invertible rational matrix (retry until nonsingular)."""
    while True:
        m = [[Fraction(rng.randint(-3, 3), rng.randint(1, 3)) for _ in range(r)] for _ in range(r)]
        if _det_exact([row[:] for row in m]) != 0:
            return m


# ---------------------------------------------------------------------------
# JSON input format: {"dim": n, "bracket": [[a,b,c,"p/q"],...],
#                     "form": [[a,b,"p/q"],...], "splitV": [...], "splitW": [...]}
# Indices in the file are 1-based; rationals are strings "p/q" or integers.
# ---------------------------------------------------------------------------

def _parse_rat(x) -> Fraction:
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, int):
        return Fraction(x)
    raise ValueError(f"rationals must be integers or 'p/q' strings, got {x!r}")


def load_algebra_json(text: str):
    """Parse the JSON input file; returns (algebra, splitting_or_None)."""
    data = json.loads(text)
    dim = data["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("dim must be a positive integer")
    br = {}
    for entry in data.get("bracket", []):
        a, b, c, v = entry
        br[(a - 1, b - 1, c - 1)] = _parse_rat(v)
    form = [[Fraction(0)] * dim for _ in range(dim)]
    for entry in data.get("form", []):
        a, b, v = entry
        form[a - 1][b - 1] = _parse_rat(v)
        form[b - 1][a - 1] = _parse_rat(v)
    alg = QuadraticLieAlgebra(dim, _prune(br), tuple(tuple(row) for row in form))
    split = None
    if "splitV" in data or "splitW" in data:
        bv = tuple(tuple(_parse_rat(x) for x in vec) for vec in data["splitV"])
        bw = tuple(tuple(_parse_rat(x) for x in vec) for vec in data["splitW"])
        split = IsotropicSplitting(bv, bw)
    return alg, split
