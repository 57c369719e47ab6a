"""Lens-space gluing: pairing solid-torus states, reducing residual fields,
and the closed-form two-loop weights.

The boundary pairing contracts A-side boundary legs against B-side legs at
the same torus point, pulls the B-side kernel back through the gluing matrix,
and evaluates the torus integrals exactly: polynomial form parts by top-form
extraction, circle deltas by integer lattice solving (Smith normal form),
and circle-propagator moments by periodic-Bernoulli formulas.  This is where
the Dedekind sums come from.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import permutations, product
from typing import Optional

from . import forms
from .algebra import SplitConstants, SplittingClass, classify_splitting, coeff_e, coeff_e_prime
from .forms import FormExpr, NonEvaluableKernel, Point, parity
from .graphs import Diagram, StateTerm, catalogue, dualize, evaluate_diagram, merge_terms, rename_vars, state_product, term_vars
from .numtheory import HighPrecisionReal, dedekind_sum_fast, eta_circle, f_theta, harmonic_real, sawtooth

# Sign conventions fixed by the golden pairings (see tests): the sign of a
# boundary-field contraction, and the sign of the redshirt residual-field
# contraction (its magnitude is 1/p).
LEG_CONTRACTION_SIGN = -1
REDSHIRT_SIGN = 1


@dataclass(frozen=True)
class GluingMatrix:
    m: int
    p: int
    n: int
    q: int

    def __post_init__(self):
        if self.m * self.q - self.n * self.p != 1:
            raise ValueError(f"gluing matrix must satisfy mq - np = 1, got {self}")

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.m, self.p, self.n, self.q)


@dataclass(frozen=True)
class LensSpace:
    matrix: GluingMatrix

    @property
    def p(self) -> int:
        return self.matrix.p

    @property
    def q(self) -> int:
        return self.matrix.q

    def __post_init__(self):
        if self.p < 0:
            raise ValueError("canonical storage requires p >= 0")
        if self.p > 0 and math.gcd(self.p, self.q) != 1:
            raise ValueError(f"gcd(p, q) must be 1, got ({self.p}, {self.q})")

    @property
    def is_s1xs2(self) -> bool:
        return self.p == 0


def canonical_mn(p: int, q: int) -> GluingMatrix:
    """The normalized solution of mq - np = 1: 0 <= m < p for p > 1,
    (m, n) = (0, -1) for p = 1, and n = 0 for p = 0."""
    if p < 0:
        raise ValueError("p must be nonnegative")
    if p == 0:
        if q not in (1, -1):
            raise ValueError("p = 0 requires q = +-1")
        return GluingMatrix(q, 0, 0, q)
    if math.gcd(p, q) != 1:
        raise ValueError(f"gcd(p, q) must be 1, got ({p}, {q})")
    if p == 1:
        return GluingMatrix(0, 1, -1, q)
    m = pow(q % p, -1, p)
    n = (m * q - 1) // p
    return GluingMatrix(m, p, n, q)


def dehn_twist(g: GluingMatrix, side: str, k: int) -> GluingMatrix:
    """Compose the gluing with k twists: Left multiplies by T^k from the left
    ((q, n) -> (q + kp, n + km)), Right from the right ((m, n) -> (m + kp,
    n + kq))."""
    if side == "Left":
        return GluingMatrix(g.m, g.p, g.n + k * g.m, g.q + k * g.p)
    if side == "Right":
        return GluingMatrix(g.m + k * g.p, g.p, g.n + k * g.q, g.q)
    raise ValueError("side must be 'Left' or 'Right'")


# -- pullback -------------------------------------------------------------------

def _pull_arg(arg: tuple, g: GluingMatrix) -> tuple:
    acc: dict = {}
    for (pt, coord), c in arg:
        if not pt.bdry:
            raise NonEvaluableKernel("pullback of a bulk coordinate")
        if coord == "t":
            acc[(pt, "t")] = acc.get((pt, "t"), 0) + c * g.m
            acc[(pt, "th")] = acc.get((pt, "th"), 0) + c * g.p
        else:
            acc[(pt, "t")] = acc.get((pt, "t"), 0) + c * g.n
            acc[(pt, "th")] = acc.get((pt, "th"), 0) + c * g.q
    return tuple(sorted(((k, v) for k, v in acc.items() if v),
                        key=lambda kv: (kv[0][0], kv[0][1])))


def _pull_word(word: tuple, g: GluingMatrix) -> list[tuple[Fraction, list]]:
    """Word-level pullback: expand dt/dth substitutions and transform circle
    arguments; returns raw (coefficient, factor-list) branches."""
    acc: list[tuple[Fraction, list]] = [(Fraction(1), [])]
    for f in word:
        kind = f[0]
        if kind == "dt" or kind == "dth":
            pt = f[1]
            c_t, c_th = (g.m, g.p) if kind == "dt" else (g.n, g.q)
            new = []
            for c, fs in acc:
                if c_t:
                    new.append((c * c_t, fs + [("dt", pt)]))
                if c_th:
                    new.append((c * c_th, fs + [("dth", pt)]))
            acc = new
        elif kind in ("etac", "dchat", "b2"):
            arg = _pull_arg(f[1], g)
            if kind == "etac" and not arg:
                return []
            if kind == "dchat" and not arg:
                return []  # delta of a vanishing argument is regularized away
            nf = (kind, arg) if kind != "dchat" else ("dchat", arg, f[2])
            if kind == "b2" and not arg:
                acc = [(c * Fraction(1, 6), fs) for c, fs in acc]
            else:
                for c, fs in acc:
                    fs.append(nf)
        elif kind in ("zz", "leg"):
            for c, fs in acc:
                fs.append(f)
        else:
            raise NonEvaluableKernel(f"factor {kind} is outside the boundary kernel family")
    return acc


def pullback_boundary(e: FormExpr, g: GluingMatrix) -> FormExpr:
    """Pull a boundary kernel back through the gluing diffeomorphism:
    dt -> m dt + p dth, dth -> n dt + q dth, with circle arguments transformed
    linearly."""
    out = []
    for w, c in e.terms.items():
        exprs = [FormExpr({(): c})]
        for f in w:
            exprs.append(_pull_factor(f, g))
        term = forms.wedge_all(exprs)
        out.extend((cc, ww) for ww, cc in term.terms.items())
    return FormExpr.from_terms(out)


def _pull_factor(f: tuple, g: GluingMatrix) -> FormExpr:
    kind = f[0]
    if kind in ("zz", "leg"):
        return FormExpr({(f,): Fraction(1)})
    if kind == "dt":
        pt = f[1]
        if not pt.bdry:
            raise NonEvaluableKernel("bulk factor in a boundary pullback")
        return (FormExpr.word(g.m, forms.f_dt(pt)) + FormExpr.word(g.p, forms.f_dth(pt)))
    if kind == "dth":
        pt = f[1]
        return (FormExpr.word(g.n, forms.f_dt(pt)) + FormExpr.word(g.q, forms.f_dth(pt)))
    if kind in ("etac", "dchat", "b2"):
        arg = _pull_arg(f[1], g)
        nf = (kind, arg) if kind != "dchat" else ("dchat", arg, f[2])
        return FormExpr({(nf,): Fraction(1)}) if arg or kind == "b2" else FormExpr.word(1, nf)
    raise NonEvaluableKernel(f"factor {kind} is outside the boundary kernel family")


# -- exact torus integration ------------------------------------------------------

def _smith_normal_form(a: list[list[int]]):
    """Return (U, D, V) with D = U A V, U and V unimodular, D diagonal."""
    rows = len(a)
    cols = len(a[0]) if rows else 0
    d = [row[:] for row in a]
    u = [[int(i == j) for j in range(rows)] for i in range(rows)]
    v = [[int(i == j) for j in range(cols)] for i in range(cols)]

    def swap_rows(i, j):
        d[i], d[j] = d[j], d[i]
        u[i], u[j] = u[j], u[i]

    def swap_cols(i, j):
        for row in d:
            row[i], row[j] = row[j], row[i]
        for row in v:
            row[i], row[j] = row[j], row[i]

    def add_row(src, dst, c):
        d[dst] = [x + c * y for x, y in zip(d[dst], d[src])]
        u[dst] = [x + c * y for x, y in zip(u[dst], u[src])]

    def add_col(src, dst, c):
        for row in d:
            row[dst] += c * row[src]
        for row in v:
            row[dst] += c * row[src]

    t = 0
    while t < min(rows, cols):
        piv = None
        for i in range(t, rows):
            for j in range(t, cols):
                if d[i][j] and (piv is None or abs(d[i][j]) < abs(d[piv[0]][piv[1]])):
                    piv = (i, j)
        if piv is None:
            break
        swap_rows(t, piv[0])
        swap_cols(t, piv[1])
        again = True
        while again:
            again = False
            for i in range(t + 1, rows):
                if d[i][t]:
                    add_row(t, i, -(d[i][t] // d[t][t]))
                    if d[i][t]:
                        swap_rows(t, i)
                        again = True
            for j in range(t + 1, cols):
                if d[t][j]:
                    add_col(t, j, -(d[t][j] // d[t][t]))
                    if d[t][j]:
                        swap_cols(t, j)
                        again = True
        t += 1
    return u, d, v


def _bernoulli2(x: Fraction) -> Fraction:
    fr = x - math.floor(x)
    return fr * fr - fr + Fraction(1, 6)


class _Scalar:
    """A scalar factor over free lattice variables: kind, integer coefficient
    per free variable, exact constant offset."""

    __slots__ = ("kind", "coeffs", "const")

    def __init__(self, kind: str, coeffs: dict, const: Fraction):
        self.kind = kind
        self.coeffs = {k: v for k, v in coeffs.items() if v}
        self.const = const


def torus_integrate(coeff: Fraction, word: tuple) -> Optional[tuple[Fraction, tuple]]:
    """Integrate a contracted kernel over its boundary torus points.

    Returns (value, residual z-word), or None when the integral vanishes.
    Raises NonEvaluableKernel on patterns outside the closed family.
    """
    zfacs, dts, dths, scalars = [], {}, {}, []
    points: list[Point] = []
    for f in word:
        kind = f[0]
        if kind == "zz":
            zfacs.append(f)
        elif kind == "leg":
            raise NonEvaluableKernel("uncontracted boundary leg in a torus integral")
        elif kind == "dt":
            dts[f[1]] = dts.get(f[1], 0) + 1
            if f[1] not in points:
                points.append(f[1])
        elif kind == "dth":
            dths[f[1]] = dths.get(f[1], 0) + 1
            if f[1] not in points:
                points.append(f[1])
        elif kind in ("etac", "dchat", "b2"):
            if kind == "dchat" and f[2] > 0:
                raise NonEvaluableKernel("derivative-order circle delta in a pairing")
            scalars.append(f)
            for (pt, _), _c in f[1]:
                if pt not in points:
                    points.append(pt)
        else:
            raise NonEvaluableKernel(f"factor {kind} is outside the boundary kernel family")
    for f in scalars:
        if any(not pt.bdry for (pt, _), _c in f[1]):
            raise NonEvaluableKernel("bulk coordinate survived to the pairing")
    points = sorted(points)
    # Top-form check: exactly one dt and one dth per point.
    for pt in points:
        if dts.get(pt, 0) != 1 or dths.get(pt, 0) != 1:
            return None
    # Koszul sign of reordering the odd form factors into dt(p1) dth(p1) ... .
    current = [f for f in word if f[0] in ("dt", "dth")]
    target = []
    for pt in points:
        target.append(("dt", pt))
        target.append(("dth", pt))
    sign = _perm_parity(current, target)

    # Lattice variables.
    vars_: list[tuple] = []
    for pt in points:
        vars_.append((pt, "t"))
        vars_.append((pt, "th"))
    vidx = {v: i for i, v in enumerate(vars_)}
    n = len(vars_)

    deltas = [f for f in scalars if f[0] == "dchat"]
    others = [f for f in scalars if f[0] != "dchat"]

    measure = Fraction(1)
    if deltas:
        a = [[0] * n for _ in deltas]
        for i, f in enumerate(deltas):
            for (pt, coord), c in f[1]:
                a[i][vidx[(pt, coord)]] = c
        u, d, v = _smith_normal_form(a)
        diag = [d[i][i] if i < n else 0 for i in range(len(deltas))]
        if any(x == 0 for x in diag):
            return None  # dependent deltas: delta(0) is regularized to zero
        for x in diag:
            measure /= abs(x)
        # Remaining scalar arguments in the w coordinates: x = V w.
        def to_w(f):
            coeffs = [0] * n
            for (pt, coord), c in f[1]:
                j = vidx[(pt, coord)]
                for k in range(n):
                    coeffs[k] += c * v[j][k]
            return coeffs
        discrete = list(range(len(deltas)))
        free = list(range(len(deltas), n))
        sols: list[list[Fraction]] = [[]]
        for i, x in enumerate(diag):
            sols = [s + [Fraction(j, abs(x))] for s in sols for j in range(abs(x))]
        total = Fraction(0)
        for s in sols:
            val = _integrate_free(
                [_Scalar(f[0],
                         {k: cw for k, cw in zip(free, to_w(f)[len(deltas):]) if cw},
                         sum((Fraction(cw) * s[i] for i, cw in enumerate(to_w(f)[:len(deltas)])), Fraction(0)))
                 for f in others],
                free)
            if val is not None:
                total += val
        value = measure * total
    else:
        value = _integrate_free(
            [_Scalar(f[0], {vidx[key]: c for key, c in f[1]}, Fraction(0)) for f in others],
            list(range(n)))
        if value is None:
            value = Fraction(0)
    if value == 0:
        return None
    return coeff * sign * value, tuple(zfacs)


def _perm_parity(current: list, target: list) -> int:
    if sorted(map(repr, current)) != sorted(map(repr, target)):
        return 0
    pos = {repr(f): i for i, f in enumerate(target)}
    perm = [pos[repr(f)] for f in current]
    sign = 1
    seen = [False] * len(perm)
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, clen = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            clen += 1
        if clen % 2 == 0:
            sign = -sign
    return sign


def _integrate_free(scalars: list[_Scalar], free: list[int]) -> Optional[Fraction]:
    """Integrate the remaining circle factors over the free torus directions."""
    scalars = list(scalars)
    pref = Fraction(1)
    for var in free:
        with_var = [s for s in scalars if var in s.coeffs]
        if not with_var:
            continue
        kinds = sorted(s.kind for s in with_var)
        if kinds == ["etac"] or kinds == ["b2"]:
            return None  # odd first moment / mean-zero Bernoulli
        if kinds == ["etac", "etac"]:
            sa, sb = with_var
            a, b = sa.coeffs[var], sb.coeffs[var]
            g = math.gcd(abs(a), abs(b))
            # int ((a u + c1)) ((b u + c2)) du = (g^2/2ab) B2({(b c1 - a c2)/g})
            newc: dict = {}
            for k, v in sa.coeffs.items():
                if k != var:
                    newc[k] = newc.get(k, 0) + (b // g) * v
            for k, v in sb.coeffs.items():
                if k != var:
                    newc[k] = newc.get(k, 0) - (a // g) * v
            const = (Fraction(b, g) * sa.const - Fraction(a, g) * sb.const)
            pref *= Fraction(g * g, 2 * a * b)
            scalars = [s for s in scalars if s not in with_var]
            scalars.append(_Scalar("b2", newc, const))
            continue
        raise NonEvaluableKernel(f"torus moment pattern {kinds} is outside the evaluable family")
    total = pref
    for s in scalars:
        if s.coeffs:
            raise NonEvaluableKernel("free variable survived integration")
        v = sawtooth(s.const) if s.kind == "etac" else _bernoulli2(s.const)
        if v == 0:
            return None
        total *= v
    return total


# -- pairing ----------------------------------------------------------------------

def pair_states(state_a: list[StateTerm], state_b: list[StateTerm], g: GluingMatrix,
                max_order: Optional[int] = None,
                connected: Optional[tuple[int, int]] = None) -> list[StateTerm]:
    """BKS-style pairing: contract A-side boundary legs against pulled-back
    B-side legs in all ways, then integrate over the shared torus.

    With ``connected = (n_a, n_b)`` instance counts, keep only matchings whose
    contraction graph over the diagram instances is connected (instances are
    read off the decade of the boundary point ids)."""
    out: list[StateTerm] = []
    for ta in state_a:
        legs_a = [f for f in ta.word if f[0] == "leg"]
        pts_a = [f[2] for f in legs_a]
        off = max(term_vars(ta), default=-1) + 1
        for tb in state_b:
            legs_b = [f for f in tb.word if f[0] == "leg"]
            if len(legs_a) != len(legs_b):
                continue
            tbr = rename_vars(tb, {v: v + off for v in term_vars(tb)})
            for sigma in permutations(range(len(legs_b))):
                if connected is not None:
                    edges = [(("A", pts_a[sigma[i]].id // 10), ("B", legs_b[i][2].id // 10))
                             for i in range(len(legs_b))]
                    if not _is_connected(connected[0], connected[1], edges):
                        continue
                ptmap = {legs_b[i][2]: pts_a[sigma[i]] for i in range(len(legs_b))}
                if len(set(ptmap.values())) != len(ptmap):
                    continue
                tb2 = _relabel_points(tbr, ptmap)
                joined = _contract_and_integrate(ta, tb2, g)
                if joined is not None:
                    out.extend(joined)
    out = merge_terms(out)
    if max_order is not None:
        out = [t for t in out if t.eps <= max_order]
    return out


def _is_connected(n_a: int, n_b: int, edges: list[tuple]) -> bool:
    nodes = [("A", i) for i in range(n_a)] + [("B", i) for i in range(n_b)]
    if len(nodes) <= 1:
        return True
    parent = {v: v for v in nodes}

    def find(v):
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[ra] = rb
    roots = {find(v) for v in nodes}
    return len(roots) == 1


def _relabel_points(t: StateTerm, ptmap: dict) -> StateTerm:
    def mp(pt):
        return ptmap.get(pt, pt)

    word = []
    for f in t.word:
        kind = f[0]
        if kind in ("etac", "dchat", "b2"):
            arg = tuple(sorted((((mp(pt), coord), c) for (pt, coord), c in f[1]),
                               key=lambda kv: (kv[0][0], kv[0][1])))
            word.append((kind, arg) if kind != "dchat" else ("dchat", arg, f[2]))
        elif kind in ("dt", "dth"):
            word.append((kind, mp(f[1])))
        elif kind == "leg":
            word.append((kind, f[1], mp(f[2]), f[3]))
        elif kind == "zz":
            word.append(f)
        else:
            raise NonEvaluableKernel(f"factor {kind} in a boundary state")
    return replace(t, word=tuple(word))


def _contract_and_integrate(ta: StateTerm, tb: StateTerm, g: GluingMatrix) -> Optional[list[StateTerm]]:
    out = []
    for cb, wb in _pull_word(tb.word, g):
        s, joined = forms._normalize_word(ta.word + tuple(wb))
        if joined is None:
            continue
        coeff = ta.coeff * tb.coeff * cb * s
        # Contract adjacent A/B leg pairs at equal points.
        word = list(joined)
        var_glue: dict = {}
        npairs = 0
        k = 0
        while k < len(word):
            if word[k][0] == "leg":
                if (k + 1 >= len(word) or word[k + 1][0] != "leg"
                        or word[k][2] != word[k + 1][2] or word[k][1] == word[k + 1][1]):
                    return None  # unmatched boundary field
                a_leg = word[k] if word[k][1] == "A" else word[k + 1]
                b_leg = word[k + 1] if word[k][1] == "A" else word[k]
                var_glue[b_leg[3]] = a_leg[3]
                del word[k:k + 2]
                npairs += 1
                coeff *= LEG_CONTRACTION_SIGN
                continue
            k += 1
        tensors = ta.tensors + tb.tensors
        if var_glue:
            tensors = tuple((kd, tuple(var_glue.get(v, v) for v in idx)) for kd, idx in tensors)
            word = [
                (f[0], f[1], f[2], var_glue.get(f[3], f[3])) if f[0] in ("zz", "leg") else f
                for f in word
            ]
        res = torus_integrate(coeff, tuple(word))
        if res is None:
            continue
        value, zword = res
        out.append(StateTerm(value, tensors, zword, ta.eps + tb.eps + npairs,
                             ta.free_traces + tb.free_traces))
    return out


# -- residual-field reduction ------------------------------------------------------

GLUED_RENAME = {("B", "z1"): "z1", ("A", "z1"): "z2", ("B", "zp1"): "zp1", ("A", "zp1"): "zp2"}


def reduce_residuals(terms: list[StateTerm], g: GluingMatrix) -> list[StateTerm]:
    """Contract redshirt pairs (A-side zp2 with B-side z2) at weight
    REDSHIRT_SIGN / p each, drop terms with surviving conjugates, and rename
    the survivors to the glued coordinates."""
    p = g.p
    if p == 0:
        raise ValueError("p = 0 has no redshirt residual fields; use the S1xS2 branch")
    out: list[StateTerm] = []
    for t in terms:
        zs = [f for f in t.word if f[0] == "zz"]
        if any(f[1] == "A" and f[2] == "z2" for f in zs):
            continue
        if any(f[1] == "B" and f[2] == "zp2" for f in zs):
            continue
        red_a = [f for f in zs if f[1] == "A" and f[2] == "zp2"]
        red_b = [f for f in zs if f[1] == "B" and f[2] == "z2"]
        if len(red_a) != len(red_b):
            continue
        others = [f for f in t.word if f not in red_a + red_b]
        k = len(red_a)
        if k == 0:
            out.append(_rename_glued(t))
            continue
        # Redshirt coordinates are even: no Koszul signs in the Wick sum.
        for matching in permutations(range(k)):
            mapping = {red_b[i][3]: red_a[matching[i]][3] for i in range(k)}
            tensors = tuple((kd, tuple(mapping.get(v, v) for v in idx)) for kd, idx in t.tensors)
            word = tuple(
                (f[0], f[1], f[2], mapping.get(f[3], f[3])) if f[0] in ("zz", "leg") else f
                for f in others
            )
            coeff = t.coeff * Fraction(REDSHIRT_SIGN, p) ** k
            # Count contracted indices that no longer appear anywhere: each is
            # a free trace contributing a factor dim/2 at evaluation time.
            live = {v for _, idx in tensors for v in idx}
            live |= {f[3] for f in word if f[0] in ("zz", "leg")}
            traces = sum(1 for f in red_a if mapping.get(f[3], f[3]) not in live
                         and f[3] not in live)
            nt = StateTerm(coeff, tensors, word, t.eps + k)
            nt = replace(nt, free_traces=t.free_traces + traces)
            out.append(_rename_glued(nt))
    return merge_terms(out)


def _rename_glued(t: StateTerm) -> StateTerm:
    word = []
    for f in t.word:
        if f[0] == "zz":
            key = (f[1], f[2])
            if key not in GLUED_RENAME:
                raise ValueError(f"residual coordinate {key} should not survive reduction")
            word.append(("zz", "G", GLUED_RENAME[key], f[3]))
        else:
            word.append(f)
    s, w = forms._normalize_word(tuple(word))
    if w is None:
        return replace(t, coeff=Fraction(0))
    return replace(t, coeff=t.coeff * s, word=w)


# -- Lie evaluation -----------------------------------------------------------------

def eval_lie_scalar(t: StateTerm, sc: SplitConstants) -> Fraction:
    """Value of a fully contracted (constant) state term on concrete split
    constants: sum over index assignments of the tensor-entry product."""
    if t.word:
        raise ValueError("eval_lie_scalar needs a constant term (empty word)")
    vars_ = term_vars(t)
    r = sc.r
    total = Fraction(0)
    for assign in product(range(r), repeat=len(vars_)):
        env = dict(zip(vars_, assign))
        prod_ = Fraction(1)
        for kind, idx in t.tensors:
            prod_ *= sc.entry(kind, tuple(env[v] for v in idx))
            if prod_ == 0:
                break
        total += prod_
    return t.coeff * total * Fraction(r) ** t.free_traces


# -- the end-to-end pipeline ---------------------------------------------------------

_PIPELINE_ITEMS = ("Gamma0", "Gamma1,0", "Gamma1,1", "Gamma1,2b", "Gamma1,2a",
                   "Gamma1,3", "Gamma2,0", "Gamma2,1", "Gamma2,2")


def _shift_points(t: StateTerm, offset: int) -> StateTerm:
    if offset == 0:
        return t

    def mp(pt: Point) -> Point:
        return Point(pt.id + offset, pt.bdry) if pt.bdry else pt

    word = []
    for f in t.word:
        kind = f[0]
        if kind in ("etac", "dchat", "b2"):
            arg = tuple((((mp(pt), coord), c)) for (pt, coord), c in f[1])
            word.append((kind, arg) if kind != "dchat" else ("dchat", arg, f[2]))
        elif kind in ("dt", "dth"):
            word.append((kind, mp(f[1])))
        elif kind == "leg":
            word.append((kind, f[1], mp(f[2]), f[3]))
        else:
            word.append(f)
    return replace(t, word=tuple(word))


class PipelineCache:
    """Evaluated catalogue states and their multiset products, reused across
    gluing matrices (they do not depend on the lens data)."""

    def __init__(self, sc: Optional[SplitConstants] = None):
        self.cat = catalogue()
        self.sc = sc
        self._states: dict = {}
        self._multi: dict = {}

    def state(self, name: str, rep: str) -> list[StateTerm]:
        key = (name, rep)
        if key not in self._states:
            d = self.cat[name] if rep == "A" else dualize(self.cat[name])
            self._states[key] = evaluate_diagram(d, rep, self.sc)
        return self._states[key]

    def multiset_state(self, names: tuple, rep: str) -> list[StateTerm]:
        key = (names, rep)
        if key not in self._multi:
            acc = [StateTerm(Fraction(1), (), (), 0)]
            for k, name in enumerate(names):
                inst = [_shift_points(t, 10 * k) for t in self.state(name, rep)]
                acc = state_product(acc, inst)
            mult = Fraction(1)
            for name in set(names):
                mult /= math.factorial(names.count(name))
            self._multi[key] = [replace(t, coeff=t.coeff * mult) for t in acc]
        return self._multi[key]

    def join_records(self, ms_a: tuple, ms_b: tuple, constants_only: bool) -> list[tuple]:
        """Lens-independent pairing prework: term pairs with the B term
        variable-shifted, leg-matched, connectivity-checked and relabeled."""
        key = (ms_a, ms_b, constants_only)
        if key in self._multi:
            return self._multi[key]
        sa = self.multiset_state(ms_a, "A")
        sb = self.multiset_state(ms_b, "B")
        n_a = len(ms_a)
        n_b = len(ms_b)
        records = []
        for ta in sa:
            legs_a = [f for f in ta.word if f[0] == "leg"]
            pts_a = [f[2] for f in legs_a]
            off = max(term_vars(ta), default=-1) + 1
            for tb in sb:
                legs_b = [f for f in tb.word if f[0] == "leg"]
                if len(legs_a) != len(legs_b):
                    continue
                if constants_only and not _reducible_to_constant(ta, tb):
                    continue
                tbr = rename_vars(tb, {v: v + off for v in term_vars(tb)})
                for sigma in permutations(range(len(legs_b))):
                    edges = [(("A", pts_a[sigma[i]].id // 10), ("B", legs_b[i][2].id // 10))
                             for i in range(len(legs_b))]
                    if not _is_connected(n_a, n_b, edges):
                        continue
                    ptmap = {legs_b[i][2]: pts_a[sigma[i]] for i in range(len(legs_b))}
                    if len(set(ptmap.values())) != len(ptmap):
                        continue
                    records.append((ta, _relabel_points(tbr, ptmap)))
        self._multi[key] = records
        return records


def enumerate_multisets(max_bulk: int = 2, max_legs: int = 3) -> list[tuple]:
    """All catalogue multisets with the stated bulk-vertex and leg budgets."""
    from itertools import combinations_with_replacement

    cat = catalogue()
    info = {n: (cat[n].n_bulk, len(cat[n].legs) + len(cat[n].bdry_decs)) for n in _PIPELINE_ITEMS}
    out = [()]
    for r in range(1, 4):
        for combo in combinations_with_replacement(_PIPELINE_ITEMS, r):
            bulkc = sum(info[n][0] for n in combo)
            legsc = sum(info[n][1] for n in combo)
            if bulkc <= max_bulk and legsc <= max_legs:
                out.append(combo)
    return out


def _z_profile(terms: tuple) -> dict:
    prof: dict = {}
    for f in terms:
        if f[0] == "zz":
            key = (f[1], f[2])
            prof[key] = prof.get(key, 0) + 1
    return prof


def _reducible_to_constant(ta: StateTerm, tb: StateTerm) -> bool:
    prof = _z_profile(ta.word + tb.word)
    if prof.get(("A", "z2"), 0) or prof.get(("B", "zp2"), 0):
        return False
    if prof.get(("A", "zp2"), 0) != prof.get(("B", "z2"), 0):
        return False
    return all(k in (("A", "zp2"), ("B", "z2")) for k in prof)


def lens_pipeline(lens: LensSpace, sc: Optional[SplitConstants] = None,
                  constants_only: bool = True, max_order: int = 1,
                  cache: Optional[PipelineCache] = None,
                  trace: Optional[list] = None) -> list[StateTerm]:
    """Run catalogue -> evaluate -> dualize -> pair -> reduce for a lens space.

    With ``constants_only`` the pairing is restricted to term pairs whose
    residual content can reduce to a constant (the theta sector)."""
    if lens.p == 0:
        raise ValueError("the pipeline reduction needs p != 0")
    g = lens.matrix
    cache = cache or PipelineCache(sc)
    combos = enumerate_multisets()
    paired: list[StateTerm] = []
    for ms_a in combos:
        for ms_b in combos:
            if ms_a == () and ms_b == ():
                continue
            bulk_total = sum(cache.cat[n].n_bulk for n in ms_a + ms_b)
            if bulk_total > 2:
                continue
            records = cache.join_records(ms_a, ms_b, constants_only)
            if not records:
                continue
            res: list[StateTerm] = []
            for ta, tb2 in records:
                joined = _contract_and_integrate(ta, tb2, g)
                if joined:
                    res.extend(t for t in joined if t.eps <= max_order)
            res = merge_terms(res)
            if res and trace is not None:
                trace.append((ms_a, ms_b, res))
            paired.extend(res)
    reduced = reduce_residuals(paired, g)
    return [t for t in reduced if t.eps <= max_order]


def end_to_end_weight_mt(lens: LensSpace, sc: SplitConstants,
                         cache: Optional[PipelineCache] = None) -> Fraction:
    """The two-loop constant of the glued state, computed through the full
    diagram pipeline.  Contract: equals two_loop_weight_mt(lens, coeff_e(sc))."""
    if classify_splitting(sc) != SplittingClass.MANIN_TRIPLE:
        raise ValueError("end-to-end derivation is implemented for Manin-triple data")
    if lens.p == 0:
        raise ValueError("p = 0 is handled by the S1xS2 branch")
    terms = lens_pipeline(lens, sc, constants_only=True, max_order=1, cache=cache)
    total = Fraction(0)
    for t in terms:
        if not t.word and t.eps == 1:
            total += eval_lie_scalar(t, sc)
    return total


# -- closed-form weights ---------------------------------------------------------------

def two_loop_weight_mt(lens: LensSpace, e: Fraction = Fraction(1)) -> Fraction:
    """w2 = e * (s(q,p)/2 + (q+m)/(12p)); the p = 0 branch returns the
    S1 x S2 pairing coefficient e*q/12."""
    g = lens.matrix
    if lens.p == 0:
        return e * Fraction(g.q, 12)
    return e * (dedekind_sum_fast(g.q, g.p) / 2 + Fraction(g.q + g.m, 12 * g.p))


def nmt_k_sum(lens: LensSpace) -> HighPrecisionReal:
    """sum_k eta(k/p) [f(qk/p) + f(mk/p)] over k = 0..p-1."""
    g = lens.matrix
    total = HighPrecisionReal.exact(0)
    for k in range(lens.p):
        w = eta_circle(Fraction(k, lens.p))
        if w == 0:
            continue
        total = total + f_theta(Fraction(g.q * k, lens.p)).scale(w)
        total = total + f_theta(Fraction(g.m * k, lens.p)).scale(w)
    return total


def two_loop_weight_nmt(lens: LensSpace, e: Fraction, e_prime: Fraction,
                        variant: str = "theorem") -> tuple[Fraction, HighPrecisionReal]:
    """MT part plus the non-Manin extra.  ``variant`` selects between the
    closed formula as stated in the theorem ((q+m) numerator, 1/2 on the
    Dedekind term only) and the effective-action display ((m+p) numerator,
    uniform 1/2)."""
    import mpmath

    if lens.p == 0:
        raise ValueError("the non-Manin closed form needs p > 0")
    g = lens.matrix
    mt = two_loop_weight_mt(lens, e)
    if e_prime == 0:
        return mt, HighPrecisionReal.exact(0)
    s = dedekind_sum_fast(g.q, g.p)
    ksum = nmt_k_sum(lens)
    h = harmonic_real(Fraction(1, lens.p))
    with mpmath.workdps(40):
        pi2 = mpmath.pi ** 2
        if variant == "theorem":
            extra = HighPrecisionReal.exact(s / 2) + ksum + \
                HighPrecisionReal(h.value * (g.q + g.m) / (2 * pi2), h.err)
            extra = extra.scale(e_prime)
        elif variant == "seff":
            extra = HighPrecisionReal.exact(s) + ksum + \
                HighPrecisionReal(h.value * (g.m + lens.p) / (2 * pi2), h.err)
            extra = extra.scale(e_prime / 2)
        else:
            raise ValueError("variant must be 'theorem' or 'seff'")
    return mt, extra


# -- effective action --------------------------------------------------------------------

@dataclass(frozen=True)
class EffectiveAction:
    """Cubic one-loop part on reduced residual coordinates plus the exact and
    real two-loop constants."""

    cubic: tuple
    two_loop_exact: Fraction
    two_loop_real: HighPrecisionReal
    class_used: SplittingClass

    def __post_init__(self):
        if self.class_used == SplittingClass.MANIN_TRIPLE and float(self.two_loop_real.value) != 0.0:
            raise ValueError("Manin-triple data forces a vanishing real part")


def assemble_Seff(lens: LensSpace, sc: SplitConstants,
                  pipeline_terms: Optional[list] = None,
                  variant: str = "theorem") -> EffectiveAction:
    cls = classify_splitting(sc)
    e = coeff_e(sc)
    ep = coeff_e_prime(sc)
    if pipeline_terms is None and lens.p != 0:
        pipeline_terms = lens_pipeline(lens, sc, constants_only=False, max_order=1)
    cubic = tuple(t for t in (pipeline_terms or [])
                  if t.eps == -1 and t.word and all(f[0] == "zz" for f in t.word)
                  and len(t.word) == 3)
    exact = two_loop_weight_mt(lens, e)
    if cls == SplittingClass.MANIN_TRIPLE or ep == 0 or lens.p == 0:
        real = HighPrecisionReal.exact(0)
    else:
        _, real = two_loop_weight_nmt(lens, e, ep, variant)
    return EffectiveAction(cubic, exact, real, cls)


def to_record(lens: LensSpace, sc: Optional[SplitConstants] = None,
              variant: str = "theorem") -> dict:
    """The results record: exact and real two-loop weights for a lens space."""
    g = lens.matrix
    if sc is None:
        e, ep = Fraction(1), Fraction(0)
        cls = SplittingClass.MANIN_TRIPLE
    else:
        e, ep = coeff_e(sc), coeff_e_prime(sc)
        cls = classify_splitting(sc)
    exact = two_loop_weight_mt(lens, e)
    if ep == 0 or lens.p == 0:
        real = 0.0
    else:
        _, extra = two_loop_weight_nmt(lens, e, ep, variant)
        real = float(extra.value)
    return {
        "p": lens.p, "q": lens.q, "m": g.m, "n": g.n,
        "class": cls.value,
        "w2_exact": f"{exact.numerator}/{exact.denominator}",
        "w2_real": real,
        "variant": variant,
    }
