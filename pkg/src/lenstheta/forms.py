"""Graded term calculus for distributional forms on labeled points of S1 x D.

A term is an exact rational coefficient times an ordered word of factors.
Factors carry a parity; reordering follows the Koszul sign rule, and a
repeated odd factor kills the term.  The factor zoo:

  point forms   ("dt", pt)    circle 1-form dt at a point          odd
                ("dth", pt)   boundary-circle 1-form dtheta        odd
                ("mu", pt)    unit disk area form (bulk only)      even, disk top
                ("psi", pt)   boundary-adapted disk 1-form         odd
  pair forms    ("etad", i, j)    disk propagator 1-form, directed        odd
                ("deltad", i, j)  disk delta 2-form, symmetric            even
                ("rho", i, b)     boundary profile of the disk propagator odd
  scalars       ("etac", arg)       circle propagator of a linear argument
                ("dchat", arg, k)   scalar circle delta (k = derivative order)
                ("b2", arg)         periodic Bernoulli B2({arg})
  bookkeeping   ("zz", side, name, var)   residual-field coordinate
                ("leg", side, pt, var)    boundary-field symbol

Linear arguments are tuples of ((point, coord), int) with coord "t" or "th",
sorted, zero coefficients dropped.  The boundary restriction of the disk
propagator is modeled as

    etad(i, b) -> rho(i, b) + dth(b) + psi(i)        for b on the boundary,

with the integral axioms  int_i rho(i,b) rho(i,b') = etac(th_b - th_b'),
int_i rho = 0, int_i psi(i) rho(i,b) = 0, mu(i) rho(i,b) = 0.  Together with
mu as the unit disk volume and the usual delta collapses this makes every
catalogue kernel land in the closed family {1, dt, dth, etac, dchat} on the
boundary torus.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional


class NonEvaluableKernel(Exception):
    """A pushforward or pairing met a factor pattern outside the rule set."""


class FormDomainError(Exception):
    """A factor was attached to a point of the wrong kind (bulk/boundary)."""


@dataclass(frozen=True, order=True)
class Point:
    id: int
    bdry: bool = False

    def __repr__(self):
        return f"y{self.id}" if self.bdry else f"x{self.id}"


def bulk(i: int) -> Point:
    return Point(i, False)


def bdry(i: int) -> Point:
    return Point(i, True)


# Parity of the residual-field coordinates, by (side, name).  Side "A" is the
# representation where the residual a-field carries the disk forms; side "B"
# swaps the roles; side "G" holds the glued (reduced) coordinates.
ZZ_PARITY = {
    ("A", "z1"): 0, ("A", "z2"): 1, ("A", "zp1"): 1, ("A", "zp2"): 0,
    ("B", "z1"): 1, ("B", "z2"): 0, ("B", "zp1"): 0, ("B", "zp2"): 1,
    ("G", "z1"): 1, ("G", "z2"): 0, ("G", "zp1"): 0, ("G", "zp2"): 1,
}

_KIND_RANK = {
    "zz": 0,
    "etac": 1, "dchat": 1, "b2": 1,
    "mu": 2, "psi": 2, "rho": 2, "etad": 2, "deltad": 2, "dt": 2, "dth": 2,
    "leg": 3,
}
_FORM_PRIORITY = {"mu": 0, "psi": 1, "rho": 2, "etad": 3, "deltad": 4, "dt": 5, "dth": 6}


def parity(f: tuple) -> int:
    kind = f[0]
    if kind in ("dt", "dth", "psi", "rho", "etad", "leg"):
        return 1
    if kind == "zz":
        return ZZ_PARITY[(f[1], f[2])]
    return 0


def _sort_key(f: tuple):
    kind = f[0]
    rank = _KIND_RANK[kind]
    if kind == "zz":
        return (rank, f[1], f[2], f[3])
    if kind in ("etac", "dchat", "b2"):
        return (rank, kind, f[1:])
    if kind == "leg":
        return (rank, f[2], f[1], f[3])
    pts = f[1:]
    first = min(p.id for p in pts if isinstance(p, Point))
    return (rank, first, _FORM_PRIORITY[kind], kind, pts)


# -- linear arguments -------------------------------------------------------

def arg_of(*terms: tuple[Point, str, int]) -> tuple:
    """Build a linear argument from (point, coord, coeff) triples."""
    acc: dict = {}
    for pt, coord, c in terms:
        if coord == "th" and not pt.bdry:
            raise FormDomainError(f"theta coordinate on bulk point {pt}")
        key = (pt, coord)
        acc[key] = acc.get(key, 0) + c
    return tuple(sorted(((k, v) for k, v in acc.items() if v != 0),
                        key=lambda kv: (kv[0][0], kv[0][1])))


def arg_diff_t(i: Point, j: Point) -> tuple:
    return arg_of((i, "t", 1), (j, "t", -1))


def _arg_points(arg: tuple) -> set[Point]:
    return {k[0] for k, _ in arg}


def _arg_neg(arg: tuple) -> tuple:
    return tuple((k, -v) for k, v in arg)


def _arg_canon_sign(arg: tuple) -> tuple[tuple, int]:
    """Normalize so the first coefficient is positive; returns (arg, sign flip)."""
    if arg and arg[0][1] < 0:
        return _arg_neg(arg), -1
    return arg, 1


# -- factor constructors (with domain checks) --------------------------------

def f_dt(pt: Point) -> tuple:
    return ("dt", pt)


def f_dth(pt: Point) -> tuple:
    if not pt.bdry:
        raise FormDomainError(f"dtheta attached to bulk point {pt}")
    return ("dth", pt)


def f_mu(pt: Point) -> tuple:
    if pt.bdry:
        raise FormDomainError(f"area form attached to boundary point {pt}")
    return ("mu", pt)


def f_psi(pt: Point) -> tuple:
    if pt.bdry:
        raise FormDomainError(f"psi attached to boundary point {pt}")
    return ("psi", pt)


def f_rho(i: Point, b: Point) -> tuple:
    if i.bdry or not b.bdry:
        raise FormDomainError(f"rho needs (bulk, boundary), got ({i}, {b})")
    return ("rho", i, b)


def f_etad(i: Point, j: Point) -> tuple:
    if i.bdry:
        raise FormDomainError("disk propagator with boundary first argument is not in the calculus")
    if j.bdry:
        raise FormDomainError("restrict the disk propagator before attaching a boundary point")
    return ("etad", i, j)


def f_deltad(i: Point, j: Point) -> tuple:
    if i.bdry or j.bdry:
        raise FormDomainError("disk delta needs bulk points")
    a, b = sorted((i, j))
    return ("deltad", a, b)


def f_etac(arg: tuple) -> tuple:
    return ("etac", arg)


def f_dchat(arg: tuple, order: int = 0) -> tuple:
    return ("dchat", arg, order)


def f_b2(arg: tuple) -> tuple:
    return ("b2", arg)


def f_zz(side: str, name: str, var: int) -> tuple:
    return ("zz", side, name, var)


def f_leg(side: str, pt: Point, var: int) -> tuple:
    if not pt.bdry:
        raise FormDomainError("boundary-field legs live at boundary points")
    return ("leg", side, pt, var)


# -- terms and expressions ----------------------------------------------------

def _normalize_word(factors: Iterable[tuple]) -> tuple[Fraction, Optional[tuple]]:
    """Koszul-sort a word into canonical order and apply structural zero rules.

    Returns (sign_and_scalar_coeff, factors) or (0, None) for a vanishing term.
    """
    word = list(factors)
    coeff = Fraction(1)
    out: list[tuple] = []
    for f in word:
        kind = f[0]
        if kind == "etac":
            arg, s = _arg_canon_sign(f[1])
            if not arg:
                return Fraction(0), None  # ((0)) = 0
            coeff *= s
            f = ("etac", arg)
        elif kind == "dchat":
            arg, _ = _arg_canon_sign(f[1])
            f = ("dchat", arg, f[2])
        elif kind == "b2":
            arg, _ = _arg_canon_sign(f[1])
            if not arg:
                coeff *= Fraction(1, 6)  # B2(0)
                continue
            f = ("b2", arg)
        out.append(f)
    # Insertion sort with Koszul signs.
    sign = 1
    for i in range(1, len(out)):
        j = i
        while j > 0 and _sort_key(out[j - 1]) > _sort_key(out[j]):
            if parity(out[j - 1]) & parity(out[j]):
                sign = -sign
            out[j - 1], out[j] = out[j], out[j - 1]
            j -= 1
    coeff *= sign
    # Repeated factor rules and per-point disk caps.
    for a, b in zip(out, out[1:]):
        if a == b and (parity(a) or a[0] in ("mu", "deltad")):
            return Fraction(0), None
    mus = {f[1] for f in out if f[0] == "mu"}
    for f in out:
        if f[0] in ("psi", "rho") and f[1] in mus:
            return Fraction(0), None  # disk degree above top at that point
    return coeff, tuple(out)


class FormExpr:
    """A normal-formed sum of signed factor words."""

    __slots__ = ("terms",)

    def __init__(self, terms: Optional[dict] = None):
        self.terms: dict = terms or {}

    @staticmethod
    def zero() -> "FormExpr":
        return FormExpr({})

    @staticmethod
    def one() -> "FormExpr":
        return FormExpr({(): Fraction(1)})

    @staticmethod
    def word(coeff, *factors: tuple) -> "FormExpr":
        c = Fraction(coeff)
        if c == 0:
            return FormExpr.zero()
        s, w = _normalize_word(factors)
        if w is None or s == 0:
            return FormExpr.zero()
        return FormExpr({w: c * s})

    @staticmethod
    def from_terms(pairs: Iterable[tuple[Fraction, Iterable[tuple]]]) -> "FormExpr":
        acc: dict = {}
        for coeff, factors in pairs:
            if coeff == 0:
                continue
            s, w = _normalize_word(factors)
            if w is None:
                continue
            c = acc.get(w, Fraction(0)) + coeff * s
            if c:
                acc[w] = c
            elif w in acc:
                del acc[w]
        return FormExpr(acc)

    def __add__(self, other: "FormExpr") -> "FormExpr":
        acc = dict(self.terms)
        for w, c in other.terms.items():
            nc = acc.get(w, Fraction(0)) + c
            if nc:
                acc[w] = nc
            elif w in acc:
                del acc[w]
        return FormExpr(acc)

    def __sub__(self, other: "FormExpr") -> "FormExpr":
        return self + other.scale(-1)

    def scale(self, c) -> "FormExpr":
        c = Fraction(c)
        if c == 0:
            return FormExpr.zero()
        return FormExpr({w: v * c for w, v in self.terms.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, FormExpr) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self):
        return f"FormExpr({self.dump()!r})"

    def dump(self) -> str:
        """One term per line: ``coeff * factor * factor ...`` in canonical order."""
        if not self.terms:
            return "0"
        lines = []
        for w in sorted(self.terms, key=lambda w: [_sort_key(f) for f in w]):
            c = self.terms[w]
            body = " * ".join(_fmt_factor(f) for f in w) if w else "1"
            lines.append(f"{c} * {body}")
        return "\n".join(lines)


def _fmt_arg(arg: tuple) -> str:
    parts = []
    for (pt, coord), c in arg:
        name = f"{'th' if coord == 'th' else 't'}{pt.id}"
        if c == 1:
            parts.append(f"+{name}")
        elif c == -1:
            parts.append(f"-{name}")
        else:
            parts.append(f"{c:+d}{name}")
    s = "".join(parts)
    return s[1:] if s.startswith("+") else s


def _fmt_factor(f: tuple) -> str:
    kind = f[0]
    if kind == "dt":
        return f"dt{f[1].id}"
    if kind == "dth":
        return f"dth{f[1].id}"
    if kind == "mu":
        return f"mu{f[1].id}"
    if kind == "psi":
        return f"psi{f[1].id}"
    if kind == "rho":
        return f"rho({f[1].id},{f[2].id})"
    if kind == "etad":
        return f"etaD({f[1].id},{f[2].id})"
    if kind == "deltad":
        return f"deltaD({f[1].id},{f[2].id})"
    if kind == "etac":
        return f"etaC({_fmt_arg(f[1])})"
    if kind == "dchat":
        prime = "'" * f[2]
        return f"deltaC{prime}({_fmt_arg(f[1])})"
    if kind == "b2":
        return f"B2({_fmt_arg(f[1])})"
    if kind == "zz":
        return f"{f[1]}.{f[2]}[{f[3]}]"
    if kind == "leg":
        return f"{'bA' if f[1] == 'A' else 'bB'}{f[2].id}[{f[3]}]"
    return repr(f)


def wedge(a: FormExpr, b: FormExpr) -> FormExpr:
    """Graded product; Koszul signs handled by word normalization."""
    pairs = []
    for wa, ca in a.terms.items():
        for wb, cb in b.terms.items():
            pairs.append((ca * cb, wa + wb))
    return FormExpr.from_terms(pairs)


def wedge_all(exprs: Iterable[FormExpr]) -> FormExpr:
    acc = FormExpr.one()
    for e in exprs:
        acc = wedge(acc, e)
    return acc


# -- propagators --------------------------------------------------------------

def propagator(kind: str, i: Point, j: Point) -> FormExpr:
    """The horizontal or axial propagator between labeled points.

    For the horizontal propagator a boundary head is allowed and the disk
    factor is built in restricted form.
    """
    if i.bdry:
        raise FormDomainError("propagator tail must be a bulk point")
    darg = arg_diff_t(i, j)
    if kind == "Horizontal":
        if j.bdry:
            disk = (FormExpr.word(1, f_rho(i, j)) + FormExpr.word(1, f_dth(j))
                    + FormExpr.word(1, f_psi(i)))
        else:
            disk = FormExpr.word(1, f_etad(i, j))
        dc = FormExpr.word(1, f_dchat(darg), f_dt(i)) - FormExpr.word(1, f_dchat(darg), f_dt(j))
        return wedge(disk, dc) + FormExpr.word(1, f_mu(i), f_etac(darg))
    if kind == "Axial":
        if j.bdry:
            raise NonEvaluableKernel("axial propagator is only used between bulk points")
        return (FormExpr.word(1, f_deltad(i, j), f_etac(darg))
                + FormExpr.word(1, f_etad(i, j), f_dt(i))
                - FormExpr.word(1, f_etad(i, j), f_dt(j)))
    raise ValueError(f"unknown propagator kind {kind!r}")


# -- differential --------------------------------------------------------------

def differential(e: FormExpr) -> FormExpr:
    """Graded Leibniz extension of the generator rules."""
    out = []
    for w, c in e.terms.items():
        pre = 0
        for k, f in enumerate(w):
            df = _d_factor(f)
            if df is not None:
                sgn = -1 if (pre & 1) else 1
                for dc, dfs in df:
                    out.append((c * dc * sgn, w[:k] + tuple(dfs) + w[k + 1:]))
            pre ^= parity(f)
    return FormExpr.from_terms(out)


def _d_factor(f: tuple) -> Optional[list[tuple[Fraction, list[tuple]]]]:
    kind = f[0]
    if kind in ("dt", "dth", "mu", "deltad", "zz", "leg", "b2"):
        return None
    if kind == "psi":
        return [(Fraction(1), [f_mu(f[1])])]
    if kind == "etad":
        return [(Fraction(1), [f_deltad(f[1], f[2])]), (Fraction(-1), [f_mu(f[1])])]
    if kind == "etac":
        arg = f[1]
        pts = sorted(_arg_points(arg))
        if len(pts) != 2 or any(p.bdry for p in pts) or dict(arg) != {(pts[0], "t"): 1, (pts[1], "t"): -1}:
            raise NonEvaluableKernel("differential of a circle propagator is defined "
                                     "for two-bulk-point difference arguments only")
        i, j = pts
        return [
            (Fraction(1), [f_dchat(arg), f_dt(i)]),
            (Fraction(-1), [f_dchat(arg), f_dt(j)]),
            (Fraction(-1), [f_dt(i)]),
            (Fraction(1), [f_dt(j)]),
        ]
    if kind == "dchat":
        arg = f[1]
        pts = sorted(_arg_points(arg))
        if len(pts) != 2:
            raise NonEvaluableKernel("differential of a circle delta needs a two-point argument")
        i, j = pts
        return [
            (Fraction(1), [f_dchat(arg, f[2] + 1), f_dt(i)]),
            (Fraction(-1), [f_dchat(arg, f[2] + 1), f_dt(j)]),
        ]
    if kind == "rho":
        raise NonEvaluableKernel("the boundary profile has no differential in the calculus")
    raise NonEvaluableKernel(f"no differential rule for {kind}")


# -- regularization -------------------------------------------------------------

def regularize(e: FormExpr) -> FormExpr:
    """Apply the universal loop rules: repeated circle deltas, a circle delta
    against the circle propagator of the same argument, and deltas of a
    vanishing argument all go to zero.  Idempotent."""
    out = []
    for w, c in e.terms.items():
        if _reg_kills(w):
            continue
        out.append((c, w))
    return FormExpr.from_terms(out)


def _reg_kills(w: tuple) -> bool:
    dchat_args = [f[1] for f in w if f[0] == "dchat" and f[2] == 0]
    if any(f[0] == "dchat" and not f[1] for f in w):
        return True  # delta of an identically zero argument
    if len(dchat_args) != len(set(dchat_args)):
        return True  # delta squared
    etac_args = {f[1] for f in w if f[0] == "etac"}
    if any(a in etac_args for a in dchat_args):
        return True  # delta times propagator on the same pair
    return False


# -- boundary restriction --------------------------------------------------------

def restrict_boundary(e: FormExpr, old: Point, new: Point) -> FormExpr:
    """Re-tag a bulk label as a boundary label.

    psi(old) restricts to dtheta(new) (unit boundary period); a surviving area
    form is an error; disk propagators into ``old`` pick up the boundary
    profile decomposition.
    """
    if old.bdry or not new.bdry:
        raise FormDomainError("restrict_boundary re-tags a bulk label as a boundary label")
    out = []
    for w, c in e.terms.items():
        exprs = [FormExpr({(): c})]
        for f in w:
            kind = f[0]
            pts = [p for p in f[1:] if isinstance(p, Point)]
            if old not in pts and not (kind in ("etac", "dchat", "b2") and old in _arg_points(f[1])):
                exprs.append(FormExpr({(f,): Fraction(1)}))
                continue
            if kind == "mu":
                raise FormDomainError("area form has no boundary restriction in this calculus")
            if kind == "psi":
                exprs.append(FormExpr.word(1, f_dth(new)))
            elif kind == "dt":
                exprs.append(FormExpr.word(1, f_dt(new)))
            elif kind == "etad":
                if f[2] != old:
                    raise FormDomainError("disk propagator with boundary first argument is not in the calculus")
                exprs.append(FormExpr.word(1, f_rho(f[1], new)) + FormExpr.word(1, f_dth(new))
                             + FormExpr.word(1, f_psi(f[1])))
            elif kind in ("etac", "dchat", "b2"):
                arg = tuple(((new if k[0] == old else k[0], k[1]), v) for k, v in f[1])
                arg = arg_of(*[(k[0], k[1], v) for k, v in arg])
                exprs.append(FormExpr.word(1, (kind, arg) if kind != "dchat" else ("dchat", arg, f[2])))
            else:
                raise FormDomainError(f"factor {kind} has no boundary restriction")
        term = wedge_all(exprs)
        out.extend((cc, ww) for ww, cc in term.terms.items())
    return FormExpr.from_terms(out)


# -- bulk pushforward --------------------------------------------------------------

def pushforward_bulk(e: FormExpr, i: Point) -> FormExpr:
    """Integrate out the bulk point i.

    Terms whose fiber degree at i is below (2,1) vanish; factor patterns
    outside the rule set raise NonEvaluableKernel.  Input must be regularized.
    """
    if i.bdry:
        raise FormDomainError("pushforward_bulk integrates bulk points")
    out = []
    for w, c in e.terms.items():
        res = _push_term(c, w, i)
        if res is not None:
            out.extend(res)
    return regularize(FormExpr.from_terms(out))


def _strip_front(word: list[tuple], pos: int, sign_box: list[int]) -> tuple:
    """Remove word[pos], accumulating the Koszul sign of moving it to the front."""
    f = word.pop(pos)
    if parity(f):
        odd_before = sum(parity(g) for g in word[:pos])
        if odd_before & 1:
            sign_box[0] = -sign_box[0]
    return f


def _push_term(c: Fraction, w: tuple, i: Point):
    word = list(w)
    sign = [1]

    # --- disk sector at i ---
    mu_pos = [k for k, f in enumerate(word) if f == ("mu", i)]
    rho_pos = [k for k, f in enumerate(word) if f[0] == "rho" and f[1] == i]
    psi_pos = [k for k, f in enumerate(word) if f == ("psi", i)]
    etad_pos = [k for k, f in enumerate(word) if f[0] == "etad" and i in (f[1], f[2])]
    deltad_pos = [k for k, f in enumerate(word) if f[0] == "deltad" and i in (f[1], f[2])]
    if deltad_pos:
        raise NonEvaluableKernel("disk delta collapse during pushforward is outside the evaluable family")

    scalar_mult = Fraction(1)
    emitted: list[tuple] = []
    if mu_pos:
        # mu saturates the disk fiber.  Chain integrals against it: a disk
        # propagator whose second argument is i integrates to zero (axiom); a
        # first-argument disk propagator is outside the family.
        for k in sorted(etad_pos, reverse=True):
            f = word[k]
            if f[2] == i:
                return None  # int etaD(j, i) mu(i) = 0
            raise NonEvaluableKernel("mu(i) * etaD(i, j) with j in the bulk is outside the evaluable family")
        _strip_front(word, mu_pos[0], sign)
        # int_D mu = 1
    else:
        if etad_pos:
            # Two bare disk propagators at i integrate to zero (chain/star axiom
            # for bulk heads); a single one lacks fiber degree.
            if len(etad_pos) >= 2:
                return None
            return None
        if psi_pos and rho_pos:
            return None  # int psi rho = 0
        if len(rho_pos) == 2:
            k1, k2 = min(rho_pos), max(rho_pos)
            f1 = _strip_front(word, k1, sign)
            f2 = _strip_front(word, k2 - 1, sign)
            # int_i rho(i,b) rho(i,b') = etac(th_b - th_b'), applied with the
            # factors brought adjacent in their word order.
            emitted.append(f_etac(arg_of((f1[2], "th", 1), (f2[2], "th", -1))))
        elif rho_pos or psi_pos:
            return None  # single profile or bare psi: no disk top
        else:
            return None  # no disk degree at all
    if any(f == ("psi", i) for f in word):
        return None  # psi against a saturated disk fiber

    # --- circle sector at i ---
    dt_pos = [k for k, f in enumerate(word) if f == ("dt", i)]
    if not dt_pos:
        return None
    _strip_front(word, dt_pos[0], sign)

    def t_coeff(arg):
        return dict(arg).get((i, "t"), 0)

    scal = [k for k, f in enumerate(word) if f[0] in ("etac", "dchat", "b2") and t_coeff(f[1])]
    dchats = [k for k in scal if word[k][0] == "dchat"]
    if any(word[k][2] > 0 for k in dchats):
        raise NonEvaluableKernel("derivative-order circle deltas cannot be integrated")
    if dchats:
        k0 = dchats[0]
        f0 = word[k0]
        a0 = t_coeff(f0[1])
        if abs(a0) != 1:
            raise NonEvaluableKernel("circle delta with non-unit coefficient at a bulk time")
        # Solve t_i = -(rest)/a0 and substitute everywhere.
        rest = [(k, -v * a0) for k, v in f0[1] if k != (i, "t")]
        del word[k0]  # even factor: no sign
        for k, f in enumerate(word):
            if f[0] in ("etac", "dchat", "b2"):
                ci = t_coeff(f[1])
                if ci:
                    new = [(kk, vv) for kk, vv in f[1] if kk != (i, "t")]
                    add = {kk: vv * ci for kk, vv in rest}
                    merged: dict = dict(new)
                    for kk, vv in add.items():
                        merged[kk] = merged.get(kk, 0) + vv
                    arg = tuple(sorted(((kk, vv) for kk, vv in merged.items() if vv),
                                       key=lambda kv: (kv[0][0], kv[0][1])))
                    word[k] = (f[0], arg) if f[0] != "dchat" else ("dchat", arg, f[2])
    else:
        etacs = [k for k in scal if word[k][0] == "etac"]
        b2s = [k for k in scal if word[k][0] == "b2"]
        if b2s and not etacs:
            if len(b2s) == 1:
                return None  # int B2({a t + c}) dt = 0
            raise NonEvaluableKernel("multiple B2 factors share a bulk time")
        if b2s:
            raise NonEvaluableKernel("mixed B2/propagator moments at a bulk time")
        if len(etacs) == 0:
            pass  # int dt = 1
        elif len(etacs) == 1:
            return None  # odd first moment of the circle propagator
        elif len(etacs) == 2:
            ka, kb = etacs
            fa, fb = word[ka], word[kb]
            a, b = t_coeff(fa[1]), t_coeff(fb[1])
            la = [(k, v) for k, v in fa[1] if k != (i, "t")]
            lb = [(k, v) for k, v in fb[1] if k != (i, "t")]
            g = math.gcd(abs(a), abs(b))
            # int ((a t + c1)) ((b t + c2)) dt = (g^2/2ab) B2({(b/g) c1 - (a/g) c2})
            merged: dict = {}
            for k, v in la:
                merged[k] = merged.get(k, 0) + (b // g) * v
            for k, v in lb:
                merged[k] = merged.get(k, 0) - (a // g) * v
            arg = tuple(sorted(((k, v) for k, v in merged.items() if v),
                               key=lambda kv: (kv[0][0], kv[0][1])))
            scalar_mult *= Fraction(g * g, 2 * a * b)
            for k in sorted((ka, kb), reverse=True):
                del word[k]
            emitted.append(f_b2(arg))
        else:
            raise NonEvaluableKernel(">=3 circle propagators share a bulk time")

    if any(isinstance(p, Point) and p == i for f in word for p in f[1:]):
        raise NonEvaluableKernel(f"point {i} not fully integrated: leftover factors")
    for f in word:
        if f[0] in ("etac", "dchat", "b2") and (i, "t") in dict(f[1]):
            raise NonEvaluableKernel(f"point {i} not fully integrated: leftover argument")

    return [(c * sign[0] * scalar_mult, tuple(word) + tuple(emitted))]
