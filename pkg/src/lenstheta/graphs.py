"""Diagram catalogue, Feynman rules, dualization, and state terms.

Directed edges run from an outgoing (A-type) half-edge to an incoming
(B-type) half-edge.  Vertex tensors by slot multiset:

    AAA -> g_low   AAB -> g_mid (B index first)
    ABB -> h_mid (A index first)   BBB -> h_up

Slots are listed per vertex as declared (decorations first, then edges); the
tensor index order is [first-index half-edge, remaining half-edges in list
order].  A state term is an exact coefficient, a list of structure-constant
slots over integer index variables, and a graded word of residual-coordinate
symbols, boundary-field legs, and distributional form factors.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from itertools import permutations, product
from typing import Optional

from . import forms
from .algebra import SplitConstants
from .forms import (
    FormExpr, Point, bdry, bulk, f_dt, f_leg, f_mu, f_zz, parity,
    propagator, pushforward_bulk, regularize, wedge, wedge_all,
)

def _perm_sign(p: tuple[int, ...]) -> int:
    s = 1
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


_S3 = [(p, _perm_sign(p)) for p in permutations(range(3))]
_SWAP23 = [((0, 1, 2), 1), ((0, 2, 1), -1)]
SYM_GROUP = {"g_low": _S3, "h_up": _S3, "g_mid": _SWAP23, "h_mid": _SWAP23}

DUAL_KIND = {"g_low": "h_up", "h_up": "g_low", "g_mid": "h_mid", "h_mid": "g_mid"}
DUAL_DEC = {"a": "b", "b": "a", "a1": "b1", "a2": "b2", "b1": "a1", "b2": "a2"}

# Residual expansions: (rep, component) -> (z name, boundary form names).
# In the A representation the a-field carries the disk forms; B swaps roles.
_BULK_CONTENT = {
    ("A", "a1"): ("z1", ("mu", "dt")),
    ("A", "a2"): ("z2", ("mu",)),
    ("A", "b1"): ("zp1", ()),
    ("A", "b2"): ("zp2", ("dt",)),
    ("B", "a1"): ("z1", ()),
    ("B", "a2"): ("z2", ("dt",)),
    ("B", "b1"): ("zp1", ("mu", "dt")),
    ("B", "b2"): ("zp2", ("mu",)),
}
_BDRY_CONTENT = {
    ("A", "b1"): ("zp1", ()),
    ("A", "b2"): ("zp2", ("dt",)),
    ("B", "a1"): ("z1", ()),
    ("B", "a2"): ("z2", ("dt",)),
}


@dataclass(frozen=True)
class Diagram:
    """A catalogue graph.  ``vertices`` maps bulk vertex id to its ordered
    slot list; edges are (tail, head) over vertex/leg ids."""

    name: str
    vertices: dict
    edges: tuple
    legs: tuple = ()
    bdry_decs: tuple = ()
    sym: Fraction = Fraction(1)
    dualized: bool = False

    @property
    def n_bulk(self) -> int:
        return len(self.vertices)

    @property
    def eps_order(self) -> int:
        # edges minus vertices, counting univalent boundary vertices.
        return len(self.edges) - (len(self.vertices) + len(self.legs) + len(self.bdry_decs))


def dualize(d: Diagram) -> Diagram:
    """Reverse all arrows, swap residual roles, toggle the representation tag.

    The edge-reversal sign (-1)^{#E} is produced by the reversed-edge
    propagator factors at evaluation time, not stored here.
    """
    verts = {
        vid: tuple(("dec", DUAL_DEC[s[1]]) if s[0] == "dec" else s for s in slots)
        for vid, slots in d.vertices.items()
    }
    edges = tuple((h, t) for (t, h) in d.edges)
    bd = tuple((pt, DUAL_DEC[dec]) for pt, dec in d.bdry_decs)
    return replace(d, vertices=verts, edges=edges, bdry_decs=bd, dualized=not d.dualized)


@dataclass(frozen=True)
class StateTerm:
    """One monomial of an evaluated state."""

    coeff: Fraction
    tensors: tuple          # ((kind, (v0, v1, v2)), ...)
    word: tuple             # graded word: zz / leg / form factors
    eps: int
    free_traces: int = 0    # contracted index pairs traced to dim/2

    def legs(self) -> tuple:
        return tuple(f for f in self.word if f[0] == "leg")

    def zs(self) -> tuple:
        return tuple(f for f in self.word if f[0] == "zz")

    def form_factors(self) -> tuple:
        return tuple(f for f in self.word if f[0] not in ("zz", "leg"))

    def dump(self) -> str:
        body = " * ".join(forms._fmt_factor(f) for f in self.word) if self.word else "1"
        tens = " ".join(_fmt_tensor(t) for t in self.tensors)
        sep = " * " if tens else ""
        return f"{self.coeff} eps^{self.eps} {tens}{sep}{body}"


_TENSOR_FMT = {"g_low": "g[{}{}{}]", "g_mid": "g^{}_[{}{}]", "h_mid": "h_{}^[{}{}]", "h_up": "h^[{}{}{}]"}


def _fmt_tensor(t: tuple) -> str:
    kind, idx = t
    return _TENSOR_FMT[kind].format(*idx)


def term_vars(t: StateTerm) -> list[int]:
    seen: list[int] = []
    for _, idx in t.tensors:
        for v in idx:
            if v not in seen:
                seen.append(v)
    for f in t.word:
        if f[0] in ("zz", "leg") and f[3] not in seen:
            seen.append(f[3])
    return seen


def rename_vars(t: StateTerm, mapping: dict) -> StateTerm:
    tens = tuple((k, tuple(mapping.get(v, v) for v in idx)) for k, idx in t.tensors)
    word = tuple(
        (f[0], f[1], f[2], mapping.get(f[3], f[3])) if f[0] in ("zz", "leg") else f
        for f in t.word
    )
    return replace(t, tensors=tens, word=word)


def canonicalize_term(t: StateTerm) -> Optional[StateTerm]:
    """Minimal representative over tensor slot symmetries, tensor order, and
    index-variable renaming; the word is re-normalized after each move."""
    best = None
    tensor_opts = []
    for kind, idx in t.tensors:
        tensor_opts.append([((kind, tuple(idx[i] for i in p)), s) for p, s in SYM_GROUP[kind]])
    orders = list(permutations(range(len(t.tensors)))) or [()]
    for choice in product(*tensor_opts) if tensor_opts else [()]:
        sym_sign = 1
        tens = []
        for (tt, s) in choice:
            sym_sign *= s
            tens.append(tt)
        for order in orders:
            tlist = [tens[i] for i in order] if tens else []
            mapping: dict = {}
            for _, idx in tlist:
                for v in idx:
                    if v not in mapping:
                        mapping[v] = len(mapping)
            for f in t.word:
                if f[0] in ("zz", "leg") and f[3] not in mapping:
                    mapping[f[3]] = len(mapping)
            cand = rename_vars(replace(t, tensors=tuple(tlist)), mapping)
            s2, word2 = forms._normalize_word(cand.word)
            if word2 is None:
                return None
            key = (cand.tensors, word2)
            val = t.coeff * sym_sign * s2
            if best is None or key < best[0]:
                best = (key, val)
    if best is None:
        return t
    (tens, word), val = best
    if val == 0:
        return None
    return StateTerm(val, tens, word, t.eps, t.free_traces)


def merge_terms(terms: list[StateTerm]) -> list[StateTerm]:
    acc: dict = {}
    for t in terms:
        ct = canonicalize_term(t)
        if ct is None:
            continue
        key = (ct.tensors, ct.word, ct.eps, ct.free_traces)
        acc[key] = acc.get(key, Fraction(0)) + ct.coeff
    return [StateTerm(c, k[0], k[1], k[2], k[3])
            for k, c in sorted(acc.items(), key=lambda kv: kv[0]) if c]


def state_product(a: list[StateTerm], b: list[StateTerm]) -> list[StateTerm]:
    """Product of two states (disjoint index variables)."""
    out = []
    for ta in a:
        off = max(term_vars(ta), default=-1) + 1
        for tb in b:
            tbr = rename_vars(tb, {v: v + off for v in term_vars(tb)})
            s, w = forms._normalize_word(ta.word + tbr.word)
            if w is None:
                continue
            out.append(StateTerm(ta.coeff * tbr.coeff * s, ta.tensors + tbr.tensors, w,
                                 ta.eps + tbr.eps, ta.free_traces + tbr.free_traces))
    return out


def _slot_kind(d: Diagram, vid: int, slot: tuple, rep: str) -> str:
    """'A' for outgoing half-edges and a-residuals, 'B' otherwise."""
    if slot[0] == "dec":
        return "A" if slot[1].startswith("a") else "B"
    t, h = d.edges[slot[1]]
    if t == vid and h == vid:
        raise ValueError("tadpole edges are not admissible")
    return "A" if t == vid else "B"


_VERTEX_KIND = {("A", 3): "g_low", ("A", 2): "g_mid", ("A", 1): "h_mid", ("A", 0): "h_up"}


def evaluate_diagram(d: Diagram, rep: str = "A", sc: Optional[SplitConstants] = None) -> list[StateTerm]:
    """Evaluate a diagram into state terms: wedge the Feynman factors,
    regularize, push forward all bulk points."""
    if rep not in ("A", "B"):
        raise ValueError("rep must be 'A' or 'B'")
    pts = {vid: bulk(vid) for vid in d.vertices}
    for leg in d.legs:
        pts[leg] = bdry(leg)
    for legpt, _ in d.bdry_decs:
        pts.setdefault(legpt, bdry(legpt))

    nvar = 0
    edge_var = {}
    for e in range(len(d.edges)):
        edge_var[e] = nvar
        nvar += 1

    # Per-vertex tensors and slot contents (dec slots may expand over the two
    # residual components).
    tensors: list[tuple] = []
    slot_choices: list[list[tuple[Fraction, list[tuple]]]] = []
    for vid in sorted(d.vertices):
        slots = d.vertices[vid]
        if len(slots) != 3:
            raise ValueError(f"bulk vertex {vid} is not trivalent")
        kinds = [_slot_kind(d, vid, s, rep) for s in slots]
        n_a = kinds.count("A")
        kind = _VERTEX_KIND[("A", n_a)]
        a_slots = [i for i, k in enumerate(kinds) if k == "A"]
        b_slots = [i for i, k in enumerate(kinds) if k == "B"]
        if kind == "g_mid":
            order = b_slots + a_slots
        elif kind == "h_mid":
            order = a_slots + b_slots
        else:
            order = list(range(3))
        svars = []
        for i in order:
            s = slots[i]
            if s[0] == "edge":
                svars.append(edge_var[s[1]])
            else:
                svars.append(nvar)
                nvar += 1
        tensors.append((kind, tuple(svars)))
        # Emission content per slot, in tensor order.
        for i, v in zip(order, svars):
            s = slots[i]
            if s[0] == "edge":
                slot_choices.append([(Fraction(1), [])])
            else:
                slot_choices.append([
                    (Fraction(1), _dec_word(rep, comp, pts[vid], v))
                    for comp in _components(s[1])
                ])

    # Boundary residual decorations (order-0 diagrams).
    for legpt, dec in d.bdry_decs:
        v = nvar
        nvar += 1
        slot_choices.append([
            (Fraction(1), _bdry_dec_word(rep, comp, pts[legpt], v))
            for comp in _components(dec)
        ])

    # Edge propagator factors (even; emitted after the vertex blocks).
    edge_exprs = []
    for e, (t, h) in enumerate(d.edges):
        if rep == "A":
            edge_exprs.append(propagator("Horizontal", pts[t], pts[h]))
        else:
            # eta^B(tail, head) = -eta^A(head, tail)
            edge_exprs.append(propagator("Horizontal", pts[h], pts[t]).scale(-1))

    leg_factors = []
    for leg in sorted(d.legs):
        lv = None
        for e, (t, h) in enumerate(d.edges):
            if leg in (t, h):
                lv = edge_var[e]
        if lv is None:
            raise ValueError(f"leg {leg} has no incident edge")
        leg_factors.append(f_leg(rep, pts[leg], lv))
    for legpt, _ in d.bdry_decs:
        # var of the boundary residual slot: the last assigned for that dec
        pass
    # boundary-dec legs use their own fresh vars assigned above; attach them:
    bdry_leg_exprs = []
    if d.bdry_decs:
        # Each boundary dec pairs its z with the boundary field at that point;
        # the z and the leg share the index variable (assigned in order).
        v0 = nvar - len(d.bdry_decs)
        for k, (legpt, _) in enumerate(d.bdry_decs):
            bdry_leg_exprs.append(FormExpr.word(1, f_leg(rep, pts[legpt], v0 + k)))

    out: list[StateTerm] = []
    for combo in product(*slot_choices) if slot_choices else [()]:
        coeff = d.sym
        word: list[tuple] = []
        for c, fs in combo:
            coeff *= c
            word.extend(fs)
        expr = FormExpr.word(coeff, *word)
        expr = wedge_all([expr] + edge_exprs + bdry_leg_exprs)
        if leg_factors:
            expr = wedge(expr, FormExpr.word(1, *leg_factors))
        expr = regularize(expr)
        for vid in sorted(d.vertices):
            expr = pushforward_bulk(expr, pts[vid])
            if expr.is_zero():
                break
        for w, c in expr.terms.items():
            out.append(StateTerm(c, tuple(tensors), w, d.eps_order))
    out = merge_terms(out)
    if sc is not None:
        active = {k for k in ("g_low", "g_mid", "h_mid", "h_up") if getattr(sc, k)}
        out = [t for t in out if all(k in active for k, _ in t.tensors)]
    return out


def _components(dec: str) -> list[str]:
    if dec in ("a", "b"):
        return [dec + "1", dec + "2"]
    return [dec]


def _dec_word(rep: str, comp: str, pt: Point, var: int) -> list[tuple]:
    zname, fs = _BULK_CONTENT[(rep, comp)]
    word = [f_zz(rep, zname, var)]
    for f in fs:
        word.append(f_mu(pt) if f == "mu" else f_dt(pt))
    return word


def _bdry_dec_word(rep: str, comp: str, pt: Point, var: int) -> list[tuple]:
    key = (rep, comp)
    if key not in _BDRY_CONTENT:
        raise ValueError(f"residual component {comp} has no boundary restriction in rep {rep}")
    zname, fs = _BDRY_CONTENT[key]
    word = [f_zz(rep, zname, var)]
    for f in fs:
        word.append(f_dt(pt))
    return word


# -- the catalogue -------------------------------------------------------------

def catalogue() -> dict:
    """All solid-torus diagrams needed through two loops, with the source's
    prefactors."""
    F = Fraction
    cat = {}
    cat["Gamma0"] = Diagram("Gamma0", {}, (), bdry_decs=((1, "b"),), sym=F(1))
    cat["Gamma1,0"] = Diagram(
        "Gamma1,0", {1: (("dec", "a"), ("dec", "b"), ("dec", "b"))}, (), sym=F(1, 2))
    cat["Gamma1,1"] = Diagram(
        "Gamma1,1", {1: (("dec", "b"), ("dec", "a"), ("edge", 0))}, ((1, 2),), legs=(2,), sym=F(-1))
    cat["Gamma1,2b"] = Diagram(
        "Gamma1,2b", {1: (("dec", "b"), ("edge", 0), ("edge", 1))}, ((1, 2), (1, 3)),
        legs=(2, 3), sym=F(1, 2))
    cat["Gamma1,2a"] = Diagram(
        "Gamma1,2a", {1: (("dec", "a"), ("edge", 0), ("edge", 1))}, ((1, 2), (1, 3)),
        legs=(2, 3), sym=F(1, 2))
    cat["Gamma1,3"] = Diagram(
        "Gamma1,3", {1: (("edge", 0), ("edge", 1), ("edge", 2))}, ((1, 2), (1, 3), (1, 4)),
        legs=(2, 3, 4), sym=F(1, 6))
    cat["Gamma2,0"] = Diagram(
        "Gamma2,0",
        {1: (("dec", "b"), ("edge", 0), ("edge", 1)), 2: (("dec", "b"), ("edge", 1), ("edge", 0))},
        ((1, 2), (2, 1)), sym=F(1, 2))
    cat["Gamma2,1"] = Diagram(
        "Gamma2,1",
        {1: (("dec", "b"), ("edge", 0), ("edge", 1)), 2: (("edge", 1), ("edge", 0), ("edge", 2))},
        ((1, 2), (2, 1), (2, 3)), legs=(3,), sym=F(1))
    cat["Gamma2,2"] = Diagram(
        "Gamma2,2",
        {1: (("edge", 0), ("edge", 1), ("edge", 2)), 2: (("edge", 1), ("edge", 0), ("edge", 3))},
        ((1, 2), (2, 1), (1, 3), (2, 4)), legs=(3, 4), sym=F(1, 2))
    return cat


def gamma20_type_a() -> Diagram:
    """The same-direction double edge between two bulk vertices; evaluates to
    nothing under the loop regularization."""
    return Diagram(
        "Gamma2,0typeA",
        {1: (("dec", "a"), ("edge", 0), ("edge", 1)), 2: (("dec", "b"), ("edge", 0), ("edge", 1))},
        ((1, 2), (1, 2)), sym=Fraction(1, 2))


# -- diagram literals -----------------------------------------------------------

def parse_diagram(text: str, name: str = "literal") -> Diagram:
    """Tiny text format: ``vertex u`` / ``leg v`` / ``edge u->v`` /
    ``dec u a2`` / ``bdec v b`` / ``sym p/q``, one per line."""
    vertices: dict = {}
    legs: list[int] = []
    edges: list[tuple] = []
    decs: list[tuple] = []
    bdecs: list[tuple] = []
    sym = Fraction(1)
    for raw in text.splitlines():
        line = raw.split("#")[0].strip()
        if not line:
            continue
        parts = line.split()
        if parts[0] == "vertex":
            vertices[int(parts[1])] = []
        elif parts[0] == "leg":
            legs.append(int(parts[1]))
        elif parts[0] == "edge":
            u, v = parts[1].split("->")
            edges.append((int(u), int(v)))
        elif parts[0] == "dec":
            decs.append((int(parts[1]), parts[2]))
        elif parts[0] == "bdec":
            bdecs.append((int(parts[1]), parts[2]))
        elif parts[0] == "sym":
            sym = Fraction(parts[1])
        else:
            raise ValueError(f"unknown diagram line: {raw!r}")
    slot_lists: dict = {vid: [] for vid in vertices}
    for vid, dec in decs:
        slot_lists[vid].append(("dec", dec))
    for e, (u, v) in enumerate(edges):
        if u in slot_lists:
            slot_lists[u].append(("edge", e))
        if v in slot_lists and v != u:
            slot_lists[v].append(("edge", e))
    return Diagram(name, {k: tuple(v) for k, v in slot_lists.items()},
                   tuple(edges), tuple(legs), tuple(bdecs), sym)
