"""Critical-orbit portraits and parametrized family solving.

A portrait is the finite functional graph of critical points and their
forward orbits; families are one-parameter coefficient recipes solved by
Newton for prescribed orbit relations such as ``f^2(c) = f(c)``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .dynamics import INF, RationalMap, OrbitRecord, chordal, is_inf, poly_roots
from .errors import (
    MalformedMerge,
    NonConvergence,
    NotPostcriticallyFinite,
    SingularJacobian,
)
from .newton import newton_solve

__all__ = [
    "PortraitNode",
    "CriticalOrbitPortrait",
    "portrait_of",
    "merge_portraits",
    "OrbitRelation",
    "parse_relation",
    "FamilySpec",
    "FamilySolution",
    "cubic_family",
    "solve_family",
    "grid_seeds",
]

_PERIOD_TOL = 1e-9      # revisit tolerance, confirmed over one extra period
_INEQ_MARGIN = 1e-6     # margin for the inequations implied by a relation
_DEDUP_TOL = 1e-8


@dataclass(frozen=True)
class PortraitNode:
    label: str
    point: object          # sphere point, or None for a symbolic slot
    local_degree: int
    marked: bool = False
    origin: str = ""       # provenance tag used by merged portraits


@dataclass(frozen=True)
class CriticalOrbitPortrait:
    """Directed graph with out-degree one; every node eventually periodic."""

    nodes: tuple
    edges: tuple               # pairs (src_label, dst_label)
    degree: int                # degree of the underlying map
    relations: tuple = ()      # (critical_label, preperiod, period) triples

    def node(self, label) -> PortraitNode:
        for n in self.nodes:
            if n.label == label:
                return n
        raise KeyError(label)

    def successor(self, label) -> str:
        for s, d in self.edges:
            if s == label:
                return d
        raise KeyError(label)

    @property
    def edge_map(self):
        return dict(self.edges)

    @property
    def budget(self) -> int:
        """Riemann-Hurwitz sum of (local degree - 1)."""
        return sum(n.local_degree - 1 for n in self.nodes)

    def marked_node(self) -> PortraitNode:
        marked = [n for n in self.nodes if n.marked]
        if len(marked) != 1:
            raise ValueError(f"expected exactly one marked node, found {len(marked)}")
        return marked[0]

    def critical_nodes(self):
        return [n for n in self.nodes if n.local_degree >= 2]

    def chain(self, label):
        """(preperiod, period) of the node's forward orbit in the graph."""
        seen = {}
        cur, k = label, 0
        e = self.edge_map
        while cur not in seen:
            seen[cur] = k
            cur = e[cur]
            k += 1
        return seen[cur], k - seen[cur]

    def is_isomorphic_to(self, other) -> bool:
        """Graph isomorphism preserving local degrees (marked flags ignored)."""
        if len(self.nodes) != len(other.nodes):
            return False
        mine = list(self.nodes)
        theirs = list(other.nodes)
        e1, e2 = self.edge_map, dict(other.edges)

        def backtrack(assign):
            if len(assign) == len(mine):
                return all(assign[e1[a]] == e2[assign[a]] for a in assign)
            a = mine[len(assign)].label
            na = self.node(a)
            for nb in theirs:
                b = nb.label
                if b in assign.values():
                    continue
                if nb.local_degree != na.local_degree:
                    continue
                assign[a] = b
                # partial consistency: every already-assigned edge must map
                ok = all(
                    e1[s] not in assign or assign[e1[s]] == e2[assign[s]]
                    for s in assign
                    if s in e1
                )
                if ok and backtrack(assign):
                    return True
                del assign[a]
            return False

        return backtrack({})


def portrait_of(rmap: RationalMap, max_steps=64, tol=_PERIOD_TOL, marked=None):
    """Track every critical orbit of the map until it revisits a node.

    Points closer than ``tol`` (chordal) are identified as one node.  A
    detected cycle is confirmed over one extra period before acceptance.
    ``marked`` (a sphere point) flags the matching node as the marked
    superattracting basin center.

    Raises NotPostcriticallyFinite if any orbit fails to close within
    ``max_steps``.
    """
    crits = rmap.critical_points()
    nodes = []      # list of [label, point, local_degree]
    labels = {}

    def find(p):
        for lab, q, _ in nodes:
            if chordal(p, q) < tol:
                return lab
        return None

    for i, (p, ldeg) in enumerate(crits):
        lab = find(p)
        if lab is None:
            nodes.append([f"c{i}", p, ldeg])
        else:
            # two critical points within tol: cleanly multiple, keep larger
            for rec in nodes:
                if rec[0] == lab:
                    rec[2] = max(rec[2], ldeg)

    edges = {}
    relations = []
    extra = 0
    for lab0, p0, _ in list(nodes):
        orbit = [lab0]
        cur_lab, cur_pt = lab0, p0
        for step in range(max_steps + 1):
            if cur_lab in edges:
                break
            nxt_pt = rmap.eval(cur_pt)
            nxt_lab = find(nxt_pt)
            if nxt_lab is None:
                nxt_lab = f"p{extra}"
                extra += 1
                nodes.append([nxt_lab, nxt_pt, 1])
            edges[cur_lab] = nxt_lab
            if nxt_lab in orbit:
                # cycle detected: confirm over one extra period
                start = orbit.index(nxt_lab)
                cycle = orbit[start:]
                z2 = _point_of(nodes, cycle[0])
                for _ in cycle:
                    z2 = rmap.eval(z2)
                drift = chordal(z2, _point_of(nodes, cycle[0]))
                if drift > 10 * tol:
                    raise NotPostcriticallyFinite(
                        f"cycle through {cycle} failed confirmation (drift {drift:.2e})",
                        max_steps=max_steps,
                    )
                break
            orbit.append(nxt_lab)
            cur_lab, cur_pt = nxt_lab, nxt_pt
        else:
            raise NotPostcriticallyFinite(
                f"orbit of {lab0} found no revisit within {max_steps} steps",
                max_steps=max_steps,
            )

    # close edges for tail nodes that were reached but never iterated
    pending = [rec for rec in nodes if rec[0] not in edges]
    while pending:
        for rec in pending:
            lab, pt, _ = rec
            nxt_pt = rmap.eval(pt)
            nxt_lab = find(nxt_pt)
            if nxt_lab is None:
                nxt_lab = f"p{extra}"
                extra += 1
                nodes.append([nxt_lab, nxt_pt, 1])
            edges[lab] = nxt_lab
        pending = [rec for rec in nodes if rec[0] not in edges]

    out_nodes = []
    for lab, pt, ldeg in nodes:
        is_marked = marked is not None and chordal(pt, marked) < tol
        out_nodes.append(PortraitNode(lab, pt, ldeg, is_marked))
    port = CriticalOrbitPortrait(
        nodes=tuple(out_nodes),
        edges=tuple(sorted(edges.items())),
        degree=rmap.degree,
    )
    rels = tuple(
        (n.label, *port.chain(n.label)) for n in port.critical_nodes()
    )
    return CriticalOrbitPortrait(port.nodes, port.edges, port.degree, rels)


def _point_of(nodes, label):
    for lab, pt, _ in nodes:
        if lab == label:
            return pt
    raise KeyError(label)


def merge_portraits(pf: CriticalOrbitPortrait, pg: CriticalOrbitPortrait, d0: int,
                    basin_test_f=None, basin_test_g=None) -> CriticalOrbitPortrait:
    """Merge two marked portraits into the mating's target portrait.

    Both marked nodes (the glued-away basin centers) are dropped; all
    other nodes and edges survive with ``f:``/``g:`` label prefixes.  The
    merged Riemann-Hurwitz budget must equal 2*(d1 + d2 - d0) - 2.

    Optional ``basin_test_*`` predicates (point -> bool, True = inside the
    marked basin) let callers verify that no kept node sits in a marked
    basin; without them that condition is trusted.
    """
    for port, name in ((pf, "first"), (pg, "second")):
        m = port.marked_node()
        if port.successor(m.label) != m.label:
            raise MalformedMerge(f"{name} marked node is not fixed")
        if m.local_degree != d0:
            raise MalformedMerge(
                f"{name} marked node has local degree {m.local_degree}, wanted {d0}"
            )

    nodes, edges = [], []
    for port, prefix, test in ((pf, "f", basin_test_f), (pg, "g", basin_test_g)):
        mlab = port.marked_node().label
        for n in port.nodes:
            if n.label == mlab:
                continue
            if test is not None and not is_inf(n.point) and test(n.point):
                raise MalformedMerge(
                    f"node {prefix}:{n.label} lies inside the marked basin"
                )
            nodes.append(
                PortraitNode(f"{prefix}:{n.label}", n.point, n.local_degree,
                             False, origin=prefix)
            )
        for s, d in port.edges:
            if s == mlab:
                continue
            if d == mlab:
                raise MalformedMerge(
                    f"orbit of {prefix}:{s} enters the marked basin center"
                )
            edges.append((f"{prefix}:{s}", f"{prefix}:{d}"))

    d1, d2 = pf.degree, pg.degree
    deg = d1 + d2 - d0
    budget = sum(n.local_degree - 1 for n in nodes)
    if budget != 2 * deg - 2:
        raise MalformedMerge(
            f"merged budget {budget} != {2 * deg - 2}",
            budget_expected=2 * deg - 2,
            budget_actual=budget,
        )
    merged = CriticalOrbitPortrait(tuple(nodes), tuple(sorted(edges)), deg)
    rels = tuple(
        (n.label, *merged.chain(n.label)) for n in merged.critical_nodes()
    )
    return CriticalOrbitPortrait(merged.nodes, merged.edges, deg, rels)


# ---------------------------------------------------------------------------
# Families and orbit relations
# ---------------------------------------------------------------------------

_RELATION_RE = re.compile(
    r"^\s*(\w+)\s*(?:\^\s*(\d+))?\s*\(\s*c\s*\)\s*(=|!=)\s*"
    r"(?:(\w+)\s*(?:\^\s*(\d+))?\s*\(\s*c\s*\)|c)\s*$"
)


@dataclass(frozen=True)
class OrbitRelation:
    """f^m(c) = f^n(c) with m > n >= 0 (equality of orbit points)."""

    m: int
    n: int

    def __str__(self):
        def side(k):
            if k == 0:
                return "c"
            if k == 1:
                return "f(c)"
            return f"f^{k}(c)"

        return f"{side(self.m)} = {side(self.n)}"


def parse_relation(text: str) -> OrbitRelation:
    """Parse a token string like ``"f^2(c) = f(c)"`` or ``"f(c) = c"``.

    Only equality relations are accepted here; the inequations a relation
    implies (proper preperiod, staying off the marked center) are derived,
    not written.
    """
    m = _RELATION_RE.match(text)
    if not m or m.group(3) != "=":
        raise ValueError(f"cannot parse orbit relation {text!r}")
    lhs = int(m.group(2) or 1)
    rhs = 0 if m.group(4) is None else int(m.group(5) or 1)
    hi, lo = max(lhs, rhs), min(lhs, rhs)
    if hi == lo:
        raise ValueError(f"degenerate relation {text!r}")
    return OrbitRelation(hi, lo)


@dataclass(frozen=True)
class FamilySpec:
    """A square Newton problem: one parametrized map + orbit relations.

    ``builder(params)`` yields the RationalMap, ``critical_point(params)``
    the tracked free critical point; the marked superattracting center and
    its local degree pin the normalization.  Parameter count must equal
    relation count.
    """

    name: str
    arity: int
    builder: object
    critical_point: object
    relations: tuple
    marked_center: complex = 0j
    d0: int = 2

    def __post_init__(self):
        if self.arity != len(self.relations):
            raise ValueError("parameter count must equal relation count")

    def residual(self, params):
        params = np.atleast_1d(np.asarray(params, dtype=complex))
        try:
            rmap = self.builder(params)
        except ValueError:
            return np.full(self.arity, 1e6, dtype=complex)
        c = self.critical_point(params)
        top = max(r.m for r in self.relations)
        orbit = [c]
        z = c
        for _ in range(top):
            z = rmap.eval(z)
            if z is INF:
                return np.full(self.arity, 1e6, dtype=complex)
            orbit.append(z)
        return np.asarray(
            [orbit[r.m] - orbit[r.n] for r in self.relations], dtype=complex
        )

    def inequation_margin(self, params) -> float:
        """Smallest margin over the implied inequations (> 0 is good).

        Implied by a relation f^m(c) = f^n(c): the first m orbit points
        are pairwise distinct (the preperiod/period is exact, e.g.
        g^2(c) != g(c)) and the orbit stays off the marked center (c is
        not absorbed into the marked basin, e.g. f(c) != 0).
        """
        params = np.atleast_1d(np.asarray(params, dtype=complex))
        rmap = self.builder(params)
        c = self.critical_point(params)
        top = max(r.m for r in self.relations)
        orbit = [c]
        z = c
        for _ in range(top):
            z = rmap.eval(z)
            orbit.append(z)
        margin = np.inf
        for i in range(top):
            for j in range(i + 1, top):
                margin = min(margin, chordal(orbit[i], orbit[j]))
        for k in range(1, top + 1):
            margin = min(margin, chordal(orbit[k], self.marked_center))
        return float(margin)


def cubic_family(relation: str) -> FamilySpec:
    """The cubic normal form f(z) = z^2 + a*z^3 with marked center 0.

    Affine conjugacy fixing 0 brings any cubic with a local-degree-2
    superattracting fixed point at the origin to this form; the free
    critical point is c = -2/(3a).
    """
    rel = parse_relation(relation) if isinstance(relation, str) else relation

    def builder(params):
        a = complex(params[0])
        if a == 0:
            raise ValueError("a = 0 degenerates the cubic")
        return RationalMap.polynomial([0, 0, 1, a])

    def critical_point(params):
        a = complex(params[0])
        return -2.0 / (3.0 * a)

    return FamilySpec(
        name="z2_az3",
        arity=1,
        builder=builder,
        critical_point=critical_point,
        relations=(rel,),
        marked_center=0j,
        d0=2,
    )


@dataclass(frozen=True)
class FamilySolution:
    params: tuple
    map: RationalMap
    portrait: CriticalOrbitPortrait
    residual: float
    boundary_candidate: bool
    landing_multiplier: complex


def grid_seeds(scales=((3.0, 13), (0.7, 15)), arity=1):
    """Deterministic multi-scale complex seed grid.

    Each (half_width, steps) pair contributes a square grid on
    [-half_width, half_width]^2; a finer inner grid catches the small
    Newton basins that cluster near the origin in the cubic family.
    """
    pts = []
    for half, steps in scales:
        axis = np.linspace(-half, half, steps)
        pts.extend(
            complex(x, y) for x in axis for y in axis if complex(x, y) != 0
        )
    return [np.full(arity, p, dtype=complex) for p in pts]


def elimination_seeds(spec: FamilySpec, radius=1.0, max_power=None):
    """Seeds for one-parameter families via spectral elimination.

    For the cubic normal form the relation residual r(a) is a Laurent
    polynomial in the parameter (poles only at a = 0), so a**K * r(a) is a
    polynomial of bounded degree.  Sampling r on the circle |a| = radius
    and taking an FFT recovers its coefficients exactly; the polynomial's
    roots are then near-perfect Newton seeds, including solutions whose
    Newton basins are too small for any reasonable grid.
    """
    if spec.arity != 1:
        return []
    m = max(r.m for r in spec.relations)
    k = (3**m + 1) // 2 if max_power is None else max_power
    size = 1
    while size < 2 * k + 8:
        size *= 2
    angles = 2.0 * np.pi * np.arange(size) / size
    samples = np.empty(size, dtype=complex)
    for j, t in enumerate(angles):
        a = radius * np.exp(1j * t)
        samples[j] = complex(spec.residual(np.array([a]))[0]) * a**k
    coeffs = np.fft.fft(samples) / size
    # fft of p(radius * w) on roots of unity: undo the radius scaling
    powers = np.arange(size)
    coeffs = coeffs * radius ** (-powers.astype(float))
    scale = np.max(np.abs(coeffs))
    if scale == 0:
        return []
    keep = _trim_tail(coeffs, 1e-10 * scale)
    if len(keep) <= 1:
        return []
    roots = poly_roots(keep)
    return [np.array([r]) for r in roots if abs(r) > 1e-8]


def _trim_tail(coeffs, tol):
    out = list(coeffs)
    while len(out) > 1 and abs(out[-1]) <= tol:
        out.pop()
    return tuple(out)


def solve_family(spec: FamilySpec, seeds=None, tol=1e-12, ineq_margin=_INEQ_MARGIN,
                 max_steps=64):
    """Newton over the seed list; dedup, filter, and re-verify solutions.

    ``seeds=None`` uses the deterministic default: the multi-scale grid
    plus elimination seeds for one-parameter families.  Every returned
    solution satisfies all relations with residual < tol, satisfies the
    implied inequations with the stated margin, reproduces the relation
    graph under portrait_of, and carries a flag for whether the free
    critical point looks like a basin-boundary point (bounded orbit, not
    attracted to the marked center, repelling landing cycle).

    Raises NonConvergence (with the best residuals seen) if nothing passes.
    """
    if seeds is None:
        seeds = grid_seeds(arity=spec.arity) + elimination_seeds(spec)
    solutions = []
    best_residuals = []
    notes = []
    for idx, seed in enumerate(seeds):
        try:
            params = newton_solve(spec.residual, np.asarray(seed, dtype=complex),
                                  tol=tol, max_iter=80)
        except NonConvergence as exc:
            best_residuals.append((idx, exc.residual))
            continue
        except (SingularJacobian, ValueError):
            continue
        params = np.atleast_1d(params)
        if np.max(np.abs(params)) > 50.0:
            # the orbit collapsed onto the marked center: residuals vanish
            # by scale, not by solving the relation
            notes.append((idx, "diverged to degenerate scale"))
            continue
        if any(
            np.max(np.abs(params - np.asarray(s.params))) < _DEDUP_TOL
            for s in solutions
        ):
            continue
        margin = spec.inequation_margin(params)
        if margin < ineq_margin:
            notes.append((idx, f"inequation margin {margin:.2e}"))
            continue
        rmap = spec.builder(params)
        resid = float(np.max(np.abs(spec.residual(params))))
        try:
            port = portrait_of(rmap, max_steps=max_steps, marked=spec.marked_center)
        except NotPostcriticallyFinite:
            notes.append((idx, "portrait did not close"))
            continue
        if not _portrait_matches_relations(port, spec, params):
            notes.append((idx, "portrait does not reproduce the relation graph"))
            continue
        flag, mult = _boundary_candidate(rmap, port, spec, params)
        solutions.append(
            FamilySolution(tuple(params), rmap, port, resid, flag, mult)
        )
    if not solutions:
        raise NonConvergence(
            f"no seed converged for family {spec.name}",
            best=sorted(best_residuals, key=lambda t: (t[1] is None, t[1]))[:5],
        )
    return solutions


def _portrait_matches_relations(port, spec, params):
    c = spec.critical_point(params)
    # locate the free critical node by position
    target = None
    for n in port.critical_nodes():
        if n.marked or is_inf(n.point):
            continue
        if chordal(n.point, c) < 1e-6:
            target = n
            break
    if target is None:
        return False
    pre, per = port.chain(target.label)
    r = spec.relations[0]
    return (pre, per) == (r.n, r.m - r.n)


def _boundary_candidate(rmap, port, spec, params):
    """Heuristic basin-boundary check for the free critical point.

    True when the portrait shows c landing on a finite cycle away from
    the marked center (neither absorbed nor escaping to a cycle through
    infinity) and that cycle is repelling.  This flags candidates; it
    does not prove boundary membership.
    """
    c = spec.critical_point(params)
    lab = None
    for n in port.nodes:
        if not is_inf(n.point) and chordal(n.point, c) < 1e-6:
            lab = n.label
            break
    if lab is None:
        return False, 0j
    pre, per = port.chain(lab)
    cur = lab
    for _ in range(pre):
        cur = port.successor(cur)
    cycle = []
    for _ in range(per):
        node = port.node(cur)
        if node.marked or is_inf(node.point):
            return False, 0j
        cycle.append(node.point)
        cur = port.successor(cur)
    mult = rmap.multiplier(cycle)
    return bool(abs(mult) > 1.0 + _INEQ_MARGIN), mult
