"""Realize a mating as an actual rational map of degree d1 + d2 - d0.

The merged portrait fixes a normal form: the surviving fixed critical
point of the outside (f) map goes to infinity, the inside (g) one to the
origin, numerator and denominator are monic.  Newton then solves for the
remaining coefficients; the free critical points ride along as extra
unknowns pinned by Wronskian-vanishing equations, which keeps the system
smooth (no root sorting inside the iteration).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .dynamics import INF, RationalMap, chordal, is_inf, poly_eval
from .errors import NoRealization, NonConvergence, SingularJacobian, Unsupported
from .newton import newton_solve
from .portrait import CriticalOrbitPortrait, merge_portraits, portrait_of

__all__ = [
    "MatingSpec",
    "RationalFamily",
    "RealizedMating",
    "build_family",
    "realize",
    "verify_realization",
    "default_seed_box",
]

_DEDUP_TOL = 1e-8
_DISTINCT_MARGIN = 1e-6


@dataclass(frozen=True)
class MatingSpec:
    """A mating problem: outside map f, inside map g, shared basin degree d0.

    Both maps must carry a marked superattracting fixed point of local
    degree d0 at ``marked_f`` / ``marked_g`` (the basins glued away), and
    a fixed critical point at infinity that survives the gluing (both our
    example families are polynomials, so this is their infinity).
    """

    f: RationalMap
    g: RationalMap
    d0: int
    k: int = 1
    marked_f: complex = 0j
    marked_g: complex = 0j

    def merged_portrait(self) -> CriticalOrbitPortrait:
        pf = portrait_of(self.f, marked=self.marked_f)
        pg = portrait_of(self.g, marked=self.marked_g)
        return merge_portraits(pf, pg, self.d0)


@dataclass(frozen=True)
class RationalFamily:
    """Coefficient recipe z^delta0 * P(z) / Q(z) with P, Q monic.

    Unknowns are P's m = D - delta0 low coefficients followed by Q's
    n = D - delta_inf coefficients; chains lists the (preperiod, period)
    each free critical point must satisfy, in merged-portrait node order.
    """

    degree: int
    delta0: int
    delta_inf: int
    chains: tuple          # ((node_label, preperiod, period), ...)

    @property
    def num_free(self) -> int:
        return self.degree - self.delta0

    @property
    def den_free(self) -> int:
        return self.degree - self.delta_inf

    @property
    def n_unknowns(self) -> int:
        return self.num_free + self.den_free

    def build(self, params) -> RationalMap:
        params = np.asarray(params, dtype=complex)
        m, n = self.num_free, self.den_free
        p = list(params[:m]) + [1.0 + 0j]
        q = list(params[m : m + n]) + [1.0 + 0j]
        num = [0j] * self.delta0 + p
        return RationalMap(tuple(num), tuple(q))

    def describe(self) -> str:
        return (
            f"z^{self.delta0} * (monic deg {self.num_free}) / "
            f"(monic deg {self.den_free}), degree {self.degree}"
        )


def build_family(merged: CriticalOrbitPortrait) -> RationalFamily:
    """Pick the normal form realizing a merged portrait.

    The f-origin node at infinity keeps its place (local degree
    delta_inf); the g-origin node at infinity moves to the origin (local
    degree delta0).  Monicity of both polynomials spends the remaining
    scaling freedom up to a finite root-of-unity ambiguity, so the
    unknown count equals the chain count and the Newton system is square.
    """
    f_inf = [n for n in merged.nodes if n.origin == "f" and is_inf(n.point)]
    g_inf = [n for n in merged.nodes if n.origin == "g" and is_inf(n.point)]
    shape = [(n.label, n.local_degree, merged.chain(n.label)) for n in merged.nodes]
    if len(f_inf) != 1 or len(g_inf) != 1:
        raise Unsupported(
            f"need one fixed critical node at infinity per side, portrait: {shape}"
        )
    for node, side in ((f_inf[0], "f"), (g_inf[0], "g")):
        if merged.chain(node.label) != (0, 1):
            raise Unsupported(f"{side}-side infinity node is not fixed: {shape}")
        if node.local_degree < 2:
            raise Unsupported(f"{side}-side infinity node is not critical: {shape}")

    delta_inf = f_inf[0].local_degree
    delta0 = g_inf[0].local_degree
    deg = merged.degree
    free = [
        n for n in merged.critical_nodes()
        if n.label not in (f_inf[0].label, g_inf[0].label)
    ]
    if any(n.local_degree != 2 for n in free):
        raise Unsupported(f"free critical nodes must be simple, portrait: {shape}")
    chains = tuple(
        (n.label, *merged.chain(n.label))
        for n in sorted(free, key=lambda n: n.label)
    )
    family = RationalFamily(deg, delta0, delta_inf, chains)
    if len(chains) != family.n_unknowns:
        raise Unsupported(
            f"chain count {len(chains)} != free coefficients "
            f"{family.n_unknowns}, portrait: {shape}"
        )
    return family


@dataclass(frozen=True)
class RealizedMating:
    map: RationalMap
    family: RationalFamily
    params: tuple
    critical_points: tuple        # free critical points, chain order
    residuals: tuple              # per-chain orbit relation residuals
    normalization: str
    portrait_match: tuple         # (merged_label, realized_label) pairs
    merged: CriticalOrbitPortrait
    portrait: CriticalOrbitPortrait


def _chain_residuals(rmap, family, cs):
    out = []
    for (label, pre, per), c in zip(family.chains, cs):
        z = c
        orbit = [z]
        for _ in range(pre + per):
            z = rmap.eval(z)
            if z is INF:
                return None
            orbit.append(z)
        out.append(orbit[pre + per] - orbit[pre])
    return np.asarray(out, dtype=complex)


def _full_residual(family):
    u = family.n_unknowns

    def residual(x):
        params, cs = x[:u], x[u:]
        try:
            rmap = family.build(params)
        except ValueError:
            return np.full(2 * u, 1e6, dtype=complex)
        if rmap.degree != family.degree:
            return np.full(2 * u, 1e6, dtype=complex)
        rel = _chain_residuals(rmap, family, cs)
        if rel is None:
            return np.full(2 * u, 1e6, dtype=complex)
        w = rmap.wronskian()
        scale = max(abs(c) for c in w)
        wr = np.asarray([poly_eval(w, c) / scale for c in cs], dtype=complex)
        return np.concatenate([rel, wr])

    return residual


def default_seed_box(family, count=240, half=2.0, rng_seed=2024):
    """Deterministic random seeds in the coefficient box [-half, half]^2."""
    rng = np.random.default_rng(rng_seed)
    u = family.n_unknowns
    pts = rng.uniform(-half, half, size=(count, 2 * u))
    return [row[:u] + 1j * row[u:] for row in pts]


def _free_crits(rmap, family):
    """Free critical points (those away from 0 and infinity), or None."""
    try:
        crits = rmap.critical_points()
    except NonConvergence:
        return None
    at0 = [m for p, m in crits if not is_inf(p) and abs(p) < _DISTINCT_MARGIN]
    atinf = [m for p, m in crits if is_inf(p)]
    if at0 != [family.delta0] or atinf != [family.delta_inf]:
        return None
    free = [p for p, m in crits if is_inf(p) is False and abs(p) >= _DISTINCT_MARGIN]
    mults = [m for p, m in crits if is_inf(p) is False and abs(p) >= _DISTINCT_MARGIN]
    if len(free) != family.n_unknowns or any(m != 2 for m in mults):
        return None
    return free


def realize(spec: MatingSpec, seeds=None, tol=1e-12, verify_tol=1e-10,
            max_seeds_after_hit=None):
    """Newton-solve the merged portrait's normal form.

    Returns all distinct solutions whose realized portrait is
    graph-isomorphic (with local degrees) to the merged portrait, ordered
    deterministically by discovery.  Raises NoRealization if none is
    found; the exception carries the best residuals per seed for
    diagnosis.
    """
    merged = spec.merged_portrait()
    family = build_family(merged)
    u = family.n_unknowns

    if u == 0:
        rmap = family.build(np.empty(0, dtype=complex))
        port = portrait_of(rmap)
        match = _isomorphism(merged, port)
        if match is None:
            raise NoRealization("parameter-free normal form does not realize portrait")
        return [
            RealizedMating(
                rmap, family, (), (), (),
                normalization=family.describe(),
                portrait_match=tuple(sorted(match.items())),
                merged=merged, portrait=port,
            )
        ]

    if seeds is None:
        seeds = default_seed_box(family)
    residual = _full_residual(family)
    solutions = []
    best = []
    for idx, seed in enumerate(seeds):
        seed = np.asarray(seed, dtype=complex)
        try:
            start_map = family.build(seed)
        except ValueError:
            continue
        crits = _free_crits(start_map, family)
        if crits is None:
            continue
        for perm in itertools.permutations(range(u)):
            x0 = np.concatenate([seed, np.asarray([crits[i] for i in perm])])
            try:
                x = newton_solve(residual, x0, tol=tol, max_iter=60)
            except NonConvergence as exc:
                best.append((idx, exc.residual))
                continue
            except SingularJacobian:
                continue
            sol = _accept(x, family, merged, verify_tol)
            if sol is None:
                continue
            if any(
                np.max(np.abs(np.asarray(sol.params) - np.asarray(s.params)))
                < _DEDUP_TOL
                for s in solutions
            ):
                continue
            solutions.append(sol)
    if not solutions:
        raise NoRealization(
            "no seed realized the merged portrait",
            best_residuals=sorted(best, key=lambda t: t[1] or np.inf)[:8],
        )
    return solutions


def _accept(x, family, merged, verify_tol):
    u = family.n_unknowns
    params, cs = x[:u], x[u:]
    if np.max(np.abs(params)) > 50.0:
        return None
    try:
        rmap = family.build(params)
    except ValueError:
        return None
    free = _free_crits(rmap, family)
    if free is None:
        return None
    # the augmented unknowns must coincide with the actual critical points
    used = []
    for c in cs:
        dists = [abs(c - p) if p not in used else np.inf for p in free]
        j = int(np.argmin(dists))
        if dists[j] > 1e-6:
            return None
        used.append(free[j])
    if any(
        abs(a - b) < _DISTINCT_MARGIN
        for i, a in enumerate(cs) for b in cs[i + 1 :]
    ):
        return None
    # inequations implied by each chain: the first pre+per orbit points are
    # pairwise distinct (no shorter relation holds) and the orbit stays off
    # the superattracting fixed points at 0 and infinity
    for (label, pre, per), c in zip(family.chains, cs):
        orbit = [c]
        z = c
        for _ in range(pre + per):
            z = rmap.eval(z)
            if z is INF:
                return None
            orbit.append(z)
        for i in range(pre + per):
            for j in range(i + 1, pre + per):
                if chordal(orbit[i], orbit[j]) < _DISTINCT_MARGIN:
                    return None
        for z in orbit[1:]:
            if chordal(z, 0j) < _DISTINCT_MARGIN or chordal(z, INF) < _DISTINCT_MARGIN:
                return None
    rel = _chain_residuals(rmap, family, cs)
    if rel is None or np.max(np.abs(rel)) > verify_tol:
        return None
    try:
        port = portrait_of(rmap)
    except Exception:
        return None
    match = _isomorphism(merged, port)
    if match is None:
        return None
    return RealizedMating(
        rmap, family, tuple(params), tuple(cs),
        tuple(abs(v) for v in rel),
        normalization=family.describe(),
        portrait_match=tuple(sorted(match.items())),
        merged=merged, portrait=port,
    )


def _isomorphism(a: CriticalOrbitPortrait, b: CriticalOrbitPortrait):
    """Local-degree-preserving graph isomorphism a -> b, or None."""
    if len(a.nodes) != len(b.nodes):
        return None
    e1, e2 = a.edge_map, b.edge_map
    mine = list(a.nodes)

    def backtrack(assign):
        if len(assign) == len(mine):
            if all(assign[e1[s]] == e2[assign[s]] for s in assign):
                return dict(assign)
            return None
        na = mine[len(assign)]
        for nb in b.nodes:
            if nb.label in assign.values():
                continue
            if nb.local_degree != na.local_degree:
                continue
            assign[na.label] = nb.label
            ok = all(
                e1[s] not in assign or assign[e1[s]] == e2[assign[s]]
                for s in assign
                if s in e1 and assign.get(s) in e2
            )
            if ok:
                found = backtrack(assign)
                if found is not None:
                    return found
            del assign[na.label]
        return None

    return backtrack({})


def verify_realization(rm: RealizedMating, tol=1e-10, n_points=100, rng_seed=7):
    """Re-check a realized mating from scratch; returns a report dict.

    Checks: (i) preimage counts at random sphere points (every point of
    the sphere must have exactly D preimages, each mapping back within
    tolerance), (ii) the orbit relation residuals, (iii) local degrees at
    the matched critical points via derivative vanishing order, (iv) the
    attracting cycle census (exactly the two superattractors at 0 and
    infinity for a mating of two polynomials).
    """
    rmap = rm.map
    d = rmap.degree
    rng = np.random.default_rng(rng_seed)
    pts = rng.standard_normal(n_points) + 1j * rng.standard_normal(n_points)
    preim_ok = True
    worst = 0.0
    for w in pts:
        pre = rmap.preimages(complex(w))
        if len(pre) != d:
            preim_ok = False
            break
        for z in pre:
            err = chordal(rmap.eval(z), complex(w))
            worst = max(worst, err)
    relation_max = max(rm.residuals) if rm.residuals else 0.0
    crits = rmap.critical_points()
    local0 = next((m for p, m in crits if not is_inf(p) and abs(p) < 1e-8), None)
    localinf = next((m for p, m in crits if is_inf(p)), None)
    attracting = []
    seen = set()
    for n in rm.portrait.nodes:
        pre, per = rm.portrait.chain(n.label)
        cur = n.label
        for _ in range(pre):
            cur = rm.portrait.successor(cur)
        cyc = []
        lab = cur
        for _ in range(per):
            cyc.append(rm.portrait.node(lab).point)
            lab = rm.portrait.successor(lab)
        key = tuple(sorted(str(p) for p in cyc))
        if key in seen:
            continue
        seen.add(key)
        mult = rmap.multiplier(cyc)
        if abs(mult) < 1.0:
            attracting.append({"cycle": [_point_str(p) for p in cyc],
                               "multiplier": abs(mult)})
    return {
        "degree": d,
        "preimage_count_ok": preim_ok,
        "preimage_worst_residual": worst,
        "preimage_residual_ok": bool(worst < 1e-9),
        "relation_residual_max": relation_max,
        "relation_residual_ok": bool(relation_max < tol),
        "local_degree_at_zero": local0,
        "local_degree_at_infinity": localinf,
        "attracting_cycles": attracting,
        "attracting_cycle_count": len(attracting),
    }


def _point_str(p):
    if is_inf(p):
        return "inf"
    return f"{p.real:.12g}{p.imag:+.12g}j"
