"""Ideal triangulations: parsing, edge classes and boundary Euler characteristics.

Two text dialects are understood.

Gluing dialect::

    tets 2
    glue 0 0 -> 1 3 : 0 1 2
    ...

``glue t f -> t' f' : p q r`` glues face ``f`` of tet ``t`` (the face opposite
vertex ``f``) to face ``f'`` of tet ``t'``; the ascending vertex triple of face
``f`` is sent to ``(p, q, r)``.  Each face pair is listed once; listing the
exact inverse as well is tolerated.

Incidence dialect::

    edges 1
    tet 0: e0 e0 e0 e0 e0 e0
    tet 1: e0 e0 e0 e0 e0 e0

gives the edge-class label of each slot ``(12, 13, 14, 23, 24, 34)`` directly.

Lines starting with ``#`` are comments.
"""

from __future__ import annotations

import json
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .geometry import SLOTS

__all__ = [
    "TriangulationError",
    "ParseError",
    "FaceGluing",
    "EdgeClass",
    "Triangulation",
    "ValidationReport",
    "parse",
    "parse_gluing",
    "parse_incidence",
    "detect_format",
    "compute_edge_classes",
    "boundary_euler_characteristics",
    "validate",
    "NONEXISTENCE_ADVISORY",
]

NONEXISTENCE_ADVISORY = (
    "all edge degrees are <= 6: no zero-curvature metric exists on this triangulation"
)

_SLOT_OF = {pair: k for k, pair in enumerate(SLOTS)}
_SLOT_OF.update({(j, i): k for (i, j), k in list(_SLOT_OF.items())})


class TriangulationError(ValueError):
    """Structurally invalid triangulation."""


class ParseError(TriangulationError):
    def __init__(self, message: str, lineno: int | None = None):
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)
        self.lineno = lineno


def face_vertices(face: int) -> tuple[int, int, int]:
    return tuple(v for v in range(4) if v != face)


@dataclass(frozen=True)
class FaceGluing:
    """Face ``source = (tet, face)`` glued to ``target``; ``vertex_map`` is the
    image of the ascending vertex triple of the source face."""

    source: tuple[int, int]
    target: tuple[int, int]
    vertex_map: tuple[int, int, int]

    def vertex_dict(self) -> dict[int, int]:
        return dict(zip(face_vertices(self.source[1]), self.vertex_map))

    def inverse(self) -> "FaceGluing":
        forward = self.vertex_dict()
        back = {w: v for v, w in forward.items()}
        return FaceGluing(
            self.target, self.source, tuple(back[w] for w in face_vertices(self.target[1]))
        )

    def is_self_identity(self) -> bool:
        return self.source == self.target and self.vertex_dict() == {
            v: v for v in face_vertices(self.source[1])
        }


@dataclass(frozen=True)
class EdgeClass:
    label: int
    members: tuple[tuple[int, int], ...]  # (tet, slot)

    @property
    def degree(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class Triangulation:
    """Immutable triangulation.

    ``incidence[t][s]`` is the edge-class label of slot ``s`` of tet ``t``.
    ``gluings`` is ``None`` for incidence-format input, which also leaves
    ``boundary_chi`` unavailable (``None``).
    """

    num_tets: int
    incidence: tuple[tuple[int, ...], ...]
    gluings: tuple[FaceGluing, ...] | None = None
    boundary_chi: tuple[int, ...] | None = None
    edge_classes: tuple[EdgeClass, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        members: dict[int, list[tuple[int, int]]] = {}
        for t, row in enumerate(self.incidence):
            for s, e in enumerate(row):
                members.setdefault(e, []).append((t, s))
        classes = tuple(EdgeClass(e, tuple(members[e])) for e in sorted(members))
        object.__setattr__(self, "edge_classes", classes)

    @property
    def format(self) -> str:
        return "incidence" if self.gluings is None else "gluing"

    @property
    def num_edges(self) -> int:
        return len(self.edge_classes)

    @property
    def degrees(self) -> np.ndarray:
        return np.array([c.degree for c in self.edge_classes], dtype=int)

    def incidence_array(self) -> np.ndarray:
        """``(num_tets, 6)`` integer array of class labels."""
        return np.array(self.incidence, dtype=np.intp).reshape(self.num_tets, 6)

    # -- serialisation -----------------------------------------------------

    @classmethod
    def from_incidence(cls, rows: Sequence[Sequence[int]]) -> "Triangulation":
        rows = tuple(tuple(int(e) for e in row) for row in rows)
        for t, row in enumerate(rows):
            if len(row) != 6:
                raise TriangulationError(f"tet {t} has {len(row)} edge labels, expected 6")
        labels = sorted({e for row in rows for e in row})
        if labels != list(range(len(labels))):
            missing = sorted(set(range(max(labels, default=-1) + 1)) - set(labels))
            raise TriangulationError(f"edge labels must be dense 0..M-1; missing {missing}")
        return cls(len(rows), rows)

    @classmethod
    def from_gluings(
        cls, num_tets: int, gluings: Iterable[FaceGluing], check: bool = True
    ) -> "Triangulation":
        gluings = tuple(gluings)
        if check:
            problems = _gluing_violations(num_tets, gluings)
            if problems:
                raise TriangulationError(problems[0][1])
        incidence = compute_edge_classes(num_tets, gluings)
        chi = tuple(_link_euler_characteristics(num_tets, gluings))
        return cls(num_tets, incidence, gluings, chi)

    def to_dict(self) -> dict:
        out: dict = {"format": self.format, "num_tets": self.num_tets}
        if self.gluings is not None:
            out["gluings"] = [
                {"source": list(g.source), "target": list(g.target), "vertex_map": list(g.vertex_map)}
                for g in self.gluings
            ]
        out["incidence"] = [list(row) for row in self.incidence]
        out["edge_classes"] = [
            {"label": c.label, "degree": c.degree, "members": [list(m) for m in c.members]}
            for c in self.edge_classes
        ]
        out["boundary_chi"] = None if self.boundary_chi is None else list(self.boundary_chi)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Triangulation":
        if data.get("format") == "gluing":
            gluings = [
                FaceGluing(tuple(g["source"]), tuple(g["target"]), tuple(g["vertex_map"]))
                for g in data["gluings"]
            ]
            return cls.from_gluings(int(data["num_tets"]), gluings)
        return cls.from_incidence(data["incidence"])

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "Triangulation":
        return cls.from_dict(json.loads(text))

    def to_text(self) -> str:
        """Serialise back into the dialect this triangulation came from."""
        if self.gluings is None:
            lines = [f"edges {self.num_edges}"]
            lines += [
                f"tet {t}: " + " ".join(f"e{e}" for e in row) for t, row in enumerate(self.incidence)
            ]
        else:
            lines = [f"tets {self.num_tets}"]
            lines += [
                "glue {} {} -> {} {} : {} {} {}".format(*g.source, *g.target, *g.vertex_map)
                for g in self.gluings
            ]
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# parsing


def _content_lines(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def detect_format(text: str) -> str:
    """``"gluing"`` or ``"incidence"`` from the header token."""
    for lineno, line in _content_lines(text):
        token = line.split()[0]
        if token == "tets":
            return "gluing"
        if token == "edges":
            return "incidence"
        raise ParseError(f"expected header 'tets N' or 'edges M', got {line!r}", lineno)
    raise ParseError("empty triangulation file")


def _header(lines, keyword):
    try:
        lineno, line = next(lines)
    except StopIteration:
        raise ParseError("empty triangulation file") from None
    m = re.fullmatch(rf"{keyword}\s+(\d+)", line)
    if not m:
        raise ParseError(f"expected '{keyword} N', got {line!r}", lineno)
    return int(m.group(1))


_GLUE_RE = re.compile(
    r"glue\s+(\d+)\s+(\d+)\s*->\s*(\d+)\s+(\d+)\s*:\s*(\d+)\s+(\d+)\s+(\d+)"
)


def read_gluings(text: str) -> tuple[int, list[FaceGluing]]:
    """Syntax-level read of the gluing dialect (no structural checks).

    Reverse listings that are the exact inverse of an earlier gluing are
    dropped here.
    """
    lines = _content_lines(text)
    n = _header(lines, "tets")
    gluings: list[FaceGluing] = []
    seen: set[FaceGluing] = set()
    for lineno, line in lines:
        m = _GLUE_RE.fullmatch(line)
        if not m:
            raise ParseError(f"cannot parse {line!r}", lineno)
        t, f, t2, f2, p, q, r = map(int, m.groups())
        for tet in (t, t2):
            if tet >= n:
                raise ParseError(f"tet {tet} out of range (tets {n})", lineno)
        for face in (f, f2):
            if face > 3:
                raise ParseError(f"face {face} out of range 0..3", lineno)
        if sorted((p, q, r)) != list(face_vertices(f2)):
            raise ParseError(
                f"vertex map {(p, q, r)} is not a bijection onto face {f2} of tet {t2}", lineno
            )
        g = FaceGluing((t, f), (t2, f2), (p, q, r))
        if g in seen or g.inverse() in seen:
            continue
        seen.add(g)
        gluings.append(g)
    return n, gluings


def parse_gluing(text: str, check: bool = True) -> Triangulation:
    """Parse the gluing dialect.

    With ``check`` (the default) an unmatched face, a face used twice with
    conflicting maps, or a face glued to itself by the identity raises
    ``TriangulationError``; ``check=False`` defers those to ``validate``.
    """
    n, gluings = read_gluings(text)
    return Triangulation.from_gluings(n, gluings, check=check)


_TET_RE = re.compile(r"tet\s+(\d+)\s*:\s*(.*)")
_LABEL_RE = re.compile(r"e?(\d+)")


def parse_incidence(text: str) -> Triangulation:
    lines = _content_lines(text)
    m_edges = _header(lines, "edges")
    rows: dict[int, tuple[int, ...]] = {}
    for lineno, line in lines:
        m = _TET_RE.fullmatch(line)
        if not m:
            raise ParseError(f"cannot parse {line!r}", lineno)
        t = int(m.group(1))
        if t in rows:
            raise ParseError(f"duplicate tetrahedron {t}", lineno)
        labels = []
        for tok in m.group(2).split():
            lm = _LABEL_RE.fullmatch(tok)
            if not lm:
                raise ParseError(f"bad edge label {tok!r}", lineno)
            labels.append(int(lm.group(1)))
        if len(labels) != 6:
            raise ParseError(f"tet {t} lists {len(labels)} edges, expected 6", lineno)
        if max(labels) >= m_edges:
            raise ParseError(f"edge label e{max(labels)} out of range (edges {m_edges})", lineno)
        rows[t] = tuple(labels)
    if not rows:
        raise ParseError("no tetrahedra listed")
    if sorted(rows) != list(range(len(rows))):
        raise ParseError(f"tetrahedra must be numbered 0..{len(rows) - 1}")
    used = {e for row in rows.values() for e in row}
    if used != set(range(m_edges)):
        gaps = sorted(set(range(m_edges)) - used)
        raise ParseError(f"edge labels not dense: unused {['e%d' % g for g in gaps]}")
    return Triangulation.from_incidence([rows[t] for t in range(len(rows))])


def parse(text: str, fmt: str = "auto", check: bool = True) -> Triangulation:
    if fmt == "auto":
        fmt = detect_format(text)
    if fmt == "gluing":
        return parse_gluing(text, check=check)
    if fmt == "incidence":
        return parse_incidence(text)
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# combinatorics


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def compute_edge_classes(num_tets: int, gluings: Sequence[FaceGluing]) -> tuple[tuple[int, ...], ...]:
    """Slot-to-class incidence from the orbits of (tet, edge) under the gluings.

    Labels are assigned in first-encounter order scanning tets and slots in
    order, so the result depends only on the input.
    """
    uf = _UnionFind(6 * num_tets)
    for g in gluings:
        (t, f), (t2, _) = g.source, g.target
        vmap = g.vertex_dict()
        verts = face_vertices(f)
        for a in range(3):
            for b in range(a + 1, 3):
                v, w = verts[a], verts[b]
                uf.union(6 * t + _SLOT_OF[(v, w)], 6 * t2 + _SLOT_OF[(vmap[v], vmap[w])])
    labels: dict[int, int] = {}
    rows = []
    for t in range(num_tets):
        row = []
        for s in range(6):
            root = uf.find(6 * t + s)
            row.append(labels.setdefault(root, len(labels)))
        rows.append(tuple(row))
    return tuple(rows)


def _link_euler_characteristics(num_tets: int, gluings: Sequence[FaceGluing]) -> list[int]:
    # link triangle (t, v); its edges (t, v, f) for f != v; its vertices
    # (t, v, w) for w != v, i.e. the end of edge vw near vertex v
    def tri(t, v):
        return 4 * t + v

    def ledge(t, v, f):
        return 16 * t + 4 * v + f

    def lvert(t, v, w):
        return 16 * t + 4 * v + w

    n_tri = 4 * num_tets
    uf_tri = _UnionFind(n_tri)
    uf_edge = _UnionFind(16 * num_tets)
    uf_vert = _UnionFind(16 * num_tets)
    for g in gluings:
        (t, f), (t2, f2) = g.source, g.target
        vmap = g.vertex_dict()
        for v in face_vertices(f):
            uf_tri.union(tri(t, v), tri(t2, vmap[v]))
            uf_edge.union(ledge(t, v, f), ledge(t2, vmap[v], f2))
            for w in face_vertices(f):
                if w != v:
                    uf_vert.union(lvert(t, v, w), lvert(t2, vmap[v], vmap[w]))

    comp_of = {}
    for t in range(num_tets):
        for v in range(4):
            comp_of.setdefault(uf_tri.find(tri(t, v)), len(comp_of))
    chi = [0] * len(comp_of)
    verts, edges = set(), set()
    for t in range(num_tets):
        for v in range(4):
            c = comp_of[uf_tri.find(tri(t, v))]
            chi[c] += 1  # face
            for x in range(4):
                if x == v:
                    continue
                e = uf_edge.find(ledge(t, v, x))
                if e not in edges:
                    edges.add(e)
                    chi[c] -= 1
                p = uf_vert.find(lvert(t, v, x))
                if p not in verts:
                    verts.add(p)
                    chi[c] += 1
    return chi


def boundary_euler_characteristics(triangulation: Triangulation) -> tuple[int, ...]:
    """Euler characteristic of each boundary component (vertex-link surface)."""
    if triangulation.gluings is None:
        raise TriangulationError(
            "boundary Euler characteristics need the gluing format; incidence data "
            "does not determine the boundary surfaces"
        )
    return tuple(_link_euler_characteristics(triangulation.num_tets, triangulation.gluings))


def _gluing_violations(num_tets: int, gluings: Sequence[FaceGluing]) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    uses: dict[tuple[int, int], list[FaceGluing]] = {}
    for g in gluings:
        if g.is_self_identity():
            out.append(("self_glue", f"face {g.source} glued to itself by the identity"))
            continue
        uses.setdefault(g.source, []).append(g)
        if g.target != g.source:
            uses.setdefault(g.target, []).append(g.inverse())
        elif g.inverse() != g:
            out.append(("non_involutive", f"self-gluing of face {g.source} is not an involution"))
    for face, gs in sorted(uses.items()):
        if len({(g.target, g.vertex_map) for g in gs}) > 1:
            out.append(("non_involutive", f"face {face} is glued by conflicting maps"))
        elif len(gs) > 1:
            out.append(("matching", f"face {face} appears in {len(gs)} gluings"))
    for t in range(num_tets):
        for f in range(4):
            if (t, f) not in uses:
                out.append(("matching", f"unmatched face: tet {t} face {f}"))
    return out


@dataclass
class ValidationReport:
    ok: bool
    violations: list[tuple[str, str]]
    degrees: dict[int, int]
    chi: list[int] | str
    advisories: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [{"rule": r, "detail": d} for r, d in self.violations],
            "degrees": {str(k): v for k, v in sorted(self.degrees.items())},
            "chi": self.chi,
            "advisories": list(self.advisories),
        }


def validate(triangulation: Triangulation, strict: bool = False) -> ValidationReport:
    """Collect every rule violation instead of raising.

    Strict mode adds the requirement that every boundary component has
    negative Euler characteristic (gluing format only).
    """
    violations: list[tuple[str, str]] = []
    advisories: list[str] = []
    tri = triangulation

    if tri.gluings is not None:
        violations += _gluing_violations(tri.num_tets, tri.gluings)

    seen = Counter(m for c in tri.edge_classes for m in c.members)
    if len(seen) != 6 * tri.num_tets or any(v != 1 for v in seen.values()):
        violations.append(("partition", "edge classes do not partition the (tet, slot) pairs"))
    if int(tri.degrees.sum()) != 6 * tri.num_tets:
        violations.append(("partition", "sum of edge degrees differs from 6 * num_tets"))

    if tri.num_edges and int(tri.degrees.max()) <= 6:
        advisories.append(NONEXISTENCE_ADVISORY)

    if tri.gluings is None:
        chi: list[int] | str = "unavailable (incidence format)"
        if strict:
            advisories.append("boundary Euler characteristic check skipped: incidence format")
    else:
        chi = list(boundary_euler_characteristics(tri))
        if strict:
            for k, c in enumerate(chi):
                if c >= 0:
                    violations.append(
                        ("chi", f"boundary component {k} has chi = {c}; chi(S) < 0 required")
                    )
        if any(c >= 0 for c in chi) and NONEXISTENCE_ADVISORY not in advisories:
            advisories.append("some boundary component has chi >= 0")

    degrees = dict(sorted(Counter(int(d) for d in tri.degrees).items()))
    return ValidationReport(not violations, violations, degrees, chi, advisories)
