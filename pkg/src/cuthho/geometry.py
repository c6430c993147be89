"""Cut geometry on a Cartesian background mesh.

Builds, for a given level set, the complete cut description the solver
needs: per-face crossing points and sub-face segments, per-cell interface
polylines (2**r chords obtained by recursive midpoint projection onto the
zero set), sub-cell triangulations used for quadrature, inscribed-radius
estimates driving the well-cut / ill-cut classification, and the pairing
map that assigns every ill-cut cell a neighbor with a usable sub-cell on
the failing side.

Each background face is assumed to be crossed at most once and each cut
cell to contain a single interface arc with two boundary crossings;
anything else raises :class:`GeometryError` instead of silently
mis-triangulating.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, PairingError
from .levelset import LevelSet
from .mesh import CartesianMesh
from .quadrature import triangle_areas

UNCUT = "uncut"
WELL_CUT = "well"
ILL_CUT = "ill"

SNAP_REL = 1e-12  # endpoint snap, relative to the cell size
GRID_M = 8  # per-cell sample grid for classification
_BISECT_ITERS = 48


# ----------------------------------------------------------------------
# root finding
# ----------------------------------------------------------------------

def bisect_segments(p0: np.ndarray, p1: np.ndarray, levelset: LevelSet,
                    iters: int = _BISECT_ITERS) -> np.ndarray:
    """Vectorized bisection roots on segments with a sign change."""
    a = np.atleast_2d(p0).astype(float).copy()
    b = np.atleast_2d(p1).astype(float).copy()
    fa = levelset.value(a)
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = levelset.value(m)
        move_a = fa * fm > 0
        a[move_a] = m[move_a]
        fa[move_a] = fm[move_a]
        b[~move_a] = m[~move_a]
    return 0.5 * (a + b)


def intersect_edge(p0, p1, levelset: LevelSet) -> np.ndarray:
    """Root of the level set on the segment p0-p1.

    Requires a strict sign change between the endpoints.
    """
    p0 = np.asarray(p0, dtype=float)
    p1 = np.asarray(p1, dtype=float)
    v = levelset.value(np.vstack([p0, p1]))
    if not v[0] * v[1] < 0:
        raise GeometryError("no sign change on edge")
    return bisect_segments(p0[None, :], p1[None, :], levelset)[0]


def project_onto_interface(points: np.ndarray, dirs: np.ndarray,
                           levelset: LevelSet, spans: np.ndarray,
                           nscan: int = 16) -> np.ndarray:
    """Move each point to the zero set along its direction.

    Scans 2*nscan+1 samples on [-span, span] per point for the sign-change
    bracket nearest the origin, then bisects.  Points without a nearby
    crossing are returned unchanged (they are already on a chord and only
    lose geometric, not algebraic, accuracy).
    """
    points = np.atleast_2d(points).astype(float)
    m = len(points)
    ts = spans[:, None] * np.linspace(-1.0, 1.0, 2 * nscan + 1)[None, :]
    probe = points[:, None, :] + ts[:, :, None] * dirs[:, None, :]
    vals = levelset.value(probe.reshape(-1, 2)).reshape(m, -1)
    neg = np.signbit(vals)
    change = neg[:, 1:] != neg[:, :-1]
    mid_dist = np.abs(0.5 * (ts[:, 1:] + ts[:, :-1]))
    mid_dist[~change] = np.inf
    k = np.argmin(mid_dist, axis=1)
    rows = np.arange(m)
    has_root = np.isfinite(mid_dist[rows, k])

    ta = ts[rows, k]
    tb = ts[rows, k + 1]
    fa = vals[rows, k]
    for _ in range(_BISECT_ITERS):
        tm = 0.5 * (ta + tb)
        fm = levelset.value(points + tm[:, None] * dirs)
        move_a = fa * fm > 0
        ta = np.where(move_a, tm, ta)
        fa = np.where(move_a, fm, fa)
        tb = np.where(move_a, tb, tm)
    t = np.where(has_root, 0.5 * (ta + tb), 0.0)
    return points + t[:, None] * dirs


def build_polyline(a, b, levelset: LevelSet, r: int) -> np.ndarray:
    """Polyline with 2**r chords from a to b along the interface.

    Each refinement level projects the current chord midpoints onto the
    zero set along the level-set gradient.
    """
    pts = np.vstack([np.asarray(a, float), np.asarray(b, float)])
    for _ in range(r):
        mids = 0.5 * (pts[:-1] + pts[1:])
        spans = np.linalg.norm(pts[1:] - pts[:-1], axis=1)
        grad = levelset.gradient(mids)
        norms = np.linalg.norm(grad, axis=1, keepdims=True)
        dirs = np.divide(grad, np.maximum(norms, 1e-300))
        proj = project_onto_interface(mids, dirs, levelset, spans)
        out = np.empty((2 * len(pts) - 1, 2))
        out[0::2] = pts
        out[1::2] = proj
        pts = out
    return pts


# ----------------------------------------------------------------------
# polygon triangulation
# ----------------------------------------------------------------------

def _shoelace(poly: np.ndarray) -> float:
    # center first; the raw formula loses ~n*eps of absolute accuracy
    x = poly[:, 0] - poly[:, 0].mean()
    y = poly[:, 1] - poly[:, 1].mean()
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _fan_triangles(poly: np.ndarray, anchor: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    nxt = np.roll(poly, -1, axis=0)
    e1 = poly - anchor
    e2 = nxt - anchor
    signed = 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    tris = np.stack([np.broadcast_to(anchor, poly.shape), poly, nxt], axis=1)
    return tris, signed


def _ear_clip(poly: np.ndarray, eps_area: float) -> np.ndarray:
    ids = list(range(len(poly)))
    tris: list[np.ndarray] = []
    while len(ids) > 3:
        clipped = False
        n = len(ids)
        for j in range(n):
            ia, ib, ic = ids[j - 1], ids[j], ids[(j + 1) % n]
            a, b, c = poly[ia], poly[ib], poly[ic]
            area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
            if area2 < -2.0 * eps_area:
                continue  # reflex corner
            if area2 <= 2.0 * eps_area:
                ids.pop(j)  # collinear vertex, nothing to emit
                clipped = True
                break
            others = [k for k in ids if k not in (ia, ib, ic)]
            if others and _any_strictly_inside(a, b, c, poly[others], eps_area):
                continue
            tris.append(np.stack([a, b, c]))
            ids.pop(j)
            clipped = True
            break
        if not clipped:
            raise GeometryError("degenerate triangle: ear clipping failed")
    a, b, c = poly[ids[0]], poly[ids[1]], poly[ids[2]]
    area2 = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if area2 > 2.0 * eps_area:
        tris.append(np.stack([a, b, c]))
    return np.array(tris) if tris else np.zeros((0, 3, 2))


def _any_strictly_inside(a, b, c, pts: np.ndarray, eps_area: float) -> bool:
    def side(p, q, x):
        return (q[0] - p[0]) * (x[:, 1] - p[1]) - (q[1] - p[1]) * (x[:, 0] - p[0])

    s1 = side(a, b, pts)
    s2 = side(b, c, pts)
    s3 = side(c, a, pts)
    tol = 2.0 * eps_area
    return bool(np.any((s1 > tol) & (s2 > tol) & (s3 > tol)))


def triangulate_polygon(poly: np.ndarray, cell_area: float,
                        extra_anchors: tuple = ()) -> np.ndarray:
    """Partition a simple CCW polygon into positively oriented triangles.

    Fans from an interior anchor when the polygon is star-shaped with
    respect to it: first the vertex centroid, then any caller-provided
    anchors (a point on the interface arc rescues the sub-cells that are
    weakly concave along the arc).  Genuinely non-star-shaped polygons
    (corner cells of square-like interfaces) fall back to ear clipping.
    Triangles below 1e-14 of the cell area are dropped.
    """
    eps_area = 1e-14 * cell_area
    if _shoelace(poly) < 0:
        poly = poly[::-1]
    target = _shoelace(poly)
    for anchor in (poly.mean(axis=0), *extra_anchors):
        tris, signed = _fan_triangles(poly, anchor)
        if np.all(signed >= -eps_area) and abs(signed.sum() - target) <= 1e-12 * cell_area:
            return tris[signed > eps_area]
    tris = _ear_clip(poly, eps_area)
    total = triangle_areas(tris).sum() if len(tris) else 0.0
    if abs(total - target) > 1e-11 * cell_area:
        raise GeometryError("degenerate triangle: sub-cell area mismatch")
    return tris


# ----------------------------------------------------------------------
# faces
# ----------------------------------------------------------------------

@dataclass
class FaceCut:
    fid: int
    cut: bool
    point: np.ndarray | None
    segments: dict[int, np.ndarray]  # side -> (2, 2) endpoints

    def sides(self) -> tuple[int, ...]:
        return tuple(sorted(self.segments))


def _snapped_signs(values: np.ndarray, dist_est: np.ndarray, tol: float) -> np.ndarray:
    sign = np.where(values > 0, 1, -1)
    sign[dist_est <= tol] = 0
    return sign


def classify_faces(mesh: CartesianMesh, levelset: LevelSet,
                   vertex_sign: np.ndarray) -> list[FaceCut]:
    nf = mesh.n_faces
    ends = np.array([mesh.face_endpoints(f) for f in range(nf)])
    p0, p1 = ends[:, 0], ends[:, 1]
    n = mesh.n

    # vertex ids of the endpoints, consistent with the cell-corner table
    def vids(pts):
        s = mesh.cell_size
        ix = np.rint(pts[:, 0] / s).astype(int)
        iy = np.rint(pts[:, 1] / s).astype(int)
        return iy * (n + 1) + ix

    s0 = vertex_sign[vids(p0)]
    s1 = vertex_sign[vids(p1)]

    # guard against several crossings of one face
    tpar = np.linspace(0.0, 1.0, 17)[1:-1]
    probe = p0[:, None, :] + tpar[None, :, None] * (p1 - p0)[:, None, :]
    inner = np.signbit(levelset.value(probe.reshape(-1, 2)).reshape(nf, -1))
    full = np.concatenate([(s0 < 0)[:, None], inner, (s1 < 0)[:, None]], axis=1)
    flips = np.count_nonzero(full[:, 1:] != full[:, :-1], axis=1)

    crossed = s0 * s1 < 0
    if np.any(flips[~crossed] > 1) or np.any(flips[crossed] > 1):
        raise GeometryError("disconnected cut: face crossed more than once")

    roots = np.zeros((nf, 2))
    if np.any(crossed):
        roots[crossed] = bisect_segments(p0[crossed], p1[crossed], levelset)

    faces = []
    mids = 0.5 * (p0 + p1)
    vmid = levelset.value(mids)
    for f in range(nf):
        if crossed[f]:
            x = roots[f]
            segs = {}
            segs[1 if s0[f] < 0 else 2] = np.vstack([p0[f], x])
            segs[1 if s1[f] < 0 else 2] = np.vstack([x, p1[f]])
            faces.append(FaceCut(f, True, x, segs))
        else:
            ssum = int(s0[f]) + int(s1[f])
            if ssum != 0:
                side = 1 if ssum < 0 else 2
            elif abs(vmid[f]) > 0:
                side = 1 if vmid[f] < 0 else 2
            else:
                raise GeometryError("face lies on the interface")
            faces.append(FaceCut(f, False, None, {side: ends[f]}))
    return faces


# ----------------------------------------------------------------------
# cells
# ----------------------------------------------------------------------

@dataclass
class CellCut:
    cid: int
    kind: str
    side: int | None  # containing side (uncut) or failing side iota (ill-cut)
    polyline: np.ndarray | None = None
    tris: dict[int, np.ndarray] = field(default_factory=dict)
    area: dict[int, float] = field(default_factory=dict)
    barycenter: dict[int, np.ndarray] = field(default_factory=dict)
    rho: dict[int, float] = field(default_factory=dict)

    @property
    def is_cut(self) -> bool:
        return self.kind != UNCUT

    @property
    def iota(self) -> int:
        if self.kind != ILL_CUT:
            raise ValueError("iota is defined for ill-cut cells only")
        return self.side  # type: ignore[return-value]

    def sides(self) -> tuple[int, ...]:
        return (1, 2) if self.is_cut else (self.side,)  # type: ignore[return-value]


def _incenters(tris: np.ndarray) -> np.ndarray:
    a = np.linalg.norm(tris[:, 2] - tris[:, 1], axis=1)
    b = np.linalg.norm(tris[:, 0] - tris[:, 2], axis=1)
    c = np.linalg.norm(tris[:, 1] - tris[:, 0], axis=1)
    w = a + b + c
    return (
        a[:, None] * tris[:, 0] + b[:, None] * tris[:, 1] + c[:, None] * tris[:, 2]
    ) / w[:, None]


def _rho_estimate(levelset: LevelSet, box, tris: np.ndarray,
                  grid_pts: np.ndarray) -> float:
    """Largest sampled radius of a ball inside the sub-cell.

    Samples sub-triangulation vertices, triangle incenters, and the
    classification grid points on this side; the radius at a sample is the
    smaller of the distance to the cell boundary and the first-order
    distance to the interface.
    """
    x0, y0, x1, y1 = box
    samples = [tris.reshape(-1, 2), _incenters(tris)]
    if len(grid_pts):
        samples.append(grid_pts)
    pts = np.vstack(samples)
    d_box = np.minimum.reduce(
        [pts[:, 0] - x0, x1 - pts[:, 0], pts[:, 1] - y0, y1 - pts[:, 1]]
    )
    d_gamma = levelset.distance_estimate(pts)
    return float(np.max(np.minimum(np.maximum(d_box, 0.0), d_gamma)))


def _classify_cut_cell(mesh: CartesianMesh, levelset: LevelSet, cid: int,
                       face_cuts: list[FaceCut], corner_sign: np.ndarray,
                       theta: float, r: int,
                       grid_pts: np.ndarray, grid_neg: np.ndarray) -> CellCut:
    cell_area = mesh.cell_size**2
    corners = mesh.cell_vertices(cid)
    left, right, bottom, top = mesh.cell_faces(cid)
    walk_faces = (bottom, right, top, left)  # CCW edge order
    reverse = (False, False, True, True)

    entries: list[tuple[str, np.ndarray, int]] = []
    ncross = 0
    for j in range(4):
        entries.append(("corner", corners[j], int(corner_sign[j])))
        fc = face_cuts[walk_faces[j]]
        if fc.cut:
            entries.append(("cross", fc.point, 0))
            ncross += 1
    if ncross != 2:
        raise GeometryError("disconnected cut: expected two boundary crossings")

    cross_pos = [j for j, e in enumerate(entries) if e[0] == "cross"]
    k1, k2 = cross_pos
    a, b = entries[k1][1], entries[k2][1]
    chain1 = entries[k1 + 1:k2]
    chain2 = entries[k2 + 1:] + entries[:k1]
    if not chain1 or not chain2:
        raise GeometryError("disconnected cut: crossing at a cell corner")

    polyline = build_polyline(a, b, levelset, r)

    def chain_side(chain):
        signs = [s for kind, _, s in chain if kind == "corner" and s != 0]
        if not signs or len(set(signs)) != 1:
            raise GeometryError("disconnected cut: ambiguous sub-cell")
        return 1 if signs[0] < 0 else 2

    side1 = chain_side(chain1)
    side2 = chain_side(chain2)
    if side1 == side2:
        raise GeometryError("disconnected cut: both chains on one side")

    interior = polyline[1:-1]
    polys = {
        # chain1 runs a -> b, close it with the polyline walked b -> a
        side1: np.vstack([a[None, :], [p for _, p, _ in chain1], b[None, :],
                          interior[::-1]]),
        side2: np.vstack([b[None, :], [p for _, p, _ in chain2], a[None, :],
                          interior]),
    }

    cc = CellCut(cid, WELL_CUT, None, polyline=polyline)
    box = mesh.cell_box(cid)
    chain_anchors = {
        # chain corners rescue the sub-cells that are concave along the arc
        side1: tuple(p for _, p, _ in chain1),
        side2: tuple(p for _, p, _ in chain2),
    }
    for i in (1, 2):
        tris = triangulate_polygon(polys[i], cell_area,
                                   extra_anchors=chain_anchors[i])
        if len(tris) == 0:
            raise GeometryError("degenerate triangle: empty sub-cell")
        areas = triangle_areas(tris)
        cc.tris[i] = tris
        cc.area[i] = float(areas.sum())
        cc.barycenter[i] = (tris.mean(axis=1) * areas[:, None]).sum(axis=0) / cc.area[i]
        gpts = grid_pts[grid_neg] if i == 1 else grid_pts[~grid_neg]
        cc.rho[i] = _rho_estimate(levelset, box, tris, gpts)

    tau = theta * 0.5 * mesh.cell_size  # theta times the cell inradius
    bad = [i for i in (1, 2) if cc.rho[i] < tau]
    if len(bad) == 2:
        raise GeometryError("both sides ill-cut: mesh too coarse for this theta")
    if len(bad) == 1:
        cc.kind = ILL_CUT
        cc.side = bad[0]
    return cc


def build_cut_mesh(mesh: CartesianMesh, levelset: LevelSet, theta: float = 0.3,
                   r: int = 8, grid: int = GRID_M) -> "CutMesh":
    n = mesh.n
    s = mesh.cell_size
    snap = SNAP_REL * s

    # shared vertex table keeps face and cell sign decisions consistent
    vx = np.arange(n + 1) * s
    VX, VY = np.meshgrid(vx, vx, indexing="xy")
    vpts = np.column_stack([VX.ravel(), VY.ravel()])
    vertex_sign = _snapped_signs(
        levelset.value(vpts), levelset.distance_estimate(vpts), snap
    )

    face_cuts = classify_faces(mesh, levelset, vertex_sign)

    cell_has_crossing = np.zeros(mesh.n_cells, dtype=bool)
    for fc in face_cuts:
        if fc.cut:
            for c in mesh.face_cells(fc.fid):
                if c >= 0:
                    cell_has_crossing[c] = True

    # interior sample grid of every cell in one sweep
    offs = (np.arange(grid) + 0.5) / grid * s
    OX, OY = np.meshgrid(offs, offs, indexing="xy")
    cell_x0 = (np.arange(n) * s)[None, :].repeat(n, axis=0).ravel()
    cell_y0 = (np.arange(n) * s)[:, None].repeat(n, axis=1).ravel()
    gx = cell_x0[:, None] + OX.ravel()[None, :]
    gy = cell_y0[:, None] + OY.ravel()[None, :]
    gpts = np.stack([gx, gy], axis=2)  # (ncells, grid*grid, 2)
    gneg = levelset.value(gpts.reshape(-1, 2)).reshape(mesh.n_cells, -1) < 0

    def corner_vids(cid):
        ix, iy = mesh.cell_index(cid)
        return [
            iy * (n + 1) + ix,
            iy * (n + 1) + ix + 1,
            (iy + 1) * (n + 1) + ix + 1,
            (iy + 1) * (n + 1) + ix,
        ]

    cells: list[CellCut] = []
    for cid in range(mesh.n_cells):
        csign = vertex_sign[corner_vids(cid)]
        neg = gneg[cid]
        if not cell_has_crossing[cid]:
            has_neg = bool(neg.any() or (csign < 0).any())
            has_pos = bool((~neg).any() or (csign > 0).any())
            if has_neg and has_pos:
                raise GeometryError(
                    "disconnected cut: interface loop inside an uncrossed cell"
                )
            side = 1 if has_neg else 2
            cc = CellCut(cid, UNCUT, side)
            cc.area[side] = s * s
            cc.barycenter[side] = mesh.cell_center(cid)
            cc.rho[side] = 0.5 * s
            cells.append(cc)
        else:
            cells.append(
                _classify_cut_cell(mesh, levelset, cid, face_cuts, csign,
                                   theta, r, gpts[cid], neg)
            )

    pairing = build_pairing(mesh, cells)
    return CutMesh(mesh, levelset, theta, r, cells, face_cuts, pairing)


# ----------------------------------------------------------------------
# pairing
# ----------------------------------------------------------------------

@dataclass(frozen=True)
class PairingMap:
    partner: dict[int, int]
    inverse: dict[int, tuple[tuple[int, int], ...]]  # T -> ((side, S), ...)

    def donors(self, cid: int, i: int) -> list[int]:
        """Ill-cut cells whose side-i polynomials extend from cell cid."""
        return [S for side, S in self.inverse.get(cid, ()) if side == i]

    def __len__(self) -> int:
        return len(self.partner)


def _admissible(cells, T: int, i: int) -> bool:
    c = cells[T]
    if c.kind == UNCUT:
        return c.side == i
    if c.kind == WELL_CUT:
        return True
    return c.iota != i


def build_pairing(mesh: CartesianMesh, cells) -> PairingMap:
    """Assign every ill-cut cell a partner with a good sub-cell on its bad side.

    Candidates live in the first neighborhood layer; preference order is
    uncut-in-the-right-side, then well-cut, then ill-cut on the opposite
    side, with ties broken by the larger borrowed sub-cell area and then
    the smaller cell id.  Cells failing on side 2 first receive the
    reciprocal partner of the step pairing them from side 1, which keeps
    mutual pairs together.
    """
    ill1 = sorted(c.cid for c in cells if c.kind == ILL_CUT and c.iota == 1)
    ill2 = sorted(c.cid for c in cells if c.kind == ILL_CUT and c.iota == 2)
    partner: dict[int, int] = {}

    def choose(S: int, i: int) -> int:
        rank = {UNCUT: 0, WELL_CUT: 1, ILL_CUT: 2}
        cands = [
            int(T) for T in mesh.neighborhood(S, 1)
            if T != S and _admissible(cells, int(T), i)
        ]
        if not cands:
            raise PairingError(f"pairing failed for cell {S}")
        return min(cands, key=lambda T: (rank[cells[T].kind], -cells[T].area[i], T))

    for S in ill1:
        partner[S] = choose(S, 1)
    for T in ill2:
        donors = sorted(S for S in ill1 if partner[S] == T)
        if donors:
            partner[T] = donors[0]
    for T in ill2:
        if T not in partner:
            partner[T] = choose(T, 2)

    inverse: dict[int, list[tuple[int, int]]] = {}
    for S, T in sorted(partner.items()):
        i = cells[S].iota
        assert _admissible(cells, T, i)
        inverse.setdefault(T, []).append((i, S))
    return PairingMap(partner, {T: tuple(v) for T, v in inverse.items()})


# ----------------------------------------------------------------------
# assembled view
# ----------------------------------------------------------------------

@dataclass
class CutMesh:
    mesh: CartesianMesh
    levelset: LevelSet
    theta: float
    r: int
    cells: list[CellCut]
    faces: list[FaceCut]
    pairing: PairingMap

    def sides(self) -> list[tuple[int, int]]:
        """All sub-cells (cid, i), the discretization support."""
        out = []
        for c in self.cells:
            out.extend((c.cid, i) for i in c.sides())
        return out

    def ok_sides(self) -> list[tuple[int, int]]:
        return [(cid, i) for cid, i in self.sides() if not self.is_ko(cid, i)]

    def ko_sides(self) -> list[tuple[int, int]]:
        return [(cid, i) for cid, i in self.sides() if self.is_ko(cid, i)]

    def is_ko(self, cid: int, i: int) -> bool:
        c = self.cells[cid]
        return c.kind == ILL_CUT and c.iota == i

    def cut_cells(self) -> list[int]:
        return [c.cid for c in self.cells if c.is_cut]

    def subfaces(self, cid: int, i: int):
        """Sub-faces of cell cid on side i as (fid, endpoints, outward normal)."""
        out = []
        for fid in self.mesh.cell_faces(cid):
            seg = self.faces[fid].segments.get(i)
            if seg is not None:
                out.append((fid, seg, self.mesh.outward_normal(cid, fid)))
        return out

    def partner_of(self, cid: int) -> int | None:
        return self.pairing.partner.get(cid)
