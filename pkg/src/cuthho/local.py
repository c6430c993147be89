"""Per-cell discrete operators on a cut mesh.

For every sub-cell (T, i) that is uncut, well-cut, or the good side of an
ill-cut cell, the gradient G lives in the vector polynomials of degree k
on T^i and is defined against test polynomials q by

    (G, q) = (grad u_Ti, q)_Ti + (u_dTi - u_Ti, q.n_T)_dTi
             - [i == 1] (u_T1 - u_T2, q.n_G)_TG
             + sum over paired ill-cut cells S of
               (u_dSi - u_Si, q+.n_S)_dSi - [i == 1] (u_S1 - u_S2, q+.n_G)_SG

where q+ is the same polynomial evaluated on the neighbor (no
re-expansion).  On the failing side of an ill-cut cell the reconstruction
degenerates to the plain broken gradient of the cell polynomial.

Dof blocks are addressed by keys ('c', cid, side) and ('f', fid, side);
all operators are returned together with their ordered key stencils.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, solve

from .basis import CellBasis, FaceBasis, space_dimension
from .errors import NumericalError
from .geometry import UNCUT, CutMesh
from .quadrature import (
    box_rule,
    gauss_1d,
    map_to_triangles,
    points_for_degree,
    triangle_rule,
)

Key = tuple[str, int, int]

_MASS_COND_LIMIT = 1e14
_TABLE_POINT_BUDGET = 400_000


class ScaledCholesky:
    """Cholesky solve with Jacobi preconditioning.

    Monomial Gram matrices on thin sliver sub-cells are ill-conditioned
    purely through the row/column scales; factoring D^-1/2 M D^-1/2
    instead keeps the solve accurate without changing the basis.  The
    conditioning guard applies to the scaled matrix, so it flags genuine
    degeneracy rather than scale.
    """

    def __init__(self, m: np.ndarray, what: str):
        d = np.diag(m).copy()
        if np.any(d <= 0.0) or not np.all(np.isfinite(d)):
            raise NumericalError(f"singular mass matrix: {what}")
        self.d = np.sqrt(d)
        self.ms = m / np.outer(self.d, self.d)
        ev = np.linalg.eigvalsh(self.ms)
        if ev[0] <= 0.0 or ev[-1] / ev[0] > _MASS_COND_LIMIT:
            raise NumericalError(f"singular mass matrix: {what}")
        self.fac = cho_factor(self.ms)

    def solve(self, b: np.ndarray) -> np.ndarray:
        scale = self.d if b.ndim == 1 else self.d[:, None]
        bs = b / scale
        y = cho_solve(self.fac, bs)
        y += cho_solve(self.fac, bs - self.ms @ y)  # one refinement step
        return y / scale


@dataclass
class VolumeTables:
    """Volume quadrature of one sub-cell with its basis evaluations."""

    pts: np.ndarray
    w: np.ndarray
    ek: np.ndarray  # degree-k values, (npts, ng)
    ek1: np.ndarray  # degree-(k+1) values, (npts, nc)
    dek1: np.ndarray  # degree-(k+1) gradients, (npts, nc, 2)


@dataclass
class Stencil:
    """Ordered dof blocks with their local column ranges."""

    keys: list[Key]
    offsets: dict[Key, int]
    width: int

    @classmethod
    def build(cls, keys_sizes) -> "Stencil":
        keys: list[Key] = []
        offsets: dict[Key, int] = {}
        width = 0
        for key, size in keys_sizes:
            if key in offsets:
                continue
            offsets[key] = width
            keys.append(key)
            width += size
        return cls(keys, offsets, width)

    def cols(self, key: Key, size: int) -> slice:
        off = self.offsets[key]
        return slice(off, off + size)


class LocalOperators:
    def __init__(self, cutmesh: CutMesh, k: int):
        self.cm = cutmesh
        self.k = k
        self.nc = space_dimension(k + 1)  # cell polynomial block
        self.ng = space_dimension(k)  # scalar reconstruction space
        self.nf = k + 1  # face polynomial block
        degree = 2 * k + 3
        self._tri_ref = triangle_rule(degree)
        self._gauss = gauss_1d(points_for_degree(degree))
        self._box_n = points_for_degree(degree)
        self._cell_bases: dict[tuple[int, int], CellBasis] = {}
        self._tables: OrderedDict[tuple[int, int], VolumeTables] = OrderedDict()
        self._tables_points = 0
        self._iface_cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        self._mass_cache: dict[tuple[int, int], tuple] = {}

    # -- geometry-backed ingredients ---------------------------------

    def cell_basis(self, cid: int, i: int) -> CellBasis:
        """Degree k+1 basis of sub-cell (cid, i).

        Centered at the sub-cell barycenter and scaled by half the cell
        diameter; the failing side of an ill-cut cell is centered and
        scaled on the region merged with its partner, where its
        polynomial is actually used.
        """
        key = (cid, i)
        if key not in self._cell_bases:
            cm = self.cm
            c = cm.cells[cid]
            scale = 0.5 * cm.mesh.h
            if cm.is_ko(cid, i):
                t = cm.partner_of(cid)
                ct = cm.cells[t]
                a_s, a_t = c.area[i], ct.area[i]
                center = (a_s * c.barycenter[i] + a_t * ct.barycenter[i]) / (a_s + a_t)
                bs = cm.mesh.cell_box(cid)
                bt = cm.mesh.cell_box(t)
                dx = max(bs[2], bt[2]) - min(bs[0], bt[0])
                dy = max(bs[3], bt[3]) - min(bs[1], bt[1])
                scale = 0.5 * float(np.hypot(dx, dy))
            else:
                center = c.barycenter[i]
            self._cell_bases[key] = CellBasis(
                self.k + 1, (float(center[0]), float(center[1])), scale
            )
        return self._cell_bases[key]

    def cell_basis_k(self, cid: int, i: int) -> CellBasis:
        return self.cell_basis(cid, i).lower(self.k)

    def face_basis(self, fid: int, side: int) -> FaceBasis:
        seg = self.cm.faces[fid].segments[side]
        return FaceBasis(self.k, tuple(seg[0]), tuple(seg[1]))

    def volume_quadrature(self, cid: int, i: int):
        t = self.volume_tables(cid, i)
        return t.pts, t.w

    def volume_tables(self, cid: int, i: int) -> VolumeTables:
        """Cached quadrature and basis tables of sub-cell (cid, i)."""
        key = (cid, i)
        hit = self._tables.get(key)
        if hit is not None:
            self._tables.move_to_end(key)
            return hit
        c = self.cm.cells[cid]
        if c.kind == UNCUT:
            pts, w = box_rule(*self.cm.mesh.cell_box(cid), self._box_n)
        else:
            pts, w = map_to_triangles(c.tris[i], *self._tri_ref)
        basis = self.cell_basis(cid, i)
        hit = VolumeTables(pts, w, self.cell_basis_k(cid, i).eval(pts),
                           basis.eval(pts), basis.grad(pts))
        self._tables[key] = hit
        self._tables_points += len(pts)
        while self._tables_points > _TABLE_POINT_BUDGET and len(self._tables) > 1:
            _, old = self._tables.popitem(last=False)
            self._tables_points -= len(old.pts)
        return hit

    def interface_quadrature(self, cid: int):
        """Points, weights, and pointwise unit normals on the cell's polyline."""
        hit = self._iface_cache.get(cid)
        if hit is None:
            poly = self.cm.cells[cid].polyline
            t, gw = self._gauss
            p0, p1 = poly[:-1], poly[1:]
            mid = 0.5 * (p0 + p1)
            half = 0.5 * (p1 - p0)
            pts = (mid[:, None, :] + t[None, :, None] * half[:, None, :]).reshape(-1, 2)
            lengths = np.linalg.norm(p1 - p0, axis=1)
            w = (0.5 * lengths[:, None] * gw[None, :]).ravel()
            normals = self.cm.levelset.normals(pts)
            if len(self._iface_cache) > 64:
                self._iface_cache.clear()
            hit = (pts, w, normals)
            self._iface_cache[cid] = hit
        return hit

    def face_quadrature(self, seg: np.ndarray):
        t, gw = self._gauss
        p0, p1 = seg[0], seg[1]
        length = float(np.linalg.norm(p1 - p0))
        pts = 0.5 * (p0 + p1) + 0.5 * np.outer(t, p1 - p0)
        return pts, 0.5 * length * gw

    def mass_factor(self, cid: int, i: int) -> ScaledCholesky:
        """Factorized degree-k scalar mass matrix on (cid, i)."""
        key = (cid, i)
        hit = self._mass_cache.get(key)
        if hit is None:
            t = self.volume_tables(cid, i)
            m = t.ek.T @ (t.w[:, None] * t.ek)
            try:
                hit = ScaledCholesky(m, f"sub-cell ({cid}, {i})")
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise NumericalError(
                    f"singular mass matrix: sub-cell ({cid}, {i})"
                ) from exc
            if len(self._mass_cache) > 128:
                self._mass_cache.clear()
            self._mass_cache[key] = hit
        return hit

    # -- gradient reconstruction --------------------------------------

    def reconstruction_stencil(self, cid: int, i: int) -> Stencil:
        cm = self.cm
        ks = [(("c", cid, i), self.nc)]
        for fid, _, _ in cm.subfaces(cid, i):
            ks.append((("f", fid, i), self.nf))
        if cm.cells[cid].is_cut and i == 1:
            ks.append((("c", cid, 2), self.nc))
        for s in cm.pairing.donors(cid, i):
            ks.append((("c", s, i), self.nc))
            for fid, _, _ in cm.subfaces(s, i):
                ks.append((("f", fid, i), self.nf))
            if i == 1:
                ks.append((("c", s, 2), self.nc))
        return Stencil.build(ks)

    def gradient_rhs(self, cid: int, i: int) -> tuple[np.ndarray, Stencil]:
        """Moment matrix B with (B v)_a = (G(v), q_a) for the stencil dofs.

        Rows 0..ng-1 test against (phi_m, 0), rows ng.. against (0, phi_m).
        """
        cm = self.cm
        ng, nc, nf = self.ng, self.nc, self.nf
        st = self.reconstruction_stencil(cid, i)
        basis_k = self.cell_basis_k(cid, i)
        basis = self.cell_basis(cid, i)
        b = np.zeros((2 * ng, st.width))

        # (grad u_Ti, q)
        t = self.volume_tables(cid, i)
        ccols = st.cols(("c", cid, i), nc)
        b[0:ng, ccols] += t.ek.T @ (t.w[:, None] * t.dek1[:, :, 0])
        b[ng:, ccols] += t.ek.T @ (t.w[:, None] * t.dek1[:, :, 1])

        # (u_dTi - u_Ti, q.n_T)_dTi and donor faces with extended q
        for owner in [cid, *cm.pairing.donors(cid, i)]:
            obasis = self.cell_basis(owner, i)
            ocols = st.cols(("c", owner, i), nc)
            for fid, seg, nrm in cm.subfaces(owner, i):
                fpts, fw = self.face_quadrature(seg)
                phif = basis_k.eval(fpts)  # q (extended when owner != cid)
                chi = self.face_basis(fid, i).eval(fpts)
                psi = obasis.eval(fpts)
                fcols = st.cols(("f", fid, i), nf)
                for comp, rows in ((0, slice(0, ng)), (1, slice(ng, 2 * ng))):
                    wn = fw * nrm[comp]
                    b[rows, fcols] += phif.T @ (wn[:, None] * chi)
                    b[rows, ocols] -= phif.T @ (wn[:, None] * psi)
            # jump across the interface, only tested on side 1
            if i == 1 and cm.cells[owner].is_cut:
                ipts, iw, inrm = self.interface_quadrature(owner)
                phii = basis_k.eval(ipts)
                psi1 = self.cell_basis(owner, 1).eval(ipts)
                psi2 = self.cell_basis(owner, 2).eval(ipts)
                c2cols = st.cols(("c", owner, 2), nc)
                for comp, rows in ((0, slice(0, ng)), (1, slice(ng, 2 * ng))):
                    wn = iw * inrm[:, comp]
                    b[rows, st.cols(("c", owner, 1), nc)] -= phii.T @ (wn[:, None] * psi1)
                    b[rows, c2cols] += phii.T @ (wn[:, None] * psi2)
        return b, st

    def gradient_reconstruction(self, cid: int, i: int):
        """Reconstruction matrix Ghat (coefficients of G per stencil dof)."""
        b, st = self.gradient_rhs(cid, i)
        fac = self.mass_factor(cid, i)
        ghat = np.vstack([fac.solve(b[0 : self.ng]), fac.solve(b[self.ng :])])
        return ghat, b, st

    def gradient_plain(self, cid: int, i: int):
        """Broken gradient on the failing side of an ill-cut cell."""
        dx, dy = self.cell_basis(cid, i).derivative_matrices()
        d = np.vstack([dx, dy])
        st = Stencil.build([(("c", cid, i), self.nc)])
        return d, st

    def stiffness_ok(self, cid: int, i: int, kappa_i: float):
        """kappa_i (G, G)_Ti over the stencil, plus B and Ghat for reuse."""
        ghat, b, st = self.gradient_reconstruction(cid, i)
        a = kappa_i * (b[0 : self.ng].T @ ghat[0 : self.ng] + b[self.ng :].T @ ghat[self.ng :])
        return 0.5 * (a + a.T), ghat, b, st

    def stiffness_ko(self, cid: int, i: int, kappa_i: float):
        d, st = self.gradient_plain(cid, i)
        t = self.volume_tables(cid, i)
        m = t.ek.T @ (t.w[:, None] * t.ek)
        a = kappa_i * (d[0 : self.ng].T @ m @ d[0 : self.ng]
                       + d[self.ng :].T @ m @ d[self.ng :])
        return 0.5 * (a + a.T), st

    # -- stabilizations ------------------------------------------------

    def stab_circ(self, cid: int, i: int, kappa_i: float):
        """Lehrenfeld-Schoberl penalty kappa/h |Pi_F(v_T) - v_F|^2 on dTi."""
        cm = self.cm
        nc, nf = self.nc, self.nf
        basis = self.cell_basis(cid, i)
        ks = [(("c", cid, i), nc)]
        faces = cm.subfaces(cid, i)
        ks += [(("f", fid, i), nf) for fid, _, _ in faces]
        st = Stencil.build(ks)
        a = np.zeros((st.width, st.width))
        for fid, seg, _ in faces:
            fpts, fw = self.face_quadrature(seg)
            chi = self.face_basis(fid, i).eval(fpts)
            psi = basis.eval(fpts)
            gram = chi.T @ (fw[:, None] * chi)
            cmat = chi.T @ (fw[:, None] * psi)
            try:
                proj = solve(gram, cmat, assume_a="pos")
            except np.linalg.LinAlgError as exc:  # pragma: no cover
                raise NumericalError(f"singular face Gram matrix on face {fid}") from exc
            rmat = np.zeros((nf, st.width))
            rmat[:, st.cols(("c", cid, i), nc)] = proj
            rmat[:, st.cols(("f", fid, i), nf)] -= np.eye(nf)
            a += rmat.T @ gram @ rmat
        a *= kappa_i / self.cm.mesh.h
        return 0.5 * (a + a.T), st

    def stab_gamma(self, cid: int, kappa1: float):
        """Interface jump penalty kappa1/h |v_T1 - v_T2|^2 on TG."""
        nc = self.nc
        st = Stencil.build([(("c", cid, 1), nc), (("c", cid, 2), nc)])
        pts, w, _ = self.interface_quadrature(cid)
        jmp = np.hstack([self.cell_basis(cid, 1).eval(pts),
                         -self.cell_basis(cid, 2).eval(pts)])
        a = (kappa1 / self.cm.mesh.h) * (jmp.T @ (w[:, None] * jmp))
        return 0.5 * (a + a.T), st

    def stab_pairing(self, cid: int, i: int, donor: int, kappa_i: float, eta: float):
        """Extension penalty eta kappa/h^2 |v_Si - v_Ti+|^2 over T^i."""
        nc = self.nc
        st = Stencil.build([(("c", donor, i), nc), (("c", cid, i), nc)])
        t = self.volume_tables(cid, i)
        diff = np.hstack([self.cell_basis(donor, i).eval(t.pts), -t.ek1])
        a = (eta * kappa_i / self.cm.mesh.h**2) * (diff.T @ (t.w[:, None] * diff))
        return 0.5 * (a + a.T), st

    # -- data-dependent pieces ----------------------------------------

    def lifting_coefficients(self, cid: int, g_d) -> np.ndarray:
        """Coefficients of the lifting of interface data into P^k(T^1)^2."""
        cm = self.cm
        basis_k = self.cell_basis_k(cid, 1)
        lm = np.zeros(2 * self.ng)
        for owner in [cid, *cm.pairing.donors(cid, 1)]:
            if not cm.cells[owner].is_cut:
                continue
            pts, w, nrm = self.interface_quadrature(owner)
            g = g_d(pts)
            phi = basis_k.eval(pts)
            lm[0 : self.ng] += phi.T @ (w * g * nrm[:, 0])
            lm[self.ng :] += phi.T @ (w * g * nrm[:, 1])
        fac = self.mass_factor(cid, 1)
        return np.concatenate([fac.solve(lm[0 : self.ng]), fac.solve(lm[self.ng :])])

    def load_volume(self, cid: int, i: int, f) -> np.ndarray:
        t = self.volume_tables(cid, i)
        return t.ek1.T @ (t.w * f(i, t.pts))

    def load_interface(self, cid: int, kappa1: float, g_d, g_n):
        """Interface data terms (g_N, w_T2) + kappa1/h (g_D, [w_T]) on TG."""
        pts, w, nrm = self.interface_quadrature(cid)
        psi1 = self.cell_basis(cid, 1).eval(pts)
        psi2 = self.cell_basis(cid, 2).eval(pts)
        r1 = np.zeros(self.nc)
        r2 = np.zeros(self.nc)
        if g_n is not None:
            r2 += psi2.T @ (w * g_n(pts, nrm))
        if g_d is not None:
            gd = g_d(pts)
            scal = kappa1 / self.cm.mesh.h
            r1 += scal * (psi1.T @ (w * gd))
            r2 -= scal * (psi2.T @ (w * gd))
        return r1, r2
