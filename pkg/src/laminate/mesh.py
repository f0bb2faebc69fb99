"""Triangulated flat tori and annuli with gluings, and piecewise-linear fields on them.

A surface is stored as a quotient triangulation: ``vertices`` holds one point
per vertex of the surface (inside a fundamental domain), and every triangle
corner carries an integer deck-shift vector ``shifts[t, c]``.  The lifted
position of a corner is ``vertices[i] + shifts[t, c] @ deck`` and the lifted
value of an equivariant field is ``values[i] + shifts[t, c] @ rho``.  The cut
domain and its gluing table are derived from this data.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

__all__ = [
    "SurfaceMesh",
    "Homomorphism",
    "EquivariantField",
    "PLOneForm",
    "build_torus",
    "build_annulus",
    "boundary_layer_radii",
    "differential",
    "period_integral",
    "hodge_star",
    "wedge",
    "form_norm",
    "locate",
    "evaluate",
    "mesh_to_json",
    "mesh_from_json",
]

_ROT = np.array([[0.0, -1.0], [1.0, 0.0]])  # +90 degrees


@dataclass(frozen=True, eq=False)
class SurfaceMesh:
    vertices: np.ndarray          # (V, 2)
    triangles: np.ndarray         # (F, 3), counterclockwise
    shifts: np.ndarray            # (F, 3, b) integer deck shifts per corner
    deck: np.ndarray              # (b, 2) translation of each generator
    metric: np.ndarray            # (F, 2, 2) SPD
    homology_basis: tuple         # b loops, each an (k+1, 1+b) int array of (vertex, shift...)
    kind: str = "surface"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        V = len(self.vertices)
        tri = self.triangles
        if tri.ndim != 2 or tri.shape[1] != 3 or tri.min() < 0 or tri.max() >= V:
            raise ValueError("triangles must be (F, 3) indices into vertices")
        if self.shifts.shape != (len(tri), 3, self.n_generators):
            raise ValueError("shifts must have shape (F, 3, b)")
        eig = np.linalg.eigvalsh(0.5 * (self.metric + np.swapaxes(self.metric, 1, 2)))
        if not np.allclose(self.metric, np.swapaxes(self.metric, 1, 2), atol=1e-14):
            raise ValueError("metric tensors must be symmetric")
        if eig.min() <= 1e-12:
            raise ValueError("metric tensors must be positive definite")
        if np.any(self.coord_areas <= 0):
            raise ValueError("triangles must be counterclockwise with positive area")
        for i, loop in enumerate(self.homology_basis):
            loop = np.asarray(loop)
            if loop[0, 0] != loop[-1, 0]:
                raise ValueError(f"homology loop {i} is not closed")
            for a, b in zip(loop[:-1], loop[1:]):
                if self.edge_key(a, b) not in self.edge_table:
                    raise ValueError(f"homology loop {i} uses a non-edge {a[0]}->{b[0]}")

    @property
    def n_generators(self) -> int:
        return len(self.deck)

    @cached_property
    def corners(self) -> np.ndarray:
        """Lifted corner positions, (F, 3, 2)."""
        return self.vertices[self.triangles] + self.shifts @ self.deck

    @cached_property
    def coord_areas(self) -> np.ndarray:
        e1 = self.corners[:, 1] - self.corners[:, 0]
        e2 = self.corners[:, 2] - self.corners[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(np.linalg.det(self.metric))

    @cached_property
    def areas(self) -> np.ndarray:
        """Metric area of every triangle."""
        return self.sqrt_det * self.coord_areas

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))

    @cached_property
    def inv_metric(self) -> np.ndarray:
        return np.linalg.inv(self.metric)

    @cached_property
    def grad_ops(self) -> np.ndarray:
        """(F, 2, 3) maps lifted corner values to the gradient covector."""
        X = self.corners
        E = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=1)  # (F, 2, 2)
        Einv = np.linalg.inv(E)
        D = np.zeros((len(X), 2, 3))
        D[:, :, 1:] = Einv
        D[:, :, 0] = -Einv.sum(axis=2)
        return D

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def edge_table(self) -> dict:
        """Undirected edge key -> list of (triangle, local edge, orientation)."""
        table: dict = {}
        for t in range(len(self.triangles)):
            for k in range(3):
                a, b = (k + 1) % 3, (k + 2) % 3
                va = (self.triangles[t, a], *self.shifts[t, a])
                vb = (self.triangles[t, b], *self.shifts[t, b])
                key, sign = self._key_sign(va, vb)
                table.setdefault(key, []).append((t, k, sign))
        return table

    def _key_sign(self, va, vb):
        ia, ib = int(va[0]), int(vb[0])
        d = tuple(int(x) for x in np.subtract(vb[1:], va[1:]))
        fwd = (ia, ib, d)
        rev = (ib, ia, tuple(-x for x in d))
        return (fwd, 1) if fwd <= rev else (rev, -1)

    def edge_key(self, va, vb):
        return self._key_sign(va, vb)[0]

    @property
    def n_edges(self) -> int:
        return len(self.edge_table)

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - self.n_edges + len(self.triangles)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        """(nb, 2) vertex pairs of edges with a single incident triangle."""
        out = [(key[0], key[1]) for key, inc in self.edge_table.items() if len(inc) == 1]
        return np.array(sorted(out), dtype=int).reshape(-1, 2)

    @cached_property
    def gluings(self) -> list:
        """Edges of the cut domain that are identified: (t1, k1, t2, k2, shift).

        ``shift`` is the deck translation taking the edge as seen from t1 to
        the edge as seen from t2.
        """
        out = []
        for key, inc in self.edge_table.items():
            if len(inc) != 2:
                continue
            (t1, k1, _), (t2, k2, _) = inc
            s1 = self._vertex_shift(t1, key[0], key, k1)
            s2 = self._vertex_shift(t2, key[0], key, k2)
            if np.any(s1 != s2):
                out.append((t1, k1, t2, k2, tuple(int(x) for x in s2 - s1)))
        return out

    def _vertex_shift(self, t, vid, key, k):
        a, b = (k + 1) % 3, (k + 2) % 3
        for c in (a, b):
            if self.triangles[t, c] == vid:
                other = b if c == a else a
                d = self.shifts[t, other] - self.shifts[t, c]
                if self.triangles[t, other] == key[1] and tuple(d) == key[2]:
                    return self.shifts[t, c]
                if key[0] == key[1] and tuple(-d) == key[2]:
                    return self.shifts[t, other]
        raise KeyError("vertex not on edge")

    @cached_property
    def triangle_adjacency(self):
        """Sparse adjacency between triangles sharing an edge, with relative shifts."""
        rows, cols = [], []
        rel = {}
        for key, inc in self.edge_table.items():
            if len(inc) != 2:
                continue
            (t1, k1, _), (t2, k2, _) = inc
            s1 = self._vertex_shift(t1, key[0], key, k1)
            s2 = self._vertex_shift(t2, key[0], key, k2)
            rows += [t1, t2]
            cols += [t2, t1]
            # lift of t2 that is adjacent to the base lift of t1
            rel[(t1, t2)] = tuple(int(x) for x in s1 - s2)
            rel[(t2, t1)] = tuple(int(x) for x in s2 - s1)
        F = len(self.triangles)
        A = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(F, F)).tocsr()
        return A, rel

    @cached_property
    def bary_tree(self):
        return cKDTree(self.barycenters)

    @cached_property
    def mesh_size(self) -> float:
        """Mean edge length of the triangulation."""
        X = self.corners
        lengths = np.linalg.norm(X[:, [1, 2, 0]] - X, axis=2)
        return float(lengths.mean())

    def loop_class(self, loop) -> np.ndarray:
        loop = np.asarray(loop)
        return loop[-1, 1:] - loop[0, 1:]


@dataclass(frozen=True)
class Homomorphism:
    """Periods of a homomorphism on the homology basis loops."""

    periods: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.periods, dtype=float))
        if not np.all(np.isfinite(p)):
            raise ValueError("periods must be finite")
        object.__setattr__(self, "periods", p)

    def __call__(self, cls) -> float:
        return float(np.dot(cls, self.periods))


@dataclass(frozen=True)
class EquivariantField:
    values: np.ndarray
    rho: Homomorphism

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))
        if not isinstance(self.rho, Homomorphism):
            object.__setattr__(self, "rho", Homomorphism(self.rho))

    def lifted(self, mesh: SurfaceMesh) -> np.ndarray:
        """Corner values on the cut domain, (F, 3)."""
        check_field(mesh, self)
        return self.values[mesh.triangles] + mesh.shifts @ self.rho.periods

    @classmethod
    def from_lifted(cls, mesh: SurfaceMesh, corner_values, rho, tol=1e-12):
        """Build a field from cut-domain corner values, rejecting inconsistent equivariance."""
        rho = rho if isinstance(rho, Homomorphism) else Homomorphism(rho)
        corner_values = np.asarray(corner_values, dtype=float)
        base = corner_values - mesh.shifts @ rho.periods
        values = np.full(len(mesh.vertices), np.nan)
        values[mesh.triangles[:, 0]] = base[:, 0]
        values[mesh.triangles[:, 1]] = base[:, 1]
        values[mesh.triangles[:, 2]] = base[:, 2]
        mismatch = np.abs(values[mesh.triangles] - base).max()
        scale = max(1.0, np.abs(corner_values).max())
        if mismatch > tol * scale:
            raise ValueError(f"inconsistent equivariance: glued values differ by {mismatch:.3e}")
        return cls(values, rho)


@dataclass(frozen=True)
class PLOneForm:
    covectors: np.ndarray         # (F, 2)

    def __post_init__(self):
        c = np.asarray(self.covectors, dtype=float)
        if c.ndim != 2 or c.shape[1] != 2 or not np.all(np.isfinite(c)):
            raise ValueError("covectors must be a finite (F, 2) array")
        object.__setattr__(self, "covectors", c)

    def __add__(self, other):
        return PLOneForm(self.covectors + other.covectors)

    def __sub__(self, other):
        return PLOneForm(self.covectors - other.covectors)

    def __mul__(self, s):
        return PLOneForm(s * self.covectors)

    __rmul__ = __mul__

    def __neg__(self):
        return PLOneForm(-self.covectors)


def check_field(mesh: SurfaceMesh, u: EquivariantField):
    if u.values.shape != (len(mesh.vertices),):
        raise ValueError("field has wrong number of vertex values")
    if u.rho.periods.shape != (mesh.n_generators,):
        raise ValueError("homomorphism has wrong number of periods")
    if not np.all(np.isfinite(u.values)):
        raise ValueError("field values must be finite")


# ----------------------------------------------------------------------------
# constructors

def build_torus(lattice_basis, resolution: int) -> SurfaceMesh:
    """Uniform triangulation of the flat torus R^2 / (Z e1 + Z e2)."""
    E = np.asarray(lattice_basis, dtype=float).reshape(2, 2)
    det = E[0, 0] * E[1, 1] - E[0, 1] * E[1, 0]
    if abs(det) < 1e-12:
        raise ValueError("degenerate lattice: basis vectors are linearly dependent")
    n = int(resolution)
    if n < 2:
        raise ValueError("resolution must be at least 2")

    jj, ii = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    frac = np.stack([ii.ravel(), jj.ravel()], axis=1) / n
    vertices = frac @ E

    def vid(i, j):
        return (i % n) + n * (j % n)

    tris, shifts = [], []
    for j in range(n):
        for i in range(n):
            quad = [(i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)]
            for a, b, c in ((0, 1, 2), (0, 2, 3)):
                cs = [quad[a], quad[b], quad[c]]
                if det < 0:
                    cs = cs[::-1]
                tris.append([vid(*q) for q in cs])
                shifts.append([[q[0] // n, q[1] // n] for q in cs])
    tris = np.array(tris)
    shifts = np.array(shifts)

    loop1 = np.array([[vid(i, 0), i // n, 0] for i in range(n + 1)])
    loop2 = np.array([[vid(0, j), 0, j // n] for j in range(n + 1)])
    F = len(tris)
    return SurfaceMesh(
        vertices=vertices,
        triangles=tris,
        shifts=shifts,
        deck=E.copy(),
        metric=np.tile(np.eye(2), (F, 1, 1)),
        homology_basis=(loop1, loop2),
        kind="torus",
        params={"lattice_basis": E.tolist(), "resolution": n},
    )


def boundary_layer_radii(r0: float, r1: float, n_r: int, first: float, ratio: float) -> np.ndarray:
    """Radii graded geometrically away from r0 and capped to a uniform width.

    Cell widths are ``min(first * ratio**i, cap)`` with the cap chosen so the
    widths sum to ``r1 - r0``.
    """
    if not 0 < r0 < r1:
        raise ValueError("need 0 < r0 < r1")
    span = r1 - r0
    w = first * span * ratio ** np.arange(n_r)
    if w.sum() <= span:
        w = w * (span / w.sum())
    else:
        lo, hi = 0.0, span
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if np.minimum(w, mid).sum() > span:
                hi = mid
            else:
                lo = mid
        w = np.minimum(w, lo)
        w *= span / w.sum()
    return r0 + np.concatenate([[0.0], np.cumsum(w)])


def build_annulus(r0: float, r1: float, n_theta: int, n_r: int, radii=None,
                  scale_rings: bool = True, loop_ring: int | None = None) -> SurfaceMesh:
    """Polar-grid triangulation of the planar annulus r0 <= |x| <= r1.

    ``n_r`` is the number of radial cells; ``radii`` optionally overrides the
    uniform ring radii.  With ``scale_rings`` every ring polygon is scaled by
    dtheta / sin(dtheta), which corrects the leading chord error in the discrete
    energy of the angle function (the nominal radius is kept in ``params``).

    The homology loop runs along ring ``loop_ring`` (default: the ring
    closest to the mid radius).  An interior ring averages the two triangles on each edge, which
    keeps periods of forms that are only approximately closed unbiased.
    """
    if not 0 < r0 < r1:
        raise ValueError(f"annulus radii must satisfy 0 < r0 < r1 (got r0={r0}, r1={r1})")
    if n_theta < 3 or n_r < 2:
        raise ValueError("need n_theta >= 3 and n_r >= 2")
    if radii is None:
        radii = np.linspace(r0, r1, n_r + 1)
    radii = np.asarray(radii, dtype=float)
    if len(radii) != n_r + 1 or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing with n_r + 1 entries")
    dth = 2 * np.pi / n_theta
    scale = dth / np.sin(dth) if scale_rings else 1.0
    theta = dth * np.arange(n_theta)
    R = radii[:, None] * scale
    vertices = np.stack([R * np.cos(theta), R * np.sin(theta)], axis=-1).reshape(-1, 2)

    def vid(i, j):
        return i * n_theta + (j % n_theta)

    tris, shifts = [], []
    for i in range(n_r):
        for j in range(n_theta):
            for cs in (((i, j), (i + 1, j), (i, j + 1)),
                       ((i, j + 1), (i + 1, j), (i + 1, j + 1))):
                tris.append([vid(*c) for c in cs])
                shifts.append([[c[1] // n_theta] for c in cs])
    tris = np.array(tris)
    shifts = np.array(shifts)
    ring = int(np.argmin(np.abs(radii - 0.5 * (r0 + r1)))) if loop_ring is None else int(loop_ring)
    if not 0 <= ring <= n_r:
        raise ValueError(f"loop_ring must lie in [0, {n_r}]")
    loop = np.array([[vid(ring, j), j // n_theta] for j in range(n_theta + 1)])
    F = len(tris)
    return SurfaceMesh(
        vertices=vertices,
        triangles=tris,
        shifts=shifts,
        deck=np.zeros((1, 2)),
        metric=np.tile(np.eye(2), (F, 1, 1)),
        homology_basis=(loop,),
        kind="annulus",
        params={"r0": float(r0), "r1": float(r1), "n_theta": int(n_theta), "n_r": int(n_r),
                "radii": radii.tolist(), "radial_scale": float(scale), "loop_ring": ring},
    )


# ----------------------------------------------------------------------------
# differential forms

def differential(mesh: SurfaceMesh, u: EquivariantField) -> PLOneForm:
    """Per-triangle gradient covector of the affine interpolant of ``u``."""
    f = u.lifted(mesh)
    return PLOneForm(np.einsum("fij,fj->fi", mesh.grad_ops, f))


def form_norm(mesh: SurfaceMesh, form: PLOneForm) -> np.ndarray:
    """Metric norm of the covector on every triangle."""
    c = form.covectors
    return np.sqrt(np.maximum(np.einsum("fi,fij,fj->f", c, mesh.inv_metric, c), 0.0))


def hodge_star(mesh: SurfaceMesh, form: PLOneForm) -> PLOneForm:
    """Rotate every covector by +90 degrees in its triangle's metric."""
    c = form.covectors
    raised = np.einsum("fij,fj->fi", mesh.inv_metric, c)
    return PLOneForm(mesh.sqrt_det[:, None] * (raised @ _ROT.T))


def wedge(mesh: SurfaceMesh, a: PLOneForm, b: PLOneForm) -> np.ndarray:
    """Coefficient of a ^ b against the metric area form, per triangle."""
    ca, cb = a.covectors, b.covectors
    return (ca[:, 0] * cb[:, 1] - ca[:, 1] * cb[:, 0]) / mesh.sqrt_det


def period_integral(mesh: SurfaceMesh, form: PLOneForm, loop) -> float:
    """Integrate a per-triangle constant form along a closed edge path.

    On an edge shared by two triangles the tangential components are
    averaged; for a differential they agree and the sum telescopes.
    """
    loop = np.asarray(loop)
    if loop.ndim != 2 or loop[0, 0] != loop[-1, 0]:
        raise ValueError("loop must be closed")
    total = 0.0
    c = form.covectors
    for a, b in zip(loop[:-1], loop[1:]):
        key = mesh.edge_key(a, b)
        inc = mesh.edge_table.get(key)
        if inc is None:
            raise ValueError(f"path step {a[0]}->{b[0]} is not an edge")
        vec = (mesh.vertices[b[0]] + b[1:] @ mesh.deck) - (mesh.vertices[a[0]] + a[1:] @ mesh.deck)
        cov = np.mean([c[t] for t, _, _ in inc], axis=0)
        total += float(cov @ vec)
    return total


# ----------------------------------------------------------------------------
# point location

def _reduce_torus(mesh, points):
    E = mesh.deck
    frac = np.asarray(points, dtype=float) @ np.linalg.inv(E)
    k = np.floor(frac)
    return (frac - k) @ E, k.astype(int)


def _bary_all(mesh, q, tris):
    """Barycentric coordinates of points q (n, 2) in triangles tris (n, k)."""
    X = mesh.corners[tris]                                   # (n, k, 3, 2)
    e1 = X[..., 1, :] - X[..., 0, :]
    e2 = X[..., 2, :] - X[..., 0, :]
    r = q[:, None, :] - X[..., 0, :]
    det = e1[..., 0] * e2[..., 1] - e1[..., 1] * e2[..., 0]
    l1 = (r[..., 0] * e2[..., 1] - r[..., 1] * e2[..., 0]) / det
    l2 = (e1[..., 0] * r[..., 1] - e1[..., 1] * r[..., 0]) / det
    return np.stack([1.0 - l1 - l2, l1, l2], axis=-1)


def locate(mesh: SurfaceMesh, points, tol=1e-10, k: int = 12):
    """Find the triangle containing each point.

    Returns ``(tri, bary, shift)``; ``tri`` is -1 for points outside the
    mesh, and ``points[i] = bary[i] @ corners[tri[i]] + shift[i] @ deck``.
    Candidates come from the nearest barycenters; points they miss are
    tested against every triangle.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    n, b, F = len(P), mesh.n_generators, len(mesh.triangles)
    if mesh.kind == "torus":
        Q, base_shift = _reduce_torus(mesh, P)
        candidates = [np.zeros(b, dtype=int)] + [np.array(c) for c in
                                                 ((1, 0), (0, 1), (1, 1), (-1, 0), (0, -1), (-1, -1), (1, -1), (-1, 1))]
    else:
        Q, base_shift = P, np.zeros((n, b), dtype=int)
        candidates = [np.zeros(b, dtype=int)]
    tri = np.full(n, -1)
    bary = np.zeros((n, 3))
    cand_used = np.zeros((n, b), dtype=int)
    best = np.full(n, -np.inf)
    kk = min(k, F)
    for full in (False, True):
        for cand in candidates:
            todo = np.flatnonzero(best < -tol)
            if len(todo) == 0:
                break
            qq = Q[todo] + cand @ mesh.deck
            if full:
                chunks = [(todo[i:i + 256], qq[i:i + 256]) for i in range(0, len(todo), 256)]
            else:
                _, idx = mesh.bary_tree.query(qq, kk)
                chunks = [(todo, qq, np.atleast_2d(idx).reshape(len(todo), kk))]
            for ch in chunks:
                rows, q = ch[0], ch[1]
                tris = ch[2] if not full else np.broadcast_to(np.arange(F), (len(rows), F))
                lam = _bary_all(mesh, q, tris)
                m = lam.min(axis=-1)
                j = np.argmax(m, axis=1)
                mj = m[np.arange(len(rows)), j]
                better = mj > best[rows]
                r = rows[better]
                best[r] = mj[better]
                tri[r] = tris[np.arange(len(rows)), j][better]
                bary[r] = lam[np.arange(len(rows)), j][better]
                cand_used[r] = cand
    outside = best < -tol
    tri[outside] = -1
    shift = base_shift - cand_used if mesh.kind == "torus" else base_shift
    return tri, bary, shift


def evaluate(mesh: SurfaceMesh, u: EquivariantField, points) -> np.ndarray:
    """Lifted value of ``u`` at points of the cover (NaN outside the mesh)."""
    tri, bary, shift = locate(mesh, points)
    f = u.lifted(mesh)
    out = np.full(len(tri), np.nan)
    ok = tri >= 0
    out[ok] = np.einsum("ij,ij->i", bary[ok], f[tri[ok]]) + shift[ok] @ u.rho.periods
    return out


def triangle_components(mesh: SurfaceMesh, mask) -> np.ndarray:
    """Label connected components (through shared edges) of a triangle subset; -1 outside."""
    mask = np.asarray(mask, dtype=bool)
    A, _ = mesh.triangle_adjacency
    idx = np.flatnonzero(mask)
    labels = np.full(len(mask), -1)
    if len(idx) == 0:
        return labels
    sub = A[idx][:, idx]
    _, lab = connected_components(sub, directed=False)
    labels[idx] = lab
    return labels


def unwrap_offsets(mesh: SurfaceMesh, members) -> dict:
    """Deck offsets placing a connected triangle set as one patch of the cover.

    Breadth-first from the smallest index; returns {triangle: offset}.
    """
    members = sorted(int(t) for t in members)
    if not members:
        return {}
    A, rel = mesh.triangle_adjacency
    inside = set(members)
    off = {members[0]: np.zeros(mesh.n_generators, dtype=int)}
    queue = [members[0]]
    while queue:
        t = queue.pop(0)
        for s in A.indices[A.indptr[t]:A.indptr[t + 1]]:
            s = int(s)
            if s in inside and s not in off:
                off[s] = off[t] + np.array(rel[(t, s)])
                queue.append(s)
    return off


# ----------------------------------------------------------------------------
# serialization

def mesh_to_json(mesh: SurfaceMesh) -> str:
    doc = {
        "kind": mesh.kind,
        "params": mesh.params,
        "vertices": mesh.vertices.tolist(),
        "triangles": mesh.triangles.tolist(),
        "shifts": mesh.shifts.tolist(),
        "deck": mesh.deck.tolist(),
        "gluings": [list(g[:4]) + [list(g[4])] for g in mesh.gluings],
        "metric": mesh.metric.tolist(),
        "homology_basis": [np.asarray(l).tolist() for l in mesh.homology_basis],
        "boundary_edges": mesh.boundary_edges.tolist(),
    }
    return json.dumps(doc, sort_keys=True)


def mesh_from_json(text: str) -> SurfaceMesh:
    doc = json.loads(text)
    mesh = SurfaceMesh(
        vertices=np.array(doc["vertices"], dtype=float),
        triangles=np.array(doc["triangles"], dtype=int),
        shifts=np.array(doc["shifts"], dtype=int).reshape(len(doc["triangles"]), 3, len(doc["deck"])),
        deck=np.array(doc["deck"], dtype=float),
        metric=np.array(doc["metric"], dtype=float),
        homology_basis=tuple(np.array(l, dtype=int) for l in doc["homology_basis"]),
        kind=doc["kind"],
        params=doc["params"],
    )
    stored = [list(g[:4]) + [list(g[4])] for g in mesh.gluings]
    if stored != doc["gluings"]:
        raise ValueError("gluing table does not match the corner shifts")
    return mesh
