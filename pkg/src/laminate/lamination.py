"""Plaques, transverse cocycles, Ruelle-Sullivan currents and BV traces."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .mesh import (EquivariantField, Homomorphism, PLOneForm, SurfaceMesh, differential,
                   locate, triangle_components, unwrap_offsets)
from .duality import pairing

__all__ = ["PlaqueDecomposition", "plaques", "TransversalPath", "Piece", "good_subdivision",
           "cocycle", "MeasuredLamination", "leaf_geometry", "ruelle_sullivan", "staircase",
           "rs_primitive", "leaf_band", "BVTrace", "bv_decompose", "cantor_staircase",
           "cantor_left_endpoints", "transverse_trace", "lamination_to_json",
           "lamination_from_json", "path_to_json", "path_from_json", "cocycle_csv",
           "annulus_transversals", "cocycle_properties"]


# ----------------------------------------------------------------------------
# plaques

def _field_of(v):
    return v if isinstance(v, EquivariantField) else v.v


def _fit_band(points):
    """Fit a line (total least squares) and a circle (algebraic); keep the better one."""
    c = points.mean(axis=0)
    X = points - c
    _, sv, vt = np.linalg.svd(X, full_matrices=False)
    normal = np.array([-vt[0, 1], vt[0, 0]])
    line_rms = float(np.sqrt(np.mean((X @ normal) ** 2)))
    fit = {"kind": "line", "point": c.tolist(), "normal": normal.tolist(), "rms": line_rms}
    if len(points) >= 3:
        A = np.column_stack([2 * points, np.ones(len(points))])
        rhs = (points ** 2).sum(axis=1)
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        center = sol[:2]
        R2 = sol[2] + center @ center
        if R2 > 0:
            rad = np.hypot(*(points - center).T)
            circ_rms = float(np.sqrt(np.mean((rad - math.sqrt(R2)) ** 2)))
            if circ_rms < 0.5 * line_rms:
                fit = {"kind": "circle", "center": center.tolist(), "radius": math.sqrt(R2),
                       "rms": circ_rms}
    return fit


def _tau(fit, pts):
    pts = np.atleast_2d(pts)
    if fit["kind"] == "circle":
        return np.hypot(*(pts - np.array(fit["center"])).T)
    return (pts - np.array(fit["point"])) @ np.array(fit["normal"])


def _tau_grad(fit, pts):
    pts = np.atleast_2d(pts)
    if fit["kind"] == "circle":
        d = pts - np.array(fit["center"])
        return d / np.hypot(*d.T)[:, None]
    return np.broadcast_to(np.array(fit["normal"]), pts.shape)


def _boundary_loops(mesh):
    """Connected components of the boundary edges as vertex sets with their triangles."""
    loops = []
    edges = [(key, mesh.edge_table[key][0][0]) for key in mesh.edge_table
             if len(mesh.edge_table[key]) == 1]
    if not edges:
        return loops
    parent = {}

    def find(a):
        while parent.setdefault(a, a) != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for key, _ in edges:
        ra, rb = find(key[0]), find(key[1])
        if ra != rb:
            parent[ra] = rb
    groups = {}
    for key, t in edges:
        g = groups.setdefault(find(key[0]), {"vertices": set(), "triangles": set(), "edges": []})
        g["vertices"].update((key[0], key[1]))
        g["triangles"].add(t)
        g["edges"].append(key)
    return list(groups.values())


@dataclass
class PlaqueDecomposition:
    mesh: SurfaceMesh
    field: EquivariantField
    labels: np.ndarray              # plaque id per triangle, -1 in the band
    constants: np.ndarray           # a_j, in the frame of each plaque's unwrapped patch
    spreads: np.ndarray
    offsets: np.ndarray             # (F, b) patch offset of every plaque triangle
    band_labels: np.ndarray         # band component per triangle, -1 outside
    band_fits: list
    adjacency: dict
    virtual: list                   # boundary loops that act as plaques
    plaque_tol: float
    flagged: list = field(default_factory=list)

    @property
    def n_plaques(self) -> int:
        return len(self.constants)

    @property
    def degenerate(self) -> bool:
        return self.n_plaques == 0

    def summary(self) -> dict:
        return {"n_plaques": self.n_plaques, "constants": self.constants.tolist(),
                "spreads": self.spreads.tolist(), "plaque_tol": self.plaque_tol,
                "virtual": [v["id"] for v in self.virtual], "flagged": self.flagged,
                "band_fits": self.band_fits,
                "adjacency": {str(k): sorted(v) for k, v in self.adjacency.items()}}


def plaques(mesh: SurfaceMesh, stretch, v, plaque_tol: float | None = None) -> PlaqueDecomposition:
    """Split the complement of a band of triangles into plaques with constant values of v.

    ``stretch`` is a boolean mask or an index array of band triangles.
    Boundary loops touching only band triangles become virtual plaques
    whose constant is the mean of v along the loop.
    """
    u = _field_of(v)
    F = len(mesh.triangles)
    band = np.zeros(F, dtype=bool)
    st = np.asarray(stretch)
    if st.dtype == bool:
        band[:] = st
    else:
        band[st.astype(int)] = True
    alpha = u.rho.periods
    lifted = u.lifted(mesh)
    if plaque_tol is None:
        plaque_tol = 1e-2 * float(lifted.max() - lifted.min())
    labels = triangle_components(mesh, ~band)
    b = mesh.n_generators
    offsets = np.zeros((F, b), dtype=int)
    consts, spreads, flagged = [], [], []
    n_real = labels.max() + 1 if np.any(~band) else 0
    for j in range(n_real):
        members = np.flatnonzero(labels == j)
        off = unwrap_offsets(mesh, members)
        vals = []
        for t in members:
            offsets[t] = off[t]
            vals.append(lifted[t] + off[t] @ alpha)
        vals = np.concatenate(vals)
        consts.append(float(vals.mean()))
        spreads.append(float(vals.max() - vals.min()))
        if spreads[-1] > plaque_tol:
            flagged.append(j)
    band_labels = triangle_components(mesh, band)
    fits = []
    dv = differential(mesh, u).covectors
    for c in range(band_labels.max() + 1 if np.any(band) else 0):
        members = np.flatnonzero(band_labels == c)
        off = unwrap_offsets(mesh, members)
        pts = np.array([mesh.barycenters[t] + off[t] @ mesh.deck for t in members])
        fit = _fit_band(pts)
        g = _tau_grad(fit, pts)
        A = mesh.areas[members]
        s = float(np.sum(A * np.einsum("ij,ij->i", dv[members], g)))
        fit["orientation"] = 1 if s >= 0 else -1
        fit["component"] = c
        fits.append(fit)
    virtual = []
    for loop in _boundary_loops(mesh):
        if all(band[t] for t in loop["triangles"]):
            vid = sorted(loop["vertices"])
            j = len(consts)
            # loop vertices are read in the base frame of the cut domain
            vals = u.values[vid]
            consts.append(float(vals.mean()))
            spreads.append(float(vals.max() - vals.min()))
            if spreads[-1] > plaque_tol:
                flagged.append(j)
            virtual.append({"id": j, "vertices": vid, "edges": loop["edges"],
                            "triangles": sorted(loop["triangles"])})
    adjacency = {}
    A, _ = mesh.triangle_adjacency
    for t in np.flatnonzero(band):
        for s in A.indices[A.indptr[t]:A.indptr[t + 1]]:
            if labels[s] >= 0:
                adjacency.setdefault(int(labels[s]), set()).add(int(band_labels[t]))
    for vp in virtual:
        adjacency[vp["id"]] = {int(band_labels[t]) for t in vp["triangles"]}
    return PlaqueDecomposition(mesh=mesh, field=u, labels=labels, constants=np.array(consts),
                               spreads=np.array(spreads), offsets=offsets, band_labels=band_labels,
                               band_fits=fits, adjacency=adjacency, virtual=virtual,
                               plaque_tol=float(plaque_tol), flagged=flagged)


# ----------------------------------------------------------------------------
# transversals

@dataclass
class TransversalPath:
    """Polyline in the cover (the plane for an annulus, R^2 for a torus)."""

    polyline: np.ndarray
    path_id: str = ""

    def __post_init__(self):
        P = np.asarray(self.polyline, dtype=float)
        if P.ndim != 2 or P.shape[1] != 2 or len(P) < 2:
            raise ValueError("polyline must be a (k >= 2, 2) array")
        if np.any(np.linalg.norm(np.diff(P, axis=0), axis=1) == 0):
            raise ValueError("consecutive polyline points must be distinct")
        self.polyline = P

    def reversed(self) -> "TransversalPath":
        return TransversalPath(self.polyline[::-1].copy(), self.path_id + "~")

    def split(self, index: int):
        """Two sub-paths sharing polyline vertex ``index``."""
        if not 0 < index < len(self.polyline) - 1:
            raise ValueError("split index must be an interior vertex")
        return (TransversalPath(self.polyline[:index + 1].copy(), self.path_id + "a"),
                TransversalPath(self.polyline[index:].copy(), self.path_id + "b"))


@dataclass
class Piece:
    sign: int
    start: int          # sample index
    end: int
    plaque_start: int
    plaque_end: int
    value_start: float
    value_end: float

    @property
    def nu(self) -> float:
        return self.sign * (self.value_end - self.value_start)


def _sample(path, step):
    out = [path.polyline[:1]]
    for a, b in zip(path.polyline[:-1], path.polyline[1:]):
        k = max(1, int(math.ceil(np.linalg.norm(b - a) / step)))
        t = np.arange(1, k + 1) / k
        out.append(a + t[:, None] * (b - a))
    return np.concatenate(out)


def _frames(mesh, pts, shift):
    """Deck frame of each sample; on the annulus it is the winding count of the continuous angle."""
    if mesh.kind == "torus":
        return shift
    ang = np.unwrap(np.arctan2(pts[:, 1], pts[:, 0]))
    ang = ang - ang[0] + np.mod(ang[0], 2 * np.pi)
    return np.floor(ang / (2 * np.pi)).astype(int)[:, None]


def _point_plaques(dec, pts):
    """Plaque id and plaque value at sample points; -1 where the point is in the band."""
    mesh = dec.mesh
    tri, bary, shift = locate(mesh, pts, tol=1e-9)
    if np.any(tri < 0):
        raise ValueError("transversal leaves the surface")
    frames = _frames(mesh, pts, shift)
    alpha = dec.field.rho.periods
    ids = dec.labels[tri].copy()
    vals = np.full(len(pts), np.nan)
    real = ids >= 0
    vals[real] = dec.constants[ids[real]] + np.einsum("ij,j->i", frames[real] - dec.offsets[tri[real]], alpha)
    if dec.virtual:
        tol = 1e-9
        for i in np.flatnonzero(~real):
            t = tri[i]
            for vp in dec.virtual:
                if t not in vp["triangles"]:
                    continue
                corners = mesh.triangles[t]
                on_loop = np.isin(corners, vp["vertices"])
                # the point must sit on an edge both of whose ends lie on the loop
                if np.all(bary[i][~on_loop] <= tol) and on_loop.sum() >= 2:
                    key = mesh.edge_key(*[np.concatenate([[corners[k]], mesh.shifts[t, k]])
                                          for k in np.flatnonzero(on_loop)[:2]])
                    if on_loop.sum() == 3 or key in vp["edges"]:
                        ids[i] = vp["id"]
                        vals[i] = dec.constants[vp["id"]] + frames[i] @ alpha
    return ids, vals, tri


def good_subdivision(path: TransversalPath, decomposition: PlaqueDecomposition, step: float | None = None,
                     monotone_tol: float = 1e-9) -> list:
    """Alternating subdivision of an admissible transversal into signed monotone pieces.

    The path is sampled (default step: a quarter of the mean edge length);
    every maximal run through the band must be strictly
    monotone in the band's transverse coordinate, otherwise it is rejected as
    non-transverse.  Consecutive pieces of equal sign are merged.
    """
    dec = decomposition
    mesh = dec.mesh
    if step is None:
        step = 0.25 * mesh.mesh_size
    pts = _sample(path, step)
    if len(pts) > 200000:
        raise ValueError("transversal too long for the sampling step")
    ids, vals, tri = _point_plaques(dec, pts)
    if ids[0] < 0 or ids[-1] < 0:
        raise ValueError("transversal is not admissible: endpoints must lie in plaques")
    pieces = []
    i = 0
    n = len(pts)
    while i < n - 1:
        if ids[i + 1] >= 0:
            i += 1
            continue
        j = i + 1
        while ids[j] < 0:
            j += 1
        comp = dec.band_labels[tri[i + 1]]
        fit = dec.band_fits[comp]
        tau = _tau(fit, pts[i:j + 1])
        d = np.diff(tau)
        scale = monotone_tol * max(1.0, float(np.abs(tau).max()))
        if np.all(d > -scale) and tau[-1] - tau[0] > scale:
            s = 1
        elif np.all(d < scale) and tau[0] - tau[-1] > scale:
            s = -1
        else:
            raise ValueError(f"transversal is not transverse to band {comp} "
                             f"between samples {i} and {j}")
        sign = s * fit["orientation"]
        pieces.append(Piece(sign=sign, start=i, end=j, plaque_start=int(ids[i]), plaque_end=int(ids[j]),
                            value_start=float(vals[i]), value_end=float(vals[j])))
        i = j
    merged = []
    for pc in pieces:
        if merged and merged[-1].sign == pc.sign:
            last = merged[-1]
            merged[-1] = Piece(sign=pc.sign, start=last.start, end=pc.end,
                               plaque_start=last.plaque_start, plaque_end=pc.plaque_end,
                               value_start=last.value_start, value_end=pc.value_end)
        else:
            merged.append(pc)
    return merged


def cocycle(path: TransversalPath, decomposition: PlaqueDecomposition, **kw) -> float:
    return float(sum(pc.nu for pc in good_subdivision(path, decomposition, **kw)))


def cocycle_csv(rows) -> str:
    """rows: iterable of (path_id, nu, signs)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["path_id", "nu", "subdivision_signs"])
    for pid, nu, signs in rows:
        w.writerow([pid, repr(float(nu)), "".join("+" if s > 0 else "-" for s in signs)])
    return buf.getvalue()


def path_to_json(path: TransversalPath) -> str:
    return json.dumps({"path_id": path.path_id, "polyline": path.polyline.tolist()}, sort_keys=True)


def path_from_json(text: str) -> TransversalPath:
    doc = json.loads(text)
    return TransversalPath(np.array(doc["polyline"], dtype=float), doc.get("path_id", ""))


# ----------------------------------------------------------------------------
# measured laminations on flat tori

@dataclass
class MeasuredLamination:
    """Parallel closed geodesics of one primitive class on a flat torus."""

    leaves: list                    # (class (m, n), offset in [0, 1), weight >= 0)
    orientation: int = 1

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if not self.leaves:
            raise ValueError("a lamination needs at least one leaf")
        clean = []
        for cls, off, w in self.leaves:
            m, n = (int(round(c)) for c in cls)
            if (m, n) != tuple(cls) and not np.allclose(cls, (m, n)):
                raise ValueError(f"leaf class {cls} is not an integer class")
            if math.gcd(m, n) != 1:
                raise ValueError(f"leaf class {(m, n)} is not primitive, so the leaf does not close once")
            if w < 0:
                raise ValueError("weights must be nonnegative")
            clean.append(((m, n), float(off) % 1.0, float(w)))
        classes = {c for c, _, _ in clean}
        if len(classes) != 1:
            raise ValueError("only a single parallel family is supported")
        offs = [o for _, o, _ in clean]
        if len(set(offs)) != len(offs):
            raise ValueError("leaves of one class need distinct offsets")
        self.leaves = clean

    @property
    def leaf_class(self) -> tuple:
        return self.leaves[0][0]

    @property
    def total_weight(self) -> float:
        return float(sum(w for _, _, w in self.leaves))

    def scaled(self, s: float) -> "MeasuredLamination":
        return MeasuredLamination([(c, o, s * w) for c, o, w in self.leaves], self.orientation)


def leaf_geometry(lam: MeasuredLamination, deck):
    """(direction vector of one closed leaf, unit normal, spacing between parallel leaves)."""
    E = np.asarray(deck, dtype=float)
    m, n = lam.leaf_class
    wv = lam.orientation * (m * E[0] + n * E[1])
    L = float(np.linalg.norm(wv))
    normal = np.array([-wv[1], wv[0]]) / L
    h = abs(float(np.linalg.det(E))) / L
    return wv, normal, h


def _check_torus(mesh):
    if mesh.kind != "torus":
        raise ValueError("measured laminations are supported on torus meshes only")


def _clip_leaf(mesh, x0, D):
    """Pieces (triangle, t0, t1) of the segment x0 + t D, t in [0, 1], through the lifted mesh.

    A segment running along an edge is assigned to the triangle on its left.
    """
    E = mesh.deck
    Einv = np.linalg.inv(E)
    f = np.array([x0, x0 + D]) @ Einv
    lo = np.floor(f.min(axis=0)).astype(int) - 2
    hi = np.floor(f.max(axis=0)).astype(int) + 1
    X0 = mesh.corners
    edges = X0[:, [1, 2, 0]] - X0
    scale = float(np.linalg.norm(D))
    out = []
    for k0 in range(lo[0], hi[0] + 1):
        for k1 in range(lo[1], hi[1] + 1):
            X = X0 + np.array([k0, k1]) @ E
            rel = x0 - X
            a = edges[..., 0] * rel[..., 1] - edges[..., 1] * rel[..., 0]     # (F, 3)
            b = edges[..., 0] * D[1] - edges[..., 1] * D[0]
            elen = np.linalg.norm(edges, axis=2)
            eps = 1e-12 * elen * max(scale, 1.0)
            t0 = np.zeros(len(X))
            t1 = np.ones(len(X))
            ok = np.ones(len(X), dtype=bool)
            par = np.abs(b) <= eps
            # parallel edges: keep only if strictly inside, or on the edge with the triangle to the left
            along = np.einsum("fkj,j->fk", edges, D) > 0
            ok &= np.all(~par | (a > eps) | ((np.abs(a) <= eps) & along), axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                tb = -a / b
            up = ~par & (b > 0)
            dn = ~par & (b < 0)
            t0 = np.maximum(t0, np.where(up, tb, -np.inf).max(axis=1))
            t1 = np.minimum(t1, np.where(dn, tb, np.inf).min(axis=1))
            good = ok & (t1 - t0 > 1e-14)
            for t in np.flatnonzero(good):
                out.append((int(t), float(t0[t]), float(t1[t])))
    return out


def ruelle_sullivan(lamination: MeasuredLamination, test_form: PLOneForm, mesh: SurfaceMesh) -> float:
    """Sum over leaves of weight times the line integral of the test form along the leaf."""
    _check_torus(mesh)
    wv, normal, h = leaf_geometry(lamination, mesh.deck)
    c = test_form.covectors
    total = 0.0
    for _, off, w in lamination.leaves:
        if w == 0:
            continue
        x0 = off * h * normal
        integral = sum((t1 - t0) * float(c[t] @ wv) for t, t0, t1 in _clip_leaf(mesh, x0, wv))
        total += w * integral
    return float(total)


def staircase(lamination: MeasuredLamination, deck, points) -> np.ndarray:
    """v(x) = sum_j w_j floor(<x, normal>/h - offset_j): jumps of w_j across each leaf."""
    _, normal, h = leaf_geometry(lamination, deck)
    s = np.atleast_2d(np.asarray(points, dtype=float)) @ normal / h
    out = np.zeros(len(s))
    for _, off, w in lamination.leaves:
        out += w * np.floor(s - off)
    return out


def rs_primitive(lamination: MeasuredLamination, mesh: SurfaceMesh, test_forms=None, seed: int = 0):
    """Staircase primitive of the Ruelle-Sullivan current, interpolated on the mesh.

    Returns the field and a comparison record of pairing(form, dv) against
    the current on the test forms (default: the two coordinate forms and
    the differential of a seeded random periodic function).
    """
    _check_torus(mesh)
    _, normal, h = leaf_geometry(lamination, mesh.deck)
    crossings = np.rint(mesh.deck @ normal / h)
    alpha = lamination.total_weight * crossings
    v = EquivariantField(staircase(lamination, mesh.deck, mesh.vertices), Homomorphism(alpha))
    dv = differential(mesh, v)
    if test_forms is None:
        rng = np.random.default_rng(seed)
        f = EquivariantField(rng.standard_normal(len(mesh.vertices)), Homomorphism(np.zeros(2)))
        F = len(mesh.triangles)
        test_forms = {"dx": PLOneForm(np.tile([1.0, 0.0], (F, 1))),
                      "dy": PLOneForm(np.tile([0.0, 1.0], (F, 1))),
                      "df": differential(mesh, f)}
    rows = []
    for name, form in test_forms.items():
        P = pairing(mesh, form, dv)
        T = ruelle_sullivan(lamination, form, mesh)
        rows.append({"form": name, "pairing": P, "current": T, "error": abs(P - T)})
    W = lamination.total_weight
    record = {"alpha": alpha.tolist(), "crossings": crossings.astype(int).tolist(), "forms": rows,
              "max_error": max(r["error"] for r in rows), "total_weight": W,
              "passed": all(r["error"] <= 1e-8 * max(W, 1e-300) for r in rows)}
    return v, record


def leaf_band(lamination: MeasuredLamination, mesh: SurfaceMesh) -> np.ndarray:
    """Triangles on which the staircase is not constant (the leaves pass through them)."""
    X = mesh.corners
    vals = staircase(lamination, mesh.deck, X.reshape(-1, 2)).reshape(-1, 3)
    return vals.max(axis=1) > vals.min(axis=1)


def lamination_to_json(lam: MeasuredLamination) -> str:
    doc = {"leaves": [{"class": list(c), "offset": o, "weight": w} for c, o, w in lam.leaves],
           "orientation": lam.orientation}
    return json.dumps(doc, sort_keys=True)


def lamination_from_json(text: str) -> MeasuredLamination:
    doc = json.loads(text)
    return MeasuredLamination([(tuple(l["class"]), l["offset"], l["weight"]) for l in doc["leaves"]],
                              doc.get("orientation", 1))


# ----------------------------------------------------------------------------
# BV traces

@dataclass
class BVTrace:
    s: np.ndarray
    g: np.ndarray
    atoms: list
    atom_mass: float
    cantor_mass: float
    ac_mass: float
    total_variation: float
    scale: float                    # sampling resolution
    atom_tol: float
    exponents: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        return {"atoms": [[float(a), float(b)] for a, b in self.atoms], "atom_mass": self.atom_mass,
                "cantor_mass": self.cantor_mass, "ac_mass": self.ac_mass,
                "total_variation": self.total_variation, "scale": self.scale, "atom_tol": self.atom_tol}


def bv_decompose(s, g, atom_tol: float = 0.05, ac_threshold: float = 0.85,
                 windows=(9, 81)) -> BVTrace:
    """Split the variation of sampled g into atoms, an absolutely continuous part and a Cantor part.

    Increments above atom_tol * TV are atoms.  The rest is classified by the
    local scaling exponent of the (atom-free) variation measure, read off two
    nested windows of ``windows`` sample cells: exponent 1 means a bounded
    density (ac), smaller exponents mean mass on a set of lower dimension.
    The split is only meaningful at the sampling scale, which is reported.
    """
    s = np.asarray(s, dtype=float)
    g = np.asarray(g, dtype=float)
    if len(s) < 3 or len(s) != len(g):
        raise ValueError("need at least 3 samples with matching s and g")
    if np.any(np.diff(s) <= 0):
        raise ValueError("s must be strictly increasing")
    inc = np.abs(np.diff(g))
    ds = np.diff(s)
    tv = float(inc.sum())
    n = len(inc)
    if tv == 0:
        return BVTrace(s, g, [], 0.0, 0.0, 0.0, 0.0, float(ds.max()), atom_tol, np.ones(n))
    is_atom = inc > atom_tol * tv
    atoms = [(float(0.5 * (s[i] + s[i + 1])), float(np.diff(g)[i])) for i in np.flatnonzero(is_atom)]
    rest = np.where(is_atom, 0.0, inc)
    cm = np.concatenate([[0.0], np.cumsum(rest)])
    cs = np.concatenate([[0.0], np.cumsum(ds)])

    def window(k, w):
        lo = np.clip(np.arange(n) - w // 2, 0, n)
        hi = np.clip(np.arange(n) + w // 2 + 1, 0, n)
        return cm[hi] - cm[lo], cs[hi] - cs[lo]

    m1, l1 = window(n, windows[0])
    m2, l2 = window(n, windows[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        expo = 1.0 + np.log((m2 / l2) / (m1 / l1)) / np.log(l2 / l1)
    expo = np.where(np.isfinite(expo), expo, 1.0)
    ac = rest[expo > ac_threshold].sum()
    cantor = rest[expo <= ac_threshold].sum()
    return BVTrace(s, g, atoms, float(inc[is_atom].sum()), float(cantor), float(ac), tv,
                   float(ds.max()), atom_tol, expo)


def cantor_staircase(s, depth: int) -> np.ndarray:
    """Depth-limited devil's staircase on [0, 1], linear on the intervals of the last level."""
    x = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    out = np.zeros_like(x)
    active = np.ones(x.shape, dtype=bool)
    w = 1.0
    for _ in range(depth):
        x3 = 3.0 * x
        digit = np.minimum(np.floor(x3), 2.0)
        out += np.where(active & (digit >= 1), 0.5 * w, 0.0)
        active &= digit != 1
        x = x3 - digit
        w *= 0.5
    return out + np.where(active, w * x, 0.0)


def cantor_left_endpoints(depth: int) -> np.ndarray:
    pts = np.array([0.0])
    for k in range(1, depth + 1):
        pts = np.concatenate([pts, pts + 2.0 / 3 ** k])
    return np.sort(pts)


def transverse_trace(mesh: SurfaceMesh, v, a, b, n: int):
    """Samples of the lifted field along the segment a -> b."""
    from .mesh import evaluate

    t = np.linspace(0.0, 1.0, n)
    pts = np.asarray(a, dtype=float) + t[:, None] * (np.asarray(b, dtype=float) - np.asarray(a, dtype=float))
    return t, evaluate(mesh, _field_of(v), pts)


# ----------------------------------------------------------------------------
# seeded transversal families on an annulus

def _polar(r, th):
    return np.array([r * math.cos(th), r * math.sin(th)])


def _radially_monotone(pts):
    """True when |x| is strictly monotone along every chord of the polyline."""
    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        if np.sign(a @ d) != np.sign(b @ d) or abs(b @ d) < 1e-12:
            return False
    return True


def annulus_transversals(dec: PlaqueDecomposition, n: int, seed: int = 0) -> list:
    """Seeded transversals of four kinds: inward, outward, in-and-out, and plaque-only.

    Returns a list of (kind, path, split_index); ``split_index`` is an
    interior vertex that lies in a plaque, or None.
    """
    mesh = dec.mesh
    if mesh.kind != "annulus" or not dec.virtual:
        raise ValueError("annulus transversals need an annulus with a boundary plaque")
    band = dec.labels < 0
    radii = np.hypot(*mesh.vertices.T)
    r_band = float(radii[mesh.triangles[band]].max())
    r_out = float(radii.max()) * math.cos(math.pi / mesh.params["n_theta"])
    vb = dec.virtual[0]["vertices"]
    ang = np.mod(np.arctan2(mesh.vertices[vb, 1], mesh.vertices[vb, 0]), 2 * np.pi)
    order = np.argsort(ang)
    ring = mesh.vertices[np.asarray(vb)[order]]
    rng = np.random.default_rng(seed)
    lo = r_band + 0.25 * (r_out - r_band)

    def boundary_point(th):
        j = int(np.searchsorted(ang[order], np.mod(th, 2 * np.pi))) - 1
        a, b = ring[j % len(ring)], ring[(j + 1) % len(ring)]
        s = rng.uniform(0.05, 0.95)
        return (1 - s) * a + s * b

    def inward(th):
        while True:
            r0 = rng.uniform(lo + 0.3 * (r_out - lo), r_out - 0.02 * (r_out - lo))
            rm = rng.uniform(lo, r0 - 0.1 * (r0 - lo))
            t1 = th + rng.uniform(-0.05, 0.05)
            B = boundary_point(t1 + rng.uniform(-0.05, 0.05))
            pts = np.array([_polar(r0, th), _polar(rm, t1), B])
            if _radially_monotone(pts):
                return pts

    out = []
    for k in range(n):
        th = rng.uniform(0, 2 * np.pi)
        kind = ("inward", "outward", "in-out", "plaque")[k % 4]
        if kind == "inward":
            pts = inward(th)
            out.append((kind, TransversalPath(pts, f"t{k}"), 1))
        elif kind == "outward":
            pts = inward(th)[::-1].copy()
            out.append((kind, TransversalPath(pts, f"t{k}"), 1))
        elif kind == "in-out":
            a = inward(th)
            while True:
                b = inward(math.atan2(a[-1, 1], a[-1, 0]))
                shift = a[-1] - b[-1]
                b = b + shift
                if _radially_monotone(b) and np.hypot(*b.T).max() < r_out:
                    break
            pts = np.concatenate([a, b[::-1][1:]])
            out.append((kind, TransversalPath(pts, f"t{k}"), 2))
        else:
            r0, r1 = rng.uniform(lo + 0.1, r_out - 0.02, size=2)
            t1 = th + rng.uniform(-0.1, 0.1)
            pts = np.array([_polar(r0, th), _polar(0.5 * (r0 + r1), 0.5 * (th + t1)), _polar(r1, t1)])
            out.append((kind, TransversalPath(pts, f"t{k}"), 1))
    return out


def _perturb(path, split, rng, scale):
    P = path.polyline.copy()
    for i in range(1, len(P) - 1):
        if i != split:
            P[i] = P[i] + rng.uniform(-scale, scale, 2)
    return TransversalPath(P, path.path_id + "h")


def cocycle_properties(dec: PlaqueDecomposition, family, seed: int = 0, rel_tol: float = 1e-12) -> dict:
    """Additivity, reversal and homotopy invariance, and sign checks over a transversal family."""
    rng = np.random.default_rng(seed)
    rows, fails = [], {"additivity": [], "reversal": [], "homotopy": [], "nonnegativity": []}
    scale = max(1.0, float(np.abs(dec.constants).max())) * rel_tol
    for kind, path, split in family:
        pcs = good_subdivision(path, dec)
        nu = float(sum(p.nu for p in pcs))
        signs = [p.sign for p in pcs]
        rows.append((path.path_id, nu, signs))
        rev = cocycle(path.reversed(), dec)
        if abs(rev - nu) > scale:
            fails["reversal"].append(path.path_id)
        if split is not None and 0 < split < len(path.polyline) - 1:
            a, b = path.split(split)
            if abs(cocycle(a, dec) + cocycle(b, dec) - nu) > scale:
                fails["additivity"].append(path.path_id)
        try:
            h = _perturb(path, split, rng, 1e-3)
            if abs(cocycle(h, dec) - nu) > scale:
                fails["homotopy"].append(path.path_id)
        except ValueError:
            pass  # the perturbed copy stopped being transverse; not a homotopy through transversals
        if pcs and all(s > 0 for s in signs) and nu < -3 * dec.plaque_tol:
            fails["nonnegativity"].append(path.path_id)
    return {"n_paths": len(family), "rows": rows, "failures": fails,
            "passed": not any(fails.values())}
