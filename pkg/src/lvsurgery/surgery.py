"""Meshes for dynamic and solid 2-dimensional 0-surgery.

A sphere of radius ``r`` has its two polar caps pulled toward the centre.
When the caps touch (the singular instant ``s = 1/2``) they are recoupled:
for ``s > 1/2`` the caps are gone and a cylinder D^1 x S^1 joins the two
boundary circles, so the surface becomes a torus.  The two caps may be
twisted about the pole axis by opposite angles; on the torus side the twist
is carried by the cylinder as a relative rotation of its two ends.

Every surface is a surface of revolution about the z axis, sampled on rings
of ``n_theta`` vertices.  Solid surgery runs the same morph on concentric
layers.  On the torus side each layer's meridional profile is shifted
outward by ``(2s - 1) * c * (1 - r)`` with ``c = (1 + alpha) / 2``, so that
all layers wrap one common core circle of radius ``c`` and stay nested.  The
outermost layer ``r = 1`` is not shifted at all.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.spatial import cKDTree

__all__ = [
    "SingularParameter",
    "ResolutionTooCoarse",
    "NonManifoldMesh",
    "TwistSpec",
    "MorphParams",
    "SurgeryMesh",
    "S_SING",
    "morph_surface",
    "solid_layers",
    "limit_circle",
    "euler_characteristic",
    "edge_face_counts",
    "is_closed_manifold",
    "triangle_areas",
    "hausdorff_distance",
    "points_inside",
    "count_intersections",
    "count_self_intersections",
    "icosahedron",
    "torus_grid",
    "obj_filename",
    "write_obj",
    "read_obj",
]

S_SING = 0.5


class SingularParameter(ValueError):
    """The morph has no manifold mesh at the recoupling instant."""


class ResolutionTooCoarse(ValueError):
    """Too few azimuthal samples to resolve the requested twist."""


class NonManifoldMesh(ValueError):
    """Some edge does not bound exactly two faces."""


@dataclass(frozen=True)
class TwistSpec:
    """Rotation angles (radians) of the top and bottom caps."""

    theta_top: float = 4.0 * math.pi / 3.0
    theta_bottom: float = -4.0 * math.pi / 3.0

    def __post_init__(self):
        for name in ("theta_top", "theta_bottom"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite")
            object.__setattr__(self, name, v)

    @classmethod
    def none(cls) -> "TwistSpec":
        return cls(0.0, 0.0)

    @property
    def max_abs(self) -> float:
        return max(abs(self.theta_top), abs(self.theta_bottom))


@dataclass(frozen=True)
class MorphParams:
    s: float = 0.0
    r: float = 1.0
    twist: TwistSpec = TwistSpec()
    resolution: tuple[int, int] = (32, 32)
    pole_disc_angle: float = math.pi / 8.0

    def __post_init__(self):
        s, r, a = float(self.s), float(self.r), float(self.pole_disc_angle)
        if not (math.isfinite(s) and 0.0 <= s <= 1.0):
            raise ValueError(f"s must lie in [0, 1], got {self.s!r}")
        if not (math.isfinite(r) and 0.0 < r <= 1.0):
            raise ValueError(f"r must lie in (0, 1], got {self.r!r}")
        if not (math.isfinite(a) and 0.0 < a <= math.pi / 4.0):
            raise ValueError(f"pole_disc_angle must lie in (0, pi/4], got {self.pole_disc_angle!r}")
        try:
            n_theta, n_phi = self.resolution
        except (TypeError, ValueError):
            raise ValueError("resolution must be a pair (n_theta, n_phi)") from None
        if int(n_theta) != n_theta or int(n_phi) != n_phi or n_theta < 16 or n_phi < 16:
            raise ValueError(f"resolution entries must be integers >= 16, got {self.resolution!r}")
        if not isinstance(self.twist, TwistSpec):
            raise ValueError("twist must be a TwistSpec")
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "pole_disc_angle", a)
        object.__setattr__(self, "resolution", (int(n_theta), int(n_phi)))

    def replace(self, **kw) -> "MorphParams":
        d = dict(s=self.s, r=self.r, twist=self.twist, resolution=self.resolution,
                 pole_disc_angle=self.pole_disc_angle)
        d.update(kw)
        return MorphParams(**d)

    @property
    def n_theta(self) -> int:
        return self.resolution[0]

    @property
    def n_phi(self) -> int:
        return self.resolution[1]


@dataclass(frozen=True)
class SurgeryMesh:
    """Closed triangle mesh; ``gluing`` holds the vertex indices of the two
    cylinder end circles (empty on the sphere side)."""

    vertices: np.ndarray = field(repr=False)
    faces: np.ndarray = field(repr=False)
    layer_r: float
    morph_s: float
    gluing: tuple = field(default=(), repr=False)

    def __post_init__(self):
        v = np.array(self.vertices, dtype=float)
        f = np.array(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or f.ndim != 2 or f.shape[1] != 3:
            raise ValueError("vertices must be (n, 3) and faces (m, 3)")
        if f.size and (f.min() < 0 or f.max() >= len(v)):
            raise ValueError("face index out of range")
        v.setflags(write=False)
        f.setflags(write=False)
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)
        object.__setattr__(self, "gluing", tuple(np.asarray(g, dtype=np.int64) for g in self.gluing))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def triangles(self) -> np.ndarray:
        return self.vertices[self.faces]

    def signed_volume(self) -> float:
        t = self.triangles()
        return float(np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum() / 6.0)


# ---------------------------------------------------------------- geometry

def _blend(phi, alpha):
    """Cosine bump: 1 at the pole, 0 with zero slope at the cap rim."""
    return np.cos(0.5 * np.pi * np.asarray(phi) / alpha) ** 2


def _ring_counts(mp: MorphParams) -> tuple[int, int, int]:
    """(cap rings, middle segments, cylinder segments)."""
    n_theta, n_phi = mp.resolution
    alpha = mp.pole_disc_angle
    cell = 2.0 * math.pi / n_theta
    # the twist changes by at most (pi/2) * |theta| / m_cap between rings;
    # keep it below one azimuthal cell so that quads stay untangled
    m_cap = max(2, math.ceil(n_phi * alpha / math.pi), math.ceil(0.5 * math.pi * mp.twist.max_abs / cell))
    m_mid = max(4, n_phi - 2 * math.ceil(n_phi * alpha / math.pi))
    m_mid += m_mid % 2  # keeps a ring on the equator
    rel = abs(mp.twist.theta_top - mp.twist.theta_bottom)
    m_cyl = max(4, math.ceil(rel / cell))
    m_cyl += m_cyl % 2
    return m_cap, m_mid, m_cyl


def _sphere_profile(mp: MorphParams):
    """Rings (rho, z, psi) from the top pole to the bottom pole, s < 1/2."""
    m_cap, m_mid, _ = _ring_counts(mp)
    s, r, a = mp.s, mp.r, mp.pole_disc_angle
    depth = 2.0 * s * r
    cap = np.linspace(0.0, a, m_cap + 1)
    w = _blend(cap, a)
    top = np.column_stack([r * np.sin(cap), r * np.cos(cap) - depth * w, s * mp.twist.theta_top * w])
    bot = np.column_stack([r * np.sin(cap), -(r * np.cos(cap) - depth * w), s * mp.twist.theta_bottom * w])[::-1]
    mid_phi = np.linspace(a, np.pi - a, m_mid + 1)[1:-1]
    mid = np.column_stack([r * np.sin(mid_phi), r * np.cos(mid_phi), np.zeros_like(mid_phi)])
    prof = np.vstack([top, mid, bot])
    prof[0, 0] = prof[-1, 0] = 0.0
    return prof


def _core_radius(alpha: float) -> float:
    return 0.5 * (1.0 + alpha)


def _torus_profile(mp: MorphParams):
    """Closed loop of rings (rho, z, psi) for s > 1/2, plus the ring indices
    of the two cylinder ends (top, bottom)."""
    m_cap, m_mid, m_cyl = _ring_counts(mp)
    s, r, a = mp.s, mp.r, mp.pole_disc_angle
    g = 2.0 * s - 1.0
    rho_c = g * a * r
    h = g * 0.5 * r * math.cos(a)
    shift = g * _core_radius(a) * (1.0 - r)
    tt, tb = s * mp.twist.theta_top, s * mp.twist.theta_bottom

    outer_phi = np.linspace(a, np.pi - a, m_mid + 1)
    outer = np.column_stack([r * np.sin(outer_phi), r * np.cos(outer_phi), np.zeros_like(outer_phi)])

    phi = np.linspace(0.0, a, m_cap + 1)  # waist -> rim
    w = _blend(phi, a)
    f_rho = r * np.sin(phi) + rho_c * w
    f_z = r * np.cos(phi) - (r - h) * w
    bottom = np.column_stack([f_rho, -f_z, tb * w])[::-1][1:]  # rim excluded, waist last
    zc = np.linspace(-h, h, m_cyl + 1)[1:-1]
    cyl = np.column_stack([np.full_like(zc, rho_c), zc, tb + (tt - tb) * (zc + h) / (2.0 * h)])
    top = np.column_stack([f_rho, f_z, tt * w])[:-1]  # waist first, rim excluded

    prof = np.vstack([outer, bottom, cyl, top])
    prof[:, 0] += shift
    n_out, n_bot = len(outer), len(bottom)
    bottom_end = n_out + n_bot - 1
    top_end = n_out + n_bot + len(cyl)
    return prof, (top_end, bottom_end)


def _ring_vertices(prof: np.ndarray, n_theta: int) -> np.ndarray:
    theta = 2.0 * np.pi * np.arange(n_theta) / n_theta
    ang = theta[None, :] + prof[:, 2:3]
    rho = prof[:, 0:1]
    return np.stack([rho * np.cos(ang), rho * np.sin(ang), np.broadcast_to(prof[:, 1:2], ang.shape)], axis=-1)


def _strip(a0: int, b0: int, n: int) -> np.ndarray:
    j = np.arange(n)
    k = (j + 1) % n
    t1 = np.column_stack([a0 + j, b0 + j, b0 + k])
    t2 = np.column_stack([a0 + j, b0 + k, a0 + k])
    return np.vstack([t1, t2])


def _orient_outward(v: np.ndarray, f: np.ndarray) -> np.ndarray:
    t = v[f]
    vol = np.einsum("ij,ij->i", t[:, 0], np.cross(t[:, 1], t[:, 2])).sum()
    return f[:, ::-1].copy() if vol < 0 else f


def morph_surface(mp: MorphParams) -> SurgeryMesh:
    """Mesh of the morph at parameter ``mp.s``.

    Raises
    ------
    SingularParameter
        At ``s == 1/2``, where the two caps touch.
    ResolutionTooCoarse
        When ``n_theta < 8 * max|theta| / (2 pi)``.
    """
    if mp.s == S_SING:
        raise SingularParameter("s = 1/2 is the recoupling instant; the surface is pinched there")
    n_theta = mp.n_theta
    if n_theta < 8.0 * mp.twist.max_abs / (2.0 * math.pi):
        raise ResolutionTooCoarse(
            f"n_theta = {n_theta} cannot resolve a twist of {mp.twist.max_abs:.4g} rad "
            f"(need at least {math.ceil(8.0 * mp.twist.max_abs / (2.0 * math.pi))})"
        )
    if mp.s < S_SING:
        prof = _sphere_profile(mp)
        rings = _ring_vertices(prof[1:-1], n_theta)
        n_r = len(rings)
        v = np.vstack([[0.0, 0.0, prof[0, 1]], rings.reshape(-1, 3), [0.0, 0.0, prof[-1, 1]]])
        j = np.arange(n_theta)
        k = (j + 1) % n_theta
        faces = [np.column_stack([np.zeros(n_theta, int), 1 + k, 1 + j])]
        for i in range(n_r - 1):
            faces.append(_strip(1 + i * n_theta, 1 + (i + 1) * n_theta, n_theta))
        last = 1 + (n_r - 1) * n_theta
        south = len(v) - 1
        faces.append(np.column_stack([np.full(n_theta, south), last + j, last + k]))
        f = np.vstack(faces)
        gluing = ()
    else:
        prof, (top_end, bottom_end) = _torus_profile(mp)
        rings = _ring_vertices(prof, n_theta)
        n_r = len(rings)
        v = rings.reshape(-1, 3)
        f = np.vstack([_strip(i * n_theta, ((i + 1) % n_r) * n_theta, n_theta) for i in range(n_r)])
        gluing = (top_end * n_theta + np.arange(n_theta), bottom_end * n_theta + np.arange(n_theta))
    return SurgeryMesh(v, _orient_outward(v, f), mp.r, mp.s, gluing)


def solid_layers(mp: MorphParams, radii: Sequence[float]) -> list[SurgeryMesh]:
    """One morph per concentric layer, same ``s``, twist and disc angle."""
    radii = [float(x) for x in radii]
    if not radii:
        raise ValueError("at least one radius is required")
    if any(not (0.0 < x <= 1.0) for x in radii):
        raise ValueError("radii must lie in (0, 1]")
    if any(b >= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radii must be strictly decreasing")
    return [morph_surface(mp.replace(r=x)) for x in radii]


def _center_circle_radius(mesh: SurgeryMesh) -> float:
    rho = np.hypot(mesh.vertices[:, 0], mesh.vertices[:, 1])
    return 0.5 * (rho.min() + rho.max())


def limit_circle(mp: MorphParams, n_points: int | None = None, probe_radii=(0.04, 0.02, 0.01)) -> np.ndarray:
    """Core circle of the nested tori as a closed polyline, shape ``(n + 1, 3)``.

    The radius is the quadratic extrapolation to ``r = 0`` of the layer
    tori's centre-circle radii at three small ``probe_radii``.  The circle
    lies in the plane z = 0; its first and last vertices coincide.
    """
    if mp.s != 1.0:
        raise ValueError("the limit circle is defined for the completed surgery, s = 1")
    rs = np.asarray(probe_radii, dtype=float)
    if rs.shape != (3,) or len(set(rs)) != 3:
        raise ValueError("probe_radii must be three distinct radii")
    R = np.array([_center_circle_radius(morph_surface(mp.replace(r=x))) for x in rs])
    # Lagrange interpolation evaluated at 0
    radius = 0.0
    for i in range(3):
        others = [rs[j] for j in range(3) if j != i]
        radius += R[i] * np.prod([o / (o - rs[i]) for o in others])
    n = n_points or mp.n_theta
    ang = 2.0 * np.pi * np.arange(n + 1) / n
    pts = np.column_stack([radius * np.cos(ang), radius * np.sin(ang), np.zeros(n + 1)])
    pts[-1] = pts[0]
    return pts


# ---------------------------------------------------------------- checks

def edge_face_counts(faces: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unique undirected edges and the number of faces bounded by each."""
    f = np.asarray(faces)
    e = np.vstack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
    e.sort(axis=1)
    return np.unique(e, axis=0, return_counts=True)


def is_closed_manifold(mesh: SurgeryMesh) -> bool:
    _, counts = edge_face_counts(mesh.faces)
    return bool(np.all(counts == 2))


def euler_characteristic(mesh: SurgeryMesh) -> int:
    """V - E + F, counting unique undirected edges.

    Raises
    ------
    NonManifoldMesh
        If an edge bounds anything other than two faces.
    """
    edges, counts = edge_face_counts(mesh.faces)
    bad = counts != 2
    if np.any(bad):
        raise NonManifoldMesh(f"{int(bad.sum())} edges do not bound exactly two faces, e.g. {edges[bad][0].tolist()}")
    return int(mesh.n_vertices - len(edges) + mesh.n_faces)


def triangle_areas(mesh: SurgeryMesh) -> np.ndarray:
    t = mesh.triangles()
    return 0.5 * np.linalg.norm(np.cross(t[:, 1] - t[:, 0], t[:, 2] - t[:, 0]), axis=1)


def hausdorff_distance(a: SurgeryMesh, b: SurgeryMesh) -> float:
    """Symmetric Hausdorff distance between the vertex sets."""
    da, _ = cKDTree(b.vertices).query(a.vertices)
    db, _ = cKDTree(a.vertices).query(b.vertices)
    return float(max(da.max(), db.max()))


def _ray_hits(orig, d, tri, eps=1e-12):
    """Möller-Trumbore: parameters ``t`` of hits of rays with triangles (broadcasting)."""
    e1 = tri[..., 1, :] - tri[..., 0, :]
    e2 = tri[..., 2, :] - tri[..., 0, :]
    p = np.cross(d, e2)
    det = np.einsum("...i,...i->...", e1, p)
    ok = np.abs(det) > eps
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    tv = orig - tri[..., 0, :]
    u = np.einsum("...i,...i->...", tv, p) * inv
    q = np.cross(tv, e1)
    v = np.einsum("...i,...i->...", d, q) * inv
    t = np.einsum("...i,...i->...", e2, q) * inv
    hit = ok & (u >= 0) & (v >= 0) & (u + v <= 1)
    return t, hit


def points_inside(mesh: SurgeryMesh, points) -> np.ndarray:
    """Ray-casting containment test (odd number of crossings = inside).

    The ray direction is a fixed generic vector so that it avoids the
    edges and vertices of the structured meshes produced here.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    d = np.array([0.5377, 0.2839, 0.7938])
    d /= np.linalg.norm(d)
    tri = mesh.triangles()
    out = np.empty(len(pts), dtype=bool)
    for i, p in enumerate(pts):
        t, hit = _ray_hits(p, d, tri)
        out[i] = np.count_nonzero(hit & (t > 0)) % 2 == 1
    return out


def _segments_hit(p0, p1, tri):
    t, hit = _ray_hits(p0, p1 - p0, tri)
    return hit & (t >= 0) & (t <= 1)


def _plane_separates(P, Q):
    """True where all vertices of triangles ``Q`` lie strictly on one side of
    the plane of triangles ``P``."""
    n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    d = np.einsum("kij,kj->ki", Q - P[:, None, 0], n)
    return np.all(d > 0, axis=1) | np.all(d < 0, axis=1)


def count_intersections(a: SurgeryMesh, b: SurgeryMesh, chunk: int = 200_000) -> int:
    return _count_pairs(a, b, False, chunk)


def count_self_intersections(mesh: SurgeryMesh, chunk: int = 200_000) -> int:
    """Intersecting pairs of triangles that share no vertex (each pair once)."""
    return _count_pairs(mesh, mesh, True, chunk)


def _count_pairs(a: SurgeryMesh, b: SurgeryMesh, same: bool, chunk: int) -> int:
    """Number of intersecting triangle pairs between two meshes.

    Candidates come from bounding spheres and boxes and are thinned by the
    two plane-side rejections; a surviving pair intersects when an edge of
    either triangle pierces the other.  Exactly coplanar contact is not
    detected, which does not occur for the meshes compared here.
    """
    ta, tb = a.triangles(), b.triangles()
    ca, cb = ta.mean(axis=1), tb.mean(axis=1)
    ra = np.linalg.norm(ta - ca[:, None], axis=2).max(axis=1)
    rb = np.linalg.norm(tb - cb[:, None], axis=2).max(axis=1)
    lists = cKDTree(cb).query_ball_point(ca, ra + rb.max())
    ia = np.repeat(np.arange(len(lists)), [len(x) for x in lists])
    if ia.size == 0:
        return 0
    ib = np.concatenate([np.asarray(x, dtype=np.int64) for x in lists])
    lo_a, hi_a = ta.min(axis=1), ta.max(axis=1)
    lo_b, hi_b = tb.min(axis=1), tb.max(axis=1)
    total = 0
    for k in range(0, len(ia), chunk):
        i, j = ia[k:k + chunk], ib[k:k + chunk]
        keep = np.linalg.norm(ca[i] - cb[j], axis=1) <= ra[i] + rb[j]
        keep &= np.all((lo_a[i] <= hi_b[j]) & (lo_b[j] <= hi_a[i]), axis=1)
        if same:
            fa, fb = a.faces[i], b.faces[j]
            shared = np.any(fa[:, :, None] == fb[:, None, :], axis=(1, 2))
            keep &= (i < j) & ~shared
        i, j = i[keep], j[keep]
        A, B = ta[i], tb[j]
        keep = ~(_plane_separates(A, B) | _plane_separates(B, A))
        A, B = A[keep], B[keep]
        hit = np.zeros(len(A), dtype=bool)
        for u, v in ((0, 1), (1, 2), (2, 0)):
            hit |= _segments_hit(A[:, u], A[:, v], B)
            hit |= _segments_hit(B[:, u], B[:, v], A)
        total += int(hit.sum())
    return total


# ---------------------------------------------------------------- reference meshes

def icosahedron(radius: float = 1.0) -> SurgeryMesh:
    p = (1.0 + math.sqrt(5.0)) / 2.0
    v = np.array([
        [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
        [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
        [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
    ], dtype=float)
    v *= radius / np.linalg.norm(v[0])
    f = np.array([
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ])
    return SurgeryMesh(v, f, radius, 0.0)


def torus_grid(major: float = 1.0, minor: float = 0.3, n_u: int = 24, n_v: int = 12) -> SurgeryMesh:
    u = 2.0 * np.pi * np.arange(n_u) / n_u
    w = 2.0 * np.pi * np.arange(n_v) / n_v
    prof = np.column_stack([major + minor * np.cos(w), minor * np.sin(w), np.zeros(n_v)])
    v = _ring_vertices(prof, n_u).reshape(-1, 3)
    f = np.vstack([_strip(i * n_u, ((i + 1) % n_v) * n_u, n_u) for i in range(n_v)])
    return SurgeryMesh(v, _orient_outward(v, f), 1.0, 1.0)


# ---------------------------------------------------------------- OBJ

def obj_filename(s: float, r: float) -> str:
    return f"morph_s{s:g}_r{r:g}.obj"


def write_obj(mesh: SurgeryMesh, directory: str | os.PathLike = ".", filename: str | None = None) -> str:
    """Write ``v x y z`` / ``f i j k`` (1-based) lines and return the path."""
    path = os.path.join(os.fspath(directory), filename or obj_filename(mesh.morph_s, mesh.layer_r))
    lines = [f"# morph s={mesh.morph_s!r} r={mesh.layer_r!r}"]
    lines += ["v %.17g %.17g %.17g" % tuple(p) for p in mesh.vertices]
    lines += ["f %d %d %d" % tuple(t + 1) for t in mesh.faces]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_obj(path: str | os.PathLike) -> tuple[np.ndarray, np.ndarray]:
    verts, faces = [], []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(x.split("/")[0]) - 1 for x in parts[1:4]])
    return np.array(verts, dtype=float).reshape(-1, 3), np.array(faces, dtype=np.int64).reshape(-1, 3)
