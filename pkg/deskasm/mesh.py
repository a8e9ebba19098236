"""
Triangle meshes: OBJ loading, convex hulls, face clustering, mass properties,
ray casting and a handful of primitives used by scenes and tests.

Geometry queries delegate to :mod:`trimesh`; :class:`TriMesh` keeps the
immutable vertex/triangle arrays the planners index into.
"""
import logging
import math
import os
from collections import deque
from dataclasses import dataclass, field

import numpy as np
import trimesh
from scipy.spatial import ConvexHull, QhullError

from deskasm.errors import (DegenerateGeometryError, EmptyMeshError, MeshError, MeshParseError,
                            NonWatertightError)
from deskasm.se3 import Pose

logger = logging.getLogger(__name__)

AREA_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class TriMesh:
    """
    Vertices in meters and vertex-index triangles.  Degenerate triangles are
    dropped on construction; ``watertight`` is recorded once.
    """
    vertices:  np.ndarray
    triangles: np.ndarray
    watertight: bool = field(init=False)
    dropped:    int  = field(init=False)
    tm: trimesh.Trimesh = field(init=False, repr=False)

    def __post_init__(self):
        V = np.array(self.vertices, dtype=float).reshape(-1, 3)
        F = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        if len(F) and (F.min() < 0 or F.max() >= len(V)):
            raise MeshParseError(f"triangle index out of range (have {len(V)} vertices)")
        tm = trimesh.Trimesh(vertices=V, faces=F, process=False)
        keep = tm.area_faces > AREA_EPS
        dropped = int((~keep).sum())
        if dropped:
            logger.warning("dropped %d degenerate triangle(s)", dropped)
            F = F[keep]
            tm = trimesh.Trimesh(vertices=V, faces=F, process=False)
        V.setflags(write=False)
        F.setflags(write=False)
        object.__setattr__(self, "vertices", V)
        object.__setattr__(self, "triangles", F)
        object.__setattr__(self, "dropped", dropped)
        object.__setattr__(self, "tm", tm)
        object.__setattr__(self, "watertight", _is_watertight(tm))

    # ---------- derived quantities --------------------------------------
    @property
    def face_normals(self) -> np.ndarray:
        return np.asarray(self.tm.face_normals)

    @property
    def face_areas(self) -> np.ndarray:
        return np.asarray(self.tm.area_faces)

    @property
    def area(self) -> float:
        return float(self.tm.area)

    @property
    def centroid(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @property
    def bounding_radius(self) -> float:
        """Radius of the sphere around the vertex centroid enclosing the mesh."""
        return float(np.linalg.norm(self.vertices - self.centroid, axis=1).max())

    def transformed(self, pose: Pose) -> "TriMesh":
        return TriMesh(pose.transform_points(self.vertices), self.triangles)

    def edges(self) -> np.ndarray:
        return np.asarray(self.tm.edges_unique)

    @classmethod
    def from_trimesh(cls, tm: trimesh.Trimesh) -> "TriMesh":
        return cls(np.asarray(tm.vertices), np.asarray(tm.faces))


def _is_watertight(tm: trimesh.Trimesh) -> bool:
    """Closed two-manifold of genus zero (every edge shared by two faces)."""
    if len(tm.faces) == 0 or not tm.is_watertight:
        return False
    n_vertices = len(np.unique(tm.faces))
    return n_vertices - len(tm.edges_unique) + len(tm.faces) == 2


# ---------------------------------------------------------------- io
def _check_obj(path: str) -> None:
    """
    Validate the ``v``/``f`` records of an OBJ file so malformed input is
    reported with its line number before trimesh parses it.
    """
    n_verts = n_faces = 0
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            tag, *rest = line.split()
            if tag == "v":
                if len(rest) < 3:
                    raise MeshParseError("vertex needs 3 coordinates", lineno)
                try:
                    [float(x) for x in rest[:3]]
                except ValueError as exc:
                    raise MeshParseError(f"bad vertex coordinate ({exc})", lineno) from exc
                n_verts += 1
            elif tag == "f":
                if len(rest) < 3:
                    raise MeshParseError("face needs at least 3 vertices", lineno)
                try:
                    idx = [int(tok.split("/")[0]) for tok in rest]
                except ValueError as exc:
                    raise MeshParseError(f"bad face index ({exc})", lineno) from exc
                for i in idx:
                    k = i - 1 if i > 0 else n_verts + i
                    if i == 0 or k < 0 or k >= n_verts:
                        raise MeshParseError(f"face index {i} out of range (have {n_verts} vertices)", lineno)
                n_faces += 1
    if not n_verts or not n_faces:
        raise EmptyMeshError(f"{path}: no vertices/faces")


def load_mesh(path: str, scale: float = 1.0) -> TriMesh:
    """
    Load a Wavefront OBJ with trimesh (polygons triangulated, vertex order
    kept).  Records are checked first so parse errors carry a line number.
    """
    if not os.path.isfile(path):
        raise MeshError(f"mesh file not found: {path}")
    _check_obj(path)
    try:
        loaded = trimesh.load(path, file_type="obj", force="mesh", process=False)
    except Exception as exc:
        raise MeshParseError(f"{path}: {exc}") from exc
    if not isinstance(loaded, trimesh.Trimesh) or len(loaded.faces) == 0:
        raise EmptyMeshError(f"{path}: no triangles")
    mesh = TriMesh(np.asarray(loaded.vertices) * scale, np.asarray(loaded.faces))
    if len(mesh.triangles) == 0:
        raise EmptyMeshError(f"{path}: all faces degenerate")
    logger.debug("[mesh] loaded %s: %d vertices, %d triangles", path, len(mesh.vertices), len(mesh.triangles))
    return mesh


def save_obj(mesh: TriMesh, path: str) -> None:
    mesh.tm.export(path, file_type="obj", include_normals=False, include_texture=False)


def export_ply(path: str, points: np.ndarray, normals: np.ndarray | None = None,
               triangles: np.ndarray | None = None) -> None:
    """ASCII PLY of a point cloud or a mesh (``x y z [nx ny nz]``)."""
    geom = trimesh.Trimesh(vertices=np.asarray(points, dtype=float).reshape(-1, 3), faces=triangles,
                           vertex_normals=normals, process=False)
    data = trimesh.exchange.ply.export_ply(geom, encoding="ascii", vertex_normal=normals is not None)
    with open(path, "wb") as f:
        f.write(data)


def read_ply(path: str) -> tuple[np.ndarray, np.ndarray | None]:
    """Vertices and, when stored, vertex normals of a PLY file."""
    with open(path, "rb") as f:
        try:
            kwargs = trimesh.exchange.ply.load_ply(f)
        except Exception as exc:
            raise MeshParseError(f"{path}: {exc}") from exc
    points = np.asarray(kwargs["vertices"], dtype=float).reshape(-1, 3)
    normals = kwargs.get("vertex_normals")
    if normals is not None:
        normals = np.asarray(normals, dtype=float).reshape(-1, 3)
        normals = normals / np.linalg.norm(normals, axis=1, keepdims=True)
    return points, normals


# ---------------------------------------------------------------- hull
def convex_hull(points: np.ndarray) -> TriMesh:
    """Watertight, outward-oriented convex hull; vertices are a subset of *points*."""
    pts = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(pts) < 4:
        raise DegenerateGeometryError("convex hull needs at least 4 points")
    s = np.linalg.svd(pts - pts.mean(axis=0), compute_uv=False)
    if s[0] == 0.0 or s[2] / s[0] < 1e-9:
        raise DegenerateGeometryError("points are coplanar or collinear")
    try:
        hull = ConvexHull(pts)
    except QhullError as exc:
        raise DegenerateGeometryError(f"qhull failed: {exc}") from exc
    keep = np.sort(hull.vertices)
    remap = -np.ones(len(pts), dtype=np.int64)
    remap[keep] = np.arange(len(keep))
    tris = remap[hull.simplices]
    V = pts[keep]
    n = np.cross(V[tris[:, 1]] - V[tris[:, 0]], V[tris[:, 2]] - V[tris[:, 0]])
    flip = np.einsum("ij,ij->i", n, hull.equations[:, :3]) < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    return TriMesh(V, tris)


# ---------------------------------------------------------------- clustering
@dataclass(frozen=True, eq=False)
class FaceCluster:
    triangles: np.ndarray
    normal:    np.ndarray   # area-weighted mean of the member normals
    area:      float
    boundary:  np.ndarray   # ordered (k, 3) loop


def _adjacency(F: np.ndarray) -> list[list[int]]:
    edge_faces: dict[tuple[int, int], list[int]] = {}
    for fi, tri in enumerate(F):
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            edge_faces.setdefault((min(a, b), max(a, b)), []).append(fi)
    adj = [[] for _ in range(len(F))]
    for faces in edge_faces.values():
        for i in faces:
            adj[i].extend(j for j in faces if j != i)
    return adj


def _boundary_loop(F: np.ndarray) -> list[int]:
    directed = set()
    for tri in F:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            directed.add((int(a), int(b)))
    nxt = {}
    for a, b in sorted(directed):
        if (b, a) not in directed:
            nxt.setdefault(a, b)
    if not nxt:
        return []
    best: list[int] = []
    seen: set[int] = set()
    for start in sorted(nxt):
        if start in seen:
            continue
        loop, v = [], start
        while v not in seen and v in nxt:
            seen.add(v)
            loop.append(v)
            v = nxt[v]
        if len(loop) > len(best):
            best = loop
    return best


def cluster_faces(mesh: TriMesh, angle_tol: float = 0.05) -> list[FaceCluster]:
    """
    Region-growing over triangle adjacency.  A neighbour joins when its normal
    is within *angle_tol* of the cluster's running area-weighted mean normal
    and of every member already in the cluster, so no member ever strays more
    than *angle_tol* from the reported normal.  Seeds are taken in triangle
    order, so the partition is deterministic.
    """
    F = mesh.triangles
    normals, areas = mesh.face_normals, mesh.face_areas
    adj = _adjacency(F)
    label = -np.ones(len(F), dtype=np.int64)
    cos_tol = math.cos(angle_tol)
    clusters = []
    for seed in range(len(F)):
        if label[seed] >= 0:
            continue
        cid = len(clusters)
        label[seed] = cid
        members, queue = [seed], deque([seed])
        acc = normals[seed] * areas[seed]
        while queue:
            i = queue.popleft()
            for j in adj[i]:
                if label[j] >= 0:
                    continue
                mean = acc / np.linalg.norm(acc)
                if float(normals[j] @ mean) < cos_tol:
                    continue
                if float((normals[members] @ normals[j]).min()) < cos_tol:
                    continue
                label[j] = cid
                members.append(j)
                queue.append(j)
                acc = acc + normals[j] * areas[j]
        members = np.array(sorted(members))
        loop = _boundary_loop(F[members])
        clusters.append(FaceCluster(members, acc / np.linalg.norm(acc), float(areas[members].sum()),
                                    mesh.vertices[loop]))
    return clusters


# ---------------------------------------------------------------- mass properties
def volume(mesh: TriMesh) -> float:
    if not mesh.watertight:
        raise NonWatertightError("volume needs a watertight mesh")
    return float(mesh.tm.volume)


def center_of_mass(mesh: TriMesh) -> np.ndarray:
    """Uniform-density centroid of a closed mesh."""
    if not mesh.watertight:
        raise NonWatertightError("center of mass needs a watertight mesh")
    return np.array(mesh.tm.center_mass, dtype=float)


# ---------------------------------------------------------------- sampling / rays
def sample_surface(mesh: TriMesh, n: int, rng: np.random.Generator,
                   triangles: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Area-weighted uniform samples: (points, normals, triangle indices).
    With *triangles* only those faces are sampled.
    """
    weight = None
    if triangles is not None:
        weight = np.zeros(len(mesh.triangles))
        ids = np.asarray(triangles, dtype=np.int64)
        weight[ids] = mesh.face_areas[ids]
    pts, pick = trimesh.sample.sample_surface(mesh.tm, n, face_weight=weight, seed=rng)
    pick = np.asarray(pick, dtype=np.int64)
    return np.asarray(pts, dtype=float), mesh.face_normals[pick], pick


def intersect_rays(mesh: TriMesh, origins: np.ndarray, directions: np.ndarray,
                   t_min: float = 1e-9) -> tuple[np.ndarray, np.ndarray]:
    """
    Nearest hit per ray.  Returns ``(t, triangle)`` with ``t`` measured in
    units of the (not necessarily unit) direction; rays that miss get
    ``t = inf`` and ``triangle = -1``.  Hits closer than *t_min* are ignored.
    """
    D = np.asarray(directions, dtype=float).reshape(-1, 3)
    O = np.array(np.broadcast_to(np.asarray(origins, dtype=float).reshape(-1, 3), D.shape))
    best_t = np.full(len(D), np.inf)
    best_f = np.full(len(D), -1, dtype=np.int64)
    if len(D) == 0 or len(mesh.triangles) == 0:
        return best_t, best_f
    loc, ray, tri = mesh.tm.ray.intersects_location(O, D, multiple_hits=True)
    if len(ray) == 0:
        return best_t, best_f
    ray = np.asarray(ray, dtype=np.int64)
    t = np.einsum("ij,ij->i", np.asarray(loc) - O[ray], D[ray]) / np.einsum("ij,ij->i", D[ray], D[ray])
    ok = t > t_min
    t, ray, tri = t[ok], ray[ok], np.asarray(tri, dtype=np.int64)[ok]
    order = np.lexsort((t, ray))
    first_ray, first = np.unique(ray[order], return_index=True)
    best_t[first_ray] = t[order][first]
    best_f[first_ray] = tri[order][first]
    return best_t, best_f


# ---------------------------------------------------------------- primitives
def extrude_polygon(polygon: np.ndarray, cap_triangles, height: float, z0: float = 0.0) -> TriMesh:
    """Prism over a CCW polygon; *cap_triangles* triangulate the polygon (CCW)."""
    P = np.asarray(polygon, dtype=float)
    k = len(P)
    V = np.vstack([np.column_stack([P, np.full(k, z0)]), np.column_stack([P, np.full(k, z0 + height)])])
    F = []
    for a, b, c in cap_triangles:
        F.append([a, c, b])
        F.append([a + k, b + k, c + k])
    for i in range(k):
        j = (i + 1) % k
        F.append([i, j, j + k])
        F.append([i, j + k, i + k])
    return TriMesh(V, np.array(F))


def box(extents=(1.0, 1.0, 1.0), center=(0.0, 0.0, 0.0)) -> TriMesh:
    transform = trimesh.transformations.translation_matrix(np.asarray(center, dtype=float))
    return TriMesh.from_trimesh(trimesh.creation.box(extents=np.asarray(extents, dtype=float),
                                                     transform=transform))


def tetrahedron(edge: float = 1.0) -> TriMesh:
    V = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float) * edge / (2 * math.sqrt(2))
    return TriMesh.from_trimesh(trimesh.convex.convex_hull(V))


def l_prism(leg: float = 0.06, width: float = 0.01, height: float = 0.02) -> TriMesh:
    """An L-shaped plate, bounding box centred on the origin."""
    poly = np.array([[0, 0], [leg, 0], [leg, width], [width, width], [width, leg], [0, leg]], dtype=float)
    m = extrude_polygon(poly, [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5)], height)
    return TriMesh(m.vertices - np.array([leg / 2, leg / 2, height / 2]), m.triangles)


def icosphere(subdivisions: int = 1, radius: float = 1.0) -> TriMesh:
    return TriMesh.from_trimesh(trimesh.creation.icosphere(subdivisions=subdivisions, radius=radius))


def merge_meshes(meshes: list[TriMesh]) -> TriMesh:
    """Concatenate meshes into one triangle soup (for rendering whole scenes)."""
    return TriMesh.from_trimesh(trimesh.util.concatenate([m.tm for m in meshes]))


def quad(width: float, depth: float, center=(0.0, 0.0, 0.0)) -> TriMesh:
    """Horizontal rectangle facing +z (a table top for rendering)."""
    a, b = width / 2, depth / 2
    V = np.array([[-a, -b, 0], [a, -b, 0], [a, b, 0], [-a, b, 0]], dtype=float) + np.asarray(center, dtype=float)
    return TriMesh(V, np.array([[0, 1, 2], [0, 2, 3]]))
