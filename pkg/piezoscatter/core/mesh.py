import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, Tuple

import numpy as np

from piezoscatter.core.exceptions import (
    DimensionError,
    MeshError,
    MeshOrientationError,
    MeshWatertightError,
)

logger = logging.getLogger(__name__)

# Faces of a tetrahedron, each listed with the index of the opposite vertex
TET_FACES = ((1, 2, 3, 0), (0, 3, 2, 1), (0, 1, 3, 2), (0, 2, 1, 3))


@dataclass(frozen=True, eq=False)
class CoupledMesh:
    """
    Interior tetrahedral mesh of the solid with its matched boundary surface.

    ``boundary_tris`` are oriented so that (b - a) x (c - a) points out of the
    solid; ``tri_to_tet`` names the cell owning each boundary face. Use
    ``validate_mesh`` (or ``CoupledMesh.build``) to get a checked instance.
    """

    vertices: np.ndarray
    tets: np.ndarray
    boundary_tris: np.ndarray
    tri_to_tet: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, vertices, tets, boundary_tris, tri_to_tet=None) -> "CoupledMesh":
        """Construct and validate a mesh; ``tri_to_tet`` is derived when omitted."""
        vertices = np.ascontiguousarray(vertices, dtype=float)
        tets = np.ascontiguousarray(tets, dtype=np.int64)
        boundary_tris = np.ascontiguousarray(boundary_tris, dtype=np.int64)
        if tri_to_tet is None:
            tri_to_tet = owning_cells(tets, boundary_tris)
        mesh = cls(vertices, tets, boundary_tris, np.asarray(tri_to_tet, np.int64))
        validate_mesh(mesh)
        for array in (mesh.vertices, mesh.tets, mesh.boundary_tris, mesh.tri_to_tet):
            array.setflags(write=False)
        return mesh

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_tets(self) -> int:
        return len(self.tets)

    @property
    def n_tris(self) -> int:
        return len(self.boundary_tris)

    @cached_property
    def tet_volumes(self) -> np.ndarray:
        p = self.vertices[self.tets]
        edges = p[:, 1:] - p[:, :1]
        return np.linalg.det(edges) / 6.0

    @cached_property
    def tet_gradients(self) -> np.ndarray:
        """Constant gradients of the four P1 hat functions per cell, (M, 4, 3)."""
        p = self.vertices[self.tets]
        jac = (p[:, 1:] - p[:, :1]).transpose(0, 2, 1)
        inv_t = np.linalg.inv(jac).transpose(0, 2, 1)
        ref = np.array([[-1.0, -1.0, -1.0], [1, 0, 0], [0, 1, 0], [0, 0, 1]])
        return np.einsum("aj,mkj->mak", ref, inv_t)

    @cached_property
    def tet_centroids(self) -> np.ndarray:
        return self.vertices[self.tets].mean(axis=1)

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        """Sorted global indices of vertices on the boundary (Dirichlet DOFs)."""
        return np.unique(self.boundary_tris)

    @cached_property
    def boundary_index(self) -> Dict[int, int]:
        return {int(v): k for k, v in enumerate(self.boundary_vertices)}

    @cached_property
    def tris_local(self) -> np.ndarray:
        """Boundary triangles indexed into ``boundary_vertices``."""
        return np.searchsorted(self.boundary_vertices, self.boundary_tris)

    @cached_property
    def tri_points(self) -> np.ndarray:
        return self.vertices[self.boundary_tris]

    @cached_property
    def tri_raw_normals(self) -> np.ndarray:
        p = self.tri_points
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def tri_areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self.tri_raw_normals, axis=1)

    @cached_property
    def tri_normals(self) -> np.ndarray:
        return self.tri_raw_normals / (2.0 * self.tri_areas[:, None])

    @cached_property
    def tri_centroids(self) -> np.ndarray:
        return self.tri_points.mean(axis=1)

    @cached_property
    def tri_diameters(self) -> np.ndarray:
        p = self.tri_points
        lengths = np.stack(
            [
                np.linalg.norm(p[:, a] - p[:, b], axis=1)
                for a, b in ((0, 1), (1, 2), (2, 0))
            ]
        )
        return lengths.max(axis=0)

    @cached_property
    def h_max(self) -> float:
        """Largest edge length over all cells."""
        p = self.vertices[self.tets]
        pairs = [(a, b) for a in range(4) for b in range(a + 1, 4)]
        return float(
            max(np.linalg.norm(p[:, a] - p[:, b], axis=1).max() for a, b in pairs)
        )

    @cached_property
    def center(self) -> np.ndarray:
        return self.vertices.mean(axis=0)

    @cached_property
    def circumradius(self) -> float:
        """Radius of the ball about ``center`` containing every vertex."""
        return float(np.linalg.norm(self.vertices - self.center, axis=1).max())

    @cached_property
    def diameter(self) -> float:
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    @property
    def volume(self) -> float:
        return float(self.tet_volumes.sum())

    def euler_characteristic(self) -> int:
        """V - E + F of the boundary surface."""
        edges = {tuple(sorted(e)) for e in _tri_edges(self.boundary_tris)}
        return len(self.boundary_vertices) - len(edges) + self.n_tris

    def contains(self, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        """Point-in-mesh test by barycentric coordinates on every cell."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        p = self.vertices[self.tets]
        jac = p[:, 1:] - p[:, :1]
        inv = np.linalg.inv(jac.transpose(0, 2, 1))
        inside = np.zeros(len(points), dtype=bool)
        for k, x in enumerate(points):
            lam = np.einsum("mij,mj->mi", inv, x - p[:, 0])
            bary = np.concatenate([1.0 - lam.sum(axis=1, keepdims=True), lam], axis=1)
            inside[k] = bool(np.any(np.all(bary >= -tol, axis=1)))
        return inside

    def distance_to_boundary(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance from each point to the boundary surface."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        tri = self.tri_points
        return np.array(
            [point_triangle_distances(x, tri).min() for x in points], dtype=float
        )


def _tri_edges(tris: np.ndarray):
    for a, b, c in tris:
        yield (int(a), int(b))
        yield (int(b), int(c))
        yield (int(c), int(a))


def owning_cells(tets: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Map every boundary triangle to the cell that has it as a face."""
    face_owner: Dict[Tuple[int, ...], int] = {}
    for m, cell in enumerate(tets):
        for a, b, c, _ in TET_FACES:
            face_owner[tuple(sorted((int(cell[a]), int(cell[b]), int(cell[c]))))] = m
    owners = np.empty(len(tris), dtype=np.int64)
    for k, t in enumerate(tris):
        key = tuple(sorted(int(v) for v in t))
        if key not in face_owner:
            raise MeshError(f"boundary triangle {k} {key} is not a face of any cell")
        owners[k] = face_owner[key]
    return owners


def boundary_faces(tets: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Outward-oriented faces that belong to exactly one cell, with owners."""
    counts: Counter = Counter()
    oriented = {}
    for m, cell in enumerate(tets):
        for a, b, c, _ in TET_FACES:
            face = (int(cell[a]), int(cell[b]), int(cell[c]))
            key = tuple(sorted(face))
            counts[key] += 1
            oriented[key] = (face, m)
    faces = [oriented[k] for k in sorted(oriented) if counts[k] == 1]
    tris = np.array([f for f, _ in faces], dtype=np.int64).reshape(-1, 3)
    owners = np.array([m for _, m in faces], dtype=np.int64)
    return tris, owners


def validate_mesh(mesh: CoupledMesh) -> None:
    """
    Check every mesh invariant eagerly.

    Raises:
        DimensionError: On malformed arrays or out-of-range indices
        MeshOrientationError: On non-positive cell volume or inward face normal
        MeshWatertightError: On an open or non-manifold boundary edge
        MeshError: When boundary triangles disagree with the cell faces
    """
    v, tets, tris = mesh.vertices, mesh.tets, mesh.boundary_tris
    if v.ndim != 2 or v.shape[1] != 3:
        raise DimensionError(f"vertices must be (N, 3), got {v.shape}")
    if tets.ndim != 2 or tets.shape[1] != 4 or len(tets) == 0:
        raise DimensionError(f"tets must be (M, 4) with M >= 1, got {tets.shape}")
    if tris.ndim != 2 or tris.shape[1] != 3:
        raise DimensionError(f"boundary_tris must be (K, 3), got {tris.shape}")
    if len(mesh.tri_to_tet) != len(tris):
        raise DimensionError("tri_to_tet length must match boundary_tris")
    for name, idx in (("tets", tets), ("tris", tris)):
        if idx.size and (idx.min() < 0 or idx.max() >= len(v)):
            raise MeshError(f"{name} reference vertices outside 0..{len(v) - 1}")
    owners = mesh.tri_to_tet
    if owners.size and (owners.min() < 0 or owners.max() >= len(tets)):
        raise MeshError(f"owning cells outside 0..{len(tets) - 1}")

    volumes = mesh.tet_volumes
    bad = np.flatnonzero(volumes <= 0.0)
    if bad.size:
        raise MeshOrientationError(
            f"cell {bad[0]} has non-positive volume {volumes[bad[0]]:.3e}", int(bad[0])
        )

    expected, _ = boundary_faces(tets)
    expected_keys = {tuple(sorted(f)) for f in expected.tolist()}
    given_keys = [tuple(sorted(f)) for f in tris.tolist()]
    if len(set(given_keys)) != len(given_keys):
        raise MeshError("boundary triangulation lists a face twice")
    if set(given_keys) != expected_keys:
        missing = sorted(expected_keys - set(given_keys))
        extra = sorted(set(given_keys) - expected_keys)
        raise MeshError(
            f"boundary triangles disagree with cell faces: missing {missing[:3]}, "
            f"unexpected {extra[:3]}"
        )

    for k, (t, m) in enumerate(zip(tris, mesh.tri_to_tet)):
        cell = tets[m]
        if not set(t.tolist()) <= set(cell.tolist()):
            raise MeshError(f"boundary triangle {k} is not a face of cell {m}")
        opposite = v[[i for i in cell if i not in t][0]]
        a, b, c = v[t]
        if np.dot(np.cross(b - a, c - a), opposite - a) >= 0.0:
            raise MeshOrientationError(f"boundary triangle {k} has an inward normal", k)

    directed = Counter(_tri_edges(tris))
    undirected = Counter(tuple(sorted(e)) for e in directed.elements())
    for edge, count in undirected.items():
        if count != 2:
            raise MeshWatertightError(
                f"edge {edge} is shared by {count} boundary triangles", edge
            )
    for edge, count in directed.items():
        if count != 1:
            raise MeshWatertightError(f"edge {edge} is not consistently oriented", edge)
    logger.debug(
        f"Validated mesh: {len(v)} vertices, {len(tets)} cells, {len(tris)} faces"
    )


def point_triangle_distances(x: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Distances from one point to each triangle of ``tri`` (K, 3, 3)."""
    a, b, c = tri[:, 0], tri[:, 1], tri[:, 2]
    ab, ac = b - a, c - a
    n = np.cross(ab, ac)
    nn = np.einsum("ij,ij->i", n, n)
    # Barycentric coordinates of the projection of x
    ap = x - a
    w_b = np.einsum("ij,ij->i", np.cross(ap, ac), n) / nn
    w_c = np.einsum("ij,ij->i", np.cross(ab, ap), n) / nn
    w_a = 1.0 - w_b - w_c
    inside = (w_a >= 0) & (w_b >= 0) & (w_c >= 0)
    plane = np.abs(np.einsum("ij,ij->i", ap, n)) / np.sqrt(nn)
    edge = np.min(
        np.stack(
            [
                _segment_distance(x, a, b),
                _segment_distance(x, b, c),
                _segment_distance(x, c, a),
            ]
        ),
        axis=0,
    )
    return np.where(inside, plane, edge)


def _segment_distance(x, p, q):
    d = q - p
    t = np.clip(np.einsum("ij,ij->i", x - p, d) / np.einsum("ij,ij->i", d, d), 0.0, 1.0)
    return np.linalg.norm(x - (p + t[:, None] * d), axis=1)
