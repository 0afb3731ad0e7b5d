"""Shipped mesh primitives and uniform refinement."""

import itertools
import logging
from typing import Dict, Tuple

import numpy as np

from piezoscatter.core.exceptions import ConfigError
from piezoscatter.core.mesh import CoupledMesh, boundary_faces

logger = logging.getLogger(__name__)


def _orient(vertices: np.ndarray, tets: np.ndarray) -> np.ndarray:
    """Swap two vertices of every negatively oriented cell."""
    p = vertices[tets]
    vol = np.linalg.det(p[:, 1:] - p[:, :1])
    tets = tets.copy()
    flip = vol < 0
    tets[flip, 2], tets[flip, 3] = tets[flip, 3], tets[flip, 2].copy()
    return tets


def _from_cells(vertices: np.ndarray, tets: np.ndarray) -> CoupledMesh:
    tets = _orient(vertices, np.asarray(tets, dtype=np.int64))
    tris, owners = boundary_faces(tets)
    return CoupledMesh.build(vertices, tets, tris, owners)


def reference_tet() -> CoupledMesh:
    vertices = np.array(
        [[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
    )
    return _from_cells(vertices, np.array([[0, 1, 2, 3]]))


def cube(n: int = 1, length: float = 1.0) -> CoupledMesh:
    """
    Cube [0, length]^3 with n^3 cells, each split into six tetrahedra.

    Every sub-cube is cut along its main diagonal (Kuhn split) so the
    triangulation is conforming across neighbours.
    """
    if n < 1:
        raise ConfigError(f"cube resolution must be >= 1, got {n}")
    ticks = np.linspace(0.0, length, n + 1)
    x, y, z = np.meshgrid(ticks, ticks, ticks, indexing="ij")
    vertices = np.stack([x.ravel(), y.ravel(), z.ravel()], axis=1)

    def node(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    tets = []
    for i, j, k in itertools.product(range(n), repeat=3):
        # corner index bit pattern: x + 2y + 4z
        corner = [
            node(i + (c & 1), j + ((c >> 1) & 1), k + ((c >> 2) & 1)) for c in range(8)
        ]
        for perm in itertools.permutations((1, 2, 4)):
            path = [0, perm[0], perm[0] + perm[1], 7]
            tets.append([corner[c] for c in path])
    mesh = _from_cells(vertices, np.array(tets))
    logger.debug(f"Built cube mesh n={n}: {mesh.n_tets} cells")
    return mesh


def _icosahedron() -> Tuple[np.ndarray, np.ndarray]:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )  # fmt: skip
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )  # fmt: skip
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere_surface(level: int) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-sphere triangulation by repeated 4-to-1 subdivision."""
    vertices, faces = _icosahedron()
    vertices = list(vertices)
    for _ in range(level):
        cache: Dict[Tuple[int, int], int] = {}

        def midpoint(a, b):
            key = (min(a, b), max(a, b))
            if key not in cache:
                m = vertices[a] + vertices[b]
                vertices.append(m / np.linalg.norm(m))
                cache[key] = len(vertices) - 1
            return cache[key]

        refined = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            refined += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        faces = np.array(refined)
    return np.array(vertices), np.asarray(faces)


def icosphere(level: int = 1, radius: float = 1.0) -> CoupledMesh:
    """
    Ball of the given radius: icosphere surface coned to the centre.

    Level 0 has 12 boundary vertices and 20 faces; each level quadruples
    the face count.
    """
    if level < 0:
        raise ConfigError(f"icosphere level must be >= 0, got {level}")
    surface, faces = icosphere_surface(level)
    vertices = np.vstack([radius * surface, np.zeros((1, 3))])
    centre = len(vertices) - 1
    tets = np.column_stack([np.full(len(faces), centre), faces])
    mesh = _from_cells(vertices, tets)
    logger.debug(f"Built icosphere level={level}: {mesh.n_tris} boundary faces")
    return mesh


def refine(mesh: CoupledMesh) -> CoupledMesh:
    """Uniform red refinement: every cell split into eight."""
    vertices = list(mesh.vertices)
    cache: Dict[Tuple[int, int], int] = {}

    def midpoint(a, b):
        key = (min(a, b), max(a, b))
        if key not in cache:
            vertices.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
            cache[key] = len(vertices) - 1
        return cache[key]

    cells = []
    for v0, v1, v2, v3 in mesh.tets.tolist():
        m01, m02, m03 = midpoint(v0, v1), midpoint(v0, v2), midpoint(v0, v3)
        m12, m13, m23 = midpoint(v1, v2), midpoint(v1, v3), midpoint(v2, v3)
        cells += [
            [v0, m01, m02, m03],
            [m01, v1, m12, m13],
            [m02, m12, v2, m23],
            [m03, m13, m23, v3],
            # inner octahedron cut along the m02-m13 diagonal
            [m01, m02, m03, m13],
            [m01, m02, m12, m13],
            [m02, m03, m13, m23],
            [m02, m12, m13, m23],
        ]
    refined = _from_cells(np.array(vertices), np.array(cells))
    logger.debug(f"Refined mesh: {mesh.n_tets} -> {refined.n_tets} cells")
    return refined


def build_primitive(kind: str, size: int = 1) -> CoupledMesh:
    """Dispatch for the ``make-mesh`` command: tet, cube or icosphere."""
    if kind == "tet":
        mesh = reference_tet()
        for _ in range(max(size - 1, 0)):
            mesh = refine(mesh)
        return mesh
    if kind == "cube":
        return cube(size)
    if kind == "icosphere":
        return icosphere(size)
    raise ConfigError(f"unknown mesh primitive {kind!r}; expected tet, cube, icosphere")
