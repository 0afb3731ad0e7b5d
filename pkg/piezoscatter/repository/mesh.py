import logging
from typing import List, Tuple

import numpy as np

from piezoscatter.core.exceptions import MeshParseError
from piezoscatter.core.mesh import CoupledMesh
from piezoscatter.repository.base import BaseFileRepository

logger = logging.getLogger(__name__)

SECTIONS = (("vertices", 3, float), ("tets", 4, int), ("tris", 4, int))


class _Lines:
    """Cursor over the significant lines of a mesh file."""

    def __init__(self, text: str):
        self.items: List[Tuple[int, str]] = []
        for number, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0]
            if line.strip():
                self.items.append((number, line))
        self.pos = 0

    def next(self, expected: str) -> Tuple[int, str]:
        if self.pos >= len(self.items):
            last = self.items[-1][0] if self.items else 0
            raise MeshParseError(
                f"unexpected end of file, expected {expected}", last + 1
            )
        item = self.items[self.pos]
        self.pos += 1
        return item

    def done(self) -> bool:
        return self.pos >= len(self.items)


def _tokens(line: str) -> List[Tuple[int, str]]:
    """Whitespace tokens with 1-based column numbers."""
    out, col = [], 0
    for part in line.split():
        col = line.index(part, col)
        out.append((col + 1, part))
        col += len(part)
    return out


class MeshRepository(BaseFileRepository[CoupledMesh]):
    """
    ASCII mesh files.

    Layout, one record per line, ``#`` starts a comment::

        vertices N
        x y z
        tets M
        a b c d
        tris K
        a b c owning_tet

    Indices are 0-based. Triangles are listed with outward orientation.
    """

    def parse(self, text: str) -> CoupledMesh:
        lines = _Lines(text)
        arrays = {}
        for name, width, kind in SECTIONS:
            number, header = lines.next(f"'{name} <count>' header")
            tokens = _tokens(header)
            if len(tokens) != 2 or tokens[0][1] != name:
                raise MeshParseError(f"expected '{name} <count>' header", number)
            count = self._number(tokens[1], int, number)
            if count < 0:
                raise MeshParseError("count must be non-negative", number, tokens[1][0])
            rows = []
            for _ in range(count):
                number, line = lines.next(f"{name} record")
                tokens = _tokens(line)
                if len(tokens) != width:
                    column = tokens[min(width, len(tokens) - 1)][0]
                    raise MeshParseError(
                        f"{name} record needs {width} values, got {len(tokens)}",
                        number,
                        column,
                    )
                rows.append([self._number(tok, kind, number) for tok in tokens])
            arrays[name] = np.array(rows, dtype=float if kind is float else np.int64)
        if not lines.done():
            number, _ = lines.next("end of file")
            raise MeshParseError("unexpected content after tris section", number)

        tris = arrays["tris"].reshape(-1, 4)
        mesh = CoupledMesh.build(
            arrays["vertices"].reshape(-1, 3),
            arrays["tets"].reshape(-1, 4),
            tris[:, :3],
            tris[:, 3],
        )
        logger.info(
            f"Loaded mesh: {mesh.n_vertices} vertices, {mesh.n_tets} cells, "
            f"{mesh.n_tris} boundary faces"
        )
        return mesh

    @staticmethod
    def _number(token: Tuple[int, str], kind, line: int):
        column, text = token
        try:
            value = kind(text)
        except ValueError:
            raise MeshParseError(
                f"cannot read {text!r} as {kind.__name__}", line, column
            )
        if kind is int and not -(2**63) <= value < 2**63:
            raise MeshParseError(f"index {text!r} out of range", line, column)
        if kind is float and not np.isfinite(value):
            raise MeshParseError(f"non-finite coordinate {text!r}", line, column)
        return value

    def format(self, mesh: CoupledMesh) -> str:
        out = [f"vertices {mesh.n_vertices}"]
        out += [" ".join(f"{x:.17g}" for x in v) for v in mesh.vertices]
        out.append(f"tets {mesh.n_tets}")
        out += [" ".join(str(int(i)) for i in t) for t in mesh.tets]
        out.append(f"tris {mesh.n_tris}")
        out += [
            " ".join(str(int(i)) for i in (*t, m))
            for t, m in zip(mesh.boundary_tris, mesh.tri_to_tet)
        ]
        return "\n".join(out) + "\n"


def load_mesh(path) -> CoupledMesh:
    return MeshRepository().load(path)
