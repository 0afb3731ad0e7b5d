from abc import ABC, abstractmethod
from pathlib import Path
from typing import Generic, TypeVar, Union

from piezoscatter.core.exceptions import PersistenceError

ModelType = TypeVar("ModelType")
PathLike = Union[str, Path]


class BaseFileRepository(Generic[ModelType], ABC):
    """Base repository with common text-file load/save operations."""

    def __init__(self, encoding: str = "utf-8"):
        self.encoding = encoding

    @abstractmethod
    def parse(self, text: str) -> ModelType:
        """Build a model from file contents."""

    @abstractmethod
    def format(self, obj: ModelType) -> str:
        """Render a model as file contents."""

    def read_text(self, path: PathLike) -> str:
        """Read a whole file, surfacing I/O failures with the path."""
        try:
            return Path(path).read_text(encoding=self.encoding)
        except OSError as e:
            raise PersistenceError(f"cannot read file: {e.strerror or e}", path)

    def write_text(self, path: PathLike, text: str) -> Path:
        target = Path(path)
        try:
            if target.parent and not target.parent.exists():
                target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(text, encoding=self.encoding)
        except OSError as e:
            raise PersistenceError(f"cannot write file: {e.strerror or e}", path)
        return target

    def load(self, path: PathLike) -> ModelType:
        """Read and parse a file."""
        return self.parse(self.read_text(path))

    def save(self, obj: ModelType, path: PathLike) -> Path:
        """Format and write a file."""
        return self.write_text(path, self.format(obj))
