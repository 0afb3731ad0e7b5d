# Exception hierarchy shared by every layer
from typing import Optional, Tuple


class PiezoScatterError(Exception):
    """Base class for all errors raised by piezoscatter."""

    pass


class MeshError(PiezoScatterError):
    """Raised when a mesh file or mesh object violates its contract."""

    pass


class MeshParseError(MeshError):
    """Raised when a mesh file cannot be parsed."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")


class MeshOrientationError(MeshError):
    """Raised when a cell has non-positive volume or a face normal points inward."""

    def __init__(self, message: str, index: int):
        self.index = index
        super().__init__(message)


class MeshWatertightError(MeshError):
    """Raised when the boundary triangulation is not a closed surface."""

    def __init__(self, message: str, edge: Tuple[int, int]):
        self.edge = edge
        super().__init__(message)


class ConfigError(PiezoScatterError):
    """Raised when a problem configuration is invalid."""

    pass


class ConfigSchemaError(ConfigError):
    """Raised when a configuration document does not match the schema."""

    pass


class MaterialConstraintError(ConfigError):
    """Raised when the pyroelectric moduli violate the well-posedness constraint."""

    def __init__(self, p_norm: float, dielectric_eps: float, heat_ratio: float):
        self.p_norm = p_norm
        self.dielectric_eps = dielectric_eps
        self.heat_ratio = heat_ratio
        super().__init__(
            f"pyroelectric constraint violated: ||p|| = {p_norm:.6g} must be below "
            f"min(eps = {dielectric_eps:.6g}, c_eps/T0 = {heat_ratio:.6g})"
        )


class DimensionError(PiezoScatterError):
    """Raised when array shapes do not match the mesh or operator they act on."""

    pass


class SingularityError(PiezoScatterError):
    """Raised when a kernel is evaluated at coincident points."""

    pass


class QuadratureError(PiezoScatterError):
    """Raised for unsupported quadrature requests or degenerate panels."""

    pass


class SingularSystemError(PiezoScatterError):
    """Raised when the coupled block system cannot be factorized."""

    def __init__(self, s: complex, condition: Optional[float] = None):
        self.s = s
        self.condition = condition
        cond = "unknown" if condition is None else f"{condition:.3e}"
        super().__init__(f"singular block system at s = {s}: condition ~ {cond}")


class ConvergenceError(PiezoScatterError):
    """Raised when the iterative solver stops above its residual tolerance."""

    def __init__(self, s: complex, residual: float, tolerance: float):
        self.s = s
        self.residual = residual
        self.tolerance = tolerance
        super().__init__(
            f"GMRES stopped at s = {s} with relative residual {residual:.3e} "
            f"above {tolerance:.1e}"
        )


class FrequencySolveError(PiezoScatterError):
    """Raised when a symbol evaluation fails at one of the CQ frequencies."""

    def __init__(self, index: int, s: complex, cause: Exception):
        self.index = index
        self.s = s
        self.cause = cause
        super().__init__(f"frequency {index} (s = {s}) failed: {cause}")


class ProbeError(PiezoScatterError):
    """Raised when a probe point is too close to the boundary or on the wrong side."""

    pass


class TransformUnavailableError(PiezoScatterError):
    """Raised when a wavelet has no closed-form Laplace transform."""

    pass


class SymbolFitError(PiezoScatterError):
    """Raised when a growth-exponent fit is degenerate."""

    pass


class PersistenceError(PiezoScatterError):
    """Raised when reading or writing a file fails."""

    def __init__(self, message: str, path):
        self.path = path
        super().__init__(f"{path}: {message}")
