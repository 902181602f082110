from .interfaces import OracleResult
from .services import deterministic_vertices, enumerate_optimum, regularized_optimum

__all__ = [
    "OracleResult",
    "deterministic_vertices",
    "enumerate_optimum",
    "regularized_optimum",
]
