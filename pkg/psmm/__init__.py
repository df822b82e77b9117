"""Perfectly secure distributed matrix multiplication over prime fields."""

from .bilinear import (
    BilinearScheme,
    DenseOperator,
    SchemeOperator,
    load_scheme,
    naive_scheme,
    strassen_scheme,
)
from .exceptions import PSMMError
from .field import FieldElement, FieldSpec
from .linalg import FieldMatrix, MultCounter
from .protocol import DofConstraint, ProtocolConfig, Transcript, run_protocol
from .sharing import SharingParams

__all__ = [
    "BilinearScheme",
    "DenseOperator",
    "DofConstraint",
    "FieldElement",
    "FieldMatrix",
    "FieldSpec",
    "MultCounter",
    "PSMMError",
    "ProtocolConfig",
    "SchemeOperator",
    "SharingParams",
    "Transcript",
    "load_scheme",
    "naive_scheme",
    "run_protocol",
    "strassen_scheme",
]
