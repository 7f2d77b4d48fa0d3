"""Verifiable, input- and function-private delegation of matrix-vector products to multiple servers."""

from .covering import CoveringScheme, pi_s, pi_w, validate
from .field import (
    DEFAULT_PRIME,
    FieldElement,
    FieldMatrix,
    FieldModulus,
    FieldRandom,
    FieldVector,
    count_ops,
    mat_vec_mul,
)
from .protocol import (
    VerificationFailed,
    compute,
    delegate,
    key_gen,
    prob_gen,
    verify,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_PRIME",
    "CoveringScheme",
    "FieldElement",
    "FieldMatrix",
    "FieldModulus",
    "FieldRandom",
    "FieldVector",
    "VerificationFailed",
    "compute",
    "count_ops",
    "delegate",
    "key_gen",
    "mat_vec_mul",
    "pi_s",
    "pi_w",
    "prob_gen",
    "validate",
    "verify",
]
