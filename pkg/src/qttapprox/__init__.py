"""Tensor-train encodings of b-adic spline systems with complexity accounting.

Submodules
----------
tensorizer  digit encoding of points
tt          tensor trains over tensorized coordinates
complexity  complexity measures and a-priori bounds
splines     spline systems, quasi-interpolants and encoders
measure     quadrature, moduli of smoothness and Besov seminorms
experiments reproducible rate experiments
"""
from .kernels import BACKEND
from .tensorizer import DigitAddress, EncodingParams, decode_point, encode_point, encode_points
from .tt import TTFunction
from .complexity import ComplexityReport

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "EncodingParams",
    "DigitAddress",
    "encode_point",
    "decode_point",
    "encode_points",
    "TTFunction",
    "ComplexityReport",
]
