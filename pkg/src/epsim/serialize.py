"""JSON encoding helpers: complex numbers as [re, im] pairs."""

from __future__ import annotations

import numpy as np

from .errors import ShapeError


def cnum(z) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def cmat_flat(m: np.ndarray) -> list[list[float]]:
    """Row-major flat list of [re, im] pairs."""
    return [cnum(z) for z in np.asarray(m, dtype=complex).reshape(-1)]


def parse_cmat_flat(entries, rows: int, cols: int) -> np.ndarray:
    if len(entries) != rows * cols:
        raise ShapeError(f"expected {rows * cols} entries, got {len(entries)}")
    flat = np.array([complex(re, im) for re, im in entries])
    return flat.reshape(rows, cols)


def cmat_nested(m: np.ndarray):
    """Nested rows/cols list of [re, im] pairs."""
    m = np.asarray(m, dtype=complex)
    return [[cnum(z) for z in row] for row in m]


def parse_cmat_nested(data) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in data])


def cvec(v: np.ndarray) -> list[list[float]]:
    return [cnum(z) for z in np.asarray(v, dtype=complex).reshape(-1)]


def parse_cvec(entries) -> np.ndarray:
    return np.array([complex(re, im) for re, im in entries])
