"""Elliptic coefficient fields sampled on grid faces.

Fields are real, symmetric and diagonal: axis d carries one scalar sample
per face orthogonal to d (face between cells i and i+1 along that axis).
The generators produce piecewise-constant scalar fields a(x) Id; diagonal
anisotropic fields can be constructed directly.  Nonsymmetric coefficients
are a documented extension point, not implemented.

The integrability exponents q(A) and Q = q(A*)' cannot be computed from
discrete data and are carried as configuration, defaulting to q(A) = inf
and Q = 10/7.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np

from .errors import NotElliptic, ShapeError
from .geometry import GridSpec

__all__ = [
    "EllipticityBounds",
    "CoefficientField",
    "generate_field",
    "ellipticity_bounds",
    "save_field",
    "load_field",
]

DEFAULT_Q_LOWER = 10.0 / 7.0  # Q = q(A*)' configuration default


@dataclass(frozen=True)
class EllipticityBounds:
    lower: float
    upper: float

    def __post_init__(self):
        if not (0 < self.lower <= self.upper):
            raise NotElliptic(
                f"need 0 < lambda <= Lambda, got ({self.lower}, {self.upper})")


@dataclass
class CoefficientField:
    """Per-axis face samples of a diagonal coefficient matrix.

    ``faces[d]`` has the grid shape; entry at index i is the coefficient on
    the face between cell i and cell i+1 (periodically) along axis d.
    """

    grid: GridSpec
    faces: tuple[np.ndarray, ...]
    kind: str = "custom"
    regular: bool = False
    q_upper: float = np.inf            # q(A); theory input, configured
    q_lower: float = DEFAULT_Q_LOWER   # Q = q(A*)'; configured

    def __post_init__(self):
        if len(self.faces) != self.grid.dimension:
            raise ShapeError("need one face array per axis")
        faces = []
        for f in self.faces:
            f = np.asarray(f, dtype=float)
            if f.shape != self.grid.shape:
                raise ShapeError(f"face array shape {f.shape} != {self.grid.shape}")
            faces.append(f)
        self.faces = tuple(faces)
        if not 1 <= self.q_lower < 2:
            raise NotElliptic(f"Q must lie in [1, 2), got {self.q_lower}")
        ellipticity_bounds(self)  # raises NotElliptic on degenerate faces

    def cell_matrices(self) -> np.ndarray:
        """Diagonal matrix per cell, faces averaged onto centers.

        Shape (*grid.shape, dimension); used by the ellipticity certificate.
        """
        diags = []
        for d, f in enumerate(self.faces):
            diags.append(0.5 * (f + np.roll(f, 1, axis=d)))
        return np.stack(diags, axis=-1)

    def is_isotropic(self) -> bool:
        return all(np.array_equal(f, self.faces[0]) for f in self.faces[1:])


def generate_field(grid: GridSpec, kind: str, contrast: tuple[float, float],
                   cells: int = 8, seed: int = 0,
                   regular: bool | None = None,
                   q_upper: float = np.inf,
                   q_lower: float = DEFAULT_Q_LOWER) -> CoefficientField:
    """Build a scalar-isotropic piecewise-constant field a(x) Id.

    kind 'constant' gives a = a_low everywhere; 'checkerboard' draws each
    coarse cell independently from {a_low, a_high}; 'layered' alternates
    stripes along the first axis.  ``cells`` must divide the point count.
    """
    a_low, a_high = contrast
    if not (0 < a_low <= a_high):
        raise NotElliptic(f"need 0 < a_low <= a_high, got {contrast}")
    if grid.points % cells != 0:
        raise ShapeError(f"cells={cells} must divide points={grid.points}")
    block = grid.points // cells

    if kind == "constant":
        scalar = np.full(grid.shape, a_low)
    elif kind == "checkerboard":
        rng = np.random.default_rng(seed)
        coarse = rng.choice([a_low, a_high], size=(cells,) * grid.dimension)
        scalar = np.kron(coarse, np.ones((block,) * grid.dimension))
    elif kind == "layered":
        stripes = np.where(np.arange(cells) % 2 == 0, a_low, a_high)
        line = np.repeat(stripes, block)
        scalar = line if grid.dimension == 1 else np.tile(line[:, None],
                                                          (1, grid.points))
    else:
        raise ShapeError(f"unknown coefficient kind {kind!r}")

    # Face value = sample of a at the face midpoint, limit from the lower
    # cell where the midpoint sits on a jump.  Keeps the face sample set
    # equal to the contrast pair exactly.
    faces = [scalar.copy() for _ in range(grid.dimension)]
    if regular is None:
        regular = kind == "constant"
    return CoefficientField(grid, tuple(faces), kind=kind, regular=regular,
                            q_upper=q_upper, q_lower=q_lower)


def identity_field(grid: GridSpec) -> CoefficientField:
    """A = Id; regular by convention."""
    return generate_field(grid, "constant", (1.0, 1.0))


def ellipticity_bounds(fld: CoefficientField) -> EllipticityBounds:
    """Smallest eigenvalue / largest operator norm over all faces.

    For diagonal fields these are the min and max face samples.  Raises
    NotElliptic if any face is degenerate.
    """
    lo = min(float(np.min(f)) for f in fld.faces)
    hi = max(float(np.max(f)) for f in fld.faces)
    if not lo > 0:
        raise NotElliptic(f"degenerate face: min coefficient {lo} <= 0")
    return EllipticityBounds(lo, hi)


def certify_ellipticity(fld: CoefficientField, directions: int = 1000,
                        seed: int = 0) -> int:
    """Count violations of the two-sided bound on random directions.

    Checks lambda |xi|^2 <= A xi . xi and |A xi| <= Lambda |xi| for
    ``directions`` random (cell, direction) pairs; returns the number of
    violations (0 certifies the reported bounds).
    """
    bounds = ellipticity_bounds(fld)
    rng = np.random.default_rng(seed)
    diags = fld.cell_matrices().reshape(-1, fld.grid.dimension)
    idx = rng.integers(0, diags.shape[0], size=directions)
    xi = rng.normal(size=(directions, fld.grid.dimension))
    a = diags[idx]
    quad = np.sum(a * xi**2, axis=1)
    norm2 = np.sum(xi**2, axis=1)
    image2 = np.sum((a * xi) ** 2, axis=1)
    tol = 1e-12
    viol = np.count_nonzero(quad < bounds.lower * norm2 * (1 - tol))
    viol += np.count_nonzero(image2 > bounds.upper**2 * norm2 * (1 + tol))
    return int(viol)


def save_field(fld: CoefficientField, dest: str | TextIO) -> None:
    """Serialize to the flat text format: header then one line per face.

    Line format: ``axis index... value`` with C-order multi-indices.
    """
    own = isinstance(dest, str)
    fh: TextIO = open(dest, "w") if own else dest
    try:
        g = fld.grid
        fh.write(f"# roughheat coefficient field v1\n")
        fh.write(f"dimension {g.dimension}\n")
        fh.write(f"points {g.points}\n")
        fh.write(f"length {g.length!r}\n")
        fh.write(f"kind {fld.kind}\n")
        fh.write(f"regular {int(fld.regular)}\n")
        fh.write(f"q_upper {fld.q_upper!r}\n")
        fh.write(f"q_lower {fld.q_lower!r}\n")
        for d, f in enumerate(fld.faces):
            for idx in np.ndindex(*g.shape):
                coords = " ".join(str(i) for i in idx)
                fh.write(f"{d} {coords} {float(f[idx])!r}\n")
    finally:
        if own:
            fh.close()


def load_field(src: str | TextIO) -> CoefficientField:
    """Inverse of :func:`save_field`."""
    own = isinstance(src, str)
    fh: TextIO = open(src) if own else src
    try:
        header: dict[str, str] = {}
        lines = []
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if parts[0].isalpha() or parts[0] in ("q_upper", "q_lower"):
                header[parts[0]] = parts[1]
            else:
                lines.append(parts)
        grid = GridSpec(int(header["dimension"]), int(header["points"]),
                        float(header["length"]))
        faces = [np.empty(grid.shape) for _ in range(grid.dimension)]
        for parts in lines:
            d = int(parts[0])
            idx = tuple(int(p) for p in parts[1:-1])
            faces[d][idx] = float(parts[-1])
        return CoefficientField(
            grid, tuple(faces), kind=header.get("kind", "custom"),
            regular=bool(int(header.get("regular", "0"))),
            q_upper=float(header.get("q_upper", "inf")),
            q_lower=float(header.get("q_lower", str(DEFAULT_Q_LOWER))),
        )
    finally:
        if own:
            fh.close()


def field_to_text(fld: CoefficientField) -> str:
    buf = io.StringIO()
    save_field(fld, buf)
    return buf.getvalue()
