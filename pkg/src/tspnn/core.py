"""Instance and tour model, Euclidean geometry, seeding and TSPLIB I/O.

Random streams: every seed is a 64-bit unsigned integer fed to numpy's
``default_rng``, i.e. a PCG64 bit generator. The same seed therefore
reproduces the same instance, initialisation and solver trajectory on any
platform numpy supports.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, InstanceTooSmall, InvalidTour, Unsupported

SEED_MAX = 2**64 - 1


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed (a Generator is passed through)."""
    if isinstance(seed, np.random.Generator):
        return seed
    seed = int(seed)
    if not 0 <= seed <= SEED_MAX:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(seed)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TspInstance:
    name: str
    coords: np.ndarray
    dist: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.coords)

    def __eq__(self, other):
        if not isinstance(other, TspInstance):
            return NotImplemented
        return (self.name == other.name
                and np.array_equal(self.coords, other.coords)
                and np.array_equal(self.dist, other.dist))

    __hash__ = None


@dataclass(frozen=True)
class Tour:
    order: tuple
    length: float

    def __post_init__(self):
        arr = validate_order(self.order, len(self.order))
        if not (self.length >= 0.0 and math.isfinite(self.length)):
            raise InvalidTour(f"tour length must be finite and non-negative, got {self.length}")
        object.__setattr__(self, "order", tuple(int(v) for v in arr))
        object.__setattr__(self, "length", float(self.length))

    @property
    def n(self) -> int:
        return len(self.order)

    def canonical(self) -> "Tour":
        return Tour(canonical_order(self.order), self.length)

    def edges(self):
        """Undirected tour edges as sorted (i, j) pairs, closing edge included."""
        o = self.order
        n = len(o)
        return [tuple(sorted((o[k], o[(k + 1) % n]))) for k in range(n)]


def pairwise_distances(coords: np.ndarray) -> np.ndarray:
    diff = coords[:, None, :] - coords[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    # exact symmetry and zero diagonal regardless of rounding order
    d = np.minimum(d, d.T)
    np.fill_diagonal(d, 0.0)
    return d


def build_instance(coords, name: str = "instance") -> TspInstance:
    pts = np.asarray(coords, dtype=np.float64)
    if pts.ndim != 2 or (pts.size and pts.shape[1] != 2):
        raise ValueError(f"coords must be a list of 2-D points, got shape {pts.shape}")
    if len(pts) < 3:
        raise InstanceTooSmall(f"need at least 3 points, got {len(pts)}")
    if not np.all(np.isfinite(pts)):
        raise ValueError("coordinates must be finite")
    return TspInstance(name=name, coords=_frozen(pts), dist=_frozen(pairwise_distances(pts)))


def random_instance(n: int, seed, name: str | None = None) -> TspInstance:
    """``n`` points uniform on the unit square [0, 1)^2."""
    if n < 3:
        raise InstanceTooSmall(f"need at least 3 points, got {n}")
    rng = make_rng(seed)
    pts = rng.random((n, 2))
    if name is None:
        name = f"rand_{n}_{seed}" if not isinstance(seed, np.random.Generator) else f"rand_{n}"
    return build_instance(pts, name)


def validate_order(order, n: int) -> np.ndarray:
    """Return ``order`` as an int array, raising InvalidTour unless it is a permutation of 0..n-1."""
    try:
        arr = np.asarray(order)
    except Exception as exc:  # ragged input etc.
        raise InvalidTour(f"not a node sequence: {exc}") from None
    if arr.ndim != 1 or len(arr) != n:
        raise InvalidTour(f"tour must list {n} nodes, got shape {arr.shape}")
    if arr.dtype.kind not in "iu":
        if arr.dtype.kind == "f" and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        else:
            raise InvalidTour("tour entries must be integers")
    arr = arr.astype(np.int64)
    if n and (arr.min() < 0 or arr.max() >= n):
        raise InvalidTour("tour index out of range")
    if len(np.unique(arr)) != n:
        raise InvalidTour("tour visits a node more than once")
    return arr


def tour_length(inst: TspInstance, order) -> float:
    arr = validate_order(order, inst.n)
    return float(inst.dist[arr, np.roll(arr, -1)].sum())


def make_tour(inst: TspInstance, order) -> Tour:
    arr = validate_order(order, inst.n)
    return Tour(tuple(int(v) for v in arr), float(inst.dist[arr, np.roll(arr, -1)].sum()))


def canonical_order(order: Sequence[int]) -> tuple:
    """Rotate so node 0 leads, then orient so that order[1] < order[-1]."""
    o = [int(v) for v in order]
    k = o.index(0)
    o = o[k:] + o[:k]
    if len(o) > 2 and o[1] > o[-1]:
        o = [o[0]] + o[:0:-1]
    return tuple(o)


def rotate(order: Sequence[int], k: int) -> list:
    o = list(order)
    k %= len(o)
    return o[k:] + o[:k]


# -- TSPLIB subset ----------------------------------------------------------

_HEADER = ("NAME", "TYPE", "DIMENSION", "EDGE_WEIGHT_TYPE")
_KV = re.compile(r"^\s*([A-Z_]+)\s*:\s*(.*?)\s*$")


def serialize_tsplib(inst: TspInstance) -> str:
    lines = [
        f"NAME: {inst.name}",
        "TYPE: TSP",
        f"DIMENSION: {inst.n}",
        "EDGE_WEIGHT_TYPE: EUC_2D",
        "NODE_COORD_SECTION",
    ]
    for i, (x, y) in enumerate(inst.coords, start=1):
        lines.append(f"{i} {_fmt(x)} {_fmt(y)}")
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def _fmt(v: float) -> str:
    s = f"{v:.9f}".rstrip("0")
    return s + "0" if s.endswith(".") else s


def parse_tsplib(text: str) -> TspInstance:
    """Parse the EUC_2D TSPLIB subset written by :func:`serialize_tsplib`.

    Header keywords must appear exactly once each, in the order NAME, TYPE,
    DIMENSION, EDGE_WEIGHT_TYPE, followed by NODE_COORD_SECTION, DIMENSION
    coordinate lines with 1-based indices, and EOF.
    """
    lines = [(no, ln.strip()) for no, ln in enumerate(text.splitlines(), start=1)]
    lines = [(no, ln) for no, ln in lines if ln]
    header = {}
    pos = 0
    expected = list(_HEADER)
    while pos < len(lines):
        no, ln = lines[pos]
        if ln == "NODE_COORD_SECTION":
            break
        m = _KV.match(ln)
        if not m:
            raise FormatError(f"unexpected line {ln!r}", no)
        key, value = m.groups()
        if key not in _HEADER:
            raise FormatError(f"unknown keyword {key}", no)
        if key in header:
            raise FormatError(f"duplicate keyword {key}", no)
        if key == "EDGE_WEIGHT_TYPE" and value != "EUC_2D":
            raise Unsupported(f"EDGE_WEIGHT_TYPE {value} is not supported")
        if key != expected[0]:
            raise FormatError(f"missing {expected[0]}", no)
        expected.pop(0)
        header[key] = (no, value)
        pos += 1
    last_no = lines[-1][0] if lines else 1
    if expected:
        raise FormatError(f"missing {expected[0]}", lines[pos][0] if pos < len(lines) else last_no)
    if header["TYPE"][1] != "TSP":
        raise Unsupported(f"TYPE {header['TYPE'][1]} is not supported")
    dim_no, dim_text = header["DIMENSION"]
    try:
        dim = int(dim_text)
    except ValueError:
        raise FormatError(f"DIMENSION is not an integer: {dim_text!r}", dim_no) from None
    if dim < 3:
        raise InstanceTooSmall(f"DIMENSION {dim} < 3")
    if pos >= len(lines):
        raise FormatError("missing NODE_COORD_SECTION", last_no)
    pos += 1
    coords = np.empty((dim, 2))
    for k in range(dim):
        if pos >= len(lines):
            raise FormatError(f"expected {dim} coordinate lines, got {k}", last_no)
        no, ln = lines[pos]
        parts = ln.split()
        if len(parts) != 3:
            raise FormatError(f"bad coordinate line {ln!r}", no)
        try:
            idx = int(parts[0])
            x, y = float(parts[1]), float(parts[2])
        except ValueError:
            raise FormatError(f"bad coordinate line {ln!r}", no) from None
        if idx != k + 1:
            raise FormatError(f"expected node index {k + 1}, got {idx}", no)
        if not (math.isfinite(x) and math.isfinite(y)):
            raise FormatError("non-finite coordinate", no)
        coords[k] = x, y
        pos += 1
    if pos >= len(lines) or lines[pos][1] != "EOF":
        no = lines[pos][0] if pos < len(lines) else last_no
        raise FormatError("expected EOF after coordinates", no)
    if pos + 1 < len(lines):
        raise FormatError("content after EOF", lines[pos + 1][0])
    return build_instance(coords, header["NAME"][1])


def read_tsplib(path) -> TspInstance:
    with open(path, encoding="utf-8") as fh:
        return parse_tsplib(fh.read())


def write_tsplib(inst: TspInstance, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(serialize_tsplib(inst))


def edges_of(order: Iterable[int]):
    o = list(order)
    return {tuple(sorted((o[k], o[(k + 1) % len(o)]))) for k in range(len(o))}
