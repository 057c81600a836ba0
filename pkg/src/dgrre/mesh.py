"""One-dimensional partitions with face metadata."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

import numpy as np

BC_MODES = ("periodic", "natural")


class Face(NamedTuple):
    position: float
    left: int
    right: int
    h: float
    h_minus: float
    h_plus: float


@dataclass(frozen=True, eq=False)
class Mesh1D:
    """Partition ``x_0 < ... < x_N`` of an interval.

    In periodic mode ``x_0`` and ``x_N`` are identified and the skeleton
    carries an extra wrap-around face between the last and first element.
    In natural mode the two boundary nodes are not part of the skeleton.

    Faces are stored in node order: face ``n`` sits at ``x_n`` with
    ``h_minus = h_{n-1}``, ``h_plus = h_n`` and ``h = (h_minus + h_plus) / 2``.
    """

    nodes: np.ndarray
    bc_mode: str = "periodic"
    _hash: str = field(init=False, repr=False)
    _widths: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        nodes = np.ascontiguousarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("a mesh needs at least two elements")
        if self.bc_mode not in BC_MODES:
            raise ValueError(f"bc_mode must be one of {BC_MODES}, got {self.bc_mode!r}")
        if not np.all(np.diff(nodes) > 0):
            raise ValueError("mesh nodes must be strictly increasing")
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        digest = hashlib.sha256(nodes.tobytes() + self.bc_mode.encode()).hexdigest()
        object.__setattr__(self, "_hash", digest)
        widths = np.diff(nodes)
        widths.setflags(write=False)
        object.__setattr__(self, "_widths", widths)

    def __hash__(self):
        return hash(self._hash)

    def __eq__(self, other):
        return isinstance(other, Mesh1D) and self._hash == other._hash

    @property
    def content_hash(self) -> str:
        return self._hash

    @property
    def n_elements(self) -> int:
        return self.nodes.size - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def length(self) -> float:
        return float(self.nodes[-1] - self.nodes[0])

    @property
    def periodic(self) -> bool:
        return self.bc_mode == "periodic"

    @property
    def element_widths(self) -> np.ndarray:
        return self._widths

    @property
    def h_max(self) -> float:
        return float(self.element_widths.max())

    @property
    def quasi_uniformity(self) -> float:
        h = self.element_widths
        return float(h.max() / h.min())

    @property
    def face_left(self) -> np.ndarray:
        n = self.n_elements
        if self.periodic:
            return (np.arange(n) - 1) % n
        return np.arange(n - 1)

    @property
    def face_right(self) -> np.ndarray:
        n = self.n_elements
        return np.arange(n) if self.periodic else np.arange(1, n)

    @property
    def face_positions(self) -> np.ndarray:
        return self.nodes[:-1].copy() if self.periodic else self.nodes[1:-1].copy()

    @property
    def face_h_minus(self) -> np.ndarray:
        return self.element_widths[self.face_left]

    @property
    def face_h_plus(self) -> np.ndarray:
        return self.element_widths[self.face_right]

    @property
    def face_h(self) -> np.ndarray:
        return 0.5 * (self.face_h_minus + self.face_h_plus)

    @property
    def n_faces(self) -> int:
        return self.face_left.size

    def locate(self, x: np.ndarray) -> np.ndarray:
        """Index of the element containing each point (right-closed at ``x_N``)."""
        idx = np.searchsorted(self.nodes, x, side="right") - 1
        return np.clip(idx, 0, self.n_elements - 1)


def build_mesh(
    domain: tuple[float, float],
    n_elements: int,
    grading: str = "uniform",
    bc_mode: str = "periodic",
    *,
    seed: int = 0,
    strength: float = 0.2,
) -> Mesh1D:
    """Uniform or randomly perturbed partition of ``domain``.

    Random grading moves every interior node by at most ``strength`` times
    the uniform width, so ``strength < 1/2`` keeps nodes ordered.
    """
    if n_elements < 2:
        raise ValueError("n_elements must be at least 2")
    a, b = map(float, domain)
    if not b > a:
        raise ValueError("domain must satisfy a < b")
    nodes = np.linspace(a, b, n_elements + 1)
    if grading == "random":
        if not 0 <= strength < 0.5:
            raise ValueError("strength must lie in [0, 1/2) to avoid node collisions")
        rng = np.random.default_rng(seed)
        h = (b - a) / n_elements
        nodes[1:-1] += strength * h * rng.uniform(-1.0, 1.0, n_elements - 1)
    elif grading != "uniform":
        raise ValueError(f"unknown grading {grading!r}")
    return Mesh1D(nodes, bc_mode)


def face_iter(mesh: Mesh1D) -> Iterator[Face]:
    for x, l, r, h, hm, hp in zip(
        mesh.face_positions,
        mesh.face_left,
        mesh.face_right,
        mesh.face_h,
        mesh.face_h_minus,
        mesh.face_h_plus,
    ):
        yield Face(float(x), int(l), int(r), float(h), float(hm), float(hp))
