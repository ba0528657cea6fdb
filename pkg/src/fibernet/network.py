"""Beam network container and its JSON serialization.

File layout (``format = "fibernet-network"``, ``version = 1``)::

    {
      "format": "fibernet-network", "version": 1,
      "domain": {"width": W, "height": H, "thickness": t},
      "sections": [{"id": 0, "E": ..., "G_shear": ..., ...}],
      "nodes":    [{"id": 0, "x": ..., "y": ..., "z": ...}],
      "elements": [{"id": 0, "n1": 0, "n2": 1, "section": 0, "fiber": 0}],
      "bcs": {"fixed": [...], "moving": [...], "planar": true},
      "info": {...}
    }

Floats are written with ``repr`` precision, so a save/load cycle is lossless.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .beam import FiberSection
from .errors import InvalidGeometryError

FORMAT = "fibernet-network"
VERSION = 1


@dataclass
class NetworkModel:
    """Nodes, two-node beam elements and grip sets of a planar specimen.

    Fixed-grip nodes have all six DOFs clamped. Moving-grip nodes get the
    prescribed u_x ramp with u_y and θz held at zero. When ``planar`` is set,
    u_z, θx and θy are clamped on every node.
    """

    nodes: np.ndarray
    elements: np.ndarray
    element_section: np.ndarray
    element_fiber: np.ndarray
    sections: list[FiberSection]
    fixed: np.ndarray
    moving: np.ndarray
    width: float
    height: float
    thickness: float
    planar: bool = True
    info: dict = field(default_factory=dict)

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float).reshape(-1, 3)
        self.elements = np.asarray(self.elements, dtype=np.int64).reshape(-1, 2)
        self.element_section = np.asarray(self.element_section, dtype=np.int64).reshape(-1)
        self.element_fiber = np.asarray(self.element_fiber, dtype=np.int64).reshape(-1)
        self.fixed = np.asarray(self.fixed, dtype=np.int64).reshape(-1)
        self.moving = np.asarray(self.moving, dtype=np.int64).reshape(-1)
        m = len(self.elements)
        if len(self.element_section) != m or len(self.element_fiber) != m:
            raise ValueError("element attribute arrays must match the element count")
        if m and (self.elements.min() < 0 or self.elements.max() >= len(self.nodes)):
            raise InvalidGeometryError("element references a missing node")
        if m and self.element_section.max() >= len(self.sections):
            raise ValueError("element references a missing section")

    @property
    def n_nodes(self) -> int:
        return len(self.nodes)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def plane_constrained(self) -> np.ndarray:
        return np.arange(self.n_nodes) if self.planar else np.zeros(0, dtype=np.int64)

    @property
    def stress_area(self) -> float:
        """Nominal cross-section of the specimen used to convert force to stress."""
        return self.height * self.thickness

    def element_lengths(self) -> np.ndarray:
        a = self.nodes[self.elements[:, 0]]
        b = self.nodes[self.elements[:, 1]]
        return np.linalg.norm(b - a, axis=1)

    def to_dict(self) -> dict:
        return {
            "format": FORMAT,
            "version": VERSION,
            "domain": {"width": float(self.width), "height": float(self.height),
                       "thickness": float(self.thickness)},
            "sections": [dict(id=i, **s.to_dict()) for i, s in enumerate(self.sections)],
            "nodes": [{"id": i, "x": float(x), "y": float(y), "z": float(z)}
                      for i, (x, y, z) in enumerate(self.nodes)],
            "elements": [{"id": i, "n1": int(a), "n2": int(b), "section": int(s), "fiber": int(f)}
                         for i, ((a, b), s, f) in enumerate(
                             zip(self.elements, self.element_section, self.element_fiber))],
            "bcs": {"fixed": [int(i) for i in self.fixed], "moving": [int(i) for i in self.moving],
                    "planar": bool(self.planar)},
            "info": self.info,
        }

    @classmethod
    def from_dict(cls, data: dict) -> NetworkModel:
        if data.get("format") != FORMAT:
            raise ValueError(f"not a {FORMAT} document")
        if data.get("version") != VERSION:
            raise ValueError(f"unsupported network version {data.get('version')!r}")
        nodes = sorted(data["nodes"], key=lambda n: n["id"])
        if [n["id"] for n in nodes] != list(range(len(nodes))):
            raise ValueError("node ids must be contiguous from 0")
        elems = sorted(data["elements"], key=lambda e: e["id"])
        secs = sorted(data["sections"], key=lambda s: s["id"])
        dom = data["domain"]
        return cls(
            nodes=np.array([[n["x"], n["y"], n["z"]] for n in nodes], dtype=float).reshape(-1, 3),
            elements=np.array([[e["n1"], e["n2"]] for e in elems], dtype=np.int64).reshape(-1, 2),
            element_section=np.array([e["section"] for e in elems], dtype=np.int64),
            element_fiber=np.array([e.get("fiber", -1) for e in elems], dtype=np.int64),
            sections=[FiberSection.from_dict(s) for s in secs],
            fixed=np.array(data["bcs"]["fixed"], dtype=np.int64),
            moving=np.array(data["bcs"]["moving"], dtype=np.int64),
            width=dom["width"], height=dom["height"], thickness=dom["thickness"],
            planar=data["bcs"].get("planar", True),
            info=data.get("info", {}),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps() + "\n")

    @classmethod
    def load(cls, path) -> NetworkModel:
        return cls.from_dict(json.loads(Path(path).read_text()))

    def digest(self) -> str:
        return hashlib.sha256(self.dumps().encode()).hexdigest()


def chain_model(section: FiberSection, length: float, n_elements: int,
                weak_section: FiberSection | None = None, height: float = 1.0,
                thickness: float = 1.0) -> NetworkModel:
    """Straight bar along x clamped at x=0 and pulled at x=length.

    ``weak_section`` (if given) replaces the section of the leftmost element.
    """
    if n_elements < 1:
        raise ValueError("n_elements must be >= 1")
    xs = np.linspace(0.0, length, n_elements + 1)
    nodes = np.column_stack([xs, np.zeros_like(xs), np.zeros_like(xs)])
    conn = np.column_stack([np.arange(n_elements), np.arange(1, n_elements + 1)])
    sections = [section]
    sec_ids = np.zeros(n_elements, dtype=np.int64)
    if weak_section is not None:
        sections.append(weak_section)
        sec_ids[0] = 1
    return NetworkModel(nodes=nodes, elements=conn, element_section=sec_ids,
                        element_fiber=np.zeros(n_elements, dtype=np.int64), sections=sections,
                        fixed=[0], moving=[n_elements], width=length, height=height,
                        thickness=thickness)
