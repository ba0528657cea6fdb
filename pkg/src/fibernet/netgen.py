"""Random planar fiber networks.

Straight fibers are dropped with a uniform midpoint in the W x H domain and a
uniform in-plane orientation, clipped to the domain, split at every pairwise
crossing (rigid bond: the two fibers share one node) and meshed into beam
elements. Only components that connect the fixed grip (x = 0) to the moving
grip (x = W) are kept.

The fiber count follows from the target sheet density,

    n_f = round(ρ_s · W · H · t_net / (ρ_f · A · L_f)),

with the nominal sheet thickness t_net equal to the fiber height.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from .beam import FIBER_DENSITY, FIBER_LENGTH, FiberSection, reference_fiber
from .errors import GenerationError, GripError, NotchError
from .network import NetworkModel

L_MIN = 1e-3
DEFAULT_GRIP_BAND = 1e-6
KG_M3_TO_KG_MM3 = 1e-9


@dataclass(frozen=True)
class NotchSpec:
    angle: float = 20.0
    depth: float | None = None
    apex_x: float | None = None

    def __post_init__(self):
        if not 0.0 < self.angle < 180.0:
            raise ValueError(f"notch angle must lie in (0, 180) degrees, got {self.angle!r}")
        if self.depth is not None and self.depth < 0:
            raise ValueError("notch depth must be >= 0")


@dataclass(frozen=True)
class NetworkSpec:
    width: float = 18.0
    height: float = 6.0
    density: float = 1000.0
    fiber: FiberSection = field(default_factory=reference_fiber)
    fiber_length: float = FIBER_LENGTH
    fiber_density: float = FIBER_DENSITY
    seed: int = 0
    notch: NotchSpec | None = None
    thickness: float | None = None

    def __post_init__(self):
        for name in ("width", "height", "fiber_length", "density", "fiber_density"):
            if not getattr(self, name) > 0:
                raise ValueError(f"NetworkSpec.{name} must be positive")
        if self.thickness is not None and not self.thickness > 0:
            raise ValueError("NetworkSpec.thickness must be positive")

    @property
    def sheet_thickness(self) -> float:
        """Nominal sheet thickness; defaults to the height of a square fiber."""
        return self.thickness if self.thickness is not None else math.sqrt(self.fiber.A)


def n_fibers(spec: NetworkSpec) -> int:
    rho_s = spec.density * KG_M3_TO_KG_MM3
    rho_f = spec.fiber_density * KG_M3_TO_KG_MM3
    sheet_mass = rho_s * spec.width * spec.height * spec.sheet_thickness
    fiber_mass = rho_f * spec.fiber.A * spec.fiber_length
    return int(round(sheet_mass / fiber_mass))


def deposit(spec: NetworkSpec) -> np.ndarray:
    """(n_f, 2, 2) array of unclipped fiber end points."""
    rng = np.random.default_rng(spec.seed)
    n = n_fibers(spec)
    mid = rng.random((n, 2)) * np.array([spec.width, spec.height])
    theta = rng.random(n) * np.pi
    half = 0.5 * spec.fiber_length * np.column_stack([np.cos(theta), np.sin(theta)])
    return np.stack([mid - half, mid + half], axis=1)


def clip_segments(segments: np.ndarray, width: float, height: float) -> np.ndarray:
    """Liang-Barsky clip to [0, W] x [0, H]; the clipped coordinate is set exactly.

    Segments entirely outside come back as NaN rows.
    """
    seg = np.array(segments, dtype=float)
    out = np.full_like(seg, np.nan)
    for i, (p, q) in enumerate(seg):
        d = q - p
        t0, t1 = 0.0, 1.0
        ok = True
        for pk, qk in ((-d[0], p[0]), (d[0], width - p[0]), (-d[1], p[1]), (d[1], height - p[1])):
            if pk == 0.0:
                if qk < 0.0:
                    ok = False
                    break
                continue
            r = qk / pk
            if pk < 0.0:
                t0 = max(t0, r)
            else:
                t1 = min(t1, r)
        if not ok or t0 > t1:
            continue
        a, b = p + t0 * d, p + t1 * d
        for pt in (a, b):
            pt[0] = min(max(pt[0], 0.0), width)
            pt[1] = min(max(pt[1], 0.0), height)
        out[i] = a, b
    return out


def segment_intersections(segments: np.ndarray, chunk: int = 256):
    """All proper crossings between distinct segments.

    Returns arrays (i, j, t_i, t_j) with i < j and the crossing at
    P_i + t_i (Q_i - P_i). Parallel pairs are skipped.
    """
    P = segments[:, 0]
    R = segments[:, 1] - segments[:, 0]
    n = len(segments)
    out_i, out_j, out_t, out_u = [], [], [], []
    for start in range(0, n, chunk):
        rows = np.arange(start, min(start + chunk, n))
        Pi, Ri = P[rows, None, :], R[rows, None, :]
        qp = P[None, :, :] - Pi
        denom = Ri[..., 0] * R[None, :, 1] - Ri[..., 1] * R[None, :, 0]
        with np.errstate(divide="ignore", invalid="ignore"):
            t = (qp[..., 0] * R[None, :, 1] - qp[..., 1] * R[None, :, 0]) / denom
            u = (qp[..., 0] * Ri[..., 1] - qp[..., 1] * Ri[..., 0]) / denom
        cols = np.arange(n)[None, :]
        hit = ((cols > rows[:, None]) & (np.abs(denom) > 1e-14)
               & (t >= 0) & (t <= 1) & (u >= 0) & (u <= 1))
        ii, jj = np.nonzero(hit)
        out_i.append(rows[ii])
        out_j.append(jj)
        out_t.append(t[ii, jj])
        out_u.append(u[ii, jj])
    cat = np.concatenate
    return (cat(out_i).astype(np.int64), cat(out_j).astype(np.int64), cat(out_t), cat(out_u))


def _merge_points(points: np.ndarray, l_min: float):
    """Cluster points closer than l_min; returns (point -> node id, node coords).

    Each cluster is represented by its lowest-index point; nodes are numbered
    in the order of their representative.
    """
    n = len(points)
    pairs = cKDTree(points).query_pairs(l_min, output_type="ndarray")
    adj = sparse.coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = csgraph.connected_components(adj, directed=False)
    rep = np.full(labels.max() + 1, n, dtype=np.int64)
    np.minimum.at(rep, labels, np.arange(n))
    order = np.argsort(rep, kind="stable")
    node_of_label = np.empty_like(order)
    node_of_label[order] = np.arange(len(order))
    return node_of_label[labels], points[rep[order]]


def boundary_sets(model: NetworkModel, grip_band: float = DEFAULT_GRIP_BAND):
    """Nodes within ``grip_band`` of x = 0 (fixed) and of x = W (moving)."""
    if grip_band < 0 or 2 * grip_band >= model.width:
        raise GripError(f"grip band {grip_band!r} must be >= 0 and < W/2")
    x = model.nodes[:, 0]
    fixed = np.flatnonzero(x <= grip_band)
    moving = np.flatnonzero(x >= model.width - grip_band)
    if len(fixed) == 0 or len(moving) == 0:
        raise GripError(f"empty grip set (fixed={len(fixed)}, moving={len(moving)}) "
                        f"for grip band {grip_band!r}")
    return fixed, moving


def _components(n_nodes: int, elements: np.ndarray):
    adj = sparse.coo_matrix((np.ones(len(elements)), (elements[:, 0], elements[:, 1])),
                            shape=(n_nodes, n_nodes))
    return csgraph.connected_components(adj, directed=False)


def _percolation_report(n_nodes, elements, fixed, moving) -> dict:
    n_comp, labels = _components(n_nodes, elements)
    sizes = np.bincount(labels, minlength=n_comp)
    left = set(labels[fixed].tolist())
    right = set(labels[moving].tolist())
    return {"n_nodes": int(n_nodes), "n_elements": int(len(elements)),
            "n_components": int(n_comp), "largest_component": int(sizes.max()) if n_comp else 0,
            "components_at_fixed_grip": len(left), "components_at_moving_grip": len(right),
            "spanning_components": len(left & right)}


def prune_to_load_path(model: NetworkModel, remove_dead_ends: bool = False,
                       error_cls=GenerationError) -> NetworkModel:
    """Keep components touching both grips; optionally strip dead-end chains."""
    nodes, elems = model.nodes, model.elements
    n_comp, labels = _components(len(nodes), elems)
    spanning = np.intersect1d(labels[model.fixed], labels[model.moving])
    if len(spanning) == 0:
        raise error_cls("network does not connect the fixed grip to the moving grip",
                        _percolation_report(len(nodes), elems, model.fixed, model.moving))
    keep_node = np.isin(labels, spanning)
    keep_elem = keep_node[elems[:, 0]]
    if remove_dead_ends:
        gripped = np.zeros(len(nodes), dtype=bool)
        gripped[model.fixed] = gripped[model.moving] = True
        while True:
            deg = np.bincount(elems[keep_elem].ravel(), minlength=len(nodes))
            dead = (deg == 1) & ~gripped
            drop = keep_elem & (dead[elems[:, 0]] | dead[elems[:, 1]])
            if not drop.any():
                break
            keep_elem &= ~drop
        keep_node = np.zeros(len(nodes), dtype=bool)
        keep_node[elems[keep_elem].ravel()] = True
        keep_node[model.fixed] &= np.isin(labels[model.fixed], spanning)
        keep_node[model.moving] &= np.isin(labels[model.moving], spanning)
    lengths = model.element_lengths()
    new_id = np.full(len(nodes), -1, dtype=np.int64)
    new_id[keep_node] = np.arange(keep_node.sum())
    info = dict(model.info)
    info["pruned_length"] = info.get("pruned_length", 0.0) + float(lengths[~keep_elem].sum())
    info["pruned_elements"] = info.get("pruned_elements", 0) + int((~keep_elem).sum())
    return NetworkModel(
        nodes=nodes[keep_node], elements=new_id[elems[keep_elem]],
        element_section=model.element_section[keep_elem],
        element_fiber=model.element_fiber[keep_elem], sections=list(model.sections),
        fixed=new_id[model.fixed[keep_node[model.fixed]]],
        moving=new_id[model.moving[keep_node[model.moving]]],
        width=model.width, height=model.height, thickness=model.thickness,
        planar=model.planar, info=info)


def mesh_fibers(segments: np.ndarray, width: float, height: float, section: FiberSection,
                thickness: float, l_min: float = L_MIN, l_e_max: float | None = None,
                grip_band: float = DEFAULT_GRIP_BAND, prune: bool = True,
                remove_dead_ends: bool = False, deposited_length: float | None = None) -> NetworkModel:
    """Turn fiber segments (already inside the domain) into a beam network."""
    seg = np.asarray(segments, dtype=float)
    alive = np.flatnonzero(~np.isnan(seg).any(axis=(1, 2)))
    lens = np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)
    alive = alive[lens[alive] > l_min]
    seg_a = seg[alive]
    n = len(seg_a)
    if n == 0:
        raise GenerationError("no fibers inside the domain", {"n_fibers": 0})

    ii, jj, tt, uu = segment_intersections(seg_a)
    cross = seg_a[ii, 0] + tt[:, None] * (seg_a[ii, 1] - seg_a[ii, 0])
    points = np.concatenate([seg_a.reshape(-1, 2), cross])
    point_node, node_xy = _merge_points(points, l_min)

    # (fiber, t, point index) for every point on every fiber
    k = np.arange(len(ii))
    fib = np.concatenate([np.repeat(np.arange(n), 2), ii, jj])
    par = np.concatenate([np.tile([0.0, 1.0], n), tt, uu])
    pid = np.concatenate([np.arange(2 * n), 2 * n + k, 2 * n + k])
    order = np.lexsort((pid, par, fib))
    fib, pid = fib[order], pid[order]
    nid = point_node[pid]

    same_fiber = fib[1:] == fib[:-1]
    distinct = nid[1:] != nid[:-1]
    take = same_fiber & distinct
    conn = np.column_stack([nid[:-1][take], nid[1:][take]])
    efib = fib[:-1][take]
    key = np.sort(conn, axis=1)
    _, first = np.unique(key[:, 0] * (len(node_xy) + 1) + key[:, 1], return_index=True)
    first = np.sort(first)
    conn, efib = conn[first], efib[first]

    node_list = [tuple(p) for p in node_xy]
    if l_e_max is not None:
        new_conn, new_fib = [], []
        for (a, b), f in zip(conn, efib):
            pa, pb = node_xy[a], node_xy[b]
            length = float(np.hypot(*(pb - pa)))
            pieces = int(math.ceil(length / l_e_max - 1e-12))
            if pieces <= 1:
                new_conn.append((a, b))
                new_fib.append(f)
                continue
            chain = [int(a)]
            for s in range(1, pieces):
                node_list.append(tuple(pa + (pb - pa) * (s / pieces)))
                chain.append(len(node_list) - 1)
            chain.append(int(b))
            for c0, c1 in zip(chain[:-1], chain[1:]):
                new_conn.append((c0, c1))
                new_fib.append(f)
        conn = np.array(new_conn, dtype=np.int64).reshape(-1, 2)
        efib = np.array(new_fib, dtype=np.int64)

    xy = np.array(node_list, dtype=float).reshape(-1, 2)
    nodes = np.column_stack([xy, np.zeros(len(xy))])
    total = float(lens.sum()) if deposited_length is None else deposited_length
    info = {
        "n_fibers": int(len(seg)),
        "n_fibers_inside": int(n),
        "n_crossings": int(len(ii)),
        "deposited_length": total,
        "clipped_length": total - float(lens[alive].sum()),
        "pruned_length": 0.0,
        "pruned_elements": 0,
        "l_min": l_min,
        "l_e_max": l_e_max,
        "grip_band": grip_band,
        "thickness_convention": "sheet thickness = fiber height",
    }
    model = NetworkModel(nodes=nodes, elements=conn, element_section=np.zeros(len(conn), np.int64),
                         element_fiber=alive[efib], sections=[section], fixed=[], moving=[],
                         width=width, height=height, thickness=thickness, info=info)
    try:
        model.fixed, model.moving = boundary_sets(model, grip_band)
    except GripError as exc:
        raise GenerationError(str(exc), _percolation_report(len(nodes), conn, np.zeros(0, np.int64),
                                                             np.zeros(0, np.int64))) from exc
    if prune:
        model = prune_to_load_path(model, remove_dead_ends=remove_dead_ends)
    model.info["element_length"] = float(model.element_lengths().sum())
    return model


def generate(spec: NetworkSpec, l_min: float = L_MIN, l_e_max: float | None = None,
             grip_band: float = DEFAULT_GRIP_BAND, remove_dead_ends: bool = False) -> NetworkModel:
    """Random network for ``spec``; deterministic for a fixed seed.

    Raises:
        GenerationError: if no fiber path joins the two grips.
    """
    raw = deposit(spec)
    clipped = clip_segments(raw, spec.width, spec.height)
    model = mesh_fibers(clipped, spec.width, spec.height, spec.fiber, spec.sheet_thickness,
                        l_min=l_min,
                        l_e_max=spec.fiber_length / 2.0 if l_e_max is None else l_e_max,
                        grip_band=grip_band, remove_dead_ends=remove_dead_ends,
                        deposited_length=len(raw) * spec.fiber_length)
    model.info.update({"seed": int(spec.seed), "density": spec.density,
                       "fiber_density": spec.fiber_density, "fiber_length": spec.fiber_length,
                       "n_fibers": int(len(raw))})
    if spec.notch is not None:
        model = apply_notch(model, spec.notch.angle, spec.notch.depth, spec.notch.apex_x)
    return model


def notch_triangle(width: float, height: float, angle: float = 20.0, depth: float | None = None,
                   apex_x: float | None = None) -> np.ndarray:
    """Vertices (apex, mouth-left, mouth-right) of a notch cut from the top edge."""
    depth = height / 2.0 if depth is None else depth
    apex_x = width / 2.0 if apex_x is None else apex_x
    half = depth * math.tan(math.radians(angle) / 2.0)
    return np.array([[apex_x, height - depth], [apex_x - half, height], [apex_x + half, height]])


def segments_hit_triangle(a: np.ndarray, b: np.ndarray, tri: np.ndarray, eps: float = 1e-12) -> np.ndarray:
    """Mask of segments a->b that pass through the open triangle interior."""
    c = tri.mean(axis=0)
    t0 = np.zeros(len(a))
    t1 = np.ones(len(a))
    d = b - a
    scale = max(np.ptp(tri[:, 0]), np.ptp(tri[:, 1]), 1e-300)
    for k in range(3):
        p, q = tri[k], tri[(k + 1) % 3]
        nrm = np.array([q[1] - p[1], p[0] - q[0]])
        if np.dot(nrm, c - p) < 0:
            nrm = -nrm
        nrm = nrm / np.linalg.norm(nrm)
        # inside half-plane: nrm·(x - p) >= 0
        num = (a - p) @ nrm
        den = d @ nrm
        with np.errstate(divide="ignore", invalid="ignore"):
            r = -num / den
        enter = den > 0
        leave = den < 0
        t0 = np.where(enter, np.maximum(t0, r), t0)
        t1 = np.where(leave, np.minimum(t1, r), t1)
        outside_parallel = (den == 0) & (num < 0)
        t1 = np.where(outside_parallel, -1.0, t1)
    mid = a + ((t0 + t1) / 2.0)[:, None] * d
    depth = np.full(len(a), np.inf)
    for k in range(3):
        p, q = tri[k], tri[(k + 1) % 3]
        nrm = np.array([q[1] - p[1], p[0] - q[0]])
        if np.dot(nrm, c - p) < 0:
            nrm = -nrm
        nrm = nrm / np.linalg.norm(nrm)
        depth = np.minimum(depth, (mid - p) @ nrm)
    return (t1 > t0) & (depth > eps * scale)


def apply_notch(model: NetworkModel, angle: float = 20.0, depth: float | None = None,
                apex_x: float | None = None) -> NetworkModel:
    """Remove every element crossing a V-notch cut from the top edge.

    The notch apex sits at (apex_x, H - depth), by default the specimen
    center. Raises NotchError if the cut separates the grips.
    """
    NotchSpec(angle, depth, apex_x)
    depth = model.height / 2.0 if depth is None else depth
    if depth == 0:
        return model
    if depth > model.height:
        raise ValueError("notch deeper than the specimen")
    tri = notch_triangle(model.width, model.height, angle, depth, apex_x)
    if tri[:, 0].min() < 0 or tri[:, 0].max() > model.width:
        raise ValueError("notch triangle leaves the domain")
    a = model.nodes[model.elements[:, 0], :2]
    b = model.nodes[model.elements[:, 1], :2]
    hit = segments_hit_triangle(a, b, tri)
    cut = NetworkModel(nodes=model.nodes, elements=model.elements[~hit],
                       element_section=model.element_section[~hit],
                       element_fiber=model.element_fiber[~hit], sections=list(model.sections),
                       fixed=model.fixed, moving=model.moving, width=model.width,
                       height=model.height, thickness=model.thickness, planar=model.planar,
                       info=dict(model.info))
    removed_len = float(model.element_lengths()[hit].sum())
    cut.info["notch"] = {"angle": angle, "depth": depth,
                         "apex": [float(tri[0, 0]), float(tri[0, 1])],
                         "removed_elements": int(hit.sum()), "removed_length": removed_len}
    cut.info["pruned_length"] = cut.info.get("pruned_length", 0.0) + removed_len
    out = prune_to_load_path(cut, error_cls=NotchError)
    out.info["element_length"] = float(out.element_lengths().sum())
    return out
