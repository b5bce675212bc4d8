"""Point-cloud container, PLY I/O, k-nearest neighbors, and normal estimation."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

logger = logging.getLogger(__name__)

# Fixed palette for label-colorized exports; label -1 always maps to gray.
LABEL_PALETTE = np.array(
    [
        (230, 25, 75), (60, 180, 75), (0, 130, 200), (255, 225, 25),
        (245, 130, 48), (145, 30, 180), (70, 240, 240), (240, 50, 230),
        (210, 245, 60), (250, 190, 190), (0, 128, 128), (170, 110, 40),
        (128, 0, 0), (170, 255, 195), (128, 128, 0), (255, 215, 180),
        (0, 0, 128), (255, 250, 200), (220, 190, 255), (128, 128, 128),
    ],
    dtype=np.uint8,
)
BACKGROUND_COLOR = np.array((128, 128, 128), dtype=np.uint8)

_PLY_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}


class PlyError(ValueError):
    """Raised for malformed or truncated PLY files."""


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class PointCloud:
    """A colored point cloud with optional normals and per-point part labels.

    positions are float64 world coordinates (arbitrary scale), colors are
    8-bit RGB, normals (when present) are unit vectors, and labels are int32
    part-category ids with -1 meaning background/unlabeled.
    """

    positions: np.ndarray
    colors: np.ndarray
    normals: np.ndarray | None = None
    labels: np.ndarray | None = None

    def __post_init__(self):
        pos = _freeze(np.asarray(self.positions, dtype=np.float64))
        col = _freeze(np.asarray(self.colors, dtype=np.uint8))
        if pos.ndim != 2 or pos.shape[1] != 3 or pos.shape[0] < 1:
            raise ValueError("positions must be a nonempty (N, 3) array")
        if col.shape != pos.shape:
            raise ValueError("colors must match positions in shape")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "colors", col)
        if self.normals is not None:
            nrm = _freeze(np.asarray(self.normals, dtype=np.float64))
            if nrm.shape != pos.shape:
                raise ValueError("normals must match positions in shape")
            lengths = np.linalg.norm(nrm, axis=1)
            if np.any(np.abs(lengths - 1.0) > 1e-6):
                raise ValueError("normals must be unit length (tolerance 1e-6)")
            object.__setattr__(self, "normals", nrm)
        if self.labels is not None:
            lab = _freeze(np.asarray(self.labels, dtype=np.int32))
            if lab.shape != (pos.shape[0],):
                raise ValueError("labels must be a length-N vector")
            object.__setattr__(self, "labels", lab)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def centroid(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def with_normals(self, normals: np.ndarray) -> "PointCloud":
        return PointCloud(self.positions, self.colors, normals, self.labels)

    def with_labels(self, labels: np.ndarray) -> "PointCloud":
        return PointCloud(self.positions, self.colors, self.normals, labels)


@dataclass(frozen=True)
class NeighborGraph:
    """Exact k-nearest-neighbor adjacency (row i lists the neighbors of point i)."""

    k: int
    adjacency: np.ndarray  # (N, min(k, N-1)) int32

    def __post_init__(self):
        object.__setattr__(self, "adjacency", _freeze(np.asarray(self.adjacency, dtype=np.int32)))


# ---------------------------------------------------------------------------
# PLY I/O
# ---------------------------------------------------------------------------

def _parse_ply_header(fh) -> tuple[str, list[tuple[str, int, list[tuple[str, str]]]]]:
    """Returns (format, elements) where each element is (name, count, [(prop, dtype)])."""
    magic = fh.readline().strip()
    if magic != b"ply":
        raise PlyError("malformed header: missing 'ply' magic")
    fmt = None
    elements: list[tuple[str, int, list[tuple[str, str]]]] = []
    while True:
        line = fh.readline()
        if not line:
            raise PlyError("malformed header: missing end_header")
        tokens = line.decode("ascii", errors="replace").strip().split()
        if not tokens or tokens[0] == "comment":
            continue
        if tokens[0] == "format":
            if len(tokens) < 2 or tokens[1] not in ("ascii", "binary_little_endian"):
                raise PlyError(f"malformed header: unsupported format {tokens[1:]}")
            fmt = tokens[1]
        elif tokens[0] == "element":
            if len(tokens) != 3:
                raise PlyError("malformed header: bad element line")
            elements.append((tokens[1], int(tokens[2]), []))
        elif tokens[0] == "property":
            if not elements:
                raise PlyError("malformed header: property before element")
            if tokens[1] == "list":
                elements[-1][2].append((tokens[-1], "list"))
            else:
                if tokens[1] not in _PLY_TYPES:
                    raise PlyError(f"malformed header: unknown type {tokens[1]}")
                elements[-1][2].append((tokens[2], _PLY_TYPES[tokens[1]]))
        elif tokens[0] == "end_header":
            break
        else:
            raise PlyError(f"malformed header: unexpected keyword {tokens[0]}")
    if fmt is None:
        raise PlyError("malformed header: missing format line")
    return fmt, elements


def load_ply(path: str | Path, label_property: str = "label") -> PointCloud:
    """Load a binary little-endian or ASCII PLY with at least x,y,z,red,green,blue.

    nx,ny,nz and a scalar label property are picked up when present; other
    properties are parsed and ignored.
    """
    path = Path(path)
    with open(path, "rb") as fh:
        fmt, elements = _parse_ply_header(fh)
        vertex = None
        for name, count, props in elements:
            if name == "vertex":
                vertex = (count, props)
                break
            if any(d == "list" for _, d in props):
                raise PlyError("unsupported: list-property element precedes vertex element")
            if fmt == "binary_little_endian":
                row = sum(np.dtype("<" + d).itemsize for _, d in props)
                fh.seek(count * row, 1)
            else:
                for _ in range(count):
                    fh.readline()
        if vertex is None:
            raise PlyError("missing mandatory element: vertex")
        count, props = vertex
        names = [p for p, _ in props]
        for required in ("x", "y", "z", "red", "green", "blue"):
            if required not in names:
                raise PlyError(f"missing mandatory property: {required}")
        if any(d == "list" for _, d in props):
            raise PlyError("unsupported list property on vertex element")

        dtype = np.dtype([(p, "<" + d) for p, d in props])
        if fmt == "binary_little_endian":
            raw = fh.read(count * dtype.itemsize)
            if len(raw) < count * dtype.itemsize:
                raise PlyError("truncated payload")
            data = np.frombuffer(raw, dtype=dtype, count=count)
        else:
            rows = []
            for _ in range(count):
                line = fh.readline()
                if not line:
                    raise PlyError("truncated payload")
                parts = line.decode("ascii", errors="replace").split()
                if len(parts) != len(props):
                    raise PlyError("truncated payload")
                rows.append(tuple(parts))
            data = np.array(rows, dtype=dtype)

    positions = np.stack([data["x"], data["y"], data["z"]], axis=1).astype(np.float64)
    colors = np.stack([data["red"], data["green"], data["blue"]], axis=1).astype(np.uint8)
    normals = None
    if all(p in names for p in ("nx", "ny", "nz")):
        normals = np.stack([data["nx"], data["ny"], data["nz"]], axis=1).astype(np.float64)
        lengths = np.linalg.norm(normals, axis=1)
        bad = np.abs(lengths - 1.0) > 1e-6
        if np.any(bad):
            # Tolerate slightly denormalized files; renormalize instead of failing.
            safe = np.where(lengths > 0, lengths, 1.0)
            normals = normals / safe[:, None]
            normals[lengths == 0] = (0.0, 0.0, 1.0)
    labels = data[label_property].astype(np.int32) if label_property in names else None
    return PointCloud(positions, colors, normals, labels)


def write_ply(cloud: PointCloud, path: str | Path, colorize_by_label: bool = False) -> None:
    """Write a binary little-endian PLY.

    With colorize_by_label the stored colors are replaced by a fixed palette
    indexed by label (-1 maps to gray); positions/normals/labels are unchanged.
    """
    if colorize_by_label and cloud.labels is None:
        raise ValueError("colorize_by_label requires labels")
    colors = cloud.colors
    if colorize_by_label:
        lab = cloud.labels
        colors = np.where(
            (lab < 0)[:, None],
            BACKGROUND_COLOR[None, :],
            LABEL_PALETTE[np.abs(lab) % len(LABEL_PALETTE)],
        ).astype(np.uint8)

    fields = [("x", "<f8"), ("y", "<f8"), ("z", "<f8"),
              ("red", "u1"), ("green", "u1"), ("blue", "u1")]
    header = [
        "ply",
        "format binary_little_endian 1.0",
        f"element vertex {cloud.n}",
        "property double x", "property double y", "property double z",
        "property uchar red", "property uchar green", "property uchar blue",
    ]
    if cloud.normals is not None:
        fields += [("nx", "<f8"), ("ny", "<f8"), ("nz", "<f8")]
        header += ["property double nx", "property double ny", "property double nz"]
    if cloud.labels is not None:
        fields.append(("label", "<i4"))
        header.append("property int label")
    header.append("end_header")

    data = np.empty(cloud.n, dtype=np.dtype(fields))
    data["x"], data["y"], data["z"] = cloud.positions.T
    data["red"], data["green"], data["blue"] = colors.T
    if cloud.normals is not None:
        data["nx"], data["ny"], data["nz"] = cloud.normals.T
    if cloud.labels is not None:
        data["label"] = cloud.labels

    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n").encode("ascii"))
        fh.write(data.tobytes())


# ---------------------------------------------------------------------------
# k-nearest neighbors
# ---------------------------------------------------------------------------

def _sq_dists(points: np.ndarray, query: np.ndarray) -> np.ndarray:
    diff = points - query
    return np.einsum("ij,ij->i", diff, diff)


def knn(cloud: PointCloud, k: int) -> NeighborGraph:
    """Exact k-nearest neighbors under Euclidean distance, ties broken by lower index.

    Candidate sets come from a kd-tree; final ranking uses exact squared
    distances so the result matches a brute-force (distance, index) sort.
    """
    n = cloud.n
    if n < 2:
        raise ValueError("knn requires at least 2 points")
    if k < 1:
        raise ValueError("k must be positive")
    k_eff = min(k, n - 1)
    pos = cloud.positions
    tree = cKDTree(pos)
    q = min(n, k_eff + 2)
    _, cand = tree.query(pos, k=q)
    cand = cand.reshape(n, q)

    adjacency = np.empty((n, k_eff), dtype=np.int32)
    for i in range(n):
        row = cand[i]
        row = row[row != i]
        d2 = _sq_dists(pos[row], pos[i])
        order = np.lexsort((row, d2))
        if q < n and d2[order[k_eff - 1]] == d2[order[-1]]:
            # Ties may extend past the candidate window; rank against everything.
            d2_all = _sq_dists(pos, pos[i])
            d2_all[i] = np.inf
            order_all = np.lexsort((np.arange(n), d2_all))
            adjacency[i] = order_all[:k_eff]
        else:
            adjacency[i] = row[order[:k_eff]]
    return NeighborGraph(k=k, adjacency=adjacency)


# ---------------------------------------------------------------------------
# normal estimation
# ---------------------------------------------------------------------------

def estimate_normals(cloud: PointCloud, graph: NeighborGraph) -> PointCloud:
    """Estimate per-point normals from neighborhood covariance (smallest eigenvector).

    Signs are flipped to point away from the cloud centroid; a dot product of
    exactly zero keeps the eigenvector sign as computed. Degenerate
    neighborhoods (all points identical) fall back to (0,0,1) with a warning.
    """
    if graph.adjacency.shape[1] < 3:
        raise ValueError("normal estimation needs a graph with k >= 3")
    pos = cloud.positions
    nbhd = np.concatenate([pos[:, None, :], pos[graph.adjacency]], axis=1)
    centered = nbhd - nbhd.mean(axis=1, keepdims=True)
    cov = np.einsum("nki,nkj->nij", centered, centered)
    eigvals, eigvecs = np.linalg.eigh(cov)
    normals = eigvecs[:, :, 0]

    outward = np.einsum("ij,ij->i", normals, pos - cloud.centroid)
    normals[outward < 0] *= -1.0
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)

    degenerate = eigvals[:, 2] <= 1e-30
    if np.any(degenerate):
        logger.warning("degenerate neighborhoods for %d points; using (0,0,1) normals",
                       int(degenerate.sum()))
        normals[degenerate] = (0.0, 0.0, 1.0)
    return cloud.with_normals(normals)
