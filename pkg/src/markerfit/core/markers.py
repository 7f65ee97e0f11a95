"""Latent markers: pose-invariant marker attachments on the body surface.

Each latent marker sits on an anchor triangle (barycentric coordinates)
and is displaced by an offset in that triangle's local frame on the shaped
rest mesh. Posing applies the barycentrically blended joint transforms of
the anchor vertices to the displaced point.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import cKDTree

from ..utils.exceptions import AttachmentError, DimensionError
from .body_model import BodyModel, PoseVector, shaped_rest
from .kinematics import SurfaceAnchors, evaluate_points, face_frames
from .mesh_query import TriangleMesh, signed_distances

logger = logging.getLogger(__name__)

DEFAULT_OFFSET = 0.0095
BARY_TOLERANCE = 1e-9
MIN_FACE_AREA = 1e-14


@dataclass(frozen=True)
class LayoutEntry:
    """One marker of a layout.

    Exactly one of ``vertex`` or (``face``, ``barycentric``) is set.
    ``offset`` is the marker's distance from the skin in meters.
    """
    label: str
    vertex: int | None = None
    face: int | None = None
    barycentric: tuple[float, float, float] | None = None
    offset: float = DEFAULT_OFFSET

    def __post_init__(self) -> None:
        if not self.label:
            raise AttachmentError("layout entry without a label")
        if (self.vertex is None) == (self.face is None):
            raise AttachmentError(f"marker '{self.label}' needs either a vertex or a face anchor")
        if self.face is not None and self.barycentric is None:
            raise AttachmentError(f"marker '{self.label}' face anchor needs barycentric coordinates")
        if not np.isfinite(self.offset) or self.offset < 0:
            raise AttachmentError(f"marker '{self.label}' offset must be >= 0")


@dataclass(frozen=True)
class MarkerLayout:
    """Ordered set of marker placements with unique labels."""
    entries: tuple[LayoutEntry, ...]
    name: str = "layout"

    def __post_init__(self) -> None:
        entries = tuple(self.entries)
        labels = [e.label for e in entries]
        duplicates = sorted({label for label in labels if labels.count(label) > 1})
        if duplicates:
            raise AttachmentError(f"duplicate layout labels: {', '.join(duplicates)}")
        object.__setattr__(self, "entries", entries)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(e.label for e in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class LatentMarker:
    """Pose-invariant marker.

    Attributes:
        label: Marker label
        anchor_face: Triangle index on the model mesh
        anchor_bary: Barycentric coordinates within the anchor triangle
        rest_offset: Offset (tangent, bitangent, normal) in the anchor frame, meters
        init_position: Rest-space position at attachment, meters
        target_distance: Prescribed distance from the skin, meters
        init_offset: Offset at attachment; defaults to rest_offset
    """
    label: str
    anchor_face: int
    anchor_bary: NDArray[np.float64]
    rest_offset: NDArray[np.float64]
    init_position: NDArray[np.float64]
    target_distance: float = DEFAULT_OFFSET
    init_offset: NDArray[np.float64] | None = None

    def __post_init__(self) -> None:
        bary = np.asarray(self.anchor_bary, dtype=np.float64).reshape(3)
        if np.any(bary < -BARY_TOLERANCE) or abs(bary.sum() - 1.0) > BARY_TOLERANCE:
            raise AttachmentError(f"marker '{self.label}' has invalid barycentric coordinates")
        offset = np.asarray(self.rest_offset, dtype=np.float64).reshape(3)
        if not np.all(np.isfinite(offset)):
            raise AttachmentError(f"marker '{self.label}' offset is not finite")
        init = np.asarray(self.init_position, dtype=np.float64).reshape(3)
        init_offset = offset.copy() if self.init_offset is None else np.asarray(
            self.init_offset, dtype=np.float64
        ).reshape(3)
        for arr in (bary, offset, init, init_offset):
            arr.setflags(write=False)
        object.__setattr__(self, "init_offset", init_offset)
        object.__setattr__(self, "anchor_bary", bary)
        object.__setattr__(self, "rest_offset", offset)
        object.__setattr__(self, "init_position", init)


@dataclass(frozen=True, eq=False)
class LatentMarkerSet:
    """Immutable collection of latent markers in a fixed order."""
    markers: tuple[LatentMarker, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        markers = tuple(self.markers)
        index = {m.label: i for i, m in enumerate(markers)}
        if len(index) != len(markers):
            raise AttachmentError("latent marker labels must be unique")
        object.__setattr__(self, "markers", markers)
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.markers)

    def __iter__(self):
        return iter(self.markers)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(m.label for m in self.markers)

    @property
    def faces(self) -> NDArray[np.int64]:
        return np.array([m.anchor_face for m in self.markers], dtype=np.int64)

    @property
    def barycentric(self) -> NDArray[np.float64]:
        return np.array([m.anchor_bary for m in self.markers]).reshape(-1, 3)

    @property
    def offsets(self) -> NDArray[np.float64]:
        return np.array([m.rest_offset for m in self.markers]).reshape(-1, 3)

    @property
    def init_offsets(self) -> NDArray[np.float64]:
        return np.array([m.init_offset for m in self.markers]).reshape(-1, 3)

    @property
    def init_positions(self) -> NDArray[np.float64]:
        return np.array([m.init_position for m in self.markers]).reshape(-1, 3)

    @property
    def target_distances(self) -> NDArray[np.float64]:
        return np.array([m.target_distance for m in self.markers], dtype=np.float64)

    def index_of(self, label: str) -> int:
        return self._index[label]

    def __contains__(self, label: object) -> bool:
        return label in self._index

    def anchors(self, model: BodyModel, offsets: ArrayLike | None = None) -> SurfaceAnchors:
        """Surface anchors of the markers, optionally with replacement offsets."""
        offs = self.offsets if offsets is None else np.asarray(offsets, dtype=np.float64)
        return SurfaceAnchors(model.faces[self.faces], self.barycentric, offs)

    def with_offsets(self, offsets: ArrayLike) -> LatentMarkerSet:
        """Copy with new local offsets; init positions are kept."""
        offs = np.asarray(offsets, dtype=np.float64)
        if offs.shape != (len(self), 3):
            raise DimensionError("offsets", (len(self), 3), offs.shape)
        return LatentMarkerSet(
            tuple(replace(m, rest_offset=o) for m, o in zip(self.markers, offs))
        )

    def subset(self, labels: list[str] | tuple[str, ...]) -> LatentMarkerSet:
        return LatentMarkerSet(tuple(self.markers[self._index[label]] for label in labels))


def attach_latent_markers(
    layout: MarkerLayout,
    model: BodyModel,
    beta: ArrayLike,
) -> LatentMarkerSet:
    """Initialize latent markers from a layout on the shaped rest mesh.

    Face anchors are displaced along the face normal; vertex anchors along
    the vertex normal, expressed in the frame of the first face using that
    vertex.

    Raises:
        AttachmentError: Unknown vertex/face index or degenerate anchor triangle
    """
    rest = shaped_rest(model, beta)
    mesh = TriangleMesh(rest, model.faces)
    areas = mesh.face_areas
    num_faces = model.faces.shape[0]

    markers: list[LatentMarker] = []
    for entry in layout.entries:
        if entry.vertex is not None:
            if not 0 <= entry.vertex < model.num_vertices:
                raise AttachmentError(f"marker '{entry.label}': unknown vertex {entry.vertex}")
            owners = np.flatnonzero(np.any(model.faces == entry.vertex, axis=1))
            owners = owners[areas[owners] > MIN_FACE_AREA]
            if owners.size == 0:
                raise AttachmentError(
                    f"marker '{entry.label}': vertex {entry.vertex} has no non-degenerate face"
                )
            face = int(owners[0])
            bary = (model.faces[face] == entry.vertex).astype(np.float64)
            frame = face_frames(rest[model.faces[face]][None])[0]
            local = frame.T @ (entry.offset * mesh.vertex_normals[entry.vertex])
        else:
            face = int(entry.face)  # type: ignore[arg-type]
            if not 0 <= face < num_faces:
                raise AttachmentError(f"marker '{entry.label}': unknown face {face}")
            if areas[face] <= MIN_FACE_AREA:
                raise AttachmentError(f"marker '{entry.label}': face {face} is degenerate")
            bary = np.asarray(entry.barycentric, dtype=np.float64)
            if np.any(bary < -BARY_TOLERANCE) or abs(bary.sum() - 1.0) > BARY_TOLERANCE:
                raise AttachmentError(f"marker '{entry.label}': invalid barycentric coordinates")
            local = np.array([0.0, 0.0, entry.offset])
            frame = face_frames(rest[model.faces[face]][None])[0]

        surface_point = bary @ rest[model.faces[face]]
        markers.append(
            LatentMarker(
                label=entry.label,
                anchor_face=face,
                anchor_bary=bary,
                rest_offset=local,
                init_position=surface_point + frame @ local,
                target_distance=entry.offset,
            )
        )
    logger.debug(f"Attached {len(markers)} latent markers")
    return LatentMarkerSet(tuple(markers))


def simulate_marker_array(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
) -> NDArray[np.float64]:
    """Posed marker positions in latent-set order, (L, 3)."""
    return evaluate_points(model, latent.anchors(model), beta, theta, phi, jacobian=False).positions


def simulate_markers(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
    theta: PoseVector | ArrayLike,
    phi: ArrayLike,
) -> dict[str, NDArray[np.float64]]:
    """Posed marker positions keyed by label."""
    positions = simulate_marker_array(latent, model, beta, theta, phi)
    return {label: positions[i] for i, label in enumerate(latent.labels)}


def rest_marker_positions(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
) -> NDArray[np.float64]:
    """Marker positions on the shaped rest mesh (zero pose, no soft tissue)."""
    zero_pose = np.zeros(model.num_pose_params)
    evaluation = evaluate_points(
        model, latent.anchors(model), beta, zero_pose, np.zeros(model.num_dyn), jacobian=False
    )
    return evaluation.rest_positions


@dataclass(frozen=True)
class SurfaceDistanceTerms:
    """Signed marker-to-skin distances with derivatives.

    Attributes:
        distances: (L,)
        d_beta: (L, S)
        d_offsets: (L, 3), each marker with respect to its own offset
    """
    distances: NDArray[np.float64]
    d_beta: NDArray[np.float64]
    d_offsets: NDArray[np.float64]


def surface_distance_terms(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
    offsets: ArrayLike | None = None,
    exhaustive: bool = False,
) -> SurfaceDistanceTerms:
    """Signed distances of rest-space markers to the shaped rest surface.

    The closest point moves with the surface at fixed barycentric
    coordinates, which is exact for the derivative of a minimum distance.
    """
    beta = np.asarray(beta, dtype=np.float64)
    anchors = latent.anchors(model, offsets)
    evaluation = evaluate_points(
        model, anchors, beta, np.zeros(model.num_pose_params), np.zeros(model.num_dyn)
    )
    rest = shaped_rest(model, beta)
    signed = signed_distances(TriangleMesh(rest, model.faces), evaluation.rest_positions, exhaustive)
    closest = signed.closest
    surface_shape = np.einsum(
        "pk,pkcs->pcs", closest.barycentric, model.shape_basis[model.faces[closest.faces]]
    )
    if evaluation.d_rest_beta is None or evaluation.frames is None:
        raise RuntimeError("marker anchors must carry offsets")
    d_beta = np.einsum("pc,pcs->ps", signed.directions, evaluation.d_rest_beta - surface_shape)
    d_offsets = np.einsum("pc,pcb->pb", signed.directions, evaluation.frames)
    return SurfaceDistanceTerms(signed.distances, d_beta, d_offsets)


def surface_distance(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
    exhaustive: bool = False,
) -> NDArray[np.float64]:
    """Signed distance (meters, positive outside) of each latent marker to the shaped rest surface."""
    positions = rest_marker_positions(latent, model, beta)
    mesh = TriangleMesh(shaped_rest(model, beta), model.faces)
    return signed_distances(mesh, positions, exhaustive).distances


@dataclass(frozen=True)
class PlacementDrift:
    """Rest-space displacement of each marker from its initial position.

    Attributes:
        residuals: (L, 3) meters
        d_beta: (L, 3, S)
        d_offsets: (L, 3, 3), each marker with respect to its own offset
    """
    residuals: NDArray[np.float64]
    d_beta: NDArray[np.float64]
    d_offsets: NDArray[np.float64]


def placement_drift(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
    offsets: ArrayLike | None = None,
) -> PlacementDrift:
    """How far each rest-space marker moved from where the layout put it.

    Both a change of shape and a change of offset move the marker.
    """
    evaluation = evaluate_points(
        model,
        latent.anchors(model, offsets),
        beta,
        np.zeros(model.num_pose_params),
        np.zeros(model.num_dyn),
    )
    if evaluation.d_rest_beta is None or evaluation.frames is None:
        raise RuntimeError("marker anchors must carry offsets")
    residuals = evaluation.rest_positions - latent.init_positions
    return PlacementDrift(residuals, evaluation.d_rest_beta, evaluation.frames)


def nearest_vertices(
    latent: LatentMarkerSet,
    model: BodyModel,
    beta: ArrayLike,
) -> NDArray[np.int64]:
    """Index of the shaped rest vertex nearest to each latent marker."""
    tree = cKDTree(shaped_rest(model, beta))
    _, index = tree.query(rest_marker_positions(latent, model, beta))
    return np.asarray(index, dtype=np.int64).reshape(-1)


def hand_marker_labels(latent: LatentMarkerSet, model: BodyModel) -> tuple[str, ...]:
    """Labels of markers whose anchor is dominated by a hand joint."""
    if not model.has_hands or len(latent) == 0:
        return ()
    idx = model.faces[latent.faces]
    weights = np.einsum("pk,pkj->pj", latent.barycentric, model.skin_weights[idx])
    dominant = np.argmax(weights, axis=1)
    hand = set(model.hand_joints.tolist())
    return tuple(label for label, j in zip(latent.labels, dominant) if int(j) in hand)
