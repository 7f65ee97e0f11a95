"""Body model file manifest.

A model file is a JSON manifest naming its dimensions and joints plus one
binary blob per array. Prior statistics ride along in the same manifest.
"""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .blobs import BlobRef

MODEL_SCHEMA_VERSION = 1

# Blobs every model file carries, with their expected shapes
REQUIRED_BLOBS = (
    "template",
    "faces",
    "skin_weights",
    "joint_regressor",
    "shape_basis",
    "pose_basis",
    "dyn_basis",
    "shape_cov_diag",
    "body_mean",
    "body_cov_diag",
    "dyn_cov_diag",
)
MIXTURE_BLOBS = ("mixture_weights", "mixture_means", "mixture_covariances")
HAND_BLOBS = ("hand_projection", "hand_cov_diag", "hand_mean_pose")


class ModelDimensions(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    num_vertices: int = Field(..., alias="numVertices", ge=3)
    num_faces: int = Field(..., alias="numFaces", ge=1)
    num_joints: int = Field(..., alias="numJoints", ge=1)
    num_shape: int = Field(..., alias="numShape", ge=0)
    num_dyn: int = Field(..., alias="numDyn", ge=0)
    num_pose_features: int = Field(..., alias="numPoseFeatures", ge=0)
    num_mixture: int = Field(0, alias="numMixture", ge=0)
    hand_pca_dim: int = Field(0, alias="handPcaDim", ge=0)


class JointSpec(BaseModel):
    """One skeleton joint; the root has parent -1."""
    model_config = ConfigDict(populate_by_name=True)

    name: str = Field(..., min_length=1)
    parent: int = Field(..., ge=-1)
    role: Literal["root", "body", "hand_left", "hand_right"] = "body"


class ModelManifest(BaseModel):
    """Top-level model file document."""
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(MODEL_SCHEMA_VERSION, alias="schemaVersion")
    name: str = "body-model"
    dimensions: ModelDimensions
    joints: list[JointSpec]
    blobs: dict[str, BlobRef]

    @field_validator("schema_version")
    @classmethod
    def supported_version(cls, v: int) -> int:
        if v != MODEL_SCHEMA_VERSION:
            raise ValueError(f"unsupported model schema version {v}")
        return v

    @model_validator(mode="after")
    def consistent(self) -> ModelManifest:
        dims = self.dimensions
        if len(self.joints) != dims.num_joints:
            raise ValueError(f"{len(self.joints)} joints listed, numJoints is {dims.num_joints}")
        if self.joints[0].parent != -1 or self.joints[0].role != "root":
            raise ValueError("joint 0 must be the root with parent -1")
        for j, joint in enumerate(self.joints[1:], start=1):
            if not 0 <= joint.parent < j:
                raise ValueError(f"joint '{joint.name}' parent must precede it")
        missing = [name for name in REQUIRED_BLOBS if name not in self.blobs]
        if missing:
            raise ValueError(f"missing blobs: {', '.join(missing)}")
        groups = [(MIXTURE_BLOBS, dims.num_mixture > 0), (HAND_BLOBS, dims.hand_pca_dim > 0)]
        for names, expected in groups:
            present = [name in self.blobs for name in names]
            if any(present) and not all(present):
                raise ValueError(f"blobs {', '.join(names)} must be given together")
            if all(present) != expected:
                raise ValueError(f"blobs {', '.join(names)} do not match the declared dimensions")
        return self
