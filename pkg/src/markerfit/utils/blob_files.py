"""Little-endian array blobs stored next to a JSON manifest."""

from __future__ import annotations

from pathlib import Path
from typing import Callable

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..models import BlobRef
from .exceptions import FormatError
from .yaml_utils import atomic_write_bytes

ErrorFactory = Callable[[str, str], FormatError]


def read_blob(
    root: Path,
    name: str,
    ref: BlobRef,
    error: ErrorFactory,
    shape: tuple[int, ...] | None = None,
) -> NDArray:
    """Read a blob and check its byte length and shape.

    Args:
        root: Manifest directory
        name: Blob name, used in error messages
        ref: Manifest entry
        error: Builds the FormatError subclass to raise from (message, path)
        shape: Expected shape; defaults to the shape recorded in the manifest

    Raises:
        FormatError: Missing file, wrong length or wrong shape
    """
    path = root / ref.path
    try:
        data = path.read_bytes()
    except OSError as e:
        raise error(f"blob '{name}' cannot be read: {e}", str(path))
    if len(data) != ref.nbytes:
        raise error(
            f"blob '{name}' holds {len(data)} bytes, expected {ref.nbytes} "
            f"({ref.count} x {ref.itemsize})",
            str(path),
        )
    array = np.frombuffer(data, dtype=ref.dtype)
    target = shape if shape is not None else tuple(ref.shape) or (ref.count,)
    if int(np.prod(target, dtype=np.int64)) != ref.count:
        raise error(f"blob '{name}' has {ref.count} elements, expected shape {target}", str(path))
    return array.reshape(target)


def write_blob(root: Path, name: str, values: ArrayLike, dtype: str = "<f4") -> BlobRef:
    """Write an array as ``<name>.bin`` and return its manifest entry."""
    array = np.ascontiguousarray(np.asarray(values), dtype=np.dtype(dtype))
    filename = f"{name}.bin"
    atomic_write_bytes(root / filename, array.tobytes())
    return BlobRef(path=filename, count=int(array.size), shape=list(array.shape), dtype=dtype)  # type: ignore[arg-type]
