"""PCA-based interactive scene orientation.

The principal directions of the selected Gaussian means are aligned with a
chosen permutation of the world axes; the rotation happens about the
selection centroid so the object stays put.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np
from numpy.typing import NDArray

from .errors import DegenerateSelectionError
from .scene import GaussianScene, apply_rigid_transform
from .selection import Selection3D

_AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]), "z": np.array([0.0, 0.0, 1.0])}


@dataclass(frozen=True)
class AxisMapping:
    """Bijection from principal components (PC1 = most variance) to world axes."""

    axes: tuple[str, str, str] = ("x", "y", "z")

    def __post_init__(self):
        if sorted(self.axes) != ["x", "y", "z"]:
            raise ValueError(f"mapping must be a permutation of x, y, z; got {self.axes}")

    @classmethod
    def parse(cls, text: str) -> "AxisMapping":
        """Parse forms like "pc3=z,pc1=x"; omitted components take the
        remaining axes in x, y, z order (so "pc3=z" means pc1=x, pc2=y)."""
        assigned: dict[int, str] = {}
        for part in text.replace(" ", "").split(","):
            if not part:
                continue
            key, _, axis = part.partition("=")
            if not key.lower().startswith("pc") or axis.lower() not in _AXES:
                raise ValueError(f"bad axis mapping entry {part!r}")
            pc = int(key[2:]) - 1
            if pc not in (0, 1, 2) or pc in assigned:
                raise ValueError(f"bad or repeated component in {part!r}")
            assigned[pc] = axis.lower()
        missing_pcs = [i for i in range(3) if i not in assigned]
        missing_axes = [a for a in "xyz" if a not in assigned.values()]
        if len(missing_pcs) != len(missing_axes):
            raise ValueError(f"axis mapping {text!r} is not a bijection")
        for pc, axis in zip(missing_pcs, missing_axes):
            assigned[pc] = axis
        return cls((assigned[0], assigned[1], assigned[2]))


def pca_basis(
    scene: GaussianScene, sel: Selection3D
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """Principal axes of the selected means.

    Returns (center, components, variances): components has PC rows ordered
    by descending variance and forms a right-handed basis.
    """
    if len(sel) != scene.count:
        raise ValueError("selection length does not match scene count")
    pts = scene.means[sel.bits].astype(np.float64)
    if pts.shape[0] < 3:
        raise DegenerateSelectionError(f"need at least 3 selected Gaussians, have {pts.shape[0]}")
    center = pts.mean(axis=0)
    centered = pts - center
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1]
    variances = evals[order]
    components = evecs[:, order].T
    if variances[1] <= 1e-12 * max(variances[0], 1e-300):
        raise DegenerateSelectionError("selected means are collinear; principal axes are undefined")
    if np.linalg.det(components) < 0:
        components[2] = -components[2]
    return center, components, variances


def orient_scene(scene: GaussianScene, sel: Selection3D, mapping: AxisMapping) -> GaussianScene:
    """Rotate the scene so each principal component lands on its mapped axis.

    Among the four sign choices with det +1, the rotation closest to the
    identity is used, and the selection centroid stays fixed.
    """
    center, components, _ = pca_basis(scene, sel)
    A = np.stack([_AXES[a] for a in mapping.axes])

    best_R = None
    best_trace = -np.inf
    for signs in product((1.0, -1.0), repeat=3):
        R = A.T @ (np.diag(signs) @ components)
        if np.linalg.det(R) < 0:
            continue
        tr = np.trace(R)
        if tr > best_trace:
            best_trace = tr
            best_R = R
    t = center - best_R @ center
    return apply_rigid_transform(scene, best_R, t)
