"""
Global view descriptor: a normal-to-viewpoint angle histogram and a centroid
distance histogram for view discrimination, plus a camera-roll histogram for
recovering the rotation about the optical axis.
"""
import math
from dataclasses import dataclass

import numpy as np

from deskasm.cloud import PointCloud
from deskasm.errors import PreconditionError

NORMAL_BINS   = 45
DISTANCE_BINS = 64
ROLL_BINS     = 90
ROLL_STEP     = 2.0 * math.pi / ROLL_BINS


@dataclass(frozen=True, eq=False)
class Descriptor:
    normal_angle_hist:  np.ndarray
    centroid_dist_hist: np.ndarray
    roll_hist:          np.ndarray

    def to_dict(self) -> dict:
        return {"normalAngle": self.normal_angle_hist.tolist(),
                "centroidDist": self.centroid_dist_hist.tolist(),
                "roll": self.roll_hist.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Descriptor":
        return cls(np.array(d["normalAngle"]), np.array(d["centroidDist"]), np.array(d["roll"]))


@dataclass(frozen=True)
class Candidate:
    index:    int
    distance: float
    roll:     float   # rotation about the optical axis, query relative to template


def _normalized(h: np.ndarray) -> np.ndarray:
    s = h.sum()
    return h / s if s > 0 else np.full(len(h), 1.0 / len(h))


def compute_descriptor(cloud: PointCloud, viewpoint=(0.0, 0.0, 0.0)) -> Descriptor:
    """*cloud* is in sensor coordinates: optical axis +z, image plane xy."""
    if len(cloud) == 0:
        raise PreconditionError("descriptor of an empty cloud")
    if cloud.normals is None:
        raise PreconditionError("descriptor needs normals")
    P, N = cloud.points, cloud.normals

    to_view = np.asarray(viewpoint, dtype=float) - P
    to_view /= np.maximum(np.linalg.norm(to_view, axis=1, keepdims=True), 1e-15)
    angles = np.arccos(np.clip(np.einsum("ij,ij->i", N, to_view), -1.0, 1.0))
    h_angle, _ = np.histogram(angles, bins=NORMAL_BINS, range=(0.0, math.pi))

    dist = np.linalg.norm(P - P.mean(axis=0), axis=1)
    dmax = dist.max()
    dist = dist / dmax if dmax > 0 else dist
    h_dist, _ = np.histogram(dist, bins=DISTANCE_BINS, range=(0.0, 1.0))

    weights = np.hypot(N[:, 0], N[:, 1])
    roll = np.arctan2(N[:, 1], N[:, 0])
    h_roll, _ = np.histogram(roll, bins=ROLL_BINS, range=(-math.pi, math.pi), weights=weights)

    return Descriptor(_normalized(h_angle.astype(float)), _normalized(h_dist.astype(float)),
                      _normalized(h_roll.astype(float)))


def descriptor_distance(a: Descriptor, b: Descriptor) -> float:
    """L1 distance over the view-discriminating histograms."""
    return float(np.abs(a.normal_angle_hist - b.normal_angle_hist).sum()
                 + np.abs(a.centroid_dist_hist - b.centroid_dist_hist).sum())


def estimate_roll(query: np.ndarray, template: np.ndarray) -> float:
    """
    Shift maximising the circular cross-correlation of two roll histograms,
    as an angle in (-pi, pi].  ``query == np.roll(template, k)`` gives ``k`` bins.
    """
    corr = np.fft.irfft(np.fft.rfft(query) * np.conj(np.fft.rfft(template)), n=len(query))
    k = int(np.argmax(np.round(corr, 12)))
    angle = k * ROLL_STEP
    return angle - 2.0 * math.pi if angle > math.pi else angle


def match_templates(query: Descriptor, library, k: int = 3) -> list[Candidate]:
    """Top-*k* templates by descriptor distance, ties by template index."""
    if not library:
        raise PreconditionError("empty template library")
    scored = sorted((descriptor_distance(query, t.descriptor), i) for i, t in enumerate(library))
    return [Candidate(i, d, estimate_roll(query.roll_hist, library[i].descriptor.roll_hist))
            for d, i in scored[:k]]
