"""
Symmetric Gauss rules on the reference triangle and the quadrature settings
used by Gram and EFIE assembly.

Rules are stored in barycentric coordinates with weights summing to 1; the
physical weights are weight · area.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import QuadratureError


@dataclass(eq=False)
class QuadratureRule:
    points: np.ndarray               # (Q, 3) barycentric
    weights: np.ndarray              # (Q,), sum 1
    degree: int                      # polynomial exactness
    name: str = ""

    @property
    def size(self) -> int:
        return len(self.weights)

    def map_to(self, triangles: np.ndarray) -> np.ndarray:
        """(..., 3, 3) vertex arrays → (..., Q, 3) physical points."""
        return np.einsum("qi,...ij->...qj", self.points, triangles)

    def scaled_weights(self, areas: np.ndarray) -> np.ndarray:
        return np.asarray(areas)[..., None] * self.weights

    def subdivided(self, levels: int) -> "QuadratureRule":
        """Composite rule on 4**levels congruent sub-triangles."""
        if levels <= 0:
            return self
        corners = [np.eye(3)]
        for _ in range(levels):
            children = []
            for c in corners:
                m01, m12, m20 = (c[0] + c[1]) / 2, (c[1] + c[2]) / 2, (c[2] + c[0]) / 2
                children += [
                    np.array([c[0], m01, m20]),
                    np.array([m01, c[1], m12]),
                    np.array([m20, m12, c[2]]),
                    np.array([m01, m12, m20]),
                ]
            corners = children
        points = np.concatenate([self.points @ c for c in corners])
        weights = np.tile(self.weights, len(corners)) / len(corners)
        return QuadratureRule(points, weights, self.degree, f"{self.name}x{len(corners)}")


def _orbit(a: float, b: float) -> list[tuple[float, float, float]]:
    return sorted(set(permutations((a, b, b))))


def _build(orbits: list[tuple[list, float]], degree: int, name: str) -> QuadratureRule:
    points, weights = [], []
    for pts, w in orbits:
        points += pts
        weights += [w] * len(pts)
    weights = np.asarray(weights)
    return QuadratureRule(np.asarray(points, dtype=float), weights / weights.sum(), degree, name)


_A1, _B1, _W1 = 0.059715871789769820, 0.470142064105115090, 0.132394152788506181
_A2, _B2, _W2 = 0.797426985353087322, 0.101286507323456339, 0.125939180544827153

RULES: dict[int, QuadratureRule] = {
    1: _build([([(1 / 3, 1 / 3, 1 / 3)], 1.0)], 1, "gauss1"),
    2: _build([(_orbit(2 / 3, 1 / 6), 1 / 3)], 2, "gauss3"),
    5: _build(
        [([(1 / 3, 1 / 3, 1 / 3)], 0.225), (_orbit(_A1, _B1), _W1), (_orbit(_A2, _B2), _W2)],
        5,
        "gauss7",
    ),
}

MAX_DEGREE = max(RULES)


def rule_for_degree(degree: int) -> QuadratureRule:
    """Smallest tabulated rule exact for polynomials of `degree`."""
    for d in sorted(RULES):
        if d >= degree:
            return RULES[d]
    raise QuadratureError(f"no tabulated triangle rule of degree {degree}; maximum is {MAX_DEGREE}")


@dataclass(frozen=True)
class QuadratureConfig:
    """Quadrature settings shared by Gram, excitation and EFIE assembly."""
    gram_degree: int = 5             # products of linear functions need ≥ 2
    outer_degree: int = 5            # test-cell rule
    inner_degree: int = 5            # source-cell rule for the smooth kernel remainder
    far_subdivisions: int = 0        # composite levels for well-separated pairs
    near_subdivisions: int = 2       # composite levels for touching / close pairs
    near_factor: float = 1.5         # near if centroid distance < factor·(diam_c + diam_d)

    def validate(self) -> "QuadratureConfig":
        for name in ("gram_degree", "outer_degree", "inner_degree"):
            degree = getattr(self, name)
            if degree < 2:
                raise QuadratureError(f"{name}={degree}: products of linear basis functions need degree ≥ 2")
            rule_for_degree(degree)
        if self.far_subdivisions < 0 or self.near_subdivisions < 0:
            raise QuadratureError("subdivision levels must be ≥ 0")
        if self.near_factor <= 0:
            raise QuadratureError("near_factor must be positive")
        return self
