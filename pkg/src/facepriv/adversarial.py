"""DeepFool and universal perturbations for affine multiclass classifiers.

On an affine classifier DeepFool's linearization is exact, so the minimal
perturbation comes out in one step and every property can be checked
analytically. The fooling rate is measured on the supplied sample only; it
says nothing certified about the underlying data distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DimensionError, FormatError, NoBoundaryError, ParameterError
from .rng import as_source

CLASSIFIER_FORMAT_KEYS = ("labels", "weights", "biases")


@dataclass(frozen=True, eq=False)
class AffineClassifier:
    """``k(x) = argmax_k (W x + b)_k``, ties going to the lowest index."""

    weights: np.ndarray
    biases: np.ndarray
    labels: Tuple[str, ...] = ()

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64)
        b = np.array(self.biases, dtype=np.float64)
        if w.ndim != 2:
            raise DimensionError("weights must be a K x d matrix")
        if b.shape != (w.shape[0],):
            raise DimensionError(f"need {w.shape[0]} biases, got shape {b.shape}")
        if w.shape[0] < 2:
            raise ParameterError("a classifier needs at least two classes")
        labels = tuple(str(x) for x in self.labels) if len(self.labels) else tuple(str(k) for k in range(w.shape[0]))
        if len(labels) != w.shape[0]:
            raise DimensionError(f"need {w.shape[0]} labels, got {len(labels)}")
        w.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        object.__setattr__(self, "labels", labels)

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    def scores(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dim:
            raise DimensionError(f"expected inputs of dimension {self.dim}, got {x.shape[-1]}")
        return x @ self.weights.T + self.biases

    def predict(self, points) -> np.ndarray:
        """Class indices for a batch of points (``argmax`` already breaks ties low)."""
        return np.argmax(self.scores(np.atleast_2d(points)), axis=1)

    @classmethod
    def from_json(cls, obj) -> "AffineClassifier":
        try:
            return cls(np.asarray(obj["weights"], dtype=float), np.asarray(obj["biases"], dtype=float),
                       tuple(obj.get("labels") or ()))
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"malformed classifier document: {exc}") from None

    def to_json(self) -> dict:
        return {"labels": list(self.labels), "weights": self.weights.tolist(), "biases": self.biases.tolist()}


def classify(clf: AffineClassifier, x) -> int:
    """Index of the winning class for a single point."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionError("classify takes a single point")
    return int(np.argmax(clf.scores(x)))


def boundary_distances(clf: AffineClassifier, x) -> Tuple[int, np.ndarray]:
    """Label of ``x`` and its distance to each pairwise boundary with the winner.

    Entries are ``inf`` for the winner itself and for classes whose difference
    hyperplane has zero normal.
    """
    x = np.asarray(x, dtype=np.float64)
    s = clf.scores(x)
    k = int(np.argmax(s))
    dw = clf.weights - clf.weights[k]
    norms = np.linalg.norm(dw, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(norms > 0, np.abs(s - s[k]) / norms, np.inf)
    dist[k] = np.inf
    return k, dist


def deepfool_affine(clf: AffineClassifier, x, max_iters: int = 50, overshoot: float = 0.02) -> np.ndarray:
    """Minimal L2 perturbation moving ``x`` onto the nearest decision boundary.

    For the winning class ``k`` and each competitor ``l`` the boundary is the
    hyperplane ``(w_l - w_k) . z + (b_l - b_k) = 0``; the returned ``r`` is the
    orthogonal step onto the closest such hyperplane, so ``x + (1 + overshoot) r``
    lands in another class. The affine case needs one step; ``max_iters``
    only guards the crossing check when rounding leaves ``x + (1 + overshoot) r``
    in the original class.
    """
    if overshoot < 0:
        raise ParameterError("overshoot must be >= 0")
    x = np.asarray(x, dtype=np.float64)
    k, dist = boundary_distances(clf, x)
    if not np.isfinite(dist).any():
        raise NoBoundaryError("every competing class has the same weights as the predicted class")
    l = int(np.argmin(dist))
    w = clf.weights[l] - clf.weights[k]
    f = (clf.biases[l] - clf.biases[k]) + float(w @ x)
    r = (abs(f) / float(w @ w)) * w
    for _ in range(max_iters):
        if f == 0 or classify(clf, x + (1 + overshoot) * r) != k:
            break
        # float rounding landed just short of the boundary
        r = r * (1 + 1e-12) + np.spacing(np.abs(r).max()) * np.sign(w)
    return r


def project_lp_ball(v, xi: float, p_norm) -> np.ndarray:
    """Euclidean projection of ``v`` onto ``{u : ||u||_p <= xi}`` for p in {2, inf}."""
    if not xi > 0:
        raise ParameterError(f"xi must be > 0, got {xi}")
    p = parse_norm(p_norm)
    v = np.asarray(v, dtype=np.float64)
    if p == 2:
        n = np.linalg.norm(v)
        if n <= xi:
            return v.copy()
        out = v * (xi / n)
        # guard the final ulp so the ball constraint holds exactly
        while np.linalg.norm(out) > xi:
            out = out * (1 - 2 ** -52)
        return out
    return np.clip(v, -xi, xi)


def parse_norm(p_norm) -> float:
    if isinstance(p_norm, str):
        p_norm = p_norm.strip().lower()
        if p_norm in ("inf", "infinity", "linf"):
            return math.inf
        p_norm = float(p_norm)
    if p_norm == 2:
        return 2
    if p_norm == math.inf:
        return math.inf
    raise ParameterError(f"p_norm must be 2 or inf, got {p_norm!r}")


def lp_norm(v, p_norm) -> float:
    p = parse_norm(p_norm)
    v = np.asarray(v, dtype=np.float64)
    return float(np.linalg.norm(v) if p == 2 else (np.abs(v).max() if v.size else 0.0))


@dataclass(frozen=True)
class PerturbationConfig:
    xi: float
    delta: float = 0.2
    p_norm: float = 2
    max_outer_iters: int = 10
    overshoot: float = 0.02
    per_step_cap: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "p_norm", parse_norm(self.p_norm))
        if not self.xi > 0:
            raise ParameterError(f"xi must be > 0, got {self.xi}")
        if not 0 <= self.delta <= 1:
            raise ParameterError(f"delta must lie in [0, 1], got {self.delta}")
        if self.max_outer_iters < 0:
            raise ParameterError("max_outer_iters must be >= 0")
        if not self.overshoot > 0:
            raise ParameterError("overshoot must be > 0")
        if self.per_step_cap is not None and not self.per_step_cap > 0:
            raise ParameterError("per_step_cap must be > 0 when set")


@dataclass(frozen=True, eq=False)
class UniversalPerturbation:
    v: np.ndarray
    achieved_fooling_rate: float
    iterations_used: int

    def to_json(self) -> dict:
        return {"v": self.v.tolist(), "achieved_fooling_rate": self.achieved_fooling_rate,
                "iterations_used": self.iterations_used}


def fooling_rate(points, clf: AffineClassifier, v) -> float:
    """Fraction of points whose label changes under ``x -> x + v``."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (clf.dim,) or pts.shape[1] != clf.dim:
        raise DimensionError("points, v and classifier dimensions disagree")
    if len(pts) == 0:
        return 0.0
    return float(np.mean(clf.predict(pts + v) != clf.predict(pts)))


def universal_perturbation(points: Sequence, clf: AffineClassifier, config: PerturbationConfig,
                           rng=None) -> UniversalPerturbation:
    """Accumulate DeepFool steps into one perturbation kept inside the Lp ball.

    Each outer pass visits the points in a fresh random order; a point still
    classified as before gets the DeepFool step from ``x + v`` (optionally
    capped to ``per_step_cap`` in L2), which is added with the overshoot and
    the sum projected back onto the ball. The fooling rate is checked after
    each full pass and the loop stops once it reaches ``1 - delta``.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if len(pts) == 0:
        raise ParameterError("need at least one point")
    if pts.shape[1] != clf.dim:
        raise DimensionError(f"points have dimension {pts.shape[1]}, classifier {clf.dim}")
    rng = as_source(rng)
    target = 1.0 - config.delta
    labels = clf.predict(pts)
    v = np.zeros(clf.dim)
    rate = fooling_rate(pts, clf, v)
    iters = 0
    while rate < target and iters < config.max_outer_iters:
        for i in rng.permutation(len(pts)):
            x = pts[i]
            if classify(clf, x + v) != labels[i]:
                continue
            dv = deepfool_affine(clf, x + v, overshoot=config.overshoot)
            if config.per_step_cap is not None:
                n = np.linalg.norm(dv)
                if n > config.per_step_cap:
                    dv = dv * (config.per_step_cap / n)
            v = project_lp_ball(v + (1 + config.overshoot) * dv, config.xi, config.p_norm)
        iters += 1
        rate = fooling_rate(pts, clf, v)
    return UniversalPerturbation(v, rate, iters)
