"""Downhill simplex (Nelder-Mead) minimisation and pose estimation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalError, PoseDomainError
from .loss import MaskMode, pose_loss
from .mesh import Mesh
from .posecam import CameraConfig, Pose, denormalize_pose, normalize_pose
from .raster import AttributeImage

PSI_LIMIT = 1.0 - 1e-9


class InitializationError(NumericalError):
    pass


@dataclass(frozen=True)
class SimplexConfig:
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5
    init_step: float = 0.05
    tol_f: float = 1e-7
    tol_x: float = 1e-5
    max_evals: int = 2000
    restarts: int = 3

    def __post_init__(self):
        for name in ("reflection", "expansion", "contraction", "shrink", "init_step", "tol_f", "tol_x"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.max_evals < 1 or self.restarts < 0:
            raise ConfigError("max_evals must be >= 1 and restarts >= 0")


@dataclass
class SimplexResult:
    x: np.ndarray
    fun: float
    evals: int
    start_value: float
    converged: bool
    trace: list = field(default_factory=list)  # (best loss, diameter) per iteration


class _BudgetExhausted(Exception):
    pass


def _diameter(simplex: np.ndarray) -> float:
    diffs = simplex[:, None, :] - simplex[None, :, :]
    return float(np.max(np.abs(diffs)))


def nelder_mead(objective: Callable[[np.ndarray], float], start, cfg: SimplexConfig = SimplexConfig()) -> SimplexResult:
    """Minimise ``objective`` from ``start`` with a fixed-coefficient simplex.

    The initial simplex is ``start`` plus ``cfg.init_step`` along each axis.
    Stops when both the spread of function values is within ``tol_f`` and
    the simplex diameter (max-norm) is within ``tol_x``, or when
    ``max_evals`` evaluations have been spent. NaN values count as +inf.
    """
    x0 = np.array(start, dtype=np.float64).reshape(-1)
    k = len(x0)
    if k == 0:
        raise ConfigError("cannot optimise over zero parameters")

    evals = 0

    def f(x):
        nonlocal evals
        if evals >= cfg.max_evals:
            raise _BudgetExhausted
        evals += 1
        val = float(objective(x))
        return math.inf if math.isnan(val) else val

    f0 = f(x0)
    if not math.isfinite(f0):
        raise NumericalError(f"objective is not finite at the start point ({f0})")

    simplex = np.vstack([x0] + [x0 + cfg.init_step * np.eye(k)[i] for i in range(k)])
    fvals = np.full(k + 1, math.inf)
    fvals[0] = f0
    trace = []
    converged = False
    try:
        for i in range(1, k + 1):
            fvals[i] = f(simplex[i])
        while True:
            order = np.argsort(fvals, kind="stable")
            simplex, fvals = simplex[order], fvals[order]
            diam = _diameter(simplex)
            trace.append((float(fvals[0]), diam))
            if fvals[-1] - fvals[0] <= cfg.tol_f and diam <= cfg.tol_x:
                converged = True
                break

            centroid = simplex[:-1].mean(axis=0)
            worst = simplex[-1]
            xr = centroid + cfg.reflection * (centroid - worst)
            fr = f(xr)
            if fr < fvals[0]:
                xe = centroid + cfg.expansion * (xr - centroid)
                fe = f(xe)
                if fe < fr:
                    simplex[-1], fvals[-1] = xe, fe
                else:
                    simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-2]:
                simplex[-1], fvals[-1] = xr, fr
                continue
            if fr < fvals[-1]:
                xc = centroid + cfg.contraction * (xr - centroid)
                fc = f(xc)
                if fc <= fr:
                    simplex[-1], fvals[-1] = xc, fc
                    continue
            else:
                xc = centroid + cfg.contraction * (worst - centroid)
                fc = f(xc)
                if fc < fvals[-1]:
                    simplex[-1], fvals[-1] = xc, fc
                    continue
            for i in range(1, k + 1):
                simplex[i] = simplex[0] + cfg.shrink * (simplex[i] - simplex[0])
                fvals[i] = f(simplex[i])
    except _BudgetExhausted:
        pass

    best = int(np.argmin(fvals))
    return SimplexResult(simplex[best].copy(), float(fvals[best]), evals, f0, converged, trace)


@dataclass
class RestartResult:
    x: np.ndarray
    fun: float
    evals: int
    restarts_used: int
    trace: list


def minimize_with_restarts(objective, start, cfg: SimplexConfig = SimplexConfig()) -> RestartResult:
    """Nelder-Mead, re-seeded with a fresh simplex at the best point.

    A restart happens while restarts remain and the previous run lowered the
    objective by more than ``tol_f``. The best-so-far column of the returned
    trace is non-increasing across runs.
    """
    run = nelder_mead(objective, start, cfg)
    x, fun, evals = run.x, run.fun, run.evals
    trace = _running_best(run.trace, math.inf)
    improvement = run.start_value - run.fun
    used = 0
    while used < cfg.restarts and improvement > cfg.tol_f:
        run = nelder_mead(objective, x, cfg)
        used += 1
        evals += run.evals
        trace += _running_best(run.trace, fun)
        improvement = run.start_value - run.fun
        if run.fun <= fun:
            x, fun = run.x, run.fun
    return RestartResult(x, fun, evals, used, trace)


def _running_best(trace, best):
    out = []
    for loss, diam in trace:
        best = min(best, loss)
        out.append((best, diam))
    return out


@dataclass
class EstimateResult:
    best_pose: Pose
    best_loss: float
    evals: int
    restarts_used: int
    trace: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"pose": self.best_pose.to_json(), "loss": self.best_loss, "evals": self.evals, "restarts": self.restarts_used}


def clamp_psi(values: np.ndarray) -> np.ndarray:
    """Radially pull (psi_x, psi_y) inside the closed disk of radius 1 - 1e-9."""
    out = np.array(values, dtype=np.float64)
    r = math.hypot(out[4], out[5])
    if r > PSI_LIMIT:
        out[4] *= PSI_LIMIT / r
        out[5] *= PSI_LIMIT / r
    return out


class PoseObjective:
    """Loss as a function of (a subset of) the normalised pose vector.

    Invalid poses and failed evaluations score ``sentinel`` so the simplex can
    back away from them.
    """

    def __init__(self, photo: AttributeImage, mesh: Mesh, cam: CameraConfig, base: np.ndarray,
                 free: np.ndarray, mask_mode=MaskMode.MODEL_SILHOUETTE, min_pixels: int = 100,
                 require_perspective: bool = False):
        self.photo = photo
        self.mesh = mesh
        self.cam = cam
        self.base = np.asarray(base, dtype=np.float64)
        self.free = np.asarray(free, dtype=bool)
        self.mask_mode = mask_mode
        self.min_pixels = min_pixels
        self.require_perspective = require_perspective
        self.sentinel = float(min(photo.n_channels, 4) + 1)

    def full_vector(self, x) -> np.ndarray:
        full = self.base.copy()
        full[self.free] = x
        return clamp_psi(full)

    def pose(self, x) -> Pose:
        full = self.full_vector(x)
        if self.require_perspective and not full[6] > 0.0:
            raise PoseDomainError("normalized focal parameter must stay positive")
        return denormalize_pose(full, self.cam.image_dims)

    def __call__(self, x) -> float:
        try:
            return pose_loss(self.photo, self.mesh, self.pose(x), self.cam, self.mask_mode, self.min_pixels)
        except (PoseDomainError, NumericalError):
            return self.sentinel


def estimate_pose(
    photo: AttributeImage,
    mesh: Mesh,
    init_pose: Pose,
    cam: CameraConfig,
    cfg: SimplexConfig = SimplexConfig(),
    mask_mode=MaskMode.MODEL_SILHOUETTE,
    optimize_focal: bool = True,
    min_pixels: int = 100,
) -> EstimateResult:
    """Refine ``init_pose`` by minimising the invariant loss over the normalised pose.

    An orthographic initial pose is given ``f = 10 * image width`` when the
    focal length is optimised; with ``optimize_focal=False`` the focal
    component stays fixed and six parameters are searched.
    """
    if optimize_focal and init_pose.orthographic:
        init_pose = Pose(init_pose.mu, init_pose.delta, init_pose.psi, 10.0 * cam.width)
    try:
        init_pose.validate()
        pose_loss(photo, mesh, init_pose, cam, mask_mode, min_pixels)
    except (PoseDomainError, NumericalError) as exc:
        raise InitializationError(f"loss cannot be evaluated at the initial pose: {exc}") from exc

    base = normalize_pose(init_pose, cam.image_dims).as_array()
    free = np.ones(7, dtype=bool)
    if not optimize_focal:
        free[6] = False
    objective = PoseObjective(photo, mesh, cam, base, free, mask_mode, min_pixels, require_perspective=optimize_focal)
    res = minimize_with_restarts(objective, base[free], cfg)
    best_pose = objective.pose(res.x)
    return EstimateResult(best_pose, res.fun, res.evals, res.restarts_used, res.trace)
