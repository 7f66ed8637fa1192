"""
Swing phase ankle torque minimization over the gait control points.

The 38 coordinates of the 19 control points are boxed by lower and upper bound matrices. Pinned
coordinates (equal bounds) hold the initial and landing conditions; the remaining free coordinates
are searched with a bounded Nelder-Mead simplex, optionally restarted from seeded random draws.
"""
import logging
from dataclasses import dataclass, field, replace

import numpy as np
import pandas as pd
from scipy.optimize import Bounds, minimize

from .gait import GaitControlPoints, GaitSamplingError, sample_gait

logger = logging.getLogger(__name__)

TORSO_SWAY = np.pi / 12
# swing foot control point heights in m
FOOT_CLEARANCE = 0.3
FOOT_CEILING = 0.6
NUM_ROWS = 19
# rows of the flat parameter vector (row-major over the 19 x 2 control point matrix)
PR_ROWS = slice(0, 5)
PPHI_ROWS = slice(5, 10)
PP_ROWS = slice(10, 15)
PZ_ROWS = slice(15, 19)


class InfeasibleTaskError(ValueError):
    pass


class InitializationError(RuntimeError):
    pass


@dataclass(frozen=True)
class BoundsPair:
    """
    Elementwise box B <= P <= U on the (19, 2) control point matrix.
    """
    lower: np.ndarray
    upper: np.ndarray

    @property
    def pinned(self):
        return self.lower == self.upper

    @property
    def pinned_rows(self):
        return int(np.count_nonzero(np.all(self.pinned, axis=1)))

    @property
    def free_mask(self):
        return ~self.pinned.ravel()

    def violation(self, matrix):
        """Largest elementwise distance of a control point matrix outside the box."""
        matrix = np.asarray(matrix, dtype=float)
        return float(np.max(np.maximum(np.maximum(self.lower - matrix, matrix - self.upper), 0.0)))

    def clip(self, matrix):
        return np.clip(matrix, self.lower, self.upper)


@dataclass(frozen=True)
class OptimizerOptions:
    """
    Attributes:
        max_evaluations: cost evaluations allowed per start
        restarts: extra starts from random draws after the deterministic initial gait
        seed: seed of the random draws
        tolerance: absolute cost change that ends a start
        step_tolerance: absolute simplex size that ends a start
        simplex_scale: initial simplex edge as a fraction of each free coordinate's box width
        init_attempts: random draws tried when looking for a feasible start
    """
    max_evaluations: int = 4000
    restarts: int = 0
    seed: int = 0
    tolerance: float = 1e-6
    step_tolerance: float = 1e-6
    simplex_scale: float = 0.1
    init_attempts: int = 200

    def __post_init__(self):
        if self.max_evaluations < 1:
            raise ValueError(f"max_evaluations must be at least 1, got {self.max_evaluations}")
        if self.restarts < 0:
            raise ValueError(f"restarts must be non-negative, got {self.restarts}")
        if not self.tolerance > 0 or not self.step_tolerance > 0:
            raise ValueError("tolerances must be positive")
        if not 0 < self.simplex_scale <= 1:
            raise ValueError(f"simplex_scale must lie in (0, 1], got {self.simplex_scale}")


@dataclass
class OptimizationResult:
    control_points: GaitControlPoints
    cost: float
    initial_cost: float
    evaluations: int
    restart_costs: list
    max_bound_violation: float
    trajectory: object = None
    cost_terms: dict = field(default_factory=dict)

    def to_report(self):
        return {"cost": self.cost,
                "initial_cost": self.initial_cost,
                "evaluations": self.evaluations,
                "restart_costs": [float(c) for c in self.restart_costs],
                "max_bound_violation": self.max_bound_violation,
                "torque_term": self.cost_terms.get("torque_term"),
                "penalty_term": self.cost_terms.get("penalty_term"),
                "peak_foot_speed": self.cost_terms.get("peak_foot_speed")}


def contact_indicator(p5, start, land, radius):
    """
    0 where the swing foot is within radius of the start or landing point (inclusive), else 1.

    Args:
        p5: foot position(s), shape (..., 2)
        start: p5(0)
        land: p5(t_s)
        radius: contact radius in m

    Returns:
        integer array of shape (...)
    """
    if not radius > 0:
        raise ValueError(f"contact radius must be positive, got {radius}")
    p5 = np.asarray(p5, dtype=float)
    near_start = np.linalg.norm(p5 - np.asarray(start, dtype=float), axis=-1) <= radius
    near_land = np.linalg.norm(p5 - np.asarray(land, dtype=float), axis=-1) <= radius
    return np.where(near_start | near_land, 0, 1)


def build_bounds(task):
    """
    Lower and upper bound matrices of the 19 control points for a task. Distances are in m.

    Raises:
        InfeasibleTaskError: a lower bound exceeds its upper bound
    """
    ts = task.step_time
    x0, y0 = task.start
    xs, ys = task.land
    r0 = task.r2_0
    f0 = task.phi3_0
    sway = TORSO_SWAY
    lower = np.array([[0, r0], [0, 0], [0, 0], [0, 0], [ts, 0],
                      [0, f0], [0, -sway], [0, -sway], [0, -sway], [ts, -sway],
                      [x0, y0], [x0, y0 + FOOT_CLEARANCE], [x0, min(y0, ys)], [xs, ys + FOOT_CLEARANCE], [xs, ys],
                      [0, 0], [0, 0], [0, 0], [ts, 1]], dtype=float)
    upper = np.array([[0, r0], [ts, 1], [ts, 1], [ts, 1], [ts, 1],
                      [0, f0], [ts, sway], [ts, sway], [ts, sway], [ts, sway],
                      [x0, y0], [x0, FOOT_CEILING], [xs, FOOT_CEILING], [xs, FOOT_CEILING], [xs, ys],
                      [0, 0], [ts, 1], [ts, 1], [ts, 1]], dtype=float)
    bad = np.argwhere(lower > upper)
    if bad.size:
        rows = ", ".join(f"row {r + 1} column {c + 1}" for r, c in bad)
        raise InfeasibleTaskError(f"infeasible task {task.name}: lower bound above upper bound at {rows}")
    return BoundsPair(lower, upper)


def swing_cost_terms(table, task):
    """
    The two terms of the swing cost for a sampled trajectory: the mean over samples of the contact
    gated squared stance ankle torque, and the penalty on the peak swing foot speed.

    Returns:
        dict with torque_term, penalty_term, peak_foot_speed and mean_squared_ankle_torque
    """
    gate = contact_indicator(table.p5, task.start, task.land, task.contact_radius)
    torque_term = float(np.sum(gate * table.ankle_torque ** 2) / table.num_rows)
    peak_speed = float(np.max(table.foot_speed))
    return {"torque_term": torque_term,
            "penalty_term": task.penalty_weight * peak_speed,
            "peak_foot_speed": peak_speed,
            "mean_squared_ankle_torque": float(np.mean(table.ankle_torque ** 2))}


def cost(control_points, task, model):
    """
    Swing cost J(P). Gaits that cannot be sampled, or that break the foot speed ceiling of the task,
    cost +inf.
    """
    try:
        table = sample_gait(control_points, task, model)
    except GaitSamplingError as err:
        logger.debug("infeasible candidate: %s", err)
        return np.inf
    terms = swing_cost_terms(table, task)
    if task.max_foot_speed is not None and terms["peak_foot_speed"] > task.max_foot_speed:
        logger.debug("candidate over the foot speed ceiling: %.6g m/s", terms["peak_foot_speed"])
        return np.inf
    value = terms["torque_term"] + terms["penalty_term"]
    return value if np.isfinite(value) else np.inf


def initial_control_points(task, bounds, r2=None):
    """
    Deterministic starting gait: equally spaced times, constant r2 and torso angle, a uniform pace
    and a foot path lifted to the lowest allowed control point heights. The result is clipped into
    the bounds.
    """
    ts = task.step_time
    x0, y0 = task.start
    xs, ys = task.land
    r2 = task.r2_0 if r2 is None else r2
    times = np.linspace(0.0, ts, 5)
    matrix = np.vstack([np.column_stack([times, np.full(5, r2)]),
                        np.column_stack([times, np.full(5, np.clip(task.phi3_0, -TORSO_SWAY, TORSO_SWAY))]),
                        [[x0, y0], [x0, y0 + FOOT_CLEARANCE], [(x0 + xs) / 2, (y0 + ys) / 2],
                         [xs, ys + FOOT_CLEARANCE], [xs, ys]],
                        np.column_stack([np.linspace(0.0, ts, 4), np.linspace(0.0, 1.0, 4)])])
    matrix[0, 1] = task.r2_0
    matrix[5, 1] = task.phi3_0
    return GaitControlPoints.from_matrix(bounds.clip(matrix))


def random_control_points(rs, bounds):
    """
    Uniform draw inside the box with the free time coordinates of every curve sorted, and the free
    pace values sorted, so the draw is a monotone reparameterization.
    """
    matrix = rs.uniform(bounds.lower, bounds.upper)
    for rows in (PR_ROWS, PPHI_ROWS, PZ_ROWS):
        inner = np.arange(rows.start + 1, rows.stop - 1)
        matrix[inner, 0] = np.sort(matrix[inner, 0])
    pace = np.arange(PZ_ROWS.start + 1, PZ_ROWS.stop - 1)
    matrix[pace, 1] = np.sort(matrix[pace, 1])
    return GaitControlPoints.from_matrix(bounds.clip(matrix))


class CostTracker:
    """
    Objective over the free coordinates. Records every evaluation and the largest bound violation
    of the candidates it was handed.
    """
    def __init__(self, task, model, bounds, base_matrix):
        self.task = task
        self.model = model
        self.bounds = bounds
        self.free = bounds.free_mask
        self.base = base_matrix.ravel().copy()
        self.evaluations = 0
        self.max_violation = 0.0

    def embed(self, x):
        full = self.base.copy()
        full[self.free] = x
        return full.reshape(NUM_ROWS, 2)

    def __call__(self, x):
        matrix = self.embed(x)
        self.evaluations += 1
        self.max_violation = max(self.max_violation, self.bounds.violation(matrix))
        return cost(GaitControlPoints.from_matrix(self.bounds.clip(matrix)), self.task, self.model)


def _initial_simplex(x0, lower, upper, scale):
    """Axis-aligned simplex around x0 with edges pointing into the box."""
    width = upper - lower
    simplex = np.tile(x0, (x0.size + 1, 1))
    for i in range(x0.size):
        step = scale * width[i]
        simplex[i + 1, i] = x0[i] + step if x0[i] + step <= upper[i] else x0[i] - step
    return np.clip(simplex, lower, upper)


def run_start(start_points, task, model, bounds, options):
    """
    One bounded Nelder-Mead search from a feasible start.

    Returns:
        (best GaitControlPoints, best cost, evaluations, max bound violation)
    """
    tracker = CostTracker(task, model, bounds, start_points.as_matrix())
    free = bounds.free_mask
    lower = bounds.lower.ravel()[free]
    upper = bounds.upper.ravel()[free]
    x0 = start_points.to_vector()[free]
    result = minimize(tracker, x0, method="Nelder-Mead", bounds=Bounds(lower, upper),
                      options={"maxfev": options.max_evaluations,
                               "maxiter": options.max_evaluations,
                               "xatol": options.step_tolerance,
                               "fatol": options.tolerance,
                               "adaptive": True,
                               "initial_simplex": _initial_simplex(x0, lower, upper, options.simplex_scale)})
    best = GaitControlPoints.from_matrix(bounds.clip(tracker.embed(result.x)))
    logger.debug("start finished after %d evaluations: %s", tracker.evaluations, result.message)
    return best, float(result.fun), tracker.evaluations, tracker.max_violation


def find_initial_gait(task, model, bounds, options, rs=None):
    """
    First feasible gait among the deterministic start, its r2 variants and seeded random draws.

    Raises:
        InitializationError: nothing feasible within options.init_attempts draws
    """
    candidates = [initial_control_points(task, bounds)]
    candidates += [initial_control_points(task, bounds, r2=r2) for r2 in (0.25, 0.75, 0.0, 1.0)]
    for candidate in candidates:
        value = cost(candidate, task, model)
        if np.isfinite(value):
            return candidate, value
    if rs is None:
        rs = np.random.default_rng(options.seed)
    for _ in range(options.init_attempts):
        candidate = random_control_points(rs, bounds)
        value = cost(candidate, task, model)
        if np.isfinite(value):
            logger.warning("deterministic start infeasible for %s, using a random draw", task.name)
            return candidate, value
    raise InitializationError(f"initialization failed: no feasible gait for {task.name} "
                              f"after {options.init_attempts} random draws")


def _restart_points(task, model, bounds, options, rs):
    starts = []
    for restart in range(options.restarts):
        for _ in range(options.init_attempts):
            candidate = random_control_points(rs, bounds)
            if np.isfinite(cost(candidate, task, model)):
                starts.append(candidate)
                break
        else:
            logger.warning("restart %d skipped: no feasible random draw", restart + 1)
    return starts


def optimize(task, model, options=None, client=None):
    """
    Minimize the swing cost over the free control point coordinates.

    Args:
        task: GaitTask
        model: BodyModel
        options: OptimizerOptions
        client: optional dask.distributed Client running the starts in parallel; results are
            gathered in start order so the outcome does not depend on scheduling

    Returns:
        OptimizationResult

    Raises:
        InfeasibleTaskError, InitializationError
    """
    if options is None:
        options = OptimizerOptions()
    bounds = build_bounds(task)
    rs = np.random.default_rng(options.seed)
    initial, initial_cost = find_initial_gait(task, model, bounds, options, rs=rs)
    logger.info("%s: initial cost %.6g", task.name, initial_cost)
    starts = [initial] + _restart_points(task, model, bounds, options, rs)
    if client is None:
        outcomes = [run_start(start, task, model, bounds, options) for start in starts]
    else:
        futures = client.map(run_start, starts, task=task, model=model, bounds=bounds, options=options,
                             pure=False)
        outcomes = client.gather(futures)
    restart_costs = [outcome[1] for outcome in outcomes]
    best_index = int(np.argmin(restart_costs))
    best_points, best_cost = outcomes[best_index][0], outcomes[best_index][1]
    for s, outcome in enumerate(outcomes):
        logger.info("%s: start %d finished with cost %.6g", task.name, s, outcome[1])
    # the simplex can only return its best vertex, but keep the contract explicit
    if not best_cost <= initial_cost:
        best_points, best_cost = initial, initial_cost
    table = sample_gait(best_points, task, model)
    result = OptimizationResult(control_points=best_points,
                                cost=best_cost,
                                initial_cost=initial_cost,
                                evaluations=int(sum(outcome[2] for outcome in outcomes)),
                                restart_costs=restart_costs,
                                max_bound_violation=max(outcome[3] for outcome in outcomes),
                                trajectory=table,
                                cost_terms=swing_cost_terms(table, task))
    logger.info("%s: best cost %.6g after %d evaluations", task.name, best_cost, result.evaluations)
    return result


def penalty_sweep(task, model, weights, options=None, client=None):
    """
    Optimize the task at each foot speed penalty weight, then give every weight the best gait found
    by any of the searches under that weight's cost. Torque term and peak speed do not depend on
    the weight, so picking from the pooled gaits makes the peak foot speed non-increasing in the
    weight.

    Args:
        task: GaitTask; its own penalty_weight is ignored
        model: BodyModel
        weights: penalty weights, any order
        options: OptimizerOptions used for every search
        client: optional dask.distributed Client passed on to optimize

    Returns:
        pandas DataFrame with one row per weight in increasing order and columns penalty_weight,
        cost, torque_term, peak_foot_speed, search_cost and source_weight (the weight whose search
        found the selected gait)
    """
    weights = sorted(float(w) for w in weights)
    if not weights:
        raise ValueError("penalty_sweep needs at least one weight")
    if weights[0] < 0:
        raise ValueError(f"penalty weights must be non-negative, got {weights[0]}")
    pool = []
    for weight in weights:
        result = optimize(replace(task, penalty_weight=weight), model, options, client=client)
        pool.append((result.cost_terms["torque_term"], result.cost_terms["peak_foot_speed"], result.cost))
    torque = np.array([p[0] for p in pool])
    speed = np.array([p[1] for p in pool])
    rows = []
    for weight, (_, _, search_cost) in zip(weights, pool):
        pooled = torque + weight * speed
        best = int(np.argmin(pooled))
        rows.append({"task": task.name,
                     "penalty_weight": weight,
                     "cost": float(pooled[best]),
                     "torque_term": float(torque[best]),
                     "peak_foot_speed": float(speed[best]),
                     "search_cost": search_cost,
                     "source_weight": weights[best]})
        logger.info("%s: v_p=%g peak foot speed %.4g m/s", task.name, weight, speed[best])
    return pd.DataFrame(rows)


def select_penalty_weight(sweep, reference_peak_speed, ratio=1.5):
    """
    Smallest penalty weight of a sweep whose peak foot speed stays at or below ratio times the
    reference gait's peak foot speed.

    Returns:
        the weight, or None when no weight of the sweep qualifies
    """
    limit = ratio * reference_peak_speed
    passing = sweep.loc[sweep["peak_foot_speed"] <= limit, "penalty_weight"]
    return None if passing.empty else float(passing.min())
