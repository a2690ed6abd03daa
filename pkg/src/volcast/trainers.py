"""Nine classical full-batch training algorithms with a shared stopping protocol.

The suite: Levenberg-Marquardt, dense BFGS, resilient backprop (the variant
that never backtracks weights), scaled conjugate gradient, three conjugate
gradient flavors (Fletcher-Reeves, Polak-Ribiere, Powell-Beale restarts),
one-step secant, and gradient descent with momentum and an adaptive rate.
Line-search methods share one strong-Wolfe bracket-and-zoom routine.

Every run is deterministic given the initial network and data: no algorithm
draws random numbers.  Datasets are expected pre-scaled to the network's
operating range.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from volcast import network as nn
from volcast.errors import NumericalDivergence

ALGORITHMS = (
    "LM",
    "BFGS",
    "RPROP",
    "SCG",
    "CG_FLETCHER_REEVES",
    "CG_POLAK_RIBIERE",
    "CG_POWELL_BEALE",
    "OSS",
    "GDX",
)

# stop reasons
MAX_EPOCHS = "MaxEpochs"
GOAL_MET = "GoalMet"
GRADIENT_FLOOR = "GradientFloor"
EARLY_STOP = "EarlyStop"
LINE_SEARCH_FAIL = "LineSearchFail"

_LS_DEFAULTS = {"ls_c1": 1e-4, "ls_c2": 0.5, "ls_max_evals": 25}

DEFAULT_HYPERPARAMETERS: dict[str, dict[str, float]] = {
    "GDX": {"learning_rate": 0.01, "momentum": 0.9, "lr_grow": 1.05, "lr_shrink": 0.7},
    "RPROP": {"delta0": 0.07, "grow": 1.2, "shrink": 0.5,
              "delta_min": 1e-6, "delta_max": 50.0},
    "LM": {"mu0": 1e-3, "mu_shrink": 0.1, "mu_grow": 10.0,
           "mu_floor": 1e-20, "mu_ceiling": 1e10},
    "SCG": {"sigma": 1e-4, "lambda0": 1e-6},
    "BFGS": dict(_LS_DEFAULTS, curvature_floor=1e-10),
    "OSS": dict(_LS_DEFAULTS, secant_floor=1e-12),
    "CG_FLETCHER_REEVES": dict(_LS_DEFAULTS),
    "CG_POLAK_RIBIERE": dict(_LS_DEFAULTS),
    "CG_POWELL_BEALE": dict(_LS_DEFAULTS, restart_threshold=0.2),
}

# hyperparameters allowed to be zero (everything else must be positive)
_MAY_BE_ZERO = {"momentum"}


@dataclass(frozen=True)
class TrainerSpec:
    """One named algorithm plus hyperparameter overrides."""

    algorithm: str
    hyperparameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")

    def resolved(self) -> dict[str, float]:
        defaults = DEFAULT_HYPERPARAMETERS[self.algorithm]
        unknown = set(self.hyperparameters) - set(defaults)
        if unknown:
            raise ValueError(f"unknown hyperparameters for {self.algorithm}: {sorted(unknown)}")
        merged = {**defaults, **self.hyperparameters}
        for name, value in merged.items():
            floor_ok = value >= 0.0 if name in _MAY_BE_ZERO else value > 0.0
            if not floor_ok:
                raise ValueError(f"{self.algorithm}.{name} must be "
                                 f"{'>= 0' if name in _MAY_BE_ZERO else '> 0'}, got {value}")
        return merged


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 1000
    goal: float = 1e-5
    patience: int = 6
    min_grad: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.max_epochs < 1:
            raise ValueError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 0:
            raise ValueError(f"patience must be >= 0, got {self.patience}")


@dataclass
class TrainRecord:
    epochs_run: int
    stop_reason: str
    train_loss_curve: list[float]
    validation_loss_curve: list[float]
    best_params: np.ndarray


class Problem:
    """Full-batch objective of one topology on one dataset."""

    def __init__(self, topology: nn.Topology, X, Y):
        self.topology = topology
        self.X = np.ascontiguousarray(X, dtype=np.float64)
        self.Y = np.ascontiguousarray(Y, dtype=np.float64)
        self.n_params = topology.n_params

    def loss(self, w) -> float:
        return nn.batch_loss(nn.unflatten(self.topology, w), self.X, self.Y)

    def loss_and_grad(self, w) -> tuple[float, np.ndarray]:
        return nn.loss_and_gradient(nn.unflatten(self.topology, w), self.X, self.Y)

    def residuals_and_jacobian(self, w) -> tuple[np.ndarray, np.ndarray]:
        net = nn.unflatten(self.topology, w)
        return nn.residuals(net, self.X, self.Y), nn.jacobian(net, self.X)


# --------------------------------------------------------------------------
# strong-Wolfe line search (shared by CG, BFGS, OSS)


def line_search(phi, phi0: float, dphi0: float, *, c1: float = 1e-4, c2: float = 0.5,
                max_evals: int = 25, alpha_init: float = 1.0):
    """Step length satisfying the strong Wolfe conditions along a descent ray.

    ``phi(alpha)`` must return ``(value, slope)`` of the one-dimensional
    restriction.  Brackets by doubling, then zooms with cubic interpolation.
    Returns the accepted alpha or None when the evaluation budget runs out;
    failures are never silently replaced by a fallback step.
    """
    if dphi0 >= 0:
        raise ValueError("line_search needs a descent direction (initial slope must be < 0)")
    evals = 0

    def ev(alpha):
        nonlocal evals
        evals += 1
        return phi(alpha)

    def budget():
        return max_evals - evals

    a_prev, f_prev, d_prev = 0.0, phi0, dphi0
    a = alpha_init
    while evals < max_evals:
        f, d = ev(a)
        if (f > phi0 + c1 * a * dphi0) or (a_prev > 0.0 and f >= f_prev):
            return _zoom(ev, budget, phi0, dphi0, a_prev, f_prev, d_prev, a, f, d, c1, c2)
        if abs(d) <= -c2 * dphi0:
            assert f <= phi0 + c1 * a * dphi0
            return a
        if d >= 0:
            return _zoom(ev, budget, phi0, dphi0, a, f, d, a_prev, f_prev, d_prev, c1, c2)
        a_prev, f_prev, d_prev = a, f, d
        a *= 2.0
    return None


def _zoom(ev, budget, phi0, dphi0, a_lo, f_lo, d_lo, a_hi, f_hi, d_hi, c1, c2):
    # invariant: a_lo has the lowest value seen that passes sufficient decrease,
    # and the interval [a_lo, a_hi] (in either order) brackets a Wolfe point
    while budget() > 0:
        lo, hi = (a_lo, a_hi) if a_lo < a_hi else (a_hi, a_lo)
        width = hi - lo
        if width <= 1e-14 * max(1.0, abs(a_lo)):
            break
        a = _cubic_min(a_lo, f_lo, d_lo, a_hi, f_hi, d_hi)
        margin = 0.1 * width
        if not math.isfinite(a) or a < lo + margin or a > hi - margin:
            a = 0.5 * (lo + hi)
        f, d = ev(a)
        if f > phi0 + c1 * a * dphi0 or f >= f_lo:
            a_hi, f_hi, d_hi = a, f, d
        else:
            if abs(d) <= -c2 * dphi0:
                assert f <= phi0 + c1 * a * dphi0
                return a
            if d * (a_hi - a_lo) >= 0:
                a_hi, f_hi, d_hi = a_lo, f_lo, d_lo
            a_lo, f_lo, d_lo = a, f, d
    return None


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the Hermite cubic through (a, fa, da), (b, fb, db)."""
    if a == b:
        return math.nan
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return math.nan
    d2 = math.copysign(math.sqrt(disc), b - a)
    denom = db - da + 2.0 * d2
    if denom == 0.0:
        return math.nan
    return b - (b - a) * (db + d2 - d1) / denom


# --------------------------------------------------------------------------
# per-algorithm epoch steps


class _Stepper:
    """Owns the current parameters, loss and gradient; one step() per epoch."""

    def __init__(self, problem: Problem, w0, hp: dict):
        self.problem = problem
        self.w = np.array(w0, dtype=np.float64, copy=True)
        self.hp = hp
        self.loss, self.grad = problem.loss_and_grad(self.w)

    def step(self):
        """Advance one epoch; return None or a stop-reason string."""
        raise NotImplementedError

    def _search(self, d, slope):
        """Run the shared line search along d; returns (alpha, f, g) or None."""
        cache = {}

        def phi(alpha):
            f, g = self.problem.loss_and_grad(self.w + alpha * d)
            cache["alpha"], cache["f"], cache["g"] = alpha, f, g
            return f, float(g @ d)

        alpha = line_search(phi, self.loss, float(slope),
                            c1=self.hp["ls_c1"], c2=self.hp["ls_c2"],
                            max_evals=int(self.hp["ls_max_evals"]))
        if alpha is None:
            return None
        if cache.get("alpha") == alpha:
            return alpha, cache["f"], cache["g"]
        f, g = self.problem.loss_and_grad(self.w + alpha * d)
        return alpha, f, g


class _GdxStepper(_Stepper):
    """Gradient descent with momentum and a multiplicative adaptive rate.

    A step that fails to decrease the loss is rolled back; the rate shrinks
    and the rejected momentum is dropped.  Successful steps grow the rate.
    """

    def __init__(self, problem, w0, hp):
        super().__init__(problem, w0, hp)
        self.lr = hp["learning_rate"]
        self.dw_prev = np.zeros_like(self.w)

    def step(self):
        dw = self.hp["momentum"] * self.dw_prev - self.lr * self.grad
        if not dw.any():
            return None  # zero update: fixed point
        w_try = self.w + dw
        f_try = self.problem.loss(w_try)
        if f_try < self.loss:
            self.w = w_try
            self.dw_prev = dw
            self.lr *= self.hp["lr_grow"]
            self.loss, self.grad = self.problem.loss_and_grad(self.w)
        else:
            self.lr *= self.hp["lr_shrink"]
            self.dw_prev = np.zeros_like(self.w)
        return None


class _RpropStepper(_Stepper):
    """Sign-based resilient backprop; step sizes adapt, magnitudes are ignored.

    On a gradient sign flip the per-parameter step shrinks and the stored
    gradient is zeroed, so the next epoch neither grows nor shrinks it; the
    weight move already made is never reverted.
    """

    def __init__(self, problem, w0, hp):
        super().__init__(problem, w0, hp)
        self.delta = np.full_like(self.w, hp["delta0"])
        self.g_prev = np.zeros_like(self.w)

    def step(self):
        g = self.grad
        prod = self.g_prev * g
        grow = prod > 0.0
        shrink = prod < 0.0
        self.delta[grow] = np.minimum(self.delta[grow] * self.hp["grow"], self.hp["delta_max"])
        self.delta[shrink] = np.maximum(self.delta[shrink] * self.hp["shrink"], self.hp["delta_min"])
        g_eff = np.where(shrink, 0.0, g)
        self.w = self.w - np.sign(g_eff) * self.delta
        self.g_prev = g_eff
        self.loss, self.grad = self.problem.loss_and_grad(self.w)
        return None


class _CgStepper(_Stepper):
    """Nonlinear conjugate gradient with a pluggable beta rule.

    Restarts along the steepest descent direction on the first epoch, every
    parameter-count epochs, whenever the computed direction fails to descend,
    and (for the Powell-Beale rule) when successive gradients stay too
    parallel.
    """

    def __init__(self, problem, w0, hp, beta_rule):
        super().__init__(problem, w0, hp)
        self.beta_rule = beta_rule
        self.d = None
        self.g_prev = None
        self.period = problem.n_params
        self.since_restart = 0

    def _direction(self, g):
        if self.d is None or self.since_restart >= self.period:
            return None
        gg_prev = float(self.g_prev @ self.g_prev)
        if gg_prev <= 0.0:
            return None
        if self.beta_rule == "FletcherReeves":
            beta = float(g @ g) / gg_prev
        else:  # PolakRibiere and PowellBeale
            beta = max(0.0, float(g @ (g - self.g_prev)) / gg_prev)
        if (self.beta_rule == "PowellBeale"
                and abs(float(g @ self.g_prev)) >= self.hp["restart_threshold"] * float(g @ g)):
            return None
        return -g + beta * self.d

    def step(self):
        g = self.grad
        d = self._direction(g)
        if d is None or float(d @ g) >= 0.0:
            d = -g
            self.since_restart = 0
        slope = float(d @ g)
        if slope >= 0.0:
            return None  # zero gradient
        res = self._search(d, slope)
        if res is None:
            return LINE_SEARCH_FAIL
        alpha, f, g_new = res
        self.w = self.w + alpha * d
        self.d = d
        self.g_prev = g
        self.loss, self.grad = f, g_new
        self.since_restart += 1
        return None


class _ScgStepper(_Stepper):
    """Scaled conjugate gradient: trust-region-like CG without a line search.

    Curvature along the direction comes from a finite difference of
    gradients; a scalar damping term keeps the quadratic model positive
    definite.  Steps are accepted only when the comparison parameter (actual
    vs. predicted decrease) is positive; the damping doubles when the model
    fits poorly and halves when it fits well.
    """

    def __init__(self, problem, w0, hp):
        super().__init__(problem, w0, hp)
        self.lam = hp["lambda0"]
        self.d = -self.grad
        self.kappa = None  # cached d'Hd estimate, valid while w and d are unchanged
        self.period = problem.n_params
        self.since_restart = 0

    def step(self):
        g = self.grad
        for _ in range(2):  # second pass only after a restart to -g
            d = self.d
            dd = float(d @ d)
            if dd <= 0.0:
                return None
            mu = -float(g @ d)
            if mu > 0.0:
                break
            self.d = -g
            self.kappa = None
            self.since_restart = 0
        else:
            return None
        if self.kappa is None:
            sig = self.hp["sigma"] / math.sqrt(dd)
            _, g_probe = self.problem.loss_and_grad(self.w + sig * d)
            self.kappa = float(d @ (g_probe - g)) / sig
        delta = self.kappa + self.lam * dd
        if delta <= 0.0:
            self.lam = 2.0 * (self.lam - self.kappa / dd)
            delta = -self.kappa + self.lam * dd
        alpha = mu / delta
        f_try = self.problem.loss(self.w + alpha * d)
        comparison = 2.0 * delta * (self.loss - f_try) / (mu * mu)
        if comparison > 0.0:
            self.w = self.w + alpha * d
            _, g_new = self.problem.loss_and_grad(self.w)
            self.since_restart += 1
            if self.since_restart >= self.period:
                self.d = -g_new
                self.since_restart = 0
            else:
                beta = (float(g_new @ g_new) - float(g_new @ g)) / mu
                self.d = -g_new + beta * d
            self.kappa = None
            self.loss, self.grad = f_try, g_new
        if comparison < 0.25:
            self.lam *= 2.0
        elif comparison > 0.75:
            self.lam *= 0.5
        return None


def oss_direction(s, y, g, floor: float = 1e-12):
    """One-step-secant direction from the latest step/gradient-change pair.

    Returns None (caller falls back to steepest descent) when the secant
    product is too small or the candidate fails to descend.
    """
    sy = float(s @ y)
    if sy <= floor:
        return None
    yy = float(y @ y)
    sg = float(s @ g)
    yg = float(y @ g)
    b = sg / sy
    a = -(1.0 + yy / sy) * b + yg / sy
    d = -g + a * s + b * y
    if float(d @ g) >= 0.0:
        return None
    return d


class _OssStepper(_Stepper):
    """One-step secant: memoryless quasi-Newton from the latest (s, y) pair."""

    def __init__(self, problem, w0, hp):
        super().__init__(problem, w0, hp)
        self.s = None
        self.y = None

    def step(self):
        g = self.grad
        d = None
        if self.s is not None:
            d = oss_direction(self.s, self.y, g, self.hp["secant_floor"])
        if d is None:
            d = -g
        slope = float(d @ g)
        if slope >= 0.0:
            return None
        res = self._search(d, slope)
        if res is None:
            return LINE_SEARCH_FAIL
        alpha, f, g_new = res
        self.s = alpha * d
        self.y = g_new - g
        self.w = self.w + self.s
        self.loss, self.grad = f, g_new
        return None


class _BfgsStepper(_Stepper):
    """Dense BFGS on the inverse Hessian approximation.

    The rank-two update is skipped when the curvature product is too small;
    the approximation resets to the identity if it ever stops producing
    descent directions.
    """

    def __init__(self, problem, w0, hp):
        super().__init__(problem, w0, hp)
        self.H = np.eye(len(self.w))

    def step(self):
        g = self.grad
        d = -(self.H @ g)
        slope = float(d @ g)
        if slope >= 0.0:
            self.H = np.eye(len(self.w))
            d = -g
            slope = float(d @ g)
            if slope >= 0.0:
                return None
        res = self._search(d, slope)
        if res is None:
            return LINE_SEARCH_FAIL
        alpha, f, g_new = res
        s = alpha * d
        y = g_new - g
        sy = float(s @ y)
        if sy > self.hp["curvature_floor"]:
            rho = 1.0 / sy
            Hy = self.H @ y
            self.H -= rho * (np.outer(s, Hy) + np.outer(Hy, s))
            self.H += (rho * rho * float(y @ Hy) + rho) * np.outer(s, s)
        self.w = self.w + s
        self.loss, self.grad = f, g_new
        return None


class _LmStepper(_Stepper):
    """Levenberg-Marquardt on the residual vector.

    Solves (J'J + mu I) delta = J'r once per epoch; an accepted step divides
    the damping by ten (with a floor) and a rejected one multiplies it by ten
    until the divergence ceiling trips.
    """

    def __init__(self, problem, w0, hp):
        super().__init__(problem, w0, hp)
        self.mu = hp["mu0"]
        self._normal_eqs = None  # (J'J, J'r) at the current w

    def step(self):
        if self._normal_eqs is None:
            r, J = self.problem.residuals_and_jacobian(self.w)
            self._normal_eqs = (J.T @ J, J.T @ r)
        JTJ, JTr = self._normal_eqs
        A = JTJ + self.mu * np.eye(len(self.w))
        try:
            delta = np.linalg.solve(A, JTr)
        except np.linalg.LinAlgError:
            delta = np.linalg.lstsq(A, JTr, rcond=None)[0]
        w_try = self.w - delta
        f_try = self.problem.loss(w_try)
        if f_try < self.loss:
            self.w = w_try
            self.mu = max(self.mu * self.hp["mu_shrink"], self.hp["mu_floor"])
            self._normal_eqs = None
            self.loss, self.grad = self.problem.loss_and_grad(self.w)
        else:
            self.mu *= self.hp["mu_grow"]
            if self.mu > self.hp["mu_ceiling"]:
                raise NumericalDivergence(
                    f"LM damping grew past {self.hp['mu_ceiling']:g} without progress")
        return None


def make_stepper(spec: TrainerSpec, problem: Problem, w0) -> _Stepper:
    hp = spec.resolved()
    algo = spec.algorithm
    if algo == "GDX":
        return _GdxStepper(problem, w0, hp)
    if algo == "RPROP":
        return _RpropStepper(problem, w0, hp)
    if algo == "SCG":
        return _ScgStepper(problem, w0, hp)
    if algo == "OSS":
        return _OssStepper(problem, w0, hp)
    if algo == "BFGS":
        return _BfgsStepper(problem, w0, hp)
    if algo == "LM":
        return _LmStepper(problem, w0, hp)
    rule = {"CG_FLETCHER_REEVES": "FletcherReeves",
            "CG_POLAK_RIBIERE": "PolakRibiere",
            "CG_POWELL_BEALE": "PowellBeale"}[algo]
    return _CgStepper(problem, w0, hp, rule)


# --------------------------------------------------------------------------
# training loop


def _as_xy(data):
    if data is None:
        return None
    if hasattr(data, "X") and hasattr(data, "Y"):
        return np.asarray(data.X, dtype=np.float64), np.asarray(data.Y, dtype=np.float64)
    X, Y = data
    return np.asarray(X, dtype=np.float64), np.asarray(Y, dtype=np.float64)


def train(net: nn.Network, spec: TrainerSpec, config: TrainConfig,
          train_data, validation_data=None) -> tuple[nn.Network, TrainRecord]:
    """Train full-batch until the first stopping criterion triggers.

    ``train_data`` and ``validation_data`` are FeatureDatasets or (X, Y)
    pairs, already scaled.  Returns a network carrying the parameters at the
    validation-loss minimum (the final parameters when there is no validation
    set) plus the per-epoch record.  Divergence raises NumericalDivergence;
    a failed line search is an ordinary stop reason.
    """
    X, Y = _as_xy(train_data)
    val = _as_xy(validation_data)
    if val is not None and val[0].shape[0] == 0:
        val = None
    problem = Problem(net.topology, X, Y)
    val_problem = Problem(net.topology, *val) if val is not None else None

    stepper = make_stepper(spec, problem, nn.flatten(net))
    train_curve: list[float] = []
    val_curve: list[float] = []
    best_val = math.inf
    best_params = None
    prev_val = None
    consecutive_rises = 0
    stop = None

    for _ in range(config.max_epochs):
        if stepper.loss <= config.goal:
            stop = GOAL_MET
        elif float(np.linalg.norm(stepper.grad)) <= config.min_grad:
            stop = GRADIENT_FLOOR

        signal = None
        if stop is None:
            signal = stepper.step()
            if not (math.isfinite(stepper.loss) and np.all(np.isfinite(stepper.w))):
                raise NumericalDivergence(
                    f"{spec.algorithm}: loss or parameters became non-finite "
                    f"at epoch {len(train_curve) + 1}")

        train_curve.append(stepper.loss)
        if val_problem is not None:
            vloss = val_problem.loss(stepper.w)
            val_curve.append(vloss)
            if vloss < best_val:
                best_val = vloss
                best_params = stepper.w.copy()
            if prev_val is not None and vloss > prev_val:
                consecutive_rises += 1
            else:
                consecutive_rises = 0
            prev_val = vloss
            if stop is None and signal is None and config.patience >= 1 \
                    and consecutive_rises >= config.patience:
                stop = EARLY_STOP

        if signal is not None and stop is None:
            stop = signal
        if stop is not None:
            break

    if stop is None:
        stop = MAX_EPOCHS
    final_params = best_params if best_params is not None else stepper.w.copy()
    trained = nn.unflatten(net.topology, final_params)
    trained.seed = net.seed
    record = TrainRecord(
        epochs_run=len(train_curve),
        stop_reason=stop,
        train_loss_curve=train_curve,
        validation_loss_curve=val_curve,
        best_params=final_params,
    )
    return trained, record


def export_curve_csv(record: TrainRecord, path) -> None:
    """Write the loss curves as ``epoch,train_loss,validation_loss``."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("epoch,train_loss,validation_loss\n")
        for i, train_loss in enumerate(record.train_loss_curve, start=1):
            if record.validation_loss_curve:
                fh.write(f"{i},{train_loss!r},{record.validation_loss_curve[i - 1]!r}\n")
            else:
                fh.write(f"{i},{train_loss!r},\n")
