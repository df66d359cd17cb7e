"""Finite-size scaling by cost-function minimization.

The quality of a scaling collapse of observable values y(L, g) is scored
without ever modelling the scaling function itself: transform each point to
an ordinate X, sort all points by non-decreasing scaling key

    k = L * sign(g - g_c) * |g - g_c|^nu,

and measure the excess total variation of the ordered sequence,

    C = sum_j |X_{j+1} - X_j| / (max X - min X) - 1.

A perfect collapse traces a single monotone curve, so consecutive
differences telescope and C = 0; scatter off a common curve makes C > 0.
Ties in the key are broken lexicographically by (L, g).  Minimizing C over
(g_c, nu) and the ansatz amplitude exponent yields the critical point and
scaling exponents.  Because the sort permutation changes discretely with the
parameters, the landscape is only piecewise smooth; minimization therefore
runs an exhaustive coarse grid scan first and polishes the best cells with a
bounded Nelder-Mead simplex.

Four ansatz ordinates are supported:

    entropy-1:  X = S / L^gamma1
    entropy-2:  X = S - (a ln L + b), with (a, b) from a prior critical fit
    purity-1:   X = m / (1 - L^(-gamma2)),      m = mixedness 1 - P
    purity-2:   X = m / (1 - 1/(c1 ln L))
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import minimize

DEFAULT_BOUNDS = {
    "g_c": (1.0, 2.5),
    "nu": (0.5, 3.0),
    "gamma1": (0.0, 1.0),
    "gamma2": (0.0, 2.0),
    "c1": (0.1, 5.0),
}

GRID_POINTS = 20
REFINE_TOP = 5


class CollapseError(ValueError):
    """Degenerate or malformed input to the scaling analysis."""


class InsufficientDataError(ValueError):
    """Too few system sizes or grid points for the requested fit."""


@dataclass(frozen=True)
class DataPoint:
    """One (L, g) cell of a sweep table."""

    L: int
    g: float
    y: float
    y_err: float | None = None


@dataclass(frozen=True)
class Ansatz:
    """A scaling ordinate transform plus the parameters it introduces."""

    tag: str
    param_names: tuple
    crit_fit: tuple | None = None  # critical-entropy model parameters
    crit_model: str = "log"        # "log": a ln L + b;  "power": a L^b

    def critical_shift(self, L: np.ndarray) -> np.ndarray:
        a, b = self.crit_fit
        if self.crit_model == "log":
            return a * np.log(L) + b
        if self.crit_model == "power":
            return a * L ** b
        raise CollapseError(f"unknown critical-entropy model {self.crit_model!r}")

    def ordinates(self, y: np.ndarray, L: np.ndarray, shape_param) -> np.ndarray:
        """Scaled ordinates; ``shape_param`` may be an array for batched grids."""
        if self.tag == "entropy-1":
            return y / L ** shape_param
        if self.tag == "entropy-2":
            return y - self.critical_shift(L) + 0.0 * shape_param
        if self.tag == "purity-1":
            return y / (1.0 - L ** (-shape_param))
        if self.tag == "purity-2":
            return y / (1.0 - 1.0 / (shape_param * np.log(L)))
        raise CollapseError(f"unknown ansatz tag {self.tag!r}")


def make_ansatz(tag: str, crit_fit=None, crit_model: str = "log") -> Ansatz:
    """Construct one of the four registered ansatz transforms by tag."""
    if tag == "entropy-1":
        return Ansatz(tag, ("g_c", "nu", "gamma1"))
    if tag == "entropy-2":
        if crit_fit is None:
            raise CollapseError("the shifted-entropy ansatz needs a prior critical-entropy fit")
        if crit_model not in ("log", "power"):
            raise CollapseError(f"unknown critical-entropy model {crit_model!r}")
        return Ansatz(tag, ("g_c", "nu"), crit_fit=(float(crit_fit[0]), float(crit_fit[1])),
                      crit_model=crit_model)
    if tag == "purity-1":
        return Ansatz(tag, ("g_c", "nu", "gamma2"))
    if tag == "purity-2":
        return Ansatz(tag, ("g_c", "nu", "c1"))
    raise CollapseError(f"unknown ansatz tag {tag!r}; expected entropy-1/2 or purity-1/2")


@dataclass
class CollapseFit:
    """Best parameters and minimized cost for one ansatz on one data set."""

    ansatz: str
    params: dict
    cost: float
    diagnostics: dict = field(default_factory=dict)
    param_errors: dict | None = None


def _point_arrays(points) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, str]:
    """Canonical (L, g)-sorted arrays plus a fingerprint of the data."""
    if len(points) < 3:
        raise CollapseError(f"need at least 3 data points, got {len(points)}")
    L = np.array([p.L for p in points], dtype=float)
    g = np.array([p.g for p in points], dtype=float)
    y = np.array([p.y for p in points], dtype=float)
    err = np.array([np.nan if p.y_err is None else p.y_err for p in points], dtype=float)
    if not (np.all(np.isfinite(L)) and np.all(np.isfinite(g)) and np.all(np.isfinite(y))):
        raise CollapseError("non-finite values in collapse input")
    if np.any(L < 2) or np.any(g < 0):
        raise CollapseError("invalid data point: need L >= 2 and g >= 0")
    order = np.lexsort((g, L))
    L, g, y, err = L[order], g[order], y[order], err[order]
    key = hashlib.sha1(np.ascontiguousarray(np.stack([L, g, y])).tobytes()).hexdigest()[:12]
    return L, g, y, err, key


def _params_vector(ansatz: Ansatz, params) -> np.ndarray:
    if isinstance(params, dict):
        try:
            return np.array([float(params[name]) for name in ansatz.param_names])
        except KeyError as exc:
            raise CollapseError(f"missing ansatz parameter {exc}") from None
    vec = np.asarray(params, dtype=float)
    if vec.shape != (len(ansatz.param_names),):
        raise CollapseError(f"expected parameters {ansatz.param_names}, got shape {vec.shape}")
    return vec


def _cost_from_arrays(L, g, y, ansatz: Ansatz, vec) -> float:
    g_c, nu = vec[0], vec[1]
    shape = vec[2] if len(vec) > 2 else 0.0
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        X = ansatz.ordinates(y, L, shape)
        dg = g - g_c
        key = L * np.sign(dg) * np.abs(dg) ** nu
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(key))):
        raise CollapseError("ordinate transform produced non-finite values")
    order = np.argsort(key, kind="stable")  # input pre-sorted by (L, g): stable sort = tie-break
    Xs = X[order]
    span = Xs.max() - Xs.min()
    if span <= 0.0:
        raise CollapseError("degenerate data: all scaled ordinates identical")
    return float(np.abs(np.diff(Xs)).sum() / span - 1.0)


def cost_function(points, ansatz: Ansatz, params) -> float:
    """Normalized total-variation excess of the sorted scaled data (>= 0)."""
    L, g, y, _, _ = _point_arrays(points)
    return _cost_from_arrays(L, g, y, ansatz, _params_vector(ansatz, params))


def _cost_grid(L, g, y, ansatz: Ansatz, thetas: np.ndarray) -> np.ndarray:
    """Vectorized cost over an (M, d) stack of parameter vectors."""
    g_c = thetas[:, 0][:, None]
    nu = thetas[:, 1][:, None]
    shape = thetas[:, 2][:, None] if thetas.shape[1] > 2 else np.zeros((len(thetas), 1))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        X = ansatz.ordinates(y[None, :], L[None, :], shape)
        dg = g[None, :] - g_c
        key = L[None, :] * np.sign(dg) * np.abs(dg) ** nu
        X = np.broadcast_to(X, key.shape)
        order = np.argsort(key, axis=1, kind="stable")
        Xs = np.take_along_axis(X, order, axis=1)
        tv = np.abs(np.diff(Xs, axis=1)).sum(axis=1)
        span = Xs.max(axis=1) - Xs.min(axis=1)
        cost = tv / span - 1.0
    bad = ~np.isfinite(cost) | ~np.all(np.isfinite(X), axis=1) | ~np.all(np.isfinite(key), axis=1) | (span <= 0)
    cost[bad] = np.inf
    return cost


def _grid_then_simplex(f_scalar, f_batch, bounds_list, grid_points, refine_top):
    """Coarse grid scan, then bounded Nelder-Mead from the best cells.

    Returns (best vector, best value, diagnostics).  Deterministic given the
    inputs: grid order and simplex starts are fixed.
    """
    axes = [np.linspace(lo, hi, grid_points) for lo, hi in bounds_list]
    mesh = np.meshgrid(*axes, indexing="ij")
    thetas = np.stack([m.ravel() for m in mesh], axis=1)
    costs = f_batch(thetas)
    best_order = np.argsort(costs, kind="stable")
    grid_best_vec = thetas[best_order[0]]
    grid_best = float(costs[best_order[0]])
    if not np.isfinite(grid_best):
        raise CollapseError("cost function is undefined everywhere on the search grid")

    best_vec, best_val = grid_best_vec, grid_best
    improved = False
    for idx in best_order[:refine_top]:
        if not np.isfinite(costs[idx]):
            continue
        res = minimize(
            f_scalar,
            thetas[idx],
            method="Nelder-Mead",
            bounds=bounds_list,
            options={"xatol": 1e-6, "fatol": 1e-12, "maxiter": 4000, "maxfev": 8000},
        )
        if np.isfinite(res.fun) and res.fun < best_val:
            best_vec, best_val = res.x, float(res.fun)
            improved = True
    diagnostics = {
        "grid_best_cost": grid_best,
        "grid_best_params": [float(v) for v in grid_best_vec],
        "grid_points_per_axis": grid_points,
        "restarts": refine_top,
        "improved_over_grid": improved,
    }
    return np.asarray(best_vec, dtype=float), best_val, diagnostics


def minimize_cost(points, ansatz: Ansatz, bounds=None, grid_points: int = GRID_POINTS,
                  refine_top: int = REFINE_TOP) -> CollapseFit:
    """Minimize the collapse cost over the ansatz parameter box."""
    L, g, y, _, data_key = _point_arrays(points)
    box = dict(DEFAULT_BOUNDS)
    if bounds:
        box.update(bounds)
    bounds_list = [tuple(map(float, box[name])) for name in ansatz.param_names]

    def f_scalar(vec):
        try:
            return _cost_from_arrays(L, g, y, ansatz, vec)
        except CollapseError:
            return np.inf

    vec, val, diagnostics = _grid_then_simplex(
        f_scalar, lambda thetas: _cost_grid(L, g, y, ansatz, thetas), bounds_list, grid_points, refine_top
    )
    diagnostics.update({"n_points": len(points), "data_key": data_key})
    params = {name: float(v) for name, v in zip(ansatz.param_names, vec)}
    return CollapseFit(ansatz=ansatz.tag, params=params, cost=val, diagnostics=diagnostics)


def compare_ansatze(fit1: CollapseFit, fit2: CollapseFit) -> float:
    """Cost difference C1 - C2; positive means the second ansatz collapses better."""
    k1 = fit1.diagnostics.get("data_key")
    k2 = fit2.diagnostics.get("data_key")
    if k1 is not None and k2 is not None and k1 != k2:
        raise ValueError("cost comparison requires fits on the same underlying data")
    return float(fit1.cost - fit2.cost)


def bootstrap_param_errors(points, ansatz: Ansatz, bounds=None, n_boot: int = 200, seed: int = 0,
                           grid_points: int = GRID_POINTS, refine_top: int = REFINE_TOP) -> dict:
    """Symmetric parameter error bars from a parametric bootstrap.

    Each resample perturbs every cell mean by a Gaussian draw of its standard
    error and re-runs the full minimization.  Requires y_err on every point.
    """
    if any(p.y_err is None for p in points):
        raise CollapseError("bootstrap requires a standard error on every data point")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, 0xB007))))
    samples = {name: [] for name in ansatz.param_names}
    for _ in range(n_boot):
        noisy = [
            DataPoint(p.L, p.g, p.y + p.y_err * rng.standard_normal(), p.y_err) for p in points
        ]
        fit = minimize_cost(noisy, ansatz, bounds=bounds, grid_points=grid_points, refine_top=refine_top)
        for name in ansatz.param_names:
            samples[name].append(fit.params[name])
    return {name: float(np.std(vals, ddof=1)) for name, vals in samples.items()}


@dataclass
class PeakFit:
    """Per-size fluctuation-peak locations and their 1/L extrapolation."""

    per_size: dict
    excluded: list
    g_inf: float
    slope: float


def _refine_peak(gs: np.ndarray, ys: np.ndarray) -> float | None:
    """Quadratic vertex through the grid maximum and its neighbours.

    Returns None when the maximum sits on the grid boundary (unbracketed).
    """
    i = int(np.argmax(ys))
    if i == 0 or i == len(ys) - 1:
        return None
    a, b, _ = np.polyfit(gs[i - 1 : i + 2], ys[i - 1 : i + 2], 2)
    if a >= 0:  # flat or non-concave triple: keep the grid point
        return float(gs[i])
    vertex = -b / (2.0 * a)
    return float(np.clip(vertex, gs[i - 1], gs[i + 1]))


def delta_s_peaks(points) -> PeakFit:
    """Locate the entropy-fluctuation maximum per size and extrapolate in 1/L.

    ``points`` carry y = the across-trajectory standard deviation of the
    windowed entropy.  Sizes whose maximum is unbracketed by the grid are
    excluded from the g(L) = g_inf + c/L least-squares fit.
    """
    by_size: dict = {}
    for p in points:
        by_size.setdefault(int(p.L), []).append(p)
    per_size = {}
    excluded = []
    for L, pts in sorted(by_size.items()):
        pts.sort(key=lambda p: p.g)
        if len(pts) < 3:
            excluded.append(L)
            continue
        peak = _refine_peak(np.array([p.g for p in pts]), np.array([p.y for p in pts]))
        if peak is None:
            excluded.append(L)
        else:
            per_size[L] = peak
    if len(per_size) < 2:
        raise InsufficientDataError(
            f"need interior fluctuation maxima for at least 2 sizes, have {len(per_size)}"
        )
    sizes = np.array(sorted(per_size))
    gc = np.array([per_size[L] for L in sizes])
    slope, g_inf = np.polyfit(1.0 / sizes, gc, 1)
    return PeakFit(per_size=per_size, excluded=excluded, g_inf=float(g_inf), slope=float(slope))


@dataclass
class CriticalEntropyFit:
    """Log and power-law fits of the critical entropy against system size."""

    log_slope: float    # a in  a ln L + b
    log_offset: float   # b
    log_rms: float
    power_amp: float    # A in  A L^p
    power_exp: float    # p
    power_rms: float

    @property
    def crit_fit(self) -> tuple:
        return (self.log_slope, self.log_offset)


def critical_entropy_fit(sizes, values) -> CriticalEntropyFit:
    """Fit critical-point entropies to a ln L + b and to A L^p, with residuals."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    if sizes.size < 3:
        raise InsufficientDataError(f"need at least 3 system sizes, got {sizes.size}")
    if np.any(values <= 0):
        raise CollapseError("critical entropies must be positive for the power-law fit")
    lnL = np.log(sizes)
    a, b = np.polyfit(lnL, values, 1)
    log_rms = float(np.sqrt(np.mean((a * lnL + b - values) ** 2)))
    p, lnA = np.polyfit(lnL, np.log(values), 1)
    A = float(np.exp(lnA))
    power_rms = float(np.sqrt(np.mean((A * sizes ** p - values) ** 2)))
    return CriticalEntropyFit(
        log_slope=float(a), log_offset=float(b), log_rms=log_rms,
        power_amp=A, power_exp=float(p), power_rms=power_rms,
    )


@dataclass
class PhaseDiagramFit:
    """Parameters of the critical-line model g_c(V) = A exp(-B V^C)."""

    amplitude: float
    rate: float
    exponent: float
    residual_rms: float
    converged: bool


PHASE_BOUNDS = {"amplitude": (0.5, 5.0), "rate": (0.01, 1.5), "exponent": (0.05, 1.5)}


def phase_diagram_fit(V, g_c, bounds=None, grid_points: int = GRID_POINTS,
                      refine_top: int = REFINE_TOP) -> PhaseDiagramFit:
    """Nonlinear least squares for the critical line, grid scan plus simplex."""
    V = np.asarray(V, dtype=float)
    g_c = np.asarray(g_c, dtype=float)
    if V.size < 4:
        raise InsufficientDataError(f"need at least 4 (V, g_c) pairs, got {V.size}")
    if np.any(V <= 0):
        raise CollapseError("interaction strengths must be positive")
    box = dict(PHASE_BOUNDS)
    if bounds:
        box.update(bounds)
    bounds_list = [tuple(map(float, box[k])) for k in ("amplitude", "rate", "exponent")]

    def model(theta):
        return theta[0] * np.exp(-theta[1] * V ** theta[2])

    def f_scalar(theta):
        r = model(theta) - g_c
        return float(r @ r)

    def f_batch(thetas):
        pred = thetas[:, 0][:, None] * np.exp(-thetas[:, 1][:, None] * V[None, :] ** thetas[:, 2][:, None])
        return np.sum((pred - g_c[None, :]) ** 2, axis=1)

    vec, val, diagnostics = _grid_then_simplex(f_scalar, f_batch, bounds_list, grid_points, refine_top)
    return PhaseDiagramFit(
        amplitude=float(vec[0]),
        rate=float(vec[1]),
        exponent=float(vec[2]),
        residual_rms=float(np.sqrt(val / V.size)),
        converged=bool(diagnostics["improved_over_grid"]),
    )


def collapsed_coordinates(points, ansatz: Ansatz, params) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(scaling key, scaled ordinate, L) triples sorted by key, ready to plot."""
    L, g, y, _, _ = _point_arrays(points)
    vec = _params_vector(ansatz, params)
    shape = vec[2] if len(vec) > 2 else 0.0
    X = ansatz.ordinates(y, L, shape)
    dg = g - vec[0]
    key = L * np.sign(dg) * np.abs(dg) ** vec[1]
    order = np.argsort(key, kind="stable")
    return key[order], X[order], L[order].astype(int)


SWEEP_TABLE_COLUMNS = ("L", "g", "S_mean", "S_std", "mixedness_mean", "mixedness_std", "n_traj")


def load_sweep_table(paths) -> list[dict]:
    """Read one or more sweep tables; rows keyed by the fixed column names."""
    rows = []
    for path in [paths] if isinstance(paths, (str, Path)) else list(paths):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            missing = set(SWEEP_TABLE_COLUMNS) - set(reader.fieldnames or ())
            if missing:
                raise CollapseError(f"{path}: missing columns {sorted(missing)}")
            for rec in reader:
                rows.append(
                    {
                        "L": int(rec["L"]),
                        "g": float(rec["g"]),
                        "S_mean": float(rec["S_mean"]),
                        "S_std": float(rec["S_std"]),
                        "mixedness_mean": float(rec["mixedness_mean"]),
                        "mixedness_std": float(rec["mixedness_std"]),
                        "n_traj": int(rec["n_traj"]),
                    }
                )
    seen = set()
    for r in rows:
        cell = (r["L"], r["g"])
        if cell in seen:
            raise CollapseError(f"duplicate (L, g) cell {cell} across input tables")
        seen.add(cell)
    return rows


def table_points(rows, diagnostic: str) -> list[DataPoint]:
    """Sweep-table rows to collapse points: cell means with standard errors."""
    if diagnostic == "entropy":
        mean_col, std_col = "S_mean", "S_std"
    elif diagnostic == "purity":
        mean_col, std_col = "mixedness_mean", "mixedness_std"
    else:
        raise CollapseError(f"unknown diagnostic {diagnostic!r}; expected 'entropy' or 'purity'")
    return [
        DataPoint(r["L"], r["g"], r[mean_col], r[std_col] / np.sqrt(r["n_traj"]))
        for r in rows
    ]


def fluctuation_points(rows) -> list[DataPoint]:
    """Sweep-table rows to peak-detection points: y = std of the windowed entropy."""
    return [DataPoint(r["L"], r["g"], r["S_std"]) for r in rows]


def entropy_at_peaks(rows, per_size: dict) -> tuple[np.ndarray, np.ndarray]:
    """Interpolate the mean entropy onto each size's peak location g(L)."""
    sizes = np.array(sorted(per_size))
    values = []
    for L in sizes:
        pts = sorted((r for r in rows if r["L"] == L), key=lambda r: r["g"])
        gs = np.array([r["g"] for r in pts])
        ys = np.array([r["S_mean"] for r in pts])
        values.append(float(np.interp(per_size[L], gs, ys)))
    return sizes, np.array(values)
