"""First-order bilevel solvers for SIMP compliance minimization.

Four algorithms share one driver.  The bilevel ones advance the
displacement with a single damped low-level sweep per design update
(plain residual step, squared-system Jacobi sweep, or a Krylov
least-squares polynomial applied to the residual) and feed the *current*
inexact displacement into the design sensitivity.  The exact-inversion
baseline re-solves equilibrium every iteration instead.

Per iteration, with v the raw infill levels and C the density filter:
    v_phys = C(v),  activation a = v_phys^eta,  K = K(a)
    design ascent direction g = Cᵀ(eta·v_phys^(eta-1) ⊙ element energies)
    v ← project(v + alpha_k · g),  alpha_k = alpha0 · k^(-m)
Termination needs BOTH the design change ‖Δv‖∞ and the equilibrium
residual ‖Ku − f‖∞ under their tolerances.
"""
from __future__ import annotations

import queue
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.linalg

from .fea import (
    DensityField,
    GridModel,
    apply_stiffness,
    element_energies,
    estimate_rho_max,
    exact_solve,
    stiffness_diagonal,
)
from .filtering import FilterSpec, apply_filter, apply_filter_adjoint
from .problems import ProblemSpec, resolve
from .projection import SimplexBounds, project_simplex

ALGORITHMS = ("fbto", "pfbto_jacobi", "cpfbto_krylov", "pgd_exact")

_ALPHA0_DEFAULTS = {
    "fbto": 0.001,  # the plain variant diverges for alpha0 > 1e-2
    "pfbto_jacobi": 0.25,
    "cpfbto_krylov": 0.25,
    "pgd_exact": 0.25,
}

_EXACT_SOLVE_TOL = 1e-10


class DivergenceError(RuntimeError):
    """Raised when an iterate turns non-finite (step size too aggressive)."""


@dataclass
class SolverConfig:
    """Algorithm choice plus the step-size, subspace, and termination knobs."""

    algorithm: str = "cpfbto_krylov"
    alpha0: float | None = None  # None: per-algorithm default
    m: float = 0.75
    beta: float | None = None  # None: 1 for cpfbto, spectral estimate otherwise
    krylov_dim: int = 20
    eta: float | None = None  # None: take the problem's exponent
    max_iters: int = 50_000
    tol_dv: float = 1e-4
    tol_res: float = 1e-2
    snapshot_every: int = 0
    seed: int = 0
    mean_projection: bool = True

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {ALGORITHMS}, got {self.algorithm!r}")
        if self.alpha0 is not None and not self.alpha0 > 0:
            raise ValueError("alpha0 must be positive")
        if not 0.75 <= self.m < 1.0:
            raise ValueError(f"decay exponent m must lie in [0.75, 1), got {self.m}")
        if self.m == 0.75:
            warnings.warn(
                "decay exponent m = 0.75 sits on the boundary of the convergent range",
                UserWarning,
                stacklevel=2,
            )
        if self.beta is not None and not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.krylov_dim < 1:
            raise ValueError("krylov_dim must be at least 1")
        if self.eta is not None and self.eta < 1:
            raise ValueError("eta must be at least 1")
        if self.max_iters < 0:
            raise ValueError("max_iters must be nonnegative")
        if self.tol_dv <= 0 or self.tol_res <= 0:
            raise ValueError("tolerances must be positive")

    def resolved_alpha0(self) -> float:
        return self.alpha0 if self.alpha0 is not None else _ALPHA0_DEFAULTS[self.algorithm]

    def step_size(self, k: int, alpha0: float | None = None) -> float:
        a0 = self.resolved_alpha0() if alpha0 is None else alpha0
        return a0 * float(k) ** (-self.m)


@dataclass
class SolverState:
    """One consistent iterate plus its cached diagnostics."""

    iter: int
    u: np.ndarray
    v: DensityField
    v_phys: np.ndarray
    activation: np.ndarray
    residual_inf: float
    compliance: float
    volume: float
    last_dv_inf: float


@dataclass
class ConvergenceRecord:
    """Columnar per-iteration history (iteration numbers strictly increasing)."""

    iters: list = field(default_factory=list)
    elapsed_s: list = field(default_factory=list)
    compliance: list = field(default_factory=list)
    residual_inf: list = field(default_factory=list)
    dv_inf: list = field(default_factory=list)
    volume: list = field(default_factory=list)

    def append(self, k, elapsed, compliance, residual, dv, volume):
        if self.iters and k <= self.iters[-1]:
            raise ValueError("iteration numbers must be strictly increasing")
        self.iters.append(k)
        self.elapsed_s.append(elapsed)
        self.compliance.append(compliance)
        self.residual_inf.append(residual)
        self.dv_inf.append(dv)
        self.volume.append(volume)

    def rows(self):
        return zip(self.iters, self.elapsed_s, self.compliance,
                   self.residual_inf, self.dv_inf, self.volume)

    def __len__(self):
        return len(self.iters)


@dataclass
class RunResult:
    state: SolverState
    record: ConvergenceRecord
    reason: str  # "converged" | "budget" | "stopped"


class RunControl:
    """Thread-safe control channel; the driver applies messages only at
    iteration boundaries, so every observed state is a consistent iterate."""

    PAUSE, RESUME, STOP = "pause", "resume", "stop"

    def __init__(self):
        self._queue = queue.Queue()

    def send(self, command) -> None:
        """Accepts "pause"/"resume"/"stop" or {"alpha0": ..., "snapshot_every": ...}."""
        self._queue.put(command)

    def drain(self) -> list:
        out = []
        while True:
            try:
                out.append(self._queue.get_nowait())
            except queue.Empty:
                return out

    def wait(self):
        return self._queue.get()


def sensitivity(
    grid: GridModel, v_phys: np.ndarray, u: np.ndarray, eta: float, filter_spec: FilterSpec
) -> np.ndarray:
    """Design ascent direction: the filter adjoint chained through the
    power-law activation, Cᵀ(eta·v_phys^(eta-1) ⊙ ½ u_eᵀ ke u_e).

    Equals minus the compliance gradient when u solves equilibrium; every
    entry is nonnegative for eta >= 1."""
    s = eta * v_phys ** (eta - 1.0) * element_energies(grid, u)
    return apply_filter_adjoint(s, grid.nx, grid.ny, filter_spec)


def mean_project(g: np.ndarray) -> np.ndarray:
    """Remove the mean so the step preserves total volume: g − 𝟙𝟙ᵀg/E."""
    if g.size < 1:
        raise ValueError("mean_project needs at least one entry")
    return g - g.mean()


_geqrf, _ormqr, _trtrs = scipy.linalg.get_lapack_funcs(
    ("geqrf", "ormqr", "trtrs"), (np.empty(0, dtype=np.float64),)
)


def _householder_lstsq(basis: np.ndarray, b: np.ndarray) -> np.ndarray:
    """min_c ‖b − basis·c‖ by Householder QR; columns past the first tiny R
    diagonal are dropped (Krylov saturation makes every later power dependent)."""
    n_col = basis.shape[1]
    qr, tau, _, info = _geqrf(basis, overwrite_a=True)
    cq, _, info = _ormqr("L", "T", qr, tau, np.asfortranarray(b.reshape(-1, 1)),
                         lwork=max(64, 8 * n_col))
    diag = np.abs(np.diag(qr[:n_col, :n_col]))
    small = diag <= 1e-13 * diag[0]
    rank = int(np.argmax(small)) if small.any() else n_col
    coeff = np.zeros(n_col)
    if rank:
        sol, info = _trtrs(qr[:rank, :rank], cq[:rank])
        coeff[:rank] = sol.ravel()
    return coeff


def krylov_apply(
    grid: GridModel, a: np.ndarray, b: np.ndarray, dim: int, threads: int = 1
) -> np.ndarray:
    """Least-squares polynomial preconditioner applied to b.

    Builds the Krylov powers Kb..K^(dim+1)b (norm-scaled so the basis stays
    well conditioned), solves min_c ‖b − Σ c_(i-1) K^i b‖ by Householder QR,
    and returns Σ c_i K^i b for i = 0..dim.  The scaling makes K·result equal
    the fitted combination exactly, so the new residual can never exceed that
    of any single scaled gradient step.
    """
    if dim < 1:
        raise ValueError("Krylov dimension must be at least 1")
    norm_b = np.linalg.norm(b)
    if norm_b == 0.0:
        return np.zeros_like(b)
    n = b.size
    n_powers = min(dim + 1, n)  # a taller basis cannot add rank
    powers = np.empty((n, n_powers + 1), order="F")
    powers[:, 0] = b / norm_b
    growth = np.empty(n_powers)
    count = 0
    for i in range(n_powers):
        t = apply_stiffness(grid, a, powers[:, i], threads)
        m = np.linalg.norm(t)
        if m == 0.0:
            break
        powers[:, i + 1] = t / m
        growth[i] = m
        count += 1
    if count == 0:
        return np.zeros_like(b)
    coeff = _householder_lstsq(powers[:, 1:count + 1].copy(order="F"), b)
    return powers[:, :count] @ (coeff / growth[:count])


def low_level_step(
    grid: GridModel,
    a: np.ndarray,
    u: np.ndarray,
    config: SolverConfig,
    beta: float,
    residual: np.ndarray | None = None,
    threads: int = 1,
) -> np.ndarray:
    """One damped update of the displacement for the configured algorithm.

    Exact displacements are fixed points: the update is a multiple of the
    residual (possibly preconditioned), which is then zero."""
    r = apply_stiffness(grid, a, u, threads) - grid.load if residual is None else residual
    algo = config.algorithm
    if algo == "fbto":
        return u - beta * r
    if algo == "pfbto_jacobi":
        # squared-system form K M⁻² K with M = diag(K); two Jacobi divisions
        diag = stiffness_diagonal(grid, a)
        return u - beta * apply_stiffness(grid, a, r / diag**2, threads)
    if algo == "cpfbto_krylov":
        return u - beta * krylov_apply(grid, a, r, config.krylov_dim, threads)
    raise ValueError(f"low_level_step does not apply to algorithm {algo!r}")


def high_level_step(
    v: np.ndarray,
    g: np.ndarray,
    alpha_k: float,
    bounds: SimplexBounds,
    active: np.ndarray | None = None,
    mean_projection: bool = True,
) -> np.ndarray:
    """Projected design ascent v ← P_X(v + alpha_k · g), optionally with the
    volume-preserving mean removal; passive elements stay pinned."""
    if active is None:
        step = mean_project(g) if mean_projection else g
        return project_simplex(v + alpha_k * step, bounds)
    ga = g[active]
    if mean_projection:
        ga = ga - ga.mean()
    out = v.copy()
    out[active] = project_simplex(v[active] + alpha_k * ga, bounds)
    return out


@dataclass
class _Workspace:
    """Resolved operators and parameters shared across one run."""

    grid: GridModel
    filter_spec: FilterSpec
    eta: float
    active: np.ndarray | None  # None when no passive region exists
    bounds: SimplexBounds
    v_init: np.ndarray
    beta: float
    threads: int


def _prepare(problem: ProblemSpec, config: SolverConfig, threads: int) -> _Workspace:
    grid = resolve(problem)
    eta = config.eta if config.eta is not None else problem.eta
    passive = problem.passive_mask()
    active = None if not passive.any() else ~passive
    n_active = problem.num_elements if active is None else int(active.sum())
    bounds = SimplexBounds(problem.v_lo, 1.0, problem.volume_fraction * n_active)
    v = np.full(problem.num_elements, problem.v_lo)
    uniform = min(max(problem.volume_fraction, problem.v_lo), 1.0)
    if active is None:
        v[:] = uniform
    else:
        v[active] = uniform

    beta = config.beta
    if beta is None:
        if config.algorithm == "cpfbto_krylov":
            beta = 1.0
        elif config.algorithm == "fbto":
            solid = estimate_rho_max(grid, np.ones(grid.num_elements), 50, config.seed)
            beta = 1.0 / solid.rho_max
        elif config.algorithm == "pfbto_jacobi":
            beta = 1.0 / _estimate_squared_jacobi_rho(grid, v, eta,
                                                      problem.filter, config.seed)
        else:  # pgd_exact never uses a low-level step size
            beta = 1.0
    return _Workspace(grid, problem.filter, eta, active, bounds, v, beta, threads)


def _estimate_squared_jacobi_rho(grid, v, eta, filter_spec, seed, iters=50) -> float:
    # power iteration on K M⁻² K at the initial design (M = diag K)
    a = apply_filter(v, grid.nx, grid.ny, filter_spec) ** eta
    diag = stiffness_diagonal(grid, a)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(grid.num_dofs)
    x[grid.fixed_dofs] = 0.0
    x /= np.linalg.norm(x)
    rho = 1.0
    for _ in range(iters):
        y = apply_stiffness(grid, a, apply_stiffness(grid, a, x) / diag**2)
        rho = float(x @ y)
        n = np.linalg.norm(y)
        if n == 0.0:
            break
        x = y / n
    return rho


def _make_state(k, u, v, v_phys, a, residual_inf, compliance, dv_inf) -> SolverState:
    return SolverState(
        iter=k,
        u=u.copy(),
        v=DensityField(v.copy()),
        v_phys=v_phys.copy(),
        activation=a.copy(),
        residual_inf=residual_inf,
        compliance=compliance,
        volume=float(v.sum()),
        last_dv_inf=dv_inf,
    )


def run(
    problem: ProblemSpec,
    config: SolverConfig,
    sink: Callable[[SolverState], None] | None = None,
    control: RunControl | None = None,
    threads: int = 1,
    clock: Callable[[], float] | None = None,
) -> RunResult:
    """Iterate the configured solver until both termination tolerances hold
    ("converged") or the iteration budget runs out ("budget").

    The observer `sink` receives an immutable state snapshot every
    `snapshot_every` iterations plus the final state.  `control` messages
    (pause/resume/stop, alpha0/snapshot_every patches) apply at iteration
    boundaries only.  `clock` stamps the record's elapsed column; the
    default is a constant 0.0 so identical runs yield byte-identical
    records — pass time.perf_counter for wall-clock history.

    Raises DivergenceError as soon as an iterate turns non-finite.
    """
    ws = _prepare(problem, config, threads)
    grid, eta = ws.grid, ws.eta
    clk = clock if clock is not None else (lambda: 0.0)
    alpha0 = config.resolved_alpha0()
    snapshot_every = config.snapshot_every

    u = np.zeros(grid.num_dofs)
    v = ws.v_init.copy()
    record = ConvergenceRecord()
    reason = "budget"
    last = None  # measurement tuple of the latest completed iteration
    emitted_iter = -1
    t0 = clk()
    stop_requested = False

    for k in range(1, config.max_iters + 1):
        if control is not None:
            paused = False
            commands = control.drain()
            while True:
                for cmd in commands:
                    if cmd == RunControl.PAUSE:
                        paused = True
                    elif cmd == RunControl.RESUME:
                        paused = False
                    elif cmd == RunControl.STOP:
                        stop_requested = True
                    elif isinstance(cmd, dict):
                        if "alpha0" in cmd:
                            alpha0 = float(cmd["alpha0"])
                        if "snapshot_every" in cmd:
                            snapshot_every = int(cmd["snapshot_every"])
                    else:
                        raise ValueError(f"unknown control command {cmd!r}")
                if stop_requested or not paused:
                    break
                commands = [control.wait()]
            if stop_requested:
                reason = "stopped"
                break

        v_phys = apply_filter(v, grid.nx, grid.ny, ws.filter_spec)
        a = v_phys**eta

        if config.algorithm == "pgd_exact":
            u = exact_solve(grid, a, _EXACT_SOLVE_TOL, x0=u, threads=threads)
        r = apply_stiffness(grid, a, u, threads) - grid.load
        residual_inf = float(np.abs(r).max())
        compliance = 0.5 * float(u @ (r + grid.load))
        if not (np.isfinite(residual_inf) and np.isfinite(compliance)):
            raise DivergenceError(
                f"non-finite iterate at iteration {k} "
                f"(residual_inf={residual_inf}, compliance={compliance}); "
                f"alpha0={alpha0} is likely too large for {config.algorithm}"
            )

        g = sensitivity(grid, v_phys, u, eta, ws.filter_spec)
        u_measured = u
        if config.algorithm != "pgd_exact":
            u = low_level_step(grid, a, u, config, ws.beta, residual=r, threads=threads)

        alpha_k = config.step_size(k, alpha0)
        v_next = high_level_step(v, g, alpha_k, ws.bounds, ws.active, config.mean_projection)
        dv_inf = float(np.abs(v_next - v).max())

        record.append(k, clk() - t0, compliance, residual_inf, dv_inf, float(v.sum()))
        last = (k, u_measured, v, v_phys, a, residual_inf, compliance, dv_inf)
        if sink is not None and snapshot_every > 0 and k % snapshot_every == 0:
            sink(_make_state(*last))
            emitted_iter = k

        v = v_next
        if dv_inf < config.tol_dv and residual_inf < config.tol_res:
            reason = "converged"
            break

    if last is None:  # zero-iteration budget or immediate stop: initial design
        v_phys = apply_filter(v, grid.nx, grid.ny, ws.filter_spec)
        a = v_phys**eta
        last = (0, u, v, v_phys, a, float(np.abs(grid.load).max()), 0.0, 0.0)
    state = _make_state(*last)
    if sink is not None and emitted_iter != state.iter:
        sink(state)
    return RunResult(state=state, record=record, reason=reason)


def pgd_step(
    grid: GridModel,
    v: np.ndarray,
    u_prev: np.ndarray,
    config: SolverConfig,
    k: int,
    filter_spec: FilterSpec,
    eta: float,
    bounds: SimplexBounds,
    active: np.ndarray | None = None,
    threads: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """One exact-inversion baseline step: re-solve equilibrium at the current
    design (warm-started), then take the projected step with the exact gradient."""
    v_phys = apply_filter(v, grid.nx, grid.ny, filter_spec)
    a = v_phys**eta
    u = exact_solve(grid, a, _EXACT_SOLVE_TOL, x0=u_prev, threads=threads)
    g = sensitivity(grid, v_phys, u, eta, filter_spec)
    v_next = high_level_step(v, g, config.step_size(k), bounds, active, config.mean_projection)
    return u, v_next


def diagnostics_projection_error(
    problem: ProblemSpec,
    state: SolverState,
    config: SolverConfig,
    k: int,
    grid: GridModel | None = None,
    exact: bool = False,
) -> float:
    """Squared projected-step displacement ‖P_X(v + alpha_k·g) − v‖²/alpha_k²,
    the runtime proxy for the high-level optimality error.

    With `exact` the gradient is evaluated at the equilibrium displacement
    (test-mode; one linear solve) instead of the current iterate's."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if grid is None:
        grid = resolve(problem)
    eta = config.eta if config.eta is not None else problem.eta
    passive = problem.passive_mask()
    active = None if not passive.any() else ~passive
    n_active = problem.num_elements if active is None else int(active.sum())
    bounds = SimplexBounds(problem.v_lo, 1.0, problem.volume_fraction * n_active)
    v = state.v.values
    v_phys = apply_filter(v, grid.nx, grid.ny, problem.filter)
    a = v_phys**eta
    u = exact_solve(grid, a, 1e-12, x0=state.u) if exact else state.u
    g = sensitivity(grid, v_phys, u, eta, problem.filter)
    alpha_k = config.step_size(k)
    moved = high_level_step(v, g, alpha_k, bounds, active, mean_projection=False)
    return float(np.sum((moved - v) ** 2)) / alpha_k**2
