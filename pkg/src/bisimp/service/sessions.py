"""Preview sessions: one solver worker thread per session, message-passing
control in, latest-wins frames out.

The solver thread never blocks on a consumer: frames go into a single-slot
holder that overwrites older unconsumed frames, and run-control messages
are applied by the solver only at iteration boundaries, so every frame a
client sees is a consistent iterate.
"""
from __future__ import annotations

import threading
import time
import uuid
from dataclasses import dataclass, replace

import numpy as np

from ..problems import ProblemSpec
from ..solvers import RunControl, RunResult, SolverConfig, SolverState, run

TERMINAL = ("converged", "budget", "error")
LIVE_TUNABLE = ("alpha0", "snapshot_every")


@dataclass
class Frame:
    """One density snapshot plus its scalar diagnostics, ready to stream."""

    iter: int
    compliance: float
    residual_inf: float
    volume: float
    nx: int
    ny: int
    payload: bytes  # v_phys as row-major little-endian float32


class FrameSlot:
    """Single-slot, latest-wins handoff with a monotonically growing version."""

    def __init__(self):
        self._lock = threading.Lock()
        self._version = 0
        self._frame: Frame | None = None

    def publish(self, frame: Frame) -> None:
        with self._lock:
            self._version += 1
            self._frame = frame

    def latest(self, after: int) -> tuple[int, Frame] | None:
        """Newest frame if its version is greater than `after`, else None."""
        with self._lock:
            if self._frame is None or self._version <= after:
                return None
            return self._version, self._frame


class IllegalTransition(RuntimeError):
    """Raised when a control verb is not legal in the current status."""


class Session:
    """State machine around one solver run.

    Status transitions: idle→running→{paused↔running}→{converged|budget|error},
    reset returns to idle from anywhere; editing the problem is allowed when
    idle or paused, and while paused it discards the current iterates (the
    geometry changed, so they are meaningless) without leaving paused.
    """

    def __init__(self, config: SolverConfig | None = None):
        self.id = uuid.uuid4().hex[:12]
        self.lock = threading.RLock()
        self.status = "idle"
        self.problem: ProblemSpec | None = None
        self.config = config if config is not None else SolverConfig(snapshot_every=10)
        self.slot = FrameSlot()
        self.latest_state: SolverState | None = None
        self.error_message: str | None = None
        self._control: RunControl | None = None
        self._worker: threading.Thread | None = None
        self._generation = 0

    # -- worker plumbing ---------------------------------------------------

    def _run_worker(self, problem: ProblemSpec, config: SolverConfig,
                    control: RunControl, generation: int) -> None:
        def sink(state: SolverState) -> None:
            frame = Frame(
                iter=state.iter,
                compliance=state.compliance,
                residual_inf=state.residual_inf,
                volume=state.volume,
                nx=problem.nx,
                ny=problem.ny,
                payload=state.v_phys.astype("<f4").tobytes(),
            )
            with self.lock:
                if self._generation != generation:  # superseded by reset/edit
                    return
                self.latest_state = state
            self.slot.publish(frame)

        try:
            result: RunResult = run(problem, config, sink=sink,
                                    control=control, clock=time.perf_counter)
            with self.lock:
                if self._generation == generation and result.reason != "stopped":
                    self.status = result.reason
        except Exception as exc:  # surface solver failures as session errors
            with self.lock:
                if self._generation == generation:
                    self.status = "error"
                    self.error_message = str(exc)

    def _detach_worker_locked(self) -> threading.Thread | None:
        """Signal the worker to stop and hand it back for an out-of-lock join
        (the worker's epilogue takes the session lock, so joining under it
        would deadlock)."""
        worker, control = self._worker, self._control
        self._worker = None
        self._control = None
        if worker is not None and worker.is_alive():
            self._generation += 1
            control.send(RunControl.STOP)
            return worker
        return None

    # -- client verbs --------------------------------------------------------

    def set_problem(self, problem: ProblemSpec) -> None:
        with self.lock:
            if self.status not in ("idle", "paused"):
                raise IllegalTransition(f"cannot edit the problem while {self.status}")
            # while paused the iterates are invalid for the new geometry:
            # drop the run; resume will start fresh
            worker = self._detach_worker_locked() if self.status == "paused" else None
            self.problem = problem
            self.latest_state = None
            self.error_message = None
        if worker is not None:
            worker.join(timeout=30.0)

    def patch_config(self, changes: dict) -> None:
        with self.lock:
            if self.status != "idle":
                illegal = set(changes) - set(LIVE_TUNABLE)
                if illegal:
                    raise IllegalTransition(
                        f"only {list(LIVE_TUNABLE)} can change while {self.status}; "
                        f"got {sorted(illegal)}"
                    )
            self.config = replace(self.config, **changes)
            if self._control is not None:
                live = {k: v for k, v in changes.items() if k in LIVE_TUNABLE}
                if live:
                    self._control.send(live)

    def start(self) -> None:
        with self.lock:
            if self.status != "idle":
                raise IllegalTransition(f"cannot start while {self.status}; reset first")
            if self.problem is None:
                raise IllegalTransition("no problem loaded")
            self._control = RunControl()
            self._generation += 1
            self._worker = threading.Thread(
                target=self._run_worker,
                args=(self.problem, self.config, self._control, self._generation),
                daemon=True,
            )
            self.status = "running"
            self._worker.start()

    def pause(self) -> None:
        with self.lock:
            if self.status != "running":
                raise IllegalTransition(f"cannot pause while {self.status}")
            self._control.send(RunControl.PAUSE)
            self.status = "paused"

    def resume(self) -> None:
        with self.lock:
            if self.status != "paused":
                raise IllegalTransition(f"cannot resume while {self.status}")
            if self._worker is None:  # problem was replaced while paused
                self.status = "idle"
                self.start()
            else:
                self._control.send(RunControl.RESUME)
                self.status = "running"

    def reset(self) -> None:
        with self.lock:
            worker = self._detach_worker_locked()  # a paused worker wakes on STOP
            self.status = "idle"
            self.latest_state = None
            self.error_message = None
        if worker is not None:
            worker.join(timeout=30.0)

    def state_view(self) -> dict:
        with self.lock:
            state = self.latest_state
            return {
                "status": self.status,
                "iter": 0 if state is None else state.iter,
                "compliance": 0.0 if state is None else state.compliance,
                "residual_inf": 0.0 if state is None else state.residual_inf,
                "volume": 0.0 if state is None else state.volume,
                "error": self.error_message,
            }


class SessionRegistry:
    """Process-wide store of live sessions (no persistence by design)."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sessions: dict[str, Session] = {}

    def create(self) -> Session:
        session = Session()
        with self._lock:
            self._sessions[session.id] = session
        return session

    def get(self, session_id: str) -> Session | None:
        with self._lock:
            return self._sessions.get(session_id)
