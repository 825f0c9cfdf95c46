"""Wall-clock live session host with WebSocket telemetry.

One simulation thread runs the 500 Hz loop in real time; an inference worker
consumes ticks and publishes (voted subtask, progress) snapshots the loop
reads without blocking; an asyncio WebSocket endpoint receives operator input
frames and broadcasts decimated state frames.  The operator's pointer couples
to the tool through a virtual spring-damper; holding grab advances the handle
along the approach axis at a fixed rate.

Protocol (JSON text frames):
  client -> server: {"type": "input", "pointer": [y, z], "grab": bool, "ts": float}
                    {"type": "ready"}
  server -> client: {"type": "state", "t": s, "tool": [x,y,z], "v": [x,y,z],
                     "b": Ns/m, "subtask_pred": 0-3, "subtask_true": 0-3,
                     "progress_pred": float, "depth_mm": float, "phase": str,
                     "prompt": str, ...extras}
                    {"type": "trial_end", "report": {...}}
Out-of-order input frames (non-monotone "ts") are discarded.
"""

from __future__ import annotations

import json
import math
import os
import queue
import threading
import time
from collections import deque
from dataclasses import dataclass

import numpy as np
from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from .config import Config
from .controller import DampingScheduler
from .core import (
    NO_PREDICTION,
    ManifestEntry,
    Subtask,
    TrialLog,
    TrialMeta,
    TRIAL_COLUMNS,
    save_manifest,
    save_trial,
)
from .environment import SpringWorkpiece, TrialLifecycle, TrialPhase, trajectory_progress
from .errors import DegenerateTrialError
from .estimators.artifacts import load_artifact
from .estimators.pipeline import IntentPipeline
from .evaluation import task_metrics
from .simulate import SimParams

SATURATION = 60.0


@dataclass
class OperatorInput:
    pointer_y: float = 0.0
    pointer_z: float = 0.0
    grab: bool = False
    ts: float = -math.inf


class InferenceWorker(threading.Thread):
    """Runs the intent pipeline off the control thread.

    The loop publishes the latest (tick, voted, progress) tuple; consumers
    never block on inference.
    """

    def __init__(self, pipeline: IntentPipeline):
        super().__init__(daemon=True)
        self.pipeline = pipeline
        self.inbox: queue.Queue = queue.Queue()
        self.snapshot = (-1, 0, None)  # tick, voted, progress_clamped
        self._stop = threading.Event()

    def submit(self, tick, pos, vel, f_h, f_int):
        self.inbox.put((tick, pos, vel, f_h, f_int))

    def run(self):
        while not self._stop.is_set():
            try:
                item = self.inbox.get(timeout=0.2)
            except queue.Empty:
                continue
            tick, pos, vel, f_h, f_int = item
            out = self.pipeline.step(tick, pos, vel, f_h, f_int)
            self.snapshot = (tick, int(out.voted), out.progress_clamped,
                             out.progress_raw)

    def reset(self):
        with self.inbox.mutex:
            self.inbox.queue.clear()
        self.pipeline.reset()
        self.snapshot = (-1, 0, None, None)

    def stop(self):
        self._stop.set()


class LiveSession(threading.Thread):
    """Real-time paced trial loop; owns all simulation state."""

    def __init__(self, cfg: Config, detector, estimator, out_dir: str,
                 seed: int = 0, target: str = "lambda"):
        super().__init__(daemon=True)
        self.params = SimParams.from_config(cfg)
        self.cfg = cfg
        self.out_dir = out_dir
        self.seed = seed
        self.target = target
        self.frame_div = max(1, int(round(self.params.rate / cfg.get_float("serve.frame_hz"))))
        self.coupling_k = cfg.get_float("serve.coupling_stiffness")
        self.coupling_d = cfg.get_float("serve.coupling_damping")
        self.push_rate = cfg.get_float("serve.push_rate")
        self.overrun_limit = cfg.get_float("serve.overrun_limit")
        self.stale_ticks = int(cfg.get_float("pipeline.stale_limit") * self.params.rate)
        self.stale_trial_fraction = cfg.get_float("pipeline.stale_trial_fraction")

        corners = cfg.get_ints("expB.corners")
        self._corners = corners
        self._trial_index = 0
        l_p = cfg.get_floats("expB.l_p")[0]
        iod = cfg.get_ints("expB.iod")[0]
        self._l_p, self._iod = l_p, iod

        pipeline = IntentPipeline(detector, estimator, rate=self.params.rate,
                                  inference_stride=self.params.inference_stride,
                                  vote_capacity=self.params.vote_capacity,
                                  mj_target=target)
        self.worker = InferenceWorker(pipeline)
        self.frames: deque = deque(maxlen=4)  # drop-oldest, never blocks
        self.input = OperatorInput()
        self.connected = False
        self.degraded = False
        self.overruns = 0
        self.ticks_run = 0
        self.entries: list[ManifestEntry] = []
        self._stop = threading.Event()
        self._lock = threading.Lock()
        self._reset_trial()
        os.makedirs(out_dir, exist_ok=True)

    # -- trial state ---------------------------------------------------------

    def _reset_trial(self):
        corner = self._corners[self._trial_index % len(self._corners)]
        self.geometry = self.params.geometry(self._l_p, corner, self._iod)
        self.workpiece = SpringWorkpiece(self.geometry, self.params.spring_stiffness)
        self.lifecycle = TrialLifecycle(self.geometry, self.params.rate,
                                        self.params.hold_duration)
        self.scheduler = DampingScheduler("C3", self.params.schedule)
        self.worker.reset()
        self.pos = self.geometry.home.astype(float).copy()
        self.vel = np.zeros(3)
        self.handle_x = float(self.geometry.home[0])
        self.tick = 0
        self.rows: list[np.ndarray] = []
        self.stale_count = 0
        self.flags: list[str] = []
        self.awaiting_release = False

    def handle_input(self, frame: dict) -> None:
        ts = float(frame.get("ts", 0.0))
        with self._lock:
            if ts <= self.input.ts:
                return  # out-of-order frame discarded
            pointer = frame.get("pointer") or [0.0, 0.0]
            self.input = OperatorInput(pointer_y=float(pointer[0]),
                                       pointer_z=float(pointer[1]),
                                       grab=bool(frame.get("grab", False)),
                                       ts=ts)

    def client_connected(self):
        self.connected = True

    def client_disconnected(self):
        self.connected = False
        if self.lifecycle.phase != TrialPhase.AWAIT_GRAB and not self.awaiting_release:
            self.flags.append("aborted")
            self._finish_trial(aborted=True)
        else:
            self._trial_index += 0  # nothing recorded worth keeping
            self._reset_trial()
        with self._lock:
            self.input = OperatorInput()

    # -- per-tick dynamics ---------------------------------------------------

    def _operator_force(self, grab: bool, py: float, pz: float) -> np.ndarray:
        if not grab:
            return np.zeros(3)
        phase = self.lifecycle.phase
        if phase in (TrialPhase.GO, TrialPhase.IN_CONTACT):
            self.handle_x += self.push_rate / self.params.rate
        handle = np.array([self.handle_x, py, pz])
        f = self.coupling_k * (handle - self.pos) - self.coupling_d * self.vel
        mag = float(np.linalg.norm(f))
        if mag > SATURATION:
            f *= SATURATION / mag
        return f

    def _step_once(self):
        with self._lock:
            inp = self.input
        if self.awaiting_release:
            # trial saved; show RETRACT until the operator lets go and the
            # spring ejects the tool back through the plane
            f_h = self._operator_force(inp.grab, inp.pointer_y, inp.pointer_z)
            f_env = self.workpiece.force(self.pos)
            b = self.params.schedule.b_high
            rho = math.exp(-b / self.params.rate / self.params.mass)
            self.vel = rho * self.vel + (1.0 - rho) / b * (f_h + f_env)
            self.pos = self.pos + self.vel / self.params.rate
            if not inp.grab and self.pos[0] <= self.geometry.plane_x:
                self._trial_index += 1
                self._reset_trial()
            return
        tick = self.tick
        t = tick / self.params.rate
        phase_before = self.lifecycle.phase
        phase = self.lifecycle.advance(tick, self.pos, inp.grab)
        if phase == TrialPhase.AWAIT_GRAB and phase_before == TrialPhase.HOLD:
            # released before GO: restart the recording for this trial
            self.rows.clear()
            self.tick = 0
            self.handle_x = float(self.geometry.home[0])
            return
        if self.lifecycle.events.miss:
            self.flags.append("miss")
            self._finish_trial(reset_now=True)
            return
        if phase == TrialPhase.IN_CONTACT:
            self.workpiece.contact_started = True
        truth = self.lifecycle.label()

        f_h = self._operator_force(inp.grab, inp.pointer_y, inp.pointer_z)
        f_env = self.workpiece.force(self.pos)
        f_int = f_h + f_env

        self.worker.submit(tick, self.pos.copy(), self.vel.copy(), f_h, f_int)
        snap = self.worker.snapshot
        snap_tick, voted_i, progress = snap[0], snap[1], snap[2]
        progress_raw = snap[3] if len(snap) > 3 else None
        if snap_tick >= 0 and tick - snap_tick > self.stale_ticks:
            self.stale_count += 1
        voted = Subtask(voted_i)

        b = self.scheduler.step(t, voted, progress)

        row = np.zeros(len(TRIAL_COLUMNS))
        row[0] = t
        row[1:4] = self.pos
        row[4:7] = self.vel
        row[7:10] = f_h
        row[10:13] = f_env
        row[13:16] = f_int
        row[16] = b
        row[17] = int(truth)
        row[18] = voted_i
        row[21] = progress_raw if progress_raw is not None else NO_PREDICTION
        self.rows.append(row)

        if phase == TrialPhase.DONE:
            self._finish_trial()
            return

        rho = math.exp(-b / self.params.rate / self.params.mass)
        self.vel = rho * self.vel + (1.0 - rho) / b * f_int
        self.pos = self.pos + self.vel / self.params.rate
        self.tick += 1

    def _finish_trial(self, aborted: bool = False, reset_now: bool = False):
        if not self.rows:
            self._trial_index += 1
            self._reset_trial()
            return
        data = np.vstack(self.rows)
        ev = self.lifecycle.events
        n = data.shape[0]
        stale_frac = self.stale_count / max(n, 1)
        meta = TrialMeta(
            subject="operator", l_p=self.geometry.l_p, corner=self.geometry.corner,
            iod=self.geometry.iod, controller="C3", repetition=self._trial_index,
            seed=self.seed, rate=self.params.rate,
            target_diameter=self.geometry.target_diameter,
            target_center=tuple(float(c) for c in self.geometry.target_center),
            t_g=ev.t_g, t_d=ev.t_d, t_c=ev.t_c, t_a=self.scheduler.t_a, t_f=ev.t_f,
            miss=ev.miss, stale_frac=stale_frac,
            extra={"target": self.target},
        )
        valid = (not aborted and not ev.miss and not math.isnan(ev.t_f)
                 and not math.isnan(ev.t_d)
                 and (ev.t_c - ev.t_d) >= self.params.min_driving_duration)
        if stale_frac > self.stale_trial_fraction:
            self.flags.append("stale_inference")
            valid = False
        if valid:
            k_d = int(round(ev.t_d * self.params.rate))
            k_c = int(round(ev.t_c * self.params.rate))
            data[k_d:k_c + 1, 19] = (data[k_d:k_c + 1, 0] - ev.t_d) / (ev.t_c - ev.t_d)
            data[k_c + 1:, 19] = 1.0
            try:
                speed = np.linalg.norm(data[:, 4:7], axis=1)
                lam = trajectory_progress(speed, self.params.rate, ev.t_d, ev.t_c)
                data[k_d:k_c + 1, 20] = lam
                data[k_c + 1:, 20] = 1.0
            except DegenerateTrialError:
                valid = False
                self.flags.append("zero_path")
        meta.valid = valid
        meta.flags = tuple(self.flags)
        log = TrialLog(meta=meta, data=data)
        name = f"live_{self._trial_index:04d}.csv"
        save_trial(log, os.path.join(self.out_dir, name))
        self.entries.append(ManifestEntry.from_log(log, name))
        save_manifest(self.entries, self.out_dir)

        report = {"valid": valid, "aborted": aborted, "flags": list(meta.flags),
                  "t_d": ev.t_d, "t_c": ev.t_c, "t_a": self.scheduler.t_a,
                  "t_f": ev.t_f, "stale_frac": stale_frac}
        if valid:
            try:
                tm = task_metrics(log)
                report.update(tm.as_row())
            except ValueError:
                pass
        self.frames.append(json.dumps({"type": "trial_end", "report": report}))
        if aborted or reset_now:
            self._trial_index += 1
            self._reset_trial()
        else:
            self.awaiting_release = True

    def _state_frame(self) -> str:
        snap = self.worker.snapshot
        progress_raw = snap[3] if len(snap) > 3 and snap[3] is not None else NO_PREDICTION
        phase = self.lifecycle.phase
        c = self.geometry.target_center
        return json.dumps({
            "type": "state",
            "t": self.tick / self.params.rate,
            "tool": [float(x) for x in self.pos],
            "v": [float(x) for x in self.vel],
            "b": self._last_b(),
            "subtask_pred": int(snap[1]),
            "subtask_true": int(self.lifecycle.label()),
            "progress_pred": float(progress_raw),
            "depth_mm": max(0.0, (float(self.pos[0]) - self.geometry.plane_x) * 1000.0),
            "phase": phase.value,
            "prompt": phase.prompt,
            "target": [float(x) for x in c],
            "target_diameter": self.geometry.target_diameter,
            "plane_x": self.geometry.plane_x,
            "degraded": self.degraded,
        })

    def _last_b(self) -> float:
        if self.rows:
            return float(self.rows[-1][16])
        return float(self.params.schedule.b_med)

    # -- main loop -----------------------------------------------------------

    def run(self):
        self.worker.start()
        dt = 1.0 / self.params.rate
        next_t = time.perf_counter()
        while not self._stop.is_set():
            now = time.perf_counter()
            if now < next_t:
                time.sleep(min(next_t - now, dt))
                continue
            if now - next_t > dt:
                self.overruns += 1
            next_t += dt
            self._step_once()
            self.ticks_run += 1
            if self.ticks_run % 1000 == 0:
                frac = self.overruns / 1000.0
                self.degraded = frac > self.overrun_limit
                self.overruns = 0
            if self.ticks_run % self.frame_div == 0:
                self.frames.append(self._state_frame())

    def stop(self):
        self._stop.set()
        self.worker.stop()


def build_app(session: LiveSession, frontend_dir: str | None = None):
    app = FastAPI(title="intent-admit live session")
    app.state.session = session
    if frontend_dir and os.path.isdir(frontend_dir):
        from fastapi.staticfiles import StaticFiles
        app.mount("/console", StaticFiles(directory=frontend_dir, html=True),
                  name="console")

    @app.get("/health")
    def health():
        return {"status": "degraded" if session.degraded else "ok",
                "ticks": session.ticks_run}

    @app.websocket("/ws")
    async def ws(websocket: WebSocket):
        import asyncio
        await websocket.accept()
        session.client_connected()
        send_period = 1.0 / 120.0

        async def sender():
            while True:
                while session.frames:
                    await websocket.send_text(session.frames.popleft())
                await asyncio.sleep(send_period)

        task = asyncio.create_task(sender())
        try:
            while True:
                text = await websocket.receive_text()
                try:
                    frame = json.loads(text)
                except json.JSONDecodeError:
                    continue  # malformed frame dropped
                kind = frame.get("type")
                if kind == "input":
                    session.handle_input(frame)
                elif kind == "ready":
                    pass  # session is always armed; kept for handshake symmetry
        except WebSocketDisconnect:
            pass
        finally:
            task.cancel()
            session.client_disconnected()

    return app


def serve(cfg: Config, detector_path: str, estimator_path: str, out_dir: str,
          host: str | None = None, port: int | None = None, seed: int = 0,
          frontend_dir: str | None = None) -> None:
    import uvicorn

    rate = cfg.get_float("sim.rate")
    detector, _ = load_artifact(detector_path, expect_rate=rate)
    estimator, est_meta = load_artifact(estimator_path, expect_rate=rate)
    session = LiveSession(cfg, detector, estimator, out_dir, seed=seed,
                          target=est_meta.get("target") or "lambda")
    session.start()
    app = build_app(session, frontend_dir=frontend_dir)
    host = host or cfg.get_str("serve.host")
    port = port or cfg.get_int("serve.port")
    if frontend_dir:
        print(f"console at http://{host}:{port}/console/")
    print(f"telemetry at ws://{host}:{port}/ws")
    try:
        uvicorn.run(app, host=host, port=port, log_level="warning")
    finally:
        session.stop()
