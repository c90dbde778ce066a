"""
Background jobs for dataset sweeps and benchmarks.

Each job runs on its own daemon thread and lives in memory only. Sweeps are
resumable from their manifest, so a lost job record never loses work.
"""

from __future__ import annotations

import logging
import threading
import uuid
from collections import OrderedDict, deque
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional

import requests as _requests

from .models import JobKind, JobRequest, JobSummary, JobDetail, JobStatus, JobProgress

log = logging.getLogger(__name__)

LOG_LINES = 200
FINISHED = (JobStatus.COMPLETED, JobStatus.FAILED, JobStatus.CANCELLED)


def _utcnow() -> datetime:
    return datetime.now(timezone.utc)


class Job:
    """State of one sweep or benchmark run, shared between its worker thread and the API."""

    def __init__(self, request: JobRequest):
        self.job_id = str(uuid.uuid4())
        self.request = request
        self.status = JobStatus.PENDING
        self.created_at = _utcnow()
        self.started_at: Optional[datetime] = None
        self.completed_at: Optional[datetime] = None
        self.progress = JobProgress(current=0, total=0, percent=0.0)
        self.result: Dict[str, Any] = {}
        self.error: Optional[str] = None
        self.log: deque = deque(maxlen=LOG_LINES)
        self._stop = threading.Event()
        self._state_lock = threading.Lock()

    @property
    def cancelled(self) -> bool:
        return self._stop.is_set()

    @property
    def finished(self) -> bool:
        return self.status in FINISHED

    def cancel(self) -> None:
        with self._state_lock:
            if not self.finished:
                self._stop.set()
                self.status = JobStatus.CANCELLED

    def begin(self) -> bool:
        with self._state_lock:
            if self.cancelled:
                return False
            self.status = JobStatus.RUNNING
            self.started_at = _utcnow()
            return True

    def record(self, message: str) -> None:
        self.log.append(f"[{datetime.now():%H:%M:%S}] {message}")

    def report_progress(self, done: int, total: int) -> None:
        self.progress = JobProgress(current=done, total=total,
                                    percent=round(100.0 * done / max(total, 1), 1))

    def to_summary(self) -> JobSummary:
        return JobSummary(
            job_id=self.job_id,
            kind=self.request.kind,
            status=self.status,
            created_at=self.created_at,
            started_at=self.started_at,
            completed_at=self.completed_at,
            progress=self.progress,
            last_message=self.log[-1] if self.log else None,
            error=self.error,
        )

    def to_detail(self) -> JobDetail:
        return JobDetail(**self.to_summary().model_dump(), request=self.request,
                         result=self.result, log=list(self.log))


# ── Runners ───────────────────────────────────────────────────────────────────

_RUNNERS: Dict[JobKind, Callable[[Job], Dict[str, Any]]] = {}


def _runner(kind: JobKind):
    def register(fn):
        _RUNNERS[kind] = fn
        return fn
    return register


@_runner(JobKind.GENERATE)
def _generate(job: Job) -> Dict[str, Any]:
    from core.sweep import HeomSettings, SweepSpec, generate_dataset, STATUS_OK

    p = job.request.generate
    spec = SweepSpec(n_sites=p.n_sites, n_samples=p.n_samples, sampling_mode=p.sampling_mode, seed=p.seed)
    settings = HeomSettings(dt=p.dt, t_total=p.t_total, depth=p.depth)
    job.record(f"Sweeping {p.n_samples} {p.n_sites}-site points into {p.out_dir} (K={p.depth}, dt={p.dt} ps)")
    manifest = generate_dataset(spec, settings, p.out_dir,
                                progress=job.report_progress, should_stop=lambda: job.cancelled)
    n_ok = int((manifest["status"] == STATUS_OK).sum())
    job.record(f"Sweep finished: {n_ok} ok, {len(manifest) - n_ok} failed")
    return {"out_dir": p.out_dir, "ok": n_ok, "failed": len(manifest) - n_ok}


@_runner(JobKind.BENCHMARK)
def _benchmark(job: Job) -> Dict[str, Any]:
    from core.evaluation import BenchmarkSpec, run_benchmark
    from core.sweep import read_sweep_settings
    from core.windows import window_points

    p = job.request.benchmark
    _, settings = read_sweep_settings(p.dataset_dir)
    L_in, _ = window_points(p.lin_ps, p.lin_ps, settings.dt)
    spec = BenchmarkSpec(model=p.model, L_in=L_in, horizon=p.horizon,
                         max_samples=p.max_samples, seed=p.seed)
    job.record(f"Scoring {p.model} on {p.dataset_dir}: L_in={L_in} points, horizon={p.horizon}")
    outcome = run_benchmark(p.dataset_dir, spec, out_dir=p.out_dir, progress=job.report_progress)
    result = outcome.report.model_dump()
    if outcome.audit is not None:
        result["audit_pass_fraction"] = outcome.audit.pass_fraction
    job.record(f"MSE {outcome.report.mse_mean:.4e} ± {outcome.report.mse_std:.4e}")
    return result


def _notify(job: Job) -> None:
    body = job.to_summary().model_dump(mode="json")
    body["result"] = job.result
    try:
        _requests.post(job.request.webhook_url, json=body, timeout=10)
    except _requests.RequestException as exc:
        log.warning("Webhook for job %s failed: %s", job.job_id, exc)
        job.record(f"Webhook failed: {exc}")


def _execute(job: Job) -> None:
    if not job.begin():
        job.completed_at = _utcnow()
        return
    try:
        job.result = _RUNNERS[job.request.kind](job)
        if not job.cancelled:
            job.status = JobStatus.COMPLETED
            if job.request.webhook_url:
                _notify(job)
    except Exception as exc:
        log.exception("Job %s (%s) failed", job.job_id, job.request.kind.value)
        job.status = JobStatus.FAILED
        job.error = str(exc)
        job.record(f"Failed: {exc}")
    finally:
        job.completed_at = _utcnow()


# ── Registry ──────────────────────────────────────────────────────────────────

class JobQueue:
    """In-memory job registry; keeps at most `capacity` records, dropping the oldest finished ones."""

    def __init__(self, capacity: int = 200):
        self.capacity = capacity
        self._jobs: "OrderedDict[str, Job]" = OrderedDict()
        self._lock = threading.Lock()

    def submit(self, request: JobRequest) -> Job:
        job = Job(request)
        with self._lock:
            self._jobs[job.job_id] = job
            self._trim()
        threading.Thread(target=_execute, args=(job,), name=f"job-{job.job_id[:8]}", daemon=True).start()
        return job

    def get(self, job_id: str) -> Optional[Job]:
        return self._jobs.get(job_id)

    def list_all(self) -> List[Job]:
        with self._lock:
            return list(reversed(self._jobs.values()))

    def cancel(self, job_id: str) -> bool:
        job = self.get(job_id)
        if job is None:
            return False
        job.cancel()
        return True

    def delete(self, job_id: str) -> bool:
        with self._lock:
            return self._jobs.pop(job_id, None) is not None

    def _trim(self) -> None:
        excess = len(self._jobs) - self.capacity
        for job_id in [j.job_id for j in self._jobs.values() if j.finished][:max(excess, 0)]:
            del self._jobs[job_id]


queue = JobQueue()
