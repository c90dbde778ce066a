"""
/api/v1/jobs: background dataset sweeps and benchmarks
"""

from __future__ import annotations

from typing import List

from fastapi import APIRouter, HTTPException, Response

from ..jobs import Job, queue
from ..models import JobDetail, JobKind, JobRequest, JobSummary

router = APIRouter(prefix="/jobs", tags=["Jobs"])


def _find(job_id: str) -> Job:
    job = queue.get(job_id)
    if job is None:
        raise HTTPException(404, f"No such job: {job_id}")
    return job


@router.post("", response_model=JobSummary, status_code=202, summary="Start a sweep or benchmark")
def submit_job(req: JobRequest):
    """
    Queue a `generate` sweep or a `benchmark` run and return at once.

    The parameter block matching `kind` is required. Progress and the activity log are
    at `GET /jobs/{job_id}`; `webhook_url`, if set, receives the summary and result
    when the job completes.
    """
    params = {JobKind.GENERATE: req.generate, JobKind.BENCHMARK: req.benchmark}[req.kind]
    if params is None:
        raise HTTPException(422, f"{req.kind.value} jobs need '{req.kind.value}' parameters")
    return queue.submit(req).to_summary()


@router.get("", response_model=List[JobSummary], summary="Known jobs, newest first")
def list_jobs():
    return [job.to_summary() for job in queue.list_all()]


@router.get("/{job_id}", response_model=JobDetail, summary="Job status, result and log")
def get_job(job_id: str):
    return _find(job_id).to_detail()


@router.post("/{job_id}/cancel", response_model=JobSummary, summary="Stop a job")
def cancel_job(job_id: str):
    """Sweeps stop after the points in flight; finished jobs are left as they are."""
    job = _find(job_id)
    job.cancel()
    return job.to_summary()


@router.delete("/{job_id}", status_code=204, summary="Forget a job")
def delete_job(job_id: str):
    if not queue.delete(job_id):
        raise HTTPException(404, f"No such job: {job_id}")
    return Response(status_code=204)
