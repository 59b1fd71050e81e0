"""Process pool running trial batches, with result collection.

Jobs are submitted once, to a memory jobstore, and executed by a pool of
worker processes. The listener collects returned values and exceptions so
that the orchestrator can wait for a known set of job ids.

"""
import logging
import os
import signal
import sys
import threading
import time
from typing import Any, Callable, Dict, Iterable, Optional, Sequence

import psutil
from apscheduler.events import EVENT_JOB_ERROR, EVENT_JOB_EXECUTED, EVENT_JOB_SUBMITTED
from apscheduler.executors.pool import ProcessPoolExecutor
from apscheduler.jobstores.memory import MemoryJobStore
from apscheduler.schedulers import SchedulerNotRunningError
from apscheduler.schedulers.background import BackgroundScheduler
from pytz import utc

from . import _

logger = logging.getLogger("zeros_lab.jobs")


class JobsException(Exception):
    """An exception occurred while running jobs."""


class JobFailed(JobsException):
    """A job raised an exception in its worker."""


class Jobs:
    """Scheduler wrapper running immediate jobs in a process pool."""

    def _listener(self, event):
        if event.code == EVENT_JOB_SUBMITTED:
            logger.debug(_("The job %s started"), event.job_id)
            return
        with self._lock:
            if event.exception:
                logger.error(_("The job %s crashed"), event.job_id)
                self._errors[event.job_id] = event.exception
            else:
                logger.debug(_("The job %s worked"), event.job_id)
                self._results[event.job_id] = event.retval

    def __init__(self, nb_executors: int = 1) -> None:
        """Initialize class.

        Parameters
        ----------
        nb_executors : int
            Number of concurrent executor processes.

        """
        self._results = {}  # type: Dict[str, Any]
        self._errors = {}  # type: Dict[str, BaseException]
        self._lock = threading.Lock()
        logger.info(_("Creating scheduler, %s executors"), nb_executors)
        jobstores = {"once": MemoryJobStore()}
        executors = {"default": ProcessPoolExecutor(nb_executors)}
        job_defaults = {
            "coalesce": True,
            "max_instances": 1,
            "misfire_grace_time": 3600,
        }
        self._scheduler = BackgroundScheduler(
            jobstores=jobstores,
            executors=executors,
            job_defaults=job_defaults,
            timezone=utc,
        )
        self._scheduler.add_listener(
            self._listener, EVENT_JOB_SUBMITTED | EVENT_JOB_EXECUTED | EVENT_JOB_ERROR
        )

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_value, traceback):
        logger.debug(_("Shutting down scheduler in __exit__, if still running"))
        try:
            self._scheduler.shutdown(wait=False)
        except SchedulerNotRunningError:
            pass

    def shutdown(self):
        logger.info(_("Shutting down scheduler"))
        try:
            self._scheduler.shutdown()
        except SchedulerNotRunningError:  # pragma: no cover
            pass

    def _handler(self, signum, frame):  # pragma: no cover
        logger.error(_("Signal handler called with signal %s"), signum)
        try:
            self._scheduler.shutdown(wait=False)
        except SchedulerNotRunningError:
            pass
        try:
            parent_id = os.getpid()
            for child in psutil.Process(parent_id).children(recursive=True):
                child.kill()
        except psutil.Error:
            pass
        sys.exit(1)

    def start(self, paused: bool = False):
        logger.debug(_("Starting scheduler, paused=%s"), paused)
        self._scheduler.start(paused)
        if threading.current_thread() is threading.main_thread():
            signal.signal(signal.SIGINT, self._handler)

    def resume(self):
        logger.debug(_("Resuming scheduler"))
        self._scheduler.resume()

    def add_job_once(
        self,
        job_id: str,
        job_fn: Callable,
        args: Optional[Sequence[Any]] = None,
        kwargs: Optional[Dict[str, Any]] = None,
    ):
        logger.debug(_("Adding immediate job %s"), job_id)
        self._scheduler.add_job(
            job_fn, args=args, kwargs=kwargs, id=job_id, jobstore="once"
        )

    def wait(self, job_ids: Iterable[str], poll: float = 0.2) -> Dict[str, Any]:
        """Wait until every job in job_ids has finished and return their values.

        Raises
        ------
        JobFailed
            If any job raised an exception.
        """
        pending = set(job_ids)
        while True:
            with self._lock:
                pending -= set(self._results) | set(self._errors)
            if not pending:
                break
            time.sleep(poll)
        if self._errors:
            job_id, exc = sorted(self._errors.items())[0]
            raise JobFailed("{}: {!r}".format(job_id, exc))
        return dict(self._results)
