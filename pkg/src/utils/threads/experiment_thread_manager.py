import logging
import queue
import threading
from typing import Any, Callable, Optional

RowJob = Callable[[], list[dict[str, Any]]]
FailureRows = Callable[[RowJob, Exception], list[dict[str, Any]]]


class ExperimentThreadManager:
    """
    Runs experiment row jobs on a pool of worker threads.

    Workers pull jobs from the inbound queue and push finished rows to the outbound
    queue; a single collector thread drains it, so rows are appended in one place only.
    A job that raises is logged; its rows come from `on_failure` when one is given,
    otherwise it contributes none.
    """

    def __init__(self, workers: int = 1, on_failure: Optional[FailureRows] = None):
        self.workers = max(int(workers), 1)
        self.on_failure = on_failure
        self.inbound_queue: queue.Queue = queue.Queue()
        self.outbound_queue: queue.Queue = queue.Queue()
        self.threads: list[threading.Thread] = []
        self.collector: Optional[threading.Thread] = None
        self.rows: list[dict[str, Any]] = []
        self.rows_lock = threading.Lock()

    def start(self):
        if self.threads:
            logging.warning("ExperimentThreadManager is already running.")
            return
        self.collector = threading.Thread(target=self._collect, daemon=True, name="ExperimentCollector")
        self.collector.start()
        for index in range(self.workers):
            thread = threading.Thread(target=self._run, daemon=True, name=f"ExperimentWorker-{index}")
            thread.start()
            self.threads.append(thread)
        logging.debug(f"ExperimentThreadManager started {self.workers} workers.")

    def submit(self, job: RowJob):
        self.inbound_queue.put(job)

    def _run(self):
        while True:
            job = self.inbound_queue.get()
            try:
                if job is None:
                    return
                try:
                    self.outbound_queue.put(job())
                except Exception as e:
                    logging.error(f"Experiment job failed outside its row handler: {e}")
                    if self.on_failure is not None:
                        self.outbound_queue.put(self.on_failure(job, e))
            finally:
                self.inbound_queue.task_done()

    def _collect(self):
        while True:
            rows = self.outbound_queue.get()
            if rows is None:
                return
            with self.rows_lock:
                self.rows.extend(rows)

    def stop(self):
        """Wait for every submitted job, then stop the workers and the collector."""
        if not self.threads:
            logging.warning("ExperimentThreadManager is not running.")
            return
        self.inbound_queue.join()
        for _ in self.threads:
            self.inbound_queue.put(None)
        for thread in self.threads:
            thread.join()
        self.threads = []
        self.outbound_queue.put(None)
        self.collector.join()
        self.collector = None
        logging.debug("ExperimentThreadManager stopped.")

    def run_all(self, jobs: list[RowJob]) -> list[dict[str, Any]]:
        """Run every job and return the collected rows in arrival order."""
        self.start()
        for job in jobs:
            self.submit(job)
        self.stop()
        with self.rows_lock:
            rows, self.rows = self.rows, []
        return rows
