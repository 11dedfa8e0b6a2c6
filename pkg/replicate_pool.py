import logging
import os
from queue import Queue
from threading import Event, Lock, Thread

from defaults_resolver import DefaultsResolver


class ReplicatePool:
    """Runs independent jobs on worker threads and returns results in job order."""

    N_WORKER_THREADS = 4
    WORKER_STOP_SYMBOL = "--STOP--"

    def __init__(self, task, n_threads=None):
        self.task = task
        self.logger = logging.getLogger("ReplicatePool")
        self.n_threads = n_threads or DefaultsResolver().run("worker_threads") or self.N_WORKER_THREADS
        self.parse_conf(os.environ)
        self.__results = {}
        self.__failures = {}
        self.__lock = Lock()
        self.__abort = Event()

    def parse_conf(self, conf_as_dict):
        if "RECURWEIGHT_THREADS" in conf_as_dict:
            cap = int(conf_as_dict["RECURWEIGHT_THREADS"])
            if cap < 1:
                raise ValueError("RECURWEIGHT_THREADS must be at least 1. Given {0}".format(cap))
            self.n_threads = min(self.n_threads, cap)
        if self.n_threads < 1:
            raise ValueError("Worker count must be at least 1. Given {0}".format(self.n_threads))

    def run(self, jobs):
        jobs = list(jobs)
        self.__results = {}
        self.__failures = {}
        self.__abort.clear()
        job_queue = Queue()
        for index, job in enumerate(jobs):
            job_queue.put((index, job))
        workers = []
        for _ in range(min(self.n_threads, len(jobs))):
            worker = Thread(target=self.__worker_loop, args=(job_queue,))
            worker.start()
            workers.append(worker)
            job_queue.put(self.WORKER_STOP_SYMBOL)
        self.logger.debug("Started %d workers for %d jobs" % (len(workers), len(jobs)))
        for worker in workers:
            worker.join()
        if self.__failures:
            # lowest index first, whatever the schedule
            raise self.__failures[min(self.__failures)]
        return [self.__results[index] for index in range(len(jobs))]

    def __worker_loop(self, job_queue):
        item = job_queue.get()
        while item != self.WORKER_STOP_SYMBOL:
            index, job = item
            if not self.__abort.is_set():
                self.__run_job(index, job)
            item = job_queue.get()

    def __run_job(self, index, job):
        try:
            result = self.task(job)
        except Exception as error:
            self.logger.error("Job %d raised %s: %s" % (index, type(error).__name__, error))
            with self.__lock:
                self.__failures[index] = error
            self.__abort.set()
            return
        with self.__lock:
            self.__results[index] = result
