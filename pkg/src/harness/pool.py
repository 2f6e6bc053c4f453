import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, List, Sequence

import numpy as np

logger = logging.getLogger("harness.pool")


def trial_seeds(master: int, trials: int) -> List[np.random.SeedSequence]:
    """Independent child streams of the master seed, one per trial index."""
    return np.random.SeedSequence(master).spawn(trials)


def _run_one(fn: Callable, task):
    return fn(task)


def run_trials(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Run fn over tasks and return the results in task order.

    fn must be a module-level function so it pickles into worker processes.
    The first task that raises is logged, the tasks not yet started are
    cancelled, and the exception propagates to the caller.
    """
    results = [None] * len(tasks)
    if not tasks:
        return results
    done = 0
    step = max(1, len(tasks) // 10)
    if workers <= 1 or len(tasks) == 1:
        for i, task in enumerate(tasks):
            try:
                results[i] = fn(task)
            except Exception:
                logger.exception(f"trial {i} failed")
                raise
            done += 1
            if done % step == 0 or done == len(tasks):
                logger.info(f"{done}/{len(tasks)} trials finished")
        return results
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as exe:
        futures = {exe.submit(_run_one, fn, task): i for i, task in enumerate(tasks)}
        for fut in as_completed(futures):
            i = futures[fut]
            try:
                results[i] = fut.result()
            except Exception:
                logger.exception(f"trial {i} failed")
                for pending in futures:
                    pending.cancel()
                raise
            done += 1
            if done % step == 0 or done == len(tasks):
                logger.info(f"{done}/{len(tasks)} trials finished")
    return results
