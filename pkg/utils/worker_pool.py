# utils/worker_pool.py
"""
Thread pool utilities for independent solver runs

Cross-validation folds and grid cells are independent fits on immutable
inputs. The heavy work happens inside LAPACK, which releases the GIL, so a
pool of real OS threads gives real parallelism without pickling matrices
into worker processes.

Key utilities:
- run_ordered: map a function over tasks, results in submission order
- translate_error: single place mapping raw library errors to ZslError
"""

import concurrent.futures
import json
from typing import Callable, List, Sequence, TypeVar

import numpy as np
import scipy.linalg
from pydantic import ValidationError

from utils.errors import InvalidConfig, NoConvergence, ParseError, ZslError

T = TypeVar('T')
R = TypeVar('R')


def translate_error(e: Exception) -> Exception:
    """
    Translate raw library exceptions into toolkit errors.

    Single place to map numpy/scipy/pydantic/json failures to categories
    the CLI can print. Already-translated errors pass through unchanged.
    """
    if isinstance(e, ZslError):
        return e

    if isinstance(e, (scipy.linalg.LinAlgError, np.linalg.LinAlgError)):
        return NoConvergence(f"linear algebra failure: {e}")

    if isinstance(e, ValidationError):
        first = e.errors()[0] if e.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ()))
        return InvalidConfig(f"{loc}: {first.get('msg', str(e))}")

    if isinstance(e, json.JSONDecodeError):
        return ParseError(e.msg, line=e.lineno)

    return e


def run_ordered(fn: Callable[[T], R], tasks: Sequence[T], jobs: int = 1) -> List[R]:
    """
    Run fn over tasks and return results in task order.

    Completion order never affects the output, so reductions over the
    returned list are deterministic for any jobs value.

    Args:
        fn: Callable applied to each task
        tasks: Task inputs
        jobs: Number of worker threads; 1 runs inline

    Returns:
        List of results aligned with tasks

    Raises:
        The first failing task's error (translated), in task order
    """
    if jobs <= 1 or len(tasks) <= 1:
        results = []
        for task in tasks:
            try:
                results.append(fn(task))
            except Exception as e:
                raise translate_error(e) from e
        return results

    with concurrent.futures.ThreadPoolExecutor(
        max_workers=jobs,
        thread_name_prefix="zsl_worker"
    ) as executor:
        futures = [executor.submit(fn, task) for task in tasks]
        results = []
        for future in futures:
            try:
                results.append(future.result())
            except Exception as e:
                raise translate_error(e) from e
        return results
