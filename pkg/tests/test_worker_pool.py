# tests/test_worker_pool.py
"""
Tests for the thread pool helpers and the run tracker

Tests:
1. run_ordered - results in task order for any jobs value, first error wins
2. translate_error - library errors map to toolkit categories
3. RunTracker - status table, failures sorted by task id

Run with: python tests/test_worker_pool.py
"""

import json
import os
import sys
import time

import numpy as np
import pytest
from pydantic import BaseModel, Field, ValidationError

# Add parent directory to path for imports
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from utils.errors import InvalidConfig, NoConvergence, ParseError, SingularGram
from utils.run_tracker import RunTracker
from utils.worker_pool import run_ordered, translate_error


# ============================================================================
# TEST DATA
# ============================================================================

class _Positive(BaseModel):
    value: float = Field(gt=0)


def slow_square(n):
    # later tasks finish first
    time.sleep(0.002 * (10 - n))
    return n * n


# ============================================================================
# TESTS
# ============================================================================

def test_run_ordered_keeps_task_order():
    tasks = list(range(10))
    expected = [n * n for n in tasks]
    assert run_ordered(slow_square, tasks, jobs=1) == expected
    assert run_ordered(slow_square, tasks, jobs=4) == expected


def test_run_ordered_raises_translated_error():
    def fail_on_three(n):
        if n == 3:
            raise np.linalg.LinAlgError("no convergence")
        return n

    for jobs in (1, 3):
        with pytest.raises(NoConvergence):
            run_ordered(fail_on_three, list(range(6)), jobs=jobs)


def test_translate_error_categories():
    singular = SingularGram("gram")
    assert translate_error(singular) is singular
    assert isinstance(translate_error(np.linalg.LinAlgError("x")), NoConvergence)

    try:
        _Positive(value=-1.0)
    except ValidationError as e:
        translated = translate_error(e)
    assert isinstance(translated, InvalidConfig)
    assert translated.message.startswith("value:")

    try:
        json.loads("{")
    except json.JSONDecodeError as e:
        assert isinstance(translate_error(e), ParseError)

    other = KeyError("k")
    assert translate_error(other) is other


def test_run_tracker_records_failures():
    tracker = RunTracker("cv")
    tracker.create_task("cell=1/fold=0", {"param1": 1.0})
    tracker.create_task("cell=0/fold=0", {"param1": 0.1})
    tracker.complete_task("cell=1/fold=0", 0.5)
    tracker.fail_task("cell=0/fold=0", SingularGram("singular {gram}"))

    assert tracker.get_task_status("cell=1/fold=0") == "completed"
    assert tracker.get_task_status("missing") is None
    failed = tracker.failed_tasks()
    assert [f["task_id"] for f in failed] == ["cell=0/fold=0"]
    assert failed[0]["error"] == "SingularGram: singular {gram}"
    assert tracker.summary() == {"pending": 0, "completed": 1, "failed": 1}


# ============================================================================
# MAIN
# ============================================================================

def main():
    print("\n" + "=" * 70)
    print("WORKER POOL TESTS")
    print("=" * 70)
    tests = [(name, fn) for name, fn in globals().items() if name.startswith("test_") and callable(fn)]
    for name, fn in tests:
        fn()
        print(f"  ✅ {name}")
    print(f"\n{len(tests)} tests passed")


if __name__ == "__main__":
    main()
