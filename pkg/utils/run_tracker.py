# utils/run_tracker.py
"""
Run Tracker for cross-validation tasks
Records the status of every (cell, fold) fit so failed cells can be
reported alongside the score table
"""

import threading
from typing import Dict, List, Optional

from utils.logger import zsl_logger


class RunTracker:
    """Thread-safe status table for independent solver tasks"""

    def __init__(self, name: str = "runs"):
        self.name = name
        self.tasks: Dict[str, dict] = {}
        self._lock = threading.Lock()

    def create_task(self, task_id: str, params: Optional[dict] = None) -> str:
        """
        Register a pending task

        Args:
            task_id: Unique, deterministic identifier (e.g. "cell=3/fold=1")
            params: Parameters of the task, kept for reporting

        Returns:
            task_id
        """
        with self._lock:
            self.tasks[task_id] = {
                'status': 'pending',
                'params': params or {},
                'result': None,
                'error': None,
            }
        return task_id

    def complete_task(self, task_id: str, result: float):
        """Mark task as complete with its score"""
        with self._lock:
            if task_id in self.tasks:
                self.tasks[task_id]['status'] = 'completed'
                self.tasks[task_id]['result'] = result

    def fail_task(self, task_id: str, error: Exception):
        """
        Mark task as failed

        Args:
            task_id: Task identifier
            error: The exception that ended the task
        """
        category = getattr(error, "category", type(error).__name__)
        with self._lock:
            if task_id in self.tasks:
                self.tasks[task_id]['status'] = 'failed'
                self.tasks[task_id]['error'] = f"{category}: {error}"
        # error text may contain braces; bound context is never formatted
        zsl_logger.logger.bind(task_id=task_id, error_type=category).warning(
            f"⚠️ {self.name}: task {task_id} failed: {category}: {error}"
        )

    def get_task_status(self, task_id: str) -> Optional[str]:
        task = self.tasks.get(task_id)
        return task['status'] if task else None

    def failed_tasks(self) -> List[dict]:
        """Failed tasks in id order"""
        with self._lock:
            return [
                {'task_id': task_id, 'params': task['params'], 'error': task['error']}
                for task_id, task in sorted(self.tasks.items())
                if task['status'] == 'failed'
            ]

    def summary(self) -> Dict[str, int]:
        with self._lock:
            counts = {'pending': 0, 'completed': 0, 'failed': 0}
            for task in self.tasks.values():
                counts[task['status']] += 1
            return counts
