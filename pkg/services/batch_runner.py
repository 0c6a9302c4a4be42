import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Dict, List, Tuple


class BatchRunner:
    """批量任务执行器：jobs > 1 时使用进程池，结果按添加顺序返回"""

    def __init__(self, jobs: int = 1):
        if jobs < 1:
            raise ValueError(f"并行进程数必须 ≥ 1: {jobs}")
        self.jobs_count = jobs
        self.logger = logging.getLogger(__name__)
        self.jobs: Dict[str, Tuple[Callable[..., Any], tuple, dict]] = {}

    def add_job(self, func: Callable[..., Any], *args, job_id: str = "", **kwargs) -> str:
        """添加任务（func 与参数需可被 pickle）"""
        if not job_id:
            job_id = f"job_{len(self.jobs)}"
        self.jobs[job_id] = (func, args, kwargs)
        self.logger.debug(f"添加批量任务: {job_id}")
        return job_id

    def remove_job(self, job_id: str):
        if job_id in self.jobs:
            del self.jobs[job_id]
            self.logger.debug(f"移除批量任务: {job_id}")

    def run_all(self) -> List[Tuple[str, Any]]:
        """执行全部任务，返回 [(job_id, 结果)]"""
        self.logger.info(f"开始执行 {len(self.jobs)} 个批量任务，并行进程数 {self.jobs_count}")
        results = []
        if self.jobs_count == 1 or len(self.jobs) <= 1:
            for job_id, (func, args, kwargs) in self.jobs.items():
                try:
                    results.append((job_id, func(*args, **kwargs)))
                except Exception as e:
                    self.logger.error(f"批量任务 {job_id} 失败: {e}")
                    results.append((job_id, e))
            return results

        with ProcessPoolExecutor(max_workers=self.jobs_count) as pool:
            futures = [(job_id, pool.submit(func, *args, **kwargs))
                       for job_id, (func, args, kwargs) in self.jobs.items()]
            for job_id, future in futures:
                try:
                    results.append((job_id, future.result()))
                except Exception as e:
                    self.logger.error(f"批量任务 {job_id} 失败: {e}")
                    results.append((job_id, e))
        return results
