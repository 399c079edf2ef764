"""스레드 모듈.

스윕 지점과 시뮬레이션 궤적은 서로 독립이므로 스레드 풀에 나눠 실행합니다.
결과는 항상 입력 순서대로 모이므로 작업자 수가 출력에 영향을 주지 않습니다.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, List, Sequence


class ThreadPool:
    """입력 순서를 유지하는 스레드 풀."""

    def __init__(self, max_workers: int = 1, name: str = "ewsn") -> None:
        """
        Args:
            max_workers (int): 작업자 수. 1이면 호출한 스레드에서 순서대로 실행합니다.
            name (str): 작업자 스레드 이름 접두어.
        """
        if max_workers < 1:
            raise ValueError(f"max_workers는 1 이상이어야 합니다: {max_workers}")
        self.max_workers = max_workers
        self.name = name

    def execute(self, *, func: Callable[..., Any], items: Sequence[Dict[str, Any]]) -> List[Any]:
        """items의 각 키워드 인자 묶음으로 func를 호출하고 결과를 같은 순서로 돌려줍니다.

        작업 중 하나가 예외를 내면 그 예외가 그대로 전파됩니다.
        """
        workers = min(self.max_workers, len(items))
        if workers <= 1:
            return [func(**kwargs) for kwargs in items]
        with ThreadPoolExecutor(max_workers=workers, thread_name_prefix=self.name) as pool:
            futures = [pool.submit(func, **kwargs) for kwargs in items]
            return [future.result() for future in futures]
