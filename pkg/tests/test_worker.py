import threading
import time

import pytest

from oqs_eom.config import Config
from oqs_eom.worker import chunked, parallel_map


def test_results_keep_input_order():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return x * x

    assert parallel_map(slow_square, range(5), threads=4) == [0, 1, 4, 9, 16]


def test_serial_path_runs_on_caller_thread():
    caller = threading.get_ident()
    assert parallel_map(lambda _: threading.get_ident(), [1, 2, 3], threads=1) == [caller] * 3


def test_default_thread_count(monkeypatch):
    monkeypatch.setattr(Config, "THREADS", 1)
    assert parallel_map(str, [1, 2]) == ["1", "2"]


def test_worker_errors_propagate():
    def boom(x):
        if x == 2:
            raise RuntimeError("bad item")
        return x

    with pytest.raises(RuntimeError, match="bad item"):
        parallel_map(boom, [1, 2, 3], threads=2)


def test_empty_input():
    assert parallel_map(str, [], threads=4) == []


def test_chunked():
    assert chunked([1, 2, 3, 4, 5], 2) == [[1, 2], [3, 4], [5]]
    assert chunked([], 3) == []
