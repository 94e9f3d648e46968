from __future__ import annotations

from qlsreg.montecarlo import Study2Config
from qlsreg.parsl import LocalConfig
from qlsreg.parsl import ThreadConfig
from qlsreg.parsl import compute_config_for
from qlsreg.parsl import map_ordered


def test_compute_config_for_workers(tmp_path):
    assert compute_config_for(1) is None
    backend = compute_config_for(4)
    assert isinstance(backend, ThreadConfig)
    assert backend.max_threads == 4
    config = backend.get_config(tmp_path / 'parsl')
    assert config.executors[0].label == 'threads'


def test_backend_selected_by_name():
    cfg = Study2Config(compute_config={'name': 'local', 'max_workers': 2})
    assert isinstance(cfg.compute_config, LocalConfig)
    assert cfg.compute_config.max_workers == 2


def test_serial_map_keeps_order(tmp_path):
    squares = map_ordered(lambda x: x * x, [3, 1, 2], None, tmp_path)
    assert squares == [9, 1, 4]


def test_thread_map_keeps_order(tmp_path):
    backend = ThreadConfig(max_threads=2)
    squares = map_ordered(abs, [-3, 1, -2], backend, tmp_path / 'parsl')
    assert squares == [3, 1, 2]
