from gnlab.parallel import n_workers, pmap


def _sq(x):
    return x * x


def test_pmap_preserves_order():
    assert pmap(_sq, range(7), 2) == [x * x for x in range(7)]
    assert pmap(_sq, [3], 1) == [9]


def test_worker_env(monkeypatch):
    monkeypatch.setenv("GNLAB_WORKERS", "3")
    assert n_workers() == 3
