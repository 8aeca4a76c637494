import pytest

import tpart


def test_benchmark_report():
    r = tpart.run_benchmark(variant="v3", warehouses=2, txns=40, clients=2, remote_prob=0.3, seed=3)
    assert r["schema_version"] == 1
    assert r["exit_code"] == 0
    assert r["audits"]["serializable"]
    assert r["metrics"]["committed"] + r["metrics"]["aborted"] == 40


def test_benchmark_deterministic():
    a = tpart.run_benchmark(txns=30, seed=7)
    b = tpart.run_benchmark(txns=30, seed=7)
    assert a == b


def test_bad_config_raises():
    with pytest.raises(tpart.EngineError):
        tpart.run_benchmark(clients=0)
    with pytest.raises(tpart.EngineError):
        tpart.run_benchmark(variant="v7")


def test_workload_and_deployment():
    stream = tpart.gen_workload(warehouses=2, txns=10, remote_prob=0.5, seed=4)
    assert len(stream) == 10
    w, d, c, items = stream[0]
    assert 1 <= w <= 2 and 5 <= len(items) <= 15

    dep = tpart.Deployment(variant="v2", warehouses=2, net_latency_us=100)
    out = dep.new_order(stream[0])
    assert out["committed"]
    assert float(out["total_pay"]) > 0
    for req in stream[1:]:
        dep.submit(req)
    m = dep.run_until_quiescent()
    assert m["committed"] == 10
    assert dep.check_consistency() == []
    assert dep.verify()


def test_variants_agree():
    stream = tpart.gen_workload(warehouses=2, txns=15, remote_prob=0.4, seed=8)
    pays, digests = [], []
    for v in ("v1", "v2", "v3"):
        dep = tpart.Deployment(variant=v, warehouses=2)
        pays.append([dep.new_order(r)["total_pay"] for r in stream])
        digests.append(dep.data_digest())
    assert pays[0] == pays[1] == pays[2]
    assert digests[0] == digests[1] == digests[2]


def test_placement():
    load = [10.0, 10.0]
    traffic = [[0.0, 0.0], [0.0, 0.0]]
    assert tpart.estimate_cost(load, traffic, [0, 1], alpha=1.0, beta=1.0) == 10.0
    assert tpart.advise_mapping(load, traffic, 2) == [0, 1]
    assert tpart.advise_mapping(load, traffic, 1, strategy="greedy") == [0, 0]
