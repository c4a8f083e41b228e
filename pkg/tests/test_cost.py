import json

import pytest

from fpsearch.cost import (
    REFERENCE_DB_SIZE,
    PlatformSpec,
    cost_report,
    kernel_bandwidth,
    max_kernels,
    throughput_qps,
    topk_report,
)
from fpsearch.errors import FoldError, ParameterError

SPEC = PlatformSpec()


class TestBandwidth:
    def test_usable_bandwidth_is_capped(self):
        assert SPEC.usable_bandwidth_GBs == 410.0
        assert PlatformSpec(bandwidth_cap_GBs=1000).usable_bandwidth_GBs == pytest.approx(414.0)

    @pytest.mark.parametrize("m, gbs", [(1, 57.6), (2, 28.8), (4, 14.4), (1024, 0.05625)])
    def test_kernel_bandwidth(self, m, gbs):
        assert kernel_bandwidth(SPEC, m) == pytest.approx(gbs, rel=1e-12)

    @pytest.mark.parametrize("m, kernels", [(1, 7), (2, 14), (4, 28), (8, 56)])
    def test_max_kernels(self, m, kernels):
        assert max_kernels(SPEC, m) == kernels

    def test_fold_must_divide(self):
        with pytest.raises(FoldError):
            kernel_bandwidth(SPEC, 3)

    @pytest.mark.parametrize("kwargs", [dict(efficiency=0), dict(efficiency=1.2), dict(kernel_freq_Hz=0)])
    def test_invalid_platform(self, kwargs):
        with pytest.raises(ParameterError):
            PlatformSpec(**kwargs)


class TestThroughput:
    def test_unpruned_database(self):
        assert throughput_qps(SPEC, REFERENCE_DB_SIZE) == pytest.approx(7 * 450e6 / 1_924_000)
        assert throughput_qps(SPEC, REFERENCE_DB_SIZE) == pytest.approx(1637.2, abs=0.05)

    def test_pruning_scales_qps(self):
        base = throughput_qps(SPEC, REFERENCE_DB_SIZE)
        assert throughput_qps(SPEC, REFERENCE_DB_SIZE, pruned_fraction=0.875) == pytest.approx(8 * base)

    def test_explicit_kernels(self):
        assert throughput_qps(SPEC, 450, kernels=1) == pytest.approx(1e6)

    @pytest.mark.parametrize("kwargs", [dict(db_size=0), dict(pruned_fraction=1.0), dict(pruned_fraction=-0.1)])
    def test_invalid(self, kwargs):
        args = dict(db_size=100, pruned_fraction=0.0) | kwargs
        with pytest.raises(ParameterError):
            throughput_qps(SPEC, **args)


class TestReports:
    def test_report_fields(self):
        r = cost_report(SPEC, 1)
        assert json.loads(r.to_json()) == {
            "m": 1, "kernel_GBs": pytest.approx(57.6), "kernels": 7,
            "qps": pytest.approx(1637.214, abs=1e-3), "feasible": True,
        }

    def test_infeasible_when_kernel_exceeds_bandwidth(self):
        r = cost_report(PlatformSpec(bandwidth_cap_GBs=50.0), 1)
        assert r.kernels == 0 and not r.feasible and r.qps == 0.0

    def test_topk_report(self):
        rep = topk_report(16, 1000)
        assert rep == {"k": 16, "merge_comparators": 5, "merge_fifo_capacity": 36,
                       "merge_latency_cycles": 1004, "pq_comparators": 16}
