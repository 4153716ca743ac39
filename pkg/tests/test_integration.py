"""Cross-module trajectory invariants checked on full simulated traces."""

import math

import numpy as np
import pytest

from tsgain.analysis import contraction_certificate
from tsgain.cli import _resolve_config_path
from tsgain.matfun import expc, sigma_decomposition
from tsgain.scenario import load_config, run_scenario


@pytest.fixture(scope="module")
def fig1():
    cfg = load_config(_resolve_config_path("fig1"))
    return cfg, run_scenario(cfg)


class TestBlockingTrajectory:
    @pytest.fixture(autouse=True)
    def _bind(self, fig1):
        self.cfg, self.result = fig1
        self.trace = self.result.trace
        self.plant = self.cfg.plant

    def test_gain_monotone_exactly(self):
        gains = self.trace.gains
        assert np.all(np.diff(gains) >= 0.0)

    def test_mu_bar_gain_product_constant(self):
        # the ceiling is inversely proportional to the gain along the run
        products = np.array([r.mu_bar * r.k for r in self.trace.records])
        assert np.max(np.abs(products - products[0])) <= 1e-12 * products[0]

    def test_siso_sampling_product_below_two(self):
        cb = float(self.plant.cb().reshape(()))
        for rec in self.trace.records:
            if rec.blocked:
                assert rec.mu * rec.k * cb < 2.0

    def test_applied_graininess_respects_ceiling(self):
        for rec in self.trace.records:
            if rec.blocked:
                assert rec.mu <= rec.mu_bar

    def test_certificate_positive_once_deviation_is_small(self):
        # past the point where the expc deviation drops under eps1, every
        # applied (k, mu) pair must carry a positive contraction margin;
        # on this trace the gain converges before that point, so the
        # trace part may be vacuous and a gain sweep covers the regime
        eps1 = self.cfg.policy.eps1
        a, b, c = self.plant.A, self.plant.B, self.plant.C

        def assert_certified(k, mu):
            cb_hat = c @ expc(mu * a) @ b
            assert contraction_certificate(cb_hat, k, mu).eps2 > 0.0

        for rec in self.trace.records:
            if rec.blocked and sigma_decomposition(a, rec.mu).norm < eps1:
                assert_certified(rec.k, rec.mu)
        checked = 0
        for k in np.geomspace(0.5, 1e4, 60):
            mu = 0.9 * (1.9 / k)  # the scenario's blocked graininess at gain k
            if sigma_decomposition(a, mu).norm < eps1:
                assert_certified(float(k), mu)
                checked += 1
        assert checked > 10

    def test_dense_output_identity(self):
        for rec in self.trace.records[:: max(1, len(self.trace) // 500)]:
            np.testing.assert_allclose(rec.y, self.plant.C @ rec.x, atol=1e-14)

    def test_blocks_alternate_with_continuous_runs(self):
        block_times = [r.t for r in self.trace.records if r.blocked]
        assert math.isclose(block_times[0], 1.0, rel_tol=1e-12)
        diffs = np.diff(block_times)
        # one second of continuous control plus the previous block length
        for gap, rec_mu in zip(diffs, (r.mu for r in self.trace.records if r.blocked)):
            assert math.isclose(gap, 1.0 + rec_mu, rel_tol=1e-9)

    def test_analyze_round_trip_on_blocked_trace(self, tmp_path, capsys):
        from tsgain.cli import main

        path = tmp_path / "fig1_trace.csv"
        self.trace.write_csv(path)
        assert main(["analyze", str(path)]) == 0
        out = capsys.readouterr().out
        metrics = dict(
            line.split(" = ") for line in out.strip().splitlines() if " = " in line
        )
        assert float(metrics["y_l2_tail_fraction"]) < 0.01
        assert float(metrics["trailing_k_variation"]) < 1e-3
        assert float(metrics["envelope_alpha"]) > 0
