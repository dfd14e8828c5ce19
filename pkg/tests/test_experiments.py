import math

import numpy as np
import pytest

from spinbath.dynamics import integrate
from spinbath.experiments import (DEFAULT_ETA, METHOD_TAGS,
                                  averaged_steady_state, ensemble_average,
                                  equilibration_time,
                                  equivalent_classical_temperature,
                                  method_config, statphys_oracle,
                                  steady_state_sz, temperature_sweep)
from spinbath.model import ParameterError, SET1, SpinSystem, build_unit_frame

FRAME = build_unit_frame(10.0, -1.76e11, 1)
FRAME200 = build_unit_frame(10.0, -1.76e11, 200)


class TestStatphysOracle:
    def test_zero_temperature_saturates(self):
        assert statphys_oracle(1, 0.0, FRAME) == 1.0

    def test_at_equivalent_classical_temperature(self):
        t_cl = equivalent_classical_temperature(FRAME)
        # argument becomes exactly n at T_cl
        assert statphys_oracle(1, t_cl, FRAME) == pytest.approx(
            1.0 / math.tanh(1.0) - 1.0, rel=1e-9)
        assert statphys_oracle(5, t_cl, FRAME) == pytest.approx(
            1.0 / math.tanh(5.0) - 0.2, rel=1e-9)
        assert statphys_oracle(5, t_cl, FRAME) == pytest.approx(0.800, abs=1e-3)
        assert statphys_oracle(200, t_cl, FRAME) == pytest.approx(0.995, abs=1e-3)

    def test_monotone_decreasing_in_temperature(self):
        temps = [0.0, 0.5, 2.0, 10.0, 50.0, 300.0]
        vals = [statphys_oracle(1, t, FRAME) for t in temps]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert all(0.0 < v <= 1.0 for v in vals)

    def test_small_argument_series(self):
        assert statphys_oracle(1, 1e9, FRAME) == pytest.approx(
            FRAME.boltzmann_argument(1e9) / 3.0, rel=1e-6)


class TestEquivalentClassicalTemperature:
    def test_ten_tesla_value(self):
        assert equivalent_classical_temperature(FRAME) == pytest.approx(6.7, abs=0.1)

    def test_linear_in_field(self):
        t10 = equivalent_classical_temperature(FRAME)
        t20 = equivalent_classical_temperature(build_unit_frame(20.0, -1.76e11, 1))
        t1 = equivalent_classical_temperature(build_unit_frame(1.0, -1.76e11, 1))
        assert t20 == pytest.approx(2 * t10, rel=1e-12)
        assert t1 == pytest.approx(t10 / 10, rel=1e-12)


class TestEnsembleAverage:
    def test_zero_noise_ensemble_has_zero_spread(self):
        cfg = method_config("llg-classical", FRAME, 0.0, t_max=30.0)
        res = ensemble_average(cfg, 8, base_seed=1)
        assert np.all(res.sz_stderr == 0.0)
        single = integrate(SpinSystem.single((-1, 0, 0)), cfg, seed=0)
        np.testing.assert_allclose(res.sz_mean, single.sz(), atol=1e-14)

    def test_requires_at_least_two_members(self):
        cfg = method_config("llg-classical", FRAME, 1.0, t_max=30.0)
        with pytest.raises(ParameterError):
            ensemble_average(cfg, 1)

    def test_stderr_scales_as_inverse_sqrt_members(self):
        cfg = method_config("llg-classical", FRAME, 10.0, t_max=30.0)
        small = ensemble_average(cfg, 125, base_seed=7)
        large = ensemble_average(cfg, 500, base_seed=7)
        late = slice(len(small.times) // 2, None)
        ratio = small.sz_stderr[late].mean() / large.sz_stderr[late].mean()
        assert ratio == pytest.approx(2.0, rel=0.2)

    def test_workers_do_not_change_the_result(self):
        cfg = method_config("llg-classical", FRAME, 10.0, t_max=30.0)
        a = ensemble_average(cfg, 6, base_seed=3, workers=1)
        b = ensemble_average(cfg, 6, base_seed=3, workers=2)
        assert np.array_equal(a.sz_mean, b.sz_mean)

    def test_classical_relaxation_plateau(self):
        cfg = method_config("llg-classical", FRAME, 1.0, t_max=300.0)
        res = ensemble_average(cfg, 100, base_seed=11)
        plateau = res.sz_mean[3 * len(res.sz_mean) // 4:].mean()
        assert plateau == pytest.approx(statphys_oracle(1, 1.0, FRAME), abs=0.05)

    def test_quantum_noise_depletes_the_plateau(self):
        cfg = method_config("llg-quantum", FRAME, 1.0, t_max=300.0)
        res = ensemble_average(cfg, 100, base_seed=12)
        plateau = res.sz_mean[3 * len(res.sz_mean) // 4:].mean()
        assert 0.18 < plateau < 0.38


class TestSteadyState:
    def test_matches_oracle_with_replica_averaging(self):
        cfg = method_config("llg-classical", FRAME, 1.0, t_max=2 * math.pi * 500)
        value, err = averaged_steady_state(cfg, 8, base_seed=5)
        assert value == pytest.approx(statphys_oracle(1, 1.0, FRAME), abs=3 * err)

    def test_window_must_hold_ten_blocks(self):
        cfg = method_config("llg-classical", FRAME, 1.0, t_max=300.0)
        with pytest.raises(ParameterError):
            steady_state_sz(cfg)  # 75-unit window < 10 blocks of 50

    def test_deterministic_given_seed(self):
        cfg = method_config("llg-classical", FRAME, 10.0, t_max=2 * math.pi * 350)
        assert steady_state_sz(cfg, seed=9) == steady_state_sz(cfg, seed=9)


class TestEquilibrationTime:
    def test_identical_traces_give_identical_times(self):
        t = np.linspace(0.0, 100.0, 500)
        m = np.tanh(0.05 * t)
        assert equilibration_time(t, m) == equilibration_time(t, m.copy())

    def test_deterministic_decay_matches_tanh_law(self):
        cfg = method_config("llg-classical", FRAME, 0.0, t_max=400.0)
        res = ensemble_average(cfg, 2, base_seed=0)
        t_eq = equilibration_time(res.times, res.sz_mean, band=0.05)
        lam = DEFAULT_ETA / (1 + DEFAULT_ETA ** 2)
        plateau = np.tanh(lam * res.times[3 * len(res.times) // 4:]).mean()
        expect = math.atanh(0.95 * plateau) / lam
        assert t_eq == pytest.approx(expect, rel=0.1)

    def test_never_settling_trace_reports_final_time(self):
        t = np.linspace(0.0, 10.0, 200)
        m = np.sin(3.0 * t)  # oscillates forever around a zero plateau
        assert equilibration_time(t, m) == t[-1]

    def test_non_markovian_bath_equilibrates_faster(self):
        # band wide enough (10%) that the finite-ensemble noise of the mean
        # (sigma_z / sqrt(n) ~ 0.02 here) cannot masquerade as an excursion
        r = {}
        for method in ("lorentzian-set1", "lorentzian-set2"):
            cfg = method_config(method, FRAME200, 200.0, t_max=2 * math.pi * 48)
            res = ensemble_average(cfg, 60, base_seed=21)
            r[method] = equilibration_time(res.times, res.sz_mean, band=0.10)
        assert r["lorentzian-set2"] / r["lorentzian-set1"] < 0.8


class TestTemperatureSweep:
    def test_rescaled_curve_starts_at_unity(self):
        out = temperature_sweep(["llg-classical"], [0.0, 200.0], FRAME200,
                                t_max=2 * math.pi * 350, seed=3)
        assert out[0].rescaled[0] == 1.0
        assert out[0].sz_mean[0] == pytest.approx(1.0, abs=1e-6)

    def test_no_rescaling_without_zero_temperature(self):
        out = temperature_sweep(["llg-classical"], [1.0, 200.0], FRAME200,
                                t_max=2 * math.pi * 350, seed=3)
        assert out[0].rescaled is None

    def test_monotone_decrease_with_temperature(self):
        out = temperature_sweep(["llg-classical"], [1.0, 50.0, 200.0], FRAME200,
                                t_max=2 * math.pi * 500, seed=4, n_replicas=2)
        vals = out[0].sz_mean
        errs = out[0].sz_stderr
        assert vals[0] > vals[1] - 3 * (errs[0] + errs[1])
        assert vals[1] > vals[2] - 3 * (errs[1] + errs[2])
        assert vals[0] > vals[2]

    def test_quantum_method_is_monotone_in_temperature(self):
        out = temperature_sweep(["llg-quantum"], [0.0, 25.0, 200.0], FRAME,
                                t_max=2 * math.pi * 500, seed=9, n_replicas=4)[0]
        vals = out.sz_mean
        errs = out.sz_stderr
        assert vals[0] > vals[1] - 3 * (errs[0] + errs[1])
        assert vals[1] > vals[2] - 3 * (errs[1] + errs[2])
        assert vals[0] > vals[2]

    def test_quantum_statistics_flatten_the_rescaled_curve(self):
        temps = [0.0, 5.0]
        q = temperature_sweep(["llg-quantum"], temps, FRAME,
                              t_max=2 * math.pi * 500, seed=6, n_replicas=6)[0]
        c = temperature_sweep(["llg-classical"], temps, FRAME,
                              t_max=2 * math.pi * 500, seed=6, n_replicas=6)[0]
        assert q.rescaled[1] > c.rescaled[1] + 0.2

    def test_unsorted_or_negative_grids_rejected(self):
        with pytest.raises(ParameterError):
            temperature_sweep(["llg-classical"], [5.0, 1.0], FRAME)
        with pytest.raises(ParameterError):
            temperature_sweep(["llg-classical"], [-1.0, 1.0], FRAME)
        with pytest.raises(ParameterError):
            temperature_sweep(["llg-classical"], [], FRAME)

    def test_unknown_method_rejected(self):
        with pytest.raises(ParameterError):
            method_config("llg-heun", FRAME, 1.0)


def test_method_tags_cover_the_standard_matrix():
    kinds = {m: method_config(m, FRAME, 1.0).noise_kind for m in METHOD_TAGS}
    assert kinds == {
        "llg-classical": "classical-ohmic",
        "llg-quantum": "quantum-ohmic",
        "lorentzian-set1": "quantum-lorentzian",
        "lorentzian-set2": "quantum-lorentzian",
    }
    assert method_config("llg-classical", FRAME, 0.0).noise_kind is None
    assert isinstance(method_config("lorentzian-set1", FRAME, 1.0).bath,
                      type(SET1))
    assert method_config("llg-quantum", FRAME, 1.0).effective_cutoff == 10.0
