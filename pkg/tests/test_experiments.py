import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ntk_lab.errors import ConfigParse, DimensionMismatch, DomainError, UnknownScenario, UnknownTruth
from ntk_lab.experiments import (
    CSV_HEADER,
    SCENARIOS,
    RunRecord,
    default_config,
    dump_config,
    f_star,
    gen_equispaced,
    gen_parity3,
    gen_regression,
    load_config,
    parity3_labels,
    parse_config,
    read_csv,
    run,
    write_csv,
    write_summary,
)
from ntk_lab.experiments.data import KERNEL_MIX_CENTERS, KERNEL_MIX_WEIGHTS, corrupt
from ntk_lab.experiments.records import format_float, param_json
from ntk_lab.kernels import ntk1_eval
from ntk_lab.numerics import Rng


class TestGenerators:
    def test_equispaced(self):
        assert gen_equispaced(2).tolist() == [0.0, 1.0]
        assert gen_equispaced(3).tolist() == [0.0, 0.5, 1.0]
        x = gen_equispaced(4, 0.0, math.pi)
        assert np.min(np.diff(x)) == pytest.approx(math.pi / 3)
        assert x[-1] == math.pi

    def test_equispaced_domain(self):
        with pytest.raises(DomainError):
            gen_equispaced(1)
        with pytest.raises(DomainError):
            gen_equispaced(3, 1.0, 1.0)

    def test_truths(self):
        assert f_star("zero")(np.array([0.3, 0.9])).tolist() == [0.0, 0.0]
        assert f_star("sin_mix")(np.zeros((1, 4)))[0] == 0.0
        assert f_star("sin_mix")(np.full((1, 4), 0.5))[0] == pytest.approx(math.sin(1.0))
        expected = sum(c * ntk1_eval(0.5, z) for c, z in zip(KERNEL_MIX_WEIGHTS, KERNEL_MIX_CENTERS))
        assert f_star("kernel_mix")(np.array([0.5]))[0] == pytest.approx(expected, rel=1e-14)

    def test_unknown_truth(self):
        with pytest.raises(UnknownTruth):
            f_star("cubic")
        with pytest.raises(UnknownTruth):
            gen_regression([0.0], "cubic", 0.1, Rng(0))

    def test_kernel_mix_is_one_dimensional(self):
        with pytest.raises(DimensionMismatch):
            f_star("kernel_mix")(np.zeros((2, 2)))

    def test_noiseless_regression(self):
        x = gen_equispaced(9)
        data = gen_regression(x, "kernel_mix", 0.0, Rng(0))
        np.testing.assert_array_equal(data.y, f_star("kernel_mix")(x))
        assert data.sigma == 0.0 and data.f_star_id == "kernel_mix"

    def test_regression_deterministic(self):
        x = gen_equispaced(32)
        a, b = gen_regression(x, "sin_mix", 0.3, Rng(5)), gen_regression(x, "sin_mix", 0.3, Rng(5))
        np.testing.assert_array_equal(a.y, b.y)

    def test_noise_variance(self):
        x = gen_equispaced(128)
        data = gen_regression(x, "kernel_mix", 0.5, Rng(0))
        var = np.var(data.y - f_star("kernel_mix")(x), ddof=1)
        assert abs(var - 0.25) <= 0.2 * 0.25

    def test_noise_variance_ensemble(self):
        x = gen_equispaced(128)
        f = f_star("kernel_mix")(x)
        var = [np.var(gen_regression(x, "kernel_mix", 0.5, Rng(s)).y - f, ddof=1) for s in range(400)]
        assert np.mean(var) == pytest.approx(0.25, rel=0.02)

    def test_parity_labels(self):
        assert parity3_labels([0.1, 0.6, 0.7])[0] == 6
        assert parity3_labels([0.49, 0.49, 0.49])[0] == 0
        assert parity3_labels([0.99, 0.99, 0.99])[0] == 7
        assert parity3_labels([1.0, 1.0, 1.0])[0] == 7

    def test_parity_no_corruption(self):
        data = gen_parity3(200, Rng(1), 0.0)
        np.testing.assert_array_equal(data.y, parity3_labels(data.x))
        assert data.x.shape == (200, 3) and np.all((data.x >= 0) & (data.x < 1))

    def test_parity_corruption_rate(self):
        data = gen_parity3(20_000, Rng(2), 0.6)
        changed = np.mean(data.y != parity3_labels(data.x))
        assert changed == pytest.approx(0.6 * 7 / 8, abs=0.02)
        assert set(np.unique(data.y)) <= set(range(8))

    @settings(max_examples=40, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 2**32 - 1))
    def test_corruption_nests(self, p1, p2, seed):
        lo, hi = sorted((p1, p2))
        rng = np.random.default_rng(seed)
        clean = rng.integers(0, 8, 50).astype(float)
        coins, draws = rng.uniform(size=50), rng.integers(0, 8, 50).astype(float)
        a, b = corrupt(clean, lo, coins, draws), corrupt(clean, hi, coins, draws)
        assert set(np.flatnonzero(coins < lo)) <= set(np.flatnonzero(coins < hi))
        np.testing.assert_array_equal(a[coins >= hi], clean[coins >= hi])
        np.testing.assert_array_equal(b[coins < hi], draws[coins < hi])


class TestConfig:
    def test_defaults_exist(self):
        for name in SCENARIOS:
            assert default_config(name).name == name

    def test_round_trip(self):
        for name in SCENARIOS:
            cfg = default_config(name, seed=2**64 - 1)
            assert parse_config(dump_config(cfg)) == cfg

    def test_grammar(self):
        text = "# a comment\nname = edr\n\nalpha_list = 1, 9/7   # two values\nj_max = 12\nsigma = 0.5pi\n"
        cfg = parse_config(text)
        assert cfg.alpha_list == (1.0, 9 / 7) and cfg.j_max == 12
        assert cfg.sigma == pytest.approx(0.5 * math.pi)

    def test_order_insensitive(self):
        assert parse_config("seed = 3\nname = min_eig\n") == parse_config("name = min_eig\nseed = 3\n")

    def test_name_from_caller(self):
        assert parse_config("seed = 4\n", name="sandwich").name == "sandwich"
        with pytest.raises(ConfigParse):
            parse_config("name = edr\n", name="sandwich")
        with pytest.raises(ConfigParse):
            parse_config("seed = 4\n")

    @pytest.mark.parametrize(
        "text, line",
        [
            ("name = edr\nbogus = 1\n", 2),
            ("name = edr\nseed = 1\nseed = 2\n", 3),
            ("name = edr\n\n\nj_max = twelve\n", 4),
            ("name = edr\nthis line has no equals\n", 2),
            ("name = edr\n# c\ncorruption_p_list = 0.2, 1.5\n", 3),
            ("name = edr\nn_list =\n", 2),
        ],
    )
    def test_errors_carry_line(self, text, line):
        with pytest.raises(ConfigParse) as err:
            parse_config(text)
        assert err.value.line == line
        assert f"line {line}" in str(err.value)

    def test_unknown_scenario(self):
        with pytest.raises(UnknownScenario):
            parse_config("name = figure9\n")
        with pytest.raises(UnknownScenario):
            default_config("figure9")

    def test_invariants(self):
        with pytest.raises(ValueError):
            default_config("min_eig", n_list=())
        with pytest.raises(ValueError):
            default_config("stopping_rules", corruption_p_list=(-0.1,))

    def test_load(self, tmp_path):
        path = tmp_path / "c.cfg"
        path.write_text("name = interp_gap\nn_list = 100, 200\n")
        assert load_config(path).n_list == (100, 200)


class TestRecords:
    def test_header_only(self, tmp_path):
        path = write_csv([], tmp_path / "empty.csv")
        assert path.read_text() == ",".join(CSV_HEADER) + "\n"
        assert read_csv(path) == []

    def test_float_round_trip(self, tmp_path):
        value = 2 / math.pi**3
        rec = RunRecord("edr", {"j": 2, "alpha": 1.0}, "lambda", value, 1, 0.5)
        back = read_csv(write_csv([rec], tmp_path / "r.csv"))[0]
        assert back == rec
        text = format_float(value)
        assert float(text) == value
        assert len(text.lstrip("0.").replace(".", "").split("e")[0]) == 17

    def test_special_values(self):
        assert format_float(float("inf")) == "inf"
        assert format_float(float("nan")) == "nan"
        assert float(format_float(0.1)) == 0.1

    @settings(max_examples=200, deadline=None)
    @given(st.floats(allow_nan=False, allow_infinity=False))
    def test_format_round_trip(self, x):
        assert float(format_float(x)) == x

    def test_param_json_stable(self):
        assert param_json({"b": np.int64(2), "a": (1.0, np.float64(0.5))}) == '{"a":[1.0,0.5],"b":2}'

    def test_summary(self, tmp_path):
        path = write_summary({"pass": np.bool_(True), "slope": np.float64(-2.0)}, tmp_path / "s.json")
        assert '"pass": true' in path.read_text()


def _strip_wall(path):
    rows = path.read_text().splitlines()
    return [row.rsplit(",", 1)[0] for row in rows]


class TestRun:
    def test_min_eig_small(self):
        result = run(default_config("min_eig", n_list=(8, 16, 32)))
        assert result.summary["pass"]
        assert result.summary["k1_lower_ok"] and result.summary["k1_upper_ok"]
        assert len(result.values("lambda_min_g1")) == 3

    def test_edr_transcendental_values(self):
        result = run(default_config("edr", alpha_list=(1.0,), j_max=10, grid_n=400))
        lam = dict(zip([r.params["j"] for r in result.rows("lambda")], result.values("lambda")))
        assert lam[2] == pytest.approx(2 / math.pi**3, rel=1e-12)
        assert lam[4] == pytest.approx(2 / (9 * math.pi**3), rel=1e-12)

    def test_determinism_and_threads(self, tmp_path):
        cfg = default_config("sandwich", seeds=6, seed=42)
        a = write_csv(run(cfg, threads=1).records, tmp_path / "a.csv")
        b = write_csv(run(cfg, threads=1).records, tmp_path / "b.csv")
        c = write_csv(run(cfg, threads=3).records, tmp_path / "c.csv")
        assert _strip_wall(a) == _strip_wall(b) == _strip_wall(c)

    def test_seed_changes_output(self, tmp_path):
        a = run(default_config("interp_gap", n_list=(100, 200), seed=1))
        b = run(default_config("interp_gap", n_list=(100, 200), seed=2))
        assert a.values("sup_gap") != b.values("sup_gap")

    def test_summary_metadata(self):
        result = run(default_config("uniform_kernel", m_list=(16, 64), seeds=2, grid_n=16))
        assert result.summary["scenario"] == "uniform_kernel" and result.summary["seed"] == 0
        assert all(r.wall_time_ms >= 0 for r in result.records)

    def test_stopping_rules_small(self):
        cfg = default_config(
            "stopping_rules", n_list=(24,), m_list=(32,), seeds=2, corruption_p_list=(0.0, 0.5),
            max_steps=20_000, n_test=64, eval_every=50,
        )
        s = run(cfg).summary
        assert set(s) >= {"median_steps_to_label_zero", "steps_monotone", "gap_monotone_majority", "pass"}
        assert s["time_budget_exhausted"] is False
        assert len(s["acc_gap"]) == 2 and all(len(g) == 2 for g in s["acc_gap"])
        assert all(0.0 <= g <= 1.0 for row in s["acc_gap"] for g in row)

    def test_time_budget(self):
        cfg = default_config("stopping_rules", n_list=(24,), m_list=(32,), seeds=1, max_steps=10**6,
                             n_test=16, time_budget_s=0.2)
        res = run(cfg)
        assert res.summary["time_budget_exhausted"] and not res.summary["pass"]
        assert res.summary["elapsed_s"] < 10
        assert math.isinf(max(res.values("steps_to_label_zero")))
