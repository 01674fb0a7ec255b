import json

import pytest

from stealth_attacks.cli import main


def write(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


class TestAttack:
    def test_relu_example(self, tmp_path, capsys):
        trig = write(tmp_path / "t.json", [0.8, 0.0])
        out = tmp_path / "a.json"
        code = main(["attack", "--trigger", trig, "--activation", "relu", "--delta", "1",
                     "--gamma", "0.5", "--out", str(out)])
        assert code == 0
        d = json.loads(out.read_text())
        assert d["kappa"] == pytest.approx(6.25, rel=1e-14)
        assert d["D"] == 1.0 and d["b"] == pytest.approx(3.0, rel=1e-14)
        assert d["activation"] == "relu"
        assert out.read_text().endswith("\n")
        assert "kappa=" in capsys.readouterr().err

    def test_sigmoid_needs_epsilon(self, tmp_path, capsys):
        trig = write(tmp_path / "t.json", [0.8, 0.0])
        code = main(["attack", "--trigger", trig, "--epsilon", "0", "--activation", "sigmoid"])
        assert code == 2
        assert "epsilon must be positive for sigmoid" in capsys.readouterr().err

    def test_random_trigger_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            assert main(["attack", "--trigger", "random", "--n", "8", "--seed", "7", "--out", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_random_trigger_needs_seed(self, capsys):
        assert main(["attack", "--trigger", "random", "--n", "8"]) == 2


class TestVerify:
    def make_attack(self, tmp_path, activation="relu", eps="0"):
        trig = write(tmp_path / "t.json", [0.0, 0.9])
        out = tmp_path / "a.json"
        assert main(["attack", "--trigger", trig, "--activation", activation, "--epsilon", eps,
                     "--gamma", "0.5", "--out", str(out)]) == 0
        return str(out)

    def test_separated(self, tmp_path):
        attack = self.make_attack(tmp_path)
        V = write(tmp_path / "v.json", [[0.5, 0.0], [0.3, -0.4]])
        out = tmp_path / "r.json"
        assert main(["verify", "--attack", attack, "--validation", V, "--out", str(out)]) == 0
        r = json.loads(out.read_text())
        assert set(r) >= {"max_validation_deviation", "trigger_shift", "eps_ok", "delta_ok", "separated"}
        assert r["separated"] and r["eps_ok"] and r["delta_ok"] and r["max_validation_deviation"] == 0.0

    def test_trigger_in_validation_set(self, tmp_path):
        attack = self.make_attack(tmp_path, "sigmoid", "0.01")
        V = write(tmp_path / "v.json", [[0.0, 0.9], [0.5, 0.0]])
        model = write(tmp_path / "m.json", {"center": [0.0, 0.0], "radius": 0.5})
        out = tmp_path / "r.json"
        assert main(["verify", "--attack", attack, "--validation", V, "--model", model, "--out", str(out)]) == 0
        r = json.loads(out.read_text())
        assert r["separated"] is False and r["eps_ok"] is False


class TestBounds:
    def test_theorem2(self, capsys):
        assert main(["bounds", "--which", "theorem2", "--M", "100", "--gamma", "0.9", "--n", "20",
                     "--format", "csv"]) == 0
        lines = capsys.readouterr().out.splitlines()
        assert lines[1].split(",")[-1] == "0.999216"

    def test_theorem1(self, capsys):
        assert main(["bounds", "--which", "theorem1", "--n", "50", "--eps-ratio", "0.1", "--format", "csv"]) == 0
        assert capsys.readouterr().out.splitlines()[1].split(",")[-1] == "0.994846"

    def test_critical_dimension(self, capsys):
        assert main(["bounds", "--which", "critical", "--nu", "0.5", "--C", "1", "--eps-ratio", "0.1",
                     "--format", "json"]) == 0
        assert json.loads(capsys.readouterr().out)[0]["value"] == 7

    def test_invalid_range(self, capsys):
        assert main(["bounds", "--which", "theorem2", "--gamma", "1.5"]) == 2
        assert main(["bounds", "--which", "theorem1", "--eps-ratio", "1.5"]) == 2


class TestExperiment:
    def test_empty_validation_set(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"experiment": "stealth_success", "n": 10, "M": 0,
                                          "trials": 500, "seed": 3})
        out = tmp_path / "r.json"
        assert main(["experiment", "--config", cfg, "--out", str(out)]) == 0
        assert json.loads(out.read_text())["verdict"] == "pass"

    def test_flags_equal_config(self, tmp_path):
        cfg = write(tmp_path / "c.json", {"experiment": "stealth_success", "n": 12, "M": 40, "gamma": 0.8,
                                          "epsilon": 0.01, "activation": "sigmoid", "trials": 2000, "seed": 11})
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert main(["experiment", "--config", cfg, "--format", "csv", "--out", str(a)]) == 0
        assert main(["experiment", "--experiment", "stealth_success", "--n", "12", "--M", "40", "--gamma", "0.8",
                     "--epsilon", "0.01", "--activation", "sigmoid", "--trials", "2000", "--seed", "11",
                     "--format", "csv", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
        assert a.read_text().endswith("\n")

    def test_malformed_config(self, tmp_path, capsys):
        p = tmp_path / "bad.json"
        p.write_text('{"experiment": "sweep",\n  "n": [5, 10')
        assert main(["experiment", "--config", str(p)]) == 2
        assert "line 2" in capsys.readouterr().err

    def test_missing_seed(self, capsys):
        assert main(["experiment", "--n", "5", "--M", "2"]) == 2

    def test_theorem1_with_region_file(self, tmp_path):
        reg = write(tmp_path / "r.json", {"r_A": 0.5, "C": 1, "nu": 1, "P_A": 1, "Delta": 0.2})
        out = tmp_path / "o.json"
        assert main(["experiment", "--experiment", "theorem1_check", "--n", "20", "--epsilon", "0.05",
                     "--region", reg, "--trials", "5000", "--seed", "1", "--out", str(out)]) == 0
        assert json.loads(out.read_text())["verdict"] == "pass"

    def test_violation_exit_code(self, tmp_path, monkeypatch):
        from stealth_attacks import harness
        real = harness.verify_stealth_many

        def broken(*args, **kw):
            out = real(*args, **kw)
            out["delta_ok"] = out["delta_ok"] & False
            return out

        monkeypatch.setattr(harness, "verify_stealth_many", broken)
        out = tmp_path / "o.json"
        assert main(["experiment", "--n", "10", "--M", "3", "--trials", "200", "--seed", "1",
                     "--out", str(out)]) == 3
        dump = json.loads((tmp_path / "o.json.counterexample.json").read_text())
        assert dump["counterexamples"]


class TestSweep:
    def test_sweep_csv(self, tmp_path):
        out = tmp_path / "s.csv"
        assert main(["sweep", "--n", "5,10", "--M", "10", "--gamma", "0.9", "--trials", "500", "--seed", "4",
                     "--format", "csv", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "experiment,n,M,gamma,epsilon,delta,activation,trials,seed,empirical,ci_low,ci_high,bound,verdict"
        assert len(lines) == 3

    def test_parallel_identical(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        args = ["sweep", "--n", "8,16", "--M", "1,100", "--trials", "3000", "--seed", "5"]
        assert main(args + ["--workers", "1", "--out", str(a)]) == 0
        assert main(args + ["--workers", "0", "--out", str(b)]) == 0
        assert a.read_bytes() == b.read_bytes()
