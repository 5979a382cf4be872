import json

import pytest

from twistorkit import cli
from twistorkit.config import BASE_DIR
from twistorkit.selftest import CHECKS, MUTATION_ENV, render_table, run_selftest

FAST = ["--fiber-samples", "4", "--pair-samples", "8"]


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_decompose_sphere(capsys):
    code, out, _ = run(capsys, "decompose", "--fixture", "sphere", *FAST)
    assert code == 0
    report = json.loads(out)
    assert report["command"] == "decompose"
    assert report["approximate"] is True
    assert report["scal"] == pytest.approx(12.0, abs=1e-6)
    norms = report["decomposition"]["norms"]
    assert norms["E"] < 1e-6 and norms["C"] < 1e-6
    assert report["ricci"]["dim"] == [4, 4]


def test_decompose_symplectic_point(capsys):
    code, out, _ = run(capsys, "decompose", "--kind", "symplectic", "--dim", "4", *FAST)
    assert code == 0
    report = json.loads(out)
    assert report["input"]["source"]["fixture"] == "symplectic_point"
    assert report["ricci_type"]["value"] is True


def test_verdicts_on_product_spheres(capsys):
    code, out, _ = run(capsys, "verdict", "--config", str(BASE_DIR / "configs" / "examples" / "product_spheres.json"), *FAST)
    assert code == 0
    verdicts = json.loads(out)["verdicts"]
    assert verdicts["Jplus_integrable"]["closed_form_answer"] is False
    assert verdicts["Jplus_integrable"]["agree"] is True
    assert verdicts["Jminus_integrable"]["sampled_answer"] is False


def test_reports_are_identical_across_worker_counts(capsys):
    args = ["verdict", "--dim", "6", "--signature", "4,2", "--random-tensor", "12345", "--seed", "11", *FAST]
    code_one, one, _ = run(capsys, *args, "--workers", "1")
    code_four, four, _ = run(capsys, *args, "--workers", "4")
    assert code_one == code_four == 0
    assert one == four


def test_nijenhuis_on_the_sphere(capsys):
    code, out, _ = run(capsys, "nijenhuis", "--fixture", "sphere", *FAST)
    assert code == 0
    report = json.loads(out)
    assert report["pair_samples"] == 8
    assert report["nijenhuis"]["Jplus"]["rank"] == 0
    assert report["nijenhuis"]["Jminus"]["horizontal_containment"] is True


def test_two_form_on_the_sphere(capsys):
    code, out, _ = run(capsys, "two-form", "--fixture", "sphere", *FAST)
    assert code == 0
    two_form = json.loads(out)["two_form"]
    assert two_form["nondegenerate"] is True
    assert two_form["positivity"] == {"Jplus": True, "Jminus": False}
    assert two_form["omega1"]["dim"] == [4, 4]


def test_two_form_on_hyperbolic_space(capsys):
    code, out, _ = run(capsys, "two-form", "--fixture", "hyperbolic", *FAST)
    assert code == 0
    two_form = json.loads(out)["two_form"]
    assert two_form["nondegenerate"] is True
    assert two_form["positivity"] == {"Jplus": False, "Jminus": True}


def test_two_form_type11_fails_on_random_curvature(capsys):
    code, out, _ = run(capsys, "two-form", "--random-tensor", "7", *FAST)
    assert code == 0
    type11 = json.loads(out)["two_form"]["type11"]
    assert type11["closed_form_answer"] is False
    assert type11["sampled_answer"] is False
    assert type11["agree"] is True


def test_flipped_fubini_study(capsys):
    code, out, _ = run(capsys, "verdict", "--fixture", "fubini_study_cp2", "--flip-orientation", *FAST)
    assert code == 0
    report = json.loads(out)
    assert report["input"]["structure"]["oriented"] is True
    jplus = report["verdicts"]["Jplus_integrable"]
    assert jplus["closed_form_answer"] is False
    assert jplus["agree"] is True


def test_spectrum_text_report_to_file(capsys, tmp_path):
    target = tmp_path / "out" / "spectrum.txt"
    code, out, _ = run(capsys, "spectrum", "--kind", "symplectic", "--dim", "4", "--format", "text", "--out", str(target), *FAST)
    assert code == 0
    assert out == ""
    lines = target.read_text(encoding="utf-8").splitlines()
    assert "spectrum.sampled.within_tolerance: true" in lines
    assert "command: \"spectrum\"" in lines


def test_timing_is_opt_in(capsys):
    _, plain, _ = run(capsys, "decompose", "--random-tensor", "3", *FAST)
    _, timed, _ = run(capsys, "decompose", "--random-tensor", "3", "--include-timing", *FAST)
    assert "timing" not in json.loads(plain)
    assert json.loads(timed)["timing"]["elapsed_s"] >= 0.0


@pytest.mark.parametrize(
    "argv",
    [
        ["decompose", "--dim", "5"],
        ["decompose", "--fixture", "hyperbolic", "--point", "0.9,0.9,0,0"],
        ["verdict", "--kind", "symplectic", "--dim", "4", "--fixture", "sphere"],
        ["decompose", "--config", "/nonexistent/run.yaml"],
    ],
)
def test_usage_errors_exit_two(capsys, argv):
    code, out, err = run(capsys, *argv)
    assert code == 2
    assert out == ""
    assert err.startswith(f"twistorctl {argv[0]}:")


def test_unexpected_errors_exit_one(capsys, monkeypatch):
    def broken(config):
        raise RuntimeError("boom")

    monkeypatch.setitem(cli.COMMANDS, "decompose", broken)
    code, out, err = run(capsys, "decompose", *FAST)
    assert code == 1
    assert out == ""
    assert "twistorctl decompose: boom" in err


def test_bad_arguments_stop_the_parser(capsys):
    with pytest.raises(SystemExit) as info:
        cli.main(["decompose", "--signature", "four"])
    assert info.value.code == 2


def test_run_log(capsys, tmp_path, monkeypatch):
    log = tmp_path / "runs.jsonl"
    monkeypatch.setenv(cli.RUN_LOG_ENV, str(log))
    run(capsys, "decompose", "--random-tensor", "1", *FAST)
    run(capsys, "decompose", "--dim", "5")
    records = [json.loads(line) for line in log.read_text(encoding="utf-8").splitlines()]
    assert [r["dependent_variables"]["exit_code"] for r in records] == [0, 2]
    assert records[0]["independent_variables"]["source"]["random_seed"] == 1
    assert records[1]["independent_variables"] is None


def test_selftest_passes(capsys):
    results = run_selftest(trials=2, seed=1)
    assert [r.name for r in results] == list(CHECKS)
    assert all(r.ok for r in results), render_table(results)
    code, out, _ = run(capsys, "selftest", "--trials", "2", "--json")
    assert code == 0
    assert json.loads(out)["passed"] is True


def test_selftest_catches_a_wrong_normalizer(capsys, monkeypatch):
    monkeypatch.setenv(MUTATION_ENV, "four_i_normalizer")
    code, out, _ = run(capsys, "selftest", "--trials", "2")
    assert code == 1
    assert "FAIL" in out
    assert not out.splitlines()[-1].startswith(f"{len(CHECKS)}/")
