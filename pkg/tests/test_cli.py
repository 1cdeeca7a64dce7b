import json

import pytest

from crowdinfer.cli import main


def run(tmp_path, *argv):
    return main([argv[0], "--outdir", str(tmp_path), *argv[1:]])


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """A small end-to-end run shared by the read-only assertions below."""
    out = tmp_path_factory.mktemp("pipeline")
    args = dict(outdir=str(out))
    assert run(out, "simulate", "--num-tasks", "120", "--repeats", "10", "--seed", "0") == 0
    assert run(out, "infer") == 0
    assert run(out, "train", "--epochs", "30") == 0
    assert run(out, "predict") == 0
    assert run(out, "eval", "--split", "test") == 0
    assert run(out, "curve", "--split", "val", "--bootstrap", "16") == 0
    assert run(out, "calibrate", "--target-accuracy", "0.7", "--bootstrap", "32") == 0
    assert run(out, "repeats", "--split", "test", "--permutations", "4") == 0
    return out


def test_pipeline_artifacts_exist(pipeline):
    for name in (
        "scheme.json", "tasks.jsonl", "responses.jsonl", "posteriors.jsonl",
        "model.json", "predictions.jsonl", "report.json", "curve.csv",
        "calibration.json", "bins.csv", "repeats.csv",
    ):
        assert (pipeline / name).exists(), name


def test_simulate_counts(pipeline):
    tasks = read_jsonl(pipeline / "tasks.jsonl")
    responses = read_jsonl(pipeline / "responses.jsonl")
    assert len(tasks) == 120
    assert len(responses) == 1200
    scheme = json.loads((pipeline / "scheme.json").read_text())
    assert scheme == {"proper": ["c0", "c1"], "cs": "cs"}


def test_report_shape(pipeline):
    report = json.loads((pipeline / "report.json").read_text())
    assert report["split"] == "test"
    assert 0.0 <= report["acc"] <= 1.0
    assert report["n_tasks"] == 12
    assert "config_hash" in report["provenance"]


def test_calibration_shape(pipeline):
    cal = json.loads((pipeline / "calibration.json").read_text())
    assert cal["target_accuracy"] == 0.7
    assert len(cal["thresholds"]) == 32
    assert len(cal["automation_ci"]) == 2


def test_repeats_csv_variants(pipeline):
    lines = (pipeline / "repeats.csv").read_text().splitlines()
    assert lines[1] == "variant,step,q025,q25,median,q75,q975,n_tasks"
    variants = {row.split(",")[0] for row in lines[2:]}
    assert variants == {"uniform", "informed"}


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir(), b.mkdir()
    for d in (a, b):
        assert run(d, "simulate", "--num-tasks", "30", "--seed", "7") == 0
    for name in ("scheme.json", "tasks.jsonl", "responses.jsonl"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_unanimous_posterior_hand_value(tmp_path):
    (tmp_path / "scheme.json").write_text(
        json.dumps({"proper": ["no", "yes"], "cs": "cs"})
    )
    (tmp_path / "tasks.jsonl").write_text(json.dumps({"task_id": "t0"}) + "\n")
    with open(tmp_path / "responses.jsonl", "w") as fh:
        for _ in range(20):
            fh.write(json.dumps({"task_id": "t0", "answer": "yes"}) + "\n")
    assert run(tmp_path, "infer") == 0
    rec = read_jsonl(tmp_path / "posteriors.jsonl")[0]
    assert rec["task_id"] == "t0"
    assert rec["alpha"] == [1.0, 21.0, 1.0]
    assert rec["n"] == 20


def test_infer_with_model_prior(pipeline, tmp_path):
    for name in ("scheme.json", "tasks.jsonl", "responses.jsonl", "model.json"):
        (tmp_path / name).write_bytes((pipeline / name).read_bytes())
    assert run(tmp_path, "infer", "--prior", "model", "--blend", "0.5") == 0
    uniform = {r["task_id"]: r for r in read_jsonl(pipeline / "posteriors.jsonl")}
    informed = {r["task_id"]: r for r in read_jsonl(tmp_path / "posteriors.jsonl")}
    assert uniform.keys() == informed.keys()
    some_differ = any(
        uniform[tid]["alpha"] != informed[tid]["alpha"] for tid in uniform
    )
    assert some_differ
    # parameter sums still equal categories + n
    for tid, rec in informed.items():
        assert sum(rec["alpha"]) == pytest.approx(3.0 + rec["n"], abs=1e-6)


def test_predict_inference_n_override(pipeline, tmp_path):
    for name in ("scheme.json", "tasks.jsonl", "model.json"):
        (tmp_path / name).write_bytes((pipeline / name).read_bytes())
    assert run(tmp_path, "predict", "--inference-n", "0") == 0
    recs = read_jsonl(tmp_path / "predictions.jsonl")
    assert all(r["n"] == 0 for r in recs)
    assert all(sum(r["alpha"]) == pytest.approx(3.0, abs=1e-6) for r in recs)
    # observed-n predictions carry n = 10 instead
    obs = read_jsonl(pipeline / "predictions.jsonl")
    assert all(r["n"] == 10 for r in obs)


def test_eval_self_comparison_is_perfect(pipeline, tmp_path):
    for name in ("scheme.json", "tasks.jsonl", "posteriors.jsonl"):
        (tmp_path / name).write_bytes((pipeline / name).read_bytes())
    (tmp_path / "predictions.jsonl").write_bytes(
        (pipeline / "posteriors.jsonl").read_bytes()
    )
    assert run(tmp_path, "eval", "--split", "all") == 0
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["acc"] == 1.0
    assert report["mean_D"] == 0.0


def test_repeats_reads_deployment_threshold(pipeline, tmp_path):
    for name in ("scheme.json", "tasks.jsonl", "responses.jsonl",
                 "model.json", "predictions.jsonl", "posteriors.jsonl"):
        (tmp_path / name).write_bytes((pipeline / name).read_bytes())
    # explicit threshold above every confidence: nothing automated,
    # every test task enters the analysis
    assert run(tmp_path, "repeats", "--split", "test", "--permutations", "2",
               "--deployment-threshold", "2.0") == 0
    lines = (tmp_path / "repeats.csv").read_text().splitlines()
    n_tasks = int(lines[2].split(",")[-1])
    assert n_tasks == 12


# ---------------------------------------------------------------------------
# option layering
# ---------------------------------------------------------------------------


def test_config_file_and_flag_precedence(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"num_tasks": 12, "repeats": 4}))
    assert run(tmp_path, "simulate", "--config", str(cfgfile), "--num-tasks", "9") == 0
    tasks = read_jsonl(tmp_path / "tasks.jsonl")
    responses = read_jsonl(tmp_path / "responses.jsonl")
    assert len(tasks) == 9          # flag beats config file
    assert len(responses) == 36     # config file beats default


def test_outdir_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv("CROWDINFER_OUTDIR", str(tmp_path))
    assert main(["simulate", "--num-tasks", "5"]) == 0
    assert (tmp_path / "tasks.jsonl").exists()


def test_absolute_paths_ignore_outdir(tmp_path):
    target = tmp_path / "elsewhere.jsonl"
    assert run(tmp_path, "simulate", "--num-tasks", "5",
               "--tasks", str(target)) == 0
    assert target.exists()


# ---------------------------------------------------------------------------
# error handling and exit codes
# ---------------------------------------------------------------------------


def test_invalid_simulate_options_exit_2(tmp_path):
    assert run(tmp_path, "simulate", "--num-tasks", "0") == 2
    assert run(tmp_path, "simulate", "--repeats", "-1") == 2
    assert run(tmp_path, "simulate", "--alpha0", "1.0,1.0") == 2


def test_missing_inputs_exit_2(tmp_path):
    assert run(tmp_path, "infer") == 2
    assert run(tmp_path, "eval") == 2


def test_unknown_config_key_exit_2(tmp_path):
    cfgfile = tmp_path / "cfg.json"
    cfgfile.write_text(json.dumps({"num_task": 12}))
    assert run(tmp_path, "simulate", "--config", str(cfgfile)) == 2


def test_orphan_responses_exit_2(tmp_path):
    (tmp_path / "scheme.json").write_text(json.dumps({"proper": ["a", "b"], "cs": "cs"}))
    (tmp_path / "tasks.jsonl").write_text(json.dumps({"task_id": "t0"}) + "\n")
    (tmp_path / "responses.jsonl").write_text(
        json.dumps({"task_id": "ghost", "answer": "a"}) + "\n"
    )
    assert run(tmp_path, "infer") == 2


def test_corrupt_model_exit_3(pipeline, tmp_path):
    for name in ("scheme.json", "tasks.jsonl", "responses.jsonl"):
        (tmp_path / name).write_bytes((pipeline / name).read_bytes())
    (tmp_path / "model.json").write_text(json.dumps({"format_version": 42}))
    assert run(tmp_path, "predict", "--inference-n", "0") == 3


def test_version_flag():
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0


def test_missing_command_is_parser_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
