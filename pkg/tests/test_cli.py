"""CLI behavior: commands, manifests, filters, exit codes."""

import json

import numpy as np
import pytest

from sralearn.checkpoint import load as load_checkpoint
from sralearn.cli import (
    CHECK_FAILED,
    CONFIG_ERROR,
    OK,
    RUNTIME_ERROR,
    apply_filter,
    main,
    sha256_file,
)
from sralearn.data import load_csv
from sralearn.exceptions import ConfigError
from sralearn.synth import generate, write_csv

FAST_TRAIN = ["--epochs", "6", "--batch-size", "64", "--dropout", "0",
              "--patience", "3"]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """gauss2d data plus one trained lr checkpoint, shared by CLI tests."""
    root = tmp_path_factory.mktemp("cli")
    data = root / "data"
    run = root / "run"
    assert main(["synth", "--kind", "gauss2d", "--n", "160", "--seed", "5",
                 "--out-dir", str(data)]) == OK
    assert main(["train", "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--model", "lr", "--folds", "3", "--seed", "5",
                 "--out-dir", str(run), *FAST_TRAIN]) == OK
    return root


def test_synth_writes_csv_schema_manifest(tmp_path):
    out = tmp_path / "d"
    assert main(["synth", "--kind", "two-moons", "--n", "50", "--seed", "1",
                 "--out-dir", str(out)]) == OK
    assert (out / "two-moons.csv").exists()
    assert (out / "two-moons.schema").exists()
    manifest = json.loads((out / "synth-manifest.json").read_text())
    assert manifest["command"] == "synth"
    assert manifest["seed"] == 1
    assert set(manifest["outputs"]) == {"two-moons.csv", "two-moons.schema"}
    digest = manifest["outputs"]["two-moons.csv"]
    assert digest == sha256_file(out / "two-moons.csv")


def test_synth_same_seed_same_bytes(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        main(["synth", "--kind", "rings", "--n", "80", "--seed", "3",
              "--out-dir", str(out)])
    assert sha256_file(a / "rings.csv") == sha256_file(b / "rings.csv")


def test_synth_unknown_kind_rejected_by_parser(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["synth", "--kind", "nope", "--out-dir", str(tmp_path)])
    assert exc.value.code == 2


def test_train_outputs(workspace):
    run = workspace / "run"
    report = (run / "cv_report.csv").read_text().splitlines()
    assert report[0] == "model,metric,fold,value"
    assert len(report) == 1 + 3 + 2  # header, folds, mean, std
    for i in range(3):
        model = load_checkpoint(run / f"fold{i}.ckpt")
        assert model.kind == "lr"
        assert (run / f"fold{i}.preprocessor.json").exists()
        log = (run / f"fold{i}.trainlog.csv").read_text().splitlines()
        assert log[0] == "epoch,train_loss,val_metric,is_best"
    manifest = json.loads((run / "train-manifest.json").read_text())
    assert manifest["config"]["model"] == "lr"
    assert len(manifest["outputs"]) == 10


def test_train_single_fold_rejected(workspace, capsys):
    data = workspace / "data"
    code = main(["train", "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--model", "lr", "--folds", "1", "--out-dir", str(workspace)])
    assert code == CONFIG_ERROR
    assert "fold count" in capsys.readouterr().err


def test_train_missing_data_is_runtime_error(workspace, tmp_path):
    code = main(["train", "--data", str(tmp_path / "missing.csv"),
                 "--schema", str(workspace / "data" / "gauss2d.schema"),
                 "--model", "lr", "--out-dir", str(tmp_path)])
    assert code == RUNTIME_ERROR


def test_train_metric_task_mismatch(workspace, tmp_path, capsys):
    data = workspace / "data"
    code = main(["train", "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--model", "lr", "--metric", "r2", "--out-dir", str(tmp_path)])
    assert code == CONFIG_ERROR
    assert "does not apply" in capsys.readouterr().err


def test_explain_writes_attributions(workspace, tmp_path, capsys):
    data, run = workspace / "data", workspace / "run"
    out = tmp_path / "ex"
    code = main(["explain", "--checkpoint", str(run / "fold0.ckpt"),
                 "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--relevant", "x1,x2", "--topk", "1",
                 "--seed", "5", "--out-dir", str(out)])
    assert code == OK
    captured = capsys.readouterr().out
    assert "TPR@1" in captured
    header = (out / "attributions.csv").read_text().splitlines()[0]
    assert header.startswith("instance_id,x1,a_x1,contrib_x1")
    manifest = json.loads((out / "explain-manifest.json").read_text())
    assert "checkpoint" in manifest["inputs"]
    assert "preprocessor" in manifest["inputs"]


def test_explain_filter_reduces_rows(workspace, tmp_path):
    data, run = workspace / "data", workspace / "run"
    out_all = tmp_path / "all"
    out_f = tmp_path / "f"
    main(["explain", "--checkpoint", str(run / "fold0.ckpt"),
          "--data", str(data / "gauss2d.csv"),
          "--schema", str(data / "gauss2d.schema"), "--out-dir", str(out_all)])
    main(["explain", "--checkpoint", str(run / "fold0.ckpt"),
          "--data", str(data / "gauss2d.csv"),
          "--schema", str(data / "gauss2d.schema"),
          "--filter", "x1>0 and x2<=1.5", "--out-dir", str(out_f)])
    n_all = len((out_all / "attributions.csv").read_text().splitlines())
    n_f = len((out_f / "attributions.csv").read_text().splitlines())
    assert 1 < n_f < n_all


def test_explain_fold_test_restricts_rows(workspace, tmp_path):
    data, run = workspace / "data", workspace / "run"
    out = tmp_path / "ft"
    code = main(["explain", "--checkpoint", str(run / "fold1.ckpt"),
                 "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--fold-test", "1", "--folds", "3", "--seed", "5",
                 "--out-dir", str(out)])
    assert code == OK
    rows = (out / "attributions.csv").read_text().splitlines()
    # one third of 160 rows, within stratification rounding
    assert len(rows) - 1 in (53, 54)


def test_explain_bad_filter_feature(workspace, tmp_path, capsys):
    data, run = workspace / "data", workspace / "run"
    code = main(["explain", "--checkpoint", str(run / "fold0.ckpt"),
                 "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--filter", "bogus>0", "--out-dir", str(tmp_path)])
    assert code == CONFIG_ERROR
    assert "unknown feature" in capsys.readouterr().err


def test_explain_bad_relevant_reference(workspace, tmp_path):
    data, run = workspace / "data", workspace / "run"
    code = main(["explain", "--checkpoint", str(run / "fold0.ckpt"),
                 "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"),
                 "--relevant", "x9", "--out-dir", str(tmp_path)])
    assert code == CONFIG_ERROR


def test_reinforce_p2_writes_svgs(workspace, tmp_path):
    data, run = workspace / "data", workspace / "run"
    out = tmp_path / "re"
    code = main(["reinforce", "--checkpoint", str(run / "fold0.ckpt"),
                 "--data", str(data / "gauss2d.csv"),
                 "--schema", str(data / "gauss2d.schema"), "--out-dir", str(out)])
    assert code == OK
    assert (out / "reinforced.csv").exists()
    assert (out / "original.svg").read_text().startswith("<svg")
    assert (out / "reinforced.svg").read_text().startswith("<svg")


def test_reinforce_higher_p_skips_svg(tmp_path, capsys):
    data = tmp_path / "d"
    run = tmp_path / "r"
    main(["synth", "--kind", "synthetic1", "--n", "300", "--seed", "2",
          "--out-dir", str(data)])
    main(["train", "--data", str(data / "synthetic1.csv"),
          "--schema", str(data / "synthetic1.schema"),
          "--model", "lr", "--folds", "2", "--seed", "2",
          "--out-dir", str(run), *FAST_TRAIN])
    capsys.readouterr()
    out = tmp_path / "re"
    code = main(["reinforce", "--checkpoint", str(run / "fold0.ckpt"),
                 "--data", str(data / "synthetic1.csv"),
                 "--schema", str(data / "synthetic1.schema"),
                 "--out-dir", str(out)])
    assert code == OK
    assert "skipped" in capsys.readouterr().out
    assert not (out / "original.svg").exists()


def test_gradcheck_passes(capsys):
    assert main(["gradcheck", "--seeds", "2", "--seed", "0"]) == OK
    out = capsys.readouterr().out
    assert "0 failure(s)" in out
    assert "FAIL" not in out


def test_gradcheck_corrupt_is_negative_control(capsys):
    assert main(["gradcheck", "--seeds", "2", "--seed", "0",
                 "--corrupt"]) == CHECK_FAILED
    assert "FAIL" in capsys.readouterr().out


def test_rerun_matches_digests(workspace, tmp_path, capsys):
    manifest = workspace / "run" / "train-manifest.json"
    code = main(["rerun", "--manifest", str(manifest),
                 "--out-dir", str(tmp_path / "replay")])
    assert code == OK
    assert "digests match" in capsys.readouterr().out


def test_rerun_detects_tampering(workspace, tmp_path, capsys):
    src = json.loads((workspace / "data" / "synth-manifest.json").read_text())
    src["outputs"]["gauss2d.csv"] = "0" * 64
    bad = tmp_path / "tampered.json"
    bad.write_text(json.dumps(src))
    code = main(["rerun", "--manifest", str(bad),
                 "--out-dir", str(tmp_path / "replay")])
    assert code == CHECK_FAILED
    assert "digest differs" in capsys.readouterr().err


def test_apply_filter_clauses(tmp_path):
    res = generate("gauss2d", n=40, seed=9)
    path = tmp_path / "g.csv"
    write_csv(res, path)
    ds = load_csv(path, res.schema())
    mask = apply_filter(ds, "x1>0")
    np.testing.assert_array_equal(mask, ds.numeric["x1"] > 0)
    both = apply_filter(ds, "x1>0 and x2<=0.25")
    np.testing.assert_array_equal(
        both, (ds.numeric["x1"] > 0) & (ds.numeric["x2"] <= 0.25))
    with pytest.raises(ConfigError, match="no comparison operator"):
        apply_filter(ds, "x1 is 0")
    with pytest.raises(ConfigError, match="not numeric"):
        apply_filter(ds, "x1>abc")


def test_manifest_json_is_stable(workspace):
    # sorted keys + trailing newline so diffs and digests stay clean
    text = (workspace / "run" / "train-manifest.json").read_text()
    assert text.endswith("\n")
    parsed = json.loads(text)
    assert list(parsed) == sorted(parsed)
