"""Command-line behavior: outputs, determinism, precedence, exit codes."""

import json

import numpy as np
import pytest

from multiaug.cli import main
from multiaug.ppm import decode_ppm, encode_ppm


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, json.loads(out) if out.strip() else None


@pytest.fixture(scope="module")
def checkpoint(tmp_path_factory):
    """One tiny pretrained checkpoint shared by the eval-command tests."""
    root = tmp_path_factory.mktemp("ckpt")
    path = root / "model.mass"
    code = main([
        "pretrain", "--synthetic", "3", "--data-side", "24", "--data-seed", "5",
        "--epochs", "2", "--batch-size", "4", "--view-side", "16", "--seed", "0",
        "--checkpoint", str(path),
    ])
    assert code == 0 and path.exists()
    return path


def test_augment_writes_views_per_image(tmp_path, capsys):
    out = tmp_path / "views"
    code, doc = _run(capsys, "augment", "--synthetic", "3", "--views", "2",
                     "--image-side", "24", "--view-side", "16",
                     "--output", str(out))
    assert code == 0
    files = sorted(out.glob("*.ppm"))
    assert doc["count"] == 6 and len(files) == 6
    assert doc["policy"] == {"n": 2, "m": 9.0}
    for f in files:
        img = decode_ppm(f.read_bytes())
        assert img.shape == (16, 16, 3)


def test_augment_identity_settings_reproduce_inputs(tmp_path, capsys):
    src = tmp_path / "src"
    src.mkdir()
    rng = np.random.default_rng(0)
    for i in range(3):
        img = rng.integers(0, 256, size=(20, 20, 3), dtype=np.uint8)
        (src / f"img{i}.ppm").write_bytes(encode_ppm(img))
    out = tmp_path / "out"
    code, doc = _run(capsys, "augment", "--input", str(src), "--output", str(out),
                     "--views", "1", "--m", "0", "--full-crop", "--view-side", "20")
    assert code == 0 and doc["count"] == 3 and doc["policy"] is None
    for i in range(3):
        got = (out / f"img{i}_view0.ppm").read_bytes()
        assert got == (src / f"img{i}.ppm").read_bytes()


def test_augment_reruns_byte_identical(tmp_path, capsys):
    args = ["augment", "--synthetic", "2", "--image-side", "24", "--view-side", "16",
            "--seed", "3"]
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert _run(capsys, *args, "--output", str(a))[0] == 0
    assert _run(capsys, *args, "--output", str(b))[0] == 0
    assert _run(capsys, *args, "--output", str(c), "--threads", "3")[0] == 0
    names = sorted(p.name for p in a.glob("*.ppm"))
    assert names and names == sorted(p.name for p in b.glob("*.ppm"))
    assert names == sorted(p.name for p in c.glob("*.ppm"))
    for name in names:
        data = (a / name).read_bytes()
        assert data == (b / name).read_bytes()
        assert data == (c / name).read_bytes()


def test_augment_empty_input_dir_is_runtime_error(tmp_path, capsys):
    empty = tmp_path / "empty"
    empty.mkdir()
    code = main(["augment", "--input", str(empty), "--output", str(tmp_path / "o")])
    assert code == 2


def test_cropstats_reports_distribution(capsys):
    code, doc = _run(capsys, "cropstats", "--strategy", "uniform", "--samples", "500",
                     "--height", "40", "--width", "40")
    assert code == 0
    assert set(doc.keys()) == {"min", "max", "mean", "std"}
    assert 0.5 <= doc["min"] <= doc["mean"] <= doc["max"] <= 1.0


def test_pretrain_writes_checkpoint_and_summary(tmp_path, capsys):
    ckpt = tmp_path / "m.mass"
    log = tmp_path / "log.jsonl"
    summary = tmp_path / "summary.json"
    code, doc = _run(capsys, "pretrain", "--synthetic", "3", "--data-side", "24",
                     "--epochs", "2", "--batch-size", "4", "--view-side", "16",
                     "--checkpoint", str(ckpt), "--log", str(log),
                     "--output", str(summary))
    assert code == 0
    assert ckpt.exists()
    assert doc["dataset_size"] == 12 and doc["epochs_run"] == 2
    assert {"epoch", "loss", "lr", "tau", "emb_std"} <= doc["final"].keys()
    lines = [json.loads(l) for l in log.read_text().splitlines()]
    assert len(lines) == 2
    assert json.loads(summary.read_text()) == doc


def test_pretrain_flags_override_config_file(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"epochs": 3, "base_lr": 0.5, "batch_size": 4,
                               "view_side": 16,
                               "data": {"kind": "shapes", "n_per_class": 3,
                                        "side": 24, "seed": 0}}))
    code, doc = _run(capsys, "pretrain", "--config", str(cfg), "--epochs", "2",
                     "--checkpoint", str(tmp_path / "m.mass"))
    assert code == 0
    assert doc["config"]["epochs"] == 2
    assert doc["config"]["base_lr"] == 0.5


def test_pretrain_rejects_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"learning_rate": 0.1}))
    code = main(["pretrain", "--config", str(cfg)])
    assert code == 2


def test_lineval_reports_accuracy(tmp_path, capsys, checkpoint):
    out = tmp_path / "rep.json"
    code, doc = _run(capsys, "lineval", "--checkpoint", str(checkpoint),
                     "--train-per-class", "6", "--test-per-class", "3",
                     "--side", "24", "--epochs", "2", "--output", str(out))
    assert code == 0
    assert doc["protocol"] == "linear"
    assert 0.0 <= doc["top1"] <= 1.0 and doc["top5"] is None
    assert len(doc["per_class"]) == 4
    assert json.loads(out.read_text()) == doc


def test_finetune_reports_fraction(capsys, checkpoint):
    code, doc = _run(capsys, "finetune", "--checkpoint", str(checkpoint),
                     "--fraction", "0.5", "--epochs", "1",
                     "--train-per-class", "6", "--test-per-class", "3",
                     "--side", "24")
    assert code == 0
    assert doc["protocol"] == "finetune"
    assert doc["config"]["fraction"] == 0.5
    assert doc["config"]["labeled_items"] == 12


def test_eval_dirs_must_come_in_pairs(capsys, checkpoint, tmp_path):
    code = main(["lineval", "--checkpoint", str(checkpoint),
                 "--train-dir", str(tmp_path)])
    assert code == 2


def test_bench_measures_every_stage(capsys):
    code, doc = _run(capsys, "bench", "--iters", "4", "--size", "24",
                     "--view-side", "16")
    assert code == 0
    assert len(doc["per_op_micros"]) == 20
    assert {"crop", "resize"} <= doc["per_op_micros"].keys()
    assert doc["images_per_sec"] > 0
    assert len(doc["output_digest"]) == 64


def test_bench_digest_stable_across_threads(capsys):
    _, solo = _run(capsys, "bench", "--iters", "4", "--size", "24",
                   "--view-side", "16", "--threads", "1")
    _, duo = _run(capsys, "bench", "--iters", "4", "--size", "24",
                  "--view-side", "16", "--threads", "2")
    assert solo["output_digest"] == duo["output_digest"]


@pytest.mark.parametrize("argv", [
    [],
    ["no-such-command"],
    ["augment", "--synthetic", "2"],
    ["augment", "--synthetic", "0", "--output", "x"],
    ["finetune", "--checkpoint", "x", "--fraction", "1.5"],
    ["cropstats", "--strategy", "diagonal"],
])
def test_usage_errors_exit_one(argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 1


def test_missing_checkpoint_is_runtime_error(capsys):
    code = main(["lineval", "--checkpoint", "/nonexistent/path.mass"])
    assert code == 2
