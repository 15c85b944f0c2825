"""Test the command line tool."""
import io
import json
from typing import Final

import numpy as np
from pycommons.io.path import Path
from pycommons.io.temp import temp_dir, temp_file
from pytest import CaptureFixture, MonkeyPatch

from thermogest.config import DataConfig, RunConfig
from thermogest.data.container import write_clip
from thermogest.data.dataset import MANIFEST_NAME, SPLIT_TRAIN, \
    ManifestSource
from thermogest.data.generator import generate_clip
from thermogest.data.preprocess import AugmentParams
from thermogest.errors import EXIT_CONFIG, EXIT_DATA, EXIT_OK
from thermogest.learning.training import (
    BEST_CHECKPOINT,
    LAST_CHECKPOINT,
    TrainConfig,
    TrainState,
    network_snapshot,
)
from thermogest.model.checkpoint import (
    params_to_blobs,
    read_checkpoint,
    write_checkpoint,
)
from thermogest.model.encoder import EncoderConfig
from thermogest.model.network import GestureNet
from thermogest.model.tcn import TcnConfig
from thermogest.run import main

#: a small encoder for full-size frames
ENCODER: Final[EncoderConfig] = EncoderConfig(
    (8, 8), (24, 32), ((4, 2), (8, 2)))
#: a small temporal network
TCN: Final[TcnConfig] = TcnConfig(1, 2, 4, 8, 10, 1)


def __records(text: str) -> list[dict]:
    """
    Get the JSON records from the captured output.

    :param text: the output, which also holds log lines
    :return: the records
    """
    return [json.loads(line) for line in text.splitlines()
            if line.startswith("{")]


def __rows(text: str) -> list[list[str]]:
    """
    Get the prediction rows of a streaming run.

    :param text: the output, which also holds log lines
    :return: the rows, split into tokens
    """
    return [s.split() for s in text.splitlines()
            if s.split(" ", 1)[0].isdigit()]


def __write_network(td: Path) -> Path:
    """
    Write the checkpoint of an untrained small network.

    :param td: the directory
    :return: the checkpoint path
    """
    net: Final[GestureNet] = GestureNet(ENCODER, TCN, seed=4)
    return write_checkpoint(
        td.resolve_inside("net.thgm"),
        network_snapshot(net, TrainConfig(), TrainState()),
        params_to_blobs(net.params))


def test_help_and_usage_errors(capsys: CaptureFixture[str]) -> None:
    """Help exits with 0, usage errors with 1."""
    assert main(["--help"]) == EXIT_OK
    assert "gen-data" in capsys.readouterr().out
    assert main([]) == EXIT_CONFIG
    assert main(["frobnicate"]) == EXIT_CONFIG
    assert main(["count"]) == EXIT_CONFIG
    assert main(["count", "--model", "f256"]) == EXIT_CONFIG
    assert main(["eval-detect", "--delta-sweep", "a..b"]) == EXIT_CONFIG


def test_count(capsys: CaptureFixture[str]) -> None:
    """Count the reference networks."""
    assert main(["count", "--model", "f64", "--json"]) == EXIT_OK
    records = {r["network"]: r for r in __records(capsys.readouterr().out)}
    assert set(records.keys()) == {"tcn", "resnet18"}
    assert records["tcn"]["params"] == 363722
    assert records["tcn"]["flops"] == 17458656
    assert main(["count", "--model", "f64"]) == EXIT_OK
    assert "tcn: params=363722 (0.36M)" in capsys.readouterr().out


def test_probe_rf(capsys: CaptureFixture[str]) -> None:
    """Measure the receptive field of a mixed network."""
    assert main(["probe-rf", "--model", "mix2"]) == EXIT_OK
    assert "L=12 B=108" in capsys.readouterr().out


def test_print_config(capsys: CaptureFixture[str]) -> None:
    """The printed defaults can be loaded as configuration."""
    assert main(["print-config"]) == EXIT_OK
    out: Final[str] = capsys.readouterr().out
    text: Final[str] = out[:out.rindex("\n}") + 2]
    with temp_dir() as td, temp_file(td, suffix=".json") as tf:
        tf.write_all_str(text)
        assert main(["print-config", "--config", tf]) == EXIT_OK
        again = capsys.readouterr().out
        assert again[:again.rindex("\n}") + 2] == text


def test_bad_config_file() -> None:
    """A malformed configuration is a configuration error."""
    with temp_dir() as td, temp_file(td, suffix=".json") as tf:
        tf.write_all_str('{"train": {\n "epochs": }}')
        assert main(["print-config", "--config", tf]) == EXIT_CONFIG
        tf.write_all_str('{"train": {"epochz": 3}}')
        assert main(["count", "--model", tf]) == EXIT_CONFIG


def test_gen_data(capsys: CaptureFixture[str]) -> None:
    """Generate the same small dataset twice."""
    with temp_dir() as td:
        a = td.resolve_inside("a")
        b = td.resolve_inside("b")
        for out in (a, b):
            assert main(["gen-data", "--out", out, "--clips", "10",
                         "--seed", "7"]) == EXIT_OK
        records = __records(capsys.readouterr().out)
        assert records[0] == {"clips": 10, "directory": a, "seed": 7}
        manifest = a.resolve_inside(MANIFEST_NAME)
        assert manifest.read_all_str() == b.resolve_inside(
            MANIFEST_NAME).read_all_str()
        assert len(ManifestSource(a).load(SPLIT_TRAIN)) == 7
        assert main(["gen-data", "--out", td.resolve_inside("c"),
                     "--clips", "5"]) == EXIT_CONFIG


def test_missing_files() -> None:
    """Missing checkpoints and clips are data errors."""
    with temp_dir() as td:
        missing = td.resolve_inside("missing.thgm")
        assert main(["stream", "--model", missing]) == EXIT_DATA
        ckpt = __write_network(td)
        assert main(["stream", "--model", ckpt, "--input",
                     td.resolve_inside("missing.thgc")]) == EXIT_DATA
        assert main(["eval-detect", "--model", missing]) == EXIT_DATA


def test_stream_clip(capsys: CaptureFixture[str]) -> None:
    """Stream a clip file through a network."""
    clip = generate_clip(3, np.random.default_rng(2))
    n: Final[int] = clip.frames.shape[0]
    with temp_dir() as td:
        ckpt = __write_network(td)
        path = write_clip(td.resolve_inside("c.thgc"), clip)
        assert main(["stream", "--model", ckpt, "--input", path,
                     "--delta", "1"]) == EXIT_OK
    out: Final[str] = capsys.readouterr().out
    assert f"# lag=1 frame ({1000.0 / clip.fps:g} ms @{clip.fps:g}FPS)" \
        in out
    rows = __rows(out)
    assert len(rows) == n - 1
    for i, row in enumerate(rows):
        assert int(row[0]) == i + 1
        assert int(row[1]) == i
        probs = np.array([float(v) for v in row[2:12]])
        assert abs(probs.sum() - 1.0) < 1e-4


def test_stream_raw_frames(capsys: CaptureFixture[str],
                           monkeypatch: MonkeyPatch) -> None:
    """Stream raw frames from the standard input."""
    frames = np.random.default_rng(5).uniform(
        20.0, 30.0, (6, 24, 32)).astype("<f4")
    with temp_dir() as td:
        ckpt = __write_network(td)
        monkeypatch.setattr("sys.stdin", io.TextIOWrapper(
            io.BytesIO(frames.tobytes())))
        assert main(["stream", "--model", ckpt, "--delta", "0"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "# lag=0 frames (0 ms @16FPS)" in out
        rows = __rows(out)
        assert [int(r[0]) for r in rows] == list(range(6))
        assert all("warmup" in r for r in rows)
        monkeypatch.setattr("sys.stdin", io.TextIOWrapper(
            io.BytesIO(frames.tobytes()[:-4])))
        assert main(["stream", "--model", ckpt]) == EXIT_CONFIG


def test_train_resume_finetune_evaluate(
        capsys: CaptureFixture[str]) -> None:
    """Run the whole training pipeline through the command line."""
    with temp_dir() as td:
        cfg = RunConfig(ENCODER, TCN, TrainConfig(
            epochs=1, batch_size=4, lr=0.01, patience=1, seed=3,
            window=12, augment=AugmentParams(scale=0.1)),
            DataConfig(td.resolve_inside("data"), clips=10, seed=7))
        config = td.resolve_inside("run.json")
        config.write_all_str(cfg.to_json())
        assert main(["gen-data", "--config", config]) == EXIT_OK
        capsys.readouterr()

        ce = td.resolve_inside("ce")
        assert main(["train", "--config", config, "--out", ce]) == EXIT_OK
        rec = __records(capsys.readouterr().out)
        assert len(rec) == 1
        assert rec[0]["epochs"] == 1
        assert rec[0]["best_epoch"] == 1
        assert 0.0 <= rec[0]["best_accuracy"] <= 1.0
        last = ce.resolve_inside(LAST_CHECKPOINT)
        best = ce.resolve_inside(BEST_CHECKPOINT)
        assert last.is_file() and best.is_file()

        assert main(["train", "--config", config, "--out", ce,
                     "--resume", last]) == EXIT_OK
        again = __records(capsys.readouterr().out)
        assert again == rec

        ckpt = read_checkpoint(last)
        for section, key in (("state", "history"), ("state", "epoch"),
                             (None, "train")):
            snap = json.loads(json.dumps(ckpt.snapshot))
            del (snap if section is None else snap[section])[key]
            broken = write_checkpoint(td.resolve_inside(f"{key}.thgm"),
                                      snap, ckpt.blobs)
            assert main(["train", "--config", config, "--out",
                         td.resolve_inside("broken"), "--resume",
                         broken]) == EXIT_DATA
        capsys.readouterr()

        ctc = td.resolve_inside("ctc")
        assert main(["finetune-ctc", "--config", config, "--init", best,
                     "--out", ctc]) == EXIT_OK
        tuned = __records(capsys.readouterr().out)
        assert len(tuned) == 1
        assert tuned[0]["epochs"] == 1
        tuned_best = ctc.resolve_inside(BEST_CHECKPOINT)
        assert tuned_best.is_file()
        assert read_checkpoint(tuned_best).snapshot["train"]["loss"] == "ctc"

        assert main(["eval-clf", "--config", config, "--mode", "ctc",
                     "--model", best, tuned_best]) == EXIT_OK
        scores = __records(capsys.readouterr().out)
        assert [r.get("model") for r in scores] == [best, tuned_best, None]
        assert all(r["mode"] == "ctc" for r in scores)
        assert all(0.0 <= r["top1"] <= 1.0 for r in scores[:2])
        assert abs(scores[2]["mean_top1"] - (
            scores[0]["top1"] + scores[1]["top1"]) / 2) < 1e-12
        assert scores[2]["runs"] == 2

        assert main(["eval-clf", "--config", config, "--model",
                     td.resolve_inside("nothing.thgm")]) == EXIT_DATA
