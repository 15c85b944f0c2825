"""
The command line tool of `thermogest`.

Every experiment step is one sub-command: `gen-data` generates a synthetic
dataset, `train` trains a network with the cross-entropy loss,
`finetune-ctc` continues from its best checkpoint with the CTC loss,
`eval-clf` and `eval-detect` compute the classification and detection
scores, `stream` runs a network over a frame stream, and `count`,
`probe-rf`, and `print-config` describe networks and configurations.

Results meant for further processing go to the standard output, progress
information goes through the logger. The exit code is `0` on success,
`1` for usage and configuration errors, `2` for data errors, and `3` for
numerical failures.

>>> parse_deltas("0..3"), parse_deltas("0,1,5")
((0, 1, 2, 3), (0, 1, 5))
"""
import argparse
import json
import sys
from typing import Any, Final

import numpy as np
from pycommons.io.arguments import make_argparser, make_epilog
from pycommons.io.console import logger
from pycommons.io.path import Path

from thermogest.analysis.cost import model_reports
from thermogest.analysis.receptive_field import lookahead, \
    probe_dependencies
from thermogest.config import RunConfig, load_config
from thermogest.data.clip import ThermalClip
from thermogest.data.container import read_clip
from thermogest.data.dataset import (
    SPLIT_TEST,
    SPLIT_TRAIN,
    ManifestSource,
    build_dataset,
)
from thermogest.errors import EXIT_CONFIG, EXIT_DATA, EXIT_OK, ConfigError
from thermogest.evaluation.classification import seed_average, \
    top1_accuracy
from thermogest.evaluation.detection import (
    delta_sweep,
    map_score,
    network_detector,
    oracle_detector,
    stitch_test_video,
    write_pr_table,
)
from thermogest.inference.streaming import (
    EmaNormalizer,
    EventExtractor,
    StreamState,
    lag_text,
)
from thermogest.learning.objectives import LOSS_CTC, LOSSES
from thermogest.learning.training import (
    TrainConfig,
    finetune_network,
    load_network,
    resume_config,
    train,
)
from thermogest.model.encoder import EncoderConfig
from thermogest.model.network import GestureNet
from thermogest.model.tcn import PRESETS, TcnConfig
from thermogest.version import __version__


def parse_deltas(text: str) -> tuple[int, ...]:
    """
    Parse a list of output offsets.

    :param text: either `a..b` for an inclusive range or a comma-separated
        list
    :return: the offsets
    """
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            return tuple(range(int(lo), int(hi) + 1))
        return tuple(int(s) for s in text.split(",") if s.strip())
    except ValueError as ve:
        raise ConfigError(f"Invalid delta list {text!r}.") from ve


def __emit(record: Any) -> None:
    """
    Write one result line to the standard output.

    :param record: a string or a JSON-compatible record
    """
    sys.stdout.write((record if isinstance(record, str)
                      else json.dumps(record)) + "\n")
    sys.stdout.flush()


def __model_config(name: str) -> tuple[EncoderConfig, TcnConfig]:
    """
    Get the configuration of a network from a preset name or a file.

    :param name: the preset name or the run configuration file
    :return: the encoder and temporal network configurations
    """
    if name in PRESETS:
        return EncoderConfig(), PRESETS[name]
    cfg: Final[RunConfig] = load_config(name)
    return cfg.encoder, cfg.tcn


def __splits(cfg: RunConfig) -> tuple[list[ThermalClip], list[ThermalClip]]:
    """
    Load the training and test clips of the configured dataset.

    :param cfg: the run configuration
    :return: the training and the test clips
    """
    source: Final[ManifestSource] = ManifestSource(cfg.data.directory)
    return source.load(SPLIT_TRAIN), source.load(SPLIT_TEST)


def cmd_gen_data(args: argparse.Namespace) -> None:
    """
    Generate a synthetic dataset.

    :param args: the arguments
    """
    cfg: Final[RunConfig] = load_config(args.config)
    out: Final[str] = args.out or cfg.data.directory
    clips: Final[int] = cfg.data.clips if args.clips is None else args.clips
    seed: Final[int] = cfg.data.seed if args.seed is None else args.seed
    records = build_dataset(out, clips, seed, cfg.data.generator,
                            cfg.data.classes)
    __emit({"clips": len(records), "directory": out, "seed": seed})


def cmd_train(args: argparse.Namespace) -> None:
    """
    Train a network with the configured loss.

    :param args: the arguments
    """
    cfg: Final[RunConfig] = load_config(args.config)
    train_clips, test_clips = __splits(cfg)
    if args.resume:
        net, ckpt = load_network(args.resume)
        tc = resume_config(ckpt)
        state = train(net, train_clips, test_clips, tc, args.out, ckpt)
    else:
        net = GestureNet(cfg.encoder, cfg.tcn, seed=cfg.train.seed)
        state = train(net, train_clips, test_clips, cfg.train, args.out)
    __emit({"best_accuracy": state.best_accuracy,
            "best_epoch": state.best_epoch, "epochs": state.epoch})


def cmd_finetune_ctc(args: argparse.Namespace) -> None:
    """
    Fine-tune a cross-entropy network with the CTC loss.

    :param args: the arguments
    """
    cfg: Final[RunConfig] = load_config(args.config)
    train_clips, test_clips = __splits(cfg)
    net: Final[GestureNet] = finetune_network(args.init)
    tc: Final[TrainConfig] = TrainConfig.from_dict(
        {**cfg.train.to_dict(), "loss": LOSS_CTC})
    state = train(net, train_clips, test_clips, tc, args.out)
    __emit({"best_accuracy": state.best_accuracy,
            "best_epoch": state.best_epoch, "epochs": state.epoch})


def cmd_eval_clf(args: argparse.Namespace) -> None:
    """
    Compute the top-1 accuracy of one or more checkpoints.

    :param args: the arguments
    """
    cfg: Final[RunConfig] = load_config(args.config)
    test: Final[list[ThermalClip]] = ManifestSource(
        cfg.data.directory).load(SPLIT_TEST)
    mode: Final[str] = args.mode or cfg.train.loss
    scores: Final[list[float]] = []
    for model in args.model:
        net, _ = load_network(model)
        acc = top1_accuracy(net, test, mode)
        scores.append(acc)
        __emit({"model": model, "mode": mode, "top1": acc})
    __emit({"mode": mode, "runs": len(scores),
            "mean_top1": seed_average(scores)})


def cmd_eval_detect(args: argparse.Namespace) -> None:
    """
    Compute the mAP on the stitched test video for several offsets.

    :param args: the arguments
    """
    cfg: Final[RunConfig] = load_config(args.config)
    ev: Final = cfg.evaluation
    deltas: Final[tuple[int, ...]] = ev.deltas if args.delta_sweep is None \
        else parse_deltas(args.delta_sweep)
    if args.oracle:
        detector = oracle_detector
    else:
        if not args.model:
            raise ConfigError("Either --model or --oracle is required.")
        detector = network_detector(load_network(args.model)[0], ev.window,
                                    ev.floor)
    video: Final[ThermalClip] = stitch_test_video(
        ManifestSource(cfg.data.directory).load(SPLIT_TEST), ev.fraction,
        ev.seed)
    for row in delta_sweep(detector, video, deltas):
        __emit({"delta": row.delta, "map": row.map, "events": row.events})
    if args.pr_table:
        result = map_score(detector(video, ev.delta), video.nuclei)
        write_pr_table(args.pr_table, result)
        logger(f"Wrote PR curves at delta={ev.delta} to "
               f"{args.pr_table!r}.")


def cmd_stream(args: argparse.Namespace) -> None:
    """
    Stream frames through a network and print one line per prediction.

    :param args: the arguments
    """
    cfg: Final[RunConfig] = load_config(args.config)
    net, _ = load_network(args.model)
    delta: Final[int] = cfg.evaluation.delta if args.delta is None \
        else args.delta
    if args.input:
        clip = read_clip(args.input)
        frames, fps = clip.frames, clip.fps
    else:
        raw = np.frombuffer(sys.stdin.buffer.read(), dtype="<f4")
        if raw.size % (args.height * args.width) != 0:
            raise ConfigError(f"Input of {raw.size} values is no sequence "
                              f"of {args.width}x{args.height} frames.")
        frames = raw.reshape(-1, args.height, args.width)
        fps = args.fps
    state: Final[StreamState] = StreamState(
        net, cfg.evaluation.window, delta,
        EmaNormalizer(cfg.evaluation.half_life))
    events: Final[EventExtractor] = EventExtractor(cfg.evaluation.floor)
    __emit(f"# {lag_text(delta, fps)}")
    for frame in frames:
        rec = state.push_frame(frame)
        if rec is None:
            continue
        line = " ".join([str(rec.frame), str(rec.attributed),
                         *(f"{p:.6f}" for p in rec.probs)])
        if rec.warmup:
            line += " warmup"
        e = events.push(rec.attributed, rec.probs, rec.warmup)
        if e is not None:
            line += f" event {e.frame} {e.cls} {e.score:.6f}"
        __emit(line)
    e = events.finish()
    if e is not None:
        __emit(f"# event {e.frame} {e.cls} {e.score:.6f}")


def cmd_count(args: argparse.Namespace) -> None:
    """
    Print the parameter and FLOP counts of a network.

    :param args: the arguments
    """
    encoder, tcn = __model_config(args.model)
    for name, report in model_reports(encoder, tcn, args.steps).items():
        __emit({"network": name, **report.to_dict()} if args.json
               else f"{name}: {report}")


def cmd_probe_rf(args: argparse.Namespace) -> None:
    """
    Print the receptive field of a network, computed and measured.

    :param args: the arguments
    """
    _, tcn = __model_config(args.model)
    closed: Final = lookahead(tcn)
    probed: Final = probe_dependencies(tcn)
    __emit(f"L={probed.lookahead} B={probed.lookback} "
           f"(closed form L={closed.lookahead} B={closed.lookback})")
    if probed != closed:
        raise ConfigError(f"Measured receptive field {probed} differs from "
                          f"the closed form {closed}.")


def cmd_print_config(args: argparse.Namespace) -> None:
    """
    Print a complete run configuration.

    :param args: the arguments
    """
    __emit(load_config(args.config).to_json())


def make_parser() -> argparse.ArgumentParser:
    """
    Create the argument parser of the tool.

    :return: the parser
    """
    parser: Final[argparse.ArgumentParser] = make_argparser(
        __file__, "Low-latency thermal gesture recognition.",
        make_epilog(
            "Train, evaluate, and stream temporal convolution networks "
            "recognizing hand gestures in low-resolution thermal videos.",
            2025, 2025, "Thomas Weise",
            url="https://github.com/thomasWeise/thermogest",
            email="tweise@hfuu.edu.cn, tweise@ustc.edu.cn"),
        __version__)
    sub: Final = parser.add_subparsers(dest="command", required=True)

    def add(name: str, func: Any, hlp: str) -> argparse.ArgumentParser:
        """
        Add a sub-command with the common `--config` option.

        :param name: the command name
        :param func: the function executing the command
        :param hlp: the help text
        :return: the sub-command parser
        """
        p = sub.add_parser(name, help=hlp)
        p.set_defaults(func=func)
        p.add_argument("--config", help="the run configuration file",
                       type=str, default=None)
        return p

    p = add("gen-data", cmd_gen_data, "generate a synthetic dataset")
    p.add_argument("--out", help="the output directory", type=str)
    p.add_argument("--clips", help="the number of clips", type=int)
    p.add_argument("--seed", help="the seed", type=int)

    p = add("train", cmd_train, "train a network")
    p.add_argument("--out", help="the output directory", type=str,
                   default="runs/train")
    p.add_argument("--resume", help="the checkpoint to resume from",
                   type=str, default=None)

    p = add("finetune-ctc", cmd_finetune_ctc,
            "fine-tune a network with the CTC loss")
    p.add_argument("--init", help="the best cross-entropy checkpoint",
                   type=str, required=True)
    p.add_argument("--out", help="the output directory", type=str,
                   default="runs/ctc")

    p = add("eval-clf", cmd_eval_clf, "compute the top-1 accuracy")
    p.add_argument("--model", help="the checkpoint(s)", type=str,
                   nargs="+", required=True)
    p.add_argument("--mode", help="the classification rule",
                   choices=LOSSES, default=None)

    p = add("eval-detect", cmd_eval_detect,
            "compute the mAP on the stitched test video")
    p.add_argument("--model", help="the checkpoint", type=str)
    p.add_argument("--oracle", help="use a perfect detector",
                   action="store_true")
    p.add_argument("--delta-sweep", help="the offsets, e.g., 0..23",
                   type=str, default=None)
    p.add_argument("--pr-table", help="the PR-curve table file", type=str)

    p = add("stream", cmd_stream, "stream frames through a network")
    p.add_argument("--model", help="the checkpoint", type=str,
                   required=True)
    p.add_argument("--delta", help="the output offset", type=int)
    p.add_argument("--input", help="a clip file, else raw frames from "
                   "the standard input", type=str)
    p.add_argument("--height", help="the raw frame height", type=int,
                   default=24)
    p.add_argument("--width", help="the raw frame width", type=int,
                   default=32)
    p.add_argument("--fps", help="the raw frame rate", type=float,
                   default=16.0)

    p = add("count", cmd_count, "count parameters and FLOPs")
    p.add_argument("--model", help="a preset or configuration file",
                   type=str, required=True)
    p.add_argument("--steps", help="the window length", type=int,
                   default=48)
    p.add_argument("--json", help="print records", action="store_true")

    p = add("probe-rf", cmd_probe_rf, "measure the receptive field")
    p.add_argument("--model", help="a preset or configuration file",
                   type=str, required=True)

    add("print-config", cmd_print_config, "print the run configuration")
    return parser


def main(argv: list[str] | None = None) -> int:
    """
    Run the command line tool.

    :param argv: the arguments, `None` for the process arguments
    :return: the exit code
    """
    try:
        args: Final[argparse.Namespace] = make_parser().parse_args(argv)
    except SystemExit as se:
        return EXIT_OK if se.code in (None, 0) else EXIT_CONFIG
    try:
        args.func(args)
    except (TypeError, ValueError, ArithmeticError, OSError) as err:
        code: int = getattr(err, "exit_code", EXIT_DATA if isinstance(
            err, OSError) else EXIT_CONFIG)
        logger(f"{args.command} failed: {err}")
        return code
    logger(f"{args.command} done.")
    return EXIT_OK


# Execute the thermogest tool
if __name__ == "__main__":
    sys.exit(main())
