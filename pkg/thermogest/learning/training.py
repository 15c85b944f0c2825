"""
The training procedure of a gesture network.

A network is first trained with the cross-entropy loss on the
time-averaged logits of windows cut from the training clips. It is then
fine-tuned with the CTC loss, starting from the cross-entropy weights that
reached the best test accuracy. Both phases use the same loop: each epoch
visits the training clips in a seeded random order, augments every clip
with its own random stream derived from `(seed, epoch, clip index)`,
normalizes it, and applies one Adam step per batch. After each epoch, the
top-1 accuracy of the active loss's classification rule is computed on the
training and the test split. The test accuracy drives the plateau
schedule and selects the best weights.

If an output directory is given, the loop writes the checkpoint
`last.thgm` with the complete training state after every epoch, the
checkpoint `best.thgm` whenever the test accuracy improves, and the metric
history `history.jsonl`. A run resumed from `last.thgm` continues exactly
as if it had never stopped.
"""
import json
from dataclasses import dataclass, field
from typing import Any, Final

import numpy as np
from pycommons.io.console import logger
from pycommons.io.path import Path, write_lines
from pycommons.types import check_int_range, type_error

from thermogest.analysis.receptive_field import lookahead
from thermogest.data.clip import ThermalClip
from thermogest.data.preprocess import (
    AugmentParams,
    augment,
    normalize_frames,
)
from thermogest.errors import ConfigError, DataError, NumericError, \
    SkipSample
from thermogest.evaluation.classification import top1_accuracy
from thermogest.learning.objectives import (
    LOSS_CE,
    LOSS_CTC,
    LOSSES,
    ce_clip_loss,
    ctc_logits_loss,
    derive_target,
)
from thermogest.learning.optimizer import PlateauScheduler, adam_step
from thermogest.model.checkpoint import (
    Checkpoint,
    params_from_blobs,
    params_to_blobs,
    read_checkpoint,
    write_checkpoint,
)
from thermogest.model.encoder import EncoderConfig
from thermogest.model.network import GestureNet
from thermogest.model.tcn import TcnConfig

#: the file name of the checkpoint with the complete training state
LAST_CHECKPOINT: Final[str] = "last.thgm"
#: the file name of the checkpoint with the best weights
BEST_CHECKPOINT: Final[str] = "best.thgm"
#: the file name of the metric history
HISTORY_NAME: Final[str] = "history.jsonl"
#: the prefix of the best weights inside the last checkpoint
PREFIX_BEST: Final[str] = "best/"


@dataclass(frozen=True, init=False)
class TrainConfig:
    """The configuration of a training run."""

    #: the number of epochs
    epochs: int
    #: the number of clips per batch
    batch_size: int
    #: the initial learning rate
    lr: float
    #: the epochs without improvement before the learning rate drops
    patience: int
    #: the learning rate reduction factor
    factor: float
    #: the seed of all random decisions
    seed: int
    #: the loss, `ce` or `ctc`
    loss: str
    #: the number of frames `N` of a training window
    window: int
    #: the augmentation magnitudes
    augment: AugmentParams

    def __init__(self, epochs: int = 150, batch_size: int = 8,
                 lr: float = 1e-4, patience: int = 20, factor: float = 0.1,
                 seed: int = 0, loss: str = LOSS_CE, window: int = 48,
                 augment: AugmentParams | None = None) -> None:
        """
        Create the training configuration.

        :param epochs: the number of epochs
        :param batch_size: the number of clips per batch
        :param lr: the initial learning rate
        :param patience: the plateau patience in epochs
        :param factor: the learning rate reduction factor
        :param seed: the seed
        :param loss: the loss, `ce` or `ctc`
        :param window: the number of frames of a training window
        :param augment: the augmentation magnitudes, `None` for defaults
        """
        object.__setattr__(self, "epochs", check_int_range(
            epochs, "epochs", 0, 1_000_000))
        object.__setattr__(self, "batch_size", check_int_range(
            batch_size, "batch_size", 1, 65536))
        if not isinstance(lr, float | int):
            raise type_error(lr, "lr", float)
        if not 0.0 < lr < 1.0:
            raise ConfigError(f"lr must be in (0, 1), got {lr}.")
        object.__setattr__(self, "lr", float(lr))
        object.__setattr__(self, "patience", check_int_range(
            patience, "patience", 1, 1_000_000))
        if not isinstance(factor, float | int):
            raise type_error(factor, "factor", float)
        if not 0.0 < factor < 1.0:
            raise ConfigError(f"factor must be in (0, 1), got {factor}.")
        object.__setattr__(self, "factor", float(factor))
        object.__setattr__(self, "seed", check_int_range(
            seed, "seed", 0, 2 ** 63 - 1))
        if loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {loss!r}.")
        object.__setattr__(self, "loss", loss)
        object.__setattr__(self, "window", check_int_range(
            window, "window", 1, 1_000_000))
        if augment is None:
            augment = AugmentParams()
        elif not isinstance(augment, AugmentParams):
            raise type_error(augment, "augment", AugmentParams)
        object.__setattr__(self, "augment", augment)

    def to_dict(self) -> dict[str, Any]:
        """
        Convert this configuration to a JSON-compatible dictionary.

        :return: the dictionary

        >>> TrainConfig(loss="ctc").to_dict()["loss"]
        'ctc'
        """
        return {"epochs": self.epochs, "batch_size": self.batch_size,
                "lr": self.lr, "patience": self.patience,
                "factor": self.factor, "seed": self.seed, "loss": self.loss,
                "window": self.window, "augment": self.augment.to_dict()}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "TrainConfig":
        """
        Load a training configuration from a dictionary.

        :param data: the dictionary
        :return: the configuration

        >>> TrainConfig.from_dict({"epochs": 3, "augment": {"crop": 0.0}}
        ...                       ).augment.crop
        0.0
        """
        if not isinstance(data, dict):
            raise type_error(data, "train", dict)
        unknown = set(data.keys()).difference(TrainConfig().to_dict())
        if unknown:
            raise ConfigError(f"Unknown train keys {sorted(unknown)}.")
        args: Final[dict[str, Any]] = dict(data)
        if "augment" in args:
            args["augment"] = AugmentParams.from_dict(args["augment"])
        return TrainConfig(**args)


@dataclass(frozen=True)
class EpochRecord:
    """The metrics of one training epoch."""

    #: the epoch, starting at 1
    epoch: int
    #: the mean training loss
    loss: float
    #: the top-1 accuracy on the training split
    train_accuracy: float
    #: the top-1 accuracy on the test split
    test_accuracy: float
    #: the learning rate used during the epoch
    lr: float

    @property
    def gap(self) -> float:
        """
        Get the generalization gap.

        :return: test accuracy minus training accuracy

        >>> EpochRecord(1, 0.5, 1.0, 0.75, 1e-4).gap
        -0.25
        """
        return self.test_accuracy - self.train_accuracy

    def to_dict(self) -> dict[str, Any]:
        """
        Convert the record to a JSON-compatible dictionary.

        :return: the dictionary
        """
        return {"epoch": self.epoch, "loss": self.loss,
                "train_accuracy": self.train_accuracy,
                "test_accuracy": self.test_accuracy, "gap": self.gap,
                "lr": self.lr}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> "EpochRecord":
        """
        Load a record from a dictionary.

        :param data: the dictionary
        :return: the record
        """
        return EpochRecord(int(data["epoch"]), float(data["loss"]),
                           float(data["train_accuracy"]),
                           float(data["test_accuracy"]), float(data["lr"]))


@dataclass
class TrainState:
    """The mutable state of a training run."""

    #: the number of completed epochs
    epoch: int = 0
    #: the metrics of the completed epochs
    history: list[EpochRecord] = field(default_factory=list)
    #: the best test accuracy so far
    best_accuracy: float = -1.0
    #: the epoch of the best test accuracy, `0` if none
    best_epoch: int = 0
    #: the weights with the best test accuracy
    best: dict[str, np.ndarray] | None = None
    #: the state of the plateau scheduler
    scheduler: dict[str, Any] | None = None


def network_snapshot(net: GestureNet, config: TrainConfig,
                     state: TrainState) -> dict[str, Any]:
    """
    Create the JSON snapshot stored in a checkpoint.

    :param net: the network
    :param config: the training configuration
    :param state: the training state
    :return: the snapshot
    """
    return {"model": {"encoder": net.encoder.to_dict(),
                      "tcn": net.tcn.to_dict()},
            "train": config.to_dict(),
            "state": {"epoch": state.epoch, "step": net.params.step,
                      "best_accuracy": state.best_accuracy,
                      "best_epoch": state.best_epoch,
                      "scheduler": state.scheduler,
                      "history": [r.to_dict() for r in state.history]}}


def load_network(path: str) -> tuple[GestureNet, Checkpoint]:
    """
    Load a network with its optimizer state from a checkpoint.

    :param path: the checkpoint file
    :return: the network and the checkpoint
    """
    ckpt: Final[Checkpoint] = read_checkpoint(path)
    try:
        model = ckpt.snapshot["model"]
        encoder = EncoderConfig.from_dict(model["encoder"])
        tcn = TcnConfig.from_dict(model["tcn"])
    except (KeyError, TypeError) as err:
        raise DataError(f"Checkpoint {path!r} has no valid model "
                        f"configuration: {err}") from err
    probe: Final[GestureNet] = GestureNet(encoder, tcn)
    params = params_from_blobs(ckpt.blobs, probe.params.names())
    params.step = int(ckpt.snapshot.get("state", {}).get("step", 0))
    logger(f"Loaded a network with {params.size()} parameters from "
           f"{path!r}.")
    return GestureNet(encoder, tcn, params), ckpt


def restore_state(ckpt: Checkpoint) -> TrainState:
    """
    Restore the training state stored in a checkpoint.

    :param ckpt: the checkpoint
    :return: the training state
    :raises DataError: if the training state is missing or incomplete
    """
    data: Final = ckpt.snapshot.get("state")
    if not isinstance(data, dict):
        raise DataError("Checkpoint has no training state.")
    best: Final[dict[str, np.ndarray]] = {
        k[len(PREFIX_BEST):]: v.astype(np.float32)
        for k, v in ckpt.blobs.items() if k.startswith(PREFIX_BEST)}
    try:
        scheduler = data["scheduler"]
        if (scheduler is not None) and not (
                isinstance(scheduler, dict)
                and {"lr", "best", "stale"}.issubset(scheduler)):
            raise TypeError(f"invalid scheduler state {scheduler!r}")
        return TrainState(
            int(data["epoch"]), [EpochRecord.from_dict(r)
                                 for r in data["history"]],
            float(data["best_accuracy"]), int(data["best_epoch"]),
            best or None, scheduler)
    except (KeyError, TypeError, ValueError) as err:
        raise DataError(
            f"Checkpoint has an incomplete training state: {err!r}") \
            from err


def resume_config(ckpt: Checkpoint) -> TrainConfig:
    """
    Get the training configuration stored in a checkpoint.

    :param ckpt: the checkpoint
    :return: the training configuration
    :raises DataError: if the configuration is missing or invalid
    """
    try:
        return TrainConfig.from_dict(ckpt.snapshot["train"])
    except (KeyError, TypeError, ValueError) as err:
        if isinstance(err, DataError):
            raise
        raise DataError(
            f"Checkpoint has no valid training configuration: {err!r}") \
            from err


def __batch(clips: list[ThermalClip], indices: np.ndarray,
            config: TrainConfig, epoch: int) \
        -> tuple[np.ndarray, list[ThermalClip]]:
    """
    Augment and normalize the clips of a batch.

    :param clips: all training clips
    :param indices: the indices of the clips of the batch
    :param config: the training configuration
    :param epoch: the zero-based epoch
    :return: the normalized frames of shape `[B, N, H, W]` and the
        augmented clips
    """
    frames: Final[list[np.ndarray]] = []
    used: Final[list[ThermalClip]] = []
    for idx in indices:
        rng = np.random.default_rng([config.seed, epoch, int(idx)])
        try:
            clip = augment(clips[idx], config.augment, rng, config.window)
        except SkipSample as ss:
            logger(f"Skipping clip {int(idx)}: {ss}")
            continue
        frames.append(normalize_frames(clip.frames))
        used.append(clip)
    return (np.stack(frames) if frames else np.zeros((0, ))), used


def __loss(logits: np.ndarray, clips: list[ThermalClip],
           loss: str) -> tuple[float, np.ndarray]:
    """
    Compute the mean loss of a batch and its gradient.

    :param logits: the logits of shape `[B, N, P]`
    :param clips: the augmented clips of the batch
    :param loss: the loss name
    :return: the mean loss and its gradient with respect to the logits
    """
    total: float = 0.0
    grad: Final[np.ndarray] = np.zeros_like(logits)
    for b, clip in enumerate(clips):
        if loss == LOSS_CTC:
            value, g = ctc_logits_loss(logits[b], derive_target(clip.labels))
        else:
            value, g = ce_clip_loss(logits[b], clip.cls)
        total += value
        grad[b] = g
    n: Final[int] = len(clips)
    return total / n, grad / n


def train(net: GestureNet, train_clips: list[ThermalClip],
          test_clips: list[ThermalClip], config: TrainConfig,
          out_dir: str | None = None,
          resume: Checkpoint | None = None) -> TrainState:
    """
    Train a network.

    After training, the network holds the weights with the best test
    accuracy. Without any epoch, it is left unchanged.

    :param net: the network, trained in place
    :param train_clips: the training clips in Celsius
    :param test_clips: the test clips in Celsius
    :param config: the training configuration
    :param out_dir: the directory for checkpoints and the metric history,
        or `None` to write nothing
    :param resume: the checkpoint `last.thgm` of an interrupted run,
        whose weights and optimizer state `net` already holds
    :return: the final training state
    :raises NumericError: if the loss or a gradient becomes non-finite
    """
    if not isinstance(net, GestureNet):
        raise type_error(net, "net", GestureNet)
    if not isinstance(config, TrainConfig):
        raise type_error(config, "config", TrainConfig)
    if not train_clips:
        raise DataError("The training split is empty.")
    ahead: Final[int] = lookahead(net.tcn).lookahead
    if config.window < ahead:
        raise ConfigError(f"Window of {config.window} frames is shorter "
                          f"than the lookahead of {ahead} frames.")
    out: Final[Path | None] = None if out_dir is None else Path(out_dir)
    if out is not None:
        out.ensure_dir_exists()
    state: Final[TrainState] = TrainState() if resume is None \
        else restore_state(resume)
    scheduler: Final[PlateauScheduler] = PlateauScheduler(
        config.lr, config.patience, config.factor)
    if state.scheduler is not None:
        scheduler.restore(state.scheduler)
    if state.epoch > 0:
        logger(f"Resuming {config.loss} training after epoch "
               f"{state.epoch}.")

    for epoch in range(state.epoch, config.epochs):
        lr = scheduler.lr
        order = np.random.default_rng([config.seed, epoch]).permutation(
            len(train_clips))
        losses: list[float] = []
        for start in range(0, order.size, config.batch_size):
            frames, clips = __batch(
                train_clips, order[start:start + config.batch_size],
                config, epoch)
            if not clips:
                continue
            try:
                logits, cache = net.forward_train(frames)
                value, dlogits = __loss(logits, clips, config.loss)
                if not np.isfinite(value):
                    raise NumericError(f"Loss diverged to {value}.")
                net.params.zero_grad()
                net.backward_train(cache, dlogits)
                adam_step(net.params, lr)
            except NumericError as ne:
                raise NumericError(f"Epoch {epoch + 1}: {ne}") from ne
            losses.append(value)

        record = EpochRecord(
            epoch + 1, float(np.mean(losses)) if losses else 0.0,
            top1_accuracy(net, train_clips, config.loss),
            top1_accuracy(net, test_clips, config.loss), lr)
        state.history.append(record)
        state.epoch = epoch + 1
        if scheduler.update(record.test_accuracy) < lr:
            logger(f"Test accuracy did not improve for {config.patience} "
                   f"epochs, reducing learning rate to {scheduler.lr:g}.")
        state.scheduler = scheduler.state()
        logger(f"Epoch {record.epoch}/{config.epochs}: loss="
               f"{record.loss:.4f}, train={record.train_accuracy:.3f}, "
               f"test={record.test_accuracy:.3f}, gap={record.gap:+.3f}, "
               f"lr={lr:g}.")
        improved = record.test_accuracy > state.best_accuracy
        if improved:
            state.best_accuracy = record.test_accuracy
            state.best_epoch = record.epoch
            state.best = net.params.snapshot()
            logger(f"New best test accuracy {state.best_accuracy:.3f}.")
        if out is not None:
            __save(out, net, config, state, improved)

    if state.best is not None:
        net.params.restore(state.best)
        best = state.history[state.best_epoch - 1]
        logger(f"Finished {config.loss} training: best test accuracy "
               f"{state.best_accuracy:.3f} in epoch {state.best_epoch}, "
               f"gap {best.gap:+.3f}.")
    return state


def __save(out: Path, net: GestureNet, config: TrainConfig,
           state: TrainState, improved: bool) -> None:
    """
    Write the checkpoints and the metric history of a run.

    :param out: the output directory
    :param net: the network holding the current weights
    :param config: the training configuration
    :param state: the training state
    :param improved: did the current epoch improve the test accuracy?
    """
    snapshot: Final[dict[str, Any]] = network_snapshot(net, config, state)
    blobs: Final[dict[str, np.ndarray]] = params_to_blobs(net.params)
    if improved:
        write_checkpoint(out.resolve_inside(BEST_CHECKPOINT), snapshot,
                         blobs)
    if state.best is not None:
        blobs.update({PREFIX_BEST + k: v for k, v in state.best.items()})
    write_checkpoint(out.resolve_inside(LAST_CHECKPOINT), snapshot, blobs)
    with out.resolve_inside(HISTORY_NAME).open_for_write() as wd:
        write_lines((json.dumps(r.to_dict()) for r in state.history), wd)


def finetune_network(init: str) -> GestureNet:
    """
    Prepare a network for CTC fine-tuning from a cross-entropy checkpoint.

    The weights are taken over, the optimizer state starts afresh.

    :param init: the checkpoint with the best cross-entropy weights
    :return: the network
    """
    net, ckpt = load_network(init)
    trained: Final = ckpt.snapshot.get("train", {})
    if isinstance(trained, dict) and (trained.get("loss") == LOSS_CTC):
        logger(f"Checkpoint {init!r} was already trained with CTC.")
    return GestureNet(net.encoder, net.tcn, net.params.astype(np.float32))
