"""Test the training loop, its checkpoints, and resuming."""

from typing import Final

import numpy as np
import pytest
from numpy.testing import assert_array_equal
from pycommons.io.temp import temp_dir

from thermogest.data.clip import ThermalClip
from thermogest.data.generator import generate_clip
from thermogest.data.preprocess import AugmentParams, normalize_frames
from thermogest.errors import ConfigError, DataError
from thermogest.learning.objectives import ce_clip_loss
from thermogest.learning.optimizer import adam_step
from thermogest.learning.training import (
    BEST_CHECKPOINT,
    HISTORY_NAME,
    LAST_CHECKPOINT,
    EpochRecord,
    TrainConfig,
    finetune_network,
    load_network,
    network_snapshot,
    restore_state,
    resume_config,
    train,
)
from thermogest.model.checkpoint import Checkpoint, params_to_blobs
from thermogest.model.encoder import EncoderConfig
from thermogest.model.network import GestureNet
from thermogest.model.tcn import TcnConfig

#: a tiny encoder reading 24x32 frames
ENCODER: Final[EncoderConfig] = EncoderConfig(
    (8, 8), (24, 32), ((4, 2), (8, 2)))
#: a tiny temporal network with one frame of lookahead
TCN: Final[TcnConfig] = TcnConfig(1, 2, 4, 8, 10, 1)


def clips(seed: int, n: int) -> list[ThermalClip]:
    """
    Generate clips of all classes.

    :param seed: the seed
    :param n: the number of clips
    :return: the clips
    """
    return [generate_clip(i % 10, np.random.default_rng([seed, i]))
            for i in range(n)]


def config(epochs: int, loss: str = "ce") -> TrainConfig:
    """
    Get a fast training configuration.

    :param epochs: the number of epochs
    :param loss: the loss
    :return: the configuration
    """
    return TrainConfig(epochs=epochs, batch_size=4, lr=0.01, patience=1,
                       seed=3, loss=loss, window=12,
                       augment=AugmentParams(scale=0.1))


def test_no_epochs() -> None:
    """Make sure that training without epochs changes nothing."""
    net: Final[GestureNet] = GestureNet(ENCODER, TCN, seed=1)
    before: Final[dict[str, np.ndarray]] = net.params.snapshot()
    state = train(net, clips(1, 6), clips(2, 3), config(0))
    assert (state.epoch, state.history, state.best) == (0, [], None)
    for name, value in before.items():
        assert_array_equal(net.params.value(name), value)


def test_deterministic() -> None:
    """Make sure that two runs with the same seed agree exactly."""
    train_set: Final[list[ThermalClip]] = clips(1, 8)
    test_set: Final[list[ThermalClip]] = clips(2, 4)
    nets: Final[list[GestureNet]] = []
    for _ in range(2):
        net = GestureNet(ENCODER, TCN, seed=5)
        state = train(net, train_set, test_set, config(2))
        assert len(state.history) == 2
        assert all(isinstance(r, EpochRecord) for r in state.history)
        assert 1 <= state.best_epoch <= 2
        nets.append(net)
    for name, p in nets[0].params:
        assert_array_equal(nets[1].params.value(name), p.value)
    assert nets[0].params.step > 0


def test_resume() -> None:
    """Make sure that a resumed run ends exactly like an uninterrupted."""
    train_set: Final[list[ThermalClip]] = clips(3, 8)
    test_set: Final[list[ThermalClip]] = clips(4, 4)
    with temp_dir() as td:
        full = GestureNet(ENCODER, TCN, seed=6)
        state = train(full, train_set, test_set, config(3),
                      td.resolve_inside("full"))
        assert td.resolve_inside("full").resolve_inside(
            HISTORY_NAME).is_file()
        assert td.resolve_inside("full").resolve_inside(
            BEST_CHECKPOINT).is_file()

        part_dir = td.resolve_inside("part")
        part = GestureNet(ENCODER, TCN, seed=6)
        train(part, train_set, test_set, config(1), part_dir)
        net, ckpt = load_network(part_dir.resolve_inside(LAST_CHECKPOINT))
        resumed = train(net, train_set, test_set, config(3), part_dir,
                        ckpt)
    assert resumed.history == state.history
    assert resumed.best_epoch == state.best_epoch
    assert net.params.step == full.params.step
    for name, p in full.params:
        assert_array_equal(net.params.value(name), p.value)


def test_ctc_finetuning() -> None:
    """Fine-tune a network with CTC starting from its checkpoint."""
    train_set: Final[list[ThermalClip]] = clips(5, 6)
    test_set: Final[list[ThermalClip]] = clips(6, 3)
    with temp_dir() as td:
        net = GestureNet(ENCODER, TCN, seed=7)
        train(net, train_set, test_set, config(1), td)
        tuned = finetune_network(td.resolve_inside(BEST_CHECKPOINT))
        assert tuned.params.step == 0
        for name, p in net.params:
            assert_array_equal(tuned.params.value(name), p.value)
            assert not np.any(tuned.params[name].m)
        state = train(tuned, train_set, test_set, config(1, "ctc"))
    assert state.epoch == 1
    assert np.isfinite(state.history[0].loss)


def test_bad_setup() -> None:
    """Test the errors of impossible training setups."""
    net: Final[GestureNet] = GestureNet(ENCODER, TcnConfig(
        1, 2, 4, 8, 10, 2), seed=1)
    with pytest.raises(ConfigError):
        train(net, clips(1, 2), clips(2, 2), TrainConfig(window=2))
    with pytest.raises(ConfigError):
        TrainConfig(loss="mse")
    assert TrainConfig.from_dict(config(2).to_dict()) == config(2)


def test_incomplete_checkpoint() -> None:
    """Make sure that broken training states are data errors."""
    net: Final[GestureNet] = GestureNet(ENCODER, TCN, seed=2)
    with temp_dir() as td:
        train(net, clips(1, 4), clips(2, 2), config(1), td)
        _, ckpt = load_network(td.resolve_inside(LAST_CHECKPOINT))
    assert restore_state(ckpt).epoch == 1
    assert resume_config(ckpt) == config(1)

    for key in ("history", "epoch", "best_accuracy", "scheduler"):
        snap = network_snapshot(net, config(1), restore_state(ckpt))
        del snap["state"][key]
        with pytest.raises(DataError):
            restore_state(Checkpoint(snap, ckpt.blobs))
    snap = network_snapshot(net, config(1), restore_state(ckpt))
    del snap["state"]["history"][0]["loss"]
    with pytest.raises(DataError):
        restore_state(Checkpoint(snap, ckpt.blobs))
    snap = network_snapshot(net, config(1), restore_state(ckpt))
    snap["state"]["scheduler"] = {"lr": 0.1}
    with pytest.raises(DataError):
        restore_state(Checkpoint(snap, ckpt.blobs))
    del snap["state"]
    with pytest.raises(DataError):
        restore_state(Checkpoint(snap, ckpt.blobs))

    snap = network_snapshot(net, config(1), restore_state(ckpt))
    del snap["train"]
    with pytest.raises(DataError):
        resume_config(Checkpoint(snap, params_to_blobs(net.params)))
    snap["train"] = {"epochs": "many"}
    with pytest.raises(DataError):
        resume_config(Checkpoint(snap, params_to_blobs(net.params)))


def test_loss_decreases() -> None:
    """Make sure that small Adam steps reduce the loss of a fixed batch."""
    net: Final[GestureNet] = GestureNet(ENCODER, TCN, seed=8,
                                        dtype=np.float64)
    batch: Final[list[ThermalClip]] = clips(9, 3)
    frames: Final[np.ndarray] = np.stack(
        [normalize_frames(c.frames[:12]) for c in batch])
    losses: Final[list[float]] = []
    for _ in range(11):
        logits, cache = net.forward_train(frames)
        total = 0.0
        grad = np.zeros_like(logits)
        for b, clip in enumerate(batch):
            value, g = ce_clip_loss(logits[b], clip.cls)
            total += value / len(batch)
            grad[b] = g / len(batch)
        losses.append(total)
        net.params.zero_grad()
        net.backward_train(cache, grad)
        adam_step(net.params, 1e-4)
    assert all(np.isfinite(losses))
    assert all(b < a for a, b in zip(losses, losses[1:]))
