"""
Sliding-window inference on a stream of thermal frames.

Each incoming frame is normalized with running statistics and encoded
exactly once; its embedding goes into a ring buffer holding the last `N`
embeddings. The temporal network is then evaluated over the buffered
window and the probability row at offset `delta` from the right edge is
emitted. It belongs to the frame `t - delta`, so the output lags the input
by `delta` frames. Once emitted, a row never changes.

Until `N` frames have arrived, the window holds only the frames seen so
far. The temporal convolutions pad every layer with zeros beyond the
window border, exactly as they do at the start of a clip during training.
Rows emitted before the window was first full are flagged as `warmup`.

:class:`EventExtractor` turns the emitted rows into detection events: a
run of consecutive rows whose most likely class is the same gesture class
with a probability of at least `floor` yields one event at the row with
the highest probability.

>>> rows = np.array([[0.7, 0.3], [0.1, 0.9], [0.6, 0.4]])
>>> extract_events(rows)
[DetectionEvent(frame=1, cls=1, score=0.9, warmup=False)]
>>> lag_text(1, 16.0)
'lag=1 frame (62.5 ms @16FPS)'
"""
from collections import deque
from dataclasses import dataclass
from math import sqrt
from typing import Final, Iterable, Iterator

import numpy as np
from pycommons.io.console import logger
from pycommons.types import check_int_range, type_error

from thermogest.data.preprocess import MIN_STD
from thermogest.errors import ConfigError
from thermogest.model import numerics as nm
from thermogest.model.network import GestureNet
from thermogest.model.tcn import NON_GESTURE

#: the default number of frames in the window
DEFAULT_WINDOW: Final[int] = 48
#: the default output offset from the right edge of the window
DEFAULT_DELTA: Final[int] = 1
#: the default half-life of the running statistics in frames
DEFAULT_HALF_LIFE: Final[float] = 64.0
#: the default lowest probability of a detection
DEFAULT_FLOOR: Final[float] = 0.05


def lag_text(delta: int, fps: float) -> str:
    """
    Describe the latency caused by an output offset.

    :param delta: the output offset in frames
    :param fps: the frame rate
    :return: the description

    >>> lag_text(0, 16.0)
    'lag=0 frames (0 ms @16FPS)'
    """
    return (f"lag={delta} frame{'' if delta == 1 else 's'} "
            f"({1000.0 * delta / fps:g} ms @{fps:g}FPS)")


class EmaNormalizer:
    """
    Standardize frames with exponentially weighted running statistics.

    >>> n = EmaNormalizer()
    >>> n(np.array([[1.0, 3.0]])).tolist()
    [[-1.0, 1.0]]
    """

    def __init__(self, half_life: float = DEFAULT_HALF_LIFE) -> None:
        """
        Create the normalizer.

        :param half_life: the number of frames after which the weight of
            an observation has halved
        """
        if not isinstance(half_life, float | int):
            raise type_error(half_life, "half_life", float)
        if not half_life > 0.0:
            raise ConfigError(
                f"half_life must be positive, got {half_life}.")
        #: the weight of a new frame
        self.alpha: Final[float] = 1.0 - 0.5 ** (1.0 / half_life)
        #: the running mean
        self.mean: float | None = None
        #: the running variance
        self.var: float = 0.0

    def __call__(self, frame: np.ndarray) -> np.ndarray:
        """
        Update the statistics with a frame and normalize it.

        The statistics are initialized from the first frame.

        :param frame: the frame in Celsius
        :return: the normalized frame
        """
        x: Final[np.ndarray] = nm.check_finite(
            frame, "frame").astype(np.float64)
        if self.mean is None:
            self.mean = float(x.mean())
            self.var = float(x.var())
        else:
            a: Final[float] = self.alpha
            self.mean = (1.0 - a) * self.mean + a * float(x.mean())
            self.var = (1.0 - a) * self.var + a * float(
                np.mean(np.square(x - self.mean)))
        return ((x - self.mean) / max(sqrt(self.var), MIN_STD)).astype(
            np.float32)


@dataclass(frozen=True)
class StreamRecord:
    """One emitted prediction."""

    #: the index of the frame whose arrival triggered the emission
    frame: int
    #: the frame the prediction belongs to, `frame - delta`
    attributed: int
    #: the class probabilities
    probs: np.ndarray
    #: was the window not yet full?
    warmup: bool


@dataclass(frozen=True)
class DetectionEvent:
    """A detected gesture."""

    #: the frame of the highest probability of the run
    frame: int
    #: the gesture class
    cls: int
    #: the highest probability of the run
    score: float
    #: was the peak emitted before the window was first full?
    warmup: bool = False


class StreamState:
    """The state of one stream of frames."""

    def __init__(self, net: GestureNet, window: int = DEFAULT_WINDOW,
                 delta: int = DEFAULT_DELTA,
                 normalizer: EmaNormalizer | None = None) -> None:
        """
        Create the stream state.

        :param net: the network, which must not change during the stream
        :param window: the number of frames `N` of the window
        :param delta: the output offset from the right edge of the window
        :param normalizer: the frame normalizer, or `None` if the frames
            arrive normalized already
        """
        if not isinstance(net, GestureNet):
            raise type_error(net, "net", GestureNet)
        #: the network
        self.net: Final[GestureNet] = net
        #: the window length
        self.window: Final[int] = check_int_range(
            window, "window", 1, 1_000_000)
        if not isinstance(delta, int):
            raise type_error(delta, "delta", int)
        if not 0 <= delta < window:
            raise ConfigError(
                f"Output offset {delta} is outside of the window of "
                f"{window} frames.")
        #: the output offset
        self.delta: Final[int] = delta
        #: the frame normalizer
        self.normalizer: Final[EmaNormalizer | None] = normalizer
        #: the embeddings of the most recent frames
        self.embeddings: Final[deque[np.ndarray]] = deque(maxlen=window)
        #: the number of frames ingested so far
        self.count: int = 0

    def push_frame(self, frame: np.ndarray) -> StreamRecord | None:
        """
        Ingest a frame and emit the prediction of an earlier frame.

        :param frame: the frame of shape `[H, W]`
        :return: the prediction for frame `t - delta`, or `None` while
            fewer than `delta + 1` frames have arrived
        """
        if frame.ndim != 2:
            raise ConfigError(
                f"Frames must have shape [H, W], got {frame.shape}.")
        x: Final[np.ndarray] = frame if self.normalizer is None \
            else self.normalizer(frame)
        self.embeddings.append(self.net.embed(x[None])[0])
        t: Final[int] = self.count
        self.count += 1
        if t < self.delta:
            return None
        warmup: Final[bool] = t < self.window - 1
        if t == self.window - 1:
            logger(f"Stream window of {self.window} frames is full.")
        probs: Final[np.ndarray] = self.net.window_probabilities(
            np.stack(self.embeddings))
        return StreamRecord(t, t - self.delta,
                            probs[probs.shape[0] - 1 - self.delta], warmup)


def stream_frames(net: GestureNet, frames: Iterable[np.ndarray],
                  window: int = DEFAULT_WINDOW, delta: int = DEFAULT_DELTA,
                  normalizer: EmaNormalizer | None = None) \
        -> Iterator[StreamRecord]:
    """
    Run a network over a sequence of frames.

    :param net: the network
    :param frames: the frames
    :param window: the window length
    :param delta: the output offset
    :param normalizer: the frame normalizer, `None` for normalized frames
    :return: the emitted records
    """
    state: Final[StreamState] = StreamState(net, window, delta, normalizer)
    for frame in frames:
        record = state.push_frame(frame)
        if record is not None:
            yield record


def recompute_record(net: GestureNet, frames: np.ndarray, t: int,
                     window: int = DEFAULT_WINDOW,
                     delta: int = DEFAULT_DELTA) -> np.ndarray:
    """
    Recompute the prediction emitted at frame `t` without any cache.

    Every frame of the window is encoded anew.

    :param net: the network
    :param frames: the normalized frames of shape `[T, H, W]`
    :param t: the index of the most recent frame
    :param window: the window length
    :param delta: the output offset
    :return: the probability row for frame `t - delta`
    """
    start: Final[int] = max(0, t + 1 - window)
    emb: Final[np.ndarray] = np.stack([
        net.embed(frames[i:i + 1])[0] for i in range(start, t + 1)])
    probs: Final[np.ndarray] = net.window_probabilities(emb)
    return probs[probs.shape[0] - 1 - delta]


class EventExtractor:
    """
    Turn a stream of probability rows into detection events.

    >>> ex = EventExtractor()
    >>> [ex.push(i, np.array(p)) for i, p in enumerate(
    ...     [[0.2, 0.8], [0.9, 0.1]])]
    [None, DetectionEvent(frame=0, cls=1, score=0.8, warmup=False)]
    """

    def __init__(self, floor: float = DEFAULT_FLOOR,
                 blank: int = NON_GESTURE) -> None:
        """
        Create the extractor.

        :param floor: the lowest probability a run frame may have
        :param blank: the non-gesture class
        """
        if not 0.0 <= floor <= 1.0:
            raise ConfigError(f"floor must be in [0, 1], got {floor}.")
        #: the lowest probability
        self.floor: Final[float] = float(floor)
        #: the non-gesture class
        self.blank: Final[int] = blank
        #: the class of the current run, or `None`
        self.__cls: int | None = None
        #: the peak frame of the current run
        self.__frame: int = -1
        #: the peak score of the current run
        self.__score: float = 0.0
        #: the warm-up flag of the peak
        self.__warmup: bool = False
        #: the last frame index seen
        self.__last: int = -1

    def push(self, frame: int, probs: np.ndarray,
             warmup: bool = False) -> DetectionEvent | None:
        """
        Process the probability row of the next frame.

        :param frame: the frame index, larger than all previous ones
        :param probs: the class probabilities
        :param warmup: was the row emitted during warm-up?
        :return: the event of a run that just ended, if any
        """
        if frame <= self.__last:
            raise ConfigError(
                f"Frame {frame} does not follow frame {self.__last}.")
        gap: Final[bool] = frame != self.__last + 1
        self.__last = frame
        k: Final[int] = int(np.argmax(probs))
        score: Final[float] = float(probs[k])
        active: Final[bool] = (k != self.blank) and (score >= self.floor)
        event: DetectionEvent | None = None
        if (self.__cls is not None) and (
                gap or (not active) or (k != self.__cls)):
            event = self.finish()
        if active:
            if self.__cls is None:
                self.__cls = k
                self.__frame = frame
                self.__score = score
                self.__warmup = warmup
            elif score > self.__score:
                self.__frame = frame
                self.__score = score
                self.__warmup = warmup
        return event

    def finish(self) -> DetectionEvent | None:
        """
        End the current run.

        :return: the event of the run, if there was one
        """
        if self.__cls is None:
            return None
        event: Final[DetectionEvent] = DetectionEvent(
            self.__frame, self.__cls, self.__score, self.__warmup)
        self.__cls = None
        return event


def extract_events(probs: np.ndarray, floor: float = DEFAULT_FLOOR,
                   first: int = 0,
                   blank: int = NON_GESTURE) -> list[DetectionEvent]:
    """
    Extract the detection events of a probability sequence.

    :param probs: the probability rows of consecutive frames, `[T, P]`
    :param floor: the lowest probability a run frame may have
    :param first: the frame index of the first row
    :param blank: the non-gesture class
    :return: the events in chronological order

    >>> p = np.array([[0.7, 0.3, 0.0], [0.1, 0.9, 0.0], [0.6, 0.4, 0.0],
    ...               [0.1, 0.8, 0.1], [0.2, 0.0, 0.8]])
    >>> [(e.frame, e.cls) for e in extract_events(p)]
    [(1, 1), (3, 1), (4, 2)]
    """
    ex: Final[EventExtractor] = EventExtractor(floor, blank)
    events: Final[list[DetectionEvent]] = []
    for i, row in enumerate(probs):
        e = ex.push(first + i, row)
        if e is not None:
            events.append(e)
    e = ex.finish()
    if e is not None:
        events.append(e)
    return events


def detect_stream(net: GestureNet, frames: Iterable[np.ndarray],
                  window: int = DEFAULT_WINDOW, delta: int = DEFAULT_DELTA,
                  floor: float = DEFAULT_FLOOR,
                  normalizer: EmaNormalizer | None = None) \
        -> list[DetectionEvent]:
    """
    Detect the gestures in a stream of frames.

    :param net: the network
    :param frames: the frames
    :param window: the window length
    :param delta: the output offset
    :param floor: the lowest probability of a detection
    :param normalizer: the frame normalizer, `None` for normalized frames
    :return: the events in chronological order
    """
    ex: Final[EventExtractor] = EventExtractor(floor)
    events: Final[list[DetectionEvent]] = []
    for rec in stream_frames(net, frames, window, delta, normalizer):
        e = ex.push(rec.attributed, rec.probs, rec.warmup)
        if e is not None:
            events.append(e)
    e = ex.finish()
    if e is not None:
        events.append(e)
    return events
