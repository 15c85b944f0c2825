"""
The binary clip container format.

A container starts with the magic bytes `THGC`, the format version as
`u16`, the frame width and height as `u16` each, the frame rate as `f32`,
and the number of frames as `u32`. Then follow the number of labels as
`u8` and the labels as `u8` each, and the number of nuclei as `u8` and
each nucleus as start frame `u32`, end frame `u32`, and class `u8`. The
frames come last as little-endian 32 bit floats in degrees Celsius,
row-major and frame after frame. All integers are little-endian.

>>> import numpy as np
>>> from thermogest.data.clip import Nucleus
>>> clip = ThermalClip(np.arange(24.0).reshape(1, 4, 6), (2, ),
...                    (Nucleus(0, 1, 2), ))
>>> back = decode_clip(encode_clip(clip), "x")
>>> back.labels, back.nuclei[0].cls, back.width, back.height
((2,), 2, 6, 4)
"""
import struct
from typing import Final

import numpy as np
from pycommons.io.path import Path

from thermogest.binary import (
    F32,
    F32_LE,
    U8,
    U16,
    U32,
    ByteReader,
    read_bytes,
)
from thermogest.data.clip import Nucleus, ThermalClip
from thermogest.errors import DataError

#: the magic bytes of clip containers
CLIP_MAGIC: Final[bytes] = b"THGC"
#: the clip container format version
CLIP_VERSION: Final[int] = 1
#: the record of one nucleus
NUCLEUS: Final[struct.Struct] = struct.Struct("<IIB")


def encode_clip(clip: ThermalClip) -> bytes:
    """
    Encode a clip into the container format.

    :param clip: the clip
    :return: the bytes
    """
    parts: Final[list[bytes]] = [
        CLIP_MAGIC, U16.pack(CLIP_VERSION), U16.pack(clip.width),
        U16.pack(clip.height), F32.pack(clip.fps), U32.pack(clip.n_frames),
        U8.pack(len(clip.labels)), bytes(clip.labels),
        U8.pack(len(clip.nuclei))]
    parts.extend(NUCLEUS.pack(n.start, n.end, n.cls) for n in clip.nuclei)
    parts.append(np.ascontiguousarray(clip.frames, dtype=F32_LE).tobytes())
    return b"".join(parts)


def decode_clip(data: bytes, what: str) -> ThermalClip:
    """
    Decode a clip from the container format.

    :param data: the bytes
    :param what: the name of the source, for error messages
    :return: the clip
    :raises BadMagicError: if the magic bytes are wrong
    :raises VersionMismatchError: if the version is not supported
    :raises TruncatedError: if the data ends early
    """
    reader: Final[ByteReader] = ByteReader(data, what)
    reader.header(CLIP_MAGIC, CLIP_VERSION)
    width: Final[int] = reader.unpack(U16)[0]
    height: Final[int] = reader.unpack(U16)[0]
    fps: Final[float] = reader.unpack(F32)[0]
    n_frames: Final[int] = reader.unpack(U32)[0]
    labels: Final[bytes] = reader.take(reader.unpack(U8)[0], "labels")
    records: Final[list[tuple]] = [reader.unpack(NUCLEUS, "nuclei")
                                   for _ in range(reader.unpack(U8)[0])]
    frames: Final[np.ndarray] = reader.floats(
        n_frames * height * width, "frame payload").reshape(
        n_frames, height, width)
    reader.finish()
    try:
        return ThermalClip(frames, tuple(labels),
                           [Nucleus(*r) for r in records], fps)
    except DataError:
        raise
    except ValueError as ve:
        raise DataError(f"{what} holds an invalid clip: {ve}") from ve


def write_clip(path: str, clip: ThermalClip) -> Path:
    """
    Write a clip container file.

    :param path: the destination path
    :param clip: the clip
    :return: the path
    """
    dest: Final[Path] = Path(path)
    with open(dest, "wb") as fd:
        fd.write(encode_clip(clip))
    return dest


def read_clip(path: str) -> ThermalClip:
    """
    Read a clip container file.

    :param path: the path to the file
    :return: the clip
    """
    data, src = read_bytes(path)
    return decode_clip(data, src)
