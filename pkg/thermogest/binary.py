"""
Helpers for the little-endian binary file formats.

Both the clip container and the checkpoint files start with four magic
bytes and a format version and then hold fixed-size records and raw
little-endian 32-bit float payloads. :class:`ByteReader` walks over the
bytes of such a file and raises the matching
:class:`~thermogest.errors.DataError` when the file is corrupted.

>>> r = ByteReader(b"ABCD\\x01\\x00\\x07", "x")
>>> r.header(b"ABCD", 1)
>>> r.unpack(U8)
(7,)
>>> try:
...     r.unpack(U32)
... except TruncatedError as te:
...     print(te.error_code)
truncated
"""
import struct
from typing import Final

import numpy as np
from pycommons.io.path import Path
from pycommons.types import type_error

from thermogest.errors import (
    BadMagicError,
    DataError,
    TruncatedError,
    VersionMismatchError,
)

#: an unsigned byte
U8: Final[struct.Struct] = struct.Struct("<B")
#: an unsigned 16 bit integer
U16: Final[struct.Struct] = struct.Struct("<H")
#: an unsigned 32 bit integer
U32: Final[struct.Struct] = struct.Struct("<I")
#: a 32 bit float
F32: Final[struct.Struct] = struct.Struct("<f")
#: the little-endian 32 bit float type of all payloads
F32_LE: Final[np.dtype] = np.dtype("<f4")


def read_bytes(path: str) -> tuple[bytes, Path]:
    """
    Read all bytes of an existing binary file.

    :param path: the path to the file
    :return: the bytes and the canonical path
    :raises DataError: if the file does not exist
    """
    src: Final[Path] = Path(path)
    if not src.is_file():
        raise DataError(f"File {src!r} does not exist.")
    with open(src, "rb") as fd:
        return fd.read(), src


class ByteReader:
    """A cursor over the bytes of a binary file."""

    def __init__(self, data: bytes, what: str) -> None:
        """
        Create the reader.

        :param data: the bytes
        :param what: the name of the file, for error messages
        """
        if not isinstance(data, bytes):
            raise type_error(data, "data", bytes)
        #: the data
        self.__data: Final[bytes] = data
        #: the name of the file
        self.__what: Final[str] = what
        #: the current offset
        self.offset: int = 0

    def take(self, n: int, part: str) -> bytes:
        """
        Take the next bytes.

        :param n: the number of bytes
        :param part: the name of the part being read
        :return: the bytes
        :raises TruncatedError: if fewer than `n` bytes remain
        """
        have: Final[int] = len(self.__data) - self.offset
        if have < n:
            raise TruncatedError(
                f"{self.__what} is truncated in the {part}: expected {n} "
                f"bytes but only {have} remain.")
        res: Final[bytes] = self.__data[self.offset:self.offset + n]
        self.offset += n
        return res

    def unpack(self, fmt: struct.Struct, part: str = "header") -> tuple:
        """
        Read one fixed-size record.

        :param fmt: the record structure
        :param part: the name of the part being read
        :return: the unpacked values
        """
        return fmt.unpack(self.take(fmt.size, part))

    def floats(self, count: int, part: str) -> np.ndarray:
        """
        Read a block of little-endian 32 bit floats.

        :param count: the number of floats
        :param part: the name of the part being read
        :return: a writable native 32 bit float array
        """
        return np.frombuffer(self.take(count * F32_LE.itemsize, part),
                             dtype=F32_LE).astype(np.float32)

    def header(self, magic: bytes, version: int) -> None:
        """
        Check the magic bytes and the version.

        :param magic: the expected magic bytes
        :param version: the supported version
        :raises BadMagicError: if the magic bytes differ
        :raises VersionMismatchError: if the version differs
        """
        got: Final[bytes] = self.__data[:len(magic)]
        if got != magic:
            raise BadMagicError(
                f"{self.__what} starts with {got!r}, expected {magic!r}.")
        self.offset = len(magic)
        ver: Final[int] = self.unpack(U16)[0]
        if ver != version:
            raise VersionMismatchError(
                f"{self.__what} has format version {ver}, only {version} "
                "is supported.")

    def finish(self) -> None:
        """Make sure that all bytes were consumed."""
        rest: Final[int] = len(self.__data) - self.offset
        if rest != 0:
            raise DataError(
                f"{self.__what} has {rest} trailing bytes: expected "
                f"{self.offset} bytes but found {len(self.__data)}.")
