"""Fixed-length binary codes and their file format.

A code of length L is stored as ceil(L / 64) little-endian 64-bit words, with
bit k of the code held in word k // 64 at bit position 63 - (k % 64).  That
layout makes the hex rendering read left to right as bit 0, bit 1, ...
Codes files hold one lowercase hex word per line, L / 4 digits wide.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

__all__ = [
    "BinaryCode",
    "pack_signs",
    "codes_to_array",
    "format_code",
    "parse_code",
    "save_codes",
    "load_codes",
]


@dataclass(frozen=True)
class BinaryCode:
    """An L-bit code packed into uint64 words."""

    words: np.ndarray
    length: int

    def __post_init__(self):
        w = np.ascontiguousarray(self.words, dtype=np.uint64)
        expected = (self.length + 63) // 64
        if w.ndim != 1 or len(w) != expected:
            raise ValueError(
                f"code of length {self.length} needs {expected} words, got shape {self.words.shape}"
            )
        w.setflags(write=False)
        object.__setattr__(self, "words", w)

    def bit(self, k: int) -> int:
        if not 0 <= k < self.length:
            raise IndexError(k)
        word = int(self.words[k // 64])
        return (word >> (63 - (k % 64))) & 1

    def bits(self) -> np.ndarray:
        """Unpack to a (length,) uint8 array of 0/1 values."""
        shifts = 63 - (np.arange(self.length) % 64)
        return ((self.words[np.arange(self.length) // 64] >> shifts.astype(np.uint64)) & 1).astype(np.uint8)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BinaryCode)
            and self.length == other.length
            and bool(np.array_equal(self.words, other.words))
        )

    def __hash__(self):
        return hash((self.length, self.words.tobytes()))

    def __str__(self) -> str:
        return format_code(self)


def pack_signs(values: np.ndarray, length: int | None = None) -> BinaryCode:
    """Pack a real vector into a code: bit k = 1 iff values[k] >= 0.

    Zero maps to bit 1, the documented sign convention, so the packing is
    invariant to positive rescaling of the input.
    """
    values = np.asarray(values)
    if values.ndim != 1:
        raise ValueError("pack_signs expects a flat vector")
    L = length if length is not None else len(values)
    if len(values) != L:
        raise ValueError(f"expected {L} components, got {len(values)}")
    bits = (values >= 0).astype(np.uint8)
    n_words = (L + 63) // 64
    words = np.zeros(n_words, dtype=np.uint64)
    for k in np.flatnonzero(bits):
        words[k // 64] |= np.uint64(1) << np.uint64(63 - (k % 64))
    return BinaryCode(words=words, length=L)


def codes_to_array(codes: Sequence[BinaryCode]) -> np.ndarray:
    """Stack codes of equal length into an (n, n_words) uint64 array."""
    if not codes:
        return np.empty((0, 0), dtype=np.uint64)
    L = codes[0].length
    for c in codes:
        if c.length != L:
            raise ValueError("codes_to_array requires equal code lengths")
    return np.stack([c.words for c in codes])


def format_code(code: BinaryCode) -> str:
    """Render as lowercase hex, exactly length / 4 digits."""
    if code.length % 4:
        raise ValueError("hex rendering requires a code length divisible by 4")
    total = 0
    for w in code.words:
        total = (total << 64) | int(w)
    # Drop the unused low bits of the final partial word.
    pad = len(code.words) * 64 - code.length
    total >>= pad
    return format(total, f"0{code.length // 4}x")


def parse_code(text: str, length: int) -> BinaryCode:
    """Parse one hex word back into a code of the given length."""
    text = text.strip()
    if len(text) != length // 4:
        raise ValueError(
            f"expected {length // 4} hex digits for a {length}-bit code, got {text!r}"
        )
    total = int(text, 16)
    pad = ((length + 63) // 64) * 64 - length
    total <<= pad
    n_words = (length + 63) // 64
    words = np.array(
        [(total >> (64 * (n_words - 1 - i))) & 0xFFFFFFFFFFFFFFFF for i in range(n_words)],
        dtype=np.uint64,
    )
    return BinaryCode(words=words, length=length)


def save_codes(codes: Sequence[BinaryCode], path: Union[str, Path]) -> None:
    """Write a codes file: one hex word per line, LF endings."""
    lines = [format_code(c) for c in codes]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8", newline="\n")


def load_codes(path: Union[str, Path], length: int | None = None) -> list[BinaryCode]:
    """Read a codes file; the code length defaults to 4 bits per hex digit."""
    out = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        L = length if length is not None else 4 * len(line)
        try:
            out.append(parse_code(line, L))
        except ValueError as exc:
            raise ValueError(f"{path}, line {lineno}: {exc}") from None
    return out
