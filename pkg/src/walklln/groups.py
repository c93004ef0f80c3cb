"""Countable groups that carry the walk: integer lattices Z^d and free groups F_k.

Elements are immutable :class:`Element` values.  Lattice payloads are integer
coordinate tuples; free-group payloads are reduced words stored as tuples of
signed generator indices (``+i`` is generator ``i``, ``-i`` its inverse,
``1 <= i <= k``).

Canonical byte encoding (little-endian throughout):

* lattice(d): ``d`` signed 64-bit integers, one per coordinate.
* free(k):    unsigned 32-bit word length ``L`` followed by ``L`` signed
  32-bit generator indices.
"""
from __future__ import annotations

import string
import struct
from dataclasses import dataclass
from typing import Iterable, Sequence

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_LETTERS = string.ascii_lowercase


class GroupError(ValueError):
    """Raised when an element does not belong to the group it is used with."""


@dataclass(frozen=True)
class Element:
    kind: str
    data: tuple[int, ...]

    def __repr__(self) -> str:
        return f"Element({self.kind}, {self.data})"


@dataclass(frozen=True)
class GroupDescriptor:
    """Base descriptor.  Use :class:`Lattice` or :class:`FreeGroup`."""

    @property
    def kind(self) -> str:
        raise NotImplementedError

    def identity(self) -> Element:
        raise NotImplementedError

    def compose(self, a: Element, b: Element) -> Element:
        raise NotImplementedError

    def inverse(self, a: Element) -> Element:
        raise NotImplementedError

    def encode(self, a: Element) -> bytes:
        raise NotImplementedError

    def decode(self, raw: bytes) -> Element:
        raise NotImplementedError

    def generators(self) -> list[Element]:
        """Generators and their inverses, in a fixed order."""
        raise NotImplementedError

    def parse(self, literal: str) -> Element:
        raise NotImplementedError

    def format(self, a: Element) -> str:
        raise NotImplementedError

    def check(self, a: Element) -> None:
        raise NotImplementedError


@dataclass(frozen=True)
class Lattice(GroupDescriptor):
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, int) or self.dim < 1:
            raise GroupError(f"lattice dimension must be >= 1, got {self.dim!r}")

    @property
    def kind(self) -> str:
        return "lattice"

    def check(self, a: Element) -> None:
        if a.kind != "lattice" or len(a.data) != self.dim:
            raise GroupError(f"{a!r} is not an element of Z^{self.dim}")

    def element(self, coords: Iterable[int]) -> Element:
        a = Element("lattice", tuple(int(c) for c in coords))
        self.check(a)
        _check_int64(a.data)
        return a

    def identity(self) -> Element:
        return Element("lattice", (0,) * self.dim)

    def compose(self, a: Element, b: Element) -> Element:
        self.check(a)
        self.check(b)
        out = tuple(x + y for x, y in zip(a.data, b.data))
        _check_int64(out)
        return Element("lattice", out)

    def inverse(self, a: Element) -> Element:
        self.check(a)
        out = tuple(-x for x in a.data)
        _check_int64(out)
        return Element("lattice", out)

    def encode(self, a: Element) -> bytes:
        self.check(a)
        return struct.pack(f"<{self.dim}q", *a.data)

    def decode(self, raw: bytes) -> Element:
        if len(raw) != 8 * self.dim:
            raise GroupError(f"expected {8 * self.dim} bytes, got {len(raw)}")
        return Element("lattice", struct.unpack(f"<{self.dim}q", raw))

    def generators(self) -> list[Element]:
        out = []
        for axis in range(self.dim):
            for sign in (1, -1):
                coords = [0] * self.dim
                coords[axis] = sign
                out.append(Element("lattice", tuple(coords)))
        return out

    def parse(self, literal: str) -> Element:
        body = literal.strip().strip("()[]")
        parts = [p for p in body.replace(" ", "").split(",") if p]
        try:
            coords = [int(p) for p in parts]
        except ValueError:
            raise GroupError(f"cannot parse lattice literal {literal!r}") from None
        if len(coords) != self.dim:
            raise GroupError(f"literal {literal!r} has {len(coords)} coordinates, Z^{self.dim} needs {self.dim}")
        return self.element(coords)

    def format(self, a: Element) -> str:
        self.check(a)
        return "(" + ",".join(str(x) for x in a.data) + ")"


@dataclass(frozen=True)
class FreeGroup(GroupDescriptor):
    rank: int

    def __post_init__(self):
        if not isinstance(self.rank, int) or self.rank < 2:
            raise GroupError(f"free group rank must be >= 2, got {self.rank!r}")
        if self.rank > len(_LETTERS):
            raise GroupError(f"free group rank is limited to {len(_LETTERS)}")

    @property
    def kind(self) -> str:
        return "free"

    def check(self, a: Element) -> None:
        if a.kind != "free":
            raise GroupError(f"{a!r} is not an element of F_{self.rank}")
        for x in a.data:
            if x == 0 or abs(x) > self.rank:
                raise GroupError(f"generator index {x} out of range for F_{self.rank}")

    def word(self, letters: Sequence[int]) -> Element:
        """Build an element from any (possibly unreduced) letter sequence."""
        a = Element("free", reduce_word(letters))
        self.check(a)
        return a

    def identity(self) -> Element:
        return Element("free", ())

    def compose(self, a: Element, b: Element) -> Element:
        self.check(a)
        self.check(b)
        left, right = a.data, b.data
        # both operands are reduced, so cancellation happens only at the seam
        i = 0
        while i < len(left) and i < len(right) and left[-1 - i] == -right[i]:
            i += 1
        return Element("free", left[: len(left) - i] + right[i:])

    def inverse(self, a: Element) -> Element:
        self.check(a)
        return Element("free", tuple(-x for x in reversed(a.data)))

    def encode(self, a: Element) -> bytes:
        self.check(a)
        n = len(a.data)
        return struct.pack(f"<I{n}i", n, *a.data)

    def decode(self, raw: bytes) -> Element:
        if len(raw) < 4:
            raise GroupError("truncated free-group encoding")
        (n,) = struct.unpack_from("<I", raw)
        if len(raw) != 4 + 4 * n:
            raise GroupError(f"expected {4 + 4 * n} bytes, got {len(raw)}")
        a = Element("free", struct.unpack_from(f"<{n}i", raw, 4))
        self.check(a)
        if reduce_word(a.data) != a.data:
            raise GroupError("encoded word is not reduced")
        return a

    def generators(self) -> list[Element]:
        out = []
        for i in range(1, self.rank + 1):
            out.append(Element("free", (i,)))
            out.append(Element("free", (-i,)))
        return out

    def parse(self, literal: str) -> Element:
        """Parse tokens like ``"abA"``: lowercase is a generator, uppercase its inverse.

        ``"e"`` or ``""`` is the identity when ``e`` is not a generator name.
        """
        text = literal.strip().replace(" ", "")
        if text in ("", "1") or (text == "e" and self.rank < 5):
            return self.identity()
        letters = []
        for ch in text:
            idx = _LETTERS.find(ch.lower())
            if idx < 0 or idx >= self.rank:
                raise GroupError(f"unknown generator {ch!r} in {literal!r} for F_{self.rank}")
            letters.append(idx + 1 if ch.islower() else -(idx + 1))
        return self.word(letters)

    def format(self, a: Element) -> str:
        self.check(a)
        if not a.data:
            return "e"
        return "".join(_LETTERS[x - 1] if x > 0 else _LETTERS[-x - 1].upper() for x in a.data)


def reduce_word(letters: Iterable[int]) -> tuple[int, ...]:
    """Free reduction of a signed-letter sequence (stack based, single pass)."""
    stack: list[int] = []
    for x in letters:
        x = int(x)
        if x == 0:
            raise GroupError("generator index 0 is not allowed")
        if stack and stack[-1] == -x:
            stack.pop()
        else:
            stack.append(x)
    return tuple(stack)


def _check_int64(coords: Iterable[int]) -> None:
    for c in coords:
        if c < INT64_MIN or c > INT64_MAX:
            raise OverflowError(f"lattice coordinate {c} overflows a signed 64-bit integer")


def identity(g: GroupDescriptor) -> Element:
    return g.identity()


def compose(g: GroupDescriptor, a: Element, b: Element) -> Element:
    return g.compose(a, b)


def inverse(g: GroupDescriptor, a: Element) -> Element:
    return g.inverse(a)


def canonical_encode(g: GroupDescriptor, a: Element) -> bytes:
    return g.encode(a)


def canonical_decode(g: GroupDescriptor, raw: bytes) -> Element:
    return g.decode(raw)


def make_group(kind: str, size: int) -> GroupDescriptor:
    """Build a descriptor from config values (``"lattice"``/``dim`` or ``"free"``/``rank``)."""
    if kind == "lattice":
        return Lattice(size)
    if kind == "free":
        return FreeGroup(size)
    raise GroupError(f"unknown group kind {kind!r}; expected 'lattice' or 'free'")
