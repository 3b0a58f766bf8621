"""Symbolic generalized cumulants as signed products of ordered bath blocks.

A cumulant of order ``n`` with ``k`` left (``tau``) and ``n - k`` right (``s``)
time arguments is a signed sum of products of blocks ``D(tau_a..tau_b, s_c..s_e)``.
Exactly one block per product is *dotted*: it is the time-differentiated block
and always holds ``tau_1`` and/or ``s_1``.  Differentiation pins one of those
variables to the current time ``t``, which is what ``pin_terms`` enumerates.

Blocks are scalars, so a product is keyed by its dotted block plus the sorted
multiset of the remaining blocks; equal keys merge with summed coefficients.
"""
from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Mapping, Sequence

import numpy as np

from tclgen.bath import BathModel, d_block


class VanishingRule(str, enum.Enum):
    NONE = "none"
    MEAN_ZERO = "mean_zero"
    GAUSSIAN_MEAN_ZERO = "gaussian_mean_zero"


class Pin(str, enum.Enum):
    TAU_ONE = "tau1"
    S_ONE = "s1"


@dataclass(frozen=True, order=True)
class BlockSpec:
    tau: tuple[int, ...]
    s: tuple[int, ...]
    dotted: bool = False

    def __post_init__(self):
        if not self.tau and not self.s:
            raise ValueError("block with no time arguments")
        for r in (self.tau, self.s):
            if r and tuple(r) != tuple(range(r[0], r[0] + len(r))):
                raise ValueError(f"non-contiguous range {r}")

    @property
    def size(self) -> int:
        return len(self.tau) + len(self.s)

    def variables(self) -> tuple[str, ...]:
        return tuple(f"tau{i}" for i in self.tau) + tuple(f"s{i}" for i in self.s)

    def render(self) -> str:
        tau = ",".join(f"τ{i}" for i in self.tau)
        s = ",".join(f"s{i}" for i in self.s)
        inner = f"{tau};{s}" if tau and s else tau or s
        return f"{'dD' if self.dotted else 'D'}({inner})"


@dataclass(frozen=True)
class CumulantTerm:
    coeff: int
    blocks: tuple[BlockSpec, ...]

    @property
    def k(self) -> int:
        return sum(len(b.tau) for b in self.blocks)

    @property
    def n(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def dotted(self) -> BlockSpec:
        return self.blocks[0]

    @property
    def sign(self) -> int:
        return 1 if self.coeff > 0 else -1

    def render(self) -> str:
        mag = abs(self.coeff)
        head = ("+ " if self.coeff > 0 else "- ") + (f"{mag} " if mag != 1 else "")
        return head + "·".join(b.render() for b in self.blocks)


@dataclass(frozen=True)
class PinnedTerm:
    base: CumulantTerm
    pin: Pin

    @property
    def pinned_variable(self) -> str:
        return self.pin.value

    def free_variables(self) -> tuple[str, ...]:
        out = []
        for b in self.base.blocks:
            out.extend(v for v in b.variables() if v != self.pinned_variable)
        return tuple(out)


def _key(blocks: Sequence[BlockSpec]) -> tuple[BlockSpec, ...]:
    return (blocks[0],) + tuple(sorted(blocks[1:]))


def _merge(pairs) -> tuple[CumulantTerm, ...]:
    acc: dict[tuple, int] = defaultdict(int)
    for coeff, blocks in pairs:
        acc[_key(blocks)] += coeff
    terms = [CumulantTerm(c, key) for key, c in acc.items() if c != 0]
    terms.sort(key=lambda tm: (len(tm.blocks), tm.blocks, tm.coeff))
    return tuple(terms)


def _check(n: int, k: int) -> None:
    if n < 1:
        raise ValueError(f"order must be >= 1, got {n}")
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")


def _splits(k: int, m: int) -> Iterator[list[tuple[int, int]]]:
    """Sequences of non-empty (tau count, s count) blocks exhausting ``k`` and ``m``."""
    if k == 0 and m == 0:
        yield []
        return
    for a in range(k + 1):
        for b in range(m + 1):
            if a + b == 0:
                continue
            for rest in _splits(k - a, m - b):
                yield [(a, b)] + rest


def _blocks_from_sizes(sizes: list[tuple[int, int]]) -> tuple[BlockSpec, ...]:
    blocks, ot, os_ = [], 0, 0
    for j, (a, b) in enumerate(sizes):
        blocks.append(BlockSpec(tuple(range(ot + 1, ot + a + 1)),
                                tuple(range(os_ + 1, os_ + b + 1)), dotted=(j == 0)))
        ot, os_ = ot + a, os_ + b
    return tuple(blocks)


def expand_direct(n: int, k: int) -> tuple[CumulantTerm, ...]:
    """Cumulant terms from the explicit sum over nondecreasing split sequences.

    Split sequences with a repeated split point would produce a block without
    arguments; such sequences are dropped whole.  What remains is exactly the
    set of compositions into non-empty blocks, with sign ``(-1)^(q+1)`` for
    ``q`` blocks.  Exponential in ``n``; intended as an oracle for small ``n``.
    """
    _check(n, k)
    pairs = (((-1) ** (len(sz) + 1), _blocks_from_sizes(sz)) for sz in _splits(k, n - k))
    return _merge(pairs)


@lru_cache(maxsize=None)
def _recursive(l: int, r: int) -> tuple[CumulantTerm, ...]:
    head = BlockSpec(tuple(range(1, l + 1)), tuple(range(1, r + 1)), dotted=True)
    pairs = [(1, (head,))]
    for lp in range(l + 1):
        for rp in range(r + 1):
            if (lp, rp) in ((0, 0), (l, r)):
                continue
            tail = BlockSpec(tuple(range(lp + 1, l + 1)), tuple(range(rp + 1, r + 1)))
            for term in _recursive(lp, rp):
                pairs.append((-term.coeff, term.blocks + (tail,)))
    return _merge(pairs)


def expand_recursive(n: int, k: int) -> tuple[CumulantTerm, ...]:
    """Cumulant terms from the recursion over lower orders (memoized)."""
    _check(n, k)
    return _recursive(k, n - k)


def _vanishes(block: BlockSpec, rule: VanishingRule) -> bool:
    if rule == VanishingRule.MEAN_ZERO:
        return block.size == 1
    if rule == VanishingRule.GAUSSIAN_MEAN_ZERO:
        return block.size % 2 == 1
    return False


def suppress_vanishing(terms: Sequence[CumulantTerm], rule) -> tuple[CumulantTerm, ...]:
    rule = VanishingRule(rule)
    return tuple(t for t in terms if not any(_vanishes(b, rule) for b in t.blocks))


@lru_cache(maxsize=None)
def cumulant_terms(n: int, k: int, rule: str = "none") -> tuple[CumulantTerm, ...]:
    """Cached production term list: recursion followed by suppression."""
    return suppress_vanishing(expand_recursive(n, k), VanishingRule(rule))


def pin_terms(terms: Sequence[CumulantTerm]) -> tuple[PinnedTerm, ...]:
    out = []
    for term in terms:
        if 1 in term.dotted.tau:
            out.append(PinnedTerm(term, Pin.TAU_ONE))
        if 1 in term.dotted.s:
            out.append(PinnedTerm(term, Pin.S_ONE))
    return tuple(out)


def eval_pinned(term: PinnedTerm, free_times: Mapping[str, object], t: float, b: BathModel):
    """Value of one pinned product at the given free times.

    ``free_times`` maps variable names (``"tau2"``, ``"s1"``, ...) to scalars or
    equal-length arrays and must cover exactly the unpinned variables.
    """
    expected = set(term.free_variables())
    if set(free_times) != expected:
        raise ValueError(f"free times {sorted(free_times)} do not match {sorted(expected)}")
    times = dict(free_times)
    times[term.pinned_variable] = t
    value = term.base.coeff
    for block in term.base.blocks:
        value = value * d_block(b, [times[f"tau{i}"] for i in block.tau],
                                [times[f"s{i}"] for i in block.s])
    return value


def eval_cumulant(terms: Sequence[CumulantTerm], free_times: Mapping[str, object], t: float,
                  b: BathModel, pin: Pin):
    """Sum of all products pinned at ``pin``; variables absent from a product are ignored."""
    pin = Pin(pin)
    total = 0j
    for pt in pin_terms(terms):
        if pt.pin != pin:
            continue
        total = total + eval_pinned(pt, {v: free_times[v] for v in pt.free_variables()}, t, b)
    return total


def render_terms(terms: Sequence[CumulantTerm]) -> str:
    return "  ".join(t.render() for t in terms)
