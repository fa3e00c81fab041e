"""Timetag stream parsing, coincidence counting and synthetic generation.

Wire formats:
  text    CSV lines "channel,time_ps" with '#' comments and blank lines
  binary  packed 9-byte records, 1 byte channel + 8 bytes little-endian
          unsigned time in picoseconds, no header

Sixteen channels feed four optical modes, four channels per mode.  A
coincidence window groups clicks into one 16-bit pattern; repeated clicks
on one channel inside a window collapse to a single click (binary
counters).  Windows anchor on the pulse clock when the repetition period
is known, otherwise on the first unconsumed click.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

__all__ = [
    "ParseError",
    "TimetagRecord",
    "TimetagStream",
    "ChannelMap",
    "PatternHistogram",
    "CoincidenceResult",
    "parse_timetags",
    "parse_timetags_text",
    "parse_timetags_binary",
    "to_csv",
    "to_binary",
    "count_coincidences",
    "generate_synthetic_timetags",
]

N_CHANNELS = 16
MODES = ("a_h", "a_v", "b_h", "b_v")
DEFAULT_WINDOW_PS = 2_500
DEFAULT_REP_PERIOD_PS = 12_500  # 80 MHz pulse clock

_RECORD_DTYPE = np.dtype([("channel", "u1"), ("time", "<u8")])


class ParseError(ValueError):
    """Malformed timetag input; the message names the line or byte offset."""


class TimetagRecord(NamedTuple):
    channel: int
    time_ps: int


@dataclass(frozen=True)
class TimetagStream:
    """Column view of a time-ordered click stream."""

    channels: np.ndarray  # uint8
    times: np.ndarray  # uint64, non-decreasing

    @classmethod
    def from_records(cls, records) -> "TimetagStream":
        records = list(records)
        ch = np.array([r[0] for r in records], dtype=np.uint8)
        t = np.array([r[1] for r in records], dtype=np.uint64)
        return cls(channels=ch, times=t)

    def __len__(self):
        return self.channels.size

    def __iter__(self):
        for c, t in zip(self.channels, self.times):
            yield TimetagRecord(int(c), int(t))

    def __eq__(self, other):
        if not isinstance(other, TimetagStream):
            return NotImplemented
        return (np.array_equal(self.channels, other.channels)
                and np.array_equal(self.times, other.times))


def _finalize(channels, times, reorder_ps, positions=None):
    """Validate and time-sort raw record arrays.

    ``positions`` maps record index to a human-readable location (text
    line numbers); binary streams fall back to 1-based record numbers.
    """
    def where(i: int) -> str:
        return positions[i] if positions is not None else f"record {i + 1}"

    if channels.size and channels.max() >= N_CHANNELS:
        idx = int(np.argmax(channels >= N_CHANNELS))
        raise ParseError(f"{where(idx)}: unknown channel {channels[idx]}")
    if times.size:
        drop = np.diff(times.astype(np.int64))
        worst = int(drop.min()) if drop.size else 0
        if worst < -int(reorder_ps):
            idx = int(np.argmin(drop)) + 1
            raise ParseError(
                f"{where(idx)}: time goes backwards by {-worst} ps, "
                f"beyond the {reorder_ps} ps reorder tolerance"
            )
        if worst < 0:
            order = np.argsort(times, kind="stable")
            channels, times = channels[order], times[order]
    return TimetagStream(channels=channels.astype(np.uint8), times=times)


def parse_timetags_text(text: str, reorder_ps: int = 1000) -> TimetagStream:
    channels, times, linenos = [], [], []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise ParseError(f"line {lineno}: expected 'channel,time_ps', got {raw!r}")
        try:
            ch = int(parts[0])
            t = int(parts[1])
        except ValueError:
            raise ParseError(f"line {lineno}: non-numeric field in {raw!r}") from None
        if ch < 0 or t < 0:
            raise ParseError(f"line {lineno}: negative value in {raw!r}")
        channels.append(ch)
        times.append(t)
        linenos.append(lineno)
    return _finalize(np.array(channels, dtype=np.uint16),
                     np.array(times, dtype=np.uint64), reorder_ps,
                     positions=[f"line {n}" for n in linenos])


def parse_timetags_binary(data: bytes, reorder_ps: int = 1000) -> TimetagStream:
    if len(data) % _RECORD_DTYPE.itemsize != 0:
        full = len(data) // _RECORD_DTYPE.itemsize
        raise ParseError(
            f"byte {full * _RECORD_DTYPE.itemsize}: truncated record "
            f"({len(data) % _RECORD_DTYPE.itemsize} trailing bytes)"
        )
    rec = np.frombuffer(data, dtype=_RECORD_DTYPE)
    return _finalize(rec["channel"].copy(), rec["time"].copy(), reorder_ps)


def parse_timetags(source, reorder_ps: int = 1000) -> TimetagStream:
    """Parse either wire format; bytes that decode as CSV text are text.

    Accepts str (text), bytes (sniffed), or a filesystem path.
    """
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, os.PathLike) or (
        isinstance(source, str) and "\n" not in source and "," not in source
        and os.path.exists(source)
    ):
        with open(source, "rb") as fh:
            source = fh.read()
    if isinstance(source, str):
        return parse_timetags_text(source, reorder_ps)
    try:
        text = source.decode("utf-8")
    except UnicodeDecodeError:
        return parse_timetags_binary(source, reorder_ps)
    head = text.lstrip()
    if not head or head[0] == "#" or head[0].isdigit():
        return parse_timetags_text(text, reorder_ps)
    return parse_timetags_binary(source, reorder_ps)


def to_csv(stream: TimetagStream) -> str:
    lines = [f"{int(c)},{int(t)}" for c, t in zip(stream.channels, stream.times)]
    return "\n".join(lines) + ("\n" if lines else "")


def to_binary(stream: TimetagStream) -> bytes:
    rec = np.empty(len(stream), dtype=_RECORD_DTYPE)
    rec["channel"] = stream.channels
    rec["time"] = stream.times
    return rec.tobytes()


# ---------------------------------------------------------------------------
# channel map


@dataclass(frozen=True)
class ChannelMap:
    """Channel -> mode assignment; exactly four channels per mode."""

    assignment: tuple  # length 16, entries in MODES

    def __post_init__(self):
        if len(self.assignment) != N_CHANNELS:
            raise ValueError("assignment must cover all 16 channels")
        for mode in MODES:
            n = sum(1 for m in self.assignment if m == mode)
            if n != 4:
                raise ValueError(f"mode {mode} has {n} channels, expected 4")

    @classmethod
    def default(cls) -> "ChannelMap":
        return cls(tuple(MODES[c // 4] for c in range(N_CHANNELS)))

    @classmethod
    def from_text(cls, text: str) -> "ChannelMap":
        assign = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"line {lineno}: expected 'channel=mode', got {raw!r}")
            left, right = (s.strip() for s in line.split("=", 1))
            try:
                ch = int(left)
            except ValueError:
                raise ParseError(f"line {lineno}: bad channel {left!r}") from None
            if not 0 <= ch < N_CHANNELS:
                raise ParseError(f"line {lineno}: channel {ch} out of range")
            if right not in MODES:
                raise ParseError(f"line {lineno}: unknown mode {right!r}")
            if ch in assign:
                raise ParseError(f"line {lineno}: duplicate channel {ch}")
            assign[ch] = right
        if len(assign) != N_CHANNELS:
            missing = sorted(set(range(N_CHANNELS)) - set(assign))
            raise ParseError(f"unassigned channels: {missing}")
        try:
            return cls(tuple(assign[c] for c in range(N_CHANNELS)))
        except ValueError as exc:  # unbalanced mode assignment
            raise ParseError(str(exc)) from None

    def channels_of(self, mode: str) -> tuple:
        return tuple(c for c in range(N_CHANNELS) if self.assignment[c] == mode)

    def mode_masks(self) -> dict:
        masks = {m: 0 for m in MODES}
        for c, m in enumerate(self.assignment):
            masks[m] |= 1 << c
        return masks


# ---------------------------------------------------------------------------
# coincidence counting


@dataclass(frozen=True)
class PatternHistogram:
    """Counts of 16-bit click patterns over processed windows."""

    counts: dict  # pattern mask -> count
    windows: int
    window_ps: float

    def total_clicks(self) -> int:
        return sum(int(mask).bit_count() * n for mask, n in self.counts.items())

    def nonzero_windows(self) -> int:
        return sum(n for mask, n in self.counts.items() if mask != 0)

    def reduce(self, cmap: ChannelMap) -> dict:
        """Collapse channel patterns to per-mode click-count 4-tuples."""
        masks = cmap.mode_masks()
        out = {}
        for mask, n in self.counts.items():
            key = tuple(int(mask & masks[m]).bit_count() for m in MODES)
            out[key] = out.get(key, 0) + n
        return out


@dataclass(frozen=True)
class CoincidenceResult:
    histogram: PatternHistogram
    pattern_counts: dict  # (r_ah, r_av, r_bh, r_bv) -> count
    modes: tuple = MODES


def _pulse_anchored(channels, times, window_ps, rep_period_ps):
    wid = times // np.uint64(rep_period_ps)
    offset = times - wid * np.uint64(rep_period_ps)
    keep = offset < window_ps
    wid, ch = wid[keep], channels[keep]
    if wid.size == 0:
        return np.empty(0, dtype=np.uint64), np.empty(0, dtype=np.uint32), int(keep.size - keep.sum())
    bits = (np.uint32(1) << ch.astype(np.uint32))
    uniq, start = np.unique(wid, return_index=True)
    masks = np.bitwise_or.reduceat(bits, start)
    return uniq, masks, int(keep.size - keep.sum())


def _first_click_anchored(channels, times, window_ps):
    masks = []
    i, n = 0, times.size
    while i < n:
        end_time = times[i] + np.uint64(int(window_ps))
        j = int(np.searchsorted(times, end_time, side="left"))
        mask = 0
        for c in channels[i:j]:
            mask |= 1 << int(c)
        masks.append(mask)
        i = j
    return masks


def count_coincidences(records, window_ps: float = DEFAULT_WINDOW_PS,
                       cmap: ChannelMap | None = None,
                       rep_period_ps: int | None = None,
                       n_windows: int | None = None) -> CoincidenceResult:
    """One-pass coincidence pattern counting.

    With ``rep_period_ps`` windows open at each pulse time; clicks later
    than ``window_ps`` into the period are discarded.  ``n_windows``
    supplies the number of pulses covered so empty windows enter the
    zero-pattern bin (else the span of observed pulse ids is used).
    Without a pulse clock, each window opens at the first unconsumed
    click.
    """
    if cmap is None:
        cmap = ChannelMap.default()
    if not isinstance(records, TimetagStream):
        records = TimetagStream.from_records(records)
    channels, times = records.channels, records.times
    if times.size and np.any(np.diff(times.astype(np.int64)) < 0):
        raise ValueError("records must be time-ordered; parse with a reorder buffer")

    counts: dict = {}
    if rep_period_ps is not None:
        if window_ps > rep_period_ps:
            raise ValueError("window must not exceed the repetition period")
        uniq, masks, _ = _pulse_anchored(channels, times, window_ps, rep_period_ps)
        vals, freq = np.unique(masks, return_counts=True) if masks.size else ([], [])
        for v, f in zip(vals, freq):
            counts[int(v)] = int(f)
        occupied = int(uniq.size)
        if n_windows is None:
            n_windows = int(uniq.max()) + 1 if occupied else 0
        if n_windows < occupied:
            raise ValueError("n_windows smaller than the number of occupied pulses")
        empty = n_windows - occupied
        if empty > 0:
            counts[0] = counts.get(0, 0) + empty
    else:
        masks = _first_click_anchored(channels, times, window_ps)
        for m in masks:
            counts[m] = counts.get(m, 0) + 1
        n_windows = len(masks)

    hist = PatternHistogram(counts=counts, windows=int(n_windows),
                            window_ps=float(window_ps))
    return CoincidenceResult(histogram=hist, pattern_counts=hist.reduce(cmap))


# ---------------------------------------------------------------------------
# synthetic streams


def generate_synthetic_timetags(distribution, pulses: int,
                                rep_period_ps: int = DEFAULT_REP_PERIOD_PS,
                                jitter_ps: int = 100, seed: int = 0,
                                cmap: ChannelMap | None = None) -> TimetagStream:
    """Sample a pulsed click stream from a detection-pattern distribution.

    ``distribution`` provides ``patterns`` (4-tuples over modes) and
    ``probs``; any leftover probability mass goes to the empty pattern.
    Each pattern's clicks land on channels drawn uniformly without
    replacement within the mode's four channels, at pulse time plus a
    uniform jitter in [0, jitter_ps].  Same seed, same stream, byte for
    byte.
    """
    if pulses < 1:
        raise ValueError("pulses must be >= 1")
    if jitter_ps < 0:
        raise ValueError("jitter_ps must be >= 0")
    if cmap is None:
        cmap = ChannelMap.default()
    patterns = [tuple(int(v) for v in p) for p in distribution.patterns]
    probs = np.asarray(distribution.probs, dtype=float)
    if np.any(probs < -1e-15):
        raise ValueError("distribution has negative probabilities")
    probs = np.clip(probs, 0.0, None)
    leftover = 1.0 - probs.sum()
    if leftover < -1e-9:
        raise ValueError("distribution probabilities exceed 1")
    zero = (0, 0, 0, 0)
    if zero in patterns:
        probs[patterns.index(zero)] += max(leftover, 0.0)
    else:
        patterns.append(zero)
        probs = np.append(probs, max(leftover, 0.0))
    probs = probs / probs.sum()

    rng = np.random.default_rng(seed)
    draw = rng.choice(len(patterns), size=pulses, p=probs)

    mode_channels = [np.array(cmap.channels_of(m), dtype=np.uint8) for m in MODES]
    chunks_ch, chunks_t = [], []
    for k, pat in enumerate(patterns):
        total = sum(pat)
        if total == 0:
            continue
        idx = np.nonzero(draw == k)[0]
        if idx.size == 0:
            continue
        base = idx.astype(np.uint64) * np.uint64(rep_period_ps)
        for mode_i, r in enumerate(pat):
            if r == 0:
                continue
            # batched unordered sampling of r of the mode's 4 channels
            slots = np.argsort(rng.random((idx.size, 4)), axis=1)[:, :r]
            chs = mode_channels[mode_i][slots]  # (n_pulses_with_pattern, r)
            jit = (rng.integers(0, jitter_ps + 1, size=chs.shape).astype(np.uint64)
                   if jitter_ps > 0 else np.zeros(chs.shape, dtype=np.uint64))
            chunks_ch.append(chs.ravel())
            chunks_t.append((base[:, None] + jit).ravel())

    if not chunks_ch:
        return TimetagStream(channels=np.empty(0, dtype=np.uint8),
                             times=np.empty(0, dtype=np.uint64))
    ch = np.concatenate(chunks_ch).astype(np.uint8)
    t = np.concatenate(chunks_t)
    order = np.lexsort((ch, t))
    return TimetagStream(channels=ch[order], times=t[order])
