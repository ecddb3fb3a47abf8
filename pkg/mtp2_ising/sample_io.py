"""Plain-text readers for samples, graphs and probability tables."""

import logging
import re
from collections.abc import Callable
from pathlib import Path

import numpy as np

from mtp2_ising.config import SampleFormat
from mtp2_ising.errors import SampleFormatError
from mtp2_ising.ising import Graph
from mtp2_ising.states import check_dim
from mtp2_ising.tables import ProbTable, SampleCounts

logger = logging.getLogger(__name__)

Warn = Callable[[str], None]

MAX_COUNT = 2**62
TABLE_DRIFT = 1e-6

_SPLIT = re.compile(r"[,\s]+")
_DIM_HEADER = re.compile(r"^#\s*d\s*=\s*(\d+)\s*$")
_NUMBER = re.compile(r"^[+-]?(\d|0[bx])")


def _log_warning(message: str) -> None:
    logger.warning(message)


def read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SampleFormatError(f"cannot read {path}: {exc}") from exc


def _tokenize(text: str) -> tuple[list[list[str]], int | None]:
    """Split into token rows, dropping comments and a leading non-numeric header."""
    rows: list[list[str]] = []
    header_dim = None
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            if match := _DIM_HEADER.match(line):
                header_dim = int(match.group(1))
            continue
        tokens = [t for t in _SPLIT.split(line) if t]
        if not rows and not _NUMBER.match(tokens[0]):
            continue
        rows.append(tokens)
    return rows, header_dim


def _detect_format(rows: list[list[str]], warn: Warn) -> SampleFormat:
    values = {t for row in rows for t in row}
    if values <= {"-1", "1", "+1"}:
        return SampleFormat.PM1
    if values <= {"0", "1"}:
        if all(len(row) == 2 for row in rows):
            warn(
                "two-column 0/1 data read as 0/1 rows; pass --format counts "
                "or a '# d=' header for bitmask,count lines"
            )
        return SampleFormat.ZERO_ONE
    if values <= {"-1", "0", "1", "+1"}:
        raise SampleFormatError("mixed alphabets: rows contain -1, 0 and 1")
    return SampleFormat.COUNTS


def _parse_rows(rows: list[list[str]], fmt: SampleFormat, dim: int | None) -> SampleCounts:
    mapping = {"-1": -1, "1": 1, "+1": 1} if fmt == SampleFormat.PM1 else {"0": -1, "1": 1}
    other = {"0"} if fmt == SampleFormat.PM1 else {"-1", "+1"}
    width = len(rows[0])
    if dim is not None and width != dim:
        raise SampleFormatError(f"rows have {width} columns but d={dim}")
    check_dim(width)
    masks = np.empty(len(rows), dtype=np.int64)
    for n, row in enumerate(rows, start=1):
        if len(row) != width:
            raise SampleFormatError(f"ragged row {n}: {len(row)} columns, expected {width}")
        mask = 0
        for k, token in enumerate(row):
            if token in other:
                raise SampleFormatError(
                    f"mixed alphabets in row {n}: {token!r} in {fmt.value} data"
                )
            if token not in mapping:
                raise SampleFormatError(
                    f"row {n}: value {token!r} is not in the {fmt.value} alphabet"
                )
            if mapping[token] == 1:
                mask |= 1 << k
        masks[n - 1] = mask
    return SampleCounts.from_masks(width, masks)


def _parse_int(token: str, what: str, line: int) -> int:
    try:
        return int(token, 0)
    except ValueError:
        raise SampleFormatError(f"line {line}: {what} {token!r} is not an integer") from None


def _resolve_dim(dim: int | None, header_dim: int | None, masks: list[int], warn: Warn) -> int:
    if dim is None:
        dim = header_dim
    if dim is None:
        dim = max(max(masks).bit_length(), 1)
        warn(f"dimension inferred from the largest bitmask: d={dim}; pass --dim to be explicit")
    check_dim(dim)
    top = 1 << dim
    if any(not 0 <= m < top for m in masks):
        raise SampleFormatError(f"bitmask out of range for d={dim}")
    return dim


def _parse_counts(
    rows: list[list[str]], dim: int | None, header_dim: int | None, warn: Warn
) -> SampleCounts:
    masks, counts = [], []
    for n, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise SampleFormatError(f"line {n}: expected 'bitmask,count', got {len(row)} fields")
        mask, count = _parse_int(row[0], "bitmask", n), _parse_int(row[1], "count", n)
        if count < 0:
            raise SampleFormatError(f"line {n}: negative count {count}")
        if count > MAX_COUNT:
            raise SampleFormatError(f"line {n}: counts overflow ({count} > 2^62)")
        masks.append(mask)
        counts.append(count)
    if sum(counts) > MAX_COUNT:
        raise SampleFormatError("counts overflow: total exceeds 2^62")
    if sum(counts) == 0:
        raise SampleFormatError("no observations")
    dim = _resolve_dim(dim, header_dim, masks, warn)
    tally = np.zeros(1 << dim, dtype=np.int64)
    np.add.at(tally, np.array(masks, dtype=np.int64), np.array(counts, dtype=np.int64))
    return SampleCounts(dim=dim, counts=tally)


def parse_sample(
    text: str,
    fmt: SampleFormat | None = None,
    dim: int | None = None,
    warn: Warn = _log_warning,
) -> SampleCounts:
    """
    Parse observations into counts.

    Accepts +-1 rows, 0/1 rows (0 maps to -1) or 'bitmask,count' lines. The
    format is detected from the alphabet unless given; a "# d=" header
    marks counts input.

    Raises:
        SampleFormatError: Empty input, mixed alphabets, ragged rows or overflow
        DimensionError: If d exceeds the dense-table cap
    """
    rows, header_dim = _tokenize(text)
    if not rows:
        raise SampleFormatError("no observations")
    if fmt is None:
        fmt = SampleFormat.COUNTS if header_dim is not None else _detect_format(rows, warn)
    if fmt == SampleFormat.COUNTS:
        return _parse_counts(rows, dim, header_dim, warn)
    return _parse_rows(rows, fmt, dim)


def parse_graph(text: str, dim: int, warn: Warn = _log_warning) -> Graph:
    """
    Parse an edge list of 1-indexed 'i j' lines.

    The keyword 'complete' (also 'chain' or 'cycle') names the whole graph.

    Raises:
        SampleFormatError: Out-of-range vertex, self-loop or malformed line
    """
    keyword = text.strip().lower()
    if keyword == "complete":
        return Graph.complete(dim)
    if keyword == "chain":
        return Graph.chain(dim)
    if keyword == "cycle":
        return Graph.cycle(dim)

    edges: list[tuple[int, int]] = []
    seen: set[tuple[int, int]] = set()
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = [t for t in _SPLIT.split(line) if t]
        if len(tokens) != 2:
            raise SampleFormatError(f"graph line {n}: expected 'i j', got {line!r}")
        i, j = (_parse_int(t, "vertex", n) for t in tokens)
        for v in (i, j):
            if not 1 <= v <= dim:
                raise SampleFormatError(f"graph line {n}: vertex {v} out of range 1..{dim}")
        if i == j:
            raise SampleFormatError(f"graph line {n}: self-loop at vertex {i}")
        edge = (min(i, j) - 1, max(i, j) - 1)
        if edge in seen:
            warn(f"duplicate edge ({i}, {j}) ignored")
            continue
        seen.add(edge)
        edges.append(edge)
    return Graph(dim=dim, edges=tuple(edges))


def parse_table(
    text: str, dim: int | None = None, warn: Warn = _log_warning
) -> ProbTable:
    """
    Parse 'bitmask,probability' lines into a table; unlisted states get 0.

    Raises:
        SampleFormatError: Malformed lines, negative values or mass far from 1
    """
    rows, header_dim = _tokenize(text)
    if not rows:
        raise SampleFormatError("empty table")
    masks, values = [], []
    for n, row in enumerate(rows, start=1):
        if len(row) != 2:
            raise SampleFormatError(f"line {n}: expected 'bitmask,probability'")
        masks.append(_parse_int(row[0], "bitmask", n))
        try:
            values.append(float(row[1]))
        except ValueError:
            raise SampleFormatError(f"line {n}: probability {row[1]!r} is not a number") from None
    if any(v < 0 or not np.isfinite(v) for v in values):
        raise SampleFormatError("table values must be finite and nonnegative")
    dim = _resolve_dim(dim, header_dim, masks, warn)
    p = np.zeros(1 << dim)
    np.add.at(p, np.array(masks, dtype=np.int64), np.array(values))
    total = float(p.sum())
    if abs(total - 1) > TABLE_DRIFT:
        raise SampleFormatError(f"table sums to {total!r}, not 1")
    if abs(total - 1) > 1e-12:
        warn(f"table sums to {total!r}; renormalized")
    try:
        return ProbTable.from_weights(dim, p)
    except ValueError as exc:
        raise SampleFormatError(str(exc)) from exc


def format_table(p: ProbTable) -> str:
    """'bitmask,probability' lines with a '# d=' header, readable by parse_table."""
    lines = [f"# d={p.dim}"]
    lines += [f"{mask},{value!r}" for mask, value in enumerate(p.values.tolist())]
    return "\n".join(lines) + "\n"
