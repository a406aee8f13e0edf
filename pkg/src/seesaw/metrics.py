"""Call metering, run summaries, CSV/JSON export, SVG charts and LOC counts."""

from __future__ import annotations

import csv
import io
import json
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from xml.sax.saxutils import escape

from .errors import DuplicateSeq, EmptyLedger

TOKEN_ROW = "Token Usage (Tokens)"
TIME_ROW = "Execution Time (Seconds)"
LOC_RULE = "LOC counts lines containing at least one non-whitespace character"

GENERATION_PHASES = ("see", "saw")
PHASES = ("tree", "see", "saw", "validate")
CSV_KINDS = ("calls", "per_iteration_tokens", "tokens_over_time", "per_phase")

MODE_LABELS = {"seesaw": "See-Saw mechanism", "standard": "Standard Approach"}


class WallClock:
    """Seconds since construction, from a monotonic counter."""

    def __init__(self) -> None:
        self._t0 = time.perf_counter()

    def now(self) -> float:
        return time.perf_counter() - self._t0


class SimulatedClock(WallClock):
    """Wall clock plus simulated latency injected by offline backends."""

    def __init__(self) -> None:
        super().__init__()
        self._offset = 0.0

    def advance(self, seconds: float) -> None:
        self._offset += seconds

    def now(self) -> float:
        return super().now() + self._offset


@dataclass(frozen=True)
class CallRecord:
    seq: int
    phase: str
    path: str | None
    round: int
    prompt_tokens: int
    completion_tokens: int
    total_tokens: int
    started_at: float
    latency: float
    error: str | None = None

    def __post_init__(self) -> None:
        if self.error is None and self.total_tokens != self.prompt_tokens + self.completion_tokens:
            raise ValueError(f"call {self.seq}: total_tokens != prompt + completion")


class Ledger:
    """Append-only list of :class:`CallRecord`, ordered by ``seq``."""

    def __init__(self, records: Iterable[CallRecord] = ()) -> None:
        self._records: list[CallRecord] = []
        self._lock = threading.Lock()
        for r in records:
            self.record(r)

    def next_seq(self) -> int:
        with self._lock:
            return self._records[-1].seq + 1 if self._records else 0

    def record(self, call: CallRecord) -> None:
        with self._lock:
            if self._records and call.seq <= self._records[-1].seq:
                raise DuplicateSeq(f"seq {call.seq} already used or out of order")
            self._records.append(call)

    @property
    def records(self) -> tuple[CallRecord, ...]:
        with self._lock:
            return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    @property
    def total_tokens(self) -> int:
        return sum(r.total_tokens for r in self.records)


@dataclass
class RunReport:
    mode: str
    total_tokens: int
    generation_tokens: int
    wall_time: float
    backend_latency: float
    per_phase: dict[str, int]
    per_directory: dict[str, int]
    per_round_tokens: dict[int, int]
    per_round_elapsed: dict[int, float]
    calls: list[CallRecord]
    outcomes: list[dict] = field(default_factory=list)
    loc_by_file: dict[str, int] | None = None
    loc_rule: str = LOC_RULE
    error: str | None = None

    @property
    def call_count(self) -> int:
        return len(self.calls)

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON object keys must be strings
        d["per_round_tokens"] = {str(k): v for k, v in self.per_round_tokens.items()}
        d["per_round_elapsed"] = {str(k): v for k, v in self.per_round_elapsed.items()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> RunReport:
        d = dict(d)
        d["calls"] = [CallRecord(**c) for c in d.get("calls", [])]
        d["per_round_tokens"] = {int(k): v for k, v in d.get("per_round_tokens", {}).items()}
        d["per_round_elapsed"] = {int(k): v for k, v in d.get("per_round_elapsed", {}).items()}
        return cls(**d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def write_json(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def read_json(cls, path: str | Path) -> RunReport:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _top_dir(path: str | None) -> str:
    if not path:
        return "(none)"
    return path.split("/", 1)[0] if "/" in path else "."


def summarize(
    ledger: Ledger | Sequence[CallRecord],
    outcomes: Sequence = (),
    mode: str = "seesaw",
    wall_time: float | None = None,
    loc_by_file: Mapping[str, int] | None = None,
) -> RunReport:
    """Aggregate a ledger into a :class:`RunReport`.

    Totals are plain integer sums. When ``wall_time`` is not given it is
    taken as the end of the last call on the ledger clock.
    """
    records = list(ledger.records if isinstance(ledger, Ledger) else ledger)
    if not records:
        raise EmptyLedger("cannot summarize an empty ledger")

    per_phase = {p: 0 for p in PHASES}
    per_dir: dict[str, int] = {}
    per_round: dict[int, int] = {}
    per_round_elapsed: dict[int, float] = {}
    for r in records:
        per_phase[r.phase] = per_phase.get(r.phase, 0) + r.total_tokens
        key = _top_dir(r.path)
        per_dir[key] = per_dir.get(key, 0) + r.total_tokens
        per_round[r.round] = per_round.get(r.round, 0) + r.total_tokens
        per_round_elapsed[r.round] = per_round_elapsed.get(r.round, 0.0) + r.latency

    if wall_time is None:
        wall_time = max(r.started_at + r.latency for r in records)
    return RunReport(
        mode=mode,
        total_tokens=sum(r.total_tokens for r in records),
        generation_tokens=sum(per_phase[p] for p in GENERATION_PHASES),
        wall_time=wall_time,
        backend_latency=sum(r.latency for r in records),
        per_phase=per_phase,
        per_directory=per_dir,
        per_round_tokens=dict(sorted(per_round.items())),
        per_round_elapsed=dict(sorted(per_round_elapsed.items())),
        calls=records,
        outcomes=[o if isinstance(o, dict) else o.to_dict() for o in outcomes],
        loc_by_file=dict(loc_by_file) if loc_by_file is not None else None,
    )


# -- CSV -----------------------------------------------------------------------

CALL_COLUMNS = (
    "seq", "phase", "path", "round", "prompt_tokens", "completion_tokens",
    "total_tokens", "started_at", "latency", "error",
)


def _csv_rows(report: RunReport, which: str) -> tuple[Sequence[str], list[list]]:
    if which == "calls":
        rows = [
            [r.seq, r.phase, r.path or "", r.round, r.prompt_tokens, r.completion_tokens,
             r.total_tokens, repr(r.started_at), repr(r.latency), r.error or ""]
            for r in report.calls
        ]
        return CALL_COLUMNS, rows
    if which == "per_iteration_tokens":
        rows = [
            [i, r.phase, r.path or "", r.round, r.total_tokens, repr(r.latency)]
            for i, r in enumerate(report.calls, 1)
        ]
        return ("iteration", "phase", "path", "round", "total_tokens", "latency"), rows
    if which == "tokens_over_time":
        rows, running = [], 0
        for r in report.calls:
            running += r.total_tokens
            rows.append([repr(r.started_at + r.latency), running])
        return ("elapsed", "cumulative_tokens"), rows
    if which == "per_phase":
        rows = [["phase", k, v] for k, v in report.per_phase.items()]
        rows += [["directory", k, v] for k, v in sorted(report.per_directory.items())]
        return ("category", "key", "tokens"), rows
    raise ValueError(f"unknown CSV kind {which!r}; expected one of {CSV_KINDS}")


def csv_text(report: RunReport, which: str) -> str:
    header, rows = _csv_rows(report, which)
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def export_csv(report: RunReport, which: str, path: str | Path) -> Path:
    path = Path(path)
    path.write_bytes(csv_text(report, which).encode("utf-8"))
    return path


def read_calls_csv(path: str | Path) -> list[CallRecord]:
    """Rebuild call records from a ``calls`` CSV export."""
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            CallRecord(
                seq=int(row["seq"]),
                phase=row["phase"],
                path=row["path"] or None,
                round=int(row["round"]),
                prompt_tokens=int(row["prompt_tokens"]),
                completion_tokens=int(row["completion_tokens"]),
                total_tokens=int(row["total_tokens"]),
                started_at=float(row["started_at"]),
                latency=float(row["latency"]),
                error=row["error"] or None,
            )
            for row in csv.DictReader(fh)
        ]


def read_csv_series(path: str | Path, x: str, y: str) -> list[tuple[float, float]]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [(float(row[x]), float(row[y])) for row in csv.DictReader(fh)]


# -- tables --------------------------------------------------------------------

def _fmt_time(seconds: float) -> str:
    return f"{seconds:,.2f}"


def comparison_table(reports: Sequence[RunReport]) -> str:
    """Plain-text table with one column per report's mode."""
    headers = ["Metric"] + [MODE_LABELS.get(r.mode, r.mode) for r in reports]
    rows = [
        [TOKEN_ROW] + [f"{r.total_tokens:,}" for r in reports],
        [TIME_ROW] + [_fmt_time(r.wall_time) for r in reports],
    ]
    widths = [max(len(str(row[i])) for row in [headers, *rows]) for i in range(len(headers))]

    def line(cells):
        return "| " + " | ".join(str(c).ljust(w) for c, w in zip(cells, widths)) + " |"

    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([line(headers), sep, *(line(r) for r in rows)])


# -- SVG -----------------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd")


def plot_svg(
    series: Mapping[str, Sequence[tuple[float, float]]],
    path: str | Path,
    title: str = "",
    x_label: str = "",
    y_label: str = "",
    kind: str = "line",
) -> Path:
    """Write a standalone SVG 1.1 line or bar chart.

    Each named series becomes one ``<polyline>`` (line) or a run of
    ``<rect>`` elements (bar). Empty input still yields axes.
    """
    width, height, pad = 640, 400, 56
    pw, ph = width - 2 * pad, height - 2 * pad
    pts = [p for s in series.values() for p in s]
    xmin = min((p[0] for p in pts), default=0.0)
    xmax = max((p[0] for p in pts), default=1.0)
    ymax = max((p[1] for p in pts), default=1.0)
    ymin = min(0.0, min((p[1] for p in pts), default=0.0))
    xspan = (xmax - xmin) or 1.0
    yspan = (ymax - ymin) or 1.0

    def sx(x: float) -> float:
        return pad + (x - xmin) / xspan * pw

    def sy(y: float) -> float:
        return pad + ph - (y - ymin) / yspan * ph

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>',
        f'<line class="axis" x1="{pad}" y1="{pad + ph}" x2="{pad + pw}" y2="{pad + ph}" stroke="black"/>',
        f'<line class="axis" x1="{pad}" y1="{pad}" x2="{pad}" y2="{pad + ph}" stroke="black"/>',
        f'<text x="{width / 2}" y="{height - 12}" text-anchor="middle" font-size="12">{escape(x_label)}</text>',
        f'<text x="14" y="{height / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height / 2})">{escape(y_label)}</text>',
        f'<text x="{pad - 4}" y="{pad + 4}" text-anchor="end" font-size="10">{ymax:g}</text>',
        f'<text x="{pad - 4}" y="{pad + ph}" text-anchor="end" font-size="10">{ymin:g}</text>',
    ]
    n_series = max(len(series), 1)
    for k, (name, data) in enumerate(series.items()):
        color = _PALETTE[k % len(_PALETTE)]
        if kind == "bar":
            bw = pw / max(len(data), 1) / n_series * 0.8
            for j, (_, y) in enumerate(data):
                x0 = pad + (j + 0.1) * pw / max(len(data), 1) + k * bw
                out.append(
                    f'<rect class="bar" x="{x0:.2f}" y="{sy(y):.2f}" width="{bw:.2f}" '
                    f'height="{sy(ymin) - sy(y):.2f}" fill="{color}"/>'
                )
        elif data:
            coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in data)
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{coords}"/>')
        ly = pad + 16 * k
        out.append(
            f'<g class="legend-entry"><rect x="{pad + pw - 150}" y="{ly}" width="10" height="10" '
            f'fill="{color}"/><text x="{pad + pw - 135}" y="{ly + 9}" font-size="11">'
            f"{escape(name)}</text></g>"
        )
    out.append("</svg>")
    path = Path(path)
    path.write_text("\n".join(out) + "\n", encoding="utf-8")
    return path


def report_charts(reports: Sequence[RunReport], out_dir: str | Path) -> list[Path]:
    """Charts for token usage by phase, over run time, and per iteration."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labelled = [(MODE_LABELS.get(r.mode, r.mode), r) for r in reports]

    def over_time(r: RunReport):
        running, pts = 0, []
        for c in r.calls:
            running += c.total_tokens
            pts.append((c.started_at + c.latency, float(running)))
        return pts

    return [
        plot_svg(
            {name: [(i, float(r.per_phase.get(p, 0))) for i, p in enumerate(PHASES)]
             for name, r in labelled},
            out_dir / "tokens_by_phase.svg", "Token usage by phase (tree, see, saw, validate)",
            "phase", "tokens", kind="bar",
        ),
        plot_svg(
            {name: over_time(r) for name, r in labelled},
            out_dir / "tokens_over_time.svg", "Token usage over run time", "seconds", "cumulative tokens",
        ),
        plot_svg(
            {name: [(i, c.latency) for i, c in enumerate(r.calls, 1)] for name, r in labelled},
            out_dir / "time_per_iteration.svg", "Execution time per iteration", "iteration", "seconds",
        ),
        plot_svg(
            {name: [(i, float(c.total_tokens)) for i, c in enumerate(r.calls, 1)] for name, r in labelled},
            out_dir / "tokens_per_iteration.svg", "Token usage per iteration", "iteration", "tokens",
        ),
    ]


# -- lines of code -------------------------------------------------------------

def count_loc(text: str) -> int:
    return sum(1 for line in text.split("\n") if line.strip())


def loc_report(workspace) -> dict[str, int]:
    """Non-empty line counts per file of ``workspace``, in tree order."""
    return {path: count_loc(unit.content) for path, unit in workspace.units.items()}
