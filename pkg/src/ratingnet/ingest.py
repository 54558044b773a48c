"""Parsing raw review records into validated, densely-indexed edge arrays.

Two input formats are accepted:

* Yelp-style JSON lines with ``user_id``, ``business_id``, ``stars`` and ``date``.
* The CSV interchange format ``user_id,business_id,stars,unix_ts`` (with header).

String ids are interned into dense integer handles through an :class:`IdMap`,
which is persisted next to the edge file as ``kind,string_id,int_id`` rows.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

log = logging.getLogger(__name__)

CSV_HEADER = ["user_id", "business_id", "stars", "unix_ts"]
IDMAP_HEADER = ["kind", "string_id", "int_id"]
_DATE_FORMATS = ("%Y-%m-%d %H:%M:%S", "%Y-%m-%d")


class ReviewEdge(NamedTuple):
    user: int
    business: int
    stars: int
    timestamp: int


class IdMap:
    """Stable string -> dense integer interning for users and businesses."""

    def __init__(self):
        self.users: dict[str, int] = {}
        self.businesses: dict[str, int] = {}
        self._user_names: list[str] = []
        self._business_names: list[str] = []

    def user(self, key: str) -> int:
        idx = self.users.get(key)
        if idx is None:
            idx = self.users[key] = len(self._user_names)
            self._user_names.append(key)
        return idx

    def business(self, key: str) -> int:
        idx = self.businesses.get(key)
        if idx is None:
            idx = self.businesses[key] = len(self._business_names)
            self._business_names.append(key)
        return idx

    @property
    def n_users(self) -> int:
        return len(self._user_names)

    @property
    def n_businesses(self) -> int:
        return len(self._business_names)

    def user_name(self, idx: int) -> str:
        return self._user_names[idx]

    def business_name(self, idx: int) -> str:
        return self._business_names[idx]

    def user_names(self, idx) -> list[str]:
        return [self._user_names[i] for i in np.asarray(idx).tolist()]

    def business_names(self, idx) -> list[str]:
        return [self._business_names[i] for i in np.asarray(idx).tolist()]

    def save(self, path) -> None:
        with open(path, "w", newline="") as fh:
            self.write(fh)

    def write(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(IDMAP_HEADER)
        for i, name in enumerate(self._user_names):
            w.writerow(["user", name, i])
        for i, name in enumerate(self._business_names):
            w.writerow(["business", name, i])

    @classmethod
    def load(cls, path) -> "IdMap":
        m = cls()
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != IDMAP_HEADER:
                raise SchemaError(f"bad id-map header {header!r}", 1)
            for line_no, row in enumerate(reader, start=2):
                if len(row) != 3:
                    raise SchemaError("expected kind,string_id,int_id", line_no)
                kind, name, raw = row
                table = {"user": m._user_names, "business": m._business_names}.get(kind)
                if table is None:
                    raise SchemaError(f"unknown kind {kind!r}", line_no)
                if int(raw) != len(table):
                    raise SchemaError(f"non-dense id {raw} for {kind}", line_no)
                getattr(m, "users" if kind == "user" else "businesses")[name] = len(table)
                table.append(name)
        return m


@dataclass
class EdgeList:
    """Column-oriented edge storage; all arrays share one length."""

    user: np.ndarray
    business: np.ndarray
    stars: np.ndarray
    timestamp: np.ndarray

    def __post_init__(self):
        self.user = np.asarray(self.user, dtype=np.int64)
        self.business = np.asarray(self.business, dtype=np.int64)
        self.stars = np.asarray(self.stars, dtype=np.int64)
        self.timestamp = np.asarray(self.timestamp, dtype=np.int64)
        n = len(self.user)
        if not (len(self.business) == len(self.stars) == len(self.timestamp) == n):
            raise ValueError("edge columns must have equal length")

    def __len__(self):
        return len(self.user)

    def __iter__(self) -> Iterator[ReviewEdge]:
        for row in zip(self.user.tolist(), self.business.tolist(),
                       self.stars.tolist(), self.timestamp.tolist()):
            yield ReviewEdge(*row)

    def __getitem__(self, idx) -> "EdgeList":
        return EdgeList(self.user[idx], self.business[idx], self.stars[idx], self.timestamp[idx])

    def __eq__(self, other):
        if not isinstance(other, EdgeList):
            return NotImplemented
        return all(np.array_equal(getattr(self, f), getattr(other, f))
                   for f in ("user", "business", "stars", "timestamp"))

    @classmethod
    def empty(cls) -> "EdgeList":
        return cls([], [], [], [])

    @classmethod
    def from_edges(cls, edges: Iterable[ReviewEdge]) -> "EdgeList":
        rows = list(edges)
        if not rows:
            return cls.empty()
        u, b, s, t = zip(*rows)
        return cls(u, b, s, t)

    @classmethod
    def concat(cls, parts: Iterable["EdgeList"]) -> "EdgeList":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in ("user", "business", "stars", "timestamp")))

    def sorted(self) -> "EdgeList":
        """Canonical (timestamp, user, business) order."""
        order = np.lexsort((self.business, self.user, self.timestamp))
        return self[order]


def parse_date(value) -> int:
    """Seconds since epoch; date-only strings are midnight UTC."""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return int(value)
    if not isinstance(value, str):
        raise ValidationError(f"unparseable date {value!r}")
    text = value.strip()
    if text.lstrip("-").isdigit():
        return int(text)
    for fmt in _DATE_FORMATS:
        try:
            dt = datetime.strptime(text, fmt)
        except ValueError:
            continue
        return int(dt.replace(tzinfo=timezone.utc).timestamp())
    raise ValidationError(f"unparseable date {value!r}")


def _validate_stars(raw, line_no):
    try:
        stars = float(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"non-numeric stars {raw!r}", line_no) from None
    if stars != int(stars) or not 1 <= stars <= 5:
        raise ValidationError(f"stars {raw!r} outside 1..5", line_no)
    return int(stars)


def _make_edge(user, business, stars, when, idmap, line_no):
    if not isinstance(user, str) or not user:
        raise ValidationError("empty user_id", line_no)
    if not isinstance(business, str) or not business:
        raise ValidationError("empty business_id", line_no)
    stars = _validate_stars(stars, line_no)
    try:
        ts = parse_date(when)
    except ValidationError as exc:
        raise ValidationError(str(exc), line_no) from None
    if ts < 0:
        raise ValidationError(f"negative timestamp {ts}", line_no)
    return ReviewEdge(idmap.user(user), idmap.business(business), stars, ts)


def parse_review_line(line: str, idmap: IdMap, line_no: int | None = None,
                      fmt: str = "auto") -> ReviewEdge:
    """Parse one JSON object or one CSV interchange row into a :class:`ReviewEdge`."""
    text = line.strip()
    if fmt == "auto":
        fmt = "json" if text.startswith("{") else "csv"
    if fmt == "json":
        try:
            rec = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"malformed JSON: {exc.msg}", line_no) from None
        if not isinstance(rec, dict):
            raise ParseError("JSON record is not an object", line_no)
        missing = [k for k in ("user_id", "business_id", "stars", "date") if k not in rec]
        if missing:
            raise SchemaError(f"missing field(s) {', '.join(missing)}", line_no)
        return _make_edge(rec["user_id"], rec["business_id"], rec["stars"], rec["date"],
                          idmap, line_no)
    if fmt == "csv":
        try:
            row = next(csv.reader([text]))
        except (csv.Error, StopIteration):
            raise ParseError("malformed CSV row", line_no) from None
        if len(row) != 4:
            raise SchemaError(f"expected 4 CSV fields, got {len(row)}", line_no)
        user, business, stars, ts = row
        try:
            ts = int(ts)
        except ValueError:
            raise ValidationError(f"non-integer unix_ts {ts!r}", line_no) from None
        return _make_edge(user, business, stars, ts, idmap, line_no)
    raise ValueError(f"unknown format {fmt!r}")


def _detect_format(path: Path) -> str:
    with open(path) as fh:
        for line in fh:
            if line.strip():
                return "json" if line.lstrip().startswith("{") else "csv"
    return "csv"


def read_edges(path, idmap: IdMap | None = None, fmt: str = "auto") -> tuple[EdgeList, IdMap]:
    """Stream a whole review file into an :class:`EdgeList`."""
    path = Path(path)
    idmap = idmap if idmap is not None else IdMap()
    if fmt == "auto":
        fmt = _detect_format(path)
    users, businesses, stars, stamps = [], [], [], []
    with open(path, newline="") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            if fmt == "csv" and line_no == 1:
                header = next(csv.reader([line.strip()]))
                if header != CSV_HEADER:
                    raise SchemaError(f"expected header {','.join(CSV_HEADER)}", 1)
                continue
            e = parse_review_line(line, idmap, line_no, fmt)
            users.append(e.user)
            businesses.append(e.business)
            stars.append(e.stars)
            stamps.append(e.timestamp)
    return EdgeList(users, businesses, stars, stamps), idmap


def write_edges_csv(edges: EdgeList, idmap: IdMap, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_HEADER)
    un, bn = idmap._user_names, idmap._business_names
    for u, b, s, t in zip(edges.user.tolist(), edges.business.tolist(),
                          edges.stars.tolist(), edges.timestamp.tolist()):
        w.writerow([un[u], bn[b], s, t])


def edges_to_csv_text(edges: EdgeList, idmap: IdMap) -> str:
    buf = io.StringIO()
    write_edges_csv(edges, idmap, buf)
    return buf.getvalue()


def filter_by_date(edges: EdgeList, cutoff) -> EdgeList:
    """Keep edges with ``timestamp >= cutoff``; order is preserved.

    ``cutoff`` may be ``None`` or ``-inf`` for the identity.
    """
    if cutoff is None or (isinstance(cutoff, float) and cutoff == float("-inf")):
        return edges[np.arange(len(edges))]
    if isinstance(cutoff, str):
        cutoff = parse_date(cutoff)
    return edges[edges.timestamp >= cutoff]


def dedupe_edges(edges: EdgeList) -> EdgeList:
    """Collapse repeated (user, business) reviews to the latest one.

    Timestamp ties go to the record appearing last in input order. Surviving
    edges keep their relative input order.
    """
    n = len(edges)
    if n == 0:
        return edges[np.arange(0)]
    pos = np.arange(n)
    # last key is primary: group by pair, then latest timestamp, then input position
    order = np.lexsort((pos, edges.timestamp, edges.business, edges.user))
    u, b = edges.user[order], edges.business[order]
    last_of_group = np.ones(n, dtype=bool)
    last_of_group[:-1] = (u[1:] != u[:-1]) | (b[1:] != b[:-1])
    keep = np.sort(order[last_of_group])
    dropped = n - len(keep)
    if dropped:
        log.info("dedupe: collapsed %d duplicate review(s)", dropped)
    return edges[keep]
