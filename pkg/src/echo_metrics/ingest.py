"""Comment-event logs and per-item action counts.

Events are stored column-wise: one numpy array per field, with user and
item ids dictionary-encoded in order of first appearance. A
:class:`Dataset` never changes after construction, so analysis code can
share it freely.

Canonical event format is JSON lines::

    {"user":"u1","platform":"facebook","item":"p9","category":"conspiracy","ts":1388534400}

CSV files use the same five names as header.
"""

import csv
import json
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

log = logging.getLogger(__name__)

PLATFORMS = ("facebook", "youtube")
CATEGORIES = ("science", "conspiracy")
EVENT_FIELDS = ("user", "platform", "item", "category", "ts")
ITEM_FIELDS = ("item_id", "platform", "category", "comments", "likes", "shares", "views")

MAX_MALFORMED_FRACTION = 0.10


class IngestError(ValueError):
    pass


class MalformedInputError(IngestError):
    pass


class DuplicateItemError(IngestError):
    pass


@dataclass(frozen=True)
class CommentEvent:
    user_id: str
    platform: str
    item_id: str
    category: str
    timestamp: int

    def __post_init__(self):
        if not isinstance(self.user_id, str) or not self.user_id:
            raise IngestError(f"bad user id {self.user_id!r}")
        if not isinstance(self.item_id, str) or not self.item_id:
            raise IngestError(f"bad item id {self.item_id!r}")
        if self.platform not in PLATFORMS:
            raise IngestError(f"unknown platform {self.platform!r}")
        if self.category not in CATEGORIES:
            raise IngestError(f"unknown category {self.category!r}")
        if isinstance(self.timestamp, bool) or not isinstance(self.timestamp, (int, np.integer)):
            raise IngestError(f"timestamp must be an integer, got {self.timestamp!r}")
        if self.timestamp < 0:
            raise IngestError(f"negative timestamp {self.timestamp}")

    def to_record(self):
        return {
            "user": self.user_id,
            "platform": self.platform,
            "item": self.item_id,
            "category": self.category,
            "ts": int(self.timestamp),
        }


@dataclass(frozen=True)
class ItemStats:
    item_id: str
    platform: str
    category: str
    comments: int = 0
    likes: int = 0
    shares: int = 0
    views: int = 0

    def __post_init__(self):
        if self.platform not in PLATFORMS:
            raise IngestError(f"unknown platform {self.platform!r}")
        if self.category not in CATEGORIES:
            raise IngestError(f"unknown category {self.category!r}")
        for name in ("comments", "likes", "shares", "views"):
            if getattr(self, name) < 0:
                raise IngestError(f"negative {name} for item {self.item_id!r}")
        if self.platform == "youtube" and self.shares:
            raise IngestError(f"shares on youtube item {self.item_id!r}")
        if self.platform == "facebook" and self.views:
            raise IngestError(f"views on facebook item {self.item_id!r}")

    @property
    def key(self):
        return (self.platform, self.item_id)


def _factorize(values):
    index = {}
    codes = np.empty(len(values), dtype=np.int64)
    for i, v in enumerate(values):
        codes[i] = index.setdefault(v, len(index))
    return codes, tuple(index)


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


class Dataset:
    """Immutable table of comment events.

    Parameters
    ----------
    user_codes, item_codes : array of int
        Indices into ``user_names`` / ``item_names``.
    platform, category : array of int
        Codes into :data:`PLATFORMS` and :data:`CATEGORIES`
        (category 1 is conspiracy).
    timestamp : array of int
        Seconds since epoch, non-negative.
    malformed_count : int
        Records rejected while loading.

    Items are keyed by ``(platform, item_id)``: a Facebook post and the
    YouTube video it links share an item id.
    """

    def __init__(self, user_codes, user_names, item_codes, item_names,
                 platform, category, timestamp, malformed_count=0):
        self.user_codes = _frozen(user_codes, np.int64)
        self.item_codes = _frozen(item_codes, np.int64)
        self.platform = _frozen(platform, np.int8)
        self.category = _frozen(category, np.int8)
        self.timestamp = _frozen(timestamp, np.int64)
        self.user_names = tuple(user_names)
        self.item_names = tuple(item_names)
        self.malformed_count = int(malformed_count)

        n = len(self.user_codes)
        for name in ("item_codes", "platform", "category", "timestamp"):
            if len(getattr(self, name)) != n:
                raise IngestError(f"column {name} has length {len(getattr(self, name))}, expected {n}")
        if n:
            if self.timestamp.min() < 0:
                raise IngestError("negative timestamp")
            if not np.isin(self.platform, (0, 1)).all() or not np.isin(self.category, (0, 1)).all():
                raise IngestError("platform/category codes must be 0 or 1")
            if self.user_codes.min() < 0 or self.user_codes.max() >= len(self.user_names):
                raise IngestError("user code out of range")
            if self.item_codes.min() < 0 or self.item_codes.max() >= len(self.item_names):
                raise IngestError("item code out of range")
        self._check_item_categories()

    @classmethod
    def from_events(cls, events, malformed_count=0):
        events = list(events)
        user_codes, user_names = _factorize([e.user_id for e in events])
        item_codes, item_names = _factorize([e.item_id for e in events])
        return cls(
            user_codes, user_names, item_codes, item_names,
            platform=[PLATFORMS.index(e.platform) for e in events],
            category=[CATEGORIES.index(e.category) for e in events],
            timestamp=[e.timestamp for e in events],
            malformed_count=malformed_count,
        )

    def _check_item_categories(self):
        if not len(self):
            return
        key = self.item_codes * 2 + self.platform
        order = np.argsort(key, kind="stable")
        k, c = key[order], self.category[order]
        same = k[1:] == k[:-1]
        if np.any(same & (c[1:] != c[:-1])):
            bad = int(k[1:][same & (c[1:] != c[:-1])][0])
            raise IngestError(f"item {self.item_names[bad // 2]!r} carries two categories")

    def __len__(self):
        return len(self.user_codes)

    def event(self, i):
        return CommentEvent(
            user_id=self.user_names[self.user_codes[i]],
            platform=PLATFORMS[self.platform[i]],
            item_id=self.item_names[self.item_codes[i]],
            category=CATEGORIES[self.category[i]],
            timestamp=int(self.timestamp[i]),
        )

    def __iter__(self):
        for i in range(len(self)):
            yield self.event(i)

    def events(self):
        return list(self)

    @property
    def n_users(self):
        return len(self.users)

    @cached_property
    def user_order(self):
        """Event indices sorted by (user code, timestamp, input position)."""
        return np.lexsort((np.arange(len(self)), self.timestamp, self.user_codes))

    @cached_property
    def users(self):
        """Map user id -> event indices sorted by (timestamp, input order)."""
        order = self.user_order
        codes = self.user_codes[order]
        cuts = np.flatnonzero(np.diff(codes)) + 1
        out = {}
        for chunk in np.split(order, cuts) if len(order) else []:
            chunk.setflags(write=False)
            out[self.user_names[self.user_codes[chunk[0]]]] = chunk
        return out

    @cached_property
    def items(self):
        """Map (platform, item_id) -> ItemStats with comment counts from the log."""
        if not len(self):
            return {}
        key = self.item_codes * 2 + self.platform
        uniq, first, counts = np.unique(key, return_index=True, return_counts=True)
        out = {}
        for k, f, cnt in zip(uniq, first, counts):
            platform = PLATFORMS[k % 2]
            item_id = self.item_names[k // 2]
            out[(platform, item_id)] = ItemStats(
                item_id=item_id, platform=platform,
                category=CATEGORIES[self.category[f]], comments=int(cnt))
        return out

    def same_events(self, other):
        """Event-for-event equality (codes may differ, values may not)."""
        return len(self) == len(other) and all(a == b for a, b in zip(self, other))


def _parse_event(rec):
    if not isinstance(rec, dict):
        raise IngestError("record is not an object")
    missing = [f for f in EVENT_FIELDS if f not in rec]
    if missing:
        raise IngestError(f"missing fields {missing}")
    ts = rec["ts"]
    if isinstance(ts, str):
        try:
            ts = int(ts.strip())
        except ValueError as exc:
            raise IngestError(f"bad timestamp {rec['ts']!r}") from exc
    return CommentEvent(
        user_id=rec["user"], platform=rec["platform"], item_id=rec["item"],
        category=rec["category"], timestamp=ts,
    )


def _iter_records(path, format):
    if format == "jsonl":
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                if not line.strip():
                    continue
                try:
                    yield lineno, json.loads(line)
                except json.JSONDecodeError as exc:
                    yield lineno, exc
    elif format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return
            missing = [f for f in EVENT_FIELDS if f not in reader.fieldnames]
            if missing:
                raise MalformedInputError(f"{path}: csv header lacks {missing}")
            for row in reader:
                yield reader.line_num, row
    else:
        raise IngestError(f"unknown format {format!r}")


def load_events(path, format="jsonl", max_malformed=MAX_MALFORMED_FRACTION):
    """Read and validate a comment-event log.

    Bad records (unparseable, missing fields, unknown platform or
    category, negative timestamp, item seen under a second category) are
    skipped and counted in ``Dataset.malformed_count``. If more than
    ``max_malformed`` of all records are bad the load is aborted with
    :class:`MalformedInputError`.
    """
    events = []
    item_category = {}
    bad = 0
    first_errors = []
    for lineno, rec in _iter_records(path, format):
        try:
            if isinstance(rec, Exception):
                raise IngestError(f"invalid json: {rec}")
            ev = _parse_event(rec)
            key = (ev.platform, ev.item_id)
            seen = item_category.setdefault(key, ev.category)
            if seen != ev.category:
                raise IngestError(f"item {ev.item_id!r} already labelled {seen!r}")
        except (IngestError, TypeError) as exc:
            bad += 1
            if len(first_errors) < 5:
                first_errors.append(f"line {lineno}: {exc}")
            continue
        events.append(ev)

    total = len(events) + bad
    if bad:
        log.warning("%s: rejected %d of %d records", path, bad, total)
    if total and bad / total > max_malformed:
        raise MalformedInputError(
            f"{path}: {bad} of {total} records malformed "
            f"(limit {max_malformed:.0%}); first: " + "; ".join(first_errors))
    return Dataset.from_events(events, malformed_count=bad)


def write_events(dataset, path, format="jsonl"):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if format == "jsonl":
            for ev in dataset:
                fh.write(json.dumps(ev.to_record(), separators=(",", ":")) + "\n")
        elif format == "csv":
            writer = csv.DictWriter(fh, fieldnames=EVENT_FIELDS, lineterminator="\n")
            writer.writeheader()
            for ev in dataset:
                writer.writerow(ev.to_record())
        else:
            raise IngestError(f"unknown format {format!r}")


def _count(row, name):
    raw = (row.get(name) or "").strip()
    if not raw:
        return 0
    try:
        return int(raw)
    except ValueError as exc:
        raise IngestError(f"bad {name} count {raw!r}") from exc


def load_item_stats(path):
    """Read an item-stats CSV into ``{(platform, item_id): ItemStats}``.

    Invalid rows are dropped and logged. A repeated ``(platform, item_id)``
    pair aborts with :class:`DuplicateItemError`.
    """
    items = {}
    bad = 0
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            return items
        missing = [f for f in ITEM_FIELDS if f not in reader.fieldnames]
        if missing:
            raise MalformedInputError(f"{path}: header lacks {missing}")
        for row in reader:
            try:
                item = ItemStats(
                    item_id=row["item_id"], platform=row["platform"], category=row["category"],
                    **{f: _count(row, f) for f in ITEM_FIELDS[3:]},
                )
            except IngestError as exc:
                bad += 1
                log.warning("%s line %d: %s", path, reader.line_num, exc)
                continue
            if item.key in items:
                raise DuplicateItemError(f"duplicate item {item.item_id!r} on {item.platform}")
            items[item.key] = item
    if bad:
        log.warning("%s: rejected %d item rows", path, bad)
    return items


def write_item_stats(items, path):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(ITEM_FIELDS)
        for it in items:
            writer.writerow([it.item_id, it.platform, it.category,
                             it.comments, it.likes, it.shares, it.views])
