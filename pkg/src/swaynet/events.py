"""Retweet event streams: parsing, validation, class labelling, derived logs.

Wire format is JSON Lines, one event per line, with fields in this order:
ts, src, dst, cat, src_followers, dst_followers, src_bot, dst_bot,
src_verified, dst_verified. `src` is the retweeted user (the creator),
`dst` is the retweeter (the consumer). CSV with a header row carrying the
same columns is accepted as an alternate input format.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from typing import Iterable, Iterator, TextIO

FACTUAL = "factual"
MISLEADING = "misleading"
UNCERTAIN = "uncertain"
CONTENT_CLASSES = (FACTUAL, MISLEADING, UNCERTAIN)

# Canonical category tokens as they appear on the wire.
CATEGORY_TOKENS = (
    "SCIENCE",
    "MSM",
    "SATIRE",
    "CLICKBAIT",
    "POLITICAL",
    "FAKE/HOAX",
    "CONSPIRACY/JUNKSCI",
    "OTHER",
    "SHADOW",
    "NA",
)

# Long-form spellings accepted on input alongside the wire tokens.
_CATEGORY_ALIASES = {
    "SCIENCE": "SCIENCE",
    "MSM": "MSM",
    "MAINSTREAM MEDIA": "MSM",
    "SATIRE": "SATIRE",
    "CLICKBAIT": "CLICKBAIT",
    "POLITICAL": "POLITICAL",
    "FAKE/HOAX": "FAKE/HOAX",
    "FAKE OR HOAX": "FAKE/HOAX",
    "CONSPIRACY/JUNKSCI": "CONSPIRACY/JUNKSCI",
    "CONSPIRACY AND JUNK SCIENCE": "CONSPIRACY/JUNKSCI",
    "OTHER": "OTHER",
    "SHADOW": "SHADOW",
    "NA": "NA",
}

CLASS_BY_CATEGORY = {
    "SCIENCE": FACTUAL,
    "MSM": FACTUAL,
    "FAKE/HOAX": MISLEADING,
    "CONSPIRACY/JUNKSCI": MISLEADING,
    "CLICKBAIT": MISLEADING,
    "SATIRE": UNCERTAIN,
    "POLITICAL": UNCERTAIN,
    "OTHER": UNCERTAIN,
    "SHADOW": UNCERTAIN,
    "NA": UNCERTAIN,
}

EVENT_FIELDS = (
    "ts",
    "src",
    "dst",
    "cat",
    "src_followers",
    "dst_followers",
    "src_bot",
    "dst_bot",
    "src_verified",
    "dst_verified",
)


def canonical_category(raw_category: str | None) -> str:
    """Normalize a category spelling to its wire token.

    Accepts the uppercase wire tokens and the long-form names; a missing
    category (None) means no URL-derived label and maps to NA. Unknown
    labels are a hard error so the class mapping stays exhaustive.
    """
    if raw_category is None:
        return "NA"
    token = _CATEGORY_ALIASES.get(str(raw_category).strip().upper())
    if token is None:
        raise ValueError(f"unknown content category: {raw_category!r}")
    return token


def classify_category(raw_category: str | None) -> str:
    """Map one of the ten categories (or NA) to factual/misleading/uncertain."""
    return CLASS_BY_CATEGORY[canonical_category(raw_category)]


@dataclass(frozen=True, slots=True)
class RetweetEvent:
    """One retweet: `retweetee` was retweeted by `retweeter` at `timestamp`.

    Follower counts and bot/verification flags are snapshots taken for both
    users at the moment of the activity.
    """

    timestamp: int
    retweetee: str
    retweeter: str
    raw_category: str
    content_class: str
    retweetee_followers: int
    retweeter_followers: int
    retweetee_bot: bool
    retweeter_bot: bool
    retweetee_verified: bool
    retweeter_verified: bool


@dataclass(frozen=True, slots=True)
class ParseError:
    line_no: int
    message: str


@dataclass(frozen=True, slots=True)
class FollowerLog:
    """Time-ordered follower-count observations for one user.

    Observations are strictly increasing in timestamp; simultaneous
    observations collapse to the last value seen in stream order.
    """

    user: str
    observations: tuple[tuple[int, int], ...]


@dataclass(frozen=True, slots=True)
class UserFlagRates:
    """Fraction of a user's activity records flagged bot / verified."""

    user: str
    bot_rate: float
    verification_rate: float
    n_observations: int


def _coerce_timestamp(value) -> int:
    if isinstance(value, bool) or value is None:
        raise ValueError(f"malformed timestamp: {value!r}")
    if isinstance(value, int):
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        try:
            return int(value)
        except ValueError:
            raise ValueError(f"malformed timestamp: {value!r}") from None
    raise ValueError(f"malformed timestamp: {value!r}")


def _coerce_count(value, field: str) -> int:
    if isinstance(value, bool) or value is None:
        raise ValueError(f"bad {field}: {value!r}")
    try:
        count = int(value)
    except (TypeError, ValueError):
        raise ValueError(f"bad {field}: {value!r}") from None
    if count < 0:
        raise ValueError(f"negative {field}: {count}")
    return count


_TRUE = {"true", "1", "t", "yes"}
_FALSE = {"false", "0", "f", "no", ""}


def _coerce_flag(value, field: str) -> bool:
    if isinstance(value, bool):
        return value
    if isinstance(value, int) and value in (0, 1):
        return bool(value)
    if isinstance(value, str):
        low = value.strip().lower()
        if low in _TRUE:
            return True
        if low in _FALSE:
            return False
    raise ValueError(f"bad {field}: {value!r}")


def event_from_record(rec: dict, time_range: tuple[int, int] | None = None) -> RetweetEvent:
    """Build a validated event from a wire record (dict of EVENT_FIELDS)."""
    missing = [f for f in EVENT_FIELDS if f not in rec]
    if missing:
        raise ValueError(f"missing fields: {', '.join(missing)}")
    ts = _coerce_timestamp(rec["ts"])
    if time_range is not None and not (time_range[0] <= ts < time_range[1]):
        raise ValueError(f"timestamp {ts} outside dataset range [{time_range[0]}, {time_range[1]})")
    cat = canonical_category(rec["cat"])
    return RetweetEvent(
        timestamp=ts,
        retweetee=str(rec["src"]),
        retweeter=str(rec["dst"]),
        raw_category=cat,
        content_class=CLASS_BY_CATEGORY[cat],
        retweetee_followers=_coerce_count(rec["src_followers"], "src_followers"),
        retweeter_followers=_coerce_count(rec["dst_followers"], "dst_followers"),
        retweetee_bot=_coerce_flag(rec["src_bot"], "src_bot"),
        retweeter_bot=_coerce_flag(rec["dst_bot"], "dst_bot"),
        retweetee_verified=_coerce_flag(rec["src_verified"], "src_verified"),
        retweeter_verified=_coerce_flag(rec["dst_verified"], "dst_verified"),
    )


def event_to_record(event: RetweetEvent) -> dict:
    return {
        "ts": event.timestamp,
        "src": event.retweetee,
        "dst": event.retweeter,
        "cat": event.raw_category,
        "src_followers": event.retweetee_followers,
        "dst_followers": event.retweeter_followers,
        "src_bot": event.retweetee_bot,
        "dst_bot": event.retweeter_bot,
        "src_verified": event.retweetee_verified,
        "dst_verified": event.retweeter_verified,
    }


def parse_events(
    lines: Iterable[str],
    time_range: tuple[int, int] | None = None,
    strict: bool = False,
) -> tuple[list[RetweetEvent], list[ParseError]]:
    """Parse JSON Lines into events, preserving input order.

    Invalid lines are reported with their 1-based line number; with
    strict=True the first bad line raises instead. I/O errors from the
    underlying stream propagate (stream-level failure aborts the parse).
    """
    events: list[RetweetEvent] = []
    errors: list[ParseError] = []
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            events.append(event_from_record(rec, time_range))
        except ValueError as exc:
            if strict:
                raise ValueError(f"line {line_no}: {exc}") from None
            errors.append(ParseError(line_no, str(exc)))
    return events, errors


def parse_events_csv(
    handle: TextIO,
    time_range: tuple[int, int] | None = None,
    strict: bool = False,
) -> tuple[list[RetweetEvent], list[ParseError]]:
    """Parse the CSV alternate format (header row, same columns)."""
    reader = csv.DictReader(handle)
    events: list[RetweetEvent] = []
    errors: list[ParseError] = []
    for line_no, row in enumerate(reader, start=2):
        try:
            rec = {k: row.get(k) for k in EVENT_FIELDS}
            if rec["cat"] == "":
                rec["cat"] = "NA"
            events.append(event_from_record(rec, time_range))
        except ValueError as exc:
            if strict:
                raise ValueError(f"line {line_no}: {exc}") from None
            errors.append(ParseError(line_no, str(exc)))
    return events, errors


def write_events_jsonl(events: Iterable[RetweetEvent], handle: TextIO) -> int:
    """Serialize events one JSON object per line; returns the line count."""
    n = 0
    for event in events:
        handle.write(json.dumps(event_to_record(event), separators=(",", ":")))
        handle.write("\n")
        n += 1
    return n


def write_events_csv(events: Iterable[RetweetEvent], handle: TextIO) -> int:
    writer = csv.writer(handle)
    writer.writerow(EVENT_FIELDS)
    n = 0
    for event in events:
        rec = event_to_record(event)
        writer.writerow([rec[f] for f in EVENT_FIELDS])
        n += 1
    return n


def read_events(path: str, time_range: tuple[int, int] | None = None) -> tuple[list[RetweetEvent], list[ParseError]]:
    """Read events from a .jsonl or .csv file, dispatching on the suffix."""
    if path.endswith(".csv"):
        with open(path, newline="") as handle:
            return parse_events_csv(handle, time_range)
    with open(path) as handle:
        return parse_events(handle, time_range)


def _iter_observations(events: Iterable[RetweetEvent]) -> Iterator[tuple[str, int, int, bool, bool]]:
    # One observation per participating role: (user, ts, followers, bot, verified).
    for e in events:
        yield e.retweetee, e.timestamp, e.retweetee_followers, e.retweetee_bot, e.retweetee_verified
        yield e.retweeter, e.timestamp, e.retweeter_followers, e.retweeter_bot, e.retweeter_verified


def build_follower_logs(events: Iterable[RetweetEvent]) -> dict[str, FollowerLog]:
    """Per-user follower-count log from activity-moment snapshots."""
    raw: dict[str, list[tuple[int, int]]] = {}
    for user, ts, followers, _, _ in _iter_observations(events):
        raw.setdefault(user, []).append((ts, followers))
    logs: dict[str, FollowerLog] = {}
    for user, obs in raw.items():
        obs.sort(key=lambda o: o[0])  # stable: stream order preserved within ties
        collapsed: list[tuple[int, int]] = []
        for ts, followers in obs:
            if collapsed and collapsed[-1][0] == ts:
                collapsed[-1] = (ts, followers)
            else:
                collapsed.append((ts, followers))
        logs[user] = FollowerLog(user, tuple(collapsed))
    return logs


def user_flag_rates(events: Iterable[RetweetEvent]) -> dict[str, UserFlagRates]:
    """Bot and verification rates over every activity record of each user."""
    counts: dict[str, list[int]] = {}
    for user, _, _, bot, verified in _iter_observations(events):
        row = counts.setdefault(user, [0, 0, 0])
        row[0] += 1
        row[1] += int(bot)
        row[2] += int(verified)
    return {
        user: UserFlagRates(user, bot / n, verified / n, n)
        for user, (n, bot, verified) in counts.items()
    }


def write_follower_logs_csv(logs: dict[str, FollowerLog], handle: TextIO) -> None:
    writer = csv.writer(handle)
    writer.writerow(["user", "timestamp", "followers"])
    for user in sorted(logs):
        for ts, followers in logs[user].observations:
            writer.writerow([user, ts, followers])


def read_follower_logs_csv(handle: TextIO) -> dict[str, FollowerLog]:
    reader = csv.DictReader(handle)
    raw: dict[str, list[tuple[int, int]]] = {}
    for row in reader:
        raw.setdefault(row["user"], []).append((int(row["timestamp"]), int(row["followers"])))
    return {user: FollowerLog(user, tuple(obs)) for user, obs in raw.items()}


def write_flag_rates_csv(rates: dict[str, UserFlagRates], handle: TextIO) -> None:
    writer = csv.writer(handle)
    writer.writerow(["user", "bot_rate", "verification_rate", "n_observations"])
    for user in sorted(rates):
        r = rates[user]
        writer.writerow([user, f"{r.bot_rate:.6f}", f"{r.verification_rate:.6f}", r.n_observations])
