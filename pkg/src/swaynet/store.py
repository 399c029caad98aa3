"""Columnar event store: a cache the pipeline stages share.

events.jsonl stays the canonical interchange format; this cache holds the
same records as flat numpy columns plus an interned user table, so graph
construction and log derivation run vectorized instead of re-parsing JSON
in every stage. Cache files are raw .npy (deterministic bytes) keyed to the
source file by content hash.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .events import (
    CATEGORY_TOKENS,
    CLASS_BY_CATEGORY,
    CONTENT_CLASSES,
    FollowerLog,
    RetweetEvent,
    UserFlagRates,
)
from .graph import WeightedDigraph

_COLUMNS = ("ts", "src", "dst", "cat", "src_followers", "dst_followers", "flags")
_CAT_INDEX = {tok: i for i, tok in enumerate(CATEGORY_TOKENS)}
_CLASS_INDEX = {cls: i for i, cls in enumerate(CONTENT_CLASSES)}
CLASS_OF_CAT = np.array([_CLASS_INDEX[CLASS_BY_CATEGORY[tok]] for tok in CATEGORY_TOKENS], dtype=np.int8)

# flag bit layout
_SRC_BOT, _DST_BOT, _SRC_VER, _DST_VER = 1, 2, 4, 8


def file_sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class EventColumns:
    users: list[str]
    ts: np.ndarray
    src: np.ndarray
    dst: np.ndarray
    cat: np.ndarray
    src_followers: np.ndarray
    dst_followers: np.ndarray
    flags: np.ndarray

    def __len__(self) -> int:
        return len(self.ts)

    @property
    def content_class_idx(self) -> np.ndarray:
        return CLASS_OF_CAT[self.cat]

    # -- construction ---------------------------------------------------------

    @classmethod
    def from_events(cls, events: Sequence[RetweetEvent]) -> "EventColumns":
        n = len(events)
        index: dict[str, int] = {}
        users: list[str] = []

        def intern(label: str) -> int:
            i = index.get(label)
            if i is None:
                i = len(users)
                index[label] = i
                users.append(label)
            return i

        ts = np.empty(n, dtype=np.int64)
        src = np.empty(n, dtype=np.int64)
        dst = np.empty(n, dtype=np.int64)
        cat = np.empty(n, dtype=np.int8)
        src_f = np.empty(n, dtype=np.int64)
        dst_f = np.empty(n, dtype=np.int64)
        flags = np.zeros(n, dtype=np.uint8)
        for i, e in enumerate(events):
            ts[i] = e.timestamp
            src[i] = intern(e.retweetee)
            dst[i] = intern(e.retweeter)
            cat[i] = _CAT_INDEX[e.raw_category]
            src_f[i] = e.retweetee_followers
            dst_f[i] = e.retweeter_followers
            flags[i] = (
                (_SRC_BOT if e.retweetee_bot else 0)
                | (_DST_BOT if e.retweeter_bot else 0)
                | (_SRC_VER if e.retweetee_verified else 0)
                | (_DST_VER if e.retweeter_verified else 0)
            )
        return cls(users, ts, src, dst, cat, src_f, dst_f, flags)

    def to_events(self) -> list[RetweetEvent]:
        out = []
        users = self.users
        for i in range(len(self.ts)):
            tok = CATEGORY_TOKENS[self.cat[i]]
            f = int(self.flags[i])
            out.append(
                RetweetEvent(
                    timestamp=int(self.ts[i]),
                    retweetee=users[self.src[i]],
                    retweeter=users[self.dst[i]],
                    raw_category=tok,
                    content_class=CLASS_BY_CATEGORY[tok],
                    retweetee_followers=int(self.src_followers[i]),
                    retweeter_followers=int(self.dst_followers[i]),
                    retweetee_bot=bool(f & _SRC_BOT),
                    retweeter_bot=bool(f & _DST_BOT),
                    retweetee_verified=bool(f & _SRC_VER),
                    retweeter_verified=bool(f & _DST_VER),
                )
            )
        return out

    # -- persistence ----------------------------------------------------------

    def save(self, directory: str, source_hash: str) -> None:
        os.makedirs(directory, exist_ok=True)
        for name in _COLUMNS:
            np.save(os.path.join(directory, f"{name}.npy"), getattr(self, name))
        with open(os.path.join(directory, "users.txt"), "w") as fh:
            fh.write("\n".join(self.users))
            if self.users:
                fh.write("\n")
        meta = {"n_events": len(self.ts), "n_users": len(self.users), "source_sha256": source_hash}
        with open(os.path.join(directory, "cache_meta.json"), "w") as fh:
            json.dump(meta, fh, sort_keys=True, indent=1)

    @classmethod
    def load(cls, directory: str, expected_hash: str | None = None) -> "EventColumns | None":
        meta_path = os.path.join(directory, "cache_meta.json")
        if not os.path.exists(meta_path):
            return None
        with open(meta_path) as fh:
            meta = json.load(fh)
        if expected_hash is not None and meta.get("source_sha256") != expected_hash:
            return None
        with open(os.path.join(directory, "users.txt")) as fh:
            users = fh.read().splitlines()
        cols = {name: np.load(os.path.join(directory, f"{name}.npy")) for name in _COLUMNS}
        return cls(users, **cols)

    # -- vectorized derivations ------------------------------------------------

    def event_mask(self, time_range: tuple[int, int] | None = None, content_class: str | None = None) -> np.ndarray:
        mask = np.ones(len(self.ts), dtype=bool)
        if time_range is not None:
            mask &= (self.ts >= time_range[0]) & (self.ts < time_range[1])
        if content_class is not None:
            mask &= self.content_class_idx == _CLASS_INDEX[content_class]
        return mask

    def build_graph(
        self,
        time_range: tuple[int, int] | None = None,
        content_class: str | None = None,
        mask: np.ndarray | None = None,
    ) -> WeightedDigraph:
        """Aggregate masked events into a graph; matches graph.build_network."""
        if mask is None:
            mask = self.event_mask(time_range, content_class)
        src = self.src[mask]
        dst = self.dst[mask]
        n_users = len(self.users)
        pair = src * n_users + dst
        uniq, counts = np.unique(pair, return_counts=True)
        u_src = uniq // n_users
        u_dst = uniq % n_users
        node_ids = np.unique(np.concatenate([u_src, u_dst]))
        remap = np.zeros(n_users, dtype=np.int64)
        remap[node_ids] = np.arange(len(node_ids))
        labels = [self.users[i] for i in node_ids]
        return WeightedDigraph.from_index_arrays(labels, remap[u_src], remap[u_dst], counts.astype(np.int64))

    def pair_codes(self) -> np.ndarray:
        return self.src * len(self.users) + self.dst

    def follower_logs(self) -> dict[str, FollowerLog]:
        """Equivalent of events.build_follower_logs, built columnwise."""
        user = np.concatenate([self.src, self.dst])
        ts = np.concatenate([self.ts, self.ts])
        count = np.concatenate([self.src_followers, self.dst_followers])
        # Stream order within ties: retweetee observation precedes retweeter,
        # matching the per-event role order of the object path.
        seq = np.concatenate([2 * np.arange(len(self.ts)), 2 * np.arange(len(self.ts)) + 1])
        order = np.lexsort((seq, ts, user))
        user, ts, count = user[order], ts[order], count[order]
        # Keep the last record of each (user, ts) run.
        if len(user) == 0:
            return {}
        keep = np.ones(len(user), dtype=bool)
        same = (user[1:] == user[:-1]) & (ts[1:] == ts[:-1])
        keep[:-1][same] = False
        user, ts, count = user[keep], ts[keep], count[keep]
        starts = np.flatnonzero(np.r_[True, user[1:] != user[:-1]])
        ends = np.r_[starts[1:], len(user)]
        logs = {}
        for lo, hi in zip(starts, ends):
            label = self.users[user[lo]]
            logs[label] = FollowerLog(label, tuple(zip(ts[lo:hi].tolist(), count[lo:hi].tolist())))
        return logs

    def flag_rates(self) -> dict[str, UserFlagRates]:
        n_users = len(self.users)
        user = np.concatenate([self.src, self.dst])
        bot = np.concatenate([(self.flags & _SRC_BOT) > 0, (self.flags & _DST_BOT) > 0])
        ver = np.concatenate([(self.flags & _SRC_VER) > 0, (self.flags & _DST_VER) > 0])
        total = np.bincount(user, minlength=n_users)
        bots = np.bincount(user, weights=bot, minlength=n_users)
        vers = np.bincount(user, weights=ver, minlength=n_users)
        out = {}
        for i in np.flatnonzero(total):
            n = int(total[i])
            out[self.users[i]] = UserFlagRates(self.users[i], float(bots[i] / n), float(vers[i] / n), n)
        return out

    def daily_counts_by_class(self, aligned_by_class: dict[str, set[str]]) -> dict[str, dict[int, int]]:
        """Per-class per-day counts of events touching that class's aligned users."""
        from .growth import SECONDS_PER_DAY

        index = {u: i for i, u in enumerate(self.users)}
        day = self.ts // SECONDS_PER_DAY
        cls_idx = self.content_class_idx
        out: dict[str, dict[int, int]] = {}
        for cls, aligned in aligned_by_class.items():
            member = np.zeros(len(self.users), dtype=bool)
            ids = [index[u] for u in aligned if u in index]
            member[ids] = True
            mask = (cls_idx == _CLASS_INDEX[cls]) & (member[self.src] | member[self.dst])
            days, counts = np.unique(day[mask], return_counts=True)
            out[cls] = {int(d): int(c) for d, c in zip(days, counts)}
        return out


def load_or_parse(events_path: str, cache_dir: str | None = None) -> EventColumns:
    """Load the cache when fresh, else parse the canonical stream strictly."""
    digest = file_sha256(events_path)
    if cache_dir is not None:
        cached = EventColumns.load(cache_dir, digest)
        if cached is not None:
            return cached
    from .events import read_events

    events, errors = read_events(events_path)
    if errors:
        first = errors[0]
        raise ValueError(f"{events_path}: {len(errors)} invalid lines (first: line {first.line_no}: {first.message})")
    return EventColumns.from_events(events)
