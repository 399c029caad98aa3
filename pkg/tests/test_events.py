import io
import json

import pytest

from swaynet.events import (
    CATEGORY_TOKENS,
    CONTENT_CLASSES,
    FollowerLog,
    RetweetEvent,
    build_follower_logs,
    classify_category,
    event_to_record,
    parse_events,
    parse_events_csv,
    user_flag_rates,
    write_events_csv,
    write_events_jsonl,
)


def make_line(ts=100, src="a", dst="b", cat="SCIENCE", src_f=10, dst_f=20, **flags):
    rec = {
        "ts": ts,
        "src": src,
        "dst": dst,
        "cat": cat,
        "src_followers": src_f,
        "dst_followers": dst_f,
        "src_bot": flags.get("src_bot", False),
        "dst_bot": flags.get("dst_bot", False),
        "src_verified": flags.get("src_verified", False),
        "dst_verified": flags.get("dst_verified", False),
    }
    return json.dumps(rec)


class TestClassify:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("Mainstream media", "factual"),
            ("MSM", "factual"),
            ("SCIENCE", "factual"),
            ("Clickbait", "misleading"),
            ("FAKE/HOAX", "misleading"),
            ("CONSPIRACY/JUNKSCI", "misleading"),
            ("Satire", "uncertain"),
            ("POLITICAL", "uncertain"),
            ("Other", "uncertain"),
            ("SHADOW", "uncertain"),
            ("NA", "uncertain"),
        ],
    )
    def test_mapping(self, raw, expected):
        assert classify_category(raw) == expected

    def test_total_over_all_tokens(self):
        for tok in CATEGORY_TOKENS:
            assert classify_category(tok) in CONTENT_CLASSES

    def test_idempotent_via_canonical_token(self):
        # Feeding the canonical token back in gives the same class.
        assert classify_category("Fake or hoax") == classify_category("FAKE/HOAX")

    def test_unknown_category_is_hard_error(self):
        with pytest.raises(ValueError, match="unknown content category"):
            classify_category("BLOG")

    def test_missing_category_maps_to_na(self):
        assert classify_category(None) == "uncertain"


class TestParse:
    def test_well_formed_science_line(self):
        events, errors = parse_events([make_line(cat="SCIENCE")])
        assert errors == []
        assert events[0].content_class == "factual"
        assert events[0].retweetee == "a" and events[0].retweeter == "b"

    def test_null_category_becomes_na_uncertain(self):
        events, errors = parse_events([make_line(cat=None)])
        assert errors == []
        assert events[0].raw_category == "NA"
        assert events[0].content_class == "uncertain"

    def test_malformed_timestamp_names_the_line(self):
        events, errors = parse_events([make_line(), make_line(ts="not-a-date")])
        assert len(events) == 1
        assert len(errors) == 1
        assert errors[0].line_no == 2
        assert "timestamp" in errors[0].message

    def test_negative_follower_count_rejected(self):
        _, errors = parse_events([make_line(src_f=-1)])
        assert len(errors) == 1 and "src_followers" in errors[0].message

    def test_unknown_category_rejected_per_line(self):
        _, errors = parse_events([make_line(cat="BLOG")])
        assert len(errors) == 1

    def test_strict_mode_raises(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_events([make_line(ts="bad")], strict=True)

    def test_out_of_range_timestamp(self):
        _, errors = parse_events([make_line(ts=999)], time_range=(0, 500))
        assert len(errors) == 1 and "range" in errors[0].message

    def test_events_in_input_order(self):
        lines = [make_line(ts=t) for t in (5, 3, 9)]
        events, _ = parse_events(lines)
        assert [e.timestamp for e in events] == [5, 3, 9]

    def test_parse_serialize_parse_identity(self):
        lines = [make_line(), make_line(ts=7, cat="Satire", src="x", dst="y", src_bot=True)]
        events, _ = parse_events(lines)
        buf = io.StringIO()
        write_events_jsonl(events, buf)
        again, errors = parse_events(buf.getvalue().splitlines())
        assert errors == []
        assert again == events

    def test_csv_roundtrip(self):
        events, _ = parse_events([make_line(), make_line(ts=7, cat="NA", dst_verified=True)])
        buf = io.StringIO()
        write_events_csv(events, buf)
        buf.seek(0)
        again, errors = parse_events_csv(buf)
        assert errors == []
        assert again == events


def ev(ts, src, dst, src_f=0, dst_f=0, src_bot=False, dst_bot=False, src_ver=False, dst_ver=False):
    return RetweetEvent(ts, src, dst, "NA", "uncertain", src_f, dst_f, src_bot, dst_bot, src_ver, dst_ver)


class TestFollowerLogs:
    def test_direct_construction(self):
        # Retweeted at t=10 with 1000 followers, retweeting at t=20 with 1005.
        events = [ev(10, "u", "other", src_f=1000, dst_f=5), ev(20, "x", "u", src_f=7, dst_f=1005)]
        logs = build_follower_logs(events)
        assert logs["u"].observations == ((10, 1000), (20, 1005))

    def test_simultaneous_observations_collapse_to_last(self):
        events = [ev(10, "u", "a", src_f=5, dst_f=1), ev(10, "u", "b", src_f=7, dst_f=1)]
        logs = build_follower_logs(events)
        assert logs["u"].observations == ((10, 7),)

    def test_absent_user_absent_from_mapping(self):
        logs = build_follower_logs([ev(1, "a", "b")])
        assert "zebra" not in logs

    def test_empty_input(self):
        assert build_follower_logs([]) == {}

    def test_observation_conservation(self):
        # Total observations = 2 per event minus tie collapses.
        events = [ev(1, "a", "b"), ev(2, "a", "c"), ev(2, "a", "d")]
        logs = build_follower_logs(events)
        total = sum(len(log.observations) for log in logs.values())
        # a has ts=2 twice collapsed: 6 raw observations - 1 collapse.
        assert total == 5

    def test_strictly_increasing_timestamps(self):
        events = [ev(t % 3, "u", f"p{t}") for t in range(9)]
        logs = build_follower_logs(events)
        times = [ts for ts, _ in logs["u"].observations]
        assert times == sorted(set(times))


class TestFlagRates:
    def test_half_bot(self):
        events = [
            ev(1, "u", "a", src_bot=True),
            ev(2, "u", "b", src_bot=True),
            ev(3, "u", "c", src_bot=False),
            ev(4, "u", "d", src_bot=False),
        ]
        assert user_flag_rates(events)["u"].bot_rate == 0.5

    def test_all_verified(self):
        events = [ev(1, "u", "a", src_ver=True), ev(2, "u", "b", src_ver=True), ev(3, "x", "u", dst_ver=True)]
        rates = user_flag_rates(events)["u"]
        assert rates.verification_rate == 1.0
        assert rates.n_observations == 3

    def test_single_unflagged(self):
        rates = user_flag_rates([ev(1, "u", "a")])["u"]
        assert rates.bot_rate == 0.0 and rates.verification_rate == 0.0

    def test_roles_both_counted(self):
        # Self-retweet: the user appears in both roles of one event.
        rates = user_flag_rates([ev(1, "u", "u")])["u"]
        assert rates.n_observations == 2
