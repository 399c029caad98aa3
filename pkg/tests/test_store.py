import pytest

from swaynet.events import build_follower_logs, user_flag_rates
from swaynet.graph import build_network
from swaynet.growth import daily_counts
from swaynet.store import EventColumns, load_or_parse
from swaynet.synth import SynthConfig, generate_synthetic

DAY = 86_400


@pytest.fixture(scope="module")
def events():
    config = SynthConfig(
        start=0,
        end=45 * DAY,
        aligned_users={"factual": 10, "misleading": 10, "uncertain": 10},
        swayable_users=60,
        events_per_class={"factual": 1200, "misleading": 1200, "uncertain": 1200},
    )
    return generate_synthetic(config, 21)


@pytest.fixture(scope="module")
def columns(events):
    return EventColumns.from_events(events)


class TestRoundtrip:
    def test_to_events_identity(self, events, columns):
        assert columns.to_events() == events

    def test_save_load(self, tmp_path, events, columns):
        columns.save(str(tmp_path / "cache"), "deadbeef")
        loaded = EventColumns.load(str(tmp_path / "cache"), "deadbeef")
        assert loaded is not None
        assert loaded.to_events() == events

    def test_stale_hash_rejected(self, tmp_path, columns):
        columns.save(str(tmp_path / "cache"), "deadbeef")
        assert EventColumns.load(str(tmp_path / "cache"), "00ff") is None

    def test_load_or_parse_parses_jsonl(self, tmp_path, events):
        from swaynet.events import write_events_jsonl

        path = tmp_path / "events.jsonl"
        with open(path, "w") as fh:
            write_events_jsonl(events, fh)
        columns = load_or_parse(str(path), str(tmp_path / "cache"))
        assert columns.to_events() == events


class TestVectorizedEquivalence:
    def test_graph_matches_object_path(self, events, columns):
        for time_range, cls in (
            (None, None),
            ((5 * DAY, 30 * DAY), None),
            (None, "misleading"),
            ((0, 20 * DAY), "factual"),
        ):
            g_obj = build_network(events, time_range=time_range, class_filter=cls)
            g_col = columns.build_graph(time_range=time_range, content_class=cls)
            assert g_col.edge_set() == g_obj.edge_set()
            assert dict(((s, d), w) for s, d, w in g_col.edges()) == dict(
                ((s, d), w) for s, d, w in g_obj.edges()
            )

    def test_follower_logs_match_object_path(self, events, columns):
        assert columns.follower_logs() == build_follower_logs(events)

    def test_flag_rates_match_object_path(self, events, columns):
        assert columns.flag_rates() == user_flag_rates(events)

    def test_daily_counts_match_object_path(self, events, columns):
        aligned = {u for u in columns.users if u.startswith("fac")}
        by_class = columns.daily_counts_by_class({"factual": aligned})
        assert by_class["factual"] == daily_counts(events, "factual", aligned)


class TestTieHeavyEquivalence:
    def test_follower_logs_with_many_simultaneous_observations(self):
        # Few users, tiny timestamp range: lots of (user, ts) collisions, so
        # the last-in-stream-order collapse rule is properly stressed.
        import numpy as np

        from swaynet.events import RetweetEvent

        rng = np.random.default_rng(123)
        events = []
        for i in range(500):
            src = f"u{rng.integers(4)}"
            dst = f"u{rng.integers(4)}"
            events.append(
                RetweetEvent(
                    int(rng.integers(0, 6)), src, dst, "NA", "uncertain",
                    int(rng.integers(0, 50)), int(rng.integers(0, 50)),
                    False, False, False, False,
                )
            )
        columns = EventColumns.from_events(events)
        assert columns.follower_logs() == build_follower_logs(events)
        assert columns.flag_rates() == user_flag_rates(events)
