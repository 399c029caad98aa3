import numpy as np

from swaynet.rng import derive_key, mix64, stream


class TestMix:
    def test_bijective_avalanche(self):
        seen = {mix64(i) for i in range(1000)}
        assert len(seen) == 1000

    def test_stable_values(self):
        # Frozen so key derivations never drift between runs or versions.
        assert mix64(0) == 16294208416658607535
        assert mix64(1) == 10451216379200822465


class TestDeriveKey:
    def test_deterministic(self):
        assert derive_key(7, "a", 3) == derive_key(7, "a", 3)

    def test_order_sensitive(self):
        assert derive_key(7, 1, 2) != derive_key(7, 2, 1)

    def test_component_boundaries_matter(self):
        assert derive_key(7, "ab", "c") != derive_key(7, "a", "bc")

    def test_seed_sensitivity(self):
        assert derive_key(7, "x") != derive_key(8, "x")


class TestStream:
    def test_same_key_same_draws(self):
        a = stream(42, "task", 3).random(10)
        b = stream(42, "task", 3).random(10)
        assert np.array_equal(a, b)

    def test_distinct_keys_distinct_draws(self):
        a = stream(42, "task", 3).random(10)
        b = stream(42, "task", 4).random(10)
        assert not np.array_equal(a, b)

    def test_streams_do_not_interfere(self):
        # Drawing from one stream never affects another: scheduling freedom.
        a1 = stream(1, "a")
        b = stream(1, "b")
        b.random(1000)
        a2 = stream(1, "a")
        assert np.array_equal(a1.random(5), a2.random(5))

    def test_choice_without_replacement_unique(self):
        gen = stream(0, "sample")
        idx = gen.choice(50, size=20, replace=False)
        assert len(set(idx.tolist())) == 20
