import json

import pytest

from taxiroll.demand import (
    CeFutureSampler,
    DemandError,
    DemandModel,
    Request,
    Scenario,
    ScenarioError,
    ce_future_sampler,
    load_scenario,
    sample_scenario,
    save_scenario,
    shift_future,
)


class TestDemandModel:
    def test_rejects_nonpositive_rate(self):
        with pytest.raises(DemandError):
            DemandModel(arrival_rate=0.0)

    def test_rejects_negative_weights(self):
        with pytest.raises(DemandError):
            DemandModel(arrival_rate=1.0, pickup_weights={1: -0.5})


class TestSampleScenario:
    def test_poisson_mean_over_seeds(self, midtown):
        # E[total] = rate * horizon = 6; loose CLT band frozen up front
        model = DemandModel(arrival_rate=0.1)
        counts = [
            len(sample_scenario(model, midtown, 60, seed).requests)
            for seed in range(1000)
        ]
        mean = sum(counts) / len(counts)
        assert 5.4 <= mean <= 6.6

    def test_same_seed_identical(self, midtown, medium_model):
        a = sample_scenario(medium_model, midtown, 60, seed=42)
        b = sample_scenario(medium_model, midtown, 60, seed=42)
        assert a == b

    def test_load_levels_order_counts(self, midtown):
        totals = {}
        for level, rate in (("low", 0.05), ("medium", 0.15), ("high", 0.30)):
            model = DemandModel(arrival_rate=rate)
            totals[level] = sum(
                len(sample_scenario(model, midtown, 60, s).requests)
                for s in range(40)
            )
        assert totals["low"] < totals["medium"] < totals["high"]

    def test_requests_valid(self, midtown, medium_model):
        sc = sample_scenario(medium_model, midtown, 60, seed=1)
        for r in sc.requests:
            assert r.pickup != r.dropoff
            assert midtown.paths.reachable(r.pickup, r.dropoff)
            assert 0 <= r.entry_time < 60

    def test_weighted_nodes_respected(self, midtown):
        a, b = midtown.node_ids[0], midtown.node_ids[1]
        model = DemandModel(
            arrival_rate=0.5,
            pickup_weights={a: 1.0},
            dropoff_weights={b: 1.0},
        )
        sc = sample_scenario(model, midtown, 40, seed=3)
        assert sc.requests
        assert all(r.pickup == a and r.dropoff == b for r in sc.requests)

    def test_impossible_pair_raises(self, midtown):
        a = midtown.node_ids[0]
        model = DemandModel(
            arrival_rate=5.0, pickup_weights={a: 1.0}, dropoff_weights={a: 1.0}
        )
        with pytest.raises(DemandError, match="attempts"):
            sample_scenario(model, midtown, 30, seed=0)


class TestCeFutures:
    def test_fixed_count_every_sample(self, midtown):
        # round(0.2 * 10) = 2 requests in every sample
        model = DemandModel(arrival_rate=0.2)
        sampler = CeFutureSampler(model, midtown, t_h=10, family_seed=9)
        assert sampler.count == 2
        for i in range(100):
            assert len(sampler.sample(i)) == 2

    def test_multisets_frozen_pairing_varies(self, midtown):
        model = DemandModel(arrival_rate=0.5)
        sampler = CeFutureSampler(model, midtown, t_h=10, family_seed=4)
        picks = sorted(sampler.pickups)
        drops = sorted(sampler.dropoffs)
        pairings = set()
        for i in range(60):
            fut = sampler.sample(i)
            assert sorted(r.pickup for r in fut) == picks
            assert sorted(r.dropoff for r in fut) == drops
            pairings.add(tuple(sorted((r.pickup, r.dropoff) for r in fut)))
            for r in fut:
                assert 1 <= r.entry_time <= 10
        assert len(pairings) > 1  # pairing/timing actually varies

    def test_same_seed_same_stream(self, midtown, medium_model):
        a = ce_future_sampler(medium_model, midtown, 10, seed=77)
        b = ce_future_sampler(medium_model, midtown, 10, seed=77)
        assert a == b

    def test_streams_sorted_by_entry(self, midtown):
        model = DemandModel(arrival_rate=0.8)
        sampler = CeFutureSampler(model, midtown, t_h=10, family_seed=2)
        for i in range(20):
            entries = [r.entry_time for r in sampler.sample(i)]
            assert entries == sorted(entries)

    def test_shift_future_rebases(self, midtown):
        model = DemandModel(arrival_rate=0.3)
        fut = ce_future_sampler(model, midtown, 10, seed=5)
        shifted = shift_future(fut, clock=7, id_base=1000)
        for orig, moved in zip(fut, shifted):
            assert moved.entry_time == orig.entry_time + 7
            assert moved.req_id == orig.req_id + 1000

    def test_unsatisfiable_dropoff_raises(self, midtown):
        a = midtown.node_ids[0]
        model = DemandModel(
            arrival_rate=0.5, pickup_weights={a: 1.0}, dropoff_weights={a: 1.0}
        )
        with pytest.raises(DemandError, match="dropoff"):
            CeFutureSampler(model, midtown, t_h=10, family_seed=0)


class TestScenarioIo:
    def test_round_trip(self, midtown, medium_model):
        sc = sample_scenario(medium_model, midtown, 60, seed=8, load_level="medium")
        assert load_scenario(save_scenario(sc), midtown) == sc

    def test_save_canonical_bytes(self, midtown, medium_model):
        sc = sample_scenario(medium_model, midtown, 60, seed=8)
        assert save_scenario(sc) == save_scenario(sc)

    def test_entry_past_horizon_rejected(self):
        doc = {
            "map_id": "m",
            "horizon": 10,
            "load_level": "low",
            "seed": 0,
            "requests": [
                {"req_id": 0, "pickup": 1, "dropoff": 2, "entry_time": 10}
            ],
        }
        with pytest.raises(ScenarioError, match="outside"):
            load_scenario(json.dumps(doc))

    def test_unsorted_requests_rejected(self):
        doc = {
            "map_id": "m",
            "horizon": 10,
            "load_level": "low",
            "seed": 0,
            "requests": [
                {"req_id": 0, "pickup": 1, "dropoff": 2, "entry_time": 5},
                {"req_id": 1, "pickup": 1, "dropoff": 2, "entry_time": 3},
            ],
        }
        with pytest.raises(ScenarioError, match="sorted"):
            load_scenario(json.dumps(doc))

    def test_wrong_map_rejected(self, midtown, medium_model):
        sc = sample_scenario(medium_model, midtown, 20, seed=1)
        data = save_scenario(sc).replace(b"sf-midtown-42", b"other-map")
        with pytest.raises(ScenarioError, match="map"):
            load_scenario(data, midtown)

    def test_same_node_request_rejected(self):
        with pytest.raises(ScenarioError, match="pickup equals dropoff"):
            Scenario(
                map_id="m",
                horizon=5,
                requests=(Request(0, 3, 3, 1),),
            )
