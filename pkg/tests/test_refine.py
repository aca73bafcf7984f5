from dataclasses import replace

import numpy as np
import pytest

from bttf.augment import SegmentSpec, build_augmented
from bttf.errors import PoolError
from bttf.linear import TrainConfig, forward, init_model
from bttf.refine import (PoolEntry, RefinementPool, assign_ranks, load_pool, make_pool,
                         pool_predict, read_manifest, refinement_delta, save_pool,
                         segment_adjustments, train_pool)

CFG = TrainConfig(strategy="1E")


def run_pool(p, workers=1, base_seed=0, segments=None, config=CFG):
    w, f = p["windows"], p["forecasts"]
    return train_pool(w["train"], f["train"], w["val"], f["val"], segments or p["segments"],
                      config, base_seed=base_seed, workers=workers)


class TestRanking:
    def test_hand_scores(self):
        segs = [SegmentSpec(i, i + 1, i + 1) for i in range(3)]
        assert assign_ranks(segs, [0.5, 0.2, 0.9]) == [2, 1, 3]

    def test_ties_by_start(self):
        segs = [SegmentSpec(4, 6, 3), SegmentSpec(0, 2, 1), SegmentSpec(2, 4, 2)]
        assert assign_ranks(segs, [0.1, 0.1, 0.1]) == [3, 1, 2]

    def test_swapping_scores_swaps_slices(self, small_problem):
        pool = run_pool(small_problem, segments=small_problem["segments"][:2])
        a, b = pool.entries
        swapped = make_pool([(a.segment, a.model, b.val_mse), (b.segment, b.model, a.val_mse)], 0)
        w, f = small_problem["windows"]["test"], small_problem["forecasts"]["test"]
        t1, t2 = pool_predict(pool, w, f), pool_predict(swapped, w, f)
        assert a.val_mse != b.val_mse
        np.testing.assert_array_equal(t1[::-1], t2)


class TestTrainPool:
    def test_single_member(self, small_problem):
        pool = run_pool(small_problem, segments=small_problem["segments"][:1])
        assert len(pool) == 1 and pool.entries[0].rank == 1

    def test_ranks_consistent_with_scores(self, small_problem):
        pool = run_pool(small_problem)
        assert len(pool) == len(small_problem["segments"])
        assert [e.rank for e in pool.entries] == list(range(1, len(pool) + 1))
        scores = [e.val_mse for e in pool.entries]
        assert scores == sorted(scores)

    def test_member_seeds(self, small_problem):
        pool = run_pool(small_problem, base_seed=10)
        assert all(e.model.seed == 10 + e.segment.index for e in pool.entries)
        assert all(e.model.input_len == small_problem["L"] + e.segment.width for e in pool.entries)

    def test_seed_changes_parameters_only(self, small_problem):
        a, b = run_pool(small_problem, base_seed=0), run_pool(small_problem, base_seed=1)
        assert a.to_bytes() != b.to_bytes()
        assert [e.segment for e in sorted(a.entries, key=lambda e: e.segment.index)] == \
               [e.segment for e in sorted(b.entries, key=lambda e: e.segment.index)]

    @pytest.mark.parametrize("workers", [2, 3])
    def test_parallel_is_bit_identical(self, small_problem, workers):
        seq = run_pool(small_problem, workers=1)
        par = run_pool(small_problem, workers=workers)
        assert seq.to_bytes() == par.to_bytes()

    def test_parallel_with_n_workers(self, small_problem):
        n = len(small_problem["segments"])
        assert run_pool(small_problem, workers=1).to_bytes() == run_pool(small_problem, workers=n).to_bytes()

    def test_failure_names_segment(self, small_problem):
        diverging = TrainConfig(strategy="1E", optimizer="sgd", learning_rate=1e8, batch_size=4)
        with pytest.raises(PoolError) as err:
            run_pool(small_problem, config=diverging)
        assert err.value.segment_index == small_problem["segments"][0].index


class TestPredict:
    def test_zero_models(self, small_problem):
        p = small_problem
        entries = []
        for i, seg in enumerate(p["segments"][:3]):
            m = init_model("plain", p["L"] + seg.width, p["H"])
            m = replace(m, params={k: np.zeros_like(v) for k, v in m.params.items()})
            entries.append(PoolEntry(seg, m, 0.1 * i, i + 1))
        out = pool_predict(RefinementPool(tuple(entries), 0), p["windows"]["test"], p["forecasts"]["test"])
        assert out.shape == (3, len(p["windows"]["test"]), p["H"]) and np.all(out == 0)

    def test_matches_per_model_forward(self, small_problem):
        p = small_problem
        pool = run_pool(p, segments=p["segments"][:2])
        w, f = p["windows"]["test"], p["forecasts"]["test"]
        one_w = type(w)(w.inputs[:1], w.targets[:1], w.anchors[:1])
        out = pool_predict(pool, one_w, f[:1])
        assert out.shape == (2, 1, p["H"])
        for k, e in enumerate(pool.entries):
            aug = np.concatenate([w.inputs[0], f[0, e.segment.start:e.segment.end]])
            np.testing.assert_allclose(out[k, 0], forward(e.model, aug), atol=1e-12)

    def test_uses_own_segment(self, small_problem):
        p = small_problem
        pool = run_pool(p)
        w, f = p["windows"]["val"], p["forecasts"]["val"]
        out = pool_predict(pool, w, f)
        for k, e in enumerate(pool.entries):
            aug = build_augmented(w, f, e.segment)
            np.testing.assert_array_equal(out[k], e.model.predict(aug.inputs))


class TestDelta:
    def test_identical(self):
        assert np.all(refinement_delta([1.0, 2.0], [1.0, 2.0]) == 0)

    def test_arithmetic(self):
        assert refinement_delta([2.0, 2.0], [1.0, 3.0]).tolist() == [1.0, -1.0]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            refinement_delta([1.0], [1.0, 2.0])

    def test_summary_per_segment(self, small_problem):
        p = small_problem
        pool = run_pool(p)
        tensor = pool_predict(pool, p["windows"]["test"], p["forecasts"]["test"])
        rows = segment_adjustments(pool, tensor, p["forecasts"]["test"])
        assert [r["segment"]["index"] for r in rows] == [s.index for s in p["segments"]]
        assert all(np.isfinite(r["mean_abs_delta"]) for r in rows)


def test_manifest_round_trip(small_problem, tmp_path):
    pool = run_pool(small_problem)
    manifest_path = save_pool(pool, tmp_path / "pool", first_stage_digest="deadbeef")
    manifest = read_manifest(manifest_path)
    assert manifest["first_stage_model"] == "deadbeef" and manifest["version"] == 1
    assert [e["rank"] for e in manifest["entries"]] == list(range(1, len(pool) + 1))
    assert load_pool(manifest_path).to_bytes() == pool.to_bytes()
