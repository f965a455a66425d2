import hashlib
import json

import numpy as np
import pytest

from nspregen.cost import CostModel
from nspregen.errors import ConfigError, InfeasibleSeed
from nspregen.geometry import Axis, Tier
from nspregen.physics import FlowKind, ReBand
from nspregen.planner import (
    DEFAULT_ALPHA_GRID,
    DEFAULT_AUGMENT_GRID,
    DatasetManifest,
    GenerationSettings,
    ManifestEntry,
    MixFraction,
    alpha_sweep_manifest,
    budget_augmentation_plan,
    compute_savings_ratio,
    load_manifest,
    materialize_manifest,
    save_manifest,
)
from nspregen.solver import SolverParams
from nspregen.trajio import read_trajectory


def synthetic_model(easy=1.0, medium=3.0, hard=10.0):
    return CostModel("physics", {"easy": easy, "medium": medium, "hard": hard})


def tiny_entry(tier="easy", count=2, seed=123, re_lo=100, re_hi=300):
    return ManifestEntry(
        tier=tier, count=count,
        re_band=ReBand(re_lo, re_hi, (re_lo + re_hi) / 2, (re_hi - re_lo) / 4),
        obstacle_min=0, obstacle_max=0, obstacle_size=(0.15, 0.3),
        base_seed=seed,
    )


def tiny_settings(grid=(32, 32), workers=1):
    return GenerationSettings(solver=SolverParams(grid_dims=grid),
                              kind=FlowKind.FPO, workers=workers)


class TestAlphaSweep:
    def test_paper_fractions(self):
        manifests = alpha_sweep_manifest(
            800, [MixFraction(0.10), MixFraction(0.25)],
            Tier.EASY, Tier.HARD, Axis.PHYSICS, base_seed=0)
        counts = [m.train_counts() for m in manifests]
        assert counts[0] == {"easy": 720, "hard": 80}
        assert counts[1] == {"easy": 600, "hard": 200}

    def test_endpoints(self):
        manifests = alpha_sweep_manifest(
            800, [MixFraction(0.0), MixFraction(1.0)],
            Tier.MEDIUM, Tier.HARD, Axis.GEOMETRY, base_seed=0)
        assert manifests[0].train_counts() == {"medium": 800}
        assert manifests[1].train_counts() == {"hard": 800}

    def test_count_conservation_on_default_grid(self):
        manifests = alpha_sweep_manifest(
            800, [MixFraction(a) for a in DEFAULT_ALPHA_GRID],
            Tier.EASY, Tier.HARD, Axis.PHYSICS, base_seed=3)
        for m in manifests:
            assert m.total_train() == 800

    def test_round_half_up(self):
        manifests = alpha_sweep_manifest(
            30, [MixFraction(0.05)], Tier.EASY, Tier.HARD,
            Axis.PHYSICS, base_seed=0)
        # 0.05 * 30 = 1.5 rounds toward the hard tier
        assert manifests[0].train_counts()["hard"] == 2

    def test_positive_alpha_keeps_a_hard_example(self):
        manifests = alpha_sweep_manifest(
            800, [MixFraction(a) for a in DEFAULT_ALPHA_GRID if a > 0],
            Tier.EASY, Tier.HARD, Axis.PHYSICS, base_seed=0)
        for m in manifests:
            assert m.train_counts().get("hard", 0) >= 1

    def test_held_out_shared_and_disjoint(self):
        manifests = alpha_sweep_manifest(
            800, [MixFraction(a) for a in DEFAULT_ALPHA_GRID],
            Tier.EASY, Tier.HARD, Axis.PHYSICS, base_seed=9)
        held = {m.held_out_seed for m in manifests}
        assert len(held) == 1
        entry_seeds = {e.base_seed for m in manifests for e in m.entries}
        assert held.isdisjoint(entry_seeds)
        assert len(entry_seeds) == sum(len(m.entries) for m in manifests)


class TestBudgetPlan:
    def test_hand_fixture(self):
        model = synthetic_model(easy=1.0, hard=10.0)
        grid = tuple(range(1, 1001))
        plan = budget_augmentation_plan(model, 2720.0, Tier.EASY, grid)
        assert plan.hard_seed_cost == 2000.0
        assert plan.feasible_counts == tuple(range(1, 721))

    def test_default_grid_fixture(self):
        model = synthetic_model(easy=1.0, hard=10.0)
        plan = budget_augmentation_plan(model, 2720.0, Tier.EASY)
        assert plan.feasible_counts == (1, 2, 4, 8, 16, 32, 64, 128, 256, 512)

    def test_budget_below_seed_cost(self):
        with pytest.raises(InfeasibleSeed):
            budget_augmentation_plan(synthetic_model(), 1999.0, Tier.EASY)

    def test_vanishing_cost_makes_everything_feasible(self):
        model = synthetic_model(easy=1e-12, hard=10.0)
        plan = budget_augmentation_plan(model, 2000.5, Tier.EASY)
        assert plan.feasible_counts == DEFAULT_AUGMENT_GRID

    def test_no_infeasible_count_included(self):
        model = synthetic_model(easy=2.0, medium=3.0, hard=10.0)
        plan = budget_augmentation_plan(model, 3000.0, Tier.MEDIUM)
        for c in plan.feasible_counts:
            assert plan.hard_seed_cost + c * 3.0 <= 3000.0
        excluded = set(DEFAULT_AUGMENT_GRID) - set(plan.feasible_counts)
        for c in excluded:
            assert plan.hard_seed_cost + c * 3.0 > 3000.0


class TestSavingsRatio:
    def make_manifests(self):
        ref = DatasetManifest(
            name="ref", axis="physics",
            entries=[tiny_entry("hard", 800)], held_out_count=0, held_out_seed=1)
        mixed = DatasetManifest(
            name="mix", axis="physics",
            entries=[tiny_entry("easy", 720), tiny_entry("hard", 80, seed=5)],
            held_out_count=0, held_out_seed=1)
        return ref, mixed

    def test_synthetic_fixture(self):
        ref, mixed = self.make_manifests()
        ratio = compute_savings_ratio(ref, mixed, synthetic_model(easy=1.0, hard=10.0))
        assert ratio == pytest.approx(8000.0 / 1520.0, abs=1e-9)

    def test_identical_manifests(self):
        ref, _ = self.make_manifests()
        assert compute_savings_ratio(ref, ref, synthetic_model()) == 1.0

    def test_invariant_under_cost_scaling(self):
        ref, mixed = self.make_manifests()
        base = compute_savings_ratio(ref, mixed, synthetic_model(easy=1.0, hard=10.0))
        scaled = compute_savings_ratio(ref, mixed,
                                       synthetic_model(easy=7.0, hard=70.0))
        assert scaled == pytest.approx(base, rel=1e-12)


class TestManifestJson:
    def test_round_trip(self, tmp_path):
        m = DatasetManifest(
            name="rt", axis="combined",
            entries=[tiny_entry("easy", 3), tiny_entry("hard", 2, seed=9)],
            held_out_count=100, held_out_seed=77)
        path = tmp_path / "m.json"
        save_manifest(m, path)
        back = load_manifest(path)
        assert back == m

    def test_schema_error_names_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"version": 1, "name": "x"}))
        with pytest.raises(ConfigError, match="axis"):
            load_manifest(path)

    def test_invalid_json(self, tmp_path):
        path = tmp_path / "nope.json"
        path.write_text("{not json")
        with pytest.raises(ConfigError):
            load_manifest(path)

    def test_unknown_axis_rejected(self):
        with pytest.raises(ConfigError):
            DatasetManifest(name="x", axis="difficulty",
                            entries=[tiny_entry()], held_out_count=0,
                            held_out_seed=0)


@pytest.mark.slow
class TestMaterialize:
    def test_zero_count_entries_make_no_files(self, tmp_path):
        m = DatasetManifest(
            name="zc", axis="geometry",
            entries=[tiny_entry("easy", 0), tiny_entry("medium", 1, seed=4)],
            held_out_count=0, held_out_seed=1)
        result, records, summary = materialize_manifest(
            m, tmp_path, tiny_settings())
        assert summary["generated"] == 1
        assert len(result.files) == 1

    def test_deterministic_bytes_and_idempotence(self, tmp_path):
        m = DatasetManifest(
            name="det", axis="geometry", entries=[tiny_entry("easy", 2)],
            held_out_count=0, held_out_seed=1)
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        r1, recs1, s1 = materialize_manifest(m, out1, tiny_settings())
        r2, _, _ = materialize_manifest(m, out2, tiny_settings())
        h1 = [hashlib.sha256((out1 / f).read_bytes()).hexdigest() for f in r1.files]
        h2 = [hashlib.sha256((out2 / f).read_bytes()).hexdigest() for f in r2.files]
        assert h1 == h2
        # idempotent re-run: nothing re-simulated
        r3, recs3, s3 = materialize_manifest(m, out1, tiny_settings())
        assert s3["generated"] == 0 and s3["skipped"] == 2
        assert r3.files == r1.files

    def test_resume_after_interruption(self, tmp_path):
        m = DatasetManifest(
            name="res", axis="geometry", entries=[tiny_entry("easy", 2)],
            held_out_count=0, held_out_seed=1)
        r1, _, _ = materialize_manifest(m, tmp_path, tiny_settings())
        victim = tmp_path / r1.files[0]
        reference = victim.read_bytes()
        victim.unlink()
        r2, _, s2 = materialize_manifest(m, tmp_path, tiny_settings())
        assert s2["generated"] == 1 and s2["skipped"] == 1
        assert victim.read_bytes() == reference

    def test_corrupt_file_regenerated(self, tmp_path):
        m = DatasetManifest(
            name="cor", axis="geometry", entries=[tiny_entry("easy", 1)],
            held_out_count=0, held_out_seed=1)
        r1, _, _ = materialize_manifest(m, tmp_path, tiny_settings())
        victim = tmp_path / r1.files[0]
        reference = victim.read_bytes()
        victim.write_bytes(reference[: len(reference) // 2])
        _, _, s2 = materialize_manifest(m, tmp_path, tiny_settings())
        assert s2["generated"] == 1
        assert victim.read_bytes() == reference

    def test_failures_recorded_and_batch_continues(self, tmp_path):
        bad = ManifestEntry(
            tier="hard", count=1,
            re_band=ReBand(100, 300, 200, 50),
            obstacle_min=2, obstacle_max=2, obstacle_size=(1.5, 1.6),
            base_seed=1)
        m = DatasetManifest(
            name="fail", axis="geometry",
            entries=[bad, tiny_entry("easy", 1, seed=8)],
            held_out_count=0, held_out_seed=1)
        settings = GenerationSettings(solver=SolverParams(grid_dims=(32, 32)),
                                      kind=FlowKind.FPO, max_attempts=50)
        result, records, summary = materialize_manifest(m, tmp_path, settings)
        assert summary["generated"] == 1
        assert len(summary["failed"]) == 1
        assert "placed" in summary["failed"][0]["error"]
        assert len(result.files) == 1

    def test_held_out_uses_hard_settings(self, tmp_path):
        m = DatasetManifest(
            name="ho", axis="geometry",
            entries=[tiny_entry("easy", 1)],
            held_out_count=1, held_out_seed=999)
        result, records, summary = materialize_manifest(
            m, tmp_path, tiny_settings())
        held_files = [f for f in result.files if f.startswith("held_out/")]
        assert len(held_files) == 1
        traj = read_trajectory(tmp_path / held_files[0])
        # hard tier on the geometry axis: 2..10 obstacles blocked out
        mask = traj.frames[0, :, :, 4]
        assert (mask == 0).sum() > 0

    def test_file_payload_matches_direct_read(self, tmp_path):
        m = DatasetManifest(
            name="rd", axis="geometry", entries=[tiny_entry("easy", 1)],
            held_out_count=0, held_out_seed=1)
        result, _, _ = materialize_manifest(m, tmp_path, tiny_settings())
        traj = read_trajectory(tmp_path / result.files[0])
        assert traj.frames.shape == (20, 32, 32, 6)
        assert traj.meta.kind == "FPO"
        assert np.isfinite(traj.frames).all()
        # manifest written next to the files
        saved = load_manifest(tmp_path / "rd.manifest.json")
        assert saved.files == result.files
