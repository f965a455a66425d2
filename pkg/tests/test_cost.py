import math

import pytest

from nspregen.cost import (
    CostRecord,
    aggregate_costs,
    check_monotonicity,
    fit_cost_model,
    read_cost_csv,
    read_cost_table_csv,
    write_cost_csv,
    write_cost_table_csv,
)
from nspregen.errors import MissingTier
from nspregen.geometry import Axis, Tier


def record(tier, wall, axis="physics", re=500.0, obstacles=0, sim_id="s"):
    return CostRecord(sim_id=sim_id, axis=axis, tier=tier, obstacle_count=obstacles,
                      re=re, wall_seconds=wall, steps=100, cg_iters_total=1000,
                      host="testhost")


class TestAggregate:
    def test_thirty_identical_records(self):
        table = aggregate_costs([record("easy", 10.0) for _ in range(30)])
        cell = table.get("physics", "easy")
        assert cell.mean_seconds == 10.0 and cell.std == 0.0 and cell.n == 30

    def test_mixed_cells_hand_means(self):
        records = [
            record("easy", 1.0), record("easy", 3.0),
            record("medium", 10.0), record("medium", 14.0),
            record("hard", 50.0), record("hard", 70.0),
        ]
        table = aggregate_costs(records)
        assert table.get("physics", "easy").mean_seconds == 2.0
        assert table.get("physics", "medium").mean_seconds == 12.0
        assert table.get("physics", "hard").mean_seconds == 60.0
        assert table.get("physics", "easy").std == 1.0  # population std
        assert table.get("physics", "hard").n == 2

    def test_single_record(self):
        table = aggregate_costs([record("hard", 33.3)])
        cell = table.get("physics", "hard")
        assert cell.mean_seconds == 33.3 and cell.std == 0.0 and cell.n == 1

    def test_matches_brute_force_group_means(self):
        import random

        rnd = random.Random(0)
        records = []
        for _ in range(50):
            tier = rnd.choice(["easy", "medium", "hard"])
            axis = rnd.choice(["geometry", "physics"])
            records.append(record(tier, rnd.uniform(1, 100), axis=axis))
        table = aggregate_costs(records)
        for (axis, tier), cell in table.cells.items():
            group = [r.wall_seconds for r in records
                     if r.axis == axis and r.tier == tier]
            mean = sum(group) / len(group)
            var = sum((g - mean) ** 2 for g in group) / len(group)
            assert cell.mean_seconds == pytest.approx(mean, rel=1e-12)
            assert cell.std == pytest.approx(math.sqrt(var), rel=1e-12)
            assert cell.n == len(group)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            aggregate_costs([])


class TestFitModel:
    def make_table(self, easy=5.0, medium=9.0, hard=45.0):
        return aggregate_costs([
            record("easy", easy), record("medium", medium), record("hard", hard),
        ])

    def test_identity_fit(self):
        model = fit_cost_model(self.make_table(), Axis.PHYSICS)
        assert model.cost(Tier.EASY) == 5.0
        assert model.cost(Tier.MEDIUM) == 9.0
        assert model.cost(Tier.HARD) == 45.0

    def test_missing_tier(self):
        table = aggregate_costs([record("easy", 5.0), record("medium", 9.0)])
        with pytest.raises(MissingTier):
            fit_cost_model(table, Axis.PHYSICS)

    def test_zero_variance_pass_through(self):
        table = aggregate_costs(
            [record("easy", 5.0)] * 3 + [record("medium", 9.0)] * 3
            + [record("hard", 45.0)] * 3)
        model = fit_cost_model(table, "physics")
        assert model.c == {"easy": 5.0, "medium": 9.0, "hard": 45.0}


class TestMonotonicity:
    def test_monotone_table(self):
        report = check_monotonicity(
            aggregate_costs([record("easy", 1.0), record("medium", 2.0),
                             record("hard", 4.0)]), Axis.PHYSICS)
        assert report["monotone"]
        assert report["ratio_hard_easy"] == 4.0

    def test_inverted_table(self):
        report = check_monotonicity(
            aggregate_costs([record("easy", 4.0), record("medium", 2.0),
                             record("hard", 1.0)]), Axis.PHYSICS)
        assert not report["monotone"]

    def test_equal_means_not_monotone(self):
        report = check_monotonicity(
            aggregate_costs([record("easy", 2.0), record("medium", 2.0),
                             record("hard", 2.0)]), Axis.PHYSICS)
        assert not report["monotone"]
        assert report["margin_medium_easy"] == 0.0


class TestCsv:
    def test_records_round_trip_f64(self, tmp_path):
        records = [record("easy", 1.0 / 3.0, re=123.456789012345),
                   record("hard", math.pi, obstacles=7)]
        path = tmp_path / "cost.csv"
        write_cost_csv(records, path)
        back = read_cost_csv(path)
        assert back == records

    def test_append_mode(self, tmp_path):
        path = tmp_path / "cost.csv"
        write_cost_csv([record("easy", 1.0)], path)
        write_cost_csv([record("hard", 2.0)], path, append=True)
        assert len(read_cost_csv(path)) == 2

    def test_table_round_trip(self, tmp_path):
        table = aggregate_costs([record("easy", 1 / 7), record("easy", 2 / 7),
                                 record("hard", 1e-3)])
        path = tmp_path / "table.csv"
        write_cost_table_csv(table, path)
        back = read_cost_table_csv(path)
        for key, cell in table.cells.items():
            assert back.cells[key].mean_seconds == cell.mean_seconds
            assert back.cells[key].std == cell.std
            assert back.cells[key].n == cell.n
