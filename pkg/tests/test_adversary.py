import pytest

from slidenet.adversary import (BEHAVIORS, ConfigError, default_backbone,
                                find_honest_path, full_mask,
                                generate_schedule, validate_conforming)


class TestValidateConforming:
    def test_complete_graph_ok(self):
        sched = generate_schedule("static", 4, 20)
        assert validate_conforming(sched, set(), 0, 3) is None

    def test_isolated_sender_flagged(self):
        sched = generate_schedule("static", 4, 20)
        bits = sched.bit
        dead = sched.masks[9]
        for b in (1, 2, 3):
            dead &= ~(1 << bits[(0, b)])
        sched.masks[9] = dead
        violation = validate_conforming(sched, set(), 0, 3)
        assert violation is not None and violation.round_index == 10

    def test_only_path_through_corrupt_node(self):
        # 5 nodes, active edges only 0-2-4: corrupting node 2 severs every
        # honest path from the start
        sched = generate_schedule("scripted", 5, 10, backbone=[0, 2, 4],
                                  script=[[(0, 2), (2, 4)]])
        assert validate_conforming(sched, set(), 0, 4) is None
        violation = validate_conforming(sched, {2}, 0, 4)
        assert violation is not None and violation.round_index == 1

    def test_churn_zero_probability_is_static(self):
        sched = generate_schedule("churn", 4, 50, seed=1, p=0.0)
        assert sched.masks == [full_mask(4)] * 50

    def test_churn_seed42_conforms(self):
        sched = generate_schedule("churn", 5, 500, seed=42, p=0.3)
        assert validate_conforming(sched, set(), 0, 4) is None

    def test_churn_determinism(self):
        a = generate_schedule("churn", 5, 200, seed=9, p=0.4)
        b = generate_schedule("churn", 5, 200, seed=9, p=0.4)
        assert a.masks == b.masks

    def test_corrupted_backbone_refused(self):
        with pytest.raises(ConfigError):
            generate_schedule("churn", 5, 10, p=0.2, backbone=[0, 2, 4],
                              corrupt_nodes={2})

    def test_default_backbone_avoids_corrupt(self):
        assert default_backbone(5, {1}) == [0, 2, 4]
        assert default_backbone(5, set()) == [0, 1, 4]
        assert default_backbone(4, {1, 2}) == [0, 3]


class TestHonestPath:
    def test_prefers_backbone(self):
        sched = generate_schedule("static", 5, 5, backbone=[0, 2, 4])
        assert find_honest_path(sched, 1, set(), 0, 4) == [0, 2, 4]

    def test_bfs_fallback_avoids_corrupt(self):
        sched = generate_schedule("scripted", 5, 5, backbone=[0, 3, 4],
                                  script=[[(0, 1), (1, 4), (0, 3), (3, 4)]])
        sched.backbone = [0, 1, 4]     # backbone node corrupted below
        path = find_honest_path(sched, 1, {1}, 0, 4)
        assert path == [0, 3, 4]

    def test_behavior_registry(self):
        for name in ("deleter", "duplicator", "replacer", "liar", "ghost",
                     "report-forger"):
            assert name in BEHAVIORS
