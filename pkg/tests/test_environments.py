import numpy as np
import pytest

from subgoal_irl.environments import (CARPARK_ACTIONS, GRID_DELTAS,
                                      build_from_layout, build_gridworld)
from subgoal_irl.errors import ConfigError, InputError
from subgoal_irl.layouts import (BUILTIN_GRIDS, format_grid_layout,
                                 generate_room_layout, load_grid_layout,
                                 parse_carpark_config, parse_grid_layout)
from subgoal_irl.mdp import min_steps_to_goal


class TestGridWorld:
    def test_state_count_excludes_obstacles(self, tworoom12):
        layout = tworoom12.env.layout
        assert tworoom12.num_states == 144 - len(layout.obstacles)

    def test_two_cell_grid(self):
        env, mdp, feats = build_gridworld(2, 1, [], (1, 0))
        assert env.num_states == 2
        right = GRID_DELTAS.index((1, 0))
        assert mdp.transition_prob(0, right, 1) == 1.0

    def test_four_by_four_with_wall_matches_enumeration(self):
        # Oracle: independent enumeration of the blocking move rule.
        wall = (1, 1)
        goal = (3, 3)
        env, mdp, _ = build_gridworld(4, 4, [wall], goal)
        cells = [(x, y) for y in range(4) for x in range(4) if (x, y) != wall]
        index = {c: i for i, c in enumerate(cells)}
        expected = np.zeros((15, 4, 15))
        for c in cells:
            for a, (dx, dy) in enumerate(GRID_DELTAS):
                t = (c[0] + dx, c[1] + dy)
                if index.get(c) == index[goal]:
                    t = goal
                elif t == wall or not (0 <= t[0] < 4 and 0 <= t[1] < 4):
                    t = c
                expected[index[c], a, index[t]] = 1.0
        assert np.array_equal(mdp.dense(), expected)

    def test_goal_is_terminal(self, tworoom12):
        g = tworoom12.goal_state
        for a in range(4):
            assert tworoom12.mdp.transition_prob(g, a, g) == 1.0

    def test_goal_inside_obstacle_rejected(self):
        with pytest.raises(ConfigError):
            build_gridworld(3, 3, [(1, 1)], (1, 1))

    def test_unreachable_free_cell_rejected(self):
        # a fully walled-off corner
        walls = [(1, 0), (0, 1), (1, 1)]
        with pytest.raises(ConfigError):
            build_gridworld(3, 3, walls, (2, 2))

    def test_every_transition_is_a_point_mass(self, tworoom12):
        mdp = tworoom12.mdp
        assert np.array_equal(np.diff(mdp.indptr), np.ones(mdp.num_states * 4))
        assert np.array_equal(mdp.succ_probs, np.ones(mdp.num_states * 4))

    def test_goal_reachable_from_every_state(self, tworoom12):
        dist = min_steps_to_goal(tworoom12.mdp, tworoom12.goal_state)
        assert np.all(dist >= 0)


class TestRenderState:
    def test_images_are_distinct_across_all_states(self, tworoom12):
        seen = {tworoom12.env.render_state(s).tobytes()
                for s in range(tworoom12.num_states)}
        assert len(seen) == tworoom12.num_states

    def test_agent_channel_has_one_pixel(self, tworoom12):
        for s in range(tworoom12.num_states):
            assert tworoom12.env.render_state(s)[0].sum() == 1.0

    def test_agent_at_goal_overlaps_goal_channel(self, tworoom12):
        img = tworoom12.env.render_state(tworoom12.goal_state)
        assert np.array_equal(np.argwhere(img[0] == 1), np.argwhere(img[2] == 1))

    def test_constant_channels(self, tworoom12):
        imgs = [tworoom12.env.render_state(s) for s in (0, 5, 17)]
        for c in (1, 2):
            assert np.array_equal(imgs[0][c], imgs[1][c])
            assert np.array_equal(imgs[0][c], imgs[2][c])

    def test_out_of_range_state_rejected(self, tworoom12):
        with pytest.raises(InputError):
            tworoom12.env.render_state(tworoom12.num_states)


class TestCarPark:
    def test_state_count_near_five_thousand(self, carpark):
        assert 4500 <= carpark.num_states <= 5500

    def test_state_count_is_positions_times_headings(self, carpark):
        env = carpark.env
        assert env.num_states == len(env.positions) * env.headings

    def test_rotations_are_inverse(self, carpark):
        env = carpark.env
        for s in range(0, env.num_states, 97):
            assert env.move(env.move(s, 2), 3) == s
            assert env.move(env.move(s, 3), 2) == s

    def test_full_rotation_cycle(self, carpark):
        env = carpark.env
        s = env.state_index(2, 2, 0)
        cur = s
        for _ in range(env.headings):
            cur = env.move(cur, 2)
        assert cur == s

    def test_forward_into_obstacle_is_noop(self, carpark):
        env = carpark.env
        # cell above an obstacle, heading straight down into it
        ox, oy = sorted(env.obstacles)[0]
        s = env.state_index(ox, oy - 1, 4)  # heading 4 moves (0, +1)
        assert env.move(s, 0) == s

    def test_forward_reverse_inverse_when_free(self, carpark):
        env = carpark.env
        s = env.state_index(2, 2, 0)
        fwd = env.move(s, 0)
        assert fwd != s
        assert env.move(fwd, 1) == s

    def test_feature_rows_bijective(self, carpark):
        rows = carpark.features.features
        assert len({r.tobytes() for r in rows}) == rows.shape[0]

    def test_feature_row_width(self, carpark):
        env = carpark.env
        assert carpark.features.feature_dim == 2 * env.height * env.width + env.headings

    def test_goal_states_terminal(self, carpark):
        for g in carpark.goal_alternatives:
            for a in range(len(CARPARK_ACTIONS)):
                assert carpark.mdp.transition_prob(g, a, g) == 1.0


class TestLayoutFiles:
    def test_round_trip(self):
        text = load_grid_layout("grid12_tworoom.txt")
        assert parse_grid_layout(format_grid_layout(text)) == text

    def test_all_builtin_grids_parse(self):
        for name in BUILTIN_GRIDS:
            layout = load_grid_layout(name)
            assert layout.goal is not None
            assert layout.start is not None

    def test_bad_row_length(self):
        with pytest.raises(ConfigError):
            parse_grid_layout("2 2\n..\n.")

    def test_missing_goal(self):
        with pytest.raises(ConfigError):
            parse_grid_layout("2 1\n..")

    def test_unknown_char(self):
        with pytest.raises(ConfigError):
            parse_grid_layout("2 1\n.Z")

    def test_group_metadata(self):
        layout = parse_grid_layout("3 1\n.G.\ngroup 0,0 2,0")
        assert layout.subgoal_groups == (((0, 0), (2, 0)),)

    def test_carpark_missing_key(self):
        with pytest.raises(ConfigError):
            parse_carpark_config("positions_w 4\npositions_h 2\ngrid:\n....\n....")

    def test_generated_layouts_have_doors(self):
        for seed in range(5):
            layout = generate_room_layout(12, 12, 2, seed=seed)
            built = build_from_layout(layout)  # reachability enforced here
            assert built.num_states == 144 - len(layout.obstacles)
