import pytest

from sim_world import load_map, parse_map, PROFILES, BUNDLED_MAPS
from tests.world_builders import grid_network
from utils.exceptions import MapFormatError, InvalidArgumentError


@pytest.mark.parametrize('map_id', BUNDLED_MAPS)
def test_bundled_maps(map_id):
    network = load_map(map_id)
    assert network.name == map_id
    assert all(network.lane_width > profile.width for profile in PROFILES.values())
    h = network.junction_half_size
    for lane in network.lanes.values():
        for node, point in ((lane.start_node, lane.start), (lane.end_node, lane.end)):
            cx, cy = network.nodes[node]
            assert abs(point[0] - cx) <= h + 1e-9 and abs(point[1] - cy) <= h + 1e-9
        assert network.contains([lane.start, lane.end]).all()
        assert len(network.next_lanes(lane.lane_id)) >= 1


def test_town_b_is_sparser_than_town_a():
    a, b = load_map("town-a"), load_map("town-b")
    assert len(a.props) > len(b.props)
    assert not any(a.contains([(p.x, p.y)])[0] for p in a.props)


def test_lane_graph_has_no_u_turns():
    network = grid_network()
    for a, b in network.lane_graph.edges:
        lane_a, lane_b = network.lanes[a], network.lanes[b]
        assert lane_a.end_node == lane_b.start_node
        assert lane_b.end_node != lane_a.start_node


def test_contains():
    network = grid_network()
    assert network.contains([(60.0, -2.0), (60.0, 4.9), (0.0, 0.0)]).tolist() == [True, True, True]
    assert network.contains([(60.0, 5.1), (60.0, 75.0)]).tolist() == [False, False]
    assert network.contains([(60.0, -2.0)], near=(500.0, 500.0), radius=5.0).tolist() == [False]


@pytest.mark.parametrize('text, fragment', [
    ("name = x\nnode A = 0 0\nnode B = 100 100\nroad = A B\n", "not axis-aligned"),
    ("name = x\nnode A = 0 0\nnode B = 100 0\nroad = A B\n", "at least two roads"),
    ("name = x\nnode A = 0 0\ncolour = blue\n", "<string>:3"),
    ("name = x\nnode A = zero 0\n", "<string>:2"),
    ("node A = 0 0\nnode B = 100 0\nroad = A B\n", "missing `name`"),
    ("name = x\nnode A = 0 0\nnode B = 100 0\nroad = A C\n", "unknown junction C"),
])
def test_parse_errors(text, fragment):
    with pytest.raises(MapFormatError) as e:
        parse_map(text)
    assert fragment in str(e.value)


def test_narrow_lanes_rejected():
    text = "name = x\nlane_width = 1.5\n" \
           "node A = 0 0\nnode B = 100 0\nnode C = 100 100\nnode D = 0 100\nroad = A B C D A\n"
    with pytest.raises(MapFormatError):
        parse_map(text)


def test_unknown_map():
    with pytest.raises(InvalidArgumentError):
        load_map("town-z")
