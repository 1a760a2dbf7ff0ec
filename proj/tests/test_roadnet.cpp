#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "satop/roadnet.hpp"
#include "test_util.hpp"

using namespace satop;

namespace {

// brute-force oracle: minimum duration over all simple vertex paths
double brute_force_min(const RoadGraph& g, int source_id, int target_id) {
    double best = std::numeric_limits<double>::infinity();
    std::vector<char> visited(g.vertices.size(), 0);
    std::function<void(int, double)> dfs = [&](int v_idx, double cost) {
        if (g.vertices[v_idx].id == target_id) {
            best = std::min(best, cost);
            return;
        }
        visited[v_idx] = 1;
        for (int ei : g.out_edges(v_idx)) {
            int w = g.vertex_idx(g.edges[ei].to);
            if (!visited[w]) dfs(w, cost + g.edges[ei].travel_time);
        }
        visited[v_idx] = 0;
    };
    dfs(g.vertex_idx(source_id), 0.0);
    return best;
}

} // namespace

TEST_CASE("smallest valid input loads") {
    auto dir = testutil::temp_dir("roadnet");
    auto gp = testutil::write_file(dir / "g.txt",
                                   "vertices\nid,x,y\n0,0,0\n1,100,0\n"
                                   "edges\nid,from,to,travel_time_s\n0,0,1,60\n");
    auto sp = testutil::write_file(dir / "s.csv",
                                   "spot_id,edge_id,offset,max_duration_s\n0,0,0.5,3600\n");
    auto net = load_graph(gp, sp);
    CHECK(net.graph.vertices.size() == 2);
    CHECK(net.graph.edges.size() == 1);
    CHECK(net.spots.size() == 1);
    CHECK(net.spots[0].x == doctest::Approx(50.0));
}

TEST_CASE("dangling vertex reference is reported by id") {
    auto dir = testutil::temp_dir("roadnet");
    auto gp = testutil::write_file(dir / "bad.txt",
                                   "vertices\nid,x,y\n0,0,0\n1,100,0\n"
                                   "edges\nid,from,to,travel_time_s\n0,0,99,60\n");
    auto sp = testutil::write_file(dir / "s.csv", "spot_id,edge_id,offset,max_duration_s\n");
    try {
        load_graph(gp, sp);
        FAIL("expected GraphError");
    } catch (const GraphError& e) {
        CHECK(std::string(e.what()).find("99") != std::string::npos);
    }
}

TEST_CASE("area-scale fixture reports exact counts") {
    // 1,435 vertices / 4,307 edges / 487 spots on 166 distinct edges
    auto dir = testutil::temp_dir("roadnet");
    std::ostringstream g;
    g << "vertices\nid,x,y\n";
    for (int i = 0; i < 1435; ++i) g << i << "," << (i % 40) * 50 << "," << (i / 40) * 50 << "\n";
    g << "edges\nid,from,to,travel_time_s\n";
    int eid = 0;
    for (int i = 0; i < 1435; ++i) g << eid++ << "," << i << "," << (i + 1) % 1435 << ",30\n";
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> vx(0, 1434);
    while (eid < 4307) {
        int u = vx(rng), v = vx(rng);
        if (u == v) continue;
        g << eid++ << "," << u << "," << v << ",45\n";
    }
    std::ostringstream s;
    s << "spot_id,edge_id,offset,max_duration_s\n";
    int sid = 0;
    for (int e = 0; e < 166; ++e) {
        int per_edge = e < 155 ? 3 : 2; // 155*3 + 11*2 = 487
        for (int k = 0; k < per_edge; ++k)
            s << sid++ << "," << e * 10 << ",0.5,3600\n";
    }
    REQUIRE(sid == 487);
    auto gp = testutil::write_file(dir / "dock.txt", g.str());
    auto sp = testutil::write_file(dir / "dock_spots.csv", s.str());
    auto net = load_graph(gp, sp);
    CHECK(net.graph.vertices.size() == 1435);
    CHECK(net.graph.edges.size() == 4307);
    CHECK(net.spots.size() == 487);
    auto actions = derive_actions(net.graph, net.spots);
    CHECK(actions.size() == 166);
    check_routable_core(net.graph, actions);
}

TEST_CASE("single-edge path") {
    auto net = testutil::random_network(2, 0, 1, false);
    net.graph.edges.clear();
    net.graph.edges.push_back({0, 0, 1, 60.0});
    net.graph.finalize();
    net.spots.push_back({0, 0, 0.0, 0, 0, 3600});
    auto actions = derive_actions(net.graph, net.spots);
    Route r = shortest_path(net.graph, actions, net.spots, 0, 0);
    CHECK(r.edge_seq == std::vector<int>{0});
    CHECK(r.duration == doctest::Approx(60.0));
    REQUIRE(r.pass_by.size() == 1);
    CHECK(r.pass_by[0].time == doctest::Approx(0.0));
}

TEST_CASE("shortest path equals brute-force enumeration on random graphs") {
    for (uint64_t seed = 0; seed < 20; ++seed) {
        auto net = testutil::random_network(8 + seed % 3, 10, seed);
        auto actions = derive_actions(net.graph, net.spots);
        for (const Vertex& v : net.graph.vertices)
            for (int a = 0; a < actions.size(); ++a) {
                int target = net.graph.edge(actions.edge_ids[a]).to;
                double expect = brute_force_min(net.graph, v.id, target);
                Route r = shortest_path(net.graph, actions, net.spots, v.id, a);
                CHECK(r.duration == doctest::Approx(expect).epsilon(1e-12));
            }
    }
}

TEST_CASE("equal-cost diamond resolves to the lexicographically smaller edge sequence") {
    LoadedNetwork net;
    net.graph.vertices = {{0, 0, 0}, {1, 0, 1}, {2, 1, 0}, {3, 1, 1}};
    net.graph.edges = {{0, 0, 1, 10}, {1, 0, 2, 10}, {2, 1, 3, 10}, {3, 2, 3, 10}};
    net.graph.finalize();
    net.spots.push_back({0, 2, 0.5, 0, 0, 3600});
    auto actions = derive_actions(net.graph, net.spots);
    Route r = shortest_path(net.graph, actions, net.spots, 0, 0);
    CHECK(r.duration == doctest::Approx(20.0));
    CHECK(r.edge_seq == std::vector<int>{0, 2});
}

TEST_CASE("derive_actions groups spots per hosting edge") {
    auto net = testutil::random_network(4, 2, 3, false);
    net.spots = {{0, 0, 0.1, 0, 0, 3600}, {1, 0, 0.9, 0, 0, 3600}, {2, 3, 0.5, 0, 0, 3600}};
    auto actions = derive_actions(net.graph, net.spots);
    CHECK(actions.size() == 2);
    CHECK(actions.spots_on_edge[0].size() == 2);
    CHECK(actions.spots_on_edge[1].size() == 1);
    CHECK_THROWS_AS(derive_actions(net.graph, {}), GraphError);
}

TEST_CASE("path cache matches direct recomputation and counts entries") {
    auto net = testutil::random_network(20, 40, 11);
    auto actions = derive_actions(net.graph, net.spots);
    PathCache cache(net.graph, actions, net.spots);
    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> vx(0, 19);
    std::uniform_int_distribution<int> ax(0, actions.size() - 1);
    for (int i = 0; i < 100; ++i) {
        int v = vx(rng), a = ax(rng);
        Route direct = shortest_path(net.graph, actions, net.spots, v, a);
        const Route& cached = cache.route(v, a);
        CHECK(cached.duration == direct.duration);
        CHECK(cached.edge_seq == direct.edge_seq);
        REQUIRE(cached.pass_by.size() == direct.pass_by.size());
        for (size_t k = 0; k < cached.pass_by.size(); ++k) {
            CHECK(cached.pass_by[k].spot == direct.pass_by[k].spot);
            CHECK(cached.pass_by[k].time == direct.pass_by[k].time);
        }
        // repeated query returns identical content
        const Route& again = cache.route(v, a);
        CHECK(&again == &cached);
    }
    // every distinct action end-vertex holds |A| routes
    std::set<int> end_vertices;
    for (int eid : actions.edge_ids) end_vertices.insert(net.graph.edge(eid).to);
    PathCache fresh(net.graph, actions, net.spots);
    CHECK(fresh.cached_route_count() == end_vertices.size() * actions.size());
}

TEST_CASE("edge info diagonal and pairwise oracle") {
    auto net = testutil::random_network(12, 20, 17);
    // keep only some spots so |A| is small
    net.spots.resize(6);
    for (int i = 0; i < 6; ++i) net.spots[i].id = i;
    auto actions = derive_actions(net.graph, net.spots);
    PathCache cache(net.graph, actions, net.spots);
    auto info = build_edge_info(net.graph, actions, cache);
    REQUIRE(info.n == actions.size());
    for (int a = 0; a < info.n; ++a) {
        CHECK(info.at(a, a).travel_time == 0.0);
        CHECK(info.at(a, a).spot_count == static_cast<int>(actions.spots_on_edge[a].size()));
        for (int b = 0; b < info.n; ++b) {
            int src = net.graph.edge(actions.edge_ids[a]).to;
            Route r = shortest_path(net.graph, actions, net.spots, src, b);
            CHECK(info.at(a, b).travel_time == r.duration);
            CHECK(info.at(a, b).spot_count == static_cast<int>(r.pass_by.size()));
        }
    }
}

TEST_CASE("edge info is symmetric for a symmetric layout") {
    LoadedNetwork net;
    net.graph.vertices = {{0, 0, 0}, {1, 100, 0}};
    net.graph.edges = {{0, 0, 1, 60}, {1, 1, 0, 60}};
    net.graph.finalize();
    net.spots = {{0, 0, 0.5, 50, 0, 3600}, {1, 1, 0.5, 50, 0, 3600}};
    auto actions = derive_actions(net.graph, net.spots);
    PathCache cache(net.graph, actions, net.spots);
    auto info = build_edge_info(net.graph, actions, cache);
    CHECK(info.at(0, 1).travel_time == info.at(1, 0).travel_time);
    CHECK(info.at(0, 1).spot_count == info.at(1, 0).spot_count);
}

TEST_CASE("edge info triangle property") {
    auto net = synth_grid(4, 4, 60.0, 1.0, 9);
    auto actions = derive_actions(net.graph, net.spots);
    PathCache cache(net.graph, actions, net.spots);
    auto info = build_edge_info(net.graph, actions, cache);
    for (int u = 0; u < info.n; ++u)
        for (int v = 0; v < info.n; ++v)
            for (int w = 0; w < info.n; ++w)
                CHECK(info.at(u, w).travel_time <=
                      info.at(u, v).travel_time + info.at(v, w).travel_time + 1e-9);
}

TEST_CASE("route pass-by times are nondecreasing and bounded") {
    auto net = testutil::random_network(15, 30, 23);
    auto actions = derive_actions(net.graph, net.spots);
    for (const Vertex& v : net.graph.vertices)
        for (int a = 0; a < actions.size(); a += 3) {
            Route r = shortest_path(net.graph, actions, net.spots, v.id, a);
            double prev = 0.0;
            for (const PassBy& pb : r.pass_by) {
                CHECK(pb.time >= prev);
                CHECK(pb.time <= r.duration + 1e-12);
                prev = pb.time;
            }
        }
}

TEST_CASE("synth_grid full density and determinism") {
    auto net = synth_grid(2, 2, 60.0, 1.0, 42);
    CHECK(net.graph.vertices.size() == 4);
    CHECK(net.graph.edges.size() == 8);
    CHECK(net.spots.size() == 8);

    auto again = synth_grid(2, 2, 60.0, 1.0, 42);
    CHECK(again.spots.size() == net.spots.size());
    for (size_t i = 0; i < net.spots.size(); ++i)
        CHECK(again.spots[i].edge_id == net.spots[i].edge_id);

    auto sparse = synth_grid(5, 5, 60.0, 0.3, 7);
    auto sparse2 = synth_grid(5, 5, 60.0, 0.3, 7);
    REQUIRE(sparse.spots.size() == sparse2.spots.size());
    for (size_t i = 0; i < sparse.spots.size(); ++i)
        CHECK(sparse.spots[i].edge_id == sparse2.spots[i].edge_id);
    CHECK(sparse.spots.size() > 0);
    CHECK(sparse.spots.size() < sparse.graph.edges.size());
}

TEST_CASE("action ordering is stable across a round-trip through files") {
    auto net = synth_grid(3, 3, 45.0, 0.6, 13);
    auto dir = testutil::temp_dir("roadnet");
    write_graph_files(net, (dir / "rt.txt").string(), (dir / "rt_spots.csv").string());
    auto loaded = load_graph((dir / "rt.txt").string(), (dir / "rt_spots.csv").string());
    auto a1 = derive_actions(net.graph, net.spots);
    auto a2 = derive_actions(loaded.graph, loaded.spots);
    CHECK(a1.edge_ids == a2.edge_ids);
    CHECK(a1.spots_on_edge == a2.spots_on_edge);
}

TEST_CASE("derive travel time from length at officer speed") {
    std::istringstream g("vertices\nid,x,y\n0,0,0\n1,100,0\n"
                         "edges\nid,from,to,travel_time_s\n0,0,1,100\n");
    LoadOptions opt;
    opt.derive_time_from_length = true;
    opt.officer_speed_kmh = 5.0;
    auto graph = parse_graph(g, opt);
    CHECK(graph.edges[0].travel_time == doctest::Approx(100.0 / (5.0 / 3.6)));
}
