#pragma once

// shared helpers for the test suites

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "satop/roadnet.hpp"

namespace testutil {

inline std::filesystem::path temp_dir(const std::string& tag) {
    auto dir = std::filesystem::temp_directory_path() / ("satop_test_" + tag);
    std::filesystem::create_directories(dir);
    return dir;
}

inline std::string write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path);
    out << content;
    return path.string();
}

// random strongly-connected-ish directed graph: a ring plus extra edges
inline satop::LoadedNetwork random_network(int n_vertices, int extra_edges, uint64_t seed,
                                           bool spot_on_every_edge = true) {
    satop::LoadedNetwork net;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(0.0, 1000.0);
    std::uniform_real_distribution<double> tt(5.0, 120.0);
    std::uniform_int_distribution<int> vx(0, n_vertices - 1);
    for (int i = 0; i < n_vertices; ++i)
        net.graph.vertices.push_back({i, coord(rng), coord(rng)});
    int eid = 0;
    for (int i = 0; i < n_vertices; ++i)
        net.graph.edges.push_back({eid++, i, (i + 1) % n_vertices, tt(rng)});
    for (int k = 0; k < extra_edges; ++k) {
        int u = vx(rng), v = vx(rng);
        if (u == v) v = (v + 1) % n_vertices;
        net.graph.edges.push_back({eid++, u, v, tt(rng)});
    }
    net.graph.finalize();
    if (spot_on_every_edge) {
        std::uniform_real_distribution<double> off(0.0, 1.0);
        for (const satop::Edge& e : net.graph.edges) {
            satop::ParkingSpot s{};
            s.id = e.id;
            s.edge_id = e.id;
            s.offset = off(rng);
            s.max_duration = 3600.0;
            const auto& a = net.graph.vertices[net.graph.vertex_idx(e.from)];
            const auto& b = net.graph.vertices[net.graph.vertex_idx(e.to)];
            s.x = a.x + s.offset * (b.x - a.x);
            s.y = a.y + s.offset * (b.y - a.y);
            net.spots.push_back(s);
        }
    }
    return net;
}

} // namespace testutil
