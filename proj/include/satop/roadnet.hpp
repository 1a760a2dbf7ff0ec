#pragma once

// Road network model: graph loading, Dijkstra routing with deterministic
// tie-breaking, action-space derivation, route caching and the inter-action
// edge-info matrix.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <mutex>
#include <optional>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace satop {

class GraphError : public std::runtime_error {
public:
    explicit GraphError(const std::string& msg) : std::runtime_error(msg) {}
};

class RoutingError : public std::runtime_error {
public:
    explicit RoutingError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Vertex {
    int id;
    double x;
    double y;
};

struct Edge {
    int id;
    int from;
    int to;
    double travel_time; // seconds, > 0
};

struct ParkingSpot {
    int id;           // dense 0..|P|-1
    int edge_id;      // host edge
    double offset;    // position along edge in [0,1]
    double x;
    double y;
    double max_duration; // allowed parking time, seconds
};

class RoadGraph {
public:
    std::vector<Vertex> vertices;
    std::vector<Edge> edges;

    void finalize() {
        vertex_index_.clear();
        edge_index_.clear();
        for (size_t i = 0; i < vertices.size(); ++i)
            vertex_index_[vertices[i].id] = static_cast<int>(i);
        for (size_t i = 0; i < edges.size(); ++i) {
            const Edge& e = edges[i];
            if (!vertex_index_.count(e.from))
                throw GraphError("edge " + std::to_string(e.id) +
                                 " references unknown vertex " + std::to_string(e.from));
            if (!vertex_index_.count(e.to))
                throw GraphError("edge " + std::to_string(e.id) +
                                 " references unknown vertex " + std::to_string(e.to));
            if (!(e.travel_time > 0.0))
                throw GraphError("edge " + std::to_string(e.id) + " has non-positive travel time");
            edge_index_[e.id] = static_cast<int>(i);
        }
        out_edges_.assign(vertices.size(), {});
        for (size_t i = 0; i < edges.size(); ++i)
            out_edges_[vertex_index_.at(edges[i].from)].push_back(static_cast<int>(i));
        // stable relaxation order
        for (auto& adj : out_edges_)
            std::sort(adj.begin(), adj.end(), [&](int a, int b) { return edges[a].id < edges[b].id; });
        bbox_valid_ = false;
    }

    int vertex_idx(int vertex_id) const {
        auto it = vertex_index_.find(vertex_id);
        if (it == vertex_index_.end())
            throw GraphError("unknown vertex " + std::to_string(vertex_id));
        return it->second;
    }
    int edge_idx(int edge_id) const {
        auto it = edge_index_.find(edge_id);
        if (it == edge_index_.end())
            throw GraphError("unknown edge " + std::to_string(edge_id));
        return it->second;
    }
    bool has_vertex(int vertex_id) const { return vertex_index_.count(vertex_id) > 0; }
    bool has_edge(int edge_id) const { return edge_index_.count(edge_id) > 0; }
    const Edge& edge(int edge_id) const { return edges[edge_idx(edge_id)]; }
    const std::vector<int>& out_edges(int vertex_idx_pos) const { return out_edges_[vertex_idx_pos]; }

    // bounding rectangle, for coordinate normalization
    void bbox(double& minx, double& miny, double& maxx, double& maxy) const {
        if (!bbox_valid_) {
            minx_ = miny_ = std::numeric_limits<double>::infinity();
            maxx_ = maxy_ = -std::numeric_limits<double>::infinity();
            for (const Vertex& v : vertices) {
                minx_ = std::min(minx_, v.x);
                miny_ = std::min(miny_, v.y);
                maxx_ = std::max(maxx_, v.x);
                maxy_ = std::max(maxy_, v.y);
            }
            bbox_valid_ = true;
        }
        minx = minx_; miny = miny_; maxx = maxx_; maxy = maxy_;
    }

private:
    std::unordered_map<int, int> vertex_index_;
    std::unordered_map<int, int> edge_index_;
    std::vector<std::vector<int>> out_edges_;
    mutable bool bbox_valid_ = false;
    mutable double minx_ = 0, miny_ = 0, maxx_ = 0, maxy_ = 0;
};

// One action per spot-hosting edge, ordered by ascending edge id so the
// ordering is a pure function of the input files.
struct ActionSpace {
    std::vector<int> edge_ids;                 // action index -> edge id
    std::vector<std::vector<int>> spots_on_edge; // action index -> spot ids (PE)
    std::unordered_map<int, int> action_of_edge; // edge id -> action index

    int size() const { return static_cast<int>(edge_ids.size()); }
};

struct PassBy {
    int spot;
    double time; // cumulative seconds from route start, <= duration
};

struct Route {
    int source_vertex = -1;  // vertex id
    int action = -1;         // target action index
    std::vector<int> edge_seq; // edge ids in traversal order
    double duration = 0.0;
    std::vector<PassBy> pass_by; // sorted by (time, spot)
};

struct EdgeInfoEntry {
    double travel_time;
    int spot_count;
};

// |A| x |A| matrix of (travel time between action targets, spots along path)
struct EdgeInfoMatrix {
    int n = 0;
    std::vector<EdgeInfoEntry> entries;

    const EdgeInfoEntry& at(int a, int b) const { return entries[static_cast<size_t>(a) * n + b]; }
    EdgeInfoEntry& at(int a, int b) { return entries[static_cast<size_t>(a) * n + b]; }
};

// ---------------------------------------------------------------------------
// loading

struct LoadOptions {
    // when true, the edge travel_time column is interpreted as length in
    // meters and converted at officer_speed_kmh
    bool derive_time_from_length = false;
    double officer_speed_kmh = 5.0;
};

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') { out.push_back(cur); cur.clear(); }
        else if (c != '\r') cur += c;
    }
    out.push_back(cur);
    return out;
}

inline double parse_num(const std::string& s, const char* what, int line_no) {
    try {
        size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw GraphError(std::string("line ") + std::to_string(line_no) + ": cannot parse " +
                         what + " from '" + s + "'");
    }
}

inline int parse_int(const std::string& s, const char* what, int line_no) {
    double v = parse_num(s, what, line_no);
    if (v != std::floor(v))
        throw GraphError(std::string("line ") + std::to_string(line_no) + ": " + what +
                         " must be an integer, got '" + s + "'");
    return static_cast<int>(v);
}

} // namespace detail

inline RoadGraph parse_graph(std::istream& in, const LoadOptions& opt = {}) {
    RoadGraph g;
    std::string line;
    int line_no = 0;
    enum class Section { None, Vertices, Edges } section = Section::None;
    bool header_pending = false;
    double meters_per_sec = opt.officer_speed_kmh / 3.6;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line == "vertices") { section = Section::Vertices; header_pending = true; continue; }
        if (line == "edges") { section = Section::Edges; header_pending = true; continue; }
        if (section == Section::None)
            throw GraphError("line " + std::to_string(line_no) + ": expected 'vertices' section");
        if (header_pending) { header_pending = false; continue; } // header row
        auto f = detail::split_csv(line);
        if (section == Section::Vertices) {
            if (f.size() != 3)
                throw GraphError("line " + std::to_string(line_no) + ": vertex row needs id,x,y");
            g.vertices.push_back({detail::parse_int(f[0], "vertex id", line_no),
                                  detail::parse_num(f[1], "x", line_no),
                                  detail::parse_num(f[2], "y", line_no)});
        } else {
            if (f.size() != 4)
                throw GraphError("line " + std::to_string(line_no) +
                                 ": edge row needs id,from,to,travel_time_s");
            Edge e{detail::parse_int(f[0], "edge id", line_no),
                   detail::parse_int(f[1], "from vertex", line_no),
                   detail::parse_int(f[2], "to vertex", line_no),
                   detail::parse_num(f[3], "travel time", line_no)};
            if (opt.derive_time_from_length) e.travel_time /= meters_per_sec;
            g.edges.push_back(e);
        }
    }
    g.finalize();
    return g;
}

inline std::vector<ParkingSpot> parse_spots(std::istream& in, const RoadGraph& g) {
    std::vector<ParkingSpot> spots;
    std::string line;
    int line_no = 0;
    bool header_seen = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!header_seen) { header_seen = true; continue; }
        auto f = detail::split_csv(line);
        if (f.size() != 4)
            throw GraphError("line " + std::to_string(line_no) +
                             ": spot row needs spot_id,edge_id,offset,max_duration_s");
        ParkingSpot s{};
        s.id = detail::parse_int(f[0], "spot id", line_no);
        s.edge_id = detail::parse_int(f[1], "edge id", line_no);
        s.offset = detail::parse_num(f[2], "offset", line_no);
        s.max_duration = detail::parse_num(f[3], "max duration", line_no);
        if (!g.has_edge(s.edge_id))
            throw GraphError("line " + std::to_string(line_no) + ": spot " + std::to_string(s.id) +
                             " references unknown edge " + std::to_string(s.edge_id));
        if (s.offset < 0.0 || s.offset > 1.0)
            throw GraphError("line " + std::to_string(line_no) + ": offset outside [0,1]");
        if (!(s.max_duration > 0.0))
            throw GraphError("line " + std::to_string(line_no) + ": max duration must be > 0");
        const Edge& e = g.edge(s.edge_id);
        const Vertex& a = g.vertices[g.vertex_idx(e.from)];
        const Vertex& b = g.vertices[g.vertex_idx(e.to)];
        s.x = a.x + s.offset * (b.x - a.x);
        s.y = a.y + s.offset * (b.y - a.y);
        spots.push_back(s);
    }
    // ids must be the dense range 0..n-1
    std::vector<bool> seen(spots.size(), false);
    for (const ParkingSpot& s : spots) {
        if (s.id < 0 || s.id >= static_cast<int>(spots.size()) || seen[s.id])
            throw GraphError("spot ids must be dense 0..n-1 without duplicates (bad id " +
                             std::to_string(s.id) + ")");
        seen[s.id] = true;
    }
    std::sort(spots.begin(), spots.end(), [](const ParkingSpot& a, const ParkingSpot& b) { return a.id < b.id; });
    return spots;
}

inline ActionSpace derive_actions(const RoadGraph& g, const std::vector<ParkingSpot>& spots) {
    if (spots.empty()) throw GraphError("cannot derive an action space from zero parking spots");
    std::unordered_map<int, std::vector<int>> by_edge;
    for (const ParkingSpot& s : spots) by_edge[s.edge_id].push_back(s.id);
    ActionSpace a;
    a.edge_ids.reserve(by_edge.size());
    for (const auto& [edge_id, _] : by_edge) a.edge_ids.push_back(edge_id);
    std::sort(a.edge_ids.begin(), a.edge_ids.end());
    for (size_t i = 0; i < a.edge_ids.size(); ++i) {
        auto lst = by_edge.at(a.edge_ids[i]);
        std::sort(lst.begin(), lst.end());
        a.spots_on_edge.push_back(std::move(lst));
        a.action_of_edge[a.edge_ids[i]] = static_cast<int>(i);
    }
    (void)g;
    return a;
}

// ---------------------------------------------------------------------------
// shortest paths

namespace detail {

// Single-source Dijkstra over directed edges. Ties between equal-cost paths
// are broken toward the lexicographically smaller edge-id sequence so routes
// are reproducible across runs and platforms.
struct DijkstraResult {
    std::vector<double> dist;      // by vertex index
    std::vector<int> parent_edge;  // edge index used to reach vertex, -1 at source
    std::vector<int> parent_vertex; // vertex index predecessor
};

inline std::vector<int> edge_id_seq(const RoadGraph& g, const DijkstraResult& r, int v_idx) {
    std::vector<int> seq;
    while (r.parent_edge[v_idx] >= 0) {
        seq.push_back(g.edges[r.parent_edge[v_idx]].id);
        v_idx = r.parent_vertex[v_idx];
    }
    std::reverse(seq.begin(), seq.end());
    return seq;
}

inline DijkstraResult dijkstra(const RoadGraph& g, int source_vertex_id) {
    const size_t n = g.vertices.size();
    DijkstraResult r;
    r.dist.assign(n, std::numeric_limits<double>::infinity());
    r.parent_edge.assign(n, -1);
    r.parent_vertex.assign(n, -1);
    int s = g.vertex_idx(source_vertex_id);
    r.dist[s] = 0.0;
    using QE = std::pair<double, int>;
    std::priority_queue<QE, std::vector<QE>, std::greater<QE>> q;
    q.push({0.0, s});
    while (!q.empty()) {
        auto [d, u] = q.top();
        q.pop();
        if (d > r.dist[u]) continue;
        for (int ei : g.out_edges(u)) {
            const Edge& e = g.edges[ei];
            int v = g.vertex_idx(e.to);
            double nd = d + e.travel_time;
            if (nd < r.dist[v]) {
                r.dist[v] = nd;
                r.parent_edge[v] = ei;
                r.parent_vertex[v] = u;
                q.push({nd, v});
            } else if (nd == r.dist[v]) {
                // equal cost: keep the lexicographically smaller edge sequence
                auto cand = edge_id_seq(g, r, u);
                cand.push_back(e.id);
                auto cur = edge_id_seq(g, r, v);
                if (cand < cur) {
                    r.parent_edge[v] = ei;
                    r.parent_vertex[v] = u;
                    q.push({nd, v}); // re-relax successors with the new sequence
                }
            }
        }
    }
    return r;
}

} // namespace detail

// Builds the Route for one action from a finished Dijkstra run.
// The route minimizes travel time to the END vertex of the target edge.
// Spots on the target edge that the path does not physically traverse are
// recorded as passed at arrival time, which makes the self-action (duration 0)
// cover PE(e_a) at time 0.
inline Route make_route(const RoadGraph& g, const ActionSpace& actions,
                        const std::vector<ParkingSpot>& spots,
                        const detail::DijkstraResult& dj, int source_vertex_id, int action) {
    const Edge& target = g.edge(actions.edge_ids[action]);
    int end_idx = g.vertex_idx(target.to);
    if (!std::isfinite(dj.dist[end_idx]))
        throw RoutingError("action " + std::to_string(action) + " unreachable from vertex " +
                           std::to_string(source_vertex_id));
    Route route;
    route.source_vertex = source_vertex_id;
    route.action = action;
    route.duration = dj.dist[end_idx];
    route.edge_seq = detail::edge_id_seq(g, dj, end_idx);

    // spots grouped by edge id for pass-by lookup
    std::vector<char> covered(spots.size(), 0);
    double t = 0.0;
    for (int eid : route.edge_seq) {
        const Edge& e = g.edge(eid);
        auto it = actions.action_of_edge.find(eid);
        if (it != actions.action_of_edge.end()) {
            for (int sid : actions.spots_on_edge[it->second]) {
                route.pass_by.push_back({sid, t + spots[sid].offset * e.travel_time});
                covered[sid] = 1;
            }
        }
        t += e.travel_time;
    }
    for (int sid : actions.spots_on_edge[action])
        if (!covered[sid]) route.pass_by.push_back({sid, route.duration});
    std::sort(route.pass_by.begin(), route.pass_by.end(), [](const PassBy& a, const PassBy& b) {
        if (a.time != b.time) return a.time < b.time;
        return a.spot < b.spot;
    });
    return route;
}

inline Route shortest_path(const RoadGraph& g, const ActionSpace& actions,
                           const std::vector<ParkingSpot>& spots,
                           int source_vertex_id, int action) {
    auto dj = detail::dijkstra(g, source_vertex_id);
    return make_route(g, actions, spots, dj, source_vertex_id, action);
}

// ---------------------------------------------------------------------------
// path cache

// Precomputed routes from every action end-vertex to every action; arbitrary
// start vertices are filled in lazily under a mutex.
class PathCache {
public:
    PathCache(const RoadGraph& g, const ActionSpace& actions, const std::vector<ParkingSpot>& spots)
        : graph_(g), actions_(actions), spots_(spots) {
        for (int a = 0; a < actions.size(); ++a) {
            int end_vertex = g.edge(actions.edge_ids[a]).to;
            if (!cache_.count(end_vertex)) cache_.emplace(end_vertex, compute_all(end_vertex));
        }
    }

    const Route& route(int source_vertex_id, int action) const {
        return routes_from(source_vertex_id)[action];
    }

    const std::vector<Route>& routes_from(int source_vertex_id) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_.find(source_vertex_id);
            if (it != cache_.end()) return it->second;
        }
        auto routes = compute_all(source_vertex_id);
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_.emplace(source_vertex_id, std::move(routes)).first->second;
    }

    size_t cached_route_count() const {
        std::lock_guard<std::mutex> lock(mutex_);
        size_t n = 0;
        for (const auto& [_, v] : cache_) n += v.size();
        return n;
    }

private:
    std::vector<Route> compute_all(int source_vertex_id) const {
        auto dj = detail::dijkstra(graph_, source_vertex_id);
        std::vector<Route> routes;
        routes.reserve(actions_.size());
        for (int a = 0; a < actions_.size(); ++a)
            routes.push_back(make_route(graph_, actions_, spots_, dj, source_vertex_id, a));
        return routes;
    }

    const RoadGraph& graph_;
    const ActionSpace& actions_;
    const std::vector<ParkingSpot>& spots_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<int, std::vector<Route>> cache_;
};

inline EdgeInfoMatrix build_edge_info(const RoadGraph& g, const ActionSpace& actions,
                                      const PathCache& cache) {
    EdgeInfoMatrix m;
    m.n = actions.size();
    m.entries.resize(static_cast<size_t>(m.n) * m.n);
    for (int a = 0; a < m.n; ++a) {
        int end_vertex = g.edge(actions.edge_ids[a]).to;
        const auto& routes = cache.routes_from(end_vertex);
        for (int b = 0; b < m.n; ++b)
            m.at(a, b) = {routes[b].duration, static_cast<int>(routes[b].pass_by.size())};
    }
    return m;
}

// Verifies that every spot-hosting edge's endpoints are mutually reachable
// (via one pivot vertex: reaches-all + reached-by-all implies a strongly
// connected core).
inline void check_routable_core(const RoadGraph& g, const ActionSpace& actions) {
    if (actions.size() == 0) return;
    std::vector<int> targets;
    for (int eid : actions.edge_ids) {
        targets.push_back(g.edge(eid).from);
        targets.push_back(g.edge(eid).to);
    }
    int pivot = targets.front();
    auto fwd = detail::dijkstra(g, pivot);
    RoadGraph rev;
    rev.vertices = g.vertices;
    for (Edge e : g.edges) {
        std::swap(e.from, e.to);
        rev.edges.push_back(e);
    }
    rev.finalize();
    auto bwd = detail::dijkstra(rev, pivot);
    for (int v : targets) {
        int vi = g.vertex_idx(v);
        if (!std::isfinite(fwd.dist[vi]) || !std::isfinite(bwd.dist[vi]))
            throw GraphError("routable core is not strongly connected: vertex " +
                             std::to_string(v) + " and vertex " + std::to_string(pivot) +
                             " are not mutually reachable");
    }
}

struct LoadedNetwork {
    RoadGraph graph;
    std::vector<ParkingSpot> spots;
};

inline LoadedNetwork load_graph(const std::string& graph_path, const std::string& spot_path,
                                const LoadOptions& opt = {}) {
    std::ifstream gf(graph_path);
    if (!gf) throw GraphError("cannot open graph file: " + graph_path);
    std::ifstream sf(spot_path);
    if (!sf) throw GraphError("cannot open spot file: " + spot_path);
    LoadedNetwork net;
    net.graph = parse_graph(gf, opt);
    net.spots = parse_spots(sf, net.graph);
    return net;
}

// ---------------------------------------------------------------------------
// synthetic fixtures

// rows x cols grid with bidirectional edges; spots sampled per directed edge.
inline LoadedNetwork synth_grid(int rows, int cols, double edge_time, double spot_probability,
                                uint64_t seed, double spot_max_duration = 3600.0) {
    if (rows < 2 || cols < 2) throw GraphError("synth_grid needs rows, cols >= 2");
    if (!(spot_probability > 0.0) || spot_probability > 1.0)
        throw GraphError("spot_probability must be in (0,1]");
    LoadedNetwork net;
    const double spacing = edge_time * (5.0 / 3.6); // meters at 5 km/h
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            net.graph.vertices.push_back({r * cols + c, c * spacing, r * spacing});
    int eid = 0;
    auto add_pair = [&](int u, int v) {
        net.graph.edges.push_back({eid++, u, v, edge_time});
        net.graph.edges.push_back({eid++, v, u, edge_time});
    };
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) {
            if (c + 1 < cols) add_pair(r * cols + c, r * cols + c + 1);
            if (r + 1 < rows) add_pair(r * cols + c, (r + 1) * cols + c);
        }
    net.graph.finalize();
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    int sid = 0;
    for (const Edge& e : net.graph.edges) {
        if (unif(rng) <= spot_probability) {
            ParkingSpot s{};
            s.id = sid++;
            s.edge_id = e.id;
            s.offset = 0.5;
            s.max_duration = spot_max_duration;
            const Vertex& a = net.graph.vertices[net.graph.vertex_idx(e.from)];
            const Vertex& b = net.graph.vertices[net.graph.vertex_idx(e.to)];
            s.x = 0.5 * (a.x + b.x);
            s.y = 0.5 * (a.y + b.y);
            net.spots.push_back(s);
        }
    }
    return net;
}

// Writes a LoadedNetwork back out in the loader's file formats.
inline void write_graph_files(const LoadedNetwork& net, const std::string& graph_path,
                              const std::string& spot_path) {
    std::ofstream gf(graph_path);
    gf << "vertices\nid,x,y\n";
    for (const Vertex& v : net.graph.vertices) gf << v.id << "," << v.x << "," << v.y << "\n";
    gf << "edges\nid,from,to,travel_time_s\n";
    for (const Edge& e : net.graph.edges)
        gf << e.id << "," << e.from << "," << e.to << "," << e.travel_time << "\n";
    std::ofstream sf(spot_path);
    sf << "spot_id,edge_id,offset,max_duration_s\n";
    for (const ParkingSpot& s : net.spots)
        sf << s.id << "," << s.edge_id << "," << s.offset << "," << s.max_duration << "\n";
}

} // namespace satop
