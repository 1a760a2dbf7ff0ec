#pragma once

// Non-learning reference policies: exponential-rate greedy, anytime ant
// colony optimization over the current violations, and a seeded uniform
// random policy.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "satop/events.hpp"
#include "satop/roadnet.hpp"
#include "satop/simenv.hpp"

namespace satop {

class BaselineError : public std::runtime_error {
public:
    explicit BaselineError(const std::string& msg) : std::runtime_error(msg) {}
};

// Per-spot violation decay rates; lambda = 1 / mean violation duration.
struct ViolationRateModel {
    std::vector<double> lambda; // per spot
    double fallback = 0.0;      // mean of the fitted rates
};

inline ViolationRateModel fit_rate_model(const std::map<std::string, EventLog>& training_logs,
                                         const std::vector<ParkingSpot>& spots) {
    std::vector<double> sum(spots.size(), 0.0);
    std::vector<int> count(spots.size(), 0);
    for (const auto& [_, log] : training_logs)
        for (const ParkingEvent& e : log.events) {
            double onset = e.arrival + e.max_duration;
            if (e.departure > onset) {
                sum[e.spot] += e.departure - onset;
                ++count[e.spot];
            }
        }
    ViolationRateModel m;
    m.lambda.assign(spots.size(), 0.0);
    double rate_sum = 0.0;
    int fitted = 0;
    for (size_t p = 0; p < spots.size(); ++p)
        if (count[p] > 0) {
            m.lambda[p] = count[p] / sum[p];
            rate_sum += m.lambda[p];
            ++fitted;
        }
    if (fitted == 0)
        throw BaselineError("no violations observed in the training logs; "
                            "fit the model on synthetic data instead");
    m.fallback = rate_sum / fitted;
    for (size_t p = 0; p < spots.size(); ++p)
        if (count[p] == 0) m.lambda[p] = m.fallback;
    return m;
}

inline void save_rate_model(const ViolationRateModel& m, const std::string& path) {
    std::ofstream out(path);
    out << "spot_id,lambda\n";
    for (size_t p = 0; p < m.lambda.size(); ++p) out << p << "," << m.lambda[p] << "\n";
}

inline ViolationRateModel load_rate_model(const std::string& path, size_t num_spots) {
    std::ifstream in(path);
    if (!in) throw BaselineError("cannot open rate model file: " + path);
    ViolationRateModel m;
    m.lambda.assign(num_spots, 0.0);
    std::string line;
    std::getline(in, line); // header
    double sum = 0.0;
    int n = 0;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split_csv(line);
        if (f.size() != 2) throw BaselineError("bad rate model row at line " + std::to_string(line_no));
        int id = detail::parse_int(f[0], "spot id", line_no);
        if (id < 0 || id >= static_cast<int>(num_spots))
            throw BaselineError("rate model spot id out of range: " + std::to_string(id));
        m.lambda[id] = detail::parse_num(f[1], "lambda", line_no);
        sum += m.lambda[id];
        ++n;
    }
    if (n > 0) m.fallback = sum / n;
    return m;
}

// ---------------------------------------------------------------------------
// greedy

// Among actions hosting a spot in violation, pick the one maximizing
// max_p exp(-lambda_p * arrival_time_p). Without violations, fall back to
// optimistic occupied spots (highest probability of being in violation and
// not yet gone upon arrival), then to the nearest action. Ties break toward
// the smaller action index.
inline int greedy_action(const Observation& obs, const ViolationRateModel& model,
                         const GeometryProvider& provider) {
    const VertexGeometry& geo = provider.at(obs.officer_vertex);
    const ActionSpace& actions = provider.actions();
    const std::vector<ParkingSpot>& spots = provider.spots();
    int best = -1;
    double best_score = -1.0;
    for (int a = 0; a < actions.size(); ++a) {
        double score = -1.0;
        for (int p : actions.spots_on_edge[a]) {
            if (obs.at(p, 2) != 1.0) continue; // not in violation
            score = std::max(score, std::exp(-model.lambda[p] * geo.walk_time[p]));
        }
        if (score > best_score) { best_score = score; best = a; }
    }
    if (best >= 0) return best;

    // optimistic occupied spots: violation starts before the officer arrives
    for (int a = 0; a < actions.size(); ++a) {
        double score = -1.0;
        for (int p : actions.spots_on_edge[a]) {
            if (obs.at(p, 1) != 1.0 || obs.at(p, 4) != 1.0) continue;
            double allowed = spots[p].max_duration;
            double until_onset = -obs.at(p, 9) * allowed; // seconds until violation starts
            double overstay = geo.walk_time[p] - until_onset;
            if (overstay < 0.0) continue;
            score = std::max(score, std::exp(-model.lambda[p] * overstay));
        }
        if (score > best_score) { best_score = score; best = a; }
    }
    if (best >= 0) return best;

    // nearest action
    best = 0;
    for (int a = 1; a < actions.size(); ++a)
        if (geo.duration[a] < geo.duration[best]) best = a;
    return best;
}

// ---------------------------------------------------------------------------
// ant colony optimization over the current violations

struct AcoParams {
    int ants = 20;
    double alpha = 1.0;     // pheromone weight
    double beta = 2.0;      // heuristic weight
    double rho = 0.1;       // evaporation
    double deposit = 1.0;
    double budget_s = 0.1;  // wall-clock budget
    uint64_t seed = 0;
};

struct AcoResult {
    std::vector<int> tour;  // action indices, best-so-far order
    double score = 0.0;     // expected fines under the tour
    int iterations = 0;
};

namespace detail_aco {

// expected fines when visiting `tour` starting from the officer's position
inline double tour_score(const std::vector<int>& tour, const std::vector<double>& start_time,
                         const EdgeInfoMatrix& info,
                         const std::vector<std::vector<int>>& violating_spots,
                         const ViolationRateModel& model, const VertexGeometry& geo) {
    double t = 0.0;
    double score = 0.0;
    int prev = -1;
    for (int a : tour) {
        t += prev < 0 ? start_time[a] : info.at(prev, a).travel_time;
        for (int p : violating_spots[a]) score += std::exp(-model.lambda[p] * t);
        prev = a;
        (void)geo;
    }
    return score;
}

inline std::vector<int> nearest_neighbor_tour(const std::vector<int>& cands,
                                              const std::vector<double>& start_time,
                                              const EdgeInfoMatrix& info) {
    std::vector<int> tour;
    std::vector<char> used(cands.size(), 0);
    int prev = -1;
    for (size_t step = 0; step < cands.size(); ++step) {
        int pick = -1;
        double best = 0.0;
        for (size_t i = 0; i < cands.size(); ++i) {
            if (used[i]) continue;
            double d = prev < 0 ? start_time[cands[i]] : info.at(prev, cands[i]).travel_time;
            if (pick < 0 || d < best) { pick = static_cast<int>(i); best = d; }
        }
        used[pick] = 1;
        tour.push_back(cands[pick]);
        prev = cands[pick];
    }
    return tour;
}

} // namespace detail_aco

// Anytime ACO. Seeded with the nearest-neighbor tour so the result is never
// worse than it; returns best-so-far when the wall-clock budget expires.
inline AcoResult aco_plan(const Observation& obs, const ViolationRateModel& model,
                          const AcoParams& params, const GeometryProvider& provider,
                          const EdgeInfoMatrix& info) {
    const ActionSpace& actions = provider.actions();
    const VertexGeometry& geo = provider.at(obs.officer_vertex);
    std::vector<int> cands;
    std::vector<std::vector<int>> violating(actions.size());
    for (int a = 0; a < actions.size(); ++a) {
        for (int p : actions.spots_on_edge[a])
            if (obs.at(p, 2) == 1.0) violating[a].push_back(p);
        if (!violating[a].empty()) cands.push_back(a);
    }
    AcoResult res;
    if (cands.empty()) return res;

    auto deadline = std::chrono::steady_clock::now() +
                    std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                        std::chrono::duration<double>(params.budget_s));
    res.tour = detail_aco::nearest_neighbor_tour(cands, geo.duration, info);
    res.score = detail_aco::tour_score(res.tour, geo.duration, info, violating, model, geo);
    if (cands.size() == 1) return res;

    const size_t n = cands.size();
    // pheromone over (position-in-candidates + virtual start node n) pairs
    std::vector<double> pher((n + 1) * n, 1.0);
    auto ph = [&](size_t from, size_t to) -> double& { return pher[from * n + to]; };
    std::mt19937_64 rng(params.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<size_t> order(n);
    std::vector<char> used(n);
    std::vector<int> tour(n);

    while (std::chrono::steady_clock::now() < deadline) {
        ++res.iterations;
        double iter_best = -1.0;
        std::vector<size_t> iter_best_order;
        for (int ant = 0; ant < params.ants; ++ant) {
            std::fill(used.begin(), used.end(), 0);
            size_t prev = n; // virtual start
            for (size_t step = 0; step < n; ++step) {
                double total = 0.0;
                for (size_t i = 0; i < n; ++i) {
                    if (used[i]) continue;
                    double d = prev == n ? geo.duration[cands[i]]
                                         : info.at(cands[prev], cands[i]).travel_time;
                    total += std::pow(ph(prev, i), params.alpha) *
                             std::pow(1.0 / (d + 1.0), params.beta);
                }
                double r = unif(rng) * total;
                size_t pick = 0;
                for (size_t i = 0; i < n; ++i) {
                    if (used[i]) continue;
                    double d = prev == n ? geo.duration[cands[i]]
                                         : info.at(cands[prev], cands[i]).travel_time;
                    r -= std::pow(ph(prev, i), params.alpha) *
                         std::pow(1.0 / (d + 1.0), params.beta);
                    pick = i;
                    if (r <= 0.0) break;
                }
                used[pick] = 1;
                order[step] = pick;
                prev = pick;
            }
            for (size_t i = 0; i < n; ++i) tour[i] = cands[order[i]];
            double score = detail_aco::tour_score(tour, geo.duration, info, violating, model, geo);
            if (score > res.score) {
                res.score = score;
                res.tour = tour;
            }
            if (score > iter_best) {
                iter_best = score;
                iter_best_order = order;
            }
        }
        for (double& p : pher) p *= (1.0 - params.rho);
        size_t prev = n;
        for (size_t i : iter_best_order) {
            ph(prev, i) += params.deposit * iter_best;
            prev = i;
        }
    }
    return res;
}

inline int random_action(int num_actions, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> dist(0, num_actions - 1);
    return dist(rng);
}

} // namespace satop
