#pragma once

// Semi-Markov decision process environment for the traveling officer:
// event-driven replay of a day's parking events, officer movement along
// cached routes, fining, discounted per-action rewards, and the |P| x 12
// observation matrix.

#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "satop/events.hpp"
#include "satop/roadnet.hpp"

namespace satop {

class EnvError : public std::runtime_error {
public:
    explicit EnvError(const std::string& msg) : std::runtime_error(msg) {}
};

struct EnvConfig {
    double gamma = 0.999;
    double officer_speed_kmh = 5.0;
    int shift_start_h = 7;
    int shift_end_h = 19;
    int start_vertex = -1; // -1: end vertex of the lowest-id action edge
    double dist_norm = 1.0 / 3000.0;
    double duration_norm = 1.0 / 3000.0;
    double route_norm = 1.0 / 3000.0;
    bool norm_edge_info = true; // normalize travel times inside the edge-info features
};

enum class SpotStatus : uint8_t { Free = 0, Occupied = 1, InViolation = 2, Fined = 3 };

struct SpotRuntimeState {
    SpotStatus status = SpotStatus::Free;
    double occupied_since = 0.0;
    double violation_since = 0.0;
    int event_index = -1;
};

constexpr int kFeaturesPerSpot = 12;

// Feature columns, per Parking Spot Features:
//   0-3  status one-hot (free, occupied, in violation, fined)
//   4    optimistic-in-violation flag
//   5    time of day in [0,1]
//   6    officer walking time to spot, normalized
//   7    officer arrival time (time of day at arrival) in [0,1]
//   8    euclidean distance to spot, normalized
//   9    occupy/violation duration in [-1,2]
//   10-11 x, y normalized to the area bounding rectangle
struct Observation {
    int num_spots = 0;
    int officer_vertex = -1;
    double clock = 0.0;
    std::vector<double> features; // row-major |P| x 12

    double at(int spot, int col) const { return features[spot * kFeaturesPerSpot + col]; }
};

struct FineRecord {
    int step;  // sub-step j within the action, 0-based
    int spot;
};

struct StepResult {
    Observation next_observation;
    int action = -1;
    double zeta = 0.0;   // discounted within-action reward
    int raw_fines = 0;
    int tau = 0;         // duration in whole seconds, >= 1
    bool done = false;
    bool truncated = false;
    std::vector<FineRecord> fines;
};

// ---------------------------------------------------------------------------
// geometry shared between the observation builder and the network

struct VertexGeometry {
    std::vector<double> walk_time;            // per spot, seconds from the vertex
    std::vector<double> duration;             // per action, seconds
    std::vector<std::vector<int>> pr_idx;     // per action, spots along route (PR)
    std::vector<std::vector<double>> pr_phi;  // matching normalized pass-by times
};

// Per-vertex geometry derived from the path cache; memoized and lockable so
// parallel environments can share one instance.
class GeometryProvider {
public:
    GeometryProvider(const RoadGraph& graph, const ActionSpace& actions,
                     const std::vector<ParkingSpot>& spots, std::shared_ptr<PathCache> cache,
                     const EdgeInfoMatrix& edge_info, const EnvConfig& cfg)
        : graph_(graph), actions_(actions), spots_(spots), cache_(std::move(cache)), cfg_(cfg) {
        // flattened |A|^2 x 2 edge-info features for the network
        delta_features_.reserve(static_cast<size_t>(edge_info.n) * edge_info.n * 2);
        double tnorm = cfg.norm_edge_info ? cfg.duration_norm : 1.0;
        for (int a = 0; a < edge_info.n; ++a)
            for (int b = 0; b < edge_info.n; ++b) {
                delta_features_.push_back(edge_info.at(a, b).travel_time * tnorm);
                delta_features_.push_back(static_cast<double>(edge_info.at(a, b).spot_count));
            }
    }

    const VertexGeometry& at(int vertex_id) const {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            auto it = cache_map_.find(vertex_id);
            if (it != cache_map_.end()) return it->second;
        }
        VertexGeometry geo = compute(vertex_id);
        std::lock_guard<std::mutex> lock(mutex_);
        return cache_map_.emplace(vertex_id, std::move(geo)).first->second;
    }

    const std::vector<double>& delta_features() const { return delta_features_; }
    const ActionSpace& actions() const { return actions_; }
    const std::vector<ParkingSpot>& spots() const { return spots_; }
    const PathCache& paths() const { return *cache_; }
    int num_actions() const { return actions_.size(); }
    int num_spots() const { return static_cast<int>(spots_.size()); }

private:
    VertexGeometry compute(int vertex_id) const {
        const auto& routes = cache_->routes_from(vertex_id);
        VertexGeometry geo;
        geo.walk_time.assign(spots_.size(), 0.0);
        geo.duration.resize(routes.size());
        geo.pr_idx.resize(routes.size());
        geo.pr_phi.resize(routes.size());
        for (size_t a = 0; a < routes.size(); ++a) {
            geo.duration[a] = routes[a].duration;
            geo.pr_idx[a].reserve(routes[a].pass_by.size());
            geo.pr_phi[a].reserve(routes[a].pass_by.size());
            for (const PassBy& pb : routes[a].pass_by) {
                geo.pr_idx[a].push_back(pb.spot);
                geo.pr_phi[a].push_back(pb.time * cfg_.route_norm);
            }
        }
        // walking time to a spot = its pass-by time on the route to its host edge
        for (const ParkingSpot& s : spots_) {
            int a = actions_.action_of_edge.at(s.edge_id);
            for (const PassBy& pb : routes[a].pass_by)
                if (pb.spot == s.id) { geo.walk_time[s.id] = pb.time; break; }
        }
        return geo;
    }

    const RoadGraph& graph_;
    const ActionSpace& actions_;
    const std::vector<ParkingSpot>& spots_;
    std::shared_ptr<PathCache> cache_;
    EnvConfig cfg_;
    std::vector<double> delta_features_;
    mutable std::mutex mutex_;
    mutable std::unordered_map<int, VertexGeometry> cache_map_;
};

// ---------------------------------------------------------------------------

class Environment {
public:
    Environment(const RoadGraph& graph, const ActionSpace& actions,
                const std::vector<ParkingSpot>& spots, std::shared_ptr<PathCache> cache,
                std::shared_ptr<GeometryProvider> geometry,
                const std::map<std::string, EventLog>* logs, EnvConfig cfg = {})
        : graph_(graph), actions_(actions), spots_(spots), cache_(std::move(cache)),
          geometry_(std::move(geometry)), logs_(logs), cfg_(cfg) {
        graph_.bbox(minx_, miny_, maxx_, maxy_);
        start_vertex_ = cfg_.start_vertex >= 0 ? cfg_.start_vertex
                                               : graph_.edge(actions_.edge_ids.front()).to;
        if (!graph_.has_vertex(start_vertex_))
            throw EnvError("start vertex " + std::to_string(start_vertex_) + " not in graph");
    }

    int num_actions() const { return actions_.size(); }
    int num_spots() const { return static_cast<int>(spots_.size()); }
    const EnvConfig& config() const { return cfg_; }
    const GeometryProvider& geometry() const { return *geometry_; }
    bool done() const { return done_; }
    double clock() const { return clock_; }
    int officer_vertex() const { return officer_vertex_; }
    int total_fines() const { return fines_; }
    const std::string& current_day() const { return day_; }
    const SpotRuntimeState& spot_state(int spot) const { return state_[spot]; }
    double shift_start() const { return cfg_.shift_start_h * 3600.0; }
    double shift_end() const { return cfg_.shift_end_h * 3600.0; }

    Observation reset(const std::string& day) {
        auto it = logs_->find(day);
        if (it == logs_->end()) throw EnvError("no event log for day " + day);
        day_ = day;
        timeline_ = event_timeline(it->second);
        cursor_ = 0;
        state_.assign(spots_.size(), SpotRuntimeState{});
        clock_ = shift_start();
        officer_vertex_ = start_vertex_;
        fines_ = 0;
        done_ = false;
        truncated_ = false;
        apply_timeline_until(clock_);
        return observe();
    }

    // Advances the officer along the cached route to the action target.
    // Sub-step j covers the clock interval (t0+j, t0+j+1]; timeline changes in
    // that interval apply before pass-by fining. A spot already passed on this
    // route that enters violation before the action ends is still fined.
    StepResult step(int action) {
        if (done_) throw EnvError("step() on a finished episode");
        if (action < 0 || action >= actions_.size())
            throw EnvError("action index " + std::to_string(action) + " out of range");
        const Route& route = cache_->route(officer_vertex_, action);
        const double t0 = clock_;
        int tau_full = std::max(1, static_cast<int>(std::ceil(route.duration)));
        int avail = static_cast<int>(shift_end() - t0);
        StepResult res;
        res.action = action;
        res.truncated = tau_full > avail;
        res.tau = res.truncated ? avail : tau_full;

        // pass-by sub-step: ceil(p) - 1 for p > 0, 0 for spots at the start
        size_t k = 0;
        const auto& pass = route.pass_by;
        std::vector<char> passed(spots_.size(), 0);
        auto fire = [&](int spot, int j) {
            if (state_[spot].status == SpotStatus::InViolation) {
                state_[spot].status = SpotStatus::Fined;
                ++fines_;
                ++res.raw_fines;
                res.zeta += std::pow(cfg_.gamma, j);
                res.fines.push_back({j, spot});
            }
        };
        for (int j = 0; j < res.tau; ++j) {
            double now = t0 + j + 1;
            while (cursor_ < timeline_.size() && timeline_[cursor_].time <= now) {
                const TimelineEntry& entry = timeline_[cursor_++];
                apply_change(entry);
                if (entry.change == StatusChange::InViolation && passed[entry.spot])
                    fire(entry.spot, j);
            }
            while (k < pass.size() && sub_step(pass[k].time) <= j) {
                passed[pass[k].spot] = 1;
                fire(pass[k].spot, j);
                ++k;
            }
        }

        clock_ = t0 + res.tau;
        if (res.truncated) {
            officer_vertex_ = position_after(route, res.tau);
            done_ = true;
        } else {
            officer_vertex_ = graph_.edge(actions_.edge_ids[action]).to;
            done_ = clock_ >= shift_end();
        }
        res.done = done_;
        res.next_observation = observe();
        return res;
    }

    Observation observe() const {
        Observation obs;
        obs.num_spots = num_spots();
        obs.officer_vertex = officer_vertex_;
        obs.clock = clock_;
        obs.features.assign(static_cast<size_t>(obs.num_spots) * kFeaturesPerSpot, 0.0);
        const VertexGeometry& geo = geometry_->at(officer_vertex_);
        const double spanx = std::max(maxx_ - minx_, 1e-9);
        const double spany = std::max(maxy_ - miny_, 1e-9);
        for (int p = 0; p < obs.num_spots; ++p) {
            double* f = &obs.features[static_cast<size_t>(p) * kFeaturesPerSpot];
            const SpotRuntimeState& st = state_[p];
            f[static_cast<int>(st.status)] = 1.0;
            double walk = geo.walk_time[p];
            if (st.status == SpotStatus::Occupied &&
                clock_ + walk >= st.occupied_since + spots_[p].max_duration)
                f[4] = 1.0;
            f[5] = clock_ / kSecondsPerDay;
            f[6] = walk * cfg_.duration_norm;
            f[7] = (clock_ + walk) / kSecondsPerDay;
            const ParkingSpot& s = spots_[p];
            const Vertex& ov = graph_.vertices[graph_.vertex_idx(officer_vertex_)];
            f[8] = std::hypot(s.x - ov.x, s.y - ov.y) * cfg_.dist_norm;
            if (st.status == SpotStatus::Occupied) {
                double remaining = st.occupied_since + s.max_duration - clock_;
                f[9] = std::clamp(-remaining / s.max_duration, -1.0, 0.0);
            } else if (st.status == SpotStatus::InViolation || st.status == SpotStatus::Fined) {
                f[9] = std::clamp((clock_ - st.violation_since) / s.max_duration, 0.0, 2.0);
            }
            f[10] = (s.x - minx_) / spanx;
            f[11] = (s.y - miny_) / spany;
        }
        return obs;
    }

    struct Summary {
        int total_fines;
        int violation_events; // violation intervals intersecting the shift
        double fine_ratio;    // 0 when no violations occurred
    };

    Summary episode_summary() const {
        if (!done_) throw EnvError("episode_summary() before the episode is done");
        int violations = 0;
        for (const TimelineEntry& e : timeline_) {
            if (e.change != StatusChange::InViolation) continue;
            // find the matching departure via the event record
            const ParkingEvent& ev = logs_->at(day_).events[e.event_index];
            if (e.time < shift_end() && ev.departure > shift_start()) ++violations;
        }
        double ratio = violations > 0 ? static_cast<double>(fines_) / violations : 0.0;
        return {fines_, violations, ratio};
    }

    // full-state serialization for resumable training
    void save_state(std::ostream& out) const {
        auto old_precision = out.precision(17); // doubles must round-trip
        out << day_ << "\n" << clock_ << " " << officer_vertex_ << " " << cursor_ << " "
            << fines_ << " " << done_ << " " << truncated_ << "\n";
        for (const SpotRuntimeState& s : state_)
            out << static_cast<int>(s.status) << " " << s.occupied_since << " "
                << s.violation_since << " " << s.event_index << "\n";
        out.precision(old_precision);
    }

    void load_state(std::istream& in) {
        std::string day;
        std::getline(in, day);
        reset(day); // rebuilds the timeline
        in >> clock_ >> officer_vertex_ >> cursor_ >> fines_ >> done_ >> truncated_;
        for (SpotRuntimeState& s : state_) {
            int status;
            in >> status >> s.occupied_since >> s.violation_since >> s.event_index;
            s.status = static_cast<SpotStatus>(status);
        }
        in.ignore();
    }

private:
    static int sub_step(double pass_time) {
        return pass_time <= 0.0 ? 0 : static_cast<int>(std::ceil(pass_time)) - 1;
    }

    void apply_change(const TimelineEntry& entry) {
        SpotRuntimeState& st = state_[entry.spot];
        switch (entry.change) {
            case StatusChange::Occupied:
                st.status = SpotStatus::Occupied;
                st.occupied_since = entry.time;
                st.event_index = entry.event_index;
                break;
            case StatusChange::InViolation:
                if (st.status == SpotStatus::Occupied) {
                    st.status = SpotStatus::InViolation;
                    st.violation_since = entry.time;
                }
                break;
            case StatusChange::Free:
                st = SpotRuntimeState{};
                break;
        }
    }

    void apply_timeline_until(double time) {
        while (cursor_ < timeline_.size() && timeline_[cursor_].time <= time)
            apply_change(timeline_[cursor_++]);
    }

    // last vertex reached within the first `seconds` of the route
    int position_after(const Route& route, int seconds) const {
        double t = 0.0;
        int v = route.source_vertex;
        for (int eid : route.edge_seq) {
            const Edge& e = graph_.edge(eid);
            if (t + e.travel_time > seconds) break;
            t += e.travel_time;
            v = e.to;
        }
        return v;
    }

    const RoadGraph& graph_;
    const ActionSpace& actions_;
    const std::vector<ParkingSpot>& spots_;
    std::shared_ptr<PathCache> cache_;
    std::shared_ptr<GeometryProvider> geometry_;
    const std::map<std::string, EventLog>* logs_;
    EnvConfig cfg_;
    int start_vertex_;
    double minx_, miny_, maxx_, maxy_;

    std::string day_;
    std::vector<TimelineEntry> timeline_;
    size_t cursor_ = 0;
    std::vector<SpotRuntimeState> state_;
    double clock_ = 0.0;
    int officer_vertex_ = -1;
    int fines_ = 0;
    bool done_ = true;
    bool truncated_ = false;
};

} // namespace satop
