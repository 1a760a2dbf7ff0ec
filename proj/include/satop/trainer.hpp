#pragma once

// Semi-Markov DoubleDQN training: replay buffer, epsilon schedule, parallel
// experience collection (round-robin for reproducibility), TD targets with
// gamma^tau bootstrapping, and the evaluation/training loops.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "satop/checkpoint.hpp"
#include "satop/net.hpp"
#include "satop/simenv.hpp"

namespace satop {

class TrainError : public std::runtime_error {
public:
    explicit TrainError(const std::string& msg) : std::runtime_error(msg) {}
};

struct StoredTransition {
    std::vector<float> obs;      // |P| x 12
    std::vector<float> next_obs;
    int obs_vertex = -1;         // geometry is reconstructed from the vertex
    int next_vertex = -1;
    int action = -1;
    double zeta = 0.0;
    int raw_fines = 0;
    int tau = 1;
    bool done = false;
    bool truncated = false;
};

class ReplayBuffer {
public:
    explicit ReplayBuffer(size_t capacity, uint64_t seed) : capacity_(capacity), rng_(seed) {}

    void push(StoredTransition t) {
        if (data_.size() < capacity_) {
            data_.push_back(std::move(t));
        } else {
            data_[head_] = std::move(t);
            head_ = (head_ + 1) % capacity_;
        }
        ++total_pushed_;
    }

    size_t size() const { return data_.size(); }
    size_t capacity() const { return capacity_; }
    size_t total_pushed() const { return total_pushed_; }
    const StoredTransition& at(size_t i) const { return data_[i]; }

    std::vector<size_t> sample(size_t n) {
        std::uniform_int_distribution<size_t> dist(0, data_.size() - 1);
        std::vector<size_t> idx(n);
        for (size_t i = 0; i < n; ++i) idx[i] = dist(rng_);
        return idx;
    }

    // oldest-first eviction check support
    bool contains_pushed_index(size_t k) const { // k = 0-based push sequence number
        return k + capacity_ >= total_pushed_ && k < total_pushed_;
    }

    void save(std::ostream& out) const {
        out.precision(17); // floats and doubles must round-trip
        out << data_.size() << " " << head_ << " " << total_pushed_ << " " << rng_ << "\n";
        // shortest round-trip formatting; ostream float output is far too slow
        // for a buffer this size rewritten at every checkpoint
        std::string line;
        char buf[32];
        auto put = [&](float v) {
            auto res = std::to_chars(buf, buf + sizeof(buf), v);
            line.append(buf, res.ptr);
            line.push_back(' ');
        };
        for (const StoredTransition& t : data_) {
            out << t.obs_vertex << " " << t.next_vertex << " " << t.action << " " << t.zeta << " "
                << t.raw_fines << " " << t.tau << " " << t.done << " " << t.truncated << " "
                << t.obs.size() << "\n";
            line.clear();
            for (float v : t.obs) put(v);
            line.push_back('\n');
            for (float v : t.next_obs) put(v);
            line.push_back('\n');
            out << line;
        }
    }

    void load(std::istream& in) {
        size_t n;
        in >> n >> head_ >> total_pushed_ >> rng_;
        data_.assign(n, {});
        for (StoredTransition& t : data_) {
            size_t fn;
            in >> t.obs_vertex >> t.next_vertex >> t.action >> t.zeta >> t.raw_fines >> t.tau >>
                t.done >> t.truncated >> fn;
            t.obs.resize(fn);
            t.next_obs.resize(fn);
            for (float& v : t.obs) in >> v;
            for (float& v : t.next_obs) in >> v;
        }
    }

private:
    size_t capacity_;
    std::vector<StoredTransition> data_;
    size_t head_ = 0;
    size_t total_pushed_ = 0;
    std::mt19937_64 rng_;
};

// constant until decay_start, exponential down to eps_min at min_step
struct EpsilonSchedule {
    double eps_start = 1.0;
    double eps_min = 0.01;
    long decay_start = 10000;
    long min_step = 5000000;

    double value(long step) const {
        if (step <= decay_start) return eps_start;
        if (step >= min_step) return eps_min;
        double frac = static_cast<double>(step - decay_start) /
                      static_cast<double>(min_step - decay_start);
        return std::max(eps_min, eps_start * std::exp(std::log(eps_min / eps_start) * frac));
    }
};

struct TrainConfig {
    double gamma = 0.999;
    int batch = 256;
    int parallel_envs = 8;
    int train_every = 32;          // env steps between gradient steps
    int target_update = 3125;      // gradient steps between target copies
    long learning_start = 10000;   // env steps before the first gradient step
    long total_env_steps = 8000000; // 40 episodes x 200000 steps
    size_t buffer_capacity = 100000;
    long eval_every = 100000;      // env steps between validation passes
    bool bootstrap_truncated = false;
    uint64_t seed = 0;
    EpsilonSchedule eps;
    NetConfig net;
    ad::RmsPropConfig opt;

    static TrainConfig desk_scale() {
        TrainConfig c;
        c.gamma = 0.995;
        c.batch = 64;
        c.parallel_envs = 4;
        c.train_every = 16;
        c.target_update = 200;
        c.learning_start = 2000;
        c.total_env_steps = 100000;
        c.buffer_capacity = 10000;
        c.eval_every = 20000;
        c.eps.decay_start = 2000;
        c.eps.min_step = 60000;
        c.eps.eps_min = 0.02;
        c.net = NetConfig::desk_scale();
        c.opt.lr = 1e-3;
        return c;
    }
};

inline GeometryContext make_context(const GeometryProvider& provider, int vertex) {
    const VertexGeometry& geo = provider.at(vertex);
    return {&provider.actions().spots_on_edge, &geo.pr_idx, &geo.pr_phi, &geo.duration,
            &provider.delta_features()};
}

inline std::vector<double> q_for(const SatopNet& net, const GeometryProvider& provider,
                                 const std::vector<double>& features, int vertex) {
    return net.q_values(features, make_context(provider, vertex));
}

// inference helper that precomputes the parameter-only edge gates once; the
// gate MLP plus its tanh is a large share of a single forward, and rollouts
// call the net once per decision. refresh() after any parameter change.
class CachedQ {
public:
    CachedQ(const SatopNet& net, const GeometryProvider& provider)
        : net_(&net), provider_(&provider) {
        refresh();
    }

    void refresh() {
        ad::Graph g(/*with_grad=*/false);
        GeometryContext ctx{};
        ctx.delta = &provider_->delta_features();
        gates_.clear();
        for (int id : net_->gate_nodes(g, ctx)) gates_.push_back(g.value(id));
    }

    std::vector<double> operator()(const std::vector<double>& features, int vertex) const {
        ad::Graph g(/*with_grad=*/false);
        std::vector<int> ids;
        ids.reserve(gates_.size());
        for (const ad::Tensor& t : gates_) ids.push_back(g.leaf(t));
        GeometryContext ctx = make_context(*provider_, vertex);
        return g.value(net_->forward(g, features, ctx, &ids)).v;
    }

private:
    const SatopNet* net_;
    const GeometryProvider* provider_;
    std::vector<ad::Tensor> gates_;
};

// y = zeta + gamma^tau * Q_target(s', argmax_a Q_online(s', a)); y = zeta at
// terminals (shift-end truncation included unless bootstrap_truncated is set)
inline std::vector<double> td_targets(const std::vector<const StoredTransition*>& batch,
                                      const SatopNet& online, const SatopNet& target,
                                      const GeometryProvider& provider, double gamma,
                                      bool bootstrap_truncated = false) {
    std::vector<double> y(batch.size());
    std::vector<double> feat;
    std::vector<GeometryContext> ctxs;
    std::vector<size_t> live; // non-terminal rows, in batch order
    for (size_t i = 0; i < batch.size(); ++i) {
        const StoredTransition& t = *batch[i];
        bool terminal = t.done && !(t.truncated && bootstrap_truncated);
        if (terminal) {
            y[i] = t.zeta;
            continue;
        }
        live.push_back(i);
        feat.insert(feat.end(), t.next_obs.begin(), t.next_obs.end());
        ctxs.push_back(make_context(provider, t.next_vertex));
    }
    if (!live.empty()) {
        SatopNet::BatchIndex on_idx, tg_idx;
        ad::Graph g(/*with_grad=*/false);
        // copy: the second forward_batch grows the node tape and may reallocate
        std::vector<double> q_on = g.value(online.forward_batch(g, feat, ctxs, on_idx)).v;
        const auto& q_tg = g.value(target.forward_batch(g, feat, ctxs, tg_idx)).v;
        int na = online.num_actions();
        for (size_t j = 0; j < live.size(); ++j) {
            const StoredTransition& t = *batch[live[j]];
            int a_star = 0;
            for (int a = 1; a < na; ++a)
                if (q_on[j * na + a] > q_on[j * na + a_star]) a_star = a;
            y[live[j]] = t.zeta + std::pow(gamma, t.tau) * q_tg[j * na + a_star];
        }
    }
    return y;
}

// one MSE gradient step over a sampled batch; returns the loss
inline double train_step(const std::vector<const StoredTransition*>& batch,
                         const std::vector<double>& targets, SatopNet& online,
                         const GeometryProvider& provider, const ad::RmsPropConfig& opt) {
    std::vector<double> feat;
    std::vector<GeometryContext> ctxs;       // keep alive for backward
    SatopNet::BatchIndex idx;                // ditto
    ctxs.reserve(batch.size());
    for (const StoredTransition* t : batch) {
        feat.insert(feat.end(), t->obs.begin(), t->obs.end());
        ctxs.push_back(make_context(provider, t->obs_vertex));
    }
    ad::Graph g;
    int q = online.forward_batch(g, feat, ctxs, idx);
    int na = online.num_actions();
    std::vector<int> sq_terms;
    for (size_t i = 0; i < batch.size(); ++i) {
        int diff = g.add_const(g.pick(q, static_cast<int>(i) * na + batch[i]->action, 0),
                               -targets[i]);
        sq_terms.push_back(g.square(diff));
    }
    int loss = g.mean_of(sq_terms);
    double loss_val = g.value(loss).at(0, 0);
    online.params().zero_grad();
    g.backward(loss);
    ad::rmsprop_step(online.params(), opt);
    return loss_val;
}

// ---------------------------------------------------------------------------

struct MetricsRow {
    double wall_time;
    long env_steps;
    long grad_steps;
    double epsilon;
    double train_loss;
    double val_fines_per_day;
};

class Trainer {
public:
    Trainer(std::shared_ptr<GeometryProvider> provider, const RoadGraph& graph,
            const ActionSpace& actions, const std::vector<ParkingSpot>& spots,
            std::shared_ptr<PathCache> cache, const std::map<std::string, EventLog>* logs,
            std::vector<std::string> train_days, std::vector<std::string> val_days,
            EnvConfig env_cfg, TrainConfig cfg)
        : provider_(std::move(provider)), cfg_(cfg), env_cfg_(env_cfg),
          train_days_(std::move(train_days)), val_days_(std::move(val_days)),
          online_(cfg.net, static_cast<int>(spots.size()), actions.size(), cfg.seed),
          target_(cfg.net, static_cast<int>(spots.size()), actions.size(), cfg.seed),
          buffer_(cfg.buffer_capacity, cfg.seed + 1), explore_rng_(cfg.seed + 2),
          qcache_(online_, *provider_) {
        if (train_days_.empty()) throw TrainError("no training days");
        target_.copy_from(online_);
        for (int i = 0; i < cfg.parallel_envs; ++i) {
            envs_.push_back(std::make_unique<Environment>(graph, actions, spots, cache, provider_,
                                                          logs, env_cfg));
            day_rngs_.emplace_back(cfg.seed + 100 + i);
            day_order_.emplace_back();
            day_pos_.push_back(0);
            obs_.push_back(reset_next_day(i));
        }
    }

    SatopNet& online() { return online_; }
    SatopNet& target() { return target_; }
    ReplayBuffer& buffer() { return buffer_; }
    long env_steps() const { return env_steps_; }
    long grad_steps() const { return grad_steps_; }
    double epsilon() const { return cfg_.eps.value(env_steps_); }

    int select_action(const Observation& obs, double eps) {
        std::uniform_real_distribution<double> unif(0.0, 1.0);
        if (unif(explore_rng_) < eps)
            return std::uniform_int_distribution<int>(0, envs_[0]->num_actions() - 1)(explore_rng_);
        auto q = qcache_(obs.features, obs.officer_vertex);
        return argmax_with_index_tiebreak(q);
    }

    // advances every environment `steps_per_env` times in round-robin order
    void collect(int steps_per_env) {
        for (int s = 0; s < steps_per_env; ++s) {
            for (size_t i = 0; i < envs_.size(); ++i) {
                double eps = cfg_.eps.value(env_steps_);
                int action = select_action(obs_[i], eps);
                StepResult res;
                try {
                    res = envs_[i]->step(action);
                } catch (const std::exception& e) {
                    throw TrainError("env " + std::to_string(i) + ": " + e.what());
                }
                StoredTransition t;
                t.obs.assign(obs_[i].features.begin(), obs_[i].features.end());
                t.next_obs.assign(res.next_observation.features.begin(),
                                  res.next_observation.features.end());
                t.obs_vertex = obs_[i].officer_vertex;
                t.next_vertex = res.next_observation.officer_vertex;
                t.action = action;
                t.zeta = res.zeta;
                t.raw_fines = res.raw_fines;
                t.tau = res.tau;
                t.done = res.done;
                t.truncated = res.truncated;
                buffer_.push(std::move(t));
                ++env_steps_;
                obs_[i] = res.done ? reset_next_day(static_cast<int>(i)) : res.next_observation;
            }
        }
    }

    double do_train_step() {
        if (buffer_.size() < static_cast<size_t>(cfg_.batch))
            throw TrainError("buffer smaller than batch");
        auto idx = buffer_.sample(cfg_.batch);
        std::vector<const StoredTransition*> batch;
        batch.reserve(idx.size());
        for (size_t i : idx) batch.push_back(&buffer_.at(i));
        auto y = td_targets(batch, online_, target_, *provider_, cfg_.gamma,
                            cfg_.bootstrap_truncated);
        double loss = train_step(batch, y, online_, *provider_, cfg_.opt);
        if (!std::isfinite(loss)) throw TrainError("NaN loss at grad step " +
                                                   std::to_string(grad_steps_));
        ++grad_steps_;
        if (grad_steps_ % cfg_.target_update == 0) target_.copy_from(online_);
        qcache_.refresh();
        last_loss_ = loss;
        return loss;
    }

    // greedy rollouts over the given days with any policy
    static double evaluate(Environment& env, const std::vector<std::string>& days,
                           const std::function<int(const Observation&)>& policy,
                           std::vector<double>* per_day = nullptr) {
        if (days.empty()) throw TrainError("evaluate: empty day list");
        double total = 0.0;
        for (const std::string& day : days) {
            Observation obs = env.reset(day);
            while (!env.done()) {
                StepResult res = env.step(policy(obs));
                obs = res.next_observation;
            }
            total += env.total_fines();
            if (per_day) per_day->push_back(env.total_fines());
        }
        return total / days.size();
    }

    double evaluate_policy(const std::vector<std::string>& days, std::vector<double>* per_day = nullptr) {
        return evaluate(*envs_[0], days,
                        [this](const Observation& o) {
                            return argmax_with_index_tiebreak(qcache_(o.features, o.officer_vertex));
                        },
                        per_day);
        // note: envs_[0] is reused; run_training re-resets it afterwards
    }

    // full training loop; writes metrics.csv and checkpoints under out_dir,
    // retains the best-validation checkpoint as checkpoints/best.{bin,txt}
    std::vector<MetricsRow> run_training(const std::string& out_dir,
                                         const std::string& resume_state = "") {
        namespace fs = std::filesystem;
        fs::create_directories(fs::path(out_dir) / "checkpoints");
        if (!resume_state.empty()) load_state(resume_state);
        std::ofstream metrics(fs::path(out_dir) / "metrics.csv",
                              resume_state.empty() ? std::ios::trunc : std::ios::app);
        if (resume_state.empty())
            metrics << "wall_time,env_steps,grad_steps,epsilon,train_loss,val_fines_per_day\n";
        std::vector<MetricsRow> rows;
        auto start = std::chrono::steady_clock::now();
        long next_eval = (env_steps_ / cfg_.eval_every + 1) * cfg_.eval_every;
        int steps_per_env = std::max(1, cfg_.train_every / cfg_.parallel_envs);
        while (env_steps_ < cfg_.total_env_steps) {
            collect(steps_per_env);
            if (env_steps_ >= cfg_.learning_start &&
                buffer_.size() >= static_cast<size_t>(cfg_.batch))
                do_train_step();
            if (env_steps_ >= next_eval || env_steps_ >= cfg_.total_env_steps) {
                next_eval += cfg_.eval_every;
                double val = evaluate_policy(val_days_.empty() ? train_days_ : val_days_);
                for (size_t i = 0; i < envs_.size(); ++i) obs_[i] = reset_next_day(static_cast<int>(i));
                MetricsRow row{std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                                   .count(),
                               env_steps_, grad_steps_, epsilon(), last_loss_, val};
                rows.push_back(row);
                metrics << row.wall_time << "," << row.env_steps << "," << row.grad_steps << ","
                        << row.epsilon << "," << row.train_loss << "," << row.val_fines_per_day
                        << "\n";
                metrics.flush();
                std::string tag = "step" + std::to_string(env_steps_);
                save_checkpoint(online_.params(),
                                (fs::path(out_dir) / "checkpoints" / (tag + ".bin")).string(),
                                (fs::path(out_dir) / "checkpoints" / (tag + ".txt")).string());
                if (val >= best_val_) {
                    best_val_ = val;
                    save_checkpoint(online_.params(),
                                    (fs::path(out_dir) / "checkpoints" / "best.bin").string(),
                                    (fs::path(out_dir) / "checkpoints" / "best.txt").string());
                }
                save_state((fs::path(out_dir) / "train_state.txt").string());
            }
        }
        return rows;
    }

    // ---- full-state snapshots (resumable training) ----

    void save_state(const std::string& path) const {
        std::ofstream out(path);
        if (!out) throw TrainError("cannot write state file " + path);
        out << "SATOPSTATE 1\n";
        out << env_steps_ << " " << grad_steps_ << " " << best_val_ << " " << last_loss_ << "\n";
        out << explore_rng_ << "\n";
        for (size_t i = 0; i < envs_.size(); ++i) {
            out << day_rngs_[i] << "\n" << day_pos_[i] << " " << day_order_[i].size() << "\n";
            for (int d : day_order_[i]) out << d << " ";
            out << "\n";
            envs_[i]->save_state(out);
        }
        buffer_.save(out);
        save_params(out, online_.params());
        save_params(out, target_.params());
    }

    void load_state(const std::string& path) {
        std::ifstream in(path);
        if (!in) throw TrainError("cannot open state file " + path);
        std::string header;
        std::getline(in, header);
        if (header != "SATOPSTATE 1") throw TrainError("bad state header: " + header);
        in >> env_steps_ >> grad_steps_ >> best_val_ >> last_loss_ >> explore_rng_;
        in.ignore();
        for (size_t i = 0; i < envs_.size(); ++i) {
            size_t n;
            in >> day_rngs_[i] >> day_pos_[i] >> n;
            day_order_[i].resize(n);
            for (int& d : day_order_[i]) in >> d;
            in >> std::ws; // the env reads its day with getline
            envs_[i]->load_state(in);
            obs_[i] = envs_[i]->observe();
        }
        buffer_.load(in);
        load_params(in, online_.params());
        load_params(in, target_.params());
        qcache_.refresh();
    }

private:
    static void save_params(std::ostream& out, const ad::ParamStore& ps) {
        out.precision(17);
        for (const auto& p : ps.all()) {
            for (double v : p->value.v) out << v << " ";
            for (double v : p->rms_acc.v) out << v << " ";
            out << "\n";
        }
    }

    static void load_params(std::istream& in, ad::ParamStore& ps) {
        for (auto& p : ps.all()) {
            for (double& v : p->value.v) in >> v;
            for (double& v : p->rms_acc.v) in >> v;
        }
        in.ignore();
    }

    Observation reset_next_day(int env_idx) {
        if (day_pos_[env_idx] >= day_order_[env_idx].size()) {
            day_order_[env_idx].resize(train_days_.size());
            for (size_t i = 0; i < train_days_.size(); ++i) day_order_[env_idx][i] = static_cast<int>(i);
            std::shuffle(day_order_[env_idx].begin(), day_order_[env_idx].end(), day_rngs_[env_idx]);
            day_pos_[env_idx] = 0;
        }
        return envs_[env_idx]->reset(train_days_[day_order_[env_idx][day_pos_[env_idx]++]]);
    }

    std::shared_ptr<GeometryProvider> provider_;
    TrainConfig cfg_;
    EnvConfig env_cfg_;
    std::vector<std::string> train_days_, val_days_;
    SatopNet online_, target_;
    ReplayBuffer buffer_;
    std::mt19937_64 explore_rng_;
    CachedQ qcache_; // tracks online_; refreshed after every parameter change
    std::vector<std::unique_ptr<Environment>> envs_;
    std::vector<Observation> obs_;
    std::vector<std::mt19937_64> day_rngs_;
    std::vector<std::vector<int>> day_order_;
    std::vector<size_t> day_pos_;
    long env_steps_ = 0;
    long grad_steps_ = 0;
    double best_val_ = -1.0;
    double last_loss_ = 0.0;
};

} // namespace satop
