#pragma once

// The SATOP Q-network: per-spot encoder with learnable embeddings, the
// pathing module (action target + route aggregation + action representation),
// the message-passing future positioning layers, and the Q head.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "satop/autodiff.hpp"

namespace satop {

struct NetConfig {
    int d_h = 256;        // spot representation dim
    int d_le = 64;        // learnable spot embedding dim
    int d_at = 256;       // action target dim
    int d_ah = 256;       // action representation dim
    int n_layers = 2;     // future positioning layers
    int spot_hidden = 256;
    int ah_hidden = 1024;
    int delta_hidden = 256;
    int q_hidden = 256;
    double duration_norm = 1.0 / 3000.0;

    static NetConfig desk_scale() {
        NetConfig c;
        c.d_h = 32;
        c.d_le = 8;
        c.d_at = 32;
        c.d_ah = 32;
        c.spot_hidden = 32;
        c.ah_hidden = 32;
        c.delta_hidden = 4; // scalar gate from 2 inputs; larger is wasted at this scale
        c.q_hidden = 32;
        return c;
    }

    static NetConfig tiny(int d = 8) {
        NetConfig c;
        c.d_h = d;
        c.d_le = 4;
        c.d_at = d;
        c.d_ah = d;
        c.spot_hidden = d;
        c.ah_hidden = d;
        c.delta_hidden = d;
        c.q_hidden = d;
        return c;
    }
};

// Index lists and route geometry the forward pass consumes. All pointed-to
// data must outlive the autodiff graph (backward closures reference it).
struct GeometryContext {
    const std::vector<std::vector<int>>* pe;       // per action: spots on target edge
    const std::vector<std::vector<int>>* pr_idx;   // per action: spots along route
    const std::vector<std::vector<double>>* pr_phi; // matching normalized pass-by times
    const std::vector<double>* durations;          // per action, seconds (un-normalized)
    const std::vector<double>* delta;              // |A|^2 x 2 flattened edge info
};

namespace detail_nn {

// stack of linear layers; ELU + layer norm after each hidden layer, nothing
// after the last
struct Mlp {
    std::vector<ad::Param*> W, b, ln_g, ln_b;
    bool tanh_hidden = false;
    bool layernorm = true;

    void build(ad::ParamStore& ps, const std::string& name, const std::vector<int>& dims,
               std::mt19937_64& rng, bool tanh_act = false, bool use_ln = true) {
        tanh_hidden = tanh_act;
        layernorm = use_ln;
        for (size_t l = 0; l + 1 < dims.size(); ++l) {
            ad::Param& Wp = ps.add(name + ".W" + std::to_string(l), dims[l + 1], dims[l]);
            ad::Param& bp = ps.add(name + ".b" + std::to_string(l), 1, dims[l + 1]);
            ad::init_linear(Wp, bp, rng);
            W.push_back(&Wp);
            b.push_back(&bp);
            if (use_ln && l + 2 < dims.size()) {
                ad::Param& g = ps.add(name + ".ln_g" + std::to_string(l), 1, dims[l + 1]);
                ad::Param& bb = ps.add(name + ".ln_b" + std::to_string(l), 1, dims[l + 1]);
                for (double& v : g.value.v) v = 1.0;
                ln_g.push_back(&g);
                ln_b.push_back(&bb);
            }
        }
    }

    int forward(ad::Graph& g, int x) const {
        for (size_t l = 0; l < W.size(); ++l) {
            x = g.linear(x, g.param(*W[l]), g.param(*b[l]));
            if (l + 1 < W.size()) {
                x = tanh_hidden ? g.tanh_(x) : g.elu(x);
                if (layernorm) x = g.layernorm(x, g.param(*ln_g[l]), g.param(*ln_b[l]));
            }
        }
        return x;
    }
};

} // namespace detail_nn

class SatopNet {
public:
    SatopNet(NetConfig cfg, int num_spots, int num_actions, uint64_t seed)
        : cfg_(cfg), num_spots_(num_spots), num_actions_(num_actions) {
        std::mt19937_64 rng(seed);
        spot_encoder_.build(params_, "spot_encoder",
                            {12 + cfg.d_le, cfg.spot_hidden, cfg.spot_hidden, cfg.spot_hidden, cfg.d_h},
                            rng);
        embeddings_ = &params_.add("spot_embeddings", num_spots, cfg.d_le);
        {
            std::normal_distribution<double> norm(0.0, 0.1);
            for (double& v : embeddings_->value.v) v = norm(rng);
        }
        w_at_ = &params_.add("action_target.W", cfg.d_at, cfg.d_h);
        b_at_ = &params_.add("action_target.b", 1, cfg.d_at);
        ad::init_linear(*w_at_, *b_at_, rng);
        theta_ = &params_.add("route_scale", 1, 1);
        theta_->value.at(0, 0) = 1.0;
        mlp_ah_.build(params_, "mlp_ah",
                      {cfg.d_h + cfg.d_at + 1, cfg.ah_hidden, cfg.ah_hidden, cfg.ah_hidden, cfg.d_ah},
                      rng);
        for (int l = 0; l < cfg.n_layers; ++l) {
            std::string tag = std::to_string(l);
            mlp_delta_.emplace_back();
            mlp_delta_.back().build(params_, "mlp_delta" + tag, {2, cfg.delta_hidden, 1}, rng,
                                    /*tanh_act=*/true, /*use_ln=*/false);
            ad::Param& W = params_.add("future_pos" + tag + ".W", cfg.d_ah, cfg.d_ah);
            ad::Param& b = params_.add("future_pos" + tag + ".b", 1, cfg.d_ah);
            ad::init_linear(W, b, rng);
            w_ah_.push_back(&W);
            b_ah_.push_back(&b);
            ad::Param& g = params_.add("future_pos" + tag + ".ln_g", 1, cfg.d_ah);
            ad::Param& bb = params_.add("future_pos" + tag + ".ln_b", 1, cfg.d_ah);
            for (double& v : g.value.v) v = 1.0;
            ln_g_.push_back(&g);
            ln_b_.push_back(&bb);
        }
        mlp_q_.build(params_, "mlp_q", {cfg.d_ah, cfg.q_hidden, cfg.q_hidden, cfg.q_hidden, 1}, rng);
    }

    const NetConfig& config() const { return cfg_; }
    int num_spots() const { return num_spots_; }
    int num_actions() const { return num_actions_; }
    ad::ParamStore& params() { return params_; }
    const ad::ParamStore& params() const { return params_; }
    ad::Param& theta() { return *theta_; }
    ad::Param& embeddings() { return *embeddings_; }

    void copy_from(const SatopNet& other) { params_.copy_values_from(other.params_); }

    // returns the node id of the |A| x 1 Q vector; `gates` optionally reuses
    // the edge-gate nodes from gate_nodes() so a batch of forwards in one
    // graph computes them once (they depend only on the parameters)
    int forward(ad::Graph& g, const std::vector<double>& features, const GeometryContext& ctx,
                const std::vector<int>* gates = nullptr) const {
        if (static_cast<int>(features.size()) != num_spots_ * 12)
            throw ad::NumericError("forward: feature matrix must be |P| x 12");
        int h = encode_spots(g, features);
        int at = action_target(g, h, ctx);
        int ar = route_aggregate(g, h, ctx);
        int ah0 = action_representation(g, ar, at, ctx);
        int ahn = future_positioning(g, ah0, ctx, gates);
        return q_head(g, ahn);
    }

    // combined index lists for a batched forward; must outlive the graph's
    // backward pass (group_sum closures reference them)
    struct BatchIndex {
        std::vector<std::vector<int>> pe;
        std::vector<std::vector<int>> pr_idx;
        std::vector<std::vector<double>> pr_phi;
    };

    // B observations stacked in one graph so every weight matrix streams once
    // per op instead of once per sample. features is B x (|P| * 12) flattened;
    // returns the (B * |A|) x 1 Q node, sample s occupying rows [s*|A|, (s+1)*|A|).
    // Row-for-row the math (and hence the values) match B single forwards.
    int forward_batch(ad::Graph& g, const std::vector<double>& features,
                      const std::vector<GeometryContext>& ctxs, BatchIndex& idx,
                      const std::vector<int>* gates = nullptr) const {
        int B = static_cast<int>(ctxs.size());
        if (static_cast<int>(features.size()) != B * num_spots_ * 12)
            throw ad::NumericError("forward_batch: feature matrix must be B x |P| x 12");
        idx.pe.clear();
        idx.pr_idx.clear();
        idx.pr_phi.clear();
        for (int s = 0; s < B; ++s) {
            int off = s * num_spots_;
            for (const auto& grp : *ctxs[s].pe) {
                idx.pe.emplace_back();
                for (int p : grp) idx.pe.back().push_back(off + p);
            }
            for (const auto& grp : *ctxs[s].pr_idx) {
                idx.pr_idx.emplace_back();
                for (int p : grp) idx.pr_idx.back().push_back(off + p);
            }
            idx.pr_phi.insert(idx.pr_phi.end(), ctxs[s].pr_phi->begin(), ctxs[s].pr_phi->end());
        }
        ad::Tensor f(B * num_spots_, 12);
        f.v = features;
        int x = g.concat_cols({g.leaf(std::move(f)), g.tile_rows(g.param(*embeddings_), B)});
        int h = spot_encoder_.forward(g, x);
        int at = g.linear(g.group_sum(h, idx.pe), g.param(*w_at_), g.param(*b_at_));
        int ar = g.scale_by(g.group_sum(h, idx.pr_idx, &idx.pr_phi), g.param(*theta_));
        ad::Tensor dur(B * num_actions_, 1);
        for (int s = 0; s < B; ++s)
            for (int a = 0; a < num_actions_; ++a)
                dur.at(s * num_actions_ + a, 0) = (*ctxs[s].durations)[a] * cfg_.duration_norm;
        int ah0 = mlp_ah_.forward(g, g.concat_cols({ar, at, g.leaf(std::move(dur))}));
        std::vector<int> own;
        if (!gates) {
            own = gate_nodes(g, ctxs[0]); // delta is graph-wide, any ctx works
            gates = &own;
        }
        int ah = ah0;
        for (int l = 0; l < cfg_.n_layers; ++l) {
            int zero_b = g.leaf(ad::Tensor(1, cfg_.d_ah));
            int proj = g.linear(ah, g.param(*w_ah_[l]), zero_b);
            int msg = g.add_row(g.block_matmul((*gates)[l], proj, B), g.param(*b_ah_[l]));
            int act = g.elu(msg);
            ah = g.layernorm(g.add(act, ah0), g.param(*ln_g_[l]), g.param(*ln_b_[l]));
        }
        return mlp_q_.forward(g, ah);
    }

    // per-layer |A| x |A| edge gate matrices, tanh(MLP_delta(delta))
    std::vector<int> gate_nodes(ad::Graph& g, const GeometryContext& ctx) const {
        ad::Tensor d(num_actions_ * num_actions_, 2);
        d.v = *ctx.delta;
        int delta_in = g.leaf(std::move(d));
        std::vector<int> out;
        for (int l = 0; l < cfg_.n_layers; ++l)
            out.push_back(g.reshape(g.tanh_(mlp_delta_[l].forward(g, delta_in)),
                                    num_actions_, num_actions_));
        return out;
    }

    // --- individual stages, exposed for structural tests ---

    int encode_spots(ad::Graph& g, const std::vector<double>& features) const {
        ad::Tensor f(num_spots_, 12);
        f.v = features;
        int x = g.concat_cols({g.leaf(std::move(f)), g.param(*embeddings_)});
        return spot_encoder_.forward(g, x);
    }

    // at_a = (sum over PE(e_a) of W h_p) + b, activation = identity
    int action_target(ad::Graph& g, int h, const GeometryContext& ctx) const {
        int pooled = g.group_sum(h, *ctx.pe);
        return g.linear(pooled, g.param(*w_at_), g.param(*b_at_));
    }

    // ar_a = theta * sum over PR_a of phi_hat * h_p
    int route_aggregate(ad::Graph& g, int h, const GeometryContext& ctx) const {
        int weighted = g.group_sum(h, *ctx.pr_idx, ctx.pr_phi);
        return g.scale_by(weighted, g.param(*theta_));
    }

    int action_representation(ad::Graph& g, int ar, int at, const GeometryContext& ctx) const {
        ad::Tensor dur(num_actions_, 1);
        for (int a = 0; a < num_actions_; ++a) dur.at(a, 0) = (*ctx.durations)[a] * cfg_.duration_norm;
        int cat = g.concat_cols({ar, at, g.leaf(std::move(dur))});
        return mlp_ah_.forward(g, cat);
    }

    // message passing with residual to layer 0:
    //   delta_hat = tanh(MLP_delta(delta)), ah_hat = ELU(delta_hat . (ah W^T) + b),
    //   ah = LN(ah_hat + ah0)
    int future_positioning(ad::Graph& g, int ah0, const GeometryContext& ctx,
                           const std::vector<int>* gates = nullptr) const {
        std::vector<int> own;
        if (!gates) {
            own = gate_nodes(g, ctx);
            gates = &own;
        }
        int ah = ah0;
        for (int l = 0; l < cfg_.n_layers; ++l) {
            int dmat = (*gates)[l];
            // ah W^T without bias, bias added once per action after the sum
            int zero_b = g.leaf(ad::Tensor(1, cfg_.d_ah));
            int proj = g.linear(ah, g.param(*w_ah_[l]), zero_b);
            int msg = g.add_row(g.matmul(dmat, proj), g.param(*b_ah_[l]));
            int act = g.elu(msg);
            ah = g.layernorm(g.add(act, ah0), g.param(*ln_g_[l]), g.param(*ln_b_[l]));
        }
        return ah;
    }

    int q_head(ad::Graph& g, int ahn) const { return mlp_q_.forward(g, ahn); }

    // plain inference: Q values as a flat vector
    std::vector<double> q_values(const std::vector<double>& features, const GeometryContext& ctx) const {
        ad::Graph g(/*with_grad=*/false);
        int q = forward(g, features, ctx);
        return g.value(q).v;
    }

private:
    NetConfig cfg_;
    int num_spots_;
    int num_actions_;
    ad::ParamStore params_;
    detail_nn::Mlp spot_encoder_;
    ad::Param* embeddings_;
    ad::Param* w_at_;
    ad::Param* b_at_;
    ad::Param* theta_;
    detail_nn::Mlp mlp_ah_;
    std::vector<detail_nn::Mlp> mlp_delta_;
    std::vector<ad::Param*> w_ah_, b_ah_, ln_g_, ln_b_;
    detail_nn::Mlp mlp_q_;
};

inline int argmax_with_index_tiebreak(const std::vector<double>& v) {
    int best = 0;
    for (size_t i = 1; i < v.size(); ++i)
        if (v[i] > v[best]) best = static_cast<int>(i);
    return best;
}

} // namespace satop
