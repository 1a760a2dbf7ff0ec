#pragma once

// Minimal dense reverse-mode autodiff: 2-D tensors, a tape of nodes with
// backward closures, and exactly the operations the network needs.

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace satop::ad {

class NumericError : public std::runtime_error {
public:
    explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

struct Tensor {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Tensor() = default;
    Tensor(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}

    double& at(int r, int c) { return v[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return v[static_cast<size_t>(r) * cols + c]; }
    size_t size() const { return v.size(); }

    void check_finite(const char* what) const {
        for (double x : v)
            if (!std::isfinite(x)) throw NumericError(std::string("non-finite value in ") + what);
    }
};

struct Param {
    std::string name;
    Tensor value;
    Tensor grad;
    Tensor rms_acc; // RMSProp accumulator

    void zero_grad() { std::fill(grad.v.begin(), grad.v.end(), 0.0); }
};

class ParamStore {
public:
    Param& add(const std::string& name, int rows, int cols) {
        params_.push_back(std::make_unique<Param>());
        Param& p = *params_.back();
        p.name = name;
        p.value = Tensor(rows, cols);
        p.grad = Tensor(rows, cols);
        p.rms_acc = Tensor(rows, cols);
        return p;
    }

    std::vector<std::unique_ptr<Param>>& all() { return params_; }
    const std::vector<std::unique_ptr<Param>>& all() const { return params_; }

    Param& by_name(const std::string& name) {
        for (auto& p : params_)
            if (p->name == name) return *p;
        throw std::runtime_error("no parameter named " + name);
    }

    void zero_grad() {
        for (auto& p : params_) p->zero_grad();
    }

    void copy_values_from(const ParamStore& other) {
        if (other.params_.size() != params_.size())
            throw std::runtime_error("parameter count mismatch in copy");
        for (size_t i = 0; i < params_.size(); ++i) {
            if (other.params_[i]->value.size() != params_[i]->value.size())
                throw std::runtime_error("parameter shape mismatch in copy: " + params_[i]->name);
            params_[i]->value.v = other.params_[i]->value.v;
        }
    }

private:
    std::vector<std::unique_ptr<Param>> params_;
};

struct RmsPropConfig {
    double lr = 1e-4;
    double alpha = 0.99;
    double eps = 1e-8;
};

inline void rmsprop_step(ParamStore& params, const RmsPropConfig& cfg) {
    for (auto& p : params.all()) {
        for (size_t i = 0; i < p->value.size(); ++i) {
            double g = p->grad.v[i];
            if (!std::isfinite(g)) throw NumericError("non-finite gradient for " + p->name);
            p->rms_acc.v[i] = cfg.alpha * p->rms_acc.v[i] + (1.0 - cfg.alpha) * g * g;
            p->value.v[i] -= cfg.lr * g / (std::sqrt(p->rms_acc.v[i]) + cfg.eps);
        }
    }
}

// ---------------------------------------------------------------------------

class Graph {
public:
    // with_grad = false skips gradient buffers and backward closures; use it
    // for inference-only forwards (roughly halves time and memory)
    explicit Graph(bool with_grad = true) : with_grad_(with_grad) {}

    struct Node {
        Tensor val;
        Tensor grad;
        std::function<void(Graph&)> back; // adds into parents' grads
    };

    std::vector<Node> nodes;

    const Tensor& value(int id) const { return nodes[id].val; }
    Tensor& grad(int id) { return nodes[id].grad; }

    int leaf(Tensor t) {
        t.check_finite("leaf");
        return push(std::move(t), nullptr);
    }

    // leaf whose backward accumulates into the parameter's grad buffer
    int param(Param& p) {
        int id = push(p.value, [&p, this, idx = static_cast<int>(nodes.size())](Graph& g) {
            const Tensor& gr = g.nodes[idx].grad;
            for (size_t i = 0; i < gr.size(); ++i) p.grad.v[i] += gr.v[i];
        });
        return id;
    }

    // x: n x in, W: out x in, b: 1 x out -> n x out
    int linear(int x, int W, int b) {
        const Tensor& X = nodes[x].val;
        const Tensor& Wv = nodes[W].val;
        const Tensor& B = nodes[b].val;
        if (X.cols != Wv.cols || B.cols != Wv.rows) throw NumericError("linear: shape mismatch");
        Tensor out(X.rows, Wv.rows);
        const int K = X.cols, O = Wv.rows;
        for (int r = 0; r < X.rows; ++r) {
            const double* xp = &X.v[static_cast<size_t>(r) * K];
            double* op = &out.v[static_cast<size_t>(r) * O];
            for (int o = 0; o < O; ++o) {
                // four accumulators break the FP dependency chain; the dot
                // product is the hottest loop in the whole training step
                const double* wp = &Wv.v[static_cast<size_t>(o) * K];
                double a0 = 0.0, a1 = 0.0, a2 = 0.0, a3 = 0.0;
                int c = 0;
                for (; c + 4 <= K; c += 4) {
                    a0 += xp[c] * wp[c];
                    a1 += xp[c + 1] * wp[c + 1];
                    a2 += xp[c + 2] * wp[c + 2];
                    a3 += xp[c + 3] * wp[c + 3];
                }
                double acc = (a0 + a1) + (a2 + a3);
                for (; c < K; ++c) acc += xp[c] * wp[c];
                op[o] = B.v[o] + acc;
            }
        }
        return push(std::move(out), [x, W, b](Graph& g) {
            int id = g.current_;
            const Tensor& go = g.nodes[id].grad;
            const Tensor& X = g.nodes[x].val;
            const Tensor& Wv = g.nodes[W].val;
            Tensor& gx = g.nodes[x].grad;
            Tensor& gw = g.nodes[W].grad;
            Tensor& gb = g.nodes[b].grad;
            const int K = X.cols, O = Wv.rows;
            for (int r = 0; r < X.rows; ++r) {
                const double* xp = &X.v[static_cast<size_t>(r) * K];
                double* __restrict__ gxp = &gx.v[static_cast<size_t>(r) * K];
                for (int o = 0; o < O; ++o) {
                    double d = go.at(r, o);
                    if (d == 0.0) continue;
                    gb.v[o] += d;
                    const double* wp = &Wv.v[static_cast<size_t>(o) * K];
                    double* __restrict__ gwp = &gw.v[static_cast<size_t>(o) * K];
                    for (int c = 0; c < K; ++c) gxp[c] += d * wp[c];
                    for (int c = 0; c < K; ++c) gwp[c] += d * xp[c];
                }
            }
        });
    }

    // (n x k) . (k x m)
    int matmul(int a, int b) {
        const Tensor& A = nodes[a].val;
        const Tensor& B = nodes[b].val;
        if (A.cols != B.rows) throw NumericError("matmul: shape mismatch");
        Tensor out(A.rows, B.cols);
        for (int r = 0; r < A.rows; ++r)
            for (int k = 0; k < A.cols; ++k) {
                double av = A.at(r, k);
                if (av == 0.0) continue;
                for (int c = 0; c < B.cols; ++c) out.at(r, c) += av * B.at(k, c);
            }
        return push(std::move(out), [a, b](Graph& g) {
            int id = g.current_;
            const Tensor& go = g.nodes[id].grad;
            const Tensor& A = g.nodes[a].val;
            const Tensor& B = g.nodes[b].val;
            Tensor& ga = g.nodes[a].grad;
            Tensor& gb = g.nodes[b].grad;
            for (int r = 0; r < A.rows; ++r)
                for (int c = 0; c < B.cols; ++c) {
                    double d = go.at(r, c);
                    if (d == 0.0) continue;
                    for (int k = 0; k < A.cols; ++k) {
                        ga.at(r, k) += d * B.at(k, c);
                        gb.at(k, c) += d * A.at(r, k);
                    }
                }
        });
    }

    int add(int a, int b) {
        const Tensor& A = nodes[a].val;
        const Tensor& B = nodes[b].val;
        if (A.rows != B.rows || A.cols != B.cols) throw NumericError("add: shape mismatch");
        Tensor out = A;
        for (size_t i = 0; i < out.size(); ++i) out.v[i] += B.v[i];
        return push(std::move(out), [a, b](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            for (size_t i = 0; i < go.size(); ++i) {
                g.nodes[a].grad.v[i] += go.v[i];
                g.nodes[b].grad.v[i] += go.v[i];
            }
        });
    }

    // x: n x d, row: 1 x d broadcast over rows
    int add_row(int x, int row) {
        const Tensor& X = nodes[x].val;
        const Tensor& R = nodes[row].val;
        if (R.rows != 1 || R.cols != X.cols) throw NumericError("add_row: shape mismatch");
        Tensor out = X;
        for (int r = 0; r < X.rows; ++r)
            for (int c = 0; c < X.cols; ++c) out.at(r, c) += R.at(0, c);
        return push(std::move(out), [x, row](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            Tensor& gx = g.nodes[x].grad;
            Tensor& gr = g.nodes[row].grad;
            for (int r = 0; r < go.rows; ++r)
                for (int c = 0; c < go.cols; ++c) {
                    gx.at(r, c) += go.at(r, c);
                    gr.at(0, c) += go.at(r, c);
                }
        });
    }

    int elu(int x) {
        Tensor out = nodes[x].val;
        for (double& v : out.v) v = v > 0.0 ? v : std::expm1(v);
        return push(std::move(out), [x](Graph& g) {
            int id = g.current_;
            const Tensor& go = g.nodes[id].grad;
            const Tensor& ov = g.nodes[id].val;
            Tensor& gx = g.nodes[x].grad;
            for (size_t i = 0; i < go.size(); ++i)
                gx.v[i] += go.v[i] * (g.nodes[x].val.v[i] > 0.0 ? 1.0 : ov.v[i] + 1.0);
        });
    }

    int tanh_(int x) {
        Tensor out = nodes[x].val;
        for (double& v : out.v) v = std::tanh(v);
        return push(std::move(out), [x](Graph& g) {
            int id = g.current_;
            const Tensor& go = g.nodes[id].grad;
            const Tensor& ov = g.nodes[id].val;
            Tensor& gx = g.nodes[x].grad;
            for (size_t i = 0; i < go.size(); ++i) gx.v[i] += go.v[i] * (1.0 - ov.v[i] * ov.v[i]);
        });
    }

    // row-wise layer norm with affine gain/bias (1 x d each)
    int layernorm(int x, int gain, int bias, double eps = 1e-5) {
        const Tensor& X = nodes[x].val;
        const Tensor& G = nodes[gain].val;
        const Tensor& B = nodes[bias].val;
        if (G.cols != X.cols || B.cols != X.cols) throw NumericError("layernorm: shape mismatch");
        Tensor out(X.rows, X.cols);
        auto mu = std::make_shared<std::vector<double>>(X.rows);
        auto inv_std = std::make_shared<std::vector<double>>(X.rows);
        for (int r = 0; r < X.rows; ++r) {
            const double* xp = &X.v[static_cast<size_t>(r) * X.cols];
            double s0 = 0.0, s1 = 0.0;
            int c = 0;
            for (; c + 2 <= X.cols; c += 2) {
                s0 += xp[c];
                s1 += xp[c + 1];
            }
            double m = s0 + s1;
            for (; c < X.cols; ++c) m += xp[c];
            m /= X.cols;
            double v0 = 0.0, v1 = 0.0;
            c = 0;
            for (; c + 2 <= X.cols; c += 2) {
                double d0 = xp[c] - m, d1 = xp[c + 1] - m;
                v0 += d0 * d0;
                v1 += d1 * d1;
            }
            double var = v0 + v1;
            for (; c < X.cols; ++c) {
                double d = xp[c] - m;
                var += d * d;
            }
            var /= X.cols;
            (*mu)[r] = m;
            (*inv_std)[r] = 1.0 / std::sqrt(var + eps);
            for (int c = 0; c < X.cols; ++c)
                out.at(r, c) = (X.at(r, c) - m) * (*inv_std)[r] * G.at(0, c) + B.at(0, c);
        }
        return push(std::move(out), [x, gain, bias, mu, inv_std](Graph& g) {
            int id = g.current_;
            const Tensor& go = g.nodes[id].grad;
            const Tensor& X = g.nodes[x].val;
            const Tensor& G = g.nodes[gain].val;
            Tensor& gx = g.nodes[x].grad;
            Tensor& gg = g.nodes[gain].grad;
            Tensor& gb = g.nodes[bias].grad;
            int n = X.cols;
            for (int r = 0; r < X.rows; ++r) {
                double is = (*inv_std)[r];
                double m = (*mu)[r];
                double sum_dxhat = 0.0, sum_dxhat_xhat = 0.0;
                for (int c = 0; c < n; ++c) {
                    double xhat = (X.at(r, c) - m) * is;
                    double d = go.at(r, c);
                    gg.at(0, c) += d * xhat;
                    gb.at(0, c) += d;
                    double dxhat = d * G.at(0, c);
                    sum_dxhat += dxhat;
                    sum_dxhat_xhat += dxhat * xhat;
                }
                for (int c = 0; c < n; ++c) {
                    double xhat = (X.at(r, c) - m) * is;
                    double dxhat = go.at(r, c) * G.at(0, c);
                    gx.at(r, c) += is * (dxhat - sum_dxhat / n - xhat * sum_dxhat_xhat / n);
                }
            }
        });
    }

    int concat_cols(const std::vector<int>& parts) {
        int rows = nodes[parts[0]].val.rows;
        int cols = 0;
        for (int p : parts) {
            if (nodes[p].val.rows != rows) throw NumericError("concat_cols: row mismatch");
            cols += nodes[p].val.cols;
        }
        Tensor out(rows, cols);
        int off = 0;
        for (int p : parts) {
            const Tensor& P = nodes[p].val;
            for (int r = 0; r < rows; ++r)
                for (int c = 0; c < P.cols; ++c) out.at(r, off + c) = P.at(r, c);
            off += P.cols;
        }
        return push(std::move(out), [parts](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            int off = 0;
            for (int p : parts) {
                Tensor& gp = g.nodes[p].grad;
                for (int r = 0; r < go.rows; ++r)
                    for (int c = 0; c < gp.cols; ++c) gp.at(r, c) += go.at(r, off + c);
                off += gp.cols;
            }
        });
    }

    // out[i] = sum over rows of x listed in groups[i], optionally weighted
    int group_sum(int x, const std::vector<std::vector<int>>& groups,
                  const std::vector<std::vector<double>>* weights = nullptr) {
        const Tensor& X = nodes[x].val;
        Tensor out(static_cast<int>(groups.size()), X.cols);
        for (size_t gidx = 0; gidx < groups.size(); ++gidx)
            for (size_t k = 0; k < groups[gidx].size(); ++k) {
                double w = weights ? (*weights)[gidx][k] : 1.0;
                int row = groups[gidx][k];
                for (int c = 0; c < X.cols; ++c) out.at(static_cast<int>(gidx), c) += w * X.at(row, c);
            }
        return push(std::move(out), [x, &groups, weights](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            Tensor& gx = g.nodes[x].grad;
            for (size_t gidx = 0; gidx < groups.size(); ++gidx)
                for (size_t k = 0; k < groups[gidx].size(); ++k) {
                    double w = weights ? (*weights)[gidx][k] : 1.0;
                    int row = groups[gidx][k];
                    for (int c = 0; c < go.cols; ++c)
                        gx.at(row, c) += w * go.at(static_cast<int>(gidx), c);
                }
        });
    }

    // multiply every entry of x by a 1x1 node (the learnable route scale)
    int scale_by(int x, int scalar) {
        const Tensor& S = nodes[scalar].val;
        if (S.rows != 1 || S.cols != 1) throw NumericError("scale_by: scalar must be 1x1");
        Tensor out = nodes[x].val;
        for (double& v : out.v) v *= S.at(0, 0);
        return push(std::move(out), [x, scalar](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            const Tensor& X = g.nodes[x].val;
            double s = g.nodes[scalar].val.at(0, 0);
            Tensor& gx = g.nodes[x].grad;
            double acc = 0.0;
            for (size_t i = 0; i < go.size(); ++i) {
                gx.v[i] += go.v[i] * s;
                acc += go.v[i] * X.v[i];
            }
            g.nodes[scalar].grad.at(0, 0) += acc;
        });
    }

    // stack `times` copies of x on top of each other
    int tile_rows(int x, int times) {
        const Tensor& X = nodes[x].val;
        Tensor out(X.rows * times, X.cols);
        for (int t = 0; t < times; ++t)
            std::copy(X.v.begin(), X.v.end(), out.v.begin() + static_cast<size_t>(t) * X.size());
        return push(std::move(out), [x, times](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            Tensor& gx = g.nodes[x].grad;
            size_t n = gx.size();
            for (int t = 0; t < times; ++t)
                for (size_t i = 0; i < n; ++i) gx.v[i] += go.v[static_cast<size_t>(t) * n + i];
        });
    }

    // x holds `blocks` stacked (k x d) blocks; output block s is a . x_s with
    // a shared (r x k) left factor. Per-block math matches matmul exactly.
    int block_matmul(int a, int x, int blocks) {
        const Tensor& A = nodes[a].val;
        const Tensor& X = nodes[x].val;
        if (X.rows != A.cols * blocks) throw NumericError("block_matmul: shape mismatch");
        Tensor out(A.rows * blocks, X.cols);
        for (int s = 0; s < blocks; ++s)
            for (int r = 0; r < A.rows; ++r)
                for (int k = 0; k < A.cols; ++k) {
                    double av = A.at(r, k);
                    if (av == 0.0) continue;
                    const double* xp = &X.v[static_cast<size_t>(s * A.cols + k) * X.cols];
                    double* op = &out.v[static_cast<size_t>(s * A.rows + r) * X.cols];
                    for (int c = 0; c < X.cols; ++c) op[c] += av * xp[c];
                }
        return push(std::move(out), [a, x, blocks](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            const Tensor& A = g.nodes[a].val;
            const Tensor& X = g.nodes[x].val;
            Tensor& ga = g.nodes[a].grad;
            Tensor& gx = g.nodes[x].grad;
            for (int s = 0; s < blocks; ++s)
                for (int r = 0; r < A.rows; ++r)
                    for (int c = 0; c < X.cols; ++c) {
                        double d = go.at(s * A.rows + r, c);
                        if (d == 0.0) continue;
                        for (int k = 0; k < A.cols; ++k) {
                            ga.at(r, k) += d * X.at(s * A.cols + k, c);
                            gx.at(s * A.cols + k, c) += d * A.at(r, k);
                        }
                    }
        });
    }

    int reshape(int x, int rows, int cols) {
        const Tensor& X = nodes[x].val;
        if (static_cast<size_t>(rows) * cols != X.size()) throw NumericError("reshape: size mismatch");
        Tensor out = X;
        out.rows = rows;
        out.cols = cols;
        return push(std::move(out), [x](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            Tensor& gx = g.nodes[x].grad;
            for (size_t i = 0; i < go.size(); ++i) gx.v[i] += go.v[i];
        });
    }

    int pick(int x, int r, int c) {
        Tensor out(1, 1);
        out.at(0, 0) = nodes[x].val.at(r, c);
        return push(std::move(out), [x, r, c](Graph& g) {
            g.nodes[x].grad.at(r, c) += g.nodes[g.current_].grad.at(0, 0);
        });
    }

    int add_const(int x, double k) {
        Tensor out = nodes[x].val;
        for (double& v : out.v) v += k;
        return push(std::move(out), [x](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            Tensor& gx = g.nodes[x].grad;
            for (size_t i = 0; i < go.size(); ++i) gx.v[i] += go.v[i];
        });
    }

    int square(int x) {
        Tensor out = nodes[x].val;
        for (double& v : out.v) v *= v;
        return push(std::move(out), [x](Graph& g) {
            const Tensor& go = g.nodes[g.current_].grad;
            const Tensor& X = g.nodes[x].val;
            Tensor& gx = g.nodes[x].grad;
            for (size_t i = 0; i < go.size(); ++i) gx.v[i] += go.v[i] * 2.0 * X.v[i];
        });
    }

    // mean of a list of 1x1 nodes
    int mean_of(const std::vector<int>& scalars) {
        Tensor out(1, 1);
        for (int s : scalars) out.at(0, 0) += nodes[s].val.at(0, 0);
        out.at(0, 0) /= static_cast<double>(scalars.size());
        return push(std::move(out), [scalars](Graph& g) {
            double d = g.nodes[g.current_].grad.at(0, 0) / static_cast<double>(scalars.size());
            for (int s : scalars) g.nodes[s].grad.at(0, 0) += d;
        });
    }

    int sum_all(int x) {
        Tensor out(1, 1);
        for (double v : nodes[x].val.v) out.at(0, 0) += v;
        return push(std::move(out), [x](Graph& g) {
            double d = g.nodes[g.current_].grad.at(0, 0);
            for (double& v : g.nodes[x].grad.v) v += d;
        });
    }

    void backward(int loss) {
        if (!with_grad_) throw NumericError("backward: graph built without gradients");
        if (nodes[loss].val.size() != 1) throw NumericError("backward: loss must be scalar");
        for (Node& n : nodes) std::fill(n.grad.v.begin(), n.grad.v.end(), 0.0);
        nodes[loss].grad.at(0, 0) = 1.0;
        for (int i = loss; i >= 0; --i) {
            if (!nodes[i].back) continue;
            current_ = i;
            nodes[i].back(*this);
        }
    }

private:
    int push(Tensor val, std::function<void(Graph&)> back) {
        val.check_finite("op output");
        Node n;
        if (with_grad_) {
            n.grad = Tensor(val.rows, val.cols);
            n.back = std::move(back);
        }
        n.val = std::move(val);
        nodes.push_back(std::move(n));
        return static_cast<int>(nodes.size()) - 1;
    }

    bool with_grad_ = true;
    int current_ = -1;
};

// uniform fan-in init for linear layers
inline void init_linear(Param& W, Param& b, std::mt19937_64& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(W.value.cols));
    std::uniform_real_distribution<double> unif(-bound, bound);
    for (double& v : W.value.v) v = unif(rng);
    for (double& v : b.value.v) v = unif(rng);
}

} // namespace satop::ad
