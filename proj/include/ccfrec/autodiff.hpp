#pragma once

// Reverse-mode automatic differentiation over dense double matrices.
//
// A Tape owns a growing list of nodes; creation order is a topological order
// of the computation graph, so backward() is a single reverse sweep. Graphs
// are rebuilt per training step and discarded afterwards. All math is
// double-precision and single-threaded, which keeps runs bit-reproducible
// under a fixed seed.

#include <Eigen/Dense>

#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "ccfrec/common.hpp"

namespace ccfrec::ad {

using Mat = Eigen::MatrixXd;

// A named learnable tensor with its gradient accumulator and Adam state.
struct Param {
    std::string name;
    Mat value;
    Mat grad;
    Mat adam_m;
    Mat adam_v;
    bool trainable = true;

    Param(std::string n, Mat v)
        : name(std::move(n)),
          value(std::move(v)),
          grad(Mat::Zero(value.rows(), value.cols())),
          adam_m(Mat::Zero(value.rows(), value.cols())),
          adam_v(Mat::Zero(value.rows(), value.cols())) {}
};

// Registry of parameters. Iteration order is registration order, which makes
// checkpoints and gradient checks deterministic.
class ParamStore {
public:
    Param& create(const std::string& name, int rows, int cols);
    Param& create(const std::string& name, Mat init);
    Param& at(const std::string& name);
    const Param& at(const std::string& name) const;
    bool contains(const std::string& name) const;

    std::vector<Param*>& all() { return order_; }
    const std::vector<Param*>& all() const { return order_; }

    void zero_grads();
    long scalar_count() const;

private:
    std::deque<Param> params_;
    std::vector<Param*> order_;
    std::map<std::string, Param*> by_name_;
};

class Tape;

// Lightweight handle to a tape node.
class Var {
public:
    Var() = default;

    long rows() const;
    long cols() const;
    const Mat& value() const;

private:
    friend class Tape;
    Var(Tape* t, int idx) : tape_(t), idx_(idx) {}
    Tape* tape_ = nullptr;
    int idx_ = -1;
};

enum class Reduction { Mean, Sum };

class Tape {
public:
    // grad_enabled=false builds a forward-only graph (evaluation); rng is
    // required only when dropout with p>0 will run in training mode.
    explicit Tape(bool train = false, std::mt19937_64* rng = nullptr)
        : train_(train), rng_(rng) {}

    bool training() const { return train_; }

    // ---- leaves ----
    Var constant(Mat v);
    Var param(Param& p);                              // whole-tensor leaf
    Var rows_of(Param& table, std::vector<int> idx);  // embedding gather

    // ---- elementwise / linear algebra ----
    Var add(Var a, Var b);
    Var sub(Var a, Var b);
    Var mul(Var a, Var b);  // elementwise
    Var scale(Var a, double s);
    Var matmul(Var a, Var b);     // A*B
    Var matmul_nt(Var a, Var b);  // A*B^T
    Var add_rowvec(Var m, Var row);

    // ---- shape ----
    Var slice_cols(Var a, int offset, int n);
    Var concat_cols(const std::vector<Var>& parts);
    Var vstack(const std::vector<Var>& parts);
    Var pick_rows(Var a, std::vector<int> idx);

    // ---- nonlinearities ----
    Var relu(Var a);
    Var gelu(Var a);  // exact (erf) form; smooth, so finite differences behave
    Var softmax_rows(Var a, const Mat* additive_mask = nullptr);
    Var layer_norm_rows(Var x, Var gamma, Var beta, double eps = 1e-8);
    Var dropout(Var a, double p);
    Var mean_rows(Var a);           // r x c -> 1 x c
    Var l2_normalize_rows(Var a);   // throws DegenerateRep on a zero row

    // Cross entropy over rows of a logit matrix: row i contributes
    // logsumexp(row) - row[target[i]]. Returns a 1x1 node.
    Var ce_rows(Var logits, std::vector<int> targets, Reduction red);

    // Seeds grad of `root` (must be 1x1) with 1 and sweeps the tape.
    void backward(Var root);

    double scalar(Var v) const;
    const Mat& value(Var v) const;

private:
    friend class Var;

    struct Node {
        Mat value;
        Mat grad;  // allocated lazily on first accumulation
        std::function<void(Tape&, const Mat&)> back;
        bool needs_grad = false;
    };

    Node& node(Var v) { return nodes_[static_cast<std::size_t>(v.idx_)]; }
    const Node& node(Var v) const { return nodes_[static_cast<std::size_t>(v.idx_)]; }
    Var push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> back);
    void accumulate(int idx, const Mat& g);
    std::mt19937_64& rng();

    std::deque<Node> nodes_;
    bool train_ = false;
    std::mt19937_64* rng_ = nullptr;
};

// Adam with the conventional defaults the paper does not override.
struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

    // Applies one update to every trainable param and clears all grads.
    void step(ParamStore& params);
    long step_count() const { return t_; }
    void set_step_count(long t) { t_ = t; }
    const AdamConfig& config() const { return cfg_; }

private:
    AdamConfig cfg_;
    long t_ = 0;
};

// Central-difference gradient check utility (test support, but lives here so
// both the unit tests and the acceptance suite share one implementation).
// Returns the maximum relative error over all trainable scalars.
double max_grad_rel_error(ParamStore& params,
                          const std::function<double()>& loss_value,
                          const std::function<void()>& loss_backward,
                          double h = 1e-5,
                          double denom_floor = 1e-6);

}  // namespace ccfrec::ad
