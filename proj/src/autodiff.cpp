#include "ccfrec/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace ccfrec::ad {

// ---------------------------------------------------------------------------
// ParamStore
// ---------------------------------------------------------------------------

Param& ParamStore::create(const std::string& name, int rows, int cols) {
    return create(name, Mat::Zero(rows, cols));
}

Param& ParamStore::create(const std::string& name, Mat init) {
    if (by_name_.count(name)) throw Error("parameter already registered: " + name);
    params_.emplace_back(name, std::move(init));
    Param* p = &params_.back();
    order_.push_back(p);
    by_name_[name] = p;
    return *p;
}

Param& ParamStore::at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("unknown parameter: " + name);
    return *it->second;
}

const Param& ParamStore::at(const std::string& name) const {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) throw Error("unknown parameter: " + name);
    return *it->second;
}

bool ParamStore::contains(const std::string& name) const {
    return by_name_.count(name) != 0;
}

void ParamStore::zero_grads() {
    for (Param* p : order_) p->grad.setZero();
}

long ParamStore::scalar_count() const {
    long n = 0;
    for (const Param* p : order_) n += p->value.size();
    return n;
}

// ---------------------------------------------------------------------------
// Var
// ---------------------------------------------------------------------------

long Var::rows() const { return tape_->node(*this).value.rows(); }
long Var::cols() const { return tape_->node(*this).value.cols(); }
const Mat& Var::value() const { return tape_->node(*this).value; }

// ---------------------------------------------------------------------------
// Tape
// ---------------------------------------------------------------------------

Var Tape::push(Mat value, bool needs_grad, std::function<void(Tape&, const Mat&)> back) {
    Node n;
    n.value = std::move(value);
    n.needs_grad = needs_grad;
    n.back = std::move(back);
    nodes_.push_back(std::move(n));
    return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::accumulate(int idx, const Mat& g) {
    Node& n = nodes_[static_cast<std::size_t>(idx)];
    if (!n.needs_grad) return;
    if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
    n.grad += g;
}

std::mt19937_64& Tape::rng() {
    if (!rng_) throw Error("tape needs an RNG for dropout in training mode");
    return *rng_;
}

double Tape::scalar(Var v) const {
    const Mat& m = node(v).value;
    if (m.size() != 1) throw Error("scalar() on non-1x1 node");
    return m(0, 0);
}

const Mat& Tape::value(Var v) const { return node(v).value; }

Var Tape::constant(Mat v) { return push(std::move(v), false, nullptr); }

Var Tape::param(Param& p) {
    if (!p.trainable) return constant(p.value);
    Param* pp = &p;
    return push(p.value, true, [pp](Tape&, const Mat& g) { pp->grad += g; });
}

Var Tape::rows_of(Param& table, std::vector<int> idx) {
    Mat out(static_cast<long>(idx.size()), table.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= table.value.rows())
            throw Error("row index " + std::to_string(idx[i]) + " out of range for " + table.name);
        out.row(static_cast<long>(i)) = table.value.row(idx[i]);
    }
    if (!table.trainable) return constant(std::move(out));
    Param* pp = &table;
    auto ids = std::make_shared<std::vector<int>>(std::move(idx));
    return push(std::move(out), true, [pp, ids](Tape&, const Mat& g) {
        for (std::size_t i = 0; i < ids->size(); ++i)
            pp->grad.row((*ids)[i]) += g.row(static_cast<long>(i));
    });
}

Var Tape::add(Var a, Var b) {
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.idx_, ib = b.idx_;
    return push(node(a).value + node(b).value, ng, [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, g);
    });
}

Var Tape::sub(Var a, Var b) {
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.idx_, ib = b.idx_;
    return push(node(a).value - node(b).value, ng, [ia, ib](Tape& t, const Mat& g) {
        t.accumulate(ia, g);
        t.accumulate(ib, -g);
    });
}

Var Tape::mul(Var a, Var b) {
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.idx_, ib = b.idx_;
    Mat va = node(a).value, vb = node(b).value;
    return push(va.cwiseProduct(vb), ng, [ia, ib, va, vb](Tape& t, const Mat& g) {
        t.accumulate(ia, g.cwiseProduct(vb));
        t.accumulate(ib, g.cwiseProduct(va));
    });
}

Var Tape::scale(Var a, double s) {
    int ia = a.idx_;
    return push(node(a).value * s, node(a).needs_grad,
                [ia, s](Tape& t, const Mat& g) { t.accumulate(ia, g * s); });
}

Var Tape::matmul(Var a, Var b) {
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.idx_, ib = b.idx_;
    Mat va = node(a).value, vb = node(b).value;
    return push(va * vb, ng, [ia, ib, va, vb](Tape& t, const Mat& g) {
        t.accumulate(ia, g * vb.transpose());
        t.accumulate(ib, va.transpose() * g);
    });
}

Var Tape::matmul_nt(Var a, Var b) {
    bool ng = node(a).needs_grad || node(b).needs_grad;
    int ia = a.idx_, ib = b.idx_;
    Mat va = node(a).value, vb = node(b).value;
    return push(va * vb.transpose(), ng, [ia, ib, va, vb](Tape& t, const Mat& g) {
        t.accumulate(ia, g * vb);
        t.accumulate(ib, g.transpose() * va);
    });
}

Var Tape::add_rowvec(Var m, Var row) {
    if (node(row).value.rows() != 1 || node(row).value.cols() != node(m).value.cols())
        throw Error("add_rowvec shape mismatch");
    bool ng = node(m).needs_grad || node(row).needs_grad;
    int im = m.idx_, ir = row.idx_;
    Mat out = node(m).value;
    out.rowwise() += node(row).value.row(0);
    return push(std::move(out), ng, [im, ir](Tape& t, const Mat& g) {
        t.accumulate(im, g);
        t.accumulate(ir, g.colwise().sum());
    });
}

Var Tape::slice_cols(Var a, int offset, int n) {
    int ia = a.idx_;
    long rows = node(a).value.rows(), cols = node(a).value.cols();
    return push(node(a).value.middleCols(offset, n), node(a).needs_grad,
                [ia, offset, n, rows, cols](Tape& t, const Mat& g) {
                    Mat full = Mat::Zero(rows, cols);
                    full.middleCols(offset, n) = g;
                    t.accumulate(ia, full);
                });
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
    long rows = node(parts.front()).value.rows();
    long cols = 0;
    bool ng = false;
    for (Var p : parts) {
        cols += node(p).value.cols();
        ng = ng || node(p).needs_grad;
    }
    Mat out(rows, cols);
    std::vector<int> idx;
    std::vector<long> widths;
    long off = 0;
    for (Var p : parts) {
        long w = node(p).value.cols();
        out.middleCols(off, w) = node(p).value;
        idx.push_back(p.idx_);
        widths.push_back(w);
        off += w;
    }
    return push(std::move(out), ng, [idx, widths](Tape& t, const Mat& g) {
        long o = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            t.accumulate(idx[i], g.middleCols(o, widths[i]));
            o += widths[i];
        }
    });
}

Var Tape::vstack(const std::vector<Var>& parts) {
    long cols = node(parts.front()).value.cols();
    long rows = 0;
    bool ng = false;
    for (Var p : parts) {
        rows += node(p).value.rows();
        ng = ng || node(p).needs_grad;
    }
    Mat out(rows, cols);
    std::vector<int> idx;
    std::vector<long> heights;
    long off = 0;
    for (Var p : parts) {
        long h = node(p).value.rows();
        out.middleRows(off, h) = node(p).value;
        idx.push_back(p.idx_);
        heights.push_back(h);
        off += h;
    }
    return push(std::move(out), ng, [idx, heights](Tape& t, const Mat& g) {
        long o = 0;
        for (std::size_t i = 0; i < idx.size(); ++i) {
            t.accumulate(idx[i], g.middleRows(o, heights[i]));
            o += heights[i];
        }
    });
}

Var Tape::pick_rows(Var a, std::vector<int> idx) {
    Mat out(static_cast<long>(idx.size()), node(a).value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        if (idx[i] < 0 || idx[i] >= node(a).value.rows())
            throw Error("pick_rows index out of range");
        out.row(static_cast<long>(i)) = node(a).value.row(idx[i]);
    }
    int ia = a.idx_;
    long rows = node(a).value.rows(), cols = node(a).value.cols();
    auto ids = std::make_shared<std::vector<int>>(std::move(idx));
    return push(std::move(out), node(a).needs_grad,
                [ia, ids, rows, cols](Tape& t, const Mat& g) {
                    Mat full = Mat::Zero(rows, cols);
                    for (std::size_t i = 0; i < ids->size(); ++i)
                        full.row((*ids)[i]) += g.row(static_cast<long>(i));
                    t.accumulate(ia, full);
                });
}

Var Tape::relu(Var a) {
    int ia = a.idx_;
    Mat va = node(a).value;
    return push(va.cwiseMax(0.0), node(a).needs_grad, [ia, va](Tape& t, const Mat& g) {
        t.accumulate(ia, (va.array() > 0.0).cast<double>().matrix().cwiseProduct(g));
    });
}

Var Tape::gelu(Var a) {
    const Mat& va = node(a).value;
    constexpr double inv_sqrt2 = 0.7071067811865475;
    constexpr double inv_sqrt2pi = 0.3989422804014327;
    Mat out(va.rows(), va.cols());
    for (long i = 0; i < va.size(); ++i) {
        double x = va.data()[i];
        out.data()[i] = 0.5 * x * (1.0 + std::erf(x * inv_sqrt2));
    }
    int ia = a.idx_;
    return push(std::move(out), node(a).needs_grad, [ia, va](Tape& t, const Mat& g) {
        Mat dx(va.rows(), va.cols());
        for (long i = 0; i < va.size(); ++i) {
            double x = va.data()[i];
            double cdf = 0.5 * (1.0 + std::erf(x * inv_sqrt2));
            double pdf = inv_sqrt2pi * std::exp(-0.5 * x * x);
            dx.data()[i] = g.data()[i] * (cdf + x * pdf);
        }
        t.accumulate(ia, dx);
    });
}

Var Tape::softmax_rows(Var a, const Mat* additive_mask) {
    Mat z = node(a).value;
    if (additive_mask) z += *additive_mask;
    Mat out(z.rows(), z.cols());
    for (long r = 0; r < z.rows(); ++r) {
        double m = z.row(r).maxCoeff();
        Eigen::ArrayXd e = (z.row(r).array() - m).exp();
        out.row(r) = (e / e.sum()).matrix();
    }
    int ia = a.idx_;
    Mat s = out;
    return push(std::move(out), node(a).needs_grad, [ia, s](Tape& t, const Mat& g) {
        Mat dx(s.rows(), s.cols());
        for (long r = 0; r < s.rows(); ++r) {
            double dot = g.row(r).dot(s.row(r));
            dx.row(r) = s.row(r).cwiseProduct(g.row(r)) - s.row(r) * dot;
        }
        t.accumulate(ia, dx);
    });
}

Var Tape::layer_norm_rows(Var x, Var gamma, Var beta, double eps) {
    const Mat& vx = node(x).value;
    const long n = vx.cols();
    Mat xhat(vx.rows(), n);
    Eigen::VectorXd inv_sd(vx.rows());
    for (long r = 0; r < vx.rows(); ++r) {
        double mu = vx.row(r).mean();
        Eigen::RowVectorXd c = vx.row(r).array() - mu;
        double var = c.squaredNorm() / static_cast<double>(n);
        double isd = 1.0 / std::sqrt(var + eps);
        xhat.row(r) = c * isd;
        inv_sd(r) = isd;
    }
    Mat out = xhat;
    out.array().rowwise() *= node(gamma).value.row(0).array();
    out.rowwise() += node(beta).value.row(0);
    bool ng = node(x).needs_grad || node(gamma).needs_grad || node(beta).needs_grad;
    int ix = x.idx_, ig = gamma.idx_, ib = beta.idx_;
    Mat gval = node(gamma).value;
    return push(std::move(out), ng, [ix, ig, ib, xhat, inv_sd, gval, n](Tape& t, const Mat& g) {
        t.accumulate(ib, g.colwise().sum());
        t.accumulate(ig, g.cwiseProduct(xhat).colwise().sum());
        Mat dxhat = g;
        dxhat.array().rowwise() *= gval.row(0).array();
        Mat dx(xhat.rows(), n);
        for (long r = 0; r < xhat.rows(); ++r) {
            double m1 = dxhat.row(r).mean();
            double m2 = dxhat.row(r).cwiseProduct(xhat.row(r)).mean();
            dx.row(r) = (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2) * inv_sd(r);
        }
        t.accumulate(ix, dx);
    });
}

Var Tape::dropout(Var a, double p) {
    if (!train_ || p <= 0.0) return a;
    if (p >= 1.0) throw Error("dropout rate must be < 1");
    std::bernoulli_distribution keep(1.0 - p);
    Mat mask(node(a).value.rows(), node(a).value.cols());
    auto& gen = rng();
    for (long r = 0; r < mask.rows(); ++r)
        for (long c = 0; c < mask.cols(); ++c)
            mask(r, c) = keep(gen) ? 1.0 / (1.0 - p) : 0.0;
    int ia = a.idx_;
    return push(node(a).value.cwiseProduct(mask), node(a).needs_grad,
                [ia, mask](Tape& t, const Mat& g) { t.accumulate(ia, g.cwiseProduct(mask)); });
}

Var Tape::mean_rows(Var a) {
    long r = node(a).value.rows();
    int ia = a.idx_;
    Mat out = node(a).value.colwise().mean();
    return push(std::move(out), node(a).needs_grad, [ia, r](Tape& t, const Mat& g) {
        t.accumulate(ia, g.replicate(r, 1) / static_cast<double>(r));
    });
}

Var Tape::l2_normalize_rows(Var a) {
    const Mat& va = node(a).value;
    Mat out(va.rows(), va.cols());
    Eigen::VectorXd inv_norm(va.rows());
    for (long r = 0; r < va.rows(); ++r) {
        double nrm = va.row(r).norm();
        if (nrm == 0.0) throw DegenerateRepError("l2_normalize_rows");
        inv_norm(r) = 1.0 / nrm;
        out.row(r) = va.row(r) * inv_norm(r);
    }
    int ia = a.idx_;
    Mat y = out;
    return push(std::move(out), node(a).needs_grad, [ia, y, inv_norm](Tape& t, const Mat& g) {
        Mat dx(y.rows(), y.cols());
        for (long r = 0; r < y.rows(); ++r) {
            double dot = g.row(r).dot(y.row(r));
            dx.row(r) = (g.row(r) - y.row(r) * dot) * inv_norm(r);
        }
        t.accumulate(ia, dx);
    });
}

Var Tape::ce_rows(Var logits, std::vector<int> targets, Reduction red) {
    const Mat& z = node(logits).value;
    if (static_cast<long>(targets.size()) != z.rows())
        throw Error("ce_rows: one target per row required");
    double total = 0.0;
    Mat probs(z.rows(), z.cols());
    for (long r = 0; r < z.rows(); ++r) {
        if (targets[r] < 0 || targets[r] >= z.cols()) throw Error("ce_rows: target out of range");
        double m = z.row(r).maxCoeff();
        Eigen::ArrayXd e = (z.row(r).array() - m).exp();
        double sum = e.sum();
        probs.row(r) = (e / sum).matrix();
        total += std::log(sum) + m - z(r, targets[r]);
    }
    double denom = (red == Reduction::Mean) ? static_cast<double>(z.rows()) : 1.0;
    int il = logits.idx_;
    auto tg = std::make_shared<std::vector<int>>(std::move(targets));
    return push(Mat::Constant(1, 1, total / denom), node(logits).needs_grad,
                [il, tg, probs, denom](Tape& t, const Mat& g) {
                    Mat dz = probs;
                    for (long r = 0; r < dz.rows(); ++r) dz(r, (*tg)[r]) -= 1.0;
                    t.accumulate(il, dz * (g(0, 0) / denom));
                });
}

void Tape::backward(Var root) {
    Node& rn = node(root);
    if (rn.value.size() != 1) throw Error("backward() root must be a scalar node");
    if (rn.grad.size() == 0) rn.grad = Mat::Zero(1, 1);
    rn.grad(0, 0) += 1.0;
    for (long i = static_cast<long>(nodes_.size()) - 1; i >= 0; --i) {
        Node& n = nodes_[static_cast<std::size_t>(i)];
        if (!n.needs_grad || n.grad.size() == 0 || !n.back) continue;
        n.back(*this, n.grad);
    }
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

void Adam::step(ParamStore& params) {
    ++t_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
    for (Param* p : params.all()) {
        if (!p->trainable) continue;
        p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * p->grad;
        p->adam_v = cfg_.beta2 * p->adam_v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
        Mat mhat = p->adam_m / bc1;
        Mat vhat = p->adam_v / bc2;
        p->value.array() -= cfg_.lr * mhat.array() / (vhat.array().sqrt() + cfg_.eps);
    }
    params.zero_grads();
}

// ---------------------------------------------------------------------------
// Gradient check
// ---------------------------------------------------------------------------

double max_grad_rel_error(ParamStore& params,
                          const std::function<double()>& loss_value,
                          const std::function<void()>& loss_backward,
                          double h, double denom_floor) {
    params.zero_grads();
    loss_backward();
    std::vector<Mat> analytic;
    analytic.reserve(params.all().size());
    for (Param* p : params.all()) analytic.push_back(p->grad);

    double worst = 0.0;
    for (std::size_t pi = 0; pi < params.all().size(); ++pi) {
        Param* p = params.all()[pi];
        if (!p->trainable) continue;
        for (long i = 0; i < p->value.size(); ++i) {
            double saved = p->value.data()[i];
            p->value.data()[i] = saved + h;
            double up = loss_value();
            p->value.data()[i] = saved - h;
            double down = loss_value();
            p->value.data()[i] = saved;
            double numeric = (up - down) / (2.0 * h);
            double a = analytic[pi].data()[i];
            double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), denom_floor});
            worst = std::max(worst, rel);
        }
    }
    params.zero_grads();
    return worst;
}

}  // namespace ccfrec::ad
