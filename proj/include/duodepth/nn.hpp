#pragma once

#include <Eigen/Dense>
#include <array>
#include <cassert>
#include <string>
#include <vector>

#include "duodepth/common.hpp"

namespace duodepth::nn {

using Index = Eigen::Index;
template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

[[noreturn]] inline void shape_fail(const std::string& what) {
    throw std::runtime_error("shape error: " + what);
}

// Contiguous value block with an explicit shape. Batches are handed to the
// blocks as 2-D views (rows = leading dimensions collapsed).
template <class S>
struct Tensor {
    std::vector<Index> shape;
    std::vector<S> data;

    Tensor() = default;
    explicit Tensor(std::vector<Index> s) : shape(std::move(s)) {
        data.assign(std::size_t(numel_of(shape)), S(0));
    }
    static Index numel_of(const std::vector<Index>& s) {
        Index n = 1;
        for (Index d : s) n *= d;
        return n;
    }
    Index numel() const { return Index(data.size()); }
    Index dim(std::size_t i) const { return shape.at(i); }

    Eigen::Map<Mat<S>> as2d(Index rows, Index cols) {
        if (rows * cols != numel()) shape_fail("tensor view size mismatch");
        return {data.data(), rows, cols};
    }
    Eigen::Map<const Mat<S>> as2d(Index rows, Index cols) const {
        if (rows * cols != numel()) shape_fail("tensor view size mismatch");
        return {data.data(), rows, cols};
    }
};

template <class S>
struct ParamRef {
    std::string name;
    S* value = nullptr;
    S* grad = nullptr;
    Index size = 0;
};

enum class Init { KaimingUniform, LecunNormal, SmallUniform, Zero };

// ---------------------------------------------------------------------------
// Layers. Forward pushes onto a cache stack and backward pops it, so one
// layer instance can be run through several times per step (shared
// branches) as long as backward happens in reverse call order.

template <class S>
class Linear {
public:
    Linear() = default;
    Linear(Index in, Index out, Rng& rng, Init init) : w_(out, in), b_(out) {
        gw_ = Mat<S>::Zero(out, in);
        gb_ = Vec<S>::Zero(out);
        b_.setZero();
        switch (init) {
            case Init::KaimingUniform: {
                const double a = std::sqrt(6.0 / double(in));
                for (Index r = 0; r < out; ++r)
                    for (Index c = 0; c < in; ++c) w_(r, c) = S(rng.uniform(-a, a));
                break;
            }
            case Init::LecunNormal: {
                const double s = std::sqrt(1.0 / double(in));
                for (Index r = 0; r < out; ++r)
                    for (Index c = 0; c < in; ++c) w_(r, c) = S(rng.normal(0.0, s));
                break;
            }
            case Init::SmallUniform:
                for (Index r = 0; r < out; ++r)
                    for (Index c = 0; c < in; ++c) w_(r, c) = S(rng.uniform(-0.01, 0.01));
                break;
            case Init::Zero:
                w_.setZero();
                break;
        }
    }

    Mat<S> forward(const Mat<S>& x) {
        if (x.cols() != w_.cols()) shape_fail("linear input width");
        Mat<S> y = x * w_.transpose();
        y.rowwise() += b_.transpose();
        xs_.push_back(x);
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        assert(!xs_.empty());
        const Mat<S> x = std::move(xs_.back());
        xs_.pop_back();
        gw_.noalias() += dy.transpose() * x;
        gb_ += dy.colwise().sum().transpose();
        return dy * w_;
    }

    void visit(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".w", w_.data(), gw_.data(), w_.size()});
        out.push_back({prefix + ".b", b_.data(), gb_.data(), b_.size()});
    }
    void zero_grad() {
        gw_.setZero();
        gb_.setZero();
    }
    void clear_cache() { xs_.clear(); }

    const Mat<S>& weight() const { return w_; }
    const Vec<S>& bias() const { return b_; }
    Mat<S>& weight() { return w_; }
    Vec<S>& bias() { return b_; }
    Index in_width() const { return w_.cols(); }
    Index out_width() const { return w_.rows(); }

private:
    Mat<S> w_, gw_;
    Vec<S> b_, gb_;
    std::vector<Mat<S>> xs_;
};

template <class S>
class BatchNorm {
public:
    BatchNorm() = default;
    explicit BatchNorm(Index channels)
        : gamma_(Vec<S>::Ones(channels)),
          beta_(Vec<S>::Zero(channels)),
          running_mean_(Vec<S>::Zero(channels)),
          running_var_(Vec<S>::Ones(channels)),
          ggamma_(Vec<S>::Zero(channels)),
          gbeta_(Vec<S>::Zero(channels)) {}

    Mat<S> forward(const Mat<S>& x, bool training) {
        if (x.cols() != gamma_.size()) shape_fail("batch norm channel count");
        Cache c;
        c.training = training;
        const Index m = x.rows();
        if (training) {
            const Vec<S> mean = x.colwise().mean().transpose();
            Vec<S> var(x.cols());
            for (Index j = 0; j < x.cols(); ++j)
                var[j] = (x.col(j).array() - mean[j]).square().sum() / S(m);
            c.invstd = (var.array() + S(kEps)).rsqrt();
            c.xhat = (x.rowwise() - mean.transpose()).array().rowwise() *
                     c.invstd.transpose().array();
            running_mean_ = S(kMomentum) * running_mean_ + S(1 - kMomentum) * mean;
            running_var_ = S(kMomentum) * running_var_ + S(1 - kMomentum) * var;
        } else {
            c.invstd = (running_var_.array() + S(kEps)).rsqrt();
            c.xhat = (x.rowwise() - running_mean_.transpose()).array().rowwise() *
                     c.invstd.transpose().array();
        }
        Mat<S> y = c.xhat.array().rowwise() * gamma_.transpose().array();
        y.rowwise() += beta_.transpose();
        cache_.push_back(std::move(c));
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        assert(!cache_.empty());
        const Cache c = std::move(cache_.back());
        cache_.pop_back();
        ggamma_ += (dy.array() * c.xhat.array()).colwise().sum().transpose().matrix();
        gbeta_ += dy.colwise().sum().transpose();
        const Index m = dy.rows();
        if (!c.training) {
            return dy.array().rowwise() *
                   (gamma_.array() * c.invstd.array()).transpose();
        }
        // dx = gamma*invstd/m * (m*dy - sum(dy) - xhat * sum(dy*xhat))
        const Vec<S> sum_dy = dy.colwise().sum().transpose();
        const Vec<S> sum_dy_xhat = (dy.array() * c.xhat.array()).colwise().sum().transpose();
        Mat<S> dx = S(m) * dy;
        dx.rowwise() -= sum_dy.transpose();
        dx -= (c.xhat.array().rowwise() * sum_dy_xhat.transpose().array()).matrix();
        dx.array().rowwise() *=
            (gamma_.array() * c.invstd.array() / S(m)).transpose();
        return dx;
    }

    void visit(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".gamma", gamma_.data(), ggamma_.data(), gamma_.size()});
        out.push_back({prefix + ".beta", beta_.data(), gbeta_.data(), beta_.size()});
    }
    // running statistics: checkpointed but never touched by the optimizer
    void visit_state(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        out.push_back({prefix + ".running_mean", running_mean_.data(), nullptr,
                       running_mean_.size()});
        out.push_back({prefix + ".running_var", running_var_.data(), nullptr,
                       running_var_.size()});
    }
    void zero_grad() {
        ggamma_.setZero();
        gbeta_.setZero();
    }
    void clear_cache() { cache_.clear(); }

    const Vec<S>& gamma() const { return gamma_; }
    const Vec<S>& beta() const { return beta_; }
    const Vec<S>& running_mean() const { return running_mean_; }
    const Vec<S>& running_var() const { return running_var_; }
    Vec<S>& gamma() { return gamma_; }
    Vec<S>& beta() { return beta_; }

    static constexpr double kMomentum = 0.9;
    static constexpr double kEps = 1e-5;

private:
    struct Cache {
        Mat<S> xhat;
        Vec<S> invstd;
        bool training = false;
    };
    Vec<S> gamma_, beta_, running_mean_, running_var_, ggamma_, gbeta_;
    std::vector<Cache> cache_;
};

enum class Act { ReLU, SELU };

template <class S>
class Activation {
public:
    Activation() = default;
    explicit Activation(Act kind) : kind_(kind) {}

    Mat<S> forward(const Mat<S>& x) {
        xs_.push_back(x);
        if (kind_ == Act::ReLU) return x.cwiseMax(S(0));
        return x.unaryExpr([](S v) {
            return v > S(0) ? S(kLambda) * v : S(kLambda * kAlpha) * (std::exp(v) - S(1));
        });
    }

    Mat<S> backward(const Mat<S>& dy) {
        assert(!xs_.empty());
        const Mat<S> x = std::move(xs_.back());
        xs_.pop_back();
        if (kind_ == Act::ReLU)
            return (x.array() > S(0)).template cast<S>() * dy.array();
        const Mat<S> d = x.unaryExpr([](S v) {
            return v > S(0) ? S(kLambda) : S(kLambda * kAlpha) * std::exp(v);
        });
        return d.array() * dy.array();
    }

    void clear_cache() { xs_.clear(); }

    // self-normalizing activation constants
    static constexpr double kAlpha = 1.6732632423543772848170429916717;
    static constexpr double kLambda = 1.0507009873554804934193349852946;

private:
    Act kind_ = Act::ReLU;
    std::vector<Mat<S>> xs_;
};

template <class S>
class Dropout {
public:
    Dropout() = default;
    explicit Dropout(double rate) : rate_(rate) {
        if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0,1)");
    }

    Mat<S> forward(const Mat<S>& x, bool training, Rng& rng) {
        if (!training || rate_ == 0.0) {
            masks_.push_back(Mat<S>());  // identity marker
            return x;
        }
        Mat<S> mask(x.rows(), x.cols());
        const S keep_scale = S(1.0 / (1.0 - rate_));
        for (Index r = 0; r < x.rows(); ++r)
            for (Index c = 0; c < x.cols(); ++c)
                mask(r, c) = rng.uniform() < rate_ ? S(0) : keep_scale;
        Mat<S> y = x.array() * mask.array();
        masks_.push_back(std::move(mask));
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        assert(!masks_.empty());
        const Mat<S> mask = std::move(masks_.back());
        masks_.pop_back();
        if (mask.size() == 0) return dy;
        return dy.array() * mask.array();
    }

    void clear_cache() { masks_.clear(); }
    double rate() const { return rate_; }

private:
    double rate_ = 0.0;
    std::vector<Mat<S>> masks_;
};

// Coordinatewise max over each sample's n points: (b*n)×c -> b×c.
// Ties route to the lowest point index (strict > while scanning upward).
template <class S>
class MaxPoolPoints {
public:
    Mat<S> forward(const Mat<S>& x, Index b, Index n) {
        if (x.rows() != b * n) shape_fail("max pool row count");
        Mat<S> y(b, x.cols());
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg(b, x.cols());
        for (Index s = 0; s < b; ++s) {
            for (Index c = 0; c < x.cols(); ++c) {
                S best = x(s * n, c);
                Index best_i = 0;
                for (Index i = 1; i < n; ++i) {
                    const S v = x(s * n + i, c);
                    if (v > best) {
                        best = v;
                        best_i = i;
                    }
                }
                y(s, c) = best;
                arg(s, c) = best_i;
            }
        }
        cache_.push_back({std::move(arg), n});
        return y;
    }

    Mat<S> backward(const Mat<S>& dy) {
        assert(!cache_.empty());
        const Cache c = std::move(cache_.back());
        cache_.pop_back();
        Mat<S> dx = Mat<S>::Zero(dy.rows() * c.n, dy.cols());
        for (Index s = 0; s < dy.rows(); ++s)
            for (Index j = 0; j < dy.cols(); ++j) dx(s * c.n + c.arg(s, j), j) += dy(s, j);
        return dx;
    }

    void clear_cache() { cache_.clear(); }

private:
    struct Cache {
        Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> arg;
        Index n;
    };
    std::vector<Cache> cache_;
};

// Applies a per-sample 3x3 transform to that sample's points:
// y = T_b * x for each point row of sample b. trans is b×9 row-major.
template <class S>
class PointsTransform {
public:
    Mat<S> forward(const Mat<S>& points, const Mat<S>& trans, Index b, Index n) {
        if (points.rows() != b * n || points.cols() != 3 || trans.rows() != b || trans.cols() != 9)
            shape_fail("points transform");
        Mat<S> y(points.rows(), 3);
        for (Index s = 0; s < b; ++s) {
            const Eigen::Map<const Eigen::Matrix<S, 3, 3, Eigen::RowMajor>> t(trans.row(s).data());
            y.middleRows(s * n, n).noalias() = points.middleRows(s * n, n) * t.transpose();
        }
        cache_.push_back({points, trans, n});
        return y;
    }

    // returns d(points); d(trans) goes to `dtrans`
    Mat<S> backward(const Mat<S>& dy, Mat<S>& dtrans) {
        assert(!cache_.empty());
        const Cache c = std::move(cache_.back());
        cache_.pop_back();
        const Index b = c.trans.rows();
        Mat<S> dx(dy.rows(), 3);
        dtrans.setZero(b, 9);
        for (Index s = 0; s < b; ++s) {
            const Eigen::Map<const Eigen::Matrix<S, 3, 3, Eigen::RowMajor>> t(c.trans.row(s).data());
            dx.middleRows(s * c.n, c.n).noalias() = dy.middleRows(s * c.n, c.n) * t;
            Eigen::Map<Eigen::Matrix<S, 3, 3, Eigen::RowMajor>> dt(dtrans.row(s).data());
            dt.noalias() =
                dy.middleRows(s * c.n, c.n).transpose() * c.points.middleRows(s * c.n, c.n);
        }
        return dx;
    }

    void clear_cache() { cache_.clear(); }

private:
    struct Cache {
        Mat<S> points, trans;
        Index n;
    };
    std::vector<Cache> cache_;
};

// ---------------------------------------------------------------------------
// Architecture description

struct ArchVariant {
    double dropout = 0.0;  // 0 = off; placed on the classifier's second FC layer
    bool reduced = false;
    bool selu = false;
};

// Table-style variant names: NONE, D, R, R+D, SELU.
ArchVariant variant_from_name(const std::string& name);
std::string variant_name(const ArchVariant& v);

struct ArchDescriptor {
    std::array<int, 3> stn_mlp{64, 128, 256};
    std::array<int, 2> stn_fc{128, 64};
    std::array<int, 3> feat_mlp{64, 128, 1024};
    std::array<int, 2> cls_fc{512, 256};
    int num_classes = 10;
    double dropout = 0.0;
    bool selu = false;  // SELU activations everywhere, batch norm disabled

    int feature_width() const { return feat_mlp[2]; }
    bool operator==(const ArchDescriptor&) const = default;
};

// reduced=true divides every width by 4.
ArchDescriptor make_variant(const ArchVariant& v);
// Uniform width divisor on the full architecture (tiny test/desk nets).
ArchDescriptor scaled_descriptor(int divisor, const ArchVariant& v = {});

// ---------------------------------------------------------------------------
// Blocks

// Linear optionally followed by batch norm and an activation.
template <class S>
class MlpLayer {
public:
    MlpLayer() = default;
    MlpLayer(Index in, Index out, bool use_bn, bool use_act, Act act, Rng& rng)
        : linear_(in, out, rng, act == Act::SELU ? Init::LecunNormal : Init::KaimingUniform),
          bn_(use_bn ? BatchNorm<S>(out) : BatchNorm<S>()),
          act_(act),
          use_bn_(use_bn),
          use_act_(use_act) {}

    Mat<S> forward(const Mat<S>& x, bool training) {
        Mat<S> y = linear_.forward(x);
        if (use_bn_) y = bn_.forward(y, training);
        if (use_act_) y = act_.forward(y);
        return y;
    }
    Mat<S> backward(const Mat<S>& dy) {
        Mat<S> d = dy;
        if (use_act_) d = act_.backward(d);
        if (use_bn_) d = bn_.backward(d);
        return linear_.backward(d);
    }
    void visit(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        linear_.visit(prefix + ".linear", out);
        if (use_bn_) bn_.visit(prefix + ".bn", out);
    }
    void visit_state(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        if (use_bn_) bn_.visit_state(prefix + ".bn", out);
    }
    void zero_grad() {
        linear_.zero_grad();
        if (use_bn_) bn_.zero_grad();
    }
    void clear_cache() {
        linear_.clear_cache();
        if (use_bn_) bn_.clear_cache();
        act_.clear_cache();
    }

    const Linear<S>& linear() const { return linear_; }
    const BatchNorm<S>& bn() const { return bn_; }
    bool has_bn() const { return use_bn_; }
    bool has_act() const { return use_act_; }

private:
    Linear<S> linear_;
    BatchNorm<S> bn_;
    Activation<S> act_;
    bool use_bn_ = false;
    bool use_act_ = false;
};

// Per-sample 3x3 alignment transform: shared per-point MLP, max pool,
// FC stack, and a zero-initialized head so a fresh network outputs the
// identity exactly.
template <class S>
class Stn3d {
public:
    Stn3d() = default;
    Stn3d(const ArchDescriptor& d, Rng& rng) {
        const bool bn = !d.selu;
        const Act act = d.selu ? Act::SELU : Act::ReLU;
        Index in = 3;
        for (int w : d.stn_mlp) {
            mlp_.emplace_back(in, w, bn, true, act, rng);
            in = w;
        }
        for (int w : d.stn_fc) {
            fc_.emplace_back(in, w, bn, true, act, rng);
            in = w;
        }
        out_ = Linear<S>(in, 9, rng, Init::Zero);
    }

    // points: (b*n)×3  ->  transforms b×9 (identity + learned residual)
    Mat<S> forward(const Mat<S>& points, Index b, Index n, bool training) {
        if (points.rows() != b * n || points.cols() != 3) shape_fail("stn3d input");
        Mat<S> x = points;
        for (auto& layer : mlp_) x = layer.forward(x, training);
        x = pool_.forward(x, b, n);
        for (auto& layer : fc_) x = layer.forward(x, training);
        x = out_.forward(x);
        x.col(0).array() += S(1);
        x.col(4).array() += S(1);
        x.col(8).array() += S(1);
        return x;
    }

    Mat<S> backward(const Mat<S>& dtrans) {
        Mat<S> d = out_.backward(dtrans);
        for (auto it = fc_.rbegin(); it != fc_.rend(); ++it) d = it->backward(d);
        d = pool_.backward(d);
        for (auto it = mlp_.rbegin(); it != mlp_.rend(); ++it) d = it->backward(d);
        return d;
    }

    void visit(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        for (std::size_t i = 0; i < mlp_.size(); ++i)
            mlp_[i].visit(prefix + ".mlp" + std::to_string(i), out);
        for (std::size_t i = 0; i < fc_.size(); ++i)
            fc_[i].visit(prefix + ".fc" + std::to_string(i), out);
        out_.visit(prefix + ".out", out);
    }
    void visit_state(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        for (std::size_t i = 0; i < mlp_.size(); ++i)
            mlp_[i].visit_state(prefix + ".mlp" + std::to_string(i), out);
        for (std::size_t i = 0; i < fc_.size(); ++i)
            fc_[i].visit_state(prefix + ".fc" + std::to_string(i), out);
    }
    void zero_grad() {
        for (auto& l : mlp_) l.zero_grad();
        for (auto& l : fc_) l.zero_grad();
        out_.zero_grad();
    }
    void clear_cache() {
        for (auto& l : mlp_) l.clear_cache();
        for (auto& l : fc_) l.clear_cache();
        pool_.clear_cache();
        out_.clear_cache();
    }

    const std::vector<MlpLayer<S>>& mlp() const { return mlp_; }
    const std::vector<MlpLayer<S>>& fc() const { return fc_; }
    const Linear<S>& head() const { return out_; }

private:
    std::vector<MlpLayer<S>> mlp_;
    MaxPoolPoints<S> pool_;
    std::vector<MlpLayer<S>> fc_;
    Linear<S> out_;
};

// Shared per-point MLP followed by a coordinatewise max over the points.
// The last layer keeps batch norm but no activation before the pool
// (plain linear in the SELU variant).
template <class S>
class Feat {
public:
    Feat() = default;
    Feat(const ArchDescriptor& d, Rng& rng) {
        const bool bn = !d.selu;
        const Act act = d.selu ? Act::SELU : Act::ReLU;
        Index in = 3;
        for (std::size_t i = 0; i < d.feat_mlp.size(); ++i) {
            const bool last = i + 1 == d.feat_mlp.size();
            mlp_.emplace_back(in, d.feat_mlp[i], bn, !last, act, rng);
            in = d.feat_mlp[i];
        }
        width_ = in;
    }

    // transformed points: (b*n)×3  ->  global feature b×f
    Mat<S> forward(const Mat<S>& points, Index b, Index n, bool training) {
        if (points.rows() != b * n || points.cols() != 3) shape_fail("feat input");
        Mat<S> x = points;
        for (auto& layer : mlp_) x = layer.forward(x, training);
        return pool_.forward(x, b, n);
    }

    Mat<S> backward(const Mat<S>& dfeature) {
        Mat<S> d = pool_.backward(dfeature);
        for (auto it = mlp_.rbegin(); it != mlp_.rend(); ++it) d = it->backward(d);
        return d;
    }

    void visit(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        for (std::size_t i = 0; i < mlp_.size(); ++i)
            mlp_[i].visit(prefix + ".mlp" + std::to_string(i), out);
    }
    void visit_state(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        for (std::size_t i = 0; i < mlp_.size(); ++i)
            mlp_[i].visit_state(prefix + ".mlp" + std::to_string(i), out);
    }
    void zero_grad() {
        for (auto& l : mlp_) l.zero_grad();
    }
    void clear_cache() {
        for (auto& l : mlp_) l.clear_cache();
        pool_.clear_cache();
    }

    Index feature_width() const { return width_; }
    const std::vector<MlpLayer<S>>& mlp() const { return mlp_; }

private:
    std::vector<MlpLayer<S>> mlp_;
    MaxPoolPoints<S> pool_;
    Index width_ = 0;
};

// Fully connected head; dropout sits after the second FC layer's
// activation, active only in training mode.
template <class S>
class Cls {
public:
    Cls() = default;
    Cls(Index in_width, const ArchDescriptor& d, Rng& rng)
        : fc1_(in_width, d.cls_fc[0], !d.selu, true, d.selu ? Act::SELU : Act::ReLU, rng),
          fc2_(d.cls_fc[0], d.cls_fc[1], !d.selu, true, d.selu ? Act::SELU : Act::ReLU, rng),
          dropout_(d.dropout),
          out_(d.cls_fc[1], d.num_classes, rng, Init::SmallUniform) {}

    Mat<S> forward(const Mat<S>& feature, bool training, Rng& rng) {
        Mat<S> x = fc1_.forward(feature, training);
        x = fc2_.forward(x, training);
        x = dropout_.forward(x, training, rng);
        return out_.forward(x);
    }

    Mat<S> backward(const Mat<S>& dlogits) {
        Mat<S> d = out_.backward(dlogits);
        d = dropout_.backward(d);
        d = fc2_.backward(d);
        return fc1_.backward(d);
    }

    void visit(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        fc1_.visit(prefix + ".fc1", out);
        fc2_.visit(prefix + ".fc2", out);
        out_.visit(prefix + ".out", out);
    }
    void visit_state(const std::string& prefix, std::vector<ParamRef<S>>& out) {
        fc1_.visit_state(prefix + ".fc1", out);
        fc2_.visit_state(prefix + ".fc2", out);
    }
    void zero_grad() {
        fc1_.zero_grad();
        fc2_.zero_grad();
        out_.zero_grad();
    }
    void clear_cache() {
        fc1_.clear_cache();
        fc2_.clear_cache();
        dropout_.clear_cache();
        out_.clear_cache();
    }

    const MlpLayer<S>& fc1() const { return fc1_; }
    const MlpLayer<S>& fc2() const { return fc2_; }
    const Linear<S>& head() const { return out_; }
    Index in_width() const { return fc1_.linear().in_width(); }

private:
    MlpLayer<S> fc1_, fc2_;
    Dropout<S> dropout_;
    Linear<S> out_;
};

// ---------------------------------------------------------------------------

template <class S>
Mat<S> softmax_rows(const Mat<S>& logits) {
    Mat<S> p(logits.rows(), logits.cols());
    for (Index r = 0; r < logits.rows(); ++r) {
        const S mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

// Spec'd op wrappers over the blocks (eval-style entry points; shape
// checked, caches cleared afterwards).
template <class S>
Tensor<S> stn3d_forward(Stn3d<S>& stn, const Tensor<S>& batch, bool training = false) {
    if (batch.shape.size() != 3 || batch.shape[2] != 3 || batch.shape[1] < 1)
        shape_fail("stn3d_forward expects [b, n, 3]");
    const Index b = batch.shape[0], n = batch.shape[1];
    const Mat<S> pts = batch.as2d(b * n, 3);
    Mat<S> t = stn.forward(pts, b, n, training);
    stn.clear_cache();
    Tensor<S> out({b, 3, 3});
    Eigen::Map<Mat<S>>(out.data.data(), b, 9) = t;
    return out;
}

template <class S>
Tensor<S> feat_forward(Feat<S>& feat, const Tensor<S>& batch, bool training = false) {
    if (batch.shape.size() != 3 || batch.shape[2] != 3 || batch.shape[1] < 1)
        shape_fail("feat_forward expects [b, n, 3]");
    const Index b = batch.shape[0], n = batch.shape[1];
    const Mat<S> pts = batch.as2d(b * n, 3);
    Mat<S> f = feat.forward(pts, b, n, training);
    feat.clear_cache();
    Tensor<S> out({b, feat.feature_width()});
    Eigen::Map<Mat<S>>(out.data.data(), b, feat.feature_width()) = f;
    return out;
}

template <class S>
Tensor<S> cls_forward(Cls<S>& cls, const Tensor<S>& feature, bool training, Rng& rng) {
    if (feature.shape.size() != 2 || feature.shape[1] != cls.in_width())
        shape_fail("cls_forward feature width");
    const Index b = feature.shape[0];
    const Mat<S> f = feature.as2d(b, feature.shape[1]);
    Mat<S> logits = cls.forward(f, training, rng);
    cls.clear_cache();
    Tensor<S> out({b, logits.cols()});
    Eigen::Map<Mat<S>>(out.data.data(), b, logits.cols()) = logits;
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoint blob: magic, version, descriptor json, float32 payload, fnv64.

void save_checkpoint_blob(const std::string& path, const std::string& descriptor_json,
                          const std::vector<float>& payload);
// Verifies magic/version/checksum; returns descriptor and payload.
std::pair<std::string, std::vector<float>> load_checkpoint_blob(const std::string& path);

template <class S>
std::vector<float> flatten_params(const std::vector<ParamRef<S>>& params) {
    std::vector<float> out;
    for (const auto& p : params)
        for (Index i = 0; i < p.size; ++i) out.push_back(float(p.value[i]));
    return out;
}

template <class S>
void unflatten_params(const std::vector<float>& payload, const std::vector<ParamRef<S>>& params) {
    std::size_t total = 0;
    for (const auto& p : params) total += std::size_t(p.size);
    if (total != payload.size()) throw std::runtime_error("descriptor mismatch: parameter count");
    std::size_t k = 0;
    for (const auto& p : params)
        for (Index i = 0; i < p.size; ++i) p.value[i] = S(payload[k++]);
}

}  // namespace duodepth::nn
