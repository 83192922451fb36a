#pragma once

// Naive evaluation oracle shared by the nn and pipelines suites: plain
// double loops over the layer parameters in eval mode (running batch-norm
// statistics). Kept independent of the Eigen forward path on purpose.

#include "duodepth/nn.hpp"
#include "duodepth/pipelines.hpp"

namespace naive {

using duodepth::PointCloud;
using duodepth::Classifier;
using duodepth::TopologyKind;
using nn_Index = duodepth::nn::Index;
namespace nn = duodepth::nn;
using Index = nn::Index;

template <class S>
std::vector<double> naive_mlp_layer(const nn::MlpLayer<S>& layer, const std::vector<double>& x) {
    const auto& w = layer.linear().weight();
    const auto& b = layer.linear().bias();
    std::vector<double> y(std::size_t(w.rows()), 0.0);
    for (Index o = 0; o < w.rows(); ++o) {
        double acc = double(b[o]);
        for (Index i = 0; i < w.cols(); ++i) acc += double(w(o, i)) * x[std::size_t(i)];
        y[std::size_t(o)] = acc;
    }
    if (layer.has_bn()) {
        const auto& bn = layer.bn();
        for (Index o = 0; o < w.rows(); ++o) {
            const double inv =
                1.0 / std::sqrt(double(bn.running_var()[o]) + nn::BatchNorm<S>::kEps);
            y[std::size_t(o)] = (y[std::size_t(o)] - double(bn.running_mean()[o])) * inv *
                                    double(bn.gamma()[o]) +
                                double(bn.beta()[o]);
        }
    }
    if (layer.has_act()) {
        // batch-norm nets use relu, batch-norm-free nets use selu
        for (auto& v : y) {
            if (layer.has_bn()) {
                v = std::max(v, 0.0);
            } else {
                constexpr double a = nn::Activation<S>::kAlpha;
                constexpr double l = nn::Activation<S>::kLambda;
                v = v > 0 ? l * v : l * a * (std::exp(v) - 1.0);
            }
        }
    }
    return y;
}

template <class S>
std::vector<double> naive_linear(const nn::Linear<S>& lin, const std::vector<double>& x) {
    std::vector<double> y(std::size_t(lin.out_width()), 0.0);
    for (Index o = 0; o < lin.out_width(); ++o) {
        double acc = double(lin.bias()[o]);
        for (Index i = 0; i < lin.in_width(); ++i)
            acc += double(lin.weight()(o, i)) * x[std::size_t(i)];
        y[std::size_t(o)] = acc;
    }
    return y;
}

// per-point mlp stack + coordinatewise max over points
template <class S>
std::vector<double> naive_point_stack_pool(const std::vector<nn::MlpLayer<S>>& layers,
                                           const std::vector<std::vector<double>>& points) {
    std::vector<double> pooled;
    for (std::size_t n = 0; n < points.size(); ++n) {
        std::vector<double> v = points[n];
        for (const auto& layer : layers) v = naive_mlp_layer(layer, v);
        if (n == 0) {
            pooled = v;
        } else {
            for (std::size_t i = 0; i < v.size(); ++i) pooled[i] = std::max(pooled[i], v[i]);
        }
    }
    return pooled;
}

template <class S>
std::array<std::array<double, 3>, 3> naive_stn(const nn::Stn3d<S>& stn,
                                               const std::vector<std::vector<double>>& points) {
    std::vector<double> v = naive_point_stack_pool(stn.mlp(), points);
    for (const auto& layer : stn.fc()) v = naive_mlp_layer(layer, v);
    v = naive_linear(stn.head(), v);
    std::array<std::array<double, 3>, 3> t{};
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) t[std::size_t(r)][std::size_t(c)] = v[std::size_t(3 * r + c)];
    for (int d = 0; d < 3; ++d) t[std::size_t(d)][std::size_t(d)] += 1.0;
    return t;
}

template <class S>
std::vector<double> naive_single_branch_feature(const nn::Stn3d<S>& stn, const nn::Feat<S>& feat,
                                                const std::vector<std::vector<double>>& points) {
    const auto t = naive_stn(stn, points);
    std::vector<std::vector<double>> aligned(points.size(), std::vector<double>(3, 0.0));
    for (std::size_t n = 0; n < points.size(); ++n)
        for (int r = 0; r < 3; ++r)
            for (int c = 0; c < 3; ++c)
                aligned[n][std::size_t(r)] +=
                    t[std::size_t(r)][std::size_t(c)] * points[n][std::size_t(c)];
    return naive_point_stack_pool(feat.mlp(), aligned);
}

template <class S>
std::array<double, 10> naive_cls_probs(const nn::Cls<S>& cls, std::vector<double> feature) {
    std::vector<double> v = naive_mlp_layer(cls.fc1(), feature);
    v = naive_mlp_layer(cls.fc2(), v);
    v = naive_linear(cls.head(), v);  // dropout is inert in eval mode
    double mx = v[0];
    for (double x : v) mx = std::max(mx, x);
    double sum = 0;
    for (double x : v) sum += std::exp(x - mx);
    std::array<double, 10> probs{};
    for (std::size_t i = 0; i < v.size(); ++i) probs[i] = std::exp(v[i] - mx) / sum;
    return probs;
}

std::vector<std::vector<double>> to_point_list(const PointCloud& cloud) {
    std::vector<std::vector<double>> out;
    for (const auto& p : cloud.points) out.push_back({p.x(), p.y(), p.z()});
    return out;
}

// eval-mode probabilities through the naive path for any topology
template <class S>
std::array<double, 10> naive_probabilities(Classifier<S>& model, const PointCloud& a,
                                           const PointCloud& b) {
    switch (model.kind()) {
        case TopologyKind::LeftOnly:
        case TopologyKind::RightOnly:
        case TopologyKind::Fused:
            return naive_cls_probs(
                model.cls(),
                naive_single_branch_feature(model.stn(0), model.feat(0), to_point_list(a)));
        case TopologyKind::DualFeat: {
            const auto t1 = naive_stn(model.stn(0), to_point_list(a));
            const auto t2 = naive_stn(model.stn(1), to_point_list(b));
            std::vector<std::vector<double>> merged;
            auto apply = [&](const std::array<std::array<double, 3>, 3>& t,
                             const PointCloud& cloud) {
                for (const auto& p : cloud.points) {
                    std::vector<double> v(3, 0.0);
                    for (int r = 0; r < 3; ++r)
                        v[std::size_t(r)] = t[std::size_t(r)][0] * p.x() +
                                            t[std::size_t(r)][1] * p.y() +
                                            t[std::size_t(r)][2] * p.z();
                    merged.push_back(v);
                }
            };
            apply(t1, a);
            apply(t2, b);
            return naive_cls_probs(model.cls(),
                                   naive_point_stack_pool(model.feat(0).mlp(), merged));
        }
        case TopologyKind::SoloFeat: {
            auto f1 = naive_single_branch_feature(model.stn(0), model.feat(0), to_point_list(a));
            const auto f2 =
                naive_single_branch_feature(model.stn(1), model.feat(1), to_point_list(b));
            f1.insert(f1.end(), f2.begin(), f2.end());
            return naive_cls_probs(model.cls(), f1);
        }
    }
    return {};
}


}  // namespace naive
