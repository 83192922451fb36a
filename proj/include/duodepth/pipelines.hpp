#pragma once

#include <array>
#include <optional>
#include <string>

#include "duodepth/geom.hpp"
#include "duodepth/nn.hpp"

namespace duodepth {

enum class TopologyKind : int { LeftOnly = 0, RightOnly, Fused, DualFeat, SoloFeat };

const std::string& topology_name(TopologyKind k);
TopologyKind topology_from_name(const std::string& s);
inline bool topology_dual_input(TopologyKind k) {
    return k == TopologyKind::DualFeat || k == TopologyKind::SoloFeat;
}

// One classification step's worth of points. Single-input topologies use
// pts1 only; dual topologies feed the left view through pts1 and the
// right view through pts2. Rows are per-sample blocks of n points.
template <class S>
struct BatchInput {
    nn::Mat<S> pts1;  // (b*n1) x 3
    nn::Mat<S> pts2;  // (b*n2) x 3
    nn::Index b = 0;
    nn::Index n1 = 0;
    nn::Index n2 = 0;
};

// A full classification topology: one or two STN3D branches, one or two
// feature extractors, and a classifier head. The branch components of the
// dual topologies use independent parameters unless share_branches is set.
template <class S>
class Classifier {
public:
    Classifier(TopologyKind kind, const nn::ArchDescriptor& desc, std::uint64_t init_seed,
               bool share_branches = false);

    TopologyKind kind() const { return kind_; }
    const nn::ArchDescriptor& descriptor() const { return desc_; }
    bool dual_input() const { return topology_dual_input(kind_); }
    bool branches_shared() const { return share_; }

    // logits, b x num_classes
    nn::Mat<S> forward(const BatchInput<S>& in, bool training);
    // accumulates parameter gradients; throws "no recorded pass" when no
    // forward is pending
    void backward(const nn::Mat<S>& dlogits);

    std::vector<nn::ParamRef<S>> params();
    std::vector<nn::ParamRef<S>> state();  // batch-norm running statistics
    void zero_grad();
    void clear_caches();
    void reseed_dropout(std::uint64_t seed) { dropout_rng_ = Rng(seed); }

    void save(const std::string& path);
    static Classifier load(const std::string& path);
    // load that rejects any deviation from the expected descriptor
    static Classifier load_expect(const std::string& path, TopologyKind kind,
                                  const nn::ArchDescriptor& desc, bool share_branches);

    // component access for test oracles
    const nn::Stn3d<S>& stn(int branch = 0) const;
    const nn::Feat<S>& feat(int branch = 0) const;
    const nn::Cls<S>& cls() const { return cls_; }

private:
    TopologyKind kind_;
    nn::ArchDescriptor desc_;
    bool share_ = false;

    nn::Stn3d<S> stn1_;
    std::optional<nn::Stn3d<S>> stn2_;
    nn::Feat<S> feat1_;
    std::optional<nn::Feat<S>> feat2_;
    nn::Cls<S> cls_;
    nn::PointsTransform<S> apply_;
    Rng dropout_rng_{0};

    struct FwdShape {
        nn::Index b, n1, n2;
    };
    std::vector<FwdShape> pending_;

    nn::Stn3d<S>& branch_stn(int branch);
    nn::Feat<S>& branch_feat(int branch);
};

std::string checkpoint_descriptor_json(TopologyKind kind, const nn::ArchDescriptor& d,
                                       bool share_branches);

// Class-probability entry points (eval mode, softmax over logits).
// Inputs are expected already cropped, downsampled and normalized.
template <class S>
std::array<double, 10> classify_fused(const PointCloud& fused_cloud, Classifier<S>& topo);
template <class S>
std::array<double, 10> classify_single(const PointCloud& cloud, Classifier<S>& topo);
template <class S>
std::array<double, 10> classify_dual_feat(const PointCloud& left, const PointCloud& right,
                                          Classifier<S>& topo);
template <class S>
std::array<double, 10> classify_solo_feat(const PointCloud& left, const PointCloud& right,
                                          Classifier<S>& topo);

// cloud -> (n x 3) row block, helper shared with the training harness
template <class S>
nn::Mat<S> points_matrix(const PointCloud& cloud);

extern template class Classifier<float>;
extern template class Classifier<double>;

}  // namespace duodepth
