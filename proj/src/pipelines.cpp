#include "duodepth/pipelines.hpp"

#include <json.hpp>

namespace duodepth {

namespace {
const std::array<std::string, 5> kTopologyNames = {"LeftOnly", "RightOnly", "Fused", "DualFeat",
                                                   "SoloFeat"};

template <class S>
nn::Mat<S> concat_point_blocks(const nn::Mat<S>& a, const nn::Mat<S>& b, nn::Index batch,
                               nn::Index na, nn::Index nb) {
    nn::Mat<S> out(batch * (na + nb), 3);
    for (nn::Index s = 0; s < batch; ++s) {
        out.middleRows(s * (na + nb), na) = a.middleRows(s * na, na);
        out.middleRows(s * (na + nb) + na, nb) = b.middleRows(s * nb, nb);
    }
    return out;
}

template <class S>
void split_point_blocks(const nn::Mat<S>& merged, nn::Index batch, nn::Index na, nn::Index nb,
                        nn::Mat<S>& da, nn::Mat<S>& db) {
    da.resize(batch * na, 3);
    db.resize(batch * nb, 3);
    for (nn::Index s = 0; s < batch; ++s) {
        da.middleRows(s * na, na) = merged.middleRows(s * (na + nb), na);
        db.middleRows(s * nb, nb) = merged.middleRows(s * (na + nb) + na, nb);
    }
}
}  // namespace

const std::string& topology_name(TopologyKind k) { return kTopologyNames[int(k)]; }

TopologyKind topology_from_name(const std::string& s) {
    for (int i = 0; i < int(kTopologyNames.size()); ++i)
        if (kTopologyNames[std::size_t(i)] == s) return TopologyKind(i);
    throw std::invalid_argument("unknown topology \"" + s + "\"");
}

template <class S>
Classifier<S>::Classifier(TopologyKind kind, const nn::ArchDescriptor& desc,
                          std::uint64_t init_seed, bool share_branches)
    : kind_(kind), desc_(desc), share_(share_branches), dropout_rng_(mix_seed(init_seed, 0x9d)) {
    Rng rng(init_seed);
    stn1_ = nn::Stn3d<S>(desc, rng);
    const bool dual = topology_dual_input(kind);
    if (dual && !share_) stn2_.emplace(desc, rng);
    feat1_ = nn::Feat<S>(desc, rng);
    if (kind == TopologyKind::SoloFeat && !share_) feat2_.emplace(desc, rng);
    const nn::Index cls_in =
        kind == TopologyKind::SoloFeat ? 2 * desc.feature_width() : desc.feature_width();
    cls_ = nn::Cls<S>(cls_in, desc, rng);
}

template <class S>
nn::Stn3d<S>& Classifier<S>::branch_stn(int branch) {
    if (branch == 0 || share_ || !stn2_) return stn1_;
    return *stn2_;
}

template <class S>
nn::Feat<S>& Classifier<S>::branch_feat(int branch) {
    if (branch == 0 || share_ || !feat2_) return feat1_;
    return *feat2_;
}

template <class S>
const nn::Stn3d<S>& Classifier<S>::stn(int branch) const {
    return (branch == 0 || share_ || !stn2_) ? stn1_ : *stn2_;
}

template <class S>
const nn::Feat<S>& Classifier<S>::feat(int branch) const {
    return (branch == 0 || share_ || !feat2_) ? feat1_ : *feat2_;
}

template <class S>
nn::Mat<S> Classifier<S>::forward(const BatchInput<S>& in, bool training) {
    if (in.b < 1 || in.n1 < 1 || in.pts1.rows() != in.b * in.n1 || in.pts1.cols() != 3)
        nn::shape_fail("classifier input 1");
    if (dual_input() &&
        (in.n2 < 1 || in.pts2.rows() != in.b * in.n2 || in.pts2.cols() != 3))
        nn::shape_fail("classifier input 2");

    nn::Mat<S> logits;
    switch (kind_) {
        case TopologyKind::LeftOnly:
        case TopologyKind::RightOnly:
        case TopologyKind::Fused: {
            nn::Mat<S> trans = stn1_.forward(in.pts1, in.b, in.n1, training);
            nn::Mat<S> aligned = apply_.forward(in.pts1, trans, in.b, in.n1);
            nn::Mat<S> feature = feat1_.forward(aligned, in.b, in.n1, training);
            logits = cls_.forward(feature, training, dropout_rng_);
            break;
        }
        case TopologyKind::DualFeat: {
            nn::Mat<S> t1 = stn1_.forward(in.pts1, in.b, in.n1, training);
            nn::Mat<S> a1 = apply_.forward(in.pts1, t1, in.b, in.n1);
            nn::Mat<S> t2 = branch_stn(1).forward(in.pts2, in.b, in.n2, training);
            nn::Mat<S> a2 = apply_.forward(in.pts2, t2, in.b, in.n2);
            nn::Mat<S> merged = concat_point_blocks(a1, a2, in.b, in.n1, in.n2);
            nn::Mat<S> feature = feat1_.forward(merged, in.b, in.n1 + in.n2, training);
            logits = cls_.forward(feature, training, dropout_rng_);
            break;
        }
        case TopologyKind::SoloFeat: {
            nn::Mat<S> t1 = stn1_.forward(in.pts1, in.b, in.n1, training);
            nn::Mat<S> a1 = apply_.forward(in.pts1, t1, in.b, in.n1);
            nn::Mat<S> f1 = feat1_.forward(a1, in.b, in.n1, training);
            nn::Mat<S> t2 = branch_stn(1).forward(in.pts2, in.b, in.n2, training);
            nn::Mat<S> a2 = apply_.forward(in.pts2, t2, in.b, in.n2);
            nn::Mat<S> f2 = branch_feat(1).forward(a2, in.b, in.n2, training);
            nn::Mat<S> feature(in.b, f1.cols() + f2.cols());  // left features first
            feature << f1, f2;
            logits = cls_.forward(feature, training, dropout_rng_);
            break;
        }
    }
    pending_.push_back({in.b, in.n1, in.n2});
    return logits;
}

template <class S>
void Classifier<S>::backward(const nn::Mat<S>& dlogits) {
    if (pending_.empty()) throw std::runtime_error("no recorded pass");
    const FwdShape shape = pending_.back();
    pending_.pop_back();

    nn::Mat<S> dfeature = cls_.backward(dlogits);
    switch (kind_) {
        case TopologyKind::LeftOnly:
        case TopologyKind::RightOnly:
        case TopologyKind::Fused: {
            nn::Mat<S> daligned = feat1_.backward(dfeature);
            nn::Mat<S> dtrans;
            nn::Mat<S> dpts = apply_.backward(daligned, dtrans);
            stn1_.backward(dtrans);
            break;
        }
        case TopologyKind::DualFeat: {
            nn::Mat<S> dmerged = feat1_.backward(dfeature);
            nn::Mat<S> da1, da2;
            split_point_blocks(dmerged, shape.b, shape.n1, shape.n2, da1, da2);
            nn::Mat<S> dt2;
            apply_.backward(da2, dt2);
            branch_stn(1).backward(dt2);
            nn::Mat<S> dt1;
            apply_.backward(da1, dt1);
            stn1_.backward(dt1);
            break;
        }
        case TopologyKind::SoloFeat: {
            const nn::Index f = desc_.feature_width();
            nn::Mat<S> df1 = dfeature.leftCols(f);
            nn::Mat<S> df2 = dfeature.rightCols(f);
            nn::Mat<S> da2 = branch_feat(1).backward(df2);
            nn::Mat<S> dt2;
            apply_.backward(da2, dt2);
            branch_stn(1).backward(dt2);
            nn::Mat<S> da1 = feat1_.backward(df1);
            nn::Mat<S> dt1;
            apply_.backward(da1, dt1);
            stn1_.backward(dt1);
            break;
        }
    }
}

template <class S>
std::vector<nn::ParamRef<S>> Classifier<S>::params() {
    std::vector<nn::ParamRef<S>> out;
    stn1_.visit("stn1", out);
    if (stn2_) stn2_->visit("stn2", out);
    feat1_.visit("feat1", out);
    if (feat2_) feat2_->visit("feat2", out);
    cls_.visit("cls", out);
    return out;
}

template <class S>
std::vector<nn::ParamRef<S>> Classifier<S>::state() {
    std::vector<nn::ParamRef<S>> out;
    stn1_.visit_state("stn1", out);
    if (stn2_) stn2_->visit_state("stn2", out);
    feat1_.visit_state("feat1", out);
    if (feat2_) feat2_->visit_state("feat2", out);
    cls_.visit_state("cls", out);
    return out;
}

template <class S>
void Classifier<S>::zero_grad() {
    stn1_.zero_grad();
    if (stn2_) stn2_->zero_grad();
    feat1_.zero_grad();
    if (feat2_) feat2_->zero_grad();
    cls_.zero_grad();
}

template <class S>
void Classifier<S>::clear_caches() {
    stn1_.clear_cache();
    if (stn2_) stn2_->clear_cache();
    feat1_.clear_cache();
    if (feat2_) feat2_->clear_cache();
    cls_.clear_cache();
    apply_.clear_cache();
    pending_.clear();
}

std::string checkpoint_descriptor_json(TopologyKind kind, const nn::ArchDescriptor& d,
                                       bool share_branches) {
    nlohmann::ordered_json j;
    j["format"] = "duodepth-checkpoint";
    j["topology"] = topology_name(kind);
    j["share_branches"] = share_branches;
    j["arch"] = {{"stn_mlp", d.stn_mlp},   {"stn_fc", d.stn_fc},
                 {"feat_mlp", d.feat_mlp}, {"cls_fc", d.cls_fc},
                 {"num_classes", d.num_classes}, {"dropout", d.dropout},
                 {"selu", d.selu}};
    return j.dump();
}

namespace {
std::tuple<TopologyKind, nn::ArchDescriptor, bool> parse_descriptor(const std::string& json) {
    const auto j = nlohmann::json::parse(json);
    if (j.value("format", "") != "duodepth-checkpoint")
        throw std::runtime_error("checkpoint corrupted: unknown descriptor format");
    nn::ArchDescriptor d;
    const auto& a = j.at("arch");
    a.at("stn_mlp").get_to(d.stn_mlp);
    a.at("stn_fc").get_to(d.stn_fc);
    a.at("feat_mlp").get_to(d.feat_mlp);
    a.at("cls_fc").get_to(d.cls_fc);
    d.num_classes = a.at("num_classes").get<int>();
    d.dropout = a.at("dropout").get<double>();
    d.selu = a.at("selu").get<bool>();
    return {topology_from_name(j.at("topology").get<std::string>()), d,
            j.at("share_branches").get<bool>()};
}
}  // namespace

template <class S>
void Classifier<S>::save(const std::string& path) {
    auto refs = params();
    auto st = state();
    refs.insert(refs.end(), st.begin(), st.end());
    nn::save_checkpoint_blob(path, checkpoint_descriptor_json(kind_, desc_, share_),
                             nn::flatten_params(refs));
}

template <class S>
Classifier<S> Classifier<S>::load(const std::string& path) {
    const auto [descriptor, payload] = nn::load_checkpoint_blob(path);
    const auto [kind, desc, share] = parse_descriptor(descriptor);
    Classifier<S> c(kind, desc, 0, share);
    auto refs = c.params();
    auto st = c.state();
    refs.insert(refs.end(), st.begin(), st.end());
    nn::unflatten_params(payload, refs);
    return c;
}

template <class S>
Classifier<S> Classifier<S>::load_expect(const std::string& path, TopologyKind kind,
                                         const nn::ArchDescriptor& desc, bool share_branches) {
    const auto [descriptor, payload] = nn::load_checkpoint_blob(path);
    if (descriptor != checkpoint_descriptor_json(kind, desc, share_branches))
        throw std::runtime_error("descriptor mismatch");
    Classifier<S> c(kind, desc, 0, share_branches);
    auto refs = c.params();
    auto st = c.state();
    refs.insert(refs.end(), st.begin(), st.end());
    nn::unflatten_params(payload, refs);
    return c;
}

template <class S>
nn::Mat<S> points_matrix(const PointCloud& cloud) {
    nn::Mat<S> m(nn::Index(cloud.size()), 3);
    for (std::size_t i = 0; i < cloud.size(); ++i)
        for (int a = 0; a < 3; ++a) m(nn::Index(i), a) = S(cloud.points[i][a]);
    return m;
}

namespace {

template <class S>
std::array<double, 10> eval_probabilities(Classifier<S>& topo, const BatchInput<S>& in) {
    nn::Mat<S> logits = topo.forward(in, false);
    topo.clear_caches();
    const nn::Mat<S> p = nn::softmax_rows(logits);
    std::array<double, 10> out{};
    for (int i = 0; i < 10 && i < p.cols(); ++i) out[std::size_t(i)] = double(p(0, i));
    return out;
}

template <class S>
BatchInput<S> single_input(const PointCloud& cloud) {
    if (cloud.empty()) throw std::runtime_error("empty cloud");
    BatchInput<S> in;
    in.pts1 = points_matrix<S>(cloud);
    in.b = 1;
    in.n1 = nn::Index(cloud.size());
    return in;
}

template <class S>
BatchInput<S> dual_input_of(const PointCloud& left, const PointCloud& right) {
    if (left.empty() || right.empty()) throw std::runtime_error("empty cloud");
    BatchInput<S> in;
    in.pts1 = points_matrix<S>(left);
    in.pts2 = points_matrix<S>(right);
    in.b = 1;
    in.n1 = nn::Index(left.size());
    in.n2 = nn::Index(right.size());
    return in;
}

}  // namespace

template <class S>
std::array<double, 10> classify_fused(const PointCloud& fused_cloud, Classifier<S>& topo) {
    if (topo.kind() != TopologyKind::Fused) throw std::runtime_error("topology mismatch");
    return eval_probabilities(topo, single_input<S>(fused_cloud));
}

template <class S>
std::array<double, 10> classify_single(const PointCloud& cloud, Classifier<S>& topo) {
    if (topo.kind() != TopologyKind::LeftOnly && topo.kind() != TopologyKind::RightOnly)
        throw std::runtime_error("topology mismatch");
    return eval_probabilities(topo, single_input<S>(cloud));
}

template <class S>
std::array<double, 10> classify_dual_feat(const PointCloud& left, const PointCloud& right,
                                          Classifier<S>& topo) {
    if (topo.kind() != TopologyKind::DualFeat) throw std::runtime_error("topology mismatch");
    return eval_probabilities(topo, dual_input_of<S>(left, right));
}

template <class S>
std::array<double, 10> classify_solo_feat(const PointCloud& left, const PointCloud& right,
                                          Classifier<S>& topo) {
    if (topo.kind() != TopologyKind::SoloFeat) throw std::runtime_error("topology mismatch");
    return eval_probabilities(topo, dual_input_of<S>(left, right));
}

template class Classifier<float>;
template class Classifier<double>;
template nn::Mat<float> points_matrix<float>(const PointCloud&);
template nn::Mat<double> points_matrix<double>(const PointCloud&);
template std::array<double, 10> classify_fused<float>(const PointCloud&, Classifier<float>&);
template std::array<double, 10> classify_fused<double>(const PointCloud&, Classifier<double>&);
template std::array<double, 10> classify_single<float>(const PointCloud&, Classifier<float>&);
template std::array<double, 10> classify_single<double>(const PointCloud&, Classifier<double>&);
template std::array<double, 10> classify_dual_feat<float>(const PointCloud&, const PointCloud&,
                                                          Classifier<float>&);
template std::array<double, 10> classify_dual_feat<double>(const PointCloud&, const PointCloud&,
                                                           Classifier<double>&);
template std::array<double, 10> classify_solo_feat<float>(const PointCloud&, const PointCloud&,
                                                          Classifier<float>&);
template std::array<double, 10> classify_solo_feat<double>(const PointCloud&, const PointCloud&,
                                                           Classifier<double>&);

}  // namespace duodepth
