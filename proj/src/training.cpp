#include "duodepth/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <json.hpp>

#include "duodepth/ply_io.hpp"
#include "duodepth/synth.hpp"

namespace fs = std::filesystem;

namespace duodepth {

template <class S>
double cross_entropy(const nn::Mat<S>& probabilities, const std::vector<int>& labels) {
    if (probabilities.rows() != nn::Index(labels.size()))
        throw std::invalid_argument("cross_entropy: label count mismatch");
    double loss = 0.0;
    for (nn::Index r = 0; r < probabilities.rows(); ++r) {
        const int label = labels[std::size_t(r)];
        if (label < 0 || label >= probabilities.cols())
            throw std::runtime_error("label out of range");
        loss += -std::log(std::max(double(probabilities(r, label)), 1e-12));
    }
    return loss / double(probabilities.rows());
}

template double cross_entropy<float>(const nn::Mat<float>&, const std::vector<int>&);
template double cross_entropy<double>(const nn::Mat<double>&, const std::vector<int>&);

double misclassification_reduction(double baseline_acc, double method_acc) {
    if (!(baseline_acc >= 0.0 && baseline_acc <= 1.0) ||
        !(method_acc >= 0.0 && method_acc <= 1.0))
        throw std::invalid_argument("misclassification_reduction: accuracies must be in [0,1]");
    if (baseline_acc >= 1.0) throw std::runtime_error("undefined reduction");
    return ((1.0 - baseline_acc) - (1.0 - method_acc)) / (1.0 - baseline_acc);
}

// ---------------------------------------------------------------------------
// DataStore

DataStore DataStore::load(const std::string& manifest_path, std::uint64_t split_seed,
                          const PreprocessParams& prep, const IcpParams& icp) {
    const DatasetManifest manifest = load_manifest(manifest_path, split_seed);
    const fs::path dir = fs::path(manifest_path).parent_path();

    DataStore store;
    std::set<std::string> session_ids;
    for (const auto& r : manifest.records) session_ids.insert(r.session_id);
    if (!session_ids.empty()) {
        const RigGeometry rig = synth::load_rig_json((dir / "rig.json").string());
        for (const auto& id : session_ids) {
            const PointCloud left_env = read_ply(synth::session_env_path(dir.string(), id, true));
            const PointCloud right_env = read_ply(synth::session_env_path(dir.string(), id, false));
            store.sessions_[id] = register_session(left_env, right_env, rig, icp);
        }
    }

    store.samples_.reserve(manifest.records.size());
    for (const auto& r : manifest.records) {
        SampleClouds s;
        const PointCloud left = read_ply((dir / r.left_path).string());
        const PointCloud right = read_ply((dir / r.right_path).string());
        s.left = crop_to_arm(left, prep.bin_width, prep.min_prominence, prep.gap).cloud;
        s.right = crop_to_arm(right, prep.bin_width, prep.min_prominence, prep.gap).cloud;
        s.right_to_left = store.sessions_.at(r.session_id).transform;
        s.fused = fuse(s.left, s.right, s.right_to_left);
        s.label = int(r.gesture);
        s.is_train = manifest.split.at(r.capture_id) == Split::Train;
        s.capture_id = r.capture_id;
        store.samples_.push_back(std::move(s));
    }
    return store;
}

DataStore DataStore::from_samples(std::vector<SampleClouds> samples) {
    DataStore store;
    store.samples_ = std::move(samples);
    return store;
}

std::vector<std::size_t> DataStore::train_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (samples_[i].is_train) out.push_back(i);
    return out;
}

std::vector<std::size_t> DataStore::test_indices() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < samples_.size(); ++i)
        if (!samples_[i].is_train) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------
// Input assembly

namespace {

enum SeedTag : std::uint64_t {
    kTagDown = 0x11,
    kTagAug = 0x22,
    kTagRotLeft = 0x33,
    kTagRotRight = 0x44,
    kTagShuffle = 0x55,
    kTagInit = 0x66,
    kTagDropout = 0x77,
    kTagTest = 0x88,
};

std::uint64_t chain(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0, std::uint64_t d = 0) {
    return mix_seed(mix_seed(mix_seed(a, b), c), d);
}

struct SampleSeeds {
    std::uint64_t rot_left = 0, rot_right = 0, down1 = 0, down2 = 0, aug1 = 0, aug2 = 0;
};

// train streams depend on (seed, trial, epoch, sample); test streams only
// on (seed, sample) so the test set stays fixed across epochs and trials
SampleSeeds train_seeds(const TrainConfig& cfg, int trial, int epoch, std::size_t i) {
    const std::uint64_t base = mix_seed(cfg.seed, 0x7E1A0000ULL + std::uint64_t(trial));
    SampleSeeds s;
    s.rot_left = chain(base, kTagRotLeft, std::uint64_t(epoch), i);
    s.rot_right = chain(base, kTagRotRight, std::uint64_t(epoch), i);
    s.down1 = chain(base, kTagDown, std::uint64_t(epoch), 2 * i);
    s.down2 = chain(base, kTagDown, std::uint64_t(epoch), 2 * i + 1);
    s.aug1 = chain(base, kTagAug, std::uint64_t(epoch), 2 * i);
    s.aug2 = chain(base, kTagAug, std::uint64_t(epoch), 2 * i + 1);
    return s;
}

SampleSeeds test_seeds(const TrainConfig& cfg, std::size_t i) {
    const std::uint64_t base = mix_seed(cfg.seed, kTagTest);
    SampleSeeds s;
    s.rot_left = chain(base, kTagRotLeft, 0, i);
    s.rot_right = chain(base, kTagRotRight, 0, i);
    s.down1 = chain(base, kTagDown, 0, 2 * i);
    s.down2 = chain(base, kTagDown, 0, 2 * i + 1);
    return s;
}

}  // namespace

nn::Mat<float> build_network_input(const PointCloud& view, int n, std::uint64_t down_seed,
                                   const AugmentParams* aug) {
    const PointCloud down = downsample_random(view, std::size_t(n), down_seed);
    NormalizeResult norm = normalize(down);
    if (aug) {
        // augmentation operates in normalized coordinates so the global
        // translation term is not cancelled by the centering step
        const PointCloud augmented = augment(norm.cloud, *aug);
        return points_matrix<float>(augmented);
    }
    return points_matrix<float>(norm.cloud);
}

namespace {

// One capture -> the rows of the network input matrices for its batch slot.
void assemble_sample(const SampleClouds& s, const TrainConfig& cfg, bool training,
                     const SampleSeeds& seeds, nn::Mat<float>& pts1, nn::Mat<float>& pts2,
                     nn::Index slot) {
    const int n = cfg.point_count;
    const double zeta = cfg.rotation_zeta_deg;
    const AugmentParams aug1{cfg.augment_alpha, cfg.augment_beta, seeds.aug1};
    const AugmentParams aug2{cfg.augment_alpha, cfg.augment_beta, seeds.aug2};
    const AugmentParams* a1 = training && cfg.augment_enabled ? &aug1 : nullptr;
    const AugmentParams* a2 = training && cfg.augment_enabled ? &aug2 : nullptr;

    auto rotated = [&](const PointCloud& v, std::uint64_t seed) {
        return rotate_random(v, {zeta, seed});
    };

    switch (cfg.topology) {
        case TopologyKind::LeftOnly: {
            const PointCloud* v = &s.left;
            PointCloud tmp;
            if (zeta > 0) tmp = rotated(s.left, seeds.rot_left), v = &tmp;
            pts1.middleRows(slot * n, n) = build_network_input(*v, n, seeds.down1, a1);
            break;
        }
        case TopologyKind::RightOnly: {
            const PointCloud* v = &s.right;
            PointCloud tmp;
            if (zeta > 0) tmp = rotated(s.right, seeds.rot_right), v = &tmp;
            pts1.middleRows(slot * n, n) = build_network_input(*v, n, seeds.down1, a1);
            break;
        }
        case TopologyKind::Fused: {
            const PointCloud* v = &s.fused;
            PointCloud tmp;
            if (zeta > 0) {
                // rotation disturbances hit each camera's view before fusion
                tmp = fuse(rotated(s.left, seeds.rot_left), rotated(s.right, seeds.rot_right),
                           s.right_to_left);
                v = &tmp;
            }
            pts1.middleRows(slot * n, n) = build_network_input(*v, n, seeds.down1, a1);
            break;
        }
        case TopologyKind::DualFeat:
        case TopologyKind::SoloFeat: {
            const PointCloud* l = &s.left;
            const PointCloud* r = &s.right;
            PointCloud tl, tr;
            if (zeta > 0) {
                tl = rotated(s.left, seeds.rot_left);
                tr = rotated(s.right, seeds.rot_right);
                l = &tl;
                r = &tr;
            }
            pts1.middleRows(slot * n, n) = build_network_input(*l, n, seeds.down1, a1);
            pts2.middleRows(slot * n, n) = build_network_input(*r, n, seeds.down2, a2);
            break;
        }
    }
}

BatchInput<float> make_batch(const DataStore& store, const std::vector<std::size_t>& order,
                             std::size_t begin, std::size_t end, const TrainConfig& cfg,
                             bool training, int trial, int epoch, std::vector<int>& labels) {
    const nn::Index b = nn::Index(end - begin);
    const nn::Index n = cfg.point_count;
    const bool dual = topology_dual_input(cfg.topology);

    BatchInput<float> in;
    in.b = b;
    in.n1 = n;
    in.pts1.resize(b * n, 3);
    if (dual) {
        in.n2 = n;
        in.pts2.resize(b * n, 3);
    }
    labels.resize(std::size_t(b));
    for (std::size_t k = begin; k < end; ++k) {
        const std::size_t i = order[k];
        const SampleClouds& s = store.samples()[i];
        const SampleSeeds seeds =
            training ? train_seeds(cfg, trial, epoch, i) : test_seeds(cfg, i);
        assemble_sample(s, cfg, training, seeds, in.pts1, in.pts2, nn::Index(k - begin));
        labels[k - begin] = s.label;
    }
    return in;
}

// ---------------------------------------------------------------------------

template <class S>
class AdamOpt {
public:
    AdamOpt(std::vector<nn::ParamRef<S>> params, double lr)
        : params_(std::move(params)), lr_(lr) {
        for (const auto& p : params_) {
            m_.emplace_back(std::size_t(p.size), 0.0);
            v_.emplace_back(std::size_t(p.size), 0.0);
        }
    }

    void set_learning_rate(double lr) { lr_ = lr; }

    void step() {
        ++t_;
        const double bc1 = 1.0 - std::pow(kBeta1, t_);
        const double bc2 = 1.0 - std::pow(kBeta2, t_);
        for (std::size_t pi = 0; pi < params_.size(); ++pi) {
            const auto& p = params_[pi];
            for (nn::Index j = 0; j < p.size; ++j) {
                const double g = double(p.grad[j]);
                double& m = m_[pi][std::size_t(j)];
                double& v = v_[pi][std::size_t(j)];
                m = kBeta1 * m + (1.0 - kBeta1) * g;
                v = kBeta2 * v + (1.0 - kBeta2) * g * g;
                p.value[j] -= S(lr_ * (m / bc1) / (std::sqrt(v / bc2) + kEps));
            }
        }
    }

    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

private:
    std::vector<nn::ParamRef<S>> params_;
    std::vector<std::vector<double>> m_, v_;
    double lr_;
    int t_ = 0;
};

int argmax_row(const nn::Mat<float>& m, nn::Index r) {
    int best = 0;
    for (int c = 1; c < m.cols(); ++c)
        if (m(r, c) > m(r, best)) best = c;
    return best;
}

std::array<std::array<std::int64_t, kNumGestures>, kNumGestures> confusion_of(
    Classifier<float>& model, const DataStore& store, const std::vector<std::size_t>& indices,
    const TrainConfig& cfg) {
    std::array<std::array<std::int64_t, kNumGestures>, kNumGestures> confusion{};
    constexpr std::size_t kEvalBatch = 64;
    std::vector<int> labels;
    for (std::size_t begin = 0; begin < indices.size(); begin += kEvalBatch) {
        const std::size_t end = std::min(indices.size(), begin + kEvalBatch);
        const BatchInput<float> in =
            make_batch(store, indices, begin, end, cfg, false, 0, 0, labels);
        const nn::Mat<float> logits = model.forward(in, false);
        model.clear_caches();
        for (nn::Index r = 0; r < logits.rows(); ++r)
            ++confusion[std::size_t(labels[std::size_t(r)])][std::size_t(argmax_row(logits, r))];
    }
    return confusion;
}

double accuracy_of(
    const std::array<std::array<std::int64_t, kNumGestures>, kNumGestures>& confusion) {
    std::int64_t correct = 0, total = 0;
    for (int t = 0; t < kNumGestures; ++t)
        for (int p = 0; p < kNumGestures; ++p) {
            total += confusion[std::size_t(t)][std::size_t(p)];
            if (t == p) correct += confusion[std::size_t(t)][std::size_t(p)];
        }
    return total == 0 ? 0.0 : double(correct) / double(total);
}

}  // namespace

AccuracyReport AccuracyReport::from_confusion(
    const std::array<std::array<std::int64_t, kNumGestures>, kNumGestures>& confusion) {
    AccuracyReport report;
    report.confusion = confusion;
    for (int t = 0; t < kNumGestures; ++t) {
        std::int64_t row = 0;
        for (int p = 0; p < kNumGestures; ++p) row += confusion[std::size_t(t)][std::size_t(p)];
        report.per_class[std::size_t(t)] =
            row == 0 ? 0.0 : double(confusion[std::size_t(t)][std::size_t(t)]) / double(row);
    }
    report.overall = accuracy_of(confusion);
    return report;
}

AccuracyReport evaluate(Classifier<float>& model, const DataStore& store,
                        const TrainConfig& config, Split split) {
    const bool dual_model = model.dual_input();
    if (dual_model != topology_dual_input(config.topology) || model.kind() != config.topology)
        throw std::runtime_error("topology mismatch between checkpoint and configuration");
    const auto indices =
        split == Split::Test ? store.test_indices() : store.train_indices();
    if (indices.empty()) throw std::runtime_error("empty split");
    auto report = AccuracyReport::from_confusion(confusion_of(model, store, indices, config));
    report.per_trial = {report.overall};
    return report;
}

TrialResult train_single(const DataStore& store, const TrainConfig& config, int trial,
                         Classifier<float>* final_model) {
    if (config.epochs < 1 || config.trials < 1 || config.batch_size < 1 || config.point_count < 1)
        throw std::invalid_argument("train: all counts must be >= 1");
    const auto train_idx = store.train_indices();
    const auto test_idx = store.test_indices();
    if (train_idx.empty() || test_idx.empty()) throw std::runtime_error("empty split");

    Classifier<float> model(config.topology, config.arch,
                            chain(config.seed, kTagInit, std::uint64_t(trial)),
                            config.share_branches);
    model.reseed_dropout(chain(config.seed, kTagDropout, std::uint64_t(trial)));
    AdamOpt<float> opt(model.params(), config.learning_rate);

    TrialResult result;
    result.trial = trial;
    std::vector<std::size_t> order = train_idx;
    std::vector<int> labels;

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        opt.set_learning_rate(config.learning_rate *
                              std::pow(config.lr_decay, epoch / config.lr_decay_every));
        Rng shuffle_rng(chain(mix_seed(config.seed, 0x7E1A0000ULL + std::uint64_t(trial)),
                              kTagShuffle, std::uint64_t(epoch)));
        for (std::size_t i = order.size(); i > 1; --i)
            std::swap(order[i - 1], order[shuffle_rng.uniform_index(i)]);

        double loss_sum = 0.0;
        std::size_t seen = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += std::size_t(config.batch_size)) {
            const std::size_t end =
                std::min(order.size(), begin + std::size_t(config.batch_size));
            const BatchInput<float> in =
                make_batch(store, order, begin, end, config, true, trial, epoch, labels);
            model.zero_grad();
            const nn::Mat<float> logits = model.forward(in, true);
            const nn::Mat<float> probs = nn::softmax_rows(logits);
            const double loss = cross_entropy(probs, labels);
            if (!std::isfinite(loss))
                throw std::runtime_error("divergence at epoch " + std::to_string(epoch));
            nn::Mat<float> dlogits = probs;
            for (nn::Index r = 0; r < dlogits.rows(); ++r)
                dlogits(r, labels[std::size_t(r)]) -= 1.0f;
            dlogits /= float(dlogits.rows());
            model.backward(dlogits);
            opt.step();
            loss_sum += loss * double(end - begin);
            seen += end - begin;
        }

        EpochStats stats;
        stats.epoch = epoch;
        stats.train_loss = loss_sum / double(seen);
        stats.test_accuracy = accuracy_of(confusion_of(model, store, test_idx, config));
        result.history.push_back(stats);
    }

    result.report = AccuracyReport::from_confusion(confusion_of(model, store, test_idx, config));
    result.report.per_trial = {result.report.overall};
    if (final_model) *final_model = std::move(model);
    return result;
}

namespace {

AccuracyReport aggregate_reports(const std::vector<TrialResult>& trials) {
    AccuracyReport agg;
    if (trials.empty()) return agg;
    for (const auto& t : trials) {
        for (int c = 0; c < kNumGestures; ++c)
            agg.per_class[std::size_t(c)] += t.report.per_class[std::size_t(c)];
        for (int a = 0; a < kNumGestures; ++a)
            for (int b = 0; b < kNumGestures; ++b)
                agg.confusion[std::size_t(a)][std::size_t(b)] +=
                    t.report.confusion[std::size_t(a)][std::size_t(b)];
        agg.per_trial.push_back(t.report.overall);
        agg.overall += t.report.overall;
    }
    for (auto& v : agg.per_class) v /= double(trials.size());
    agg.overall /= double(trials.size());
    return agg;
}

// shared worker pool: runs fn(task_index) over `count` tasks
void run_parallel(int jobs, int count, const std::function<void(int)>& fn) {
    jobs = std::clamp(jobs, 1, std::max(1, count));
    if (jobs == 1) {
        for (int i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (;;) {
            const int i = next.fetch_add(1);
            if (i >= count) return;
            try {
                fn(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!error) error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> threads;
    for (int j = 0; j < jobs; ++j) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
    if (error) std::rethrow_exception(error);
}

}  // namespace

TrainOutput train(const DataStore& store, const TrainConfig& config,
                  Classifier<float>* trial0_model) {
    TrainOutput out;
    out.trials.resize(std::size_t(config.trials));
    run_parallel(config.jobs, config.trials, [&](int t) {
        out.trials[std::size_t(t)] =
            train_single(store, config, t, t == 0 ? trial0_model : nullptr);
    });
    out.aggregate = aggregate_reports(out.trials);
    return out;
}

// ---------------------------------------------------------------------------
// Sweeps

std::vector<AblationCell> variant_sweep_cells(const TrainConfig& base) {
    std::vector<AblationCell> cells;
    for (const char* name : {"NONE", "D", "R", "R+D", "SELU"}) {
        TrainConfig cfg = base;
        cfg.variant = nn::variant_from_name(name);
        cfg.arch = nn::make_variant(cfg.variant);
        cells.push_back({name, cfg});
    }
    return cells;
}

std::vector<AblationCell> point_count_sweep_cells(const TrainConfig& base,
                                                  const std::vector<int>& point_counts) {
    std::vector<AblationCell> cells;
    for (int n : point_counts) {
        TrainConfig cfg = base;
        cfg.point_count = n;
        cells.push_back({"N=" + std::to_string(n), cfg});
    }
    return cells;
}

std::vector<AblationCell> rotation_sweep_cells(const TrainConfig& base,
                                               const std::vector<double>& zetas,
                                               const std::vector<TopologyKind>& topologies) {
    std::vector<AblationCell> cells;
    for (TopologyKind topo : topologies) {
        for (double z : zetas) {
            TrainConfig cfg = base;
            cfg.topology = topo;
            cfg.rotation_zeta_deg = z;
            char name[64];
            std::snprintf(name, sizeof(name), "%s@%g", topology_name(topo).c_str(), z);
            cells.push_back({name, cfg});
        }
    }
    return cells;
}

std::vector<AblationRow> run_ablation(const DataStore& store, const std::vector<AblationCell>& cells,
                                      int jobs) {
    struct Task {
        int cell;
        int trial;
    };
    std::vector<Task> tasks;
    for (int c = 0; c < int(cells.size()); ++c)
        for (int t = 0; t < cells[std::size_t(c)].config.trials; ++t) tasks.push_back({c, t});

    std::vector<std::vector<double>> acc(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c)
        acc[c].resize(std::size_t(cells[c].config.trials), 0.0);

    run_parallel(jobs, int(tasks.size()), [&](int i) {
        const Task task = tasks[std::size_t(i)];
        const TrialResult r =
            train_single(store, cells[std::size_t(task.cell)].config, task.trial);
        acc[std::size_t(task.cell)][std::size_t(task.trial)] = r.report.overall;
    });

    std::vector<AblationRow> rows;
    for (std::size_t c = 0; c < cells.size(); ++c) {
        AblationRow row;
        row.name = cells[c].name;
        row.per_trial = acc[c];
        for (double a : acc[c]) row.mean_accuracy += a;
        row.mean_accuracy /= double(acc[c].size());
        for (double a : acc[c]) row.stddev += (a - row.mean_accuracy) * (a - row.mean_accuracy);
        row.stddev = std::sqrt(row.stddev / double(acc[c].size()));
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Reports

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << "epoch,train_loss,test_accuracy\n";
    out.precision(10);
    for (const auto& h : history)
        out << h.epoch << "," << h.train_loss << "," << h.test_accuracy << "\n";
}

std::string config_json(const TrainConfig& config) {
    nlohmann::ordered_json j;
    j["topology"] = topology_name(config.topology);
    j["variant"] = nn::variant_name(config.variant);
    j["arch"] = {{"stn_mlp", config.arch.stn_mlp},
                 {"stn_fc", config.arch.stn_fc},
                 {"feat_mlp", config.arch.feat_mlp},
                 {"cls_fc", config.arch.cls_fc},
                 {"num_classes", config.arch.num_classes},
                 {"dropout", config.arch.dropout},
                 {"selu", config.arch.selu}};
    j["epochs"] = config.epochs;
    j["trials"] = config.trials;
    j["batch_size"] = config.batch_size;
    j["learning_rate"] = config.learning_rate;
    j["lr_decay"] = config.lr_decay;
    j["lr_decay_every"] = config.lr_decay_every;
    j["point_count"] = config.point_count;
    j["augment_enabled"] = config.augment_enabled;
    j["augment_alpha"] = config.augment_alpha;
    j["augment_beta"] = config.augment_beta;
    j["rotation_zeta_deg"] = config.rotation_zeta_deg;
    j["seed"] = config.seed;
    j["split_seed"] = config.split_seed;
    j["share_branches"] = config.share_branches;
    return j.dump();
}

std::string metrics_json(const AccuracyReport& report, const TrainConfig& config) {
    nlohmann::ordered_json j;
    const std::string cfg = config_json(config);
    std::uint64_t h = fnv1a64(cfg.data(), cfg.size());
    h = fnv1a64(report.per_trial.data(), report.per_trial.size() * sizeof(double), h);
    h = fnv1a64(&report.overall, sizeof(double), h);
    char run_id[24];
    std::snprintf(run_id, sizeof(run_id), "%016llx", static_cast<unsigned long long>(h));
    j["run_id"] = run_id;
    j["config"] = nlohmann::ordered_json::parse(cfg);
    j["overall_mean"] = report.overall;
    nlohmann::ordered_json per_class;
    for (int c = 0; c < kNumGestures; ++c)
        per_class[gesture_name(Gesture(c))] = report.per_class[std::size_t(c)];
    j["per_class_mean"] = per_class;
    j["per_trial"] = report.per_trial;
    j["confusion"] = report.confusion;
    return j.dump(2);
}

}  // namespace duodepth
