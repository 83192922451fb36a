#pragma once

#include <map>
#include <string>
#include <vector>

#include "duodepth/manifest.hpp"
#include "duodepth/pipelines.hpp"
#include "duodepth/preprocess.hpp"
#include "duodepth/registration.hpp"

namespace duodepth {

// Mean negative log probability of the true class, clamped at 1e-12.
template <class S>
double cross_entropy(const nn::Mat<S>& probabilities, const std::vector<int>& labels);

// ((1 - baseline) - (1 - method)) / (1 - baseline)
double misclassification_reduction(double baseline_acc, double method_acc);

// ---------------------------------------------------------------------------

struct PreprocessParams {
    double bin_width = kDefaultBinWidth;
    double min_prominence = kDefaultMinProminence;
    double gap = kDefaultClusterGap;
};

// One capture after offline preprocessing: each view cropped in its own
// camera frame, plus their registered concatenation in the left frame.
struct SampleClouds {
    PointCloud left, right, fused;
    RigidTransform right_to_left;
    int label = 0;
    bool is_train = true;
    std::string capture_id;
};

// Everything a training run touches, resident in memory. Loading registers
// each session once (colored ICP on its environment pair, seeded from
// rig.json) and crops every view.
class DataStore {
public:
    static DataStore load(const std::string& manifest_path, std::uint64_t split_seed,
                          const PreprocessParams& prep = {}, const IcpParams& icp = {});
    static DataStore from_samples(std::vector<SampleClouds> samples);

    const std::vector<SampleClouds>& samples() const { return samples_; }
    std::vector<std::size_t> train_indices() const;
    std::vector<std::size_t> test_indices() const;
    const std::map<std::string, IcpResult>& session_registrations() const { return sessions_; }

private:
    std::vector<SampleClouds> samples_;
    std::map<std::string, IcpResult> sessions_;
};

// ---------------------------------------------------------------------------

struct TrainConfig {
    TopologyKind topology = TopologyKind::Fused;
    nn::ArchVariant variant;                      // Table-style flags
    nn::ArchDescriptor arch = nn::make_variant({});  // resolved widths
    int epochs = 32;
    int trials = 1;
    int batch_size = 32;
    double learning_rate = 1e-3;
    double lr_decay = 0.5;
    int lr_decay_every = 20;
    int point_count = 320;  // N, per network input (per view for dual topologies)
    bool augment_enabled = true;
    double augment_alpha = 0.002;
    double augment_beta = 0.01;
    double rotation_zeta_deg = 0.0;  // independent per-view rotation noise; 0 = off
    std::uint64_t seed = 0;
    std::uint64_t split_seed = 0;
    bool share_branches = false;
    int jobs = 1;  // trial-level parallelism only
};

struct EpochStats {
    int epoch = 0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
};

struct AccuracyReport {
    std::array<double, kNumGestures> per_class{};  // mean accuracy over trials
    double overall = 0.0;
    std::vector<double> per_trial;  // overall accuracy per trial
    std::array<std::array<std::int64_t, kNumGestures>, kNumGestures> confusion{};  // [true][pred]

    // diagonal / row sum; rows with no samples report 0
    static AccuracyReport from_confusion(
        const std::array<std::array<std::int64_t, kNumGestures>, kNumGestures>& confusion);
};

struct TrialResult {
    int trial = 0;
    std::vector<EpochStats> history;
    AccuracyReport report;  // single-trial, final parameters on the test split
};

struct TrainOutput {
    std::vector<TrialResult> trials;
    AccuracyReport aggregate;
};

// One trial end to end: seeded init, minibatch training with per-epoch
// augmentation of train samples only, per-epoch test accuracy. Throws
// "divergence at epoch k" on a non-finite loss. Bit-reproducible for a
// fixed (config, trial).
TrialResult train_single(const DataStore& store, const TrainConfig& config, int trial,
                         Classifier<float>* final_model = nullptr);

// config.trials independent trials (parallel across config.jobs workers),
// aggregated into a mean report with a summed confusion matrix. When
// trial0_model is given it receives trial 0's final parameters.
TrainOutput train(const DataStore& store, const TrainConfig& config,
                  Classifier<float>* trial0_model = nullptr);

// Deterministic eval-mode pass over a split. point_count / rotation noise /
// test-sampling seeds come from the config; trial index does not enter.
AccuracyReport evaluate(Classifier<float>& model, const DataStore& store,
                        const TrainConfig& config, Split split = Split::Test);

// ---------------------------------------------------------------------------
// Sweeps (Table 1 / point count / rotation noise shapes)

struct AblationCell {
    std::string name;
    TrainConfig config;
};

struct AblationRow {
    std::string name;
    double mean_accuracy = 0.0;
    double stddev = 0.0;
    std::vector<double> per_trial;
};

std::vector<AblationCell> variant_sweep_cells(const TrainConfig& base);
std::vector<AblationCell> point_count_sweep_cells(const TrainConfig& base,
                                                  const std::vector<int>& point_counts);
std::vector<AblationCell> rotation_sweep_cells(const TrainConfig& base,
                                               const std::vector<double>& zetas,
                                               const std::vector<TopologyKind>& topologies);

std::vector<AblationRow> run_ablation(const DataStore& store, const std::vector<AblationCell>& cells,
                                      int jobs);

// ---------------------------------------------------------------------------
// Reports

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history);
std::string config_json(const TrainConfig& config);
// AccuracyReport plus config echo and a run id hashed from both.
std::string metrics_json(const AccuracyReport& report, const TrainConfig& config);

// Assembles one network input from a preprocessed capture: optional
// per-view rotation noise, downsample to n, normalize, optional
// augmentation (training only). Exposed for the bench command and tests.
nn::Mat<float> build_network_input(const PointCloud& view, int n, std::uint64_t down_seed,
                                   const AugmentParams* aug);

extern template double cross_entropy<float>(const nn::Mat<float>&, const std::vector<int>&);
extern template double cross_entropy<double>(const nn::Mat<double>&, const std::vector<int>&);

}  // namespace duodepth
