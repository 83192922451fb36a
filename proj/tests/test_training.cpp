#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include <json.hpp>

#include "duodepth/training.hpp"
#include "testutil.hpp"

using namespace duodepth;
using testutil::TempDir;

namespace {

nn::ArchDescriptor tiny_arch(bool selu = false, double dropout = 0.0) {
    nn::ArchDescriptor d;
    d.stn_mlp = {6, 8, 10};
    d.stn_fc = {8, 6};
    d.feat_mlp = {8, 12, 16};
    d.cls_fc = {12, 8};
    d.selu = selu;
    d.dropout = dropout;
    return d;
}

// class-dependent box shapes; shape survives normalization so the task is
// learnable from geometry alone
PointCloud shape_cloud(int label, int n, Rng& rng) {
    PointCloud cloud;
    const double ay = label == 0 ? 1.0 : 0.08;
    const double az = label == 0 ? 0.08 : 1.0;
    for (int i = 0; i < n; ++i)
        cloud.points.emplace_back(rng.uniform(-1, 1), ay * rng.uniform(-1, 1),
                                  az * rng.uniform(-1, 1));
    return cloud;
}

PointCloud multi_shape_cloud(int label, int n, Rng& rng) {
    PointCloud cloud;
    const double ay = 0.1 + 0.09 * label;
    const double az = 1.0 - 0.085 * label;
    for (int i = 0; i < n; ++i)
        cloud.points.emplace_back(rng.uniform(-1, 1), ay * rng.uniform(-1, 1),
                                  az * rng.uniform(-1, 1));
    return cloud;
}

DataStore blob_store(int classes, int per_class, int points, Rng& rng, bool two_class_shapes) {
    std::vector<SampleClouds> samples;
    for (int c = 0; c < classes; ++c) {
        for (int i = 0; i < per_class; ++i) {
            SampleClouds s;
            s.label = c;
            s.capture_id = "fix_" + std::to_string(c) + "_" + std::to_string(i);
            s.left = two_class_shapes ? shape_cloud(c, points, rng)
                                      : multi_shape_cloud(c, points, rng);
            s.right = two_class_shapes ? shape_cloud(c, points, rng)
                                       : multi_shape_cloud(c, points, rng);
            s.fused = s.left;
            for (const auto& p : s.right.points) s.fused.points.push_back(p);
            s.is_train = (i % 5) != 4;  // 80/20
            samples.push_back(std::move(s));
        }
    }
    return DataStore::from_samples(std::move(samples));
}

}  // namespace

TEST_CASE("cross entropy basics") {
    nn::Mat<double> onehot = nn::Mat<double>::Zero(2, 10);
    onehot(0, 3) = 1.0;
    onehot(1, 7) = 1.0;
    CHECK(cross_entropy(onehot, {3, 7}) <= 1e-11);

    nn::Mat<double> uniform = nn::Mat<double>::Constant(4, 10, 0.1);
    CHECK(std::abs(cross_entropy(uniform, {0, 5, 9, 2}) - std::log(10.0)) < 1e-9);

    // hand-computed fixture
    nn::Mat<double> p(2, 10);
    p.setConstant(0.05);
    p(0, 2) = 0.55;  // row 0 sums to 1: 0.05*9 + 0.55
    p(1, 8) = 0.55;
    const double expected = -(std::log(0.55) + std::log(0.05)) / 2.0;
    CHECK(cross_entropy(p, {2, 4}) == doctest::Approx(expected).epsilon(1e-12));

    CHECK_THROWS_WITH_AS(cross_entropy(p, {2, 11}), "label out of range", std::runtime_error);

    // clamping: a zero probability must not produce inf
    nn::Mat<double> zero = nn::Mat<double>::Zero(1, 10);
    CHECK(std::isfinite(cross_entropy(zero, {0})));
}

TEST_CASE("misclassification reduction reproduces the reported reductions") {
    const double baseline = 0.5 * (0.878 + 0.885);  // 0.8815
    CHECK(misclassification_reduction(baseline, 0.928) == doctest::Approx(0.392).epsilon(0.013));
    CHECK(std::abs(misclassification_reduction(baseline, 0.928) - 0.392) < 0.005);
    CHECK(std::abs(misclassification_reduction(baseline, 0.945) - 0.536) < 0.005);

    CHECK(misclassification_reduction(0.7, 0.7) == 0.0);
    CHECK(misclassification_reduction(0.3, 1.0) == 1.0);
    CHECK_THROWS_WITH_AS(misclassification_reduction(1.0, 0.9), "undefined reduction",
                         std::runtime_error);
    CHECK_THROWS_AS(misclassification_reduction(-0.1, 0.5), std::invalid_argument);
}

TEST_CASE("training reaches full accuracy on a separable two-class fixture") {
    Rng rng(111);
    const DataStore store = blob_store(2, 20, 60, rng, true);
    TrainConfig cfg;
    cfg.topology = TopologyKind::LeftOnly;
    cfg.arch = tiny_arch();
    cfg.epochs = 20;
    cfg.batch_size = 8;
    cfg.point_count = 24;
    cfg.seed = 3;

    Classifier<float> model(cfg.topology, cfg.arch, 0);
    const TrialResult r = train_single(store, cfg, 0, &model);
    const AccuracyReport train_report = evaluate(model, store, cfg, Split::Train);
    CHECK(train_report.overall == 1.0);
    CHECK(r.report.overall == 1.0);  // held-out blobs are equally separable
}

TEST_CASE("zero learning rate freezes test accuracy across epochs") {
    Rng rng(112);
    const DataStore store = blob_store(2, 10, 40, rng, true);
    TrainConfig cfg;
    cfg.topology = TopologyKind::LeftOnly;
    cfg.arch = tiny_arch(true);  // batch-norm-free so no state drifts either
    cfg.epochs = 5;
    cfg.batch_size = 8;
    cfg.point_count = 16;
    cfg.learning_rate = 0.0;
    cfg.seed = 4;

    const TrialResult r = train_single(store, cfg, 0);
    REQUIRE(r.history.size() == 5);
    for (const auto& h : r.history) CHECK(h.test_accuracy == r.history[0].test_accuracy);
}

TEST_CASE("same seed reproduces a bit-identical history") {
    Rng rng(113);
    const DataStore store = blob_store(2, 12, 40, rng, true);
    TrainConfig cfg;
    cfg.topology = TopologyKind::Fused;
    cfg.arch = tiny_arch(false, 0.3);
    cfg.epochs = 4;
    cfg.batch_size = 8;
    cfg.point_count = 20;
    cfg.seed = 5;

    const TrialResult a = train_single(store, cfg, 0);
    const TrialResult b = train_single(store, cfg, 0);
    REQUIRE(a.history.size() == b.history.size());
    for (std::size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].test_accuracy == b.history[i].test_accuracy);
    }

    const TrialResult c = train_single(store, cfg, 1);  // different trial differs
    bool identical = a.history.back().train_loss == c.history.back().train_loss;
    CHECK_FALSE(identical);
}

TEST_CASE("evaluate of an always-Zero classifier on a balanced set") {
    Rng rng(114);
    const DataStore store = blob_store(10, 10, 30, rng, false);
    TrainConfig cfg;
    cfg.topology = TopologyKind::Fused;
    cfg.arch = tiny_arch();
    cfg.point_count = 16;

    Classifier<float> model(cfg.topology, cfg.arch, 9);
    // zero the head weights and bias toward class 0: constant prediction
    for (const auto& p : model.params()) {
        if (p.name == "cls.out.w")
            for (nn::Index i = 0; i < p.size; ++i) p.value[i] = 0.0f;
        if (p.name == "cls.out.b") {
            for (nn::Index i = 0; i < p.size; ++i) p.value[i] = 0.0f;
            p.value[0] = 5.0f;
        }
    }
    const AccuracyReport report = evaluate(model, store, cfg, Split::Test);
    CHECK(report.overall == doctest::Approx(0.1).epsilon(1e-12));
    CHECK(report.per_class[0] == 1.0);
    for (int c = 1; c < kNumGestures; ++c) CHECK(report.per_class[std::size_t(c)] == 0.0);

    // confusion consistency: all predictions in column 0
    for (int t = 0; t < kNumGestures; ++t) {
        CHECK(report.confusion[std::size_t(t)][0] == 2);  // 2 test samples per class
        for (int p = 1; p < kNumGestures; ++p) CHECK(report.confusion[std::size_t(t)][std::size_t(p)] == 0);
    }
}

TEST_CASE("per-class accuracies are the confusion diagonal over row sums") {
    Rng rng(115);
    const DataStore store = blob_store(4, 12, 30, rng, false);
    TrainConfig cfg;
    cfg.topology = TopologyKind::LeftOnly;
    cfg.arch = tiny_arch();
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.point_count = 16;
    cfg.seed = 6;

    const TrialResult r = train_single(store, cfg, 0);
    std::int64_t total = 0, correct = 0;
    for (int t = 0; t < kNumGestures; ++t) {
        std::int64_t row = 0;
        for (int p = 0; p < kNumGestures; ++p) row += r.report.confusion[std::size_t(t)][std::size_t(p)];
        total += row;
        correct += r.report.confusion[std::size_t(t)][std::size_t(t)];
        if (row > 0)
            CHECK(r.report.per_class[std::size_t(t)] ==
                  doctest::Approx(double(r.report.confusion[std::size_t(t)][std::size_t(t)]) /
                                  double(row)));
    }
    CHECK(r.report.overall == doctest::Approx(double(correct) / double(total)));
}

TEST_CASE("stored checkpoint reproduces the fixture report exactly") {
    Rng rng(116);
    const DataStore store = blob_store(3, 12, 30, rng, false);
    TrainConfig cfg;
    cfg.topology = TopologyKind::SoloFeat;
    cfg.arch = tiny_arch();
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.point_count = 14;
    cfg.seed = 7;

    Classifier<float> model(cfg.topology, cfg.arch, 0);
    train_single(store, cfg, 0, &model);
    const AccuracyReport before = evaluate(model, store, cfg, Split::Test);

    TempDir tmp("train_ckpt");
    model.save(tmp.file("m.ddnc"));
    Classifier<float> loaded = Classifier<float>::load(tmp.file("m.ddnc"));
    const AccuracyReport after = evaluate(loaded, store, cfg, Split::Test);
    CHECK(before.overall == after.overall);
    for (int c = 0; c < kNumGestures; ++c)
        CHECK(before.per_class[std::size_t(c)] == after.per_class[std::size_t(c)]);
    for (int t = 0; t < kNumGestures; ++t)
        for (int p = 0; p < kNumGestures; ++p)
            CHECK(before.confusion[std::size_t(t)][std::size_t(p)] ==
                  after.confusion[std::size_t(t)][std::size_t(p)]);
}

TEST_CASE("evaluate rejects a topology arity mismatch") {
    Rng rng(117);
    const DataStore store = blob_store(2, 10, 20, rng, true);
    TrainConfig cfg;
    cfg.topology = TopologyKind::DualFeat;
    cfg.arch = tiny_arch();
    cfg.point_count = 12;
    Classifier<float> single(TopologyKind::Fused, cfg.arch, 1);
    CHECK_THROWS_AS(evaluate(single, store, cfg, Split::Test), std::runtime_error);
}

TEST_CASE("multi-trial training aggregates reports") {
    Rng rng(118);
    const DataStore store = blob_store(2, 10, 24, rng, true);
    TrainConfig cfg;
    cfg.topology = TopologyKind::LeftOnly;
    cfg.arch = tiny_arch();
    cfg.epochs = 2;
    cfg.trials = 3;
    cfg.batch_size = 8;
    cfg.point_count = 12;
    cfg.seed = 8;
    cfg.jobs = 2;

    const TrainOutput out = train(store, cfg);
    REQUIRE(out.trials.size() == 3);
    CHECK(out.aggregate.per_trial.size() == 3);
    double mean = 0;
    for (double a : out.aggregate.per_trial) mean += a;
    mean /= 3.0;
    CHECK(out.aggregate.overall == doctest::Approx(mean).epsilon(1e-12));

    // parallel execution must match serial execution bit for bit
    TrainConfig serial = cfg;
    serial.jobs = 1;
    const TrainOutput out2 = train(store, serial);
    for (int t = 0; t < 3; ++t)
        CHECK(out.trials[std::size_t(t)].report.overall ==
              out2.trials[std::size_t(t)].report.overall);
}

TEST_CASE("variant sweep emits one row per variant") {
    Rng rng(119);
    const DataStore store = blob_store(3, 10, 24, rng, false);
    TrainConfig base;
    base.topology = TopologyKind::Fused;
    base.epochs = 2;
    base.trials = 1;
    base.batch_size = 8;
    base.point_count = 12;
    base.seed = 9;

    auto cells = variant_sweep_cells(base);
    REQUIRE(cells.size() == 5);
    CHECK(cells[0].name == "NONE");
    CHECK(cells[4].name == "SELU");
    // shrink the table-width architectures for a unit-scale run
    for (auto& cell : cells) cell.config.arch = nn::scaled_descriptor(16, cell.config.variant);

    const auto rows = run_ablation(store, cells, 2);
    REQUIRE(rows.size() == 5);
    for (const auto& row : rows) {
        CHECK(std::isfinite(row.mean_accuracy));
        CHECK(row.per_trial.size() == 1);
    }
}

TEST_CASE("sweep builders cover point counts and rotation noise") {
    TrainConfig base;
    const auto pc = point_count_sweep_cells(base, {32, 64, 128, 320});
    REQUIRE(pc.size() == 4);
    CHECK(pc[0].name == "N=32");
    CHECK(pc[3].config.point_count == 320);

    const auto rot = rotation_sweep_cells(base, {1.0, 20.0},
                                          {TopologyKind::Fused, TopologyKind::SoloFeat});
    REQUIRE(rot.size() == 4);
    CHECK(rot[0].config.rotation_zeta_deg == 1.0);
    CHECK(rot[1].config.rotation_zeta_deg == 20.0);
    CHECK(rot[2].config.topology == TopologyKind::SoloFeat);
}

TEST_CASE("history csv and metrics json writers") {
    TempDir tmp("reports");
    std::vector<EpochStats> history = {{0, 2.30, 0.1}, {1, 1.5, 0.4}};
    write_history_csv(tmp.file("h.csv"), history);
    std::ifstream f(tmp.file("h.csv"));
    std::string line;
    std::getline(f, line);
    CHECK(line == "epoch,train_loss,test_accuracy");
    int rows = 0;
    while (std::getline(f, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 2);

    AccuracyReport report;
    report.overall = 0.9;
    report.per_trial = {0.88, 0.92};
    report.per_class.fill(0.9);
    TrainConfig cfg;
    const std::string json = metrics_json(report, cfg);
    const auto j = nlohmann::json::parse(json);
    CHECK(j.at("overall_mean").get<double>() == 0.9);
    CHECK(j.at("per_trial").size() == 2);
    CHECK(j.at("per_class_mean").contains("Bird"));
    CHECK(j.at("config").at("topology") == "Fused");
    CHECK(j.contains("run_id"));
}

TEST_CASE("build_network_input is deterministic and sized correctly") {
    Rng rng(120);
    const PointCloud cloud = testutil::random_cloud(200, rng);
    const nn::Mat<float> a = build_network_input(cloud, 48, 77, nullptr);
    const nn::Mat<float> b = build_network_input(cloud, 48, 77, nullptr);
    REQUIRE(a.rows() == 48);
    REQUIRE(a.cols() == 3);
    CHECK((a - b).cwiseAbs().maxCoeff() == 0.0f);
    // normalized: max norm 1
    float max_norm = 0;
    for (nn::Index r = 0; r < a.rows(); ++r) max_norm = std::max(max_norm, a.row(r).norm());
    CHECK(max_norm == doctest::Approx(1.0f).epsilon(1e-5));

    AugmentParams aug{0.002, 0.01, 42};
    const nn::Mat<float> c = build_network_input(cloud, 48, 77, &aug);
    CHECK((a - c).cwiseAbs().maxCoeff() > 0.0f);
}
