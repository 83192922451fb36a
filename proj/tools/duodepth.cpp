#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "duodepth/ply_io.hpp"
#include "duodepth/synth.hpp"
#include "duodepth/training.hpp"

namespace fs = std::filesystem;
using namespace duodepth;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// 0 ok, 2 usage/config, 3 io, 4 registration divergence, 5 training divergence
int exit_code_for(const std::exception& e) {
    const std::string msg = e.what();
    auto contains = [&](const char* s) { return msg.find(s) != std::string::npos; };
    if (contains("registration diverged")) return 4;
    if (contains("divergence at epoch")) return 5;
    if (contains("cannot open") || contains("write failed") || contains("truncated payload") ||
        contains("parse error") || contains("unsupported format") || contains("corrupted"))
        return 3;
    return 2;
}

std::uint64_t default_seed() {
    if (const char* env = std::getenv("DUODEPTH_SEED")) return std::strtoull(env, nullptr, 10);
    return 0;
}

ordered_json transform_json(const RigidTransform& t) {
    ordered_json j;
    j["rotation"] = {{t.rotation(0, 0), t.rotation(0, 1), t.rotation(0, 2)},
                     {t.rotation(1, 0), t.rotation(1, 1), t.rotation(1, 2)},
                     {t.rotation(2, 0), t.rotation(2, 1), t.rotation(2, 2)}};
    j["translation"] = {t.translation.x(), t.translation.y(), t.translation.z()};
    return j;
}

struct RunConfig {
    TrainConfig train;
    PreprocessParams prep;
    IcpParams icp;
    std::string manifest;
    std::string out_dir = ".";
    int arch_divisor = 0;  // 0 = widths from the variant table
};

void apply_config_file(RunConfig& rc, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config parse: ") + e.what());
    }
    static const std::set<std::string> known = {
        "topology", "variant", "arch_divisor", "epochs", "trials", "batch_size",
        "learning_rate", "lr_decay", "lr_decay_every", "point_count", "augment_enabled",
        "augment_alpha", "augment_beta", "rotation_zeta_deg", "seed", "split_seed",
        "share_branches", "jobs", "preprocess", "icp", "manifest", "out_dir"};
    for (const auto& [key, value] : j.items())
        if (!known.count(key)) throw std::invalid_argument("config: unknown key \"" + key + "\"");

    auto& t = rc.train;
    if (j.contains("topology")) t.topology = topology_from_name(j["topology"].get<std::string>());
    if (j.contains("variant")) t.variant = nn::variant_from_name(j["variant"].get<std::string>());
    if (j.contains("arch_divisor")) rc.arch_divisor = j["arch_divisor"].get<int>();
    if (j.contains("epochs")) t.epochs = j["epochs"].get<int>();
    if (j.contains("trials")) t.trials = j["trials"].get<int>();
    if (j.contains("batch_size")) t.batch_size = j["batch_size"].get<int>();
    if (j.contains("learning_rate")) t.learning_rate = j["learning_rate"].get<double>();
    if (j.contains("lr_decay")) t.lr_decay = j["lr_decay"].get<double>();
    if (j.contains("lr_decay_every")) t.lr_decay_every = j["lr_decay_every"].get<int>();
    if (j.contains("point_count")) t.point_count = j["point_count"].get<int>();
    if (j.contains("augment_enabled")) t.augment_enabled = j["augment_enabled"].get<bool>();
    if (j.contains("augment_alpha")) t.augment_alpha = j["augment_alpha"].get<double>();
    if (j.contains("augment_beta")) t.augment_beta = j["augment_beta"].get<double>();
    if (j.contains("rotation_zeta_deg")) t.rotation_zeta_deg = j["rotation_zeta_deg"].get<double>();
    if (j.contains("seed")) t.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("split_seed")) t.split_seed = j["split_seed"].get<std::uint64_t>();
    if (j.contains("share_branches")) t.share_branches = j["share_branches"].get<bool>();
    if (j.contains("jobs")) t.jobs = j["jobs"].get<int>();
    if (j.contains("manifest")) rc.manifest = j["manifest"].get<std::string>();
    if (j.contains("out_dir")) rc.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("preprocess")) {
        const auto& p = j["preprocess"];
        static const std::set<std::string> pk = {"bin_width", "min_prominence", "gap"};
        for (const auto& [key, value] : p.items())
            if (!pk.count(key)) throw std::invalid_argument("config: unknown key \"preprocess." + key + "\"");
        if (p.contains("bin_width")) rc.prep.bin_width = p["bin_width"].get<double>();
        if (p.contains("min_prominence")) rc.prep.min_prominence = p["min_prominence"].get<double>();
        if (p.contains("gap")) rc.prep.gap = p["gap"].get<double>();
    }
    if (j.contains("icp")) {
        const auto& p = j["icp"];
        static const std::set<std::string> pk = {"max_iterations", "correspondence_distance",
                                                 "convergence_rel_change", "delta"};
        for (const auto& [key, value] : p.items())
            if (!pk.count(key)) throw std::invalid_argument("config: unknown key \"icp." + key + "\"");
        if (p.contains("max_iterations")) rc.icp.max_iterations = p["max_iterations"].get<int>();
        if (p.contains("correspondence_distance"))
            rc.icp.correspondence_distance = p["correspondence_distance"].get<double>();
        if (p.contains("convergence_rel_change"))
            rc.icp.convergence_rel_change = p["convergence_rel_change"].get<double>();
        if (p.contains("delta")) rc.icp.delta = p["delta"].get<double>();
    }
}

void resolve_arch(RunConfig& rc) {
    rc.train.arch = rc.arch_divisor > 0
                        ? nn::scaled_descriptor(rc.arch_divisor, rc.train.variant)
                        : nn::make_variant(rc.train.variant);
}

PointCloud prepare_for_classify(const PointCloud& raw, int n, std::uint64_t seed,
                                const PreprocessParams& prep) {
    const PointCloud cropped = crop_to_arm(raw, prep.bin_width, prep.min_prominence, prep.gap).cloud;
    const PointCloud down = downsample_random(cropped, std::size_t(n), seed);
    return normalize(down).cloud;
}

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = q * double(v.size() - 1);
    const std::size_t lo = std::size_t(pos);
    const std::size_t hi = std::min(v.size() - 1, lo + 1);
    return v[lo] + (pos - double(lo)) * (v[hi] - v[lo]);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"duodepth: dual-view depth-camera gesture pipeline"};
    app.require_subcommand(1);

    // ---- synth ----
    auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic two-view gesture dataset");
    std::string synth_out;
    std::string synth_scale = "desk";
    int synth_per_facing = -1;
    int synth_sessions = 5;
    std::uint64_t synth_seed = default_seed();
    bool synth_no_body = false;
    synth_cmd->add_option("--out", synth_out, "output directory")->required();
    synth_cmd->add_option("--scale", synth_scale, "desk (67 per facing per class) or paper (335)")
        ->check(CLI::IsMember({"desk", "paper"}));
    synth_cmd->add_option("--per-facing", synth_per_facing,
                          "captures per class per facing (overrides --scale)");
    synth_cmd->add_option("--sessions", synth_sessions, "recording session count");
    synth_cmd->add_option("--seed", synth_seed, "master seed");
    synth_cmd->add_flag("--no-body", synth_no_body, "omit the torso slab behind the hand");

    // ---- register ----
    auto* reg_cmd = app.add_subcommand("register", "register two environment captures");
    std::string reg_left, reg_right, reg_rig, reg_out;
    double reg_delta = IcpParams{}.delta;
    double reg_corr = IcpParams{}.correspondence_distance;
    int reg_iters = IcpParams{}.max_iterations;
    reg_cmd->add_option("--left", reg_left, "left environment PLY")->required();
    reg_cmd->add_option("--right", reg_right, "right environment PLY")->required();
    reg_cmd->add_option("--rig", reg_rig, "rig.json with the nominal geometry");
    reg_cmd->add_option("--delta", reg_delta, "geometric weight in [0,1]");
    reg_cmd->add_option("--corr-dist", reg_corr, "correspondence distance, meters");
    reg_cmd->add_option("--max-iterations", reg_iters, "iteration cap");
    reg_cmd->add_option("--save", reg_out, "also write the transform JSON here");

    // ---- crop ----
    auto* crop_cmd = app.add_subcommand("crop", "density-based arm isolation");
    std::string crop_in, crop_out;
    PreprocessParams crop_prep;
    crop_cmd->add_option("--in", crop_in, "input PLY")->required();
    crop_cmd->add_option("--out", crop_out, "output PLY")->required();
    crop_cmd->add_option("--bin-width", crop_prep.bin_width, "histogram bin width, meters");
    crop_cmd->add_option("--min-prominence", crop_prep.min_prominence,
                         "peak prominence, fraction of max count");
    crop_cmd->add_option("--gap", crop_prep.gap, "cluster split gap, meters");

    // ---- augment ----
    auto* aug_cmd = app.add_subcommand("augment", "jitter + translation augmentation");
    std::string aug_in, aug_out;
    AugmentParams aug_params;
    aug_params.seed = default_seed();
    aug_cmd->add_option("--in", aug_in, "input PLY")->required();
    aug_cmd->add_option("--out", aug_out, "output PLY")->required();
    aug_cmd->add_option("--alpha", aug_params.alpha, "translation std, meters");
    aug_cmd->add_option("--beta", aug_params.beta, "per-point jitter std, meters");
    aug_cmd->add_option("--seed", aug_params.seed, "rng seed");

    // ---- train / eval ----
    auto add_train_flags = [&](CLI::App* cmd, RunConfig& rc, std::string& config_path) {
        cmd->add_option("--config", config_path, "JSON config file (flags override it)");
        cmd->add_option("--manifest", rc.manifest, "dataset manifest");
        cmd->add_option("--topology", [&rc](const std::vector<std::string>& v) {
            rc.train.topology = topology_from_name(v.back());
            return true;
        }, "LeftOnly | RightOnly | Fused | DualFeat | SoloFeat");
        cmd->add_option("--variant", [&rc](const std::vector<std::string>& v) {
            rc.train.variant = nn::variant_from_name(v.back());
            return true;
        }, "NONE | D | R | R+D | SELU");
        cmd->add_option("--arch-divisor", rc.arch_divisor, "divide all layer widths (0 = table widths)");
        cmd->add_option("--epochs", rc.train.epochs, "");
        cmd->add_option("--trials", rc.train.trials, "");
        cmd->add_option("--batch", rc.train.batch_size, "");
        cmd->add_option("--lr", rc.train.learning_rate, "");
        cmd->add_option("--n", rc.train.point_count, "points per network input");
        cmd->add_option("--zeta", rc.train.rotation_zeta_deg, "rotation noise std, degrees");
        cmd->add_option("--seed", rc.train.seed, "");
        cmd->add_option("--split-seed", rc.train.split_seed, "");
        cmd->add_option("--jobs", rc.train.jobs, "parallel trials");
        cmd->add_flag("--share-branches", rc.train.share_branches, "tie branch parameters");
        cmd->add_option("--out-dir", rc.out_dir, "output directory");
    };

    auto* train_cmd = app.add_subcommand("train", "train a topology on a dataset");
    RunConfig train_rc;
    train_rc.train.seed = default_seed();
    std::string train_config_path;
    std::string baseline_left_path, baseline_right_path;
    add_train_flags(train_cmd, train_rc, train_config_path);
    train_cmd->add_option("--baseline-left", baseline_left_path,
                          "metrics JSON of a LeftOnly run, enables reduction reporting");
    train_cmd->add_option("--baseline-right", baseline_right_path,
                          "metrics JSON of a RightOnly run");

    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on the test split");
    RunConfig eval_rc;
    eval_rc.train.seed = default_seed();
    std::string eval_config_path, eval_checkpoint, eval_out;
    add_train_flags(eval_cmd, eval_rc, eval_config_path);
    eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint file")->required();
    eval_cmd->add_option("--out", eval_out, "write metrics JSON here too");

    // ---- bench ----
    auto* bench_cmd = app.add_subcommand("bench", "per-stage latency on sample inputs");
    RunConfig bench_rc;
    bench_rc.train.seed = default_seed();
    std::string bench_config_path, bench_checkpoint;
    int bench_samples = 1000;
    add_train_flags(bench_cmd, bench_rc, bench_config_path);
    bench_cmd->add_option("--checkpoint", bench_checkpoint, "checkpoint file")->required();
    bench_cmd->add_option("--samples", bench_samples, "number of inputs (>= 1000 recommended)");

    // ---- classify ----
    auto* cls_cmd = app.add_subcommand("classify", "classify one capture");
    std::string cls_checkpoint, cls_cloud, cls_right;
    int cls_n = 320;
    std::uint64_t cls_seed = default_seed();
    PreprocessParams cls_prep;
    cls_cmd->add_option("--checkpoint", cls_checkpoint, "checkpoint file")->required();
    cls_cmd->add_option("--cloud", cls_cloud, "input PLY (fused or single view)")->required();
    cls_cmd->add_option("--right", cls_right, "right view PLY (dual topologies)");
    cls_cmd->add_option("--n", cls_n, "points per network input");
    cls_cmd->add_option("--seed", cls_seed, "downsampling seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (synth_cmd->parsed()) {
            synth::DatasetOptions opt;
            opt.captures_per_class_per_facing =
                synth_per_facing > 0 ? synth_per_facing : (synth_scale == "paper" ? 335 : 67);
            opt.sessions = synth_sessions;
            opt.add_body = !synth_no_body;
            opt.seed = synth_seed;
            const DatasetManifest manifest = synth::build_dataset(synth_out, opt);
            ordered_json j;
            j["manifest"] = (fs::path(synth_out) / "manifest.jsonl").string();
            j["records"] = manifest.records.size();
            j["cloud_files"] = manifest.records.size() * 2;
            j["sessions"] = synth_sessions;
            j["train"] = manifest.train_count();
            j["test"] = manifest.test_count();
            std::cout << j.dump(2) << std::endl;
            return 0;
        }

        if (reg_cmd->parsed()) {
            const PointCloud left = read_ply(reg_left);
            const PointCloud right = read_ply(reg_right);
            RigGeometry rig;  // identity-ish default when no rig file is given
            rig.yaw_deg = 0;
            rig.pitch_deg = 0;
            if (!reg_rig.empty()) rig = synth::load_rig_json(reg_rig);
            IcpParams params;
            params.delta = reg_delta;
            params.correspondence_distance = reg_corr;
            params.max_iterations = reg_iters;
            const IcpResult result = register_session(left, right, rig, params);
            ordered_json j = transform_json(result.transform);
            j["fitness"] = result.fitness;
            j["inlier_rmse"] = result.inlier_rmse;
            j["converged"] = result.converged;
            j["iterations"] = result.iterations;
            j["objective"] = result.objective_trace.empty() ? 0.0 : result.objective_trace.back();
            std::cout << j.dump(2) << std::endl;
            if (!reg_out.empty()) {
                std::ofstream out(reg_out);
                out << j.dump(2) << "\n";
            }
            return 0;
        }

        if (crop_cmd->parsed()) {
            const PointCloud cloud = read_ply(crop_in);
            const CropResult result =
                crop_to_arm(cloud, crop_prep.bin_width, crop_prep.min_prominence, crop_prep.gap);
            write_ply(result.cloud, crop_out, PlyFormat::BinaryLE);
            ordered_json j;
            j["points_before"] = cloud.size();
            j["points_after"] = result.cloud.size();
            j["removed"] = result.removed;
            j["no_peaks_warning"] = result.no_peaks_warning;
            std::cout << j.dump(2) << std::endl;
            return 0;
        }

        if (aug_cmd->parsed()) {
            const PointCloud cloud = read_ply(aug_in);
            const PointCloud out = augment(cloud, aug_params);
            write_ply(out, aug_out, PlyFormat::BinaryLE);
            ordered_json j;
            j["points"] = out.size();
            j["alpha"] = aug_params.alpha;
            j["beta"] = aug_params.beta;
            j["seed"] = aug_params.seed;
            std::cout << j.dump(2) << std::endl;
            return 0;
        }

        if (train_cmd->parsed()) {
            RunConfig rc;
            if (!train_config_path.empty()) apply_config_file(rc, train_config_path);
            // start from file config, then apply every flag the user passed
            RunConfig merged = rc;
            auto take_if = [&](const std::string& flag, auto member_ptr) {
                if (train_cmd->count(flag)) merged.train.*member_ptr = train_rc.train.*member_ptr;
            };
            take_if("--epochs", &TrainConfig::epochs);
            take_if("--trials", &TrainConfig::trials);
            take_if("--batch", &TrainConfig::batch_size);
            take_if("--lr", &TrainConfig::learning_rate);
            take_if("--n", &TrainConfig::point_count);
            take_if("--zeta", &TrainConfig::rotation_zeta_deg);
            take_if("--seed", &TrainConfig::seed);
            take_if("--split-seed", &TrainConfig::split_seed);
            take_if("--jobs", &TrainConfig::jobs);
            take_if("--share-branches", &TrainConfig::share_branches);
            if (train_cmd->count("--topology")) merged.train.topology = train_rc.train.topology;
            if (train_cmd->count("--variant")) merged.train.variant = train_rc.train.variant;
            if (train_cmd->count("--arch-divisor")) merged.arch_divisor = train_rc.arch_divisor;
            if (train_cmd->count("--manifest")) merged.manifest = train_rc.manifest;
            if (train_cmd->count("--out-dir")) merged.out_dir = train_rc.out_dir;
            if (merged.manifest.empty())
                throw std::invalid_argument("train: --manifest (or config manifest) is required");
            resolve_arch(merged);

            const DataStore store =
                DataStore::load(merged.manifest, merged.train.split_seed, merged.prep, merged.icp);
            fs::create_directories(merged.out_dir);
            Classifier<float> final_model(merged.train.topology, merged.train.arch, 0,
                                          merged.train.share_branches);
            const TrainOutput output = train(store, merged.train, &final_model);
            const std::string ckpt = (fs::path(merged.out_dir) / "checkpoint.ddnc").string();
            final_model.save(ckpt);
            write_history_csv((fs::path(merged.out_dir) / "history.csv").string(),
                              output.trials.front().history);

            ordered_json j = ordered_json::parse(metrics_json(output.aggregate, merged.train));
            if (!baseline_left_path.empty() && !baseline_right_path.empty()) {
                auto read_overall = [](const std::string& p) {
                    std::ifstream in(p);
                    if (!in) throw std::runtime_error("cannot open file: " + p);
                    json b;
                    in >> b;
                    return b.at("overall_mean").get<double>();
                };
                const double baseline =
                    0.5 * (read_overall(baseline_left_path) + read_overall(baseline_right_path));
                j["baseline_mean"] = baseline;
                j["misclassification_reduction"] =
                    misclassification_reduction(baseline, output.aggregate.overall);
            }
            j["checkpoint"] = ckpt;
            const std::string metrics_path = (fs::path(merged.out_dir) / "metrics.json").string();
            std::ofstream mf(metrics_path);
            mf << j.dump(2) << "\n";
            std::cout << j.dump(2) << std::endl;
            return 0;
        }

        if (eval_cmd->parsed()) {
            RunConfig rc;
            if (!eval_config_path.empty()) apply_config_file(rc, eval_config_path);
            RunConfig merged = rc;
            if (eval_cmd->count("--manifest")) merged.manifest = eval_rc.manifest;
            if (eval_cmd->count("--n")) merged.train.point_count = eval_rc.train.point_count;
            if (eval_cmd->count("--zeta"))
                merged.train.rotation_zeta_deg = eval_rc.train.rotation_zeta_deg;
            if (eval_cmd->count("--seed")) merged.train.seed = eval_rc.train.seed;
            if (eval_cmd->count("--split-seed")) merged.train.split_seed = eval_rc.train.split_seed;
            if (merged.manifest.empty())
                throw std::invalid_argument("eval: --manifest (or config manifest) is required");

            Classifier<float> model = Classifier<float>::load(eval_checkpoint);
            merged.train.topology = model.kind();
            merged.train.arch = model.descriptor();
            const DataStore store =
                DataStore::load(merged.manifest, merged.train.split_seed, merged.prep, merged.icp);
            const AccuracyReport report = evaluate(model, store, merged.train, Split::Test);
            const std::string out = metrics_json(report, merged.train);
            std::cout << out << std::endl;
            if (!eval_out.empty()) {
                std::ofstream f(eval_out);
                f << out << "\n";
            }
            return 0;
        }

        if (bench_cmd->parsed()) {
            RunConfig rc;
            if (!bench_config_path.empty()) apply_config_file(rc, bench_config_path);
            RunConfig merged = rc;
            if (bench_cmd->count("--manifest")) merged.manifest = bench_rc.manifest;
            if (bench_cmd->count("--n")) merged.train.point_count = bench_rc.train.point_count;
            if (merged.manifest.empty())
                throw std::invalid_argument("bench: --manifest (or config manifest) is required");
            Classifier<float> model = Classifier<float>::load(bench_checkpoint);

            // raw clouds straight from the manifest; crop/downsample run per input
            const DatasetManifest manifest = load_manifest(merged.manifest, 0);
            const fs::path dir = fs::path(merged.manifest).parent_path();
            const std::size_t distinct = std::min<std::size_t>(manifest.records.size(), 64);
            if (distinct == 0) throw std::runtime_error("bench: empty manifest");
            std::vector<PointCloud> raw_left, raw_right;
            for (std::size_t i = 0; i < distinct; ++i) {
                raw_left.push_back(read_ply((dir / manifest.records[i].left_path).string()));
                raw_right.push_back(read_ply((dir / manifest.records[i].right_path).string()));
            }

            const bool dual = model.dual_input();
            const int n = merged.train.point_count;
            std::vector<double> crop_ms, down_ms, cls_ms;
            using Clock = std::chrono::steady_clock;
            auto ms_since = [](Clock::time_point t0) {
                return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
            };
            for (int i = 0; i < bench_samples; ++i) {
                const auto& left = raw_left[std::size_t(i) % distinct];
                const auto& right = raw_right[std::size_t(i) % distinct];

                auto t0 = Clock::now();
                PointCloud cl = crop_to_arm(left, merged.prep.bin_width, merged.prep.min_prominence,
                                            merged.prep.gap)
                                    .cloud;
                PointCloud cr;
                if (dual)
                    cr = crop_to_arm(right, merged.prep.bin_width, merged.prep.min_prominence,
                                     merged.prep.gap)
                             .cloud;
                crop_ms.push_back(ms_since(t0));

                t0 = Clock::now();
                PointCloud dl = downsample_random(cl, std::size_t(n), std::uint64_t(i));
                PointCloud dr;
                if (dual) dr = downsample_random(cr, std::size_t(n), std::uint64_t(i) + 1);
                down_ms.push_back(ms_since(t0));

                t0 = Clock::now();
                BatchInput<float> in;
                in.b = 1;
                in.n1 = n;
                in.pts1 = points_matrix<float>(normalize(dl).cloud);
                if (dual) {
                    in.n2 = n;
                    in.pts2 = points_matrix<float>(normalize(dr).cloud);
                }
                nn::Mat<float> logits = model.forward(in, false);
                model.clear_caches();
                volatile float sink = logits(0, 0);
                (void)sink;
                cls_ms.push_back(ms_since(t0));
            }

            auto stage_json = [&](std::vector<double>& v) {
                double mean = 0;
                for (double x : v) mean += x;
                mean /= double(v.size());
                ordered_json s;
                s["mean_ms"] = mean;
                s["p50_ms"] = percentile(v, 0.50);
                s["p90_ms"] = percentile(v, 0.90);
                s["p99_ms"] = percentile(v, 0.99);
                return s;
            };
            std::vector<double> total_ms(crop_ms.size());
            for (std::size_t i = 0; i < total_ms.size(); ++i)
                total_ms[i] = crop_ms[i] + down_ms[i] + cls_ms[i];

            ordered_json j;
            j["samples"] = bench_samples;
            j["point_count"] = n;
            j["stages"] = {{"crop", stage_json(crop_ms)},
                           {"downsample", stage_json(down_ms)},
                           {"classify", stage_json(cls_ms)},
                           {"total", stage_json(total_ms)}};
            // single-camera GPU pipeline reference row for comparison
            j["reference_ms"] = {{"crop", 2.9}, {"downsample", 3.0}, {"classify", 1.2}, {"total", 7.1}};
            std::cout << j.dump(2) << std::endl;
            return 0;
        }

        if (cls_cmd->parsed()) {
            Classifier<float> model = Classifier<float>::load(cls_checkpoint);
            const PointCloud raw = read_ply(cls_cloud);
            const PointCloud input = prepare_for_classify(raw, cls_n, cls_seed, cls_prep);
            std::array<double, 10> probs{};
            if (model.dual_input()) {
                if (cls_right.empty())
                    throw std::invalid_argument("classify: dual topology needs --right");
                const PointCloud raw_r = read_ply(cls_right);
                const PointCloud input_r =
                    prepare_for_classify(raw_r, cls_n, cls_seed + 1, cls_prep);
                probs = model.kind() == TopologyKind::DualFeat
                            ? classify_dual_feat(input, input_r, model)
                            : classify_solo_feat(input, input_r, model);
            } else if (model.kind() == TopologyKind::Fused) {
                probs = classify_fused(input, model);
            } else {
                probs = classify_single(input, model);
            }
            int best = 0;
            for (int c = 1; c < 10; ++c)
                if (probs[std::size_t(c)] > probs[std::size_t(best)]) best = c;
            ordered_json j;
            ordered_json p;
            for (int c = 0; c < 10; ++c) p[gesture_name(Gesture(c))] = probs[std::size_t(c)];
            j["probabilities"] = p;
            j["predicted"] = gesture_name(Gesture(best));
            std::cout << j.dump(2) << std::endl;
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << std::endl;
        return exit_code_for(e);
    }
    return 0;
}
