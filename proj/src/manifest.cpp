#include "duodepth/manifest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "duodepth/common.hpp"

namespace duodepth {

namespace {
const std::array<std::string, kNumGestures> kGestureNames = {
    "Zero", "One", "Two", "Three", "Frame", "Four", "Five", "Ell", "Thumb", "Bird"};
const std::array<std::string, 3> kFacingNames = {"Left", "Right", "Neither"};
}  // namespace

const std::string& gesture_name(Gesture g) { return kGestureNames[int(g)]; }
const std::string& facing_name(Facing f) { return kFacingNames[int(f)]; }

Gesture gesture_from_name(const std::string& s) {
    for (int i = 0; i < kNumGestures; ++i)
        if (kGestureNames[i] == s) return Gesture(i);
    throw std::runtime_error("schema error: unknown gesture \"" + s + "\"");
}

Facing facing_from_name(const std::string& s) {
    for (int i = 0; i < 3; ++i)
        if (kFacingNames[i] == s) return Facing(i);
    throw std::runtime_error("schema error: unknown facing \"" + s + "\"");
}

std::size_t DatasetManifest::train_count() const {
    std::size_t n = 0;
    for (const auto& [id, s] : split)
        if (s == Split::Train) ++n;
    return n;
}

std::size_t DatasetManifest::test_count() const { return split.size() - train_count(); }

void assign_split(DatasetManifest& manifest, std::uint64_t seed) {
    manifest.split.clear();
    // group record indices by (gesture, facing) stratum
    std::map<std::pair<int, int>, std::vector<std::size_t>> groups;
    for (std::size_t i = 0; i < manifest.records.size(); ++i) {
        const auto& r = manifest.records[i];
        groups[{int(r.gesture), int(r.facing)}].push_back(i);
    }
    for (auto& [key, idx] : groups) {
        Rng rng(mix_seed(seed, std::uint64_t(key.first) * 16 + std::uint64_t(key.second)));
        for (std::size_t i = idx.size(); i > 1; --i)
            std::swap(idx[i - 1], idx[rng.uniform_index(i)]);
        std::size_t n_train = std::size_t(std::llround(0.8 * double(idx.size())));
        if (idx.size() >= 2) n_train = std::clamp<std::size_t>(n_train, 1, idx.size() - 1);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            const auto& r = manifest.records[idx[i]];
            manifest.split[r.capture_id] = i < n_train ? Split::Train : Split::Test;
        }
    }
}

void validate_split(const DatasetManifest& manifest) {
    std::array<std::size_t, kNumGestures> total{}, train{};
    for (const auto& r : manifest.records) {
        const auto it = manifest.split.find(r.capture_id);
        if (it == manifest.split.end())
            throw std::runtime_error("schema error: capture \"" + r.capture_id + "\" has no split");
        ++total[int(r.gesture)];
        if (it->second == Split::Train) ++train[int(r.gesture)];
    }
    for (int g = 0; g < kNumGestures; ++g) {
        if (total[g] == 0) continue;
        const double target = 0.8 * double(total[g]);
        const double slack = std::max(1.0, 0.01 * double(total[g]));
        if (std::abs(double(train[g]) - target) > slack)
            throw std::runtime_error("schema error: split for gesture " + kGestureNames[g] +
                                     " is not 80/20 within tolerance");
    }
}

DatasetManifest load_manifest(const std::string& path, std::uint64_t split_seed) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    DatasetManifest manifest;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw std::runtime_error("schema error: line " + std::to_string(line_no) + ": " +
                                     e.what());
        }
        static const std::array<const char*, 6> keys = {
            "capture_id", "gesture", "facing", "left_path", "right_path", "session_id"};
        for (const char* k : keys)
            if (!j.contains(k) || !j[k].is_string())
                throw std::runtime_error("schema error: line " + std::to_string(line_no) +
                                         ": missing string field \"" + k + "\"");
        for (const auto& [k, v] : j.items())
            if (std::find_if(keys.begin(), keys.end(),
                             [&](const char* s) { return k == s; }) == keys.end())
                throw std::runtime_error("schema error: line " + std::to_string(line_no) +
                                         ": unknown field \"" + k + "\"");
        CaptureRecord r;
        r.capture_id = j["capture_id"].get<std::string>();
        r.gesture = gesture_from_name(j["gesture"].get<std::string>());
        r.facing = facing_from_name(j["facing"].get<std::string>());
        r.left_path = j["left_path"].get<std::string>();
        r.right_path = j["right_path"].get<std::string>();
        r.session_id = j["session_id"].get<std::string>();
        if (r.left_path.empty() || r.right_path.empty())
            throw std::runtime_error("schema error: line " + std::to_string(line_no) +
                                     ": empty cloud path");
        if (manifest.split.count(r.capture_id))
            throw std::runtime_error("schema error: duplicate capture_id \"" + r.capture_id + "\"");
        manifest.split[r.capture_id] = Split::Train;  // placeholder until assign_split
        manifest.records.push_back(std::move(r));
    }
    assign_split(manifest, split_seed);
    validate_split(manifest);
    return manifest;
}

void save_manifest(const DatasetManifest& manifest, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    for (const auto& r : manifest.records) {
        nlohmann::ordered_json j;
        j["capture_id"] = r.capture_id;
        j["gesture"] = gesture_name(r.gesture);
        j["facing"] = facing_name(r.facing);
        j["left_path"] = r.left_path;
        j["right_path"] = r.right_path;
        j["session_id"] = r.session_id;
        out << j.dump() << "\n";
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace duodepth
