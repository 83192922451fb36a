#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace duodepth {

// Class indices are fixed by this order everywhere (labels, confusion
// matrices, checkpoint metadata).
enum class Gesture : int {
    Zero = 0, One, Two, Three, Frame, Four, Five, Ell, Thumb, Bird
};
constexpr int kNumGestures = 10;

enum class Facing : int { Left = 0, Right, Neither };

const std::string& gesture_name(Gesture g);
const std::string& facing_name(Facing f);
// Throw "schema error: ..." on unknown names.
Gesture gesture_from_name(const std::string& s);
Facing facing_from_name(const std::string& s);

struct CaptureRecord {
    std::string capture_id;
    Gesture gesture = Gesture::Zero;
    Facing facing = Facing::Left;
    std::string left_path;
    std::string right_path;
    std::string session_id;
};

enum class Split { Train, Test };

struct DatasetManifest {
    std::vector<CaptureRecord> records;
    std::unordered_map<std::string, Split> split;  // capture_id -> assignment

    std::size_t train_count() const;
    std::size_t test_count() const;
};

// Deterministic stratified 80/20 assignment, per (gesture, facing) group.
void assign_split(DatasetManifest& manifest, std::uint64_t seed);

// Per-gesture proportions must sit within 1% of 80/20 (with one record of
// integer slack for small groups); throws otherwise.
void validate_split(const DatasetManifest& manifest);

// JSONL, one record per line with keys capture_id, gesture, facing,
// left_path, right_path, session_id. The split is not stored: it is
// re-derived from `split_seed` on load and validated.
DatasetManifest load_manifest(const std::string& path, std::uint64_t split_seed = 0);
void save_manifest(const DatasetManifest& manifest, const std::string& path);

}  // namespace duodepth
