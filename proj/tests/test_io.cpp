#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "duodepth/manifest.hpp"
#include "duodepth/ply_io.hpp"
#include "testutil.hpp"

using namespace duodepth;
using testutil::TempDir;

TEST_CASE("read_ply parses a hand-written ascii fixture") {
    TempDir tmp("ply_ascii");
    {
        std::ofstream f(tmp.file("two.ply"));
        f << "ply\n"
             "format ascii 1.0\n"
             "comment hand written\n"
             "element vertex 2\n"
             "property float x\n"
             "property float y\n"
             "property float z\n"
             "end_header\n"
             "0.5 -1.25 3.0\n"
             "1 2 3\n";
    }
    const PointCloud cloud = read_ply(tmp.file("two.ply"));
    REQUIRE(cloud.size() == 2);
    CHECK_FALSE(cloud.has_colors());
    CHECK_FALSE(cloud.has_normals());
    CHECK(cloud.points[0] == Vec3(0.5, -1.25, 3.0));
    CHECK(cloud.points[1] == Vec3(1, 2, 3));
}

TEST_CASE("binary round trip is bit exact including normals") {
    Rng rng(21);
    PointCloud cloud = testutil::random_cloud(500, rng, 2.0, true);
    cloud.normals.reserve(cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        Vec3 n(rng.normal(), rng.normal(), rng.normal());
        while (n.norm() < 1e-6) n = Vec3(rng.normal(), rng.normal(), rng.normal());
        cloud.normals.push_back(n.normalized());
    }
    TempDir tmp("ply_bin");
    write_ply(cloud, tmp.file("c.ply"), PlyFormat::BinaryLE);
    const PointCloud back = read_ply(tmp.file("c.ply"));
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        CHECK(back.points[i] == cloud.points[i]);    // bitwise
        CHECK(back.normals[i] == cloud.normals[i]);  // bitwise
        CHECK((back.colors[i] - cloud.colors[i]).cwiseAbs().maxCoeff() <= 0.5 / 255.0 + 1e-12);
    }
}

TEST_CASE("ascii round trip within decimal tolerance") {
    Rng rng(22);
    const PointCloud cloud = testutil::random_cloud(100, rng, 3.0);
    TempDir tmp("ply_ascii_rt");
    write_ply(cloud, tmp.file("c.ply"), PlyFormat::Ascii);
    const PointCloud back = read_ply(tmp.file("c.ply"));
    REQUIRE(back.size() == cloud.size());
    for (std::size_t i = 0; i < cloud.size(); ++i)
        CHECK((back.points[i] - cloud.points[i]).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("empty cloud writes a valid ply") {
    TempDir tmp("ply_empty");
    write_ply(PointCloud{}, tmp.file("e.ply"), PlyFormat::BinaryLE);
    const PointCloud back = read_ply(tmp.file("e.ply"));
    CHECK(back.size() == 0);
}

TEST_CASE("header lists the nine properties in order") {
    Rng rng(23);
    PointCloud cloud = testutil::random_cloud(3, rng, 1.0, true);
    cloud.normals.assign(3, Vec3(0, 0, 1));
    TempDir tmp("ply_props");
    write_ply(cloud, tmp.file("c.ply"), PlyFormat::BinaryLE);

    std::ifstream f(tmp.file("c.ply"), std::ios::binary);
    std::string line;
    std::vector<std::string> names;
    while (std::getline(f, line) && line != "end_header") {
        if (line.rfind("property", 0) == 0) names.push_back(line.substr(line.rfind(' ') + 1));
    }
    const std::vector<std::string> expected = {"x", "y", "z", "nx", "ny", "nz",
                                               "red", "green", "blue"};
    CHECK(names == expected);
}

TEST_CASE("truncated payload detected") {
    TempDir tmp("ply_trunc");
    {
        std::ofstream f(tmp.file("t.ply"));
        f << "ply\nformat ascii 1.0\nelement vertex 10\n"
             "property float x\nproperty float y\nproperty float z\nend_header\n";
        for (int i = 0; i < 9; ++i) f << i << " 0 0\n";
    }
    CHECK_THROWS_WITH_AS(read_ply(tmp.file("t.ply")), "truncated payload", std::runtime_error);
}

TEST_CASE("malformed header and unsupported formats") {
    TempDir tmp("ply_bad");
    {
        std::ofstream f(tmp.file("notply.ply"));
        f << "plyx\nwhatever\n";
    }
    CHECK_THROWS_AS(read_ply(tmp.file("notply.ply")), std::runtime_error);
    try {
        read_ply(tmp.file("notply.ply"));
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).rfind("parse error:", 0) == 0);
    }

    {
        std::ofstream f(tmp.file("be.ply"));
        f << "ply\nformat binary_big_endian 1.0\nelement vertex 0\n"
             "property float x\nproperty float y\nproperty float z\nend_header\n";
    }
    CHECK_THROWS_WITH_AS(read_ply(tmp.file("be.ply")), "unsupported format", std::runtime_error);
}

// ---------------------------------------------------------------------------

namespace {
DatasetManifest synthetic_manifest(int per_gesture_per_facing) {
    DatasetManifest m;
    for (int g = 0; g < kNumGestures; ++g)
        for (int f = 0; f < 3; ++f)
            for (int i = 0; i < per_gesture_per_facing; ++i) {
                CaptureRecord r;
                r.capture_id = gesture_name(Gesture(g)) + "_" + facing_name(Facing(f)) + "_" +
                               std::to_string(i);
                r.gesture = Gesture(g);
                r.facing = Facing(f);
                r.left_path = "clouds/" + r.capture_id + "_l.ply";
                r.right_path = "clouds/" + r.capture_id + "_r.ply";
                r.session_id = "s" + std::to_string(i % 3);
                m.records.push_back(r);
            }
    assign_split(m, 7);
    return m;
}
}  // namespace

TEST_CASE("manifest at recorded-protocol scale round trips") {
    // 335 per facing -> 1005 per gesture, 10050 records, 20100 cloud files
    DatasetManifest m = synthetic_manifest(335);
    REQUIRE(m.records.size() == 10050);
    std::set<std::string> files;
    for (const auto& r : m.records) {
        files.insert(r.left_path);
        files.insert(r.right_path);
    }
    CHECK(files.size() == 20100);
    validate_split(m);

    TempDir tmp("manifest_big");
    save_manifest(m, tmp.file("manifest.jsonl"));
    const DatasetManifest back = load_manifest(tmp.file("manifest.jsonl"), 7);
    REQUIRE(back.records.size() == m.records.size());
    for (std::size_t i = 0; i < m.records.size(); ++i) {
        CHECK(back.records[i].capture_id == m.records[i].capture_id);
        CHECK(back.records[i].gesture == m.records[i].gesture);
        CHECK(back.records[i].facing == m.records[i].facing);
        CHECK(back.records[i].session_id == m.records[i].session_id);
    }
    // same split seed reproduces the same assignment
    for (const auto& [id, split] : m.split) CHECK(back.split.at(id) == split);
}

TEST_CASE("split is stratified 80/20 per gesture and deterministic") {
    DatasetManifest m = synthetic_manifest(67);  // desk scale: 201 per gesture
    std::array<int, kNumGestures> train{}, total{};
    for (const auto& r : m.records) {
        ++total[int(r.gesture)];
        if (m.split.at(r.capture_id) == Split::Train) ++train[int(r.gesture)];
    }
    for (int g = 0; g < kNumGestures; ++g) {
        CHECK(total[g] == 201);
        CHECK(std::abs(double(train[g]) / double(total[g]) - 0.8) <= 0.01);
    }

    DatasetManifest m2 = synthetic_manifest(67);
    for (const auto& [id, split] : m.split) CHECK(m2.split.at(id) == split);

    // a different seed moves at least one capture
    DatasetManifest m3 = m;
    assign_split(m3, 8);
    bool any_diff = false;
    for (const auto& [id, split] : m.split)
        if (m3.split.at(id) != split) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("empty manifest is valid") {
    TempDir tmp("manifest_empty");
    {
        std::ofstream f(tmp.file("m.jsonl"));
    }
    const DatasetManifest m = load_manifest(tmp.file("m.jsonl"));
    CHECK(m.records.empty());
}

TEST_CASE("unknown gesture value is a schema error") {
    TempDir tmp("manifest_schema");
    {
        std::ofstream f(tmp.file("m.jsonl"));
        f << R"({"capture_id":"a","gesture":"Six","facing":"Left","left_path":"l.ply","right_path":"r.ply","session_id":"s0"})"
          << "\n";
    }
    try {
        load_manifest(tmp.file("m.jsonl"));
        FAIL("expected schema error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("schema error") != std::string::npos);
    }
}

TEST_CASE("unknown manifest key is a schema error") {
    TempDir tmp("manifest_key");
    {
        std::ofstream f(tmp.file("m.jsonl"));
        f << R"({"capture_id":"a","gesture":"Two","facing":"Left","left_path":"l.ply","right_path":"r.ply","session_id":"s0","extra":"x"})"
          << "\n";
    }
    try {
        load_manifest(tmp.file("m.jsonl"));
        FAIL("expected schema error");
    } catch (const std::exception& e) {
        CHECK(std::string(e.what()).find("schema error") != std::string::npos);
    }
}
