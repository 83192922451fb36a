#include "duodepth/nn.hpp"

#include <cstring>
#include <fstream>

namespace duodepth::nn {

ArchVariant variant_from_name(const std::string& name) {
    if (name == "NONE") return {};
    if (name == "D") return {0.3, false, false};
    if (name == "R") return {0.0, true, false};
    if (name == "R+D") return {0.3, true, false};
    if (name == "SELU") return {0.0, false, true};
    throw std::invalid_argument("unknown variant \"" + name + "\" (NONE, D, R, R+D, SELU)");
}

std::string variant_name(const ArchVariant& v) {
    if (v.selu && v.dropout == 0.0 && !v.reduced) return "SELU";
    if (!v.selu && v.dropout > 0.0 && v.reduced) return "R+D";
    if (!v.selu && v.dropout > 0.0) return "D";
    if (!v.selu && v.reduced) return "R";
    if (!v.selu && v.dropout == 0.0 && !v.reduced) return "NONE";
    return "CUSTOM";
}

ArchDescriptor make_variant(const ArchVariant& v) {
    ArchDescriptor d;
    if (v.reduced) {
        d.stn_mlp = {32, 64, 128};
        d.stn_fc = {64, 32};
        d.feat_mlp = {32, 64, 256};
        d.cls_fc = {128, 64};
    }
    d.dropout = v.dropout;
    d.selu = v.selu;
    return d;
}

ArchDescriptor scaled_descriptor(int divisor, const ArchVariant& v) {
    if (divisor < 1) throw std::invalid_argument("scaled_descriptor: divisor must be >= 1");
    ArchDescriptor d;
    auto shrink = [divisor](int w) { return std::max(4, w / divisor); };
    for (auto& w : d.stn_mlp) w = shrink(w);
    for (auto& w : d.stn_fc) w = shrink(w);
    for (auto& w : d.feat_mlp) w = shrink(w);
    for (auto& w : d.cls_fc) w = shrink(w);
    d.dropout = v.dropout;
    d.selu = v.selu;
    return d;
}

namespace {
constexpr char kMagic[4] = {'D', 'D', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void save_checkpoint_blob(const std::string& path, const std::string& descriptor_json,
                          const std::vector<float>& payload) {
    std::string buf;
    buf.append(kMagic, 4);
    auto append_raw = [&buf](const void* p, std::size_t n) {
        buf.append(static_cast<const char*>(p), n);
    };
    append_raw(&kVersion, 4);
    const std::uint64_t dlen = descriptor_json.size();
    append_raw(&dlen, 8);
    buf.append(descriptor_json);
    const std::uint64_t plen = payload.size();
    append_raw(&plen, 8);
    append_raw(payload.data(), payload.size() * 4);
    const std::uint64_t checksum = fnv1a64(buf.data(), buf.size());
    append_raw(&checksum, 8);

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out.write(buf.data(), std::streamsize(buf.size()));
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::pair<std::string, std::vector<float>> load_checkpoint_blob(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 4 + 4 + 8 + 8 + 8 || std::memcmp(buf.data(), kMagic, 4) != 0)
        throw std::runtime_error("checkpoint corrupted: bad magic");

    std::uint64_t stored_checksum;
    std::memcpy(&stored_checksum, buf.data() + buf.size() - 8, 8);
    if (fnv1a64(buf.data(), buf.size() - 8) != stored_checksum)
        throw std::runtime_error("checkpoint corrupted: checksum mismatch");

    std::size_t off = 4;
    std::uint32_t version;
    std::memcpy(&version, buf.data() + off, 4);
    off += 4;
    if (version != kVersion) throw std::runtime_error("checkpoint corrupted: unknown version");

    std::uint64_t dlen;
    std::memcpy(&dlen, buf.data() + off, 8);
    off += 8;
    if (off + dlen + 8 + 8 > buf.size()) throw std::runtime_error("checkpoint corrupted: truncated");
    std::string descriptor(buf.data() + off, dlen);
    off += dlen;

    std::uint64_t plen;
    std::memcpy(&plen, buf.data() + off, 8);
    off += 8;
    if (off + plen * 4 + 8 != buf.size())
        throw std::runtime_error("checkpoint corrupted: truncated");
    std::vector<float> payload(plen);
    std::memcpy(payload.data(), buf.data() + off, plen * 4);
    return {std::move(descriptor), std::move(payload)};
}

}  // namespace duodepth::nn
