#include "duodepth/ply_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

static_assert(std::endian::native == std::endian::little,
              "binary PLY io assumes a little-endian host");

namespace duodepth {

namespace {

enum class PropType { F32, F64, U8, I8, U16, I16, U32, I32 };

std::size_t prop_size(PropType t) {
    switch (t) {
        case PropType::F64: return 8;
        case PropType::F32:
        case PropType::U32:
        case PropType::I32: return 4;
        case PropType::U16:
        case PropType::I16: return 2;
        default: return 1;
    }
}

bool parse_prop_type(const std::string& s, PropType& out) {
    if (s == "float" || s == "float32") out = PropType::F32;
    else if (s == "double" || s == "float64") out = PropType::F64;
    else if (s == "uchar" || s == "uint8") out = PropType::U8;
    else if (s == "char" || s == "int8") out = PropType::I8;
    else if (s == "ushort" || s == "uint16") out = PropType::U16;
    else if (s == "short" || s == "int16") out = PropType::I16;
    else if (s == "uint" || s == "uint32") out = PropType::U32;
    else if (s == "int" || s == "int32") out = PropType::I32;
    else return false;
    return true;
}

struct Property {
    std::string name;
    PropType type = PropType::F32;
};

[[noreturn]] void parse_fail(const std::string& line) {
    throw std::runtime_error("parse error: " + line);
}

double read_binary_value(std::istream& in, PropType t) {
    unsigned char buf[8];
    if (!in.read(reinterpret_cast<char*>(buf), std::streamsize(prop_size(t))))
        throw std::runtime_error("truncated payload");
    switch (t) {
        case PropType::F32: {
            float v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        case PropType::F64: {
            double v;
            std::memcpy(&v, buf, 8);
            return v;
        }
        case PropType::U8: return buf[0];
        case PropType::I8: return static_cast<std::int8_t>(buf[0]);
        case PropType::U16: {
            std::uint16_t v;
            std::memcpy(&v, buf, 2);
            return v;
        }
        case PropType::I16: {
            std::int16_t v;
            std::memcpy(&v, buf, 2);
            return v;
        }
        case PropType::U32: {
            std::uint32_t v;
            std::memcpy(&v, buf, 4);
            return v;
        }
        default: {
            std::int32_t v;
            std::memcpy(&v, buf, 4);
            return v;
        }
    }
}

}  // namespace

PointCloud read_ply(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);

    std::string line;
    if (!std::getline(in, line)) parse_fail("<empty file>");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "ply") parse_fail(line);

    bool binary = false;
    bool have_format = false;
    std::size_t vertex_count = 0;
    bool have_vertex_element = false;
    bool in_vertex_element = false;
    std::vector<Property> props;
    bool header_done = false;

    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ls(line);
        std::string kw;
        ls >> kw;
        if (kw == "comment" || kw == "obj_info" || kw.empty()) continue;
        if (kw == "format") {
            std::string fmt, ver;
            ls >> fmt >> ver;
            if (fmt == "ascii") binary = false;
            else if (fmt == "binary_little_endian") binary = true;
            else if (fmt == "binary_big_endian") throw std::runtime_error("unsupported format");
            else parse_fail(line);
            have_format = true;
        } else if (kw == "element") {
            std::string name;
            std::size_t count = 0;
            if (!(ls >> name >> count)) parse_fail(line);
            if (name == "vertex") {
                if (have_vertex_element) parse_fail(line);
                have_vertex_element = true;
                in_vertex_element = true;
                vertex_count = count;
            } else {
                // only a vertex element is consumed; later elements are
                // ignored, earlier ones would shift the payload
                if (!have_vertex_element && count > 0) throw std::runtime_error("unsupported format");
                in_vertex_element = false;
            }
        } else if (kw == "property") {
            std::string type_s;
            if (!(ls >> type_s)) parse_fail(line);
            if (type_s == "list") throw std::runtime_error("unsupported format");
            Property p;
            if (!parse_prop_type(type_s, p.type)) parse_fail(line);
            if (!(ls >> p.name)) parse_fail(line);
            if (in_vertex_element) props.push_back(p);
        } else if (kw == "end_header") {
            header_done = true;
            break;
        } else {
            parse_fail(line);
        }
    }
    if (!header_done || !have_format || !have_vertex_element) parse_fail(line);

    int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1, ir = -1, ig = -1, ib = -1;
    for (int i = 0; i < int(props.size()); ++i) {
        const auto& p = props[i];
        const bool fp = p.type == PropType::F32 || p.type == PropType::F64;
        if (p.name == "x" && fp) ix = i;
        else if (p.name == "y" && fp) iy = i;
        else if (p.name == "z" && fp) iz = i;
        else if (p.name == "nx" && fp) inx = i;
        else if (p.name == "ny" && fp) iny = i;
        else if (p.name == "nz" && fp) inz = i;
        else if (p.name == "red" && p.type == PropType::U8) ir = i;
        else if (p.name == "green" && p.type == PropType::U8) ig = i;
        else if (p.name == "blue" && p.type == PropType::U8) ib = i;
    }
    if (ix < 0 || iy < 0 || iz < 0) throw std::runtime_error("parse error: missing x/y/z properties");
    const bool has_normals = inx >= 0 && iny >= 0 && inz >= 0;
    const bool has_colors = ir >= 0 && ig >= 0 && ib >= 0;

    PointCloud cloud;
    cloud.points.reserve(vertex_count);
    if (has_normals) cloud.normals.reserve(vertex_count);
    if (has_colors) cloud.colors.reserve(vertex_count);

    std::vector<double> row(props.size());
    for (std::size_t v = 0; v < vertex_count; ++v) {
        if (binary) {
            for (std::size_t c = 0; c < props.size(); ++c)
                row[c] = read_binary_value(in, props[c].type);
        } else {
            std::string data_line;
            do {
                if (!std::getline(in, data_line)) throw std::runtime_error("truncated payload");
            } while (data_line.find_first_not_of(" \t\r\n") == std::string::npos);
            std::istringstream ls(data_line);
            for (std::size_t c = 0; c < props.size(); ++c) {
                if (!(ls >> row[c])) {
                    // distinguish a short line (payload ran out) from junk
                    std::string tail;
                    ls.clear();
                    if (ls >> tail) parse_fail(data_line);
                    throw std::runtime_error("truncated payload");
                }
            }
        }
        cloud.points.emplace_back(row[ix], row[iy], row[iz]);
        if (has_normals) cloud.normals.emplace_back(row[inx], row[iny], row[inz]);
        if (has_colors)
            cloud.colors.emplace_back(row[ir] / 255.0, row[ig] / 255.0, row[ib] / 255.0);
    }
    return cloud;
}

void write_ply(const PointCloud& cloud, const std::string& path, PlyFormat format,
               PlyPrecision precision) {
    if (!cloud.colors.empty() && cloud.colors.size() != cloud.points.size())
        throw std::runtime_error("color attribute length mismatch");
    if (!cloud.normals.empty() && cloud.normals.size() != cloud.points.size())
        throw std::runtime_error("normal attribute length mismatch");

    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);

    const char* coord_type = precision == PlyPrecision::Float64 ? "double" : "float";
    out << "ply\n";
    out << (format == PlyFormat::Ascii ? "format ascii 1.0\n" : "format binary_little_endian 1.0\n");
    out << "element vertex " << cloud.size() << "\n";
    out << "property " << coord_type << " x\n";
    out << "property " << coord_type << " y\n";
    out << "property " << coord_type << " z\n";
    if (cloud.has_normals()) {
        out << "property " << coord_type << " nx\n";
        out << "property " << coord_type << " ny\n";
        out << "property " << coord_type << " nz\n";
    }
    if (cloud.has_colors()) {
        out << "property uchar red\n";
        out << "property uchar green\n";
        out << "property uchar blue\n";
    }
    out << "end_header\n";

    auto put_scalar = [&](double v) {
        if (precision == PlyPrecision::Float64) {
            out.write(reinterpret_cast<const char*>(&v), 8);
        } else {
            const float f = static_cast<float>(v);
            out.write(reinterpret_cast<const char*>(&f), 4);
        }
    };
    auto color_byte = [](double c) {
        const int v = int(std::lround(c * 255.0));
        return static_cast<unsigned char>(std::clamp(v, 0, 255));
    };

    if (format == PlyFormat::BinaryLE) {
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            for (int a = 0; a < 3; ++a) put_scalar(cloud.points[i][a]);
            if (cloud.has_normals())
                for (int a = 0; a < 3; ++a) put_scalar(cloud.normals[i][a]);
            if (cloud.has_colors()) {
                unsigned char rgb[3];
                for (int a = 0; a < 3; ++a) rgb[a] = color_byte(cloud.colors[i][a]);
                out.write(reinterpret_cast<const char*>(rgb), 3);
            }
        }
    } else {
        out.precision(17);
        for (std::size_t i = 0; i < cloud.size(); ++i) {
            out << cloud.points[i].x() << ' ' << cloud.points[i].y() << ' ' << cloud.points[i].z();
            if (cloud.has_normals())
                out << ' ' << cloud.normals[i].x() << ' ' << cloud.normals[i].y() << ' '
                    << cloud.normals[i].z();
            if (cloud.has_colors())
                out << ' ' << int(color_byte(cloud.colors[i].x())) << ' '
                    << int(color_byte(cloud.colors[i].y())) << ' '
                    << int(color_byte(cloud.colors[i].z()));
            out << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace duodepth
