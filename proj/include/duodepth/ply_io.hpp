#pragma once

#include <string>

#include "duodepth/geom.hpp"

namespace duodepth {

enum class PlyFormat { Ascii, BinaryLE };

// Coordinate/normal property width used by write_ply. Float64 round-trips
// the in-memory doubles bit-exactly; Float32 halves dataset size.
enum class PlyPrecision { Float64, Float32 };

// Reads ASCII or binary-little-endian PLY. Recognized vertex properties:
// x,y,z and nx,ny,nz as float32/float64, red,green,blue as uchar (scaled
// to [0,1]). Point order is preserved. Errors:
//   malformed header        -> "parse error: <line>"
//   big-endian payload      -> "unsupported format"
//   fewer vertices than declared -> "truncated payload"
PointCloud read_ply(const std::string& path);

void write_ply(const PointCloud& cloud, const std::string& path, PlyFormat format,
               PlyPrecision precision = PlyPrecision::Float64);

}  // namespace duodepth
