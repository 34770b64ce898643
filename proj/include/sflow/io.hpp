#pragma once

#include <string>
#include <utility>

#include "sflow/field.hpp"

namespace sflow {

// Portable Float Map, single channel ("Pf"). Rows are stored bottom-to-top;
// a negative scale marks little-endian payload. Round-trips are bit-exact
// for float32 data.
ImageField read_pfm(const std::string& path);
void write_pfm(const std::string& path, const ImageField& map);

// Middlebury .flo: float magic 202021.25, int32 width/height, interleaved
// (u, v) float32 row-major.
ImageField read_flo(const std::string& path);
void write_flo(const std::string& path, const ImageField& flow);

// KITTI disparity: 16-bit grayscale PNG, disparity = value / 256.0, 0 means
// invalid. Returns the map and a validity mask.
std::pair<ImageField, ImageField> read_kitti_disp_png(const std::string& path);
void write_kitti_disp_png(const std::string& path, const ImageField& disp,
                          const ImageField* valid = nullptr);

// KITTI flow: 16-bit RGB PNG, u/v = (value - 2^15) / 64.0, third channel is
// the validity flag.
std::pair<ImageField, ImageField> read_kitti_flow_png(const std::string& path);
void write_kitti_flow_png(const std::string& path, const ImageField& flow,
                          const ImageField* valid = nullptr);

// 8-bit PNG (gray or RGB) loaded into [0,1].
ImageField read_png8(const std::string& path);

}  // namespace sflow
