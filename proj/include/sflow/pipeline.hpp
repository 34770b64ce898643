#pragma once

#include <optional>
#include <string>
#include <vector>

#include "sflow/field.hpp"
#include "sflow/initializer.hpp"
#include "sflow/synth.hpp"

namespace sflow {

// On-disk clip layout (one directory per clip):
//   l1.pfm r1.pfm l2.pfm r2.pfm          images
//   gt_d1.pfm gt_d2.pfm gt_flow.flo
//   gt_dchange.pfm gt_bflow.flo          ground truth (optional)
//   gt_occ.pfm gt_valid.pfm              masks (optional)
// Initializer outputs (init dir):
//   init_d1.pfm init_d2.pfm init_flow.flo init_dchange.pfm bflow.flo
// Refined outputs mirror the init names with a refined_ prefix.

void save_sample_dir(const std::string& dir, const SyntheticSample& sample);

struct LoadedClip {
    StereoClip clip;  // backward_flow empty unless gt_bflow.flo is present
    std::optional<SceneFlowState> gt;
    ImageField gt_occ;    // empty if absent
    ImageField gt_valid;  // empty if absent
};

LoadedClip load_clip_dir(const std::string& dir);

void save_init_dir(const std::string& dir, const SceneFlowState& state,
                   const ImageField& backward_flow);
InitResult load_init_dir(const std::string& dir);

void save_refined_dir(const std::string& dir, const SceneFlowState& state);
SceneFlowState load_refined_dir(const std::string& dir);

// Clip subdirectories of `dir` (names starting with "sample_"), sorted.
std::vector<std::string> list_sample_dirs(const std::string& dir);

void write_text_atomic(const std::string& path, const std::string& text);

}  // namespace sflow
