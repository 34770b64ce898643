#pragma once

#include <cstdint>
#include <string>

#include "sflow/consistency.hpp"
#include "sflow/initializer.hpp"
#include "sflow/refiner.hpp"
#include "sflow/synth.hpp"

namespace sflow {

// Flat run configuration. Every key has a default; the config file is plain
// `key = value` lines with '#' comments, and unknown keys are rejected.
struct RunConfig {
    // consistency loss
    double omega_pd = 1.0;
    double omega_pf = 1.0;
    double omega_df = 1.0;
    double omega_s = 0.1;
    double occ_w1 = 0.01;
    double occ_w2 = 0.05;
    double alpha_ssim = 0.85;
    int ssim_window = 3;
    double ssim_c1 = 1e-4;
    double ssim_c2 = 9e-4;

    // refiner / training
    int hidden_width = 32;
    int refine_steps = 5;
    double adam_lr = 1e-4;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double adam_eps = 1e-8;
    int epochs = 4;
    std::string train_mode = "sup";  // sup | selfsup
    std::uint64_t seed = 1;
    int sup_d2 = 0;
    double grad_feature_scale = 0.0;  // 0 = pixel count

    // output-descent baseline
    double descent_lr = 20000.0;

    // initializer
    int max_disp = 32;
    int bm_patch = 9;
    int flow_radius = 6;
    int flow_patch = 9;
    int pyramid_levels = 2;
    double c_clamp = 16.0;

    // synthetic generator
    int synth_width = 128;
    int synth_height = 96;
    int min_fg_layers = 1;
    int max_fg_layers = 2;
    double disp_min = 1.0;
    double disp_max = 32.0;
    double flow_max_x = 5.0;
    double flow_max_y = 2.0;
    double dchange_max = 1.5;
    double sigma_img = 0.0;

    LossWeights loss_weights() const;
    PhotometricParams photometric_params() const;
    OcclusionParams occlusion_params() const;
    InitConfig init_config() const;
    SceneRanges scene_ranges() const;
    RefineConfig refine_config() const;
    TrainConfig train_config() const;
};

// Parses the key-value file at `path`; an empty file yields all defaults.
// Throws with the offending line number on parse errors or unknown keys.
RunConfig load_config(const std::string& path);

// Parse from a string (used by load_config and the tests).
RunConfig parse_config(const std::string& text, const std::string& origin);

}  // namespace sflow
