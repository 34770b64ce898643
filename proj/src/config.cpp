#include "sflow/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace sflow {

LossWeights RunConfig::loss_weights() const {
    return {omega_pd, omega_pf, omega_df, omega_s};
}

PhotometricParams RunConfig::photometric_params() const {
    return {alpha_ssim, ssim_window, ssim_c1, ssim_c2};
}

OcclusionParams RunConfig::occlusion_params() const { return {occ_w1, occ_w2}; }

InitConfig RunConfig::init_config() const {
    InitConfig c;
    c.max_disp = max_disp;
    c.bm_patch = bm_patch;
    c.flow_radius = flow_radius;
    c.flow_patch = flow_patch;
    c.pyramid_levels = pyramid_levels;
    c.c_clamp = c_clamp;
    return c;
}

SceneRanges RunConfig::scene_ranges() const {
    SceneRanges r;
    r.width = synth_width;
    r.height = synth_height;
    r.min_fg_layers = min_fg_layers;
    r.max_fg_layers = max_fg_layers;
    r.disp_min = disp_min;
    r.disp_max = disp_max;
    r.flow_max_x = flow_max_x;
    r.flow_max_y = flow_max_y;
    r.dchange_max = dchange_max;
    r.sigma_img = sigma_img;
    return r;
}

RefineConfig RunConfig::refine_config() const {
    RefineConfig c;
    c.steps = refine_steps;
    c.weights = loss_weights();
    c.photo = photometric_params();
    c.occ = occlusion_params();
    c.grad_feature_scale = grad_feature_scale;
    return c;
}

TrainConfig RunConfig::train_config() const {
    TrainConfig c;
    c.steps = refine_steps;
    c.epochs = epochs;
    c.width = hidden_width;
    c.mode = train_mode == "selfsup" ? TrainMode::SelfSupervised : TrainMode::Supervised;
    c.seed = seed;
    c.sup_d2 = sup_d2 != 0;
    c.adam = {adam_lr, adam_beta1, adam_beta2, adam_eps};
    c.weights = loss_weights();
    c.photo = photometric_params();
    c.occ = occlusion_params();
    c.grad_feature_scale = grad_feature_scale;
    return c;
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] void fail(const std::string& origin, int line, const std::string& msg) {
    throw std::runtime_error(origin + ":" + std::to_string(line) + ": " + msg);
}

}  // namespace

RunConfig parse_config(const std::string& text, const std::string& origin) {
    RunConfig cfg;

    using Setter = std::function<bool(const std::string&)>;
    auto num = [](double* dst) {
        return [dst](const std::string& v) {
            std::size_t used = 0;
            double parsed;
            try {
                parsed = std::stod(v, &used);
            } catch (const std::exception&) {
                return false;
            }
            if (used != v.size()) return false;
            *dst = parsed;
            return true;
        };
    };
    auto integer = [](int* dst) {
        return [dst](const std::string& v) {
            std::size_t used = 0;
            long parsed;
            try {
                parsed = std::stol(v, &used);
            } catch (const std::exception&) {
                return false;
            }
            if (used != v.size()) return false;
            *dst = static_cast<int>(parsed);
            return true;
        };
    };
    auto uint64 = [](std::uint64_t* dst) {
        return [dst](const std::string& v) {
            std::size_t used = 0;
            unsigned long long parsed;
            try {
                parsed = std::stoull(v, &used);
            } catch (const std::exception&) {
                return false;
            }
            if (used != v.size()) return false;
            *dst = parsed;
            return true;
        };
    };
    auto mode_string = [](std::string* dst) {
        return [dst](const std::string& v) {
            if (v != "sup" && v != "selfsup") return false;
            *dst = v;
            return true;
        };
    };

    const std::map<std::string, Setter> keys = {
        {"omega_pd", num(&cfg.omega_pd)},
        {"omega_pf", num(&cfg.omega_pf)},
        {"omega_df", num(&cfg.omega_df)},
        {"omega_s", num(&cfg.omega_s)},
        {"occ_w1", num(&cfg.occ_w1)},
        {"occ_w2", num(&cfg.occ_w2)},
        {"alpha_ssim", num(&cfg.alpha_ssim)},
        {"ssim_window", integer(&cfg.ssim_window)},
        {"ssim_c1", num(&cfg.ssim_c1)},
        {"ssim_c2", num(&cfg.ssim_c2)},
        {"hidden_width", integer(&cfg.hidden_width)},
        {"refine_steps", integer(&cfg.refine_steps)},
        {"adam_lr", num(&cfg.adam_lr)},
        {"adam_beta1", num(&cfg.adam_beta1)},
        {"adam_beta2", num(&cfg.adam_beta2)},
        {"adam_eps", num(&cfg.adam_eps)},
        {"epochs", integer(&cfg.epochs)},
        {"train_mode", mode_string(&cfg.train_mode)},
        {"seed", uint64(&cfg.seed)},
        {"sup_d2", integer(&cfg.sup_d2)},
        {"grad_feature_scale", num(&cfg.grad_feature_scale)},
        {"descent_lr", num(&cfg.descent_lr)},
        {"max_disp", integer(&cfg.max_disp)},
        {"bm_patch", integer(&cfg.bm_patch)},
        {"flow_radius", integer(&cfg.flow_radius)},
        {"flow_patch", integer(&cfg.flow_patch)},
        {"pyramid_levels", integer(&cfg.pyramid_levels)},
        {"c_clamp", num(&cfg.c_clamp)},
        {"synth_width", integer(&cfg.synth_width)},
        {"synth_height", integer(&cfg.synth_height)},
        {"min_fg_layers", integer(&cfg.min_fg_layers)},
        {"max_fg_layers", integer(&cfg.max_fg_layers)},
        {"disp_min", num(&cfg.disp_min)},
        {"disp_max", num(&cfg.disp_max)},
        {"flow_max_x", num(&cfg.flow_max_x)},
        {"flow_max_y", num(&cfg.flow_max_y)},
        {"dchange_max", num(&cfg.dchange_max)},
        {"sigma_img", num(&cfg.sigma_img)},
    };

    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            fail(origin, lineno, "expected 'key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        auto it = keys.find(key);
        if (it == keys.end()) fail(origin, lineno, "unknown key '" + key + "'");
        if (value.empty()) fail(origin, lineno, "missing value for '" + key + "'");
        if (!it->second(value))
            fail(origin, lineno, "bad value '" + value + "' for '" + key + "'");
    }
    return cfg;
}

RunConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path);
}

}  // namespace sflow
