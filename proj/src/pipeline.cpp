#include "sflow/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "sflow/io.hpp"

namespace fs = std::filesystem;

namespace sflow {

namespace {

std::string join(const std::string& dir, const char* name) {
    return (fs::path(dir) / name).string();
}

}  // namespace

void save_sample_dir(const std::string& dir, const SyntheticSample& sample) {
    fs::create_directories(dir);
    write_pfm(join(dir, "l1.pfm"), sample.clip.l1);
    write_pfm(join(dir, "r1.pfm"), sample.clip.r1);
    write_pfm(join(dir, "l2.pfm"), sample.clip.l2);
    write_pfm(join(dir, "r2.pfm"), sample.clip.r2);
    write_pfm(join(dir, "gt_d1.pfm"), sample.gt.d1);
    write_pfm(join(dir, "gt_d2.pfm"), sample.gt.d2);
    write_flo(join(dir, "gt_flow.flo"), sample.gt.flow);
    write_pfm(join(dir, "gt_dchange.pfm"), sample.gt.dchange);
    write_flo(join(dir, "gt_bflow.flo"), sample.clip.backward_flow);
    write_pfm(join(dir, "gt_occ.pfm"), sample.occlusion.map);
    write_pfm(join(dir, "gt_valid.pfm"), sample.valid);
}

LoadedClip load_clip_dir(const std::string& dir) {
    LoadedClip out;
    auto load_image = [&](const char* name) -> ImageField {
        const std::string pfm = join(dir, name);
        if (fs::exists(pfm)) return read_pfm(pfm);
        // fall back to an 8-bit PNG with the same stem
        std::string png = pfm.substr(0, pfm.size() - 4) + ".png";
        if (fs::exists(png)) return read_png8(png);
        throw std::runtime_error("missing image " + pfm + " (or .png)");
    };
    out.clip.l1 = load_image("l1.pfm");
    out.clip.r1 = load_image("r1.pfm");
    out.clip.l2 = load_image("l2.pfm");
    out.clip.r2 = load_image("r2.pfm");
    if (fs::exists(join(dir, "gt_bflow.flo")))
        out.clip.backward_flow = read_flo(join(dir, "gt_bflow.flo"));
    if (fs::exists(join(dir, "gt_d1.pfm"))) {
        SceneFlowState gt;
        gt.d1 = read_pfm(join(dir, "gt_d1.pfm"));
        gt.d2 = read_pfm(join(dir, "gt_d2.pfm"));
        gt.flow = read_flo(join(dir, "gt_flow.flo"));
        gt.dchange = read_pfm(join(dir, "gt_dchange.pfm"));
        out.gt = std::move(gt);
    }
    if (fs::exists(join(dir, "gt_occ.pfm"))) out.gt_occ = read_pfm(join(dir, "gt_occ.pfm"));
    if (fs::exists(join(dir, "gt_valid.pfm")))
        out.gt_valid = read_pfm(join(dir, "gt_valid.pfm"));
    return out;
}

void save_init_dir(const std::string& dir, const SceneFlowState& state,
                   const ImageField& backward_flow) {
    fs::create_directories(dir);
    write_pfm(join(dir, "init_d1.pfm"), state.d1);
    write_pfm(join(dir, "init_d2.pfm"), state.d2);
    write_flo(join(dir, "init_flow.flo"), state.flow);
    write_pfm(join(dir, "init_dchange.pfm"), state.dchange);
    write_flo(join(dir, "bflow.flo"), backward_flow);
}

InitResult load_init_dir(const std::string& dir) {
    InitResult r;
    r.state.d1 = read_pfm(join(dir, "init_d1.pfm"));
    r.state.d2 = read_pfm(join(dir, "init_d2.pfm"));
    r.state.flow = read_flo(join(dir, "init_flow.flo"));
    r.state.dchange = read_pfm(join(dir, "init_dchange.pfm"));
    r.backward_flow = read_flo(join(dir, "bflow.flo"));
    r.state.clamp_disparities();
    return r;
}

void save_refined_dir(const std::string& dir, const SceneFlowState& state) {
    fs::create_directories(dir);
    write_pfm(join(dir, "refined_d1.pfm"), state.d1);
    write_pfm(join(dir, "refined_d2.pfm"), state.d2);
    write_flo(join(dir, "refined_flow.flo"), state.flow);
    write_pfm(join(dir, "refined_dchange.pfm"), state.dchange);
}

SceneFlowState load_refined_dir(const std::string& dir) {
    SceneFlowState s;
    s.d1 = read_pfm(join(dir, "refined_d1.pfm"));
    s.d2 = read_pfm(join(dir, "refined_d2.pfm"));
    s.flow = read_flo(join(dir, "refined_flow.flo"));
    s.dchange = read_pfm(join(dir, "refined_dchange.pfm"));
    return s;
}

std::vector<std::string> list_sample_dirs(const std::string& dir) {
    std::vector<std::string> out;
    if (!fs::is_directory(dir))
        throw std::runtime_error(dir + " is not a directory");
    for (const auto& entry : fs::directory_iterator(dir)) {
        if (!entry.is_directory()) continue;
        const std::string name = entry.path().filename().string();
        if (name.rfind("sample_", 0) == 0) out.push_back(entry.path().string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void write_text_atomic(const std::string& path, const std::string& text) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary);
        if (!f) throw std::runtime_error("cannot write " + tmp);
        f << text;
        if (!f) throw std::runtime_error("short write to " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw std::runtime_error("cannot rename " + tmp + " to " + path);
}

}  // namespace sflow
