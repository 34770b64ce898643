// sceneflow: command-line front end for the consistency-guided scene flow
// pipeline. One subcommand per stage; all state lives on disk.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sflow/config.hpp"
#include "sflow/consistency.hpp"
#include "sflow/grad.hpp"
#include "sflow/initializer.hpp"
#include "sflow/io.hpp"
#include "sflow/metrics.hpp"
#include "sflow/pipeline.hpp"
#include "sflow/refiner.hpp"
#include "sflow/synth.hpp"

namespace fs = std::filesystem;
using namespace sflow;

namespace {

std::string sample_name(int index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "sample_%03d", index);
    return buf;
}

RunConfig config_from(const std::string& path) {
    if (path.empty()) return RunConfig{};
    return load_config(path);
}

bool parse_size(const std::string& s, int& w, int& h) {
    const std::size_t x = s.find('x');
    if (x == std::string::npos) return false;
    try {
        w = std::stoi(s.substr(0, x));
        h = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        return false;
    }
    return w > 1 && h > 1;
}

int cmd_gen(const std::string& config_path, int count, std::uint64_t seed,
            const std::string& out_dir, const std::string& size) {
    RunConfig cfg = config_from(config_path);
    SceneRanges ranges = cfg.scene_ranges();
    if (!size.empty() && !parse_size(size, ranges.width, ranges.height))
        throw std::runtime_error("bad --size, expected WxH like 128x96");
    std::vector<SyntheticSample> ds = make_dataset(count, ranges, seed);
    fs::create_directories(out_dir);
    for (int i = 0; i < count; ++i)
        save_sample_dir((fs::path(out_dir) / sample_name(i)).string(), ds[i]);
    std::printf("wrote %d clips to %s\n", count, out_dir.c_str());
    return 0;
}

ImageField load_image_auto(const std::string& path) {
    if (path.size() > 4 && path.compare(path.size() - 4, 4, ".pfm") == 0)
        return read_pfm(path);
    return read_png8(path);
}

// --clip takes either one sample directory or the four images l1 r1 l2 r2
LoadedClip load_clip_arg(const std::vector<std::string>& clip_args) {
    if (clip_args.size() == 1) return load_clip_dir(clip_args[0]);
    if (clip_args.size() != 4)
        throw std::runtime_error("--clip wants a sample dir or 4 image paths");
    LoadedClip out;
    out.clip.l1 = load_image_auto(clip_args[0]);
    out.clip.r1 = load_image_auto(clip_args[1]);
    out.clip.l2 = load_image_auto(clip_args[2]);
    out.clip.r2 = load_image_auto(clip_args[3]);
    return out;
}

int cmd_init(const std::string& config_path, const std::vector<std::string>& clip_args,
             const std::string& out_dir, const std::string& mode,
             const std::string& ext_dir) {
    RunConfig cfg = config_from(config_path);
    if (mode == "block") {
        LoadedClip clip = load_clip_arg(clip_args);
        InitResult init = init_state(clip.clip, cfg.init_config());
        save_init_dir(out_dir, init.state, init.backward_flow);
    } else if (mode == "gt") {
        if (clip_args.size() != 1)
            throw std::runtime_error("--mode gt wants a sample dir");
        const std::string& clip_dir = clip_args[0];
        LoadedClip clip = load_clip_dir(clip_dir);
        if (!clip.gt || !clip.clip.has_backward_flow())
            throw std::runtime_error(clip_dir + " has no ground truth to inject");
        save_init_dir(out_dir, *clip.gt, clip.clip.backward_flow);
    } else if (mode == "external") {
        if (ext_dir.empty())
            throw std::runtime_error("--mode external needs --ext-dir");
        InitResult init = load_init_dir(ext_dir);
        save_init_dir(out_dir, init.state, init.backward_flow);
    } else {
        throw std::runtime_error("unknown init mode '" + mode + "'");
    }
    std::printf("wrote initial prediction to %s\n", out_dir.c_str());
    return 0;
}

std::string loss_csv(const std::vector<LossBreakdown>& steps) {
    std::string out = "step,pd,pf,df,smooth,total\n";
    char buf[160];
    for (std::size_t t = 0; t < steps.size(); ++t) {
        std::snprintf(buf, sizeof(buf), "%zu,%.6f,%.6f,%.6f,%.6f,%.6f\n", t,
                      steps[t].pd, steps[t].pf, steps[t].df, steps[t].smooth,
                      steps[t].total);
        out += buf;
    }
    return out;
}

int cmd_refine(const std::string& config_path, const std::string& clip_dir,
               const std::string& init_dir, const std::string& params_path,
               const std::string& strategy, int steps_flag, double lr_flag,
               const std::string& report, const std::string& loss_report,
               const std::string& out_dir) {
    RunConfig cfg = config_from(config_path);
    LoadedClip loaded = load_clip_dir(clip_dir);
    InitResult init = load_init_dir(init_dir);
    StereoClip clip = loaded.clip;
    clip.backward_flow = init.backward_flow;

    RefineConfig rcfg = cfg.refine_config();
    if (steps_flag > 0) rcfg.steps = steps_flag;

    std::vector<SceneFlowState> states;
    std::vector<LossBreakdown> breakdowns;
    if (strategy == "learned") {
        if (params_path.empty() || params_path == "none")
            throw std::runtime_error("--strategy learned needs --params");
        RefinerParams params = load_refiner_params(params_path);
        RefineTrajectory traj = refine_iterate(clip, init.state, params, rcfg.steps, rcfg);
        states = std::move(traj.states);
        breakdowns = std::move(traj.breakdowns);
    } else if (strategy == "descent") {
        const double lr = lr_flag > 0.0 ? lr_flag : cfg.descent_lr;
        SceneFlowState x = init.state;
        states.push_back(x);
        for (int t = 0; t < rcfg.steps; ++t) {
            LossBreakdown bd;
            x = descent_step(clip, x, lr, rcfg, &bd);
            breakdowns.push_back(bd);
            states.push_back(x);
        }
        breakdowns.push_back(total_loss(clip, x, rcfg.weights, rcfg.photo, rcfg.occ));
    } else {
        throw std::runtime_error("unknown strategy '" + strategy + "'");
    }

    if (!out_dir.empty()) save_refined_dir(out_dir, states.back());
    if (!report.empty()) {
        if (!loaded.gt)
            throw std::runtime_error(clip_dir +
                                     " has no ground truth; metrics report impossible");
        ImageField valid(clip.l1.width, clip.l1.height, 1, 1.0);
        std::vector<MetricsReport> reports = trajectory_report(states, *loaded.gt, valid);
        write_text_atomic(report, metrics_csv(reports));
        std::printf("SF outliers: step0 %.2f%% -> step%zu %.2f%%\n",
                    100.0 * reports.front().sf_out, reports.size() - 1,
                    100.0 * reports.back().sf_out);
    }
    if (!loss_report.empty()) write_text_atomic(loss_report, loss_csv(breakdowns));
    std::printf("refined %s with %s in %d steps (loss %.5f -> %.5f)\n",
                clip_dir.c_str(), strategy.c_str(), rcfg.steps,
                breakdowns.front().total, breakdowns.back().total);
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& dataset_dir,
              int holdout, const std::string& mode_flag, const std::string& out_path) {
    RunConfig cfg = config_from(config_path);
    if (!mode_flag.empty()) cfg.train_mode = mode_flag;
    if (cfg.train_mode != "sup" && cfg.train_mode != "selfsup")
        throw std::runtime_error("train mode must be sup or selfsup");
    TrainConfig tcfg = cfg.train_config();
    const InitConfig icfg = cfg.init_config();

    std::vector<std::string> dirs = list_sample_dirs(dataset_dir);
    if (dirs.empty()) throw std::runtime_error("no sample_* clips in " + dataset_dir);
    if (holdout < 0 || holdout >= static_cast<int>(dirs.size()))
        throw std::runtime_error("--holdout out of range");
    dirs.resize(dirs.size() - holdout);

    std::vector<TrainSample> train;
    train.reserve(dirs.size());
    for (const std::string& dir : dirs) {
        LoadedClip loaded = load_clip_dir(dir);
        TrainSample ts;
        ts.clip = loaded.clip;
        InitResult init = init_state(loaded.clip, icfg);
        ts.x0 = init.state;
        ts.clip.backward_flow = init.backward_flow;
        if (loaded.gt) {
            ts.gt = *loaded.gt;
            ts.gt_valid = ImageField(ts.clip.l1.width, ts.clip.l1.height, 1, 1.0);
            ts.has_gt = true;
        }
        train.push_back(std::move(ts));
        std::fprintf(stderr, "prepared %s\n", dir.c_str());
    }

    TrainLog log;
    RefinerParams params = train_refiner(train, tcfg, &log);
    save_refiner_params(out_path, params);
    for (std::size_t e = 0; e < log.epoch_objective.size(); ++e)
        std::printf("epoch %zu objective %.6f\n", e + 1, log.epoch_objective[e]);
    std::printf("wrote refiner parameters to %s\n", out_path.c_str());
    return 0;
}

int cmd_eval(const std::string& pred_dir, const std::string& gt_dir,
             const std::string& report) {
    std::vector<std::string> gt_dirs = list_sample_dirs(gt_dir);
    if (gt_dirs.empty()) throw std::runtime_error("no sample_* clips in " + gt_dir);
    std::vector<MetricsReport> rows;
    double mean_sf = 0.0;
    for (const std::string& gdir : gt_dirs) {
        const std::string name = fs::path(gdir).filename().string();
        const fs::path pdir = fs::path(pred_dir) / name;
        if (!fs::is_directory(pdir))
            throw std::runtime_error("missing prediction dir " + pdir.string());
        LoadedClip gt_clip = load_clip_dir(gdir);
        if (!gt_clip.gt) throw std::runtime_error(gdir + " has no ground truth");
        SceneFlowState pred;
        if (fs::exists(pdir / "refined_d1.pfm"))
            pred = load_refined_dir(pdir.string());
        else
            pred = load_init_dir(pdir.string()).state;
        ImageField valid(pred.width(), pred.height(), 1, 1.0);
        rows.push_back(outlier_rates(pred, *gt_clip.gt, valid));
        mean_sf += rows.back().sf_out;
    }
    write_text_atomic(report, metrics_csv(rows));
    std::printf("evaluated %zu clips: mean SF outlier rate %.2f%%\n", rows.size(),
                100.0 * mean_sf / rows.size());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"consistency-guided scene flow over stereo video"};
    app.require_subcommand(1);

    std::string config_path, out_dir, clip_dir, init_dir, params_path, ext_dir;
    std::vector<std::string> clip_args;
    std::string strategy = "learned", mode = "block", size, report, loss_report;
    std::string dataset_dir, pred_dir, gt_dir, out_path, train_mode;
    int count = 10, steps = 0, holdout = 0;
    std::uint64_t seed = 1;
    double lr = 0.0;

    CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    gen->add_option("--count", count, "number of clips")->required();
    gen->add_option("--seed", seed, "dataset seed");
    gen->add_option("--out-dir", out_dir, "output directory")->required();
    gen->add_option("--size", size, "clip extent as WxH (default from config)");
    gen->add_option("--config", config_path, "run configuration file");

    CLI::App* init = app.add_subcommand("init", "produce the initial prediction X0");
    init->add_option("--clip", clip_args, "sample dir or 4 images (l1 r1 l2 r2)")
        ->required()
        ->expected(1, 4);
    init->add_option("--out-dir", out_dir, "output directory")->required();
    init->add_option("--mode", mode, "block | gt | external");
    init->add_option("--ext-dir", ext_dir, "external predictions (mode external)");
    init->add_option("--config", config_path, "run configuration file");

    CLI::App* refine = app.add_subcommand("refine", "iteratively refine a prediction");
    refine->add_option("--clip", clip_dir, "clip directory")->required();
    refine->add_option("--init-dir", init_dir, "initializer output directory")->required();
    refine->add_option("--params", params_path, "refiner parameter file (learned)");
    refine->add_option("--strategy", strategy, "learned | descent");
    refine->add_option("--steps", steps, "refinement steps (default from config)");
    refine->add_option("--lr", lr, "descent learning rate (default from config)");
    refine->add_option("--config", config_path, "run configuration file");
    refine->add_option("--report", report, "per-step metrics CSV (needs ground truth)");
    refine->add_option("--loss-report", loss_report, "per-step loss CSV");
    refine->add_option("--out-dir", out_dir, "directory for the refined fields");

    CLI::App* train = app.add_subcommand("train", "train the refinement network");
    train->add_option("--dataset-dir", dataset_dir, "directory of sample_* clips")
        ->required();
    train->add_option("--holdout", holdout, "clips held out from the tail");
    train->add_option("--mode", train_mode, "sup | selfsup (overrides config)");
    train->add_option("--config", config_path, "run configuration file");
    train->add_option("--out", out_path, "output parameter file")->required();

    CLI::App* eval = app.add_subcommand("eval", "metrics over a directory of clips");
    eval->add_option("--pred-dir", pred_dir, "predictions root")->required();
    eval->add_option("--gt-dir", gt_dir, "ground-truth clips root")->required();
    eval->add_option("--report", report, "output CSV")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) return cmd_gen(config_path, count, seed, out_dir, size);
        if (init->parsed()) return cmd_init(config_path, clip_args, out_dir, mode, ext_dir);
        if (refine->parsed())
            return cmd_refine(config_path, clip_dir, init_dir, params_path, strategy,
                              steps, lr, report, loss_report, out_dir);
        if (train->parsed())
            return cmd_train(config_path, dataset_dir, holdout, train_mode, out_path);
        if (eval->parsed()) return cmd_eval(pred_dir, gt_dir, report);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
