#include "sflow/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "sflow/warp.hpp"

namespace sflow {

const char* kMetricsCsvHeader = "step,epe_d1,epe_flow,epe_c,d1,d2,f1,sf,valid_px";

double epe(const ImageField& pred, const ImageField& gt, const ImageField& valid,
           bool* defined) {
    if (!pred.same_extent(gt) || !pred.same_extent(valid) ||
        pred.channels != gt.channels)
        throw std::invalid_argument("epe: extent mismatch");
    double sum = 0.0;
    long n = 0;
    const std::size_t px = pred.pixels();
    for (std::size_t i = 0; i < px; ++i) {
        if (valid.data[i] == 0.0) continue;
        double e2 = 0.0;
        for (int c = 0; c < pred.channels; ++c) {
            const double d = pred.data[c * px + i] - gt.data[c * px + i];
            e2 += d * d;
        }
        sum += std::sqrt(e2);
        ++n;
    }
    if (defined) *defined = n > 0;
    return n > 0 ? sum / n : 0.0;
}

namespace {

inline bool is_outlier(double err, double gt_mag) {
    return err >= kOutlierAbsThresh && err >= kOutlierRelThresh * gt_mag;
}

}  // namespace

MetricsReport outlier_rates(const SceneFlowState& state, const SceneFlowState& gt,
                            const ImageField& valid) {
    if (!state.consistent() || !gt.consistent() ||
        !state.d1.same_extent(gt.d1) || !state.d1.same_extent(valid))
        throw std::invalid_argument("outlier_rates: extent mismatch");

    // the benchmark's D2 quantity: GT second-frame disparity seen from frame 1
    WarpResult gt_d2w = warp_scalar_by_flow(gt.d2, gt.flow);

    MetricsReport rep;
    const std::size_t px = state.d1.pixels();
    double s_d1 = 0.0, s_f = 0.0, s_c = 0.0, s_d1c = 0.0;
    long n = 0, o_d1 = 0, o_d2 = 0, o_f1 = 0, o_sf = 0;
    for (std::size_t i = 0; i < px; ++i) {
        if (valid.data[i] == 0.0 || gt_d2w.validity.data[i] == 0.0) continue;
        ++n;
        const double e_d1 = std::abs(state.d1.data[i] - gt.d1.data[i]);
        const double gt_d2_here = gt_d2w.image.data[i];
        const double e_d2 =
            std::abs(state.d1.data[i] + state.dchange.data[i] - gt_d2_here);
        const double fx = state.flow.plane(0)[i] - gt.flow.plane(0)[i];
        const double fy = state.flow.plane(1)[i] - gt.flow.plane(1)[i];
        const double e_f = std::sqrt(fx * fx + fy * fy);
        const double gfx = gt.flow.plane(0)[i], gfy = gt.flow.plane(1)[i];
        const double gt_f_mag = std::sqrt(gfx * gfx + gfy * gfy);

        s_d1 += e_d1;
        s_f += e_f;
        s_c += std::abs(state.dchange.data[i] - gt.dchange.data[i]);
        s_d1c += e_d2;

        const bool b_d1 = is_outlier(e_d1, std::abs(gt.d1.data[i]));
        const bool b_d2 = is_outlier(e_d2, std::abs(gt_d2_here));
        const bool b_f1 = is_outlier(e_f, gt_f_mag);
        o_d1 += b_d1;
        o_d2 += b_d2;
        o_f1 += b_f1;
        o_sf += b_d1 || b_d2 || b_f1;
    }
    rep.valid_px = n;
    rep.defined = n > 0;
    if (n == 0) return rep;
    rep.epe_d1 = s_d1 / n;
    rep.epe_flow = s_f / n;
    rep.epe_dchange = s_c / n;
    rep.epe_d1c = s_d1c / n;
    rep.d1_out = double(o_d1) / n;
    rep.d2_out = double(o_d2) / n;
    rep.f1_out = double(o_f1) / n;
    rep.sf_out = double(o_sf) / n;
    return rep;
}

std::vector<MetricsReport> trajectory_report(const std::vector<SceneFlowState>& states,
                                             const SceneFlowState& gt,
                                             const ImageField& valid) {
    std::vector<MetricsReport> out;
    out.reserve(states.size());
    for (const SceneFlowState& s : states) out.push_back(outlier_rates(s, gt, valid));
    return out;
}

std::string metrics_csv_row(int step, const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%d,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%ld", step,
                  r.epe_d1, r.epe_flow, r.epe_dchange, r.d1_out, r.d2_out, r.f1_out,
                  r.sf_out, r.valid_px);
    return buf;
}

std::string metrics_csv(const std::vector<MetricsReport>& steps) {
    std::string out = kMetricsCsvHeader;
    out += '\n';
    for (std::size_t t = 0; t < steps.size(); ++t) {
        out += metrics_csv_row(static_cast<int>(t), steps[t]);
        out += '\n';
    }
    return out;
}

}  // namespace sflow
