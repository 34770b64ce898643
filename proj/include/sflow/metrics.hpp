#pragma once

#include <string>
#include <vector>

#include "sflow/field.hpp"

namespace sflow {

// KITTI-style evaluation: a pixel is an outlier for a quantity iff its error
// is >= 3px AND >= 5% of the ground-truth magnitude. Rates are fractions.
struct MetricsReport {
    double epe_d1 = 0.0;
    double epe_flow = 0.0;
    double epe_dchange = 0.0;
    double epe_d1c = 0.0;  // EPE of d1+dchange against the warped GT d2
    double d1_out = 0.0;
    double d2_out = 0.0;
    double f1_out = 0.0;
    double sf_out = 0.0;
    long valid_px = 0;
    bool defined = false;  // false when no valid pixels
};

constexpr double kOutlierAbsThresh = 3.0;
constexpr double kOutlierRelThresh = 0.05;

// Mean Euclidean error over valid pixels (absolute error for 1-channel
// fields). Returns NaN-free 0 with *defined=false when nothing is valid.
double epe(const ImageField& pred, const ImageField& gt, const ImageField& valid,
           bool* defined = nullptr);

// D1 on d1; D2 on (d1 + dchange) against GT d2 warped to frame 1 by the GT
// flow; F1 on flow; SF = outlier in any of the three. Pixels whose GT
// temporal warp leaves the frame are dropped from the valid set.
MetricsReport outlier_rates(const SceneFlowState& state, const SceneFlowState& gt,
                            const ImageField& valid);

// Per-step evaluation of a refinement trajectory, step 0..T.
std::vector<MetricsReport> trajectory_report(const std::vector<SceneFlowState>& states,
                                             const SceneFlowState& gt,
                                             const ImageField& valid);

// CSV rows, one per refinement step. Header:
// step,epe_d1,epe_flow,epe_c,d1,d2,f1,sf,valid_px
std::string metrics_csv(const std::vector<MetricsReport>& steps);
std::string metrics_csv_row(int step, const MetricsReport& r);
extern const char* kMetricsCsvHeader;

}  // namespace sflow
