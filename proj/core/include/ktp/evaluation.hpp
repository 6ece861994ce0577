#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "ktp/pose.hpp"

namespace ktp {

using Point3 = std::array<double, 3>;

// All metrics take T×N×3 sequences in a common unit (millimeters in reports).
double mpjpe(const PoseSequence& pred, const PoseSequence& gt);

struct ProcrustesOptions {
  bool allow_reflection = false;
};

struct ProcrustesResult {
  std::vector<Point3> aligned;
  double scale = 1.0;
  std::array<double, 9> rotation{1, 0, 0, 0, 1, 0, 0, 0, 1};  // row-major
  bool translation_only = false;  // degenerate input; only centroids matched
};

// Similarity transform s·R·(pred − c_pred) + c_gt minimizing the squared
// distance to gt. Fewer than 3 points, or collinear/coincident ones, only
// match centroids and set `translation_only`.
ProcrustesResult procrustes_align(const std::vector<Point3>& pred, const std::vector<Point3>& gt,
                                  const ProcrustesOptions& options = {});

// Per-frame Procrustes alignment of pred onto gt, then MPJPE.
double p_mpjpe(const PoseSequence& pred, const PoseSequence& gt,
               const ProcrustesOptions& options = {});

// 0, 5, ..., 150
std::vector<double> default_auc_sweep();

struct PckOptions {
  double threshold = 150.0;
  std::vector<double> sweep = default_auc_sweep();  // must not be empty
};

struct PckResult {
  double pck = 0.0;  // percent
  double auc = 0.0;  // percent
};

// A joint counts as correct when its error is ≤ the threshold.
PckResult pck_auc(const PoseSequence& pred, const PoseSequence& gt, const PckOptions& options = {});

// Mean over t ≥ 1 and joints of ‖Δpred − Δgt‖; 0 with a warning for T < 2.
double mpjve_metric(const PoseSequence& pred, const PoseSequence& gt);

struct MetricReport {
  double mpjpe = 0.0;
  double p_mpjpe = 0.0;
  double mpjve = 0.0;
  double pck = 0.0;
  double auc = 0.0;
  std::vector<double> per_joint_mpjpe;
  std::vector<double> per_frame_mpjpe;
  std::size_t frames = 0;
  std::size_t degenerate_frames = 0;  // frames aligned by translation only
};

struct EvaluationOptions {
  ProcrustesOptions procrustes;
  PckOptions pck;
};

MetricReport evaluate(const PoseSequence& pred, const PoseSequence& gt,
                      const EvaluationOptions& options = {});
// Frame-weighted pooling of several clip reports.
MetricReport pool_reports(const std::vector<MetricReport>& reports);

// "metric,value" rows.
std::string format_metric_csv(const MetricReport& report);
// "joint,name,mpjpe" rows.
std::string format_joint_csv(const MetricReport& report, const std::vector<std::string>& names);

std::vector<std::vector<double>> joint_errors(const PoseSequence& pred, const PoseSequence& gt);

}  // namespace ktp
