#include "ktp/evaluation.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <sstream>

#include "ktp/error.hpp"
#include "ktp/log.hpp"
#include "text_reader.hpp"

namespace ktp {

namespace {

void check_pair(const PoseSequence& pred, const PoseSequence& gt, const char* what) {
  if (pred.dims != 3 || pred.frames != gt.frames || pred.joints != gt.joints ||
      pred.dims != gt.dims) {
    throw ShapeError(std::string(what) + ": shape mismatch " + shape_string(pred.shape()) +
                     " vs " + shape_string(gt.shape()));
  }
}

double distance(const PoseSequence& a, const PoseSequence& b, std::size_t t, std::size_t n) {
  double acc = 0.0;
  for (std::size_t c = 0; c < 3; ++c) {
    const double d = a(t, n, c) - b(t, n, c);
    acc += d * d;
  }
  return std::sqrt(acc);
}

std::vector<Point3> frame_points(const PoseSequence& seq, std::size_t t) {
  std::vector<Point3> pts(seq.joints);
  for (std::size_t n = 0; n < seq.joints; ++n) pts[n] = {seq(t, n, 0), seq(t, n, 1), seq(t, n, 2)};
  return pts;
}

using Mat3 = Eigen::Matrix3d;
using Points = Eigen::Matrix<double, Eigen::Dynamic, 3>;

Points to_matrix(const std::vector<Point3>& pts) {
  Points m(static_cast<Eigen::Index>(pts.size()), 3);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int c = 0; c < 3; ++c) m(static_cast<Eigen::Index>(i), c) = pts[i][static_cast<std::size_t>(c)];
  }
  return m;
}

}  // namespace

std::vector<std::vector<double>> joint_errors(const PoseSequence& pred, const PoseSequence& gt) {
  check_pair(pred, gt, "joint_errors");
  std::vector<std::vector<double>> errors(pred.frames, std::vector<double>(pred.joints));
  for (std::size_t t = 0; t < pred.frames; ++t) {
    for (std::size_t n = 0; n < pred.joints; ++n) errors[t][n] = distance(pred, gt, t, n);
  }
  return errors;
}

double mpjpe(const PoseSequence& pred, const PoseSequence& gt) {
  check_pair(pred, gt, "mpjpe");
  double total = 0.0;
  for (std::size_t t = 0; t < pred.frames; ++t) {
    for (std::size_t n = 0; n < pred.joints; ++n) total += distance(pred, gt, t, n);
  }
  return total / static_cast<double>(pred.frames * pred.joints);
}

ProcrustesResult procrustes_align(const std::vector<Point3>& pred, const std::vector<Point3>& gt,
                                  const ProcrustesOptions& options) {
  if (pred.size() != gt.size()) throw ShapeError("procrustes: point counts differ");
  if (pred.empty()) throw ShapeError("procrustes: no points");
  const Points x = to_matrix(pred);
  const Points y = to_matrix(gt);
  const Eigen::RowVector3d mx = x.colwise().mean();
  const Eigen::RowVector3d my = y.colwise().mean();
  const Points xc = x.rowwise() - mx;
  const Points yc = y.rowwise() - my;

  ProcrustesResult result;
  result.aligned.resize(pred.size());
  const double norm_x = xc.squaredNorm();
  // Cross-covariance M = Ycᵀ Xc; the optimal rotation maps pred onto gt.
  const Mat3 cross = yc.transpose() * xc;
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d sv = svd.singularValues();

  const double scale_ref = std::max(norm_x, yc.squaredNorm());
  const bool degenerate = pred.size() < 3 || norm_x <= 1e-24 * std::max(1.0, scale_ref) || sv(0) <= 0.0 ||
                          sv(1) <= 1e-12 * sv(0);
  if (degenerate) {
    result.translation_only = true;
    for (std::size_t i = 0; i < pred.size(); ++i) {
      for (int c = 0; c < 3; ++c) {
        result.aligned[i][static_cast<std::size_t>(c)] =
            xc(static_cast<Eigen::Index>(i), c) + my(c);
      }
    }
    return result;
  }

  Mat3 u = svd.matrixU();
  const Mat3 v = svd.matrixV();
  Eigen::Vector3d d(1.0, 1.0, 1.0);
  if (!options.allow_reflection && (u * v.transpose()).determinant() < 0.0) d(2) = -1.0;
  const Mat3 rotation = u * d.asDiagonal() * v.transpose();
  const double s = (sv.array() * d.array()).sum() / norm_x;

  // aligned_i = s·R·xc_i + my, with points stored as rows.
  const Points aligned = (s * (xc * rotation.transpose())).rowwise() + my;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      result.aligned[i][static_cast<std::size_t>(c)] = aligned(static_cast<Eigen::Index>(i), c);
    }
  }
  result.scale = s;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) result.rotation[static_cast<std::size_t>(r * 3 + c)] = rotation(r, c);
  }
  return result;
}

namespace {

PoseSequence align_sequence(const PoseSequence& pred, const PoseSequence& gt,
                            const ProcrustesOptions& options, std::size_t* degenerate) {
  PoseSequence aligned = pred;
  for (std::size_t t = 0; t < pred.frames; ++t) {
    const ProcrustesResult r = procrustes_align(frame_points(pred, t), frame_points(gt, t), options);
    if (r.translation_only && degenerate) ++*degenerate;
    for (std::size_t n = 0; n < pred.joints; ++n) {
      for (std::size_t c = 0; c < 3; ++c) aligned(t, n, c) = r.aligned[n][c];
    }
  }
  return aligned;
}

}  // namespace

double p_mpjpe(const PoseSequence& pred, const PoseSequence& gt, const ProcrustesOptions& options) {
  check_pair(pred, gt, "p_mpjpe");
  return mpjpe(align_sequence(pred, gt, options, nullptr), gt);
}

std::vector<double> default_auc_sweep() {
  std::vector<double> sweep;
  for (int mm = 0; mm <= 150; mm += 5) sweep.push_back(static_cast<double>(mm));
  return sweep;
}

PckResult pck_auc(const PoseSequence& pred, const PoseSequence& gt, const PckOptions& options) {
  check_pair(pred, gt, "pck_auc");
  if (!(options.threshold > 0.0)) throw ConfigError("PCK threshold must be positive");
  if (options.sweep.empty()) throw ConfigError("AUC sweep must not be empty");
  const std::vector<double>& sweep = options.sweep;
  const auto errors = joint_errors(pred, gt);
  const double count = static_cast<double>(pred.frames * pred.joints);
  auto pck_at = [&](double threshold) {
    std::size_t hits = 0;
    for (const auto& frame : errors) {
      for (double e : frame) hits += e <= threshold ? 1 : 0;
    }
    return 100.0 * static_cast<double>(hits) / count;
  };
  PckResult r;
  r.pck = pck_at(options.threshold);
  double acc = 0.0;
  for (double th : sweep) acc += pck_at(th);
  r.auc = acc / static_cast<double>(sweep.size());
  return r;
}

double mpjve_metric(const PoseSequence& pred, const PoseSequence& gt) {
  check_pair(pred, gt, "mpjve");
  if (pred.frames < 2) {
    warn("MPJVE needs at least 2 frames; returning 0");
    return 0.0;
  }
  double total = 0.0;
  for (std::size_t t = 1; t < pred.frames; ++t) {
    for (std::size_t n = 0; n < pred.joints; ++n) {
      double acc = 0.0;
      for (std::size_t c = 0; c < 3; ++c) {
        const double d =
            (pred(t, n, c) - pred(t - 1, n, c)) - (gt(t, n, c) - gt(t - 1, n, c));
        acc += d * d;
      }
      total += std::sqrt(acc);
    }
  }
  return total / static_cast<double>((pred.frames - 1) * pred.joints);
}

MetricReport evaluate(const PoseSequence& pred, const PoseSequence& gt,
                      const EvaluationOptions& options) {
  check_pair(pred, gt, "evaluate");
  MetricReport r;
  r.frames = pred.frames;
  const auto errors = joint_errors(pred, gt);
  r.per_joint_mpjpe.assign(pred.joints, 0.0);
  r.per_frame_mpjpe.assign(pred.frames, 0.0);
  for (std::size_t t = 0; t < pred.frames; ++t) {
    for (std::size_t n = 0; n < pred.joints; ++n) {
      r.per_joint_mpjpe[n] += errors[t][n] / static_cast<double>(pred.frames);
      r.per_frame_mpjpe[t] += errors[t][n] / static_cast<double>(pred.joints);
    }
  }
  r.mpjpe = mpjpe(pred, gt);
  r.p_mpjpe = mpjpe(align_sequence(pred, gt, options.procrustes, &r.degenerate_frames), gt);
  r.mpjve = pred.frames >= 2 ? mpjve_metric(pred, gt) : 0.0;
  const PckResult pck = pck_auc(pred, gt, options.pck);
  r.pck = pck.pck;
  r.auc = pck.auc;
  return r;
}

MetricReport pool_reports(const std::vector<MetricReport>& reports) {
  MetricReport pooled;
  if (reports.empty()) return pooled;
  double frames = 0.0;
  double velocity_frames = 0.0;
  pooled.per_joint_mpjpe.assign(reports.front().per_joint_mpjpe.size(), 0.0);
  for (const auto& r : reports) {
    const double w = static_cast<double>(r.frames);
    const double wv = r.frames > 1 ? static_cast<double>(r.frames - 1) : 0.0;
    frames += w;
    velocity_frames += wv;
    pooled.mpjpe += w * r.mpjpe;
    pooled.p_mpjpe += w * r.p_mpjpe;
    pooled.pck += w * r.pck;
    pooled.auc += w * r.auc;
    pooled.mpjve += wv * r.mpjve;
    if (r.per_joint_mpjpe.size() != pooled.per_joint_mpjpe.size()) {
      throw ShapeError("cannot pool reports with different joint counts");
    }
    for (std::size_t n = 0; n < r.per_joint_mpjpe.size(); ++n) {
      pooled.per_joint_mpjpe[n] += w * r.per_joint_mpjpe[n];
    }
    pooled.per_frame_mpjpe.insert(pooled.per_frame_mpjpe.end(), r.per_frame_mpjpe.begin(),
                                  r.per_frame_mpjpe.end());
    pooled.frames += r.frames;
    pooled.degenerate_frames += r.degenerate_frames;
  }
  pooled.mpjpe /= frames;
  pooled.p_mpjpe /= frames;
  pooled.pck /= frames;
  pooled.auc /= frames;
  pooled.mpjve = velocity_frames > 0.0 ? pooled.mpjve / velocity_frames : 0.0;
  for (double& v : pooled.per_joint_mpjpe) v /= frames;
  return pooled;
}

std::string format_metric_csv(const MetricReport& report) {
  using detail::format_double;
  std::ostringstream out;
  out << "metric,value\n";
  out << "mpjpe," << format_double(report.mpjpe) << '\n';
  out << "p_mpjpe," << format_double(report.p_mpjpe) << '\n';
  out << "mpjve," << format_double(report.mpjve) << '\n';
  out << "pck," << format_double(report.pck) << '\n';
  out << "auc," << format_double(report.auc) << '\n';
  out << "frames," << report.frames << '\n';
  out << "degenerate_frames," << report.degenerate_frames << '\n';
  return out.str();
}

std::string format_joint_csv(const MetricReport& report, const std::vector<std::string>& names) {
  std::ostringstream out;
  out << "joint,name,mpjpe\n";
  for (std::size_t n = 0; n < report.per_joint_mpjpe.size(); ++n) {
    out << n << ',' << (n < names.size() ? names[n] : "j" + std::to_string(n)) << ','
        << detail::format_double(report.per_joint_mpjpe[n]) << '\n';
  }
  return out.str();
}

}  // namespace ktp
