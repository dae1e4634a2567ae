#include "instloc/pnp.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "instloc/errors.hpp"
#include "instloc/random.hpp"

namespace instloc {

namespace {

constexpr double kRadToDeg = 180.0 / M_PI;
constexpr int kGaussNewtonIterations = 10;

// Orthonormal pair spanning the plane perpendicular to a unit vector.
void TangentBasis(const Vec3& v, Vec3* e1, Vec3* e2) {
  Eigen::Index smallest = 0;
  v.cwiseAbs().minCoeff(&smallest);
  *e1 = v.cross(Vec3::Unit(smallest)).normalized();
  *e2 = v.cross(*e1);
}

// Closed-form R, t minimizing sum |dst - (R src + t)|^2 with det(R) = +1.
void RigidAlign(const std::vector<Vec3>& src, const std::vector<Vec3>& dst, Mat3* rotation,
                Vec3* translation) {
  Vec3 src_mean = Vec3::Zero();
  Vec3 dst_mean = Vec3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    src_mean += src[i];
    dst_mean += dst[i];
  }
  src_mean /= static_cast<double>(src.size());
  dst_mean /= static_cast<double>(dst.size());
  Mat3 cross = Mat3::Zero();
  for (std::size_t i = 0; i < src.size(); ++i) {
    cross.noalias() += (dst[i] - dst_mean) * (src[i] - src_mean).transpose();
  }
  Eigen::JacobiSVD<Mat3> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 fix = Mat3::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0.0) fix(2, 2) = -1.0;
  *rotation = svd.matrixU() * fix * svd.matrixV().transpose();
  *translation = dst_mean - *rotation * src_mean;
}

struct ControlPoints {
  std::vector<Vec3> world;  // 4, or 3 for planar scenes
  Eigen::MatrixXd alphas;   // n x world.size(), rows sum to 1
};

ControlPoints ChooseControlPoints(std::span<const Correspondence> corrs) {
  const double n = static_cast<double>(corrs.size());
  Vec3 centroid = Vec3::Zero();
  for (const auto& c : corrs) centroid += c.world_point;
  centroid /= n;
  Mat3 cov = Mat3::Zero();
  for (const auto& c : corrs) {
    const Vec3 d = c.world_point - centroid;
    cov.noalias() += d * d.transpose();
  }
  cov /= n;
  Eigen::SelfAdjointEigenSolver<Mat3> eig(cov);
  const Vec3 lambda = eig.eigenvalues().reverse();
  const Mat3 axes = eig.eigenvectors().rowwise().reverse();

  if (!(lambda(0) > 0.0) || lambda(1) <= 1e-12 * lambda(0)) {
    throw DegenerateError("EPnP: world points are collinear");
  }
  const int num_axes = lambda(2) <= 1e-10 * lambda(0) ? 2 : 3;

  ControlPoints cp;
  cp.world.push_back(centroid);
  for (int k = 0; k < num_axes; ++k) cp.world.push_back(centroid + std::sqrt(lambda(k)) * axes.col(k));

  cp.alphas.resize(corrs.size(), num_axes + 1);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 d = corrs[i].world_point - centroid;
    double rest = 1.0;
    for (int k = 0; k < num_axes; ++k) {
      const double a = axes.col(k).dot(d) / std::sqrt(lambda(k));
      cp.alphas(i, k + 1) = a;
      rest -= a;
    }
    cp.alphas(i, 0) = rest;
  }
  return cp;
}

// Null-space basis vectors reshaped as control-point differences per
// control-point pair: diffs[p][i] = v_i(a) - v_i(b) for pair p = (a, b).
struct DistanceSystem {
  std::vector<std::vector<Vec3>> diffs;
  std::vector<double> squared_distances;
};

DistanceSystem MakeDistanceSystem(const ControlPoints& cp, const Eigen::MatrixXd& kernel) {
  const int k = static_cast<int>(cp.world.size());
  const int dims = static_cast<int>(kernel.cols());
  DistanceSystem sys;
  for (int a = 0; a < k; ++a) {
    for (int b = a + 1; b < k; ++b) {
      std::vector<Vec3> d(dims);
      for (int i = 0; i < dims; ++i) {
        d[i] = kernel.block<3, 1>(3 * a, i) - kernel.block<3, 1>(3 * b, i);
      }
      sys.diffs.push_back(std::move(d));
      sys.squared_distances.push_back((cp.world[a] - cp.world[b]).squaredNorm());
    }
  }
  return sys;
}

// Initial betas for the first `dims` kernel vectors from the linearized
// distance equations. When there are fewer equations than products
// beta_i*beta_j, only the products beta_1*beta_j are kept.
Eigen::VectorXd InitialBetas(const DistanceSystem& sys, int dims) {
  const int pairs = static_cast<int>(sys.squared_distances.size());
  const bool full = dims * (dims + 1) / 2 <= pairs;
  std::vector<std::pair<int, int>> terms;
  for (int i = 0; i < dims; ++i) {
    for (int j = i; j < dims; ++j) {
      if (full || i == 0) terms.emplace_back(i, j);
    }
  }
  Eigen::MatrixXd lhs(pairs, static_cast<int>(terms.size()));
  Eigen::VectorXd rhs(pairs);
  for (int p = 0; p < pairs; ++p) {
    for (std::size_t t = 0; t < terms.size(); ++t) {
      const auto [i, j] = terms[t];
      const double dot = sys.diffs[p][i].dot(sys.diffs[p][j]);
      lhs(p, static_cast<int>(t)) = i == j ? dot : 2.0 * dot;
    }
    rhs(p) = sys.squared_distances[p];
  }
  const Eigen::VectorXd prod = lhs.colPivHouseholderQr().solve(rhs);

  Eigen::VectorXd betas = Eigen::VectorXd::Zero(dims);
  // prod(0) = beta_1^2, prod(j) = beta_1 * beta_{j+1} for j < dims.
  const double b11 = prod(0);
  const double sign = b11 < 0.0 ? -1.0 : 1.0;
  betas(0) = std::sqrt(std::abs(b11));
  if (betas(0) > 0.0) {
    for (int j = 1; j < dims; ++j) betas(j) = sign * prod(j) / betas(0);
  }
  return betas;
}

void GaussNewton(const DistanceSystem& sys, Eigen::VectorXd* betas) {
  const int pairs = static_cast<int>(sys.squared_distances.size());
  const int dims = static_cast<int>(betas->size());
  Eigen::MatrixXd jac(pairs, dims);
  Eigen::VectorXd res(pairs);
  for (int iter = 0; iter < kGaussNewtonIterations; ++iter) {
    for (int p = 0; p < pairs; ++p) {
      Vec3 d = Vec3::Zero();
      for (int i = 0; i < dims; ++i) d += (*betas)(i) * sys.diffs[p][i];
      res(p) = d.squaredNorm() - sys.squared_distances[p];
      for (int i = 0; i < dims; ++i) jac(p, i) = 2.0 * d.dot(sys.diffs[p][i]);
    }
    const Eigen::VectorXd step = jac.colPivHouseholderQr().solve(-res);
    if (!step.allFinite()) break;
    *betas += step;
  }
}

double MeanResidualDeg(const Pose& pose, std::span<const Correspondence> corrs) {
  double sum = 0.0;
  for (const auto& c : corrs) sum += AngularResidualDeg(pose, c);
  return sum / static_cast<double>(corrs.size());
}

struct Hypothesis {
  int inliers = -1;
  double mean_residual = std::numeric_limits<double>::infinity();
  int iteration = std::numeric_limits<int>::max();
  Pose pose;

  // Strict total order: more inliers, then lower mean residual, then earlier
  // iteration.
  bool BetterThan(const Hypothesis& o) const {
    if (inliers != o.inliers) return inliers > o.inliers;
    if (mean_residual != o.mean_residual) return mean_residual < o.mean_residual;
    return iteration < o.iteration;
  }
};

// Inlier indices (ascending) and their mean residual.
std::vector<int> Inliers(const Pose& pose, std::span<const Correspondence> corrs,
                         double threshold_deg, double* mean_residual) {
  // Cheap cosine pre-test; the exact angle decides at the boundary.
  const double loose_cos = std::cos((threshold_deg * (1.0 + 1e-6) + 1e-9) / kRadToDeg);
  const Mat3 rt = pose.Rotation().transpose();
  const Vec3& t = pose.Translation();
  std::vector<int> out;
  double sum = 0.0;
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    const Vec3 q = rt * corrs[i].world_point + t;
    const double norm = q.norm();
    if (!(norm >= 1e-12)) continue;
    if (corrs[i].bearing.dot(q) < loose_cos * norm) continue;
    const double r = AngularResidualDeg(pose, corrs[i]);
    if (r < threshold_deg) {
      out.push_back(static_cast<int>(i));
      sum += r;
    }
  }
  *mean_residual = out.empty() ? 0.0 : sum / static_cast<double>(out.size());
  return out;
}

int CountInliers(const Pose& pose, std::span<const Correspondence> corrs, double threshold_deg,
                 double* mean_residual) {
  return static_cast<int>(Inliers(pose, corrs, threshold_deg, mean_residual).size());
}

Hypothesis RunIterations(std::span<const Correspondence> corrs, const RansacConfig& cfg, int begin,
                         int end) {
  Hypothesis best;
  const std::uint64_t n = corrs.size();
  std::vector<Correspondence> sample(cfg.min_sample);
  std::vector<std::uint64_t> picked(cfg.min_sample);
  for (int it = begin; it < end; ++it) {
    CounterRng rng(cfg.seed, static_cast<std::uint64_t>(it));
    for (int k = 0; k < cfg.min_sample; ++k) {
      std::uint64_t idx;
      do {
        idx = rng.Below(n);
      } while (std::find(picked.begin(), picked.begin() + k, idx) != picked.begin() + k);
      picked[k] = idx;
      sample[k] = corrs[idx];
    }
    Hypothesis h;
    try {
      h.pose = EpnpBearing(sample);
    } catch (const DegenerateError&) {
      continue;
    }
    if (!h.pose.IsValid(1e-6)) continue;
    h.iteration = it;
    h.inliers = CountInliers(h.pose, corrs, cfg.inlier_threshold_deg, &h.mean_residual);
    if (h.BetterThan(best)) best = std::move(h);
  }
  return best;
}

}  // namespace

double AngularResidualDeg(const Pose& pose, const Correspondence& c) {
  const Vec3 q = pose.WorldToCamera(c.world_point);
  const double norm = q.norm();
  if (!(norm >= 1e-12)) return 180.0;
  const Vec3 dir = q / norm;
  const double angle = std::atan2(c.bearing.cross(dir).norm(), c.bearing.dot(dir));
  return angle * kRadToDeg;
}

Pose EpnpBearing(std::span<const Correspondence> corrs) {
  if (corrs.size() < 4) throw std::invalid_argument("EPnP needs at least 4 correspondences");

  const ControlPoints cp = ChooseControlPoints(corrs);
  const int k = static_cast<int>(cp.world.size());
  const int cols = 3 * k;

  // Two rows per bearing: e^T * sum_j alpha_ij c_j = 0 for both tangents e.
  Eigen::MatrixXd normal = Eigen::MatrixXd::Zero(cols, cols);
  Eigen::RowVectorXd row(cols);
  for (std::size_t i = 0; i < corrs.size(); ++i) {
    Vec3 tangents[2];
    TangentBasis(corrs[i].bearing.normalized(), &tangents[0], &tangents[1]);
    for (const Vec3& e : tangents) {
      for (int j = 0; j < k; ++j) row.segment<3>(3 * j) = cp.alphas(i, j) * e.transpose();
      normal.noalias() += row.transpose() * row;
    }
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(normal);
  const int max_dims = k;  // 4 kernel vectors, or 3 in the planar case
  const Eigen::MatrixXd kernel = eig.eigenvectors().leftCols(max_dims);
  const DistanceSystem sys = MakeDistanceSystem(cp, kernel);

  Pose best_pose;
  double best_residual = std::numeric_limits<double>::infinity();
  for (int dims = 1; dims <= max_dims; ++dims) {
    Eigen::VectorXd betas = Eigen::VectorXd::Zero(max_dims);
    betas.head(dims) = InitialBetas(sys, dims);
    GaussNewton(sys, &betas);
    if (!betas.allFinite()) continue;

    const Eigen::VectorXd stacked = kernel * betas;
    std::vector<Vec3> camera_ctrl(k);
    for (int j = 0; j < k; ++j) camera_ctrl[j] = stacked.segment<3>(3 * j);

    // Cheirality: the points must lie along, not against, their bearings.
    std::vector<double> along(corrs.size());
    for (std::size_t i = 0; i < corrs.size(); ++i) {
      Vec3 p = Vec3::Zero();
      for (int j = 0; j < k; ++j) p += cp.alphas(i, j) * camera_ctrl[j];
      along[i] = corrs[i].bearing.dot(p);
    }
    auto mid = along.begin() + along.size() / 2;
    std::nth_element(along.begin(), mid, along.end());
    if (*mid < 0.0) {
      for (Vec3& c : camera_ctrl) c = -c;
    }

    Mat3 rot;
    Vec3 trans;
    RigidAlign(cp.world, camera_ctrl, &rot, &trans);
    // camera = rot * world + trans, i.e. R = rot^T and T = trans.
    const Pose pose(rot.transpose(), trans);
    const double residual = MeanResidualDeg(pose, corrs);
    if (residual < best_residual) {
      best_residual = residual;
      best_pose = pose;
    }
  }
  if (!std::isfinite(best_residual)) throw DegenerateError("EPnP: no finite solution");
  return best_pose;
}

void RansacConfig::Validate() const {
  if (iterations < 1) throw std::invalid_argument("RANSAC needs at least one iteration");
  if (!(inlier_threshold_deg > 0.0 && inlier_threshold_deg < 90.0)) {
    throw std::invalid_argument("inlier threshold must lie in (0, 90) degrees");
  }
  if (min_sample < 4) throw std::invalid_argument("minimal sample must have at least 4 points");
  if (threads < 1) throw std::invalid_argument("threads must be positive");
}

PoseEstimate RansacPnp(std::span<const Correspondence> corrs, const RansacConfig& cfg) {
  cfg.Validate();
  if (corrs.size() < static_cast<std::size_t>(cfg.min_sample)) {
    throw std::invalid_argument("RANSAC: fewer correspondences than the minimal sample");
  }

  Hypothesis best;
  const int workers = std::min(cfg.threads, cfg.iterations);
  if (workers <= 1) {
    best = RunIterations(corrs, cfg, 0, cfg.iterations);
  } else {
    std::vector<Hypothesis> partial(workers);
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
      const int begin = static_cast<int>(static_cast<long>(cfg.iterations) * w / workers);
      const int end = static_cast<int>(static_cast<long>(cfg.iterations) * (w + 1) / workers);
      pool.emplace_back([&, w, begin, end] { partial[w] = RunIterations(corrs, cfg, begin, end); });
    }
    for (auto& t : pool) t.join();
    for (auto& h : partial) {
      if (h.BetterThan(best)) best = std::move(h);
    }
  }

  PoseEstimate est;
  est.iterations_used = cfg.iterations;
  est.inlier_threshold_deg = cfg.inlier_threshold_deg;
  if (best.inliers < 0) {
    throw NoConsensusError("RANSAC: every hypothesis was degenerate", est, false);
  }
  est.pose = best.pose;
  est.inlier_indices = Inliers(best.pose, corrs, cfg.inlier_threshold_deg, &est.mean_inlier_angle_deg);
  if (best.inliers < cfg.min_sample + 1) {
    throw NoConsensusError("RANSAC: no consensus set larger than the minimal sample", est, true);
  }

  if (cfg.refit_on_inliers) {
    std::vector<Correspondence> support;
    support.reserve(est.inlier_indices.size());
    for (int i : est.inlier_indices) support.push_back(corrs[i]);
    try {
      const Pose refit = EpnpBearing(support);
      double mean = 0.0;
      std::vector<int> inliers = Inliers(refit, corrs, cfg.inlier_threshold_deg, &mean);
      // A refit that loses support (rare, ill-conditioned inlier sets) is
      // discarded in favour of the sampled hypothesis.
      if (inliers.size() >= est.inlier_indices.size()) {
        est.pose = refit;
        est.inlier_indices = std::move(inliers);
        est.mean_inlier_angle_deg = mean;
      }
    } catch (const DegenerateError&) {
    }
  }
  return est;
}

}  // namespace instloc
