#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

namespace influence::stats {

class StatsError : public std::runtime_error {
 public:
  enum class Kind { DegenerateDesign, RankDeficient, SingleCluster, InsufficientData, TooManyDropped };
  StatsError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Midpoint of the 1..6 rating scales; the offset is the exposure boost there.
inline constexpr double kScaleMidpoint = 3.5;

template <typename Scalar>
struct OffsetTilt {
  Scalar offset;
  Scalar tilt;
};

/// Weighted least squares for r' - r = offset + tilt * (r - 3.5) over statements.
/// Rows with zero weight are ignored; weights are statement multiplicities in
/// the bootstrap and all ones otherwise.
template <typename DerivedR, typename DerivedRp, typename DerivedW>
OffsetTilt<typename DerivedR::Scalar> fit_offset_tilt(const Eigen::MatrixBase<DerivedR>& r,
                                                       const Eigen::MatrixBase<DerivedRp>& r_prime,
                                                       const Eigen::MatrixBase<DerivedW>& weights) {
  using Scalar = typename DerivedR::Scalar;
  eigen_assert(r.size() == r_prime.size() && r.size() == weights.size());
  Scalar sw = 0, sx = 0, sy = 0;
  Eigen::Index used = 0;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const Scalar w = weights(k);
    if (w <= 0) continue;
    ++used;
    sw += w;
    sx += w * (r(k) - Scalar(kScaleMidpoint));
    sy += w * (r_prime(k) - r(k));
  }
  if (used < 3) throw StatsError(StatsError::Kind::InsufficientData, "offset/tilt fit needs >= 3 statements");
  const Scalar mx = sx / sw, my = sy / sw;
  Scalar sxx = 0, sxy = 0, scale = 0;
  for (Eigen::Index k = 0; k < r.size(); ++k) {
    const Scalar w = weights(k);
    if (w <= 0) continue;
    const Scalar dx = r(k) - Scalar(kScaleMidpoint) - mx;
    sxx += w * dx * dx;
    sxy += w * dx * (r_prime(k) - r(k) - my);
    scale += w * (r(k) - Scalar(kScaleMidpoint)) * (r(k) - Scalar(kScaleMidpoint));
  }
  if (!(sxx > Scalar(1e-12) * std::max(scale, Scalar(1))))
    throw StatsError(StatsError::Kind::DegenerateDesign, "all unexposed means are equal; tilt is unidentifiable");
  const Scalar tilt = sxy / sxx;
  return {my - tilt * mx, tilt};
}

template <typename DerivedR, typename DerivedRp>
OffsetTilt<typename DerivedR::Scalar> fit_offset_tilt(const Eigen::MatrixBase<DerivedR>& r,
                                                       const Eigen::MatrixBase<DerivedRp>& r_prime) {
  using Vec = Eigen::Matrix<typename DerivedR::Scalar, Eigen::Dynamic, 1>;
  return fit_offset_tilt(r, r_prime, Vec::Ones(r.size()));
}

/// OLS with the clustered sandwich covariance and the CR1 factor
/// G/(G-1) * (n-1)/(n-k). t statistics are referred to Student t with G-1 df.
template <typename Scalar>
struct ClusteredOls {
  using Vec = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  Vec beta;
  Vec se;
  Vec t;
  Vec p;
  Mat vcov;
  Vec residuals;
  Eigen::Index n = 0;
  Eigen::Index clusters = 0;
};

/// Maps arbitrary labels to 0..G-1 in sorted label order.
template <typename Label>
std::vector<Eigen::Index> cluster_codes(const std::vector<Label>& labels, Eigen::Index* count = nullptr) {
  std::map<Label, Eigen::Index> codes;
  for (const auto& l : labels) codes.emplace(l, 0);
  Eigen::Index next = 0;
  for (auto& [label, code] : codes) code = next++;
  std::vector<Eigen::Index> out;
  out.reserve(labels.size());
  for (const auto& l : labels) out.push_back(codes.at(l));
  if (count) *count = next;
  return out;
}

template <typename DerivedX, typename DerivedY, typename Label>
ClusteredOls<typename DerivedX::Scalar> ols_cluster_robust(const Eigen::MatrixBase<DerivedX>& X,
                                                           const Eigen::MatrixBase<DerivedY>& y,
                                                           const std::vector<Label>& clusters) {
  using Scalar = typename DerivedX::Scalar;
  using Mat = typename ClusteredOls<Scalar>::Mat;
  using Vec = typename ClusteredOls<Scalar>::Vec;
  const Eigen::Index n = X.rows(), k = X.cols();
  if (y.size() != n || static_cast<Eigen::Index>(clusters.size()) != n)
    throw std::invalid_argument("ols_cluster_robust: X, y and clusters disagree in length");
  if (n <= k) throw StatsError(StatsError::Kind::RankDeficient, "ols_cluster_robust: need more rows than columns");

  Eigen::Index groups = 0;
  const auto code = cluster_codes(clusters, &groups);
  if (groups < 2) throw StatsError(StatsError::Kind::SingleCluster, "ols_cluster_robust: need >= 2 clusters");

  const Mat Xd = X;
  Eigen::ColPivHouseholderQR<Mat> qr(Xd);
  if (qr.rank() < k) throw StatsError(StatsError::Kind::RankDeficient, "design matrix is rank deficient");

  ClusteredOls<Scalar> out;
  out.n = n;
  out.clusters = groups;
  out.beta = qr.solve(Vec(y));
  out.residuals = Vec(y) - Xd * out.beta;

  const Mat bread = (Xd.transpose() * Xd).inverse();
  Mat scores = Mat::Zero(groups, k);
  for (Eigen::Index row = 0; row < n; ++row) scores.row(code[row]) += out.residuals(row) * Xd.row(row);
  const Mat meat = scores.transpose() * scores;
  const Scalar factor = Scalar(groups) / Scalar(groups - 1) * Scalar(n - 1) / Scalar(n - k);
  out.vcov = factor * bread * meat * bread;

  out.se = out.vcov.diagonal().cwiseMax(Scalar(0)).cwiseSqrt();
  out.t.resize(k);
  out.p.resize(k);
  const boost::math::students_t_distribution<Scalar> dist(Scalar(groups - 1));
  for (Eigen::Index j = 0; j < k; ++j) {
    const Scalar b = out.beta(j), s = out.se(j);
    if (s > 0) {
      out.t(j) = b / s;
      out.p(j) = 2 * boost::math::cdf(boost::math::complement(dist, std::abs(out.t(j))));
    } else {
      out.t(j) = b == 0 ? std::numeric_limits<Scalar>::quiet_NaN()
                        : std::copysign(std::numeric_limits<Scalar>::infinity(), b);
      out.p(j) = b == 0 ? Scalar(1) : Scalar(0);
    }
  }
  return out;
}

}  // namespace influence::stats
