#pragma once

#include <Eigen/Dense>
#include <optional>

#include "veila/metrics/bev.hpp"

namespace veila::metrics {

// Gaussian moment summary of a feature set.
struct FeatureStats {
  Eigen::VectorXd mu;
  Eigen::MatrixXd sigma;
  i64 n = 0;
};

inline FeatureStats fit_stats(const std::vector<Eigen::VectorXd>& feats) {
  VEILA_CHECK(feats.size() >= 2, "need n >= 2 feature vectors");
  const i64 n = i64(feats.size());
  const i64 d = feats[0].size();
  FeatureStats s;
  s.n = n;
  s.mu = Eigen::VectorXd::Zero(d);
  for (const auto& f : feats) s.mu += f;
  s.mu /= double(n);
  s.sigma = Eigen::MatrixXd::Zero(d, d);
  for (const auto& f : feats) {
    Eigen::VectorXd c = f - s.mu;
    s.sigma += c * c.transpose();
  }
  s.sigma /= double(n - 1);
  return s;
}

// |mu_A - mu_B|^2 + Tr(S_A + S_B - 2 (S_A S_B)^(1/2)), the matrix square
// root taken on the symmetrized product sqrt(S_A) S_B sqrt(S_A). Eigenvalues
// below -1e-8 (relative to the largest magnitude) are an error; small
// negative ones are clipped to zero.
inline double frechet(const FeatureStats& a, const FeatureStats& b) {
  VEILA_CHECK(a.mu.size() == b.mu.size(), "feature dimension mismatch");
  const double mean_term = (a.mu - b.mu).squaredNorm();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_a(a.sigma);
  VEILA_CHECK(es_a.info() == Eigen::Success, "eigendecomposition failed");
  Eigen::VectorXd ev_a = es_a.eigenvalues();
  const double scale_a = std::max(1.0, std::abs(ev_a.maxCoeff()));
  for (i64 i = 0; i < ev_a.size(); ++i) {
    VEILA_CHECK(ev_a[i] > -1e-8 * scale_a,
                "covariance A not PSD: eigenvalue " + std::to_string(ev_a[i]));
    ev_a[i] = std::sqrt(std::max(0.0, ev_a[i]));
  }
  Eigen::MatrixXd sqrt_a =
      es_a.eigenvectors() * ev_a.asDiagonal() * es_a.eigenvectors().transpose();

  Eigen::MatrixXd prod = sqrt_a * b.sigma * sqrt_a;
  prod = 0.5 * (prod + prod.transpose());  // symmetrize numerical residue
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es_p(prod);
  VEILA_CHECK(es_p.info() == Eigen::Success, "eigendecomposition failed");
  Eigen::VectorXd ev_p = es_p.eigenvalues();
  const double scale_p = std::max(1.0, std::abs(ev_p.maxCoeff()));
  double tr_sqrt = 0;
  for (i64 i = 0; i < ev_p.size(); ++i) {
    VEILA_CHECK(ev_p[i] > -1e-8 * scale_p,
                "product matrix not PSD: eigenvalue " + std::to_string(ev_p[i]));
    tr_sqrt += std::sqrt(std::max(0.0, ev_p[i]));
  }
  return mean_term + a.sigma.trace() + b.sigma.trace() - 2.0 * tr_sqrt;
}

inline Eigen::Map<const Eigen::VectorXd> hist_vec(const BEVHistogram& h) {
  return {h.grid.data(), h.grid.numel()};
}

// Base-2 Jensen-Shannon divergence between the mean BEV histograms of two
// sample sets; lands in [0,1].
inline double jsd(const std::vector<BEVHistogram>& set_a,
                  const std::vector<BEVHistogram>& set_b) {
  VEILA_CHECK(!set_a.empty() && !set_b.empty(), "jsd needs nonempty sets");
  auto mean_hist = [](const std::vector<BEVHistogram>& set) {
    i64 nonempty = 0;
    Eigen::VectorXd m = Eigen::VectorXd::Zero(hist_vec(set[0]).size());
    for (const auto& h : set)
      if (!h.empty) {
        m += hist_vec(h);
        ++nonempty;
      }
    VEILA_CHECK(nonempty > 0, "jsd: every cloud in a set is empty");
    return Eigen::VectorXd(m / double(nonempty));
  };
  Eigen::VectorXd p = mean_hist(set_a), q = mean_hist(set_b);
  Eigen::VectorXd m = 0.5 * (p + q);
  auto kl = [](const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    double acc = 0;
    for (i64 i = 0; i < a.size(); ++i)
      if (a[i] > 0) acc += a[i] * std::log2(a[i] / b[i]);
    return acc;
  };
  return 0.5 * (kl(p, m) + kl(q, m));
}

// Unbiased squared-MMD with a Gaussian kernel over per-sample BEV histogram
// vectors. bandwidth: explicit > 0, or nullopt for the median heuristic over
// pairwise distances. The unbiased estimator may dip slightly below zero.
inline double mmd(const std::vector<BEVHistogram>& set_a,
                  const std::vector<BEVHistogram>& set_b,
                  std::optional<double> bandwidth = std::nullopt) {
  const i64 m = i64(set_a.size()), n = i64(set_b.size());
  VEILA_CHECK(m >= 2 && n >= 2, "mmd needs at least two samples per set");
  if (bandwidth) VEILA_CHECK(*bandwidth > 0, "degenerate bandwidth");

  double sigma;
  if (bandwidth) {
    sigma = *bandwidth;
  } else {
    std::vector<double> dists;
    auto vec = [&](i64 i) {
      return i < m ? hist_vec(set_a[size_t(i)]) : hist_vec(set_b[size_t(i - m)]);
    };
    for (i64 i = 0; i < m + n; ++i)
      for (i64 j = i + 1; j < m + n; ++j) dists.push_back((vec(i) - vec(j)).norm());
    std::nth_element(dists.begin(), dists.begin() + i64(dists.size()) / 2, dists.end());
    sigma = dists[size_t(dists.size() / 2)];
    VEILA_CHECK(sigma > 0, "median heuristic found a degenerate bandwidth");
  }
  const double gamma = 1.0 / (2.0 * sigma * sigma);
  auto k = [gamma](const BEVHistogram& x, const BEVHistogram& y) {
    return std::exp(-gamma * (hist_vec(x) - hist_vec(y)).squaredNorm());
  };
  double kaa = 0, kbb = 0, kab = 0;
  for (i64 i = 0; i < m; ++i)
    for (i64 j = 0; j < m; ++j)
      if (i != j) kaa += k(set_a[size_t(i)], set_a[size_t(j)]);
  for (i64 i = 0; i < n; ++i)
    for (i64 j = 0; j < n; ++j)
      if (i != j) kbb += k(set_b[size_t(i)], set_b[size_t(j)]);
  for (i64 i = 0; i < m; ++i)
    for (i64 j = 0; j < n; ++j) kab += k(set_a[size_t(i)], set_b[size_t(j)]);
  return kaa / double(m * (m - 1)) + kbb / double(n * (n - 1)) - 2.0 * kab / double(m * n);
}

}  // namespace veila::metrics
