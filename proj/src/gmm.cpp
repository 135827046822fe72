#include <cmath>
#include <numbers>

#include "spotcheck/cluster.hpp"

namespace spotcheck {

std::vector<int> GmmFit::hard_assignments() const {
  std::vector<int> out(static_cast<std::size_t>(responsibilities.rows()));
  for (Eigen::Index i = 0; i < responsibilities.rows(); ++i) {
    Eigen::Index arg = 0;
    responsibilities.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

int free_parameters(int k, int dims) { return (k - 1) + 2 * k * dims; }

double bic(const GmmFit& fit, Eigen::Index n) {
  const int p = free_parameters(fit.k, static_cast<int>(fit.means.cols()));
  return p * std::log(static_cast<double>(n)) - 2.0 * fit.log_likelihood;
}

namespace {

/// Per-point log-likelihood; fills responsibilities when requested.
double e_step(const GmmFit& fit, const Eigen::MatrixXd& x, Eigen::MatrixXd* resp, Eigen::VectorXd* point_ll) {
  const Eigen::Index n = x.rows(), k = fit.k, d = x.cols();
  Eigen::MatrixXd logp(n, k);
  for (Eigen::Index c = 0; c < k; ++c) {
    double norm = std::log(fit.weights(c));
    for (Eigen::Index j = 0; j < d; ++j) norm -= 0.5 * std::log(2.0 * std::numbers::pi * fit.variances(c, j));
    for (Eigen::Index i = 0; i < n; ++i) {
      double q = 0.0;
      for (Eigen::Index j = 0; j < d; ++j) {
        const double diff = x(i, j) - fit.means(c, j);
        q += diff * diff / fit.variances(c, j);
      }
      logp(i, c) = norm - 0.5 * q;
    }
  }
  double total = 0.0;
  if (resp) resp->resize(n, k);
  if (point_ll) point_ll->resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double top = logp.row(i).maxCoeff();
    const double lse = top + std::log((logp.row(i).array() - top).exp().sum());
    total += lse;
    if (resp) resp->row(i) = (logp.row(i).array() - lse).exp().matrix();
    if (point_ll) (*point_ll)(i) = lse;
  }
  return total;
}

Eigen::RowVectorXd data_variance(const Eigen::MatrixXd& x, double floor) {
  const Eigen::RowVectorXd mean = x.colwise().mean();
  Eigen::RowVectorXd var = (x.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(x.rows());
  return var.cwiseMax(floor);
}

void m_step(GmmFit& fit, const Eigen::MatrixXd& x, const Eigen::MatrixXd& resp, const Eigen::VectorXd& point_ll,
            double floor) {
  const Eigen::Index n = x.rows(), d = x.cols();
  for (Eigen::Index c = 0; c < fit.k; ++c) {
    const double nk = resp.col(c).sum();
    if (nk < 1e-10) {
      // Empty component: restart it on the worst-explained point.
      Eigen::Index worst = 0;
      point_ll.minCoeff(&worst);
      fit.means.row(c) = x.row(worst);
      fit.variances.row(c) = data_variance(x, floor);
      fit.weights(c) = 1.0 / static_cast<double>(n);
      ++fit.reinitializations;
      continue;
    }
    fit.weights(c) = nk / static_cast<double>(n);
    const Eigen::RowVectorXd mean = (resp.col(c).transpose() * x) / nk;
    fit.means.row(c) = mean;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double v = (resp.col(c).array() * (x.col(j).array() - mean(j)).square()).sum() / nk;
      fit.variances(c, j) = std::max(v, floor);
    }
  }
  fit.weights /= fit.weights.sum();
}

GmmFit initialise(const Eigen::MatrixXd& x, int k, Rng& rng, double floor) {
  const Eigen::Index n = x.rows(), d = x.cols();
  // k-means++ seeding.
  std::vector<Eigen::Index> centers{static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)))};
  Eigen::VectorXd dist = (x.rowwise() - x.row(centers[0])).rowwise().squaredNorm();
  while (static_cast<int>(centers.size()) < k) {
    const double total = dist.sum();
    Eigen::Index next = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (next = 0; next < n - 1; ++next) {
        target -= dist(next);
        if (target < 0.0) break;
      }
    } else {
      next = static_cast<Eigen::Index>(rng.index(static_cast<std::uint64_t>(n)));
    }
    centers.push_back(next);
    dist = dist.cwiseMin((x.rowwise() - x.row(next)).rowwise().squaredNorm());
  }

  Eigen::MatrixXd resp = Eigen::MatrixXd::Zero(n, k);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int c = 0; c < k; ++c) {
      const double dd = (x.row(i) - x.row(centers[static_cast<std::size_t>(c)])).squaredNorm();
      if (dd < best_d) {
        best_d = dd;
        best = c;
      }
    }
    resp(i, best) = 1.0;
  }
  GmmFit fit;
  fit.k = k;
  fit.weights = Eigen::VectorXd::Constant(k, 1.0 / k);
  fit.means = Eigen::MatrixXd::Zero(k, d);
  fit.variances = Eigen::MatrixXd::Ones(k, d);
  Eigen::VectorXd uniform_ll = Eigen::VectorXd::Zero(n);
  m_step(fit, x, resp, uniform_ll, floor);
  fit.reinitializations = 0;
  return fit;
}

GmmFit run_em(const Eigen::MatrixXd& x, int k, Rng& rng, const GmmOptions& opt) {
  GmmFit fit = initialise(x, k, rng, opt.variance_floor);
  Eigen::VectorXd point_ll;
  const double n = static_cast<double>(x.rows());
  double ll = e_step(fit, x, &fit.responsibilities, &point_ll);
  fit.trace.push_back(ll);
  for (int it = 0; it < opt.max_iterations; ++it) {
    const int before = fit.reinitializations;
    m_step(fit, x, fit.responsibilities, point_ll, opt.variance_floor);
    if (fit.reinitializations != before) fit.reinitialized_at.push_back(it + 1);
    const double next = e_step(fit, x, &fit.responsibilities, &point_ll);
    fit.trace.push_back(next);
    fit.iterations = it + 1;
    const double gain = (next - ll) / n;
    ll = next;
    if (std::abs(gain) < opt.tolerance) break;
  }
  fit.log_likelihood = ll;
  return fit;
}

}  // namespace

double mixture_log_likelihood(const GmmFit& fit, const Eigen::MatrixXd& x) {
  return e_step(fit, x, nullptr, nullptr);
}

GmmFit fit_gmm(const Eigen::MatrixXd& x, int k, Seed seed, const GmmOptions& options) {
  require(k >= 1, ErrorKind::InvalidArgument, "component count must be positive");
  require(x.rows() >= k, ErrorKind::InvalidArgument, "fewer points than mixture components");
  require(x.allFinite(), ErrorKind::NumericalError, "non-finite mixture input");
  GmmFit best;
  bool have = false;
  for (int r = 0; r < options.restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    GmmFit fit = run_em(x, k, rng, options);
    if (!std::isfinite(fit.log_likelihood))
      fail(ErrorKind::NumericalError, "mixture log-likelihood is not finite");
    if (!have || fit.log_likelihood > best.log_likelihood) {
      best = std::move(fit);
      have = true;
    }
  }
  return best;
}

BicSelection select_k_bic(const Eigen::MatrixXd& x, int k_max, Seed seed, const GmmOptions& options) {
  require(k_max >= 1, ErrorKind::InvalidArgument, "k_max must be positive");
  require(x.rows() > k_max, ErrorKind::InvalidArgument, "need more points than k_max");
  BicSelection out;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    GmmFit fit = fit_gmm(x, k, derive_seed(seed, static_cast<std::uint64_t>(k)), options);
    const double score = bic(fit, x.rows());
    out.bic_by_k.push_back(score);
    if (score < best_bic) {
      best_bic = score;
      out.best = std::move(fit);
    }
  }
  return out;
}

}  // namespace spotcheck
