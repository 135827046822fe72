#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spotcheck/embed.hpp"
#include "spotcheck/metrics.hpp"
#include "spotcheck/models.hpp"

namespace spotcheck {

/// R = [normalized 2D coordinates, weight * confidence], n x 3.
struct PlaneSpotFeatures {
  Eigen::MatrixXd r;
  double weight = 0.0;
};

PlaneSpotFeatures build_features(const Eigen::MatrixXd& sbar, const Eigen::VectorXd& confidence,
                                 double weight);

struct GmmOptions {
  int max_iterations = 200;
  double tolerance = 1e-6;  // on the mean per-sample log-likelihood gain
  int restarts = 5;
  double variance_floor = 1e-6;
};

/// Diagonal-covariance Gaussian mixture.
struct GmmFit {
  int k = 0;
  Eigen::VectorXd weights;     // K
  Eigen::MatrixXd means;       // K x D
  Eigen::MatrixXd variances;   // K x D
  double log_likelihood = 0.0;
  Eigen::MatrixXd responsibilities;  // n x K
  std::vector<double> trace;   // log-likelihood after each EM iteration of the selected restart
  int iterations = 0;
  int reinitializations = 0;
  std::vector<int> reinitialized_at;  // iterations whose M-step restarted an empty component

  std::vector<int> hard_assignments() const;
};

/// Log-likelihood of `x` under the mixture, with log-sum-exp per row.
double mixture_log_likelihood(const GmmFit& fit, const Eigen::MatrixXd& x);

/// Number of free parameters of a diagonal mixture with K components in D dims.
int free_parameters(int k, int dims);

double bic(const GmmFit& fit, Eigen::Index n);

GmmFit fit_gmm(const Eigen::MatrixXd& x, int k, Seed seed, const GmmOptions& options = {});

struct BicSelection {
  GmmFit best;
  std::vector<double> bic_by_k;  // index k-1
};

BicSelection select_k_bic(const Eigen::MatrixXd& x, int k_max, Seed seed, const GmmOptions& options = {});

/// Importance = (errors / size) * errors, with errors = members whose confidence is
/// below `error_threshold`. Sorted descending; empty clusters dropped.
HypothesisList rank_clusters(const std::vector<int>& assignments, int k,
                             const std::vector<ImageId>& image_ids, const Eigen::VectorXd& confidence,
                             double error_threshold = 0.5);

enum class ReducerKind { Parametric, Pca };

struct PlaneSpotConfig {
  double weight = 0.025;
  int k_max = 12;
  std::size_t k_return = 10;
  double error_threshold = 0.5;
  bool drop_zero_importance = false;
  ReducerKind reducer = ReducerKind::Parametric;
  ReducerConfig reducer_config;
  GmmOptions gmm;
};

std::string describe(const PlaneSpotConfig& cfg);

struct PlaneSpotResult {
  HypothesisList all;      // untruncated, every input image in exactly one entry
  HypothesisList top;      // first k_return entries
  Embedding2D embedding;
  PlaneSpotFeatures features;
  int selected_k = 0;
  std::vector<double> bic_by_k;
};

PlaneSpotResult planespot(const ModelOutputs& outputs, const PlaneSpotConfig& cfg, Seed seed);

}  // namespace spotcheck
