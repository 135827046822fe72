#pragma once

#include <array>
#include <vector>

#include <Eigen/Dense>

#include "spotcheck/rng.hpp"

namespace spotcheck {

struct Embedding2D {
  Eigen::MatrixXd coords;      // n x 2
  Eigen::MatrixXd normalized;  // n x 2, columns min-max scaled to [0,1]
  std::vector<double> loss_curve;
  Seed seed = 0;
  std::array<double, 2> explained_variance{0.0, 0.0};  // PCA only
};

/// Per-column min-max scaling to [0,1]; a constant column maps to 0.5.
Eigen::MatrixXd normalize_unit_square(const Eigen::MatrixXd& s);

/// Projection onto the top two principal components.
Embedding2D reduce_pca2(const Eigen::MatrixXd& g);

struct ReducerConfig {
  double perplexity = 30.0;  // clamped to n/4
  std::vector<int> hidden{64, 32};
  double reconstruction_weight = 1.0;
  int epochs = 100;
  int batch_size = 256;
  double learning_rate = 1e-3;
  int max_points = 20000;
};

/// Symmetrised, perplexity-calibrated neighbour probabilities (sums to 1).
Eigen::MatrixXd neighbor_probabilities(const Eigen::MatrixXd& x, double perplexity);

/// Encoder/decoder multilayer perceptron with rectifier hidden units. The encoder
/// maps R^d to R^2, the decoder mirrors it back to R^d.
class ReducerNet {
 public:
  ReducerNet(int input_dim, const std::vector<int>& hidden, Rng& rng);

  struct Losses {
    double kl = 0.0;
    double reconstruction = 0.0;
    double total = 0.0;
  };

  /// Loss on one batch, with `p` the batch's renormalised neighbour probabilities.
  /// When `gradient` is non-null it receives d(total)/d(parameters) in flat order.
  Losses evaluate(const Eigen::MatrixXd& x, const Eigen::MatrixXd& p, double reconstruction_weight,
                  Eigen::VectorXd* gradient) const;

  Eigen::MatrixXd encode(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd decode(const Eigen::MatrixXd& y) const;

  Eigen::VectorXd parameters() const;
  void set_parameters(const Eigen::VectorXd& flat);
  Eigen::Index parameter_count() const;

 private:
  struct Dense {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };
  struct Trace {
    std::vector<Eigen::MatrixXd> activations;  // rows = samples
    std::vector<Eigen::MatrixXd> pre;
  };

  static Eigen::MatrixXd run(const std::vector<Dense>& layers, const Eigen::MatrixXd& x, Trace* trace);
  static Eigen::MatrixXd backprop(const std::vector<Dense>& layers, const Trace& trace,
                                  const Eigen::MatrixXd& grad_out, std::vector<Dense>& grads);

  std::vector<Dense> encoder_;
  std::vector<Dense> decoder_;
};

class Reducer {
 public:
  Reducer(ReducerNet net, Eigen::RowVectorXd mean, Eigen::RowVectorXd scale,
          std::vector<double> loss_curve, std::vector<double> kl_curve,
          std::vector<double> reconstruction_curve, Seed seed);

  /// Maps rows of `g` (n x d) to 2D coordinates.
  Eigen::MatrixXd transform(const Eigen::MatrixXd& g) const;
  Embedding2D embed(const Eigen::MatrixXd& g) const;

  const std::vector<double>& loss_curve() const { return loss_curve_; }
  const std::vector<double>& kl_curve() const { return kl_curve_; }
  const std::vector<double>& reconstruction_curve() const { return reconstruction_curve_; }

 private:
  ReducerNet net_;
  Eigen::RowVectorXd mean_;
  Eigen::RowVectorXd scale_;
  std::vector<double> loss_curve_, kl_curve_, reconstruction_curve_;
  Seed seed_;
};

/// Parametric neighbour-embedding reducer trained on the KL neighbourhood loss
/// plus weighted reconstruction error.
Reducer fit_reducer(const Eigen::MatrixXd& g, const ReducerConfig& cfg, Seed seed);

}  // namespace spotcheck
