#include <cmath>
#include <numeric>

#include "spotcheck/common.hpp"
#include "spotcheck/embed.hpp"

namespace spotcheck {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& x) {
  const Eigen::VectorXd norms = x.rowwise().squaredNorm();
  Eigen::MatrixXd d = (-2.0 * x * x.transpose()).colwise() + norms;
  d.rowwise() += norms.transpose();
  d = d.cwiseMax(0.0);
  d.diagonal().setZero();
  return d;
}

}  // namespace

Eigen::MatrixXd neighbor_probabilities(const Eigen::MatrixXd& x, double perplexity) {
  const Eigen::Index n = x.rows();
  const Eigen::MatrixXd d2 = squared_distances(x);
  const double target = std::log(perplexity);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd row(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    double beta = 1.0, lo = 0.0, hi = std::numeric_limits<double>::infinity();
    // Shift by the nearest non-self distance so the exponentials never all underflow.
    double nearest = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (j != i) nearest = std::min(nearest, d2(i, j));
    }
    for (int iter = 0; iter < 200; ++iter) {
      double sum = 0.0, weighted = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        row(j) = j == i ? 0.0 : std::exp(-beta * (d2(i, j) - nearest));
        sum += row(j);
        weighted += row(j) * (d2(i, j) - nearest);
      }
      const double entropy = std::log(sum) + beta * weighted / sum;
      row /= sum;
      const double gap = entropy - target;
      if (std::abs(gap) < 1e-5) break;
      if (gap > 0) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (beta + lo);
      }
    }
    p.row(i) = row.transpose();
  }
  Eigen::MatrixXd sym = p + p.transpose();
  sym /= sym.sum();
  return sym;
}

ReducerNet::ReducerNet(int input_dim, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(2);
  auto make = [&rng](int in, int out) {
    Dense layer{Eigen::MatrixXd(out, in), Eigen::VectorXd::Zero(out)};
    const double bound = std::sqrt(6.0 / in);
    for (Eigen::Index r = 0; r < out; ++r)
      for (Eigen::Index c = 0; c < in; ++c) layer.weight(r, c) = bound * (2.0 * rng.uniform() - 1.0);
    return layer;
  };
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) encoder_.push_back(make(widths[l], widths[l + 1]));
  for (std::size_t l = widths.size() - 1; l > 0; --l) decoder_.push_back(make(widths[l], widths[l - 1]));
}

Eigen::MatrixXd ReducerNet::run(const std::vector<Dense>& layers, const Eigen::MatrixXd& x, Trace* trace) {
  Eigen::MatrixXd a = x;
  if (trace) trace->activations.push_back(a);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = a * layers[l].weight.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (trace) trace->pre.push_back(z);
    a = l + 1 < layers.size() ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
    if (trace) trace->activations.push_back(a);
  }
  return a;
}

Eigen::MatrixXd ReducerNet::backprop(const std::vector<Dense>& layers, const Trace& trace,
                                     const Eigen::MatrixXd& grad_out, std::vector<Dense>& grads) {
  grads.resize(layers.size());
  Eigen::MatrixXd da = grad_out;
  for (std::size_t l = layers.size(); l-- > 0;) {
    Eigen::MatrixXd dz = da;
    if (l + 1 < layers.size()) dz = dz.cwiseProduct((trace.pre[l].array() > 0.0).cast<double>().matrix());
    grads[l].weight = dz.transpose() * trace.activations[l];
    grads[l].bias = dz.colwise().sum().transpose();
    da = dz * layers[l].weight;
  }
  return da;
}

Eigen::MatrixXd ReducerNet::encode(const Eigen::MatrixXd& x) const { return run(encoder_, x, nullptr); }
Eigen::MatrixXd ReducerNet::decode(const Eigen::MatrixXd& y) const { return run(decoder_, y, nullptr); }

ReducerNet::Losses ReducerNet::evaluate(const Eigen::MatrixXd& x, const Eigen::MatrixXd& p,
                                        double reconstruction_weight, Eigen::VectorXd* gradient) const {
  const Eigen::Index b = x.rows();
  Trace enc_trace, dec_trace;
  const Eigen::MatrixXd y = run(encoder_, x, gradient ? &enc_trace : nullptr);
  const Eigen::MatrixXd xhat = run(decoder_, y, gradient ? &dec_trace : nullptr);

  Eigen::MatrixXd w = (1.0 + squared_distances(y).array()).inverse().matrix();
  w.diagonal().setZero();
  const double z = w.sum();
  const Eigen::MatrixXd q = w / z;

  Losses losses;
  for (Eigen::Index i = 0; i < b; ++i) {
    for (Eigen::Index j = 0; j < b; ++j) {
      if (i != j && p(i, j) > 0.0) losses.kl += p(i, j) * std::log(p(i, j) / std::max(q(i, j), 1e-300));
    }
  }
  const Eigen::MatrixXd residual = xhat - x;
  const double count = static_cast<double>(residual.size());
  losses.reconstruction = residual.squaredNorm() / count;
  losses.total = losses.kl + reconstruction_weight * losses.reconstruction;

  if (gradient) {
    const Eigen::MatrixXd m = (p - q).cwiseProduct(w);
    Eigen::MatrixXd grad_y = 4.0 * (m.rowwise().sum().asDiagonal() * y - m * y);

    std::vector<Dense> dec_grads, enc_grads;
    const Eigen::MatrixXd grad_xhat = (2.0 * reconstruction_weight / count) * residual;
    grad_y += backprop(decoder_, dec_trace, grad_xhat, dec_grads);
    backprop(encoder_, enc_trace, grad_y, enc_grads);

    gradient->resize(parameter_count());
    Eigen::Index offset = 0;
    for (const auto* group : {&enc_grads, &dec_grads}) {
      for (const auto& g : *group) {
        gradient->segment(offset, g.weight.size()) = g.weight.reshaped();
        offset += g.weight.size();
        gradient->segment(offset, g.bias.size()) = g.bias;
        offset += g.bias.size();
      }
    }
  }
  return losses;
}

Eigen::Index ReducerNet::parameter_count() const {
  Eigen::Index count = 0;
  for (const auto* group : {&encoder_, &decoder_})
    for (const auto& l : *group) count += l.weight.size() + l.bias.size();
  return count;
}

Eigen::VectorXd ReducerNet::parameters() const {
  Eigen::VectorXd flat(parameter_count());
  Eigen::Index offset = 0;
  for (const auto* group : {&encoder_, &decoder_}) {
    for (const auto& l : *group) {
      flat.segment(offset, l.weight.size()) = l.weight.reshaped();
      offset += l.weight.size();
      flat.segment(offset, l.bias.size()) = l.bias;
      offset += l.bias.size();
    }
  }
  return flat;
}

void ReducerNet::set_parameters(const Eigen::VectorXd& flat) {
  require(flat.size() == parameter_count(), ErrorKind::DimensionMismatch, "parameter vector size");
  Eigen::Index offset = 0;
  for (auto* group : {&encoder_, &decoder_}) {
    for (auto& l : *group) {
      l.weight.reshaped() = flat.segment(offset, l.weight.size());
      offset += l.weight.size();
      l.bias = flat.segment(offset, l.bias.size());
      offset += l.bias.size();
    }
  }
}

Reducer::Reducer(ReducerNet net, Eigen::RowVectorXd mean, Eigen::RowVectorXd scale,
                 std::vector<double> loss_curve, std::vector<double> kl_curve,
                 std::vector<double> reconstruction_curve, Seed seed)
    : net_(std::move(net)),
      mean_(std::move(mean)),
      scale_(std::move(scale)),
      loss_curve_(std::move(loss_curve)),
      kl_curve_(std::move(kl_curve)),
      reconstruction_curve_(std::move(reconstruction_curve)),
      seed_(seed) {}

Eigen::MatrixXd Reducer::transform(const Eigen::MatrixXd& g) const {
  require(g.cols() == mean_.size(), ErrorKind::DimensionMismatch, "reducer input dimension");
  const Eigen::MatrixXd x = (g.rowwise() - mean_).array().rowwise() / scale_.array();
  return net_.encode(x);
}

Embedding2D Reducer::embed(const Eigen::MatrixXd& g) const {
  Embedding2D out;
  out.coords = transform(g);
  out.normalized = normalize_unit_square(out.coords);
  out.loss_curve = loss_curve_;
  out.seed = seed_;
  return out;
}

Reducer fit_reducer(const Eigen::MatrixXd& g, const ReducerConfig& cfg, Seed seed) {
  const Eigen::Index n = g.rows();
  require(n >= 10, ErrorKind::InvalidArgument, "reducer needs at least 10 rows");
  require(n <= cfg.max_points, ErrorKind::InvalidArgument,
          "reducer input exceeds " + std::to_string(cfg.max_points) + " rows; subsample first");
  require(g.allFinite(), ErrorKind::NumericalError, "reducer input has non-finite entries");
  require(((g.rowwise() - g.row(0)).cwiseAbs().maxCoeff() > 0.0), ErrorKind::DegenerateInput,
          "all input rows are identical");

  const Eigen::RowVectorXd mean = g.colwise().mean();
  Eigen::RowVectorXd scale =
      ((g.rowwise() - mean).colwise().squaredNorm() / static_cast<double>(n)).cwiseSqrt();
  for (Eigen::Index c = 0; c < scale.size(); ++c) {
    if (!(scale(c) > 1e-12)) scale(c) = 1.0;
  }
  const Eigen::MatrixXd x = (g.rowwise() - mean).array().rowwise() / scale.array();

  const double perplexity = std::min(cfg.perplexity, static_cast<double>(n) / 4.0);
  const Eigen::MatrixXd p = neighbor_probabilities(x, perplexity);

  Rng rng(seed);
  ReducerNet net(static_cast<int>(g.cols()), cfg.hidden, rng);
  Eigen::VectorXd theta = net.parameters();
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd m2 = Eigen::VectorXd::Zero(theta.size());
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  long step = 0;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::vector<double> loss_curve, kl_curve, rec_curve;
  Eigen::VectorXd grad;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double total = 0.0, kl = 0.0, rec = 0.0;
    int batches = 0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      if (end - start < 2) continue;
      const auto bsize = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd xb(bsize, x.cols());
      Eigen::MatrixXd pb(bsize, bsize);
      for (Eigen::Index i = 0; i < bsize; ++i) {
        xb.row(i) = x.row(order[start + static_cast<std::size_t>(i)]);
        for (Eigen::Index j = 0; j < bsize; ++j)
          pb(i, j) = p(order[start + static_cast<std::size_t>(i)], order[start + static_cast<std::size_t>(j)]);
      }
      const double mass = pb.sum();
      pb = mass > 0.0 ? Eigen::MatrixXd(pb / mass)
                      : Eigen::MatrixXd::Constant(bsize, bsize, 1.0 / static_cast<double>(bsize * (bsize - 1)));
      if (mass <= 0.0) pb.diagonal().setZero();

      const auto losses = net.evaluate(xb, pb, cfg.reconstruction_weight, &grad);
      if (!std::isfinite(losses.total) || !grad.allFinite())
        fail(ErrorKind::NumericalError, "reducer loss became non-finite at epoch " + std::to_string(epoch + 1));
      ++step;
      m1 = beta1 * m1 + (1.0 - beta1) * grad;
      m2 = beta2 * m2 + (1.0 - beta2) * grad.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      theta.array() -= cfg.learning_rate * (m1.array() / c1) / ((m2.array() / c2).sqrt() + eps);
      net.set_parameters(theta);

      total += losses.total;
      kl += losses.kl;
      rec += losses.reconstruction;
      ++batches;
    }
    loss_curve.push_back(total / batches);
    kl_curve.push_back(kl / batches);
    rec_curve.push_back(rec / batches);
  }
  return Reducer(std::move(net), mean, scale, std::move(loss_curve), std::move(kl_curve),
                 std::move(rec_curve), seed);
}

}  // namespace spotcheck
