#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "spotcheck/common.hpp"
#include "spotcheck/rng.hpp"

namespace spotcheck {

enum class GlobalPooling { Average, Max };

struct ConvArchitecture {
  std::vector<int> channels{8, 16, 32};
  std::vector<int> head_hidden;  // empty: linear head
  GlobalPooling pooling = GlobalPooling::Average;
  bool coordinates = false;  // append row/column position channels to the input
};

/// Small binary image classifier: blocks of 3x3 convolution (padding 1), rectifier
/// and 2x2 max-pooling, a global pooling over positions, then a dense head ending
/// in one logit. The globally pooled vector is the representation exposed to
/// discovery methods.
///
/// Images are C x (H*W) row-major matrices, pixels in row-major order.
template <class T>
class ConvNet {
 public:
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix weight;  // conv: out x (in * 9); dense: out x in
    Vector bias;
  };

  struct Params {
    std::vector<Layer> convs;
    std::vector<Layer> head;  // rectifier between layers, last has one output

    void set_zero() {
      for_each([](Layer& l) {
        l.weight.setZero();
        l.bias.setZero();
      });
    }

    /// Applies f(param, other, count) over every tensor pair.
    template <class F>
    void zip(Params& other, F&& f) {
      auto pair = [&](std::vector<Layer>& mine, std::vector<Layer>& theirs) {
        for (std::size_t l = 0; l < mine.size(); ++l) {
          f(mine[l].weight.data(), theirs[l].weight.data(), mine[l].weight.size());
          f(mine[l].bias.data(), theirs[l].bias.data(), mine[l].bias.size());
        }
      };
      pair(convs, other.convs);
      pair(head, other.head);
    }

    Eigen::Index size() const {
      Eigen::Index n = 0;
      for_each([&](const Layer& l) { n += l.weight.size() + l.bias.size(); });
      return n;
    }

    Vector flatten() const {
      Vector out(size());
      Eigen::Index o = 0;
      for_each([&](const Layer& l) {
        out.segment(o, l.weight.size()) = l.weight.reshaped();
        o += l.weight.size();
        out.segment(o, l.bias.size()) = l.bias;
        o += l.bias.size();
      });
      return out;
    }

    void assign(const Vector& flat) {
      require(flat.size() == size(), ErrorKind::DimensionMismatch, "parameter vector size");
      Eigen::Index o = 0;
      for_each([&](Layer& l) {
        l.weight.reshaped() = flat.segment(o, l.weight.size());
        o += l.weight.size();
        l.bias = flat.segment(o, l.bias.size());
        o += l.bias.size();
      });
    }

    template <class F>
    void for_each(F&& f) {
      for (auto& l : convs) f(l);
      for (auto& l : head) f(l);
    }
    template <class F>
    void for_each(F&& f) const {
      for (const auto& l : convs) f(l);
      for (const auto& l : head) f(l);
    }
  };

  ConvNet() = default;

  ConvNet(int in_channels, const ConvArchitecture& arch, Rng& rng) : pooling_(arch.pooling) {
    require(!arch.channels.empty(), ErrorKind::InvalidArgument, "at least one convolution block is required");
    int in = in_channels;
    for (int out : arch.channels) {
      params_.convs.push_back(random_layer(out, in * 9, std::sqrt(2.0 / (in * 9)), rng));
      in = out;
    }
    for (int out : arch.head_hidden) {
      params_.head.push_back(random_layer(out, in, std::sqrt(2.0 / in), rng));
      in = out;
    }
    params_.head.push_back(random_layer(1, in, std::sqrt(1.0 / in), rng));
  }

  ConvNet(Params params, GlobalPooling pooling) : params_(std::move(params)), pooling_(pooling) {
    require(!params_.convs.empty() && !params_.head.empty() && params_.head.back().weight.rows() == 1,
            ErrorKind::DimensionMismatch, "network needs convolutions and a head ending in one output");
  }

  Params& params() { return params_; }
  const Params& params() const { return params_; }
  GlobalPooling pooling() const { return pooling_; }
  int feature_dim() const { return static_cast<int>(params_.convs.back().weight.rows()); }
  int in_channels() const { return static_cast<int>(params_.convs.front().weight.cols() / 9); }

  /// Intermediate values kept for the backward pass. Reusing one across calls
  /// avoids reallocating the large im2col buffers.
  struct Cache {
    std::vector<Matrix> cols;              // im2col per block
    std::vector<Matrix> pre;               // pre-activation per block
    std::vector<Matrix> pooled;            // rectified, pooled output per block
    std::vector<std::vector<int>> argmax;  // pooled -> source pixel
    std::vector<int> heights, widths;      // input size per block
    Vector features;
    std::vector<Eigen::Index> feature_argmax;
    std::vector<Vector> head_in;  // input of each head layer
    Matrix dpre, dcols, dx, dpooled;
  };

  /// Returns the logit; fills `features` (the pooled representation).
  T forward(const Matrix& image, int height, int width, Vector* features, Cache* cache) const {
    Cache local;
    Cache& c = cache ? *cache : local;
    const std::size_t blocks = params_.convs.size();
    c.cols.resize(blocks);
    c.pre.resize(blocks);
    c.pooled.resize(blocks);
    c.argmax.resize(blocks);
    c.heights.resize(blocks);
    c.widths.resize(blocks);
    const Matrix* x = &image;
    int h = height, w = width;
    for (std::size_t l = 0; l < blocks; ++l) {
      require(h % 2 == 0 && w % 2 == 0, ErrorKind::DimensionMismatch, "image size not divisible by 2^blocks");
      const auto& conv = params_.convs[l];
      im2col(*x, h, w, c.cols[l]);
      c.pre[l].noalias() = conv.weight * c.cols[l];
      c.pre[l].colwise() += conv.bias;
      relu_max_pool(c.pre[l], h, w, c.pooled[l], c.argmax[l]);
      c.heights[l] = h;
      c.widths[l] = w;
      x = &c.pooled[l];
      h /= 2;
      w /= 2;
    }
    if (pooling_ == GlobalPooling::Max) {
      c.features.resize(x->rows());
      c.feature_argmax.resize(static_cast<std::size_t>(x->rows()));
      for (Eigen::Index ch = 0; ch < x->rows(); ++ch)
        c.features(ch) = x->row(ch).maxCoeff(&c.feature_argmax[static_cast<std::size_t>(ch)]);
    } else {
      c.features = x->rowwise().mean();
    }
    if (features) *features = c.features;

    c.head_in.resize(params_.head.size());
    c.head_in[0] = c.features;
    for (std::size_t l = 0; l + 1 < params_.head.size(); ++l) {
      c.head_in[l + 1] = ((params_.head[l].weight * c.head_in[l]) + params_.head[l].bias).cwiseMax(T(0));
    }
    const auto& last = params_.head.back();
    return last.weight.row(0).dot(c.head_in.back()) + last.bias(0);
  }

  /// Binary cross-entropy on one image; adds its gradient into `grad`.
  T accumulate(const Matrix& image, int height, int width, bool label, Params& grad, T scale,
               Cache* workspace = nullptr) const {
    Cache local;
    Cache& c = workspace ? *workspace : local;
    const T z = forward(image, height, width, nullptr, &c);
    const T y = label ? T(1) : T(0);
    const T loss = softplus(z) - y * z;

    Vector dout = Vector::Constant(1, scale * (sigmoid(z) - y));
    for (std::size_t l = params_.head.size(); l-- > 0;) {
      grad.head[l].weight.noalias() += dout * c.head_in[l].transpose();
      grad.head[l].bias += dout;
      Vector din = params_.head[l].weight.transpose() * dout;
      if (l > 0) din = (c.head_in[l].array() > T(0)).select(din, T(0));
      dout = std::move(din);
    }

    const int last_area = (c.heights.back() / 2) * (c.widths.back() / 2);
    if (pooling_ == GlobalPooling::Max) {
      c.dpooled.setZero(dout.size(), last_area);
      for (Eigen::Index ch = 0; ch < dout.size(); ++ch)
        c.dpooled(ch, c.feature_argmax[static_cast<std::size_t>(ch)]) = dout(ch);
    } else {
      c.dpooled = (dout / static_cast<T>(last_area)).replicate(1, last_area);
    }

    for (std::size_t l = params_.convs.size(); l-- > 0;) {
      const auto& pre = c.pre[l];
      c.dpre.setZero(pre.rows(), pre.cols());
      const auto& arg = c.argmax[l];
      const Eigen::Index area = c.dpooled.cols();
      for (Eigen::Index ch = 0; ch < c.dpooled.rows(); ++ch) {
        const int* a = arg.data() + ch * area;
        for (Eigen::Index p = 0; p < area; ++p) {
          if (a[p] >= 0) c.dpre(ch, a[p]) = c.dpooled(ch, p);
        }
      }
      grad.convs[l].weight.noalias() += c.dpre * c.cols[l].transpose();
      grad.convs[l].bias += c.dpre.rowwise().sum();
      if (l > 0) {
        c.dcols.noalias() = params_.convs[l].weight.transpose() * c.dpre;
        col2im(c.dcols, c.heights[l], c.widths[l], static_cast<int>(params_.convs[l].weight.cols() / 9), c.dx);
        std::swap(c.dpooled, c.dx);
      }
    }
    return loss;
  }

  static T sigmoid(T z) { return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z)); }
  static T softplus(T z) { return z > T(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

 private:
  static Layer random_layer(int out, int in, double sd, Rng& rng) {
    Layer l{Matrix(out, in), Vector::Zero(out)};
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) l.weight.data()[i] = static_cast<T>(sd * rng.normal());
    return l;
  }

  // Row (c, ky, kx) of `cols` holds channel c shifted by (ky-1, kx-1), zero outside.
  static void im2col(const Matrix& x, int h, int w, Matrix& cols) {
    const auto channels = x.rows();
    cols.setZero(channels * 9, static_cast<Eigen::Index>(h) * w);
    for (Eigen::Index c = 0; c < channels; ++c) {
      const T* src = x.row(c).data();
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          T* dst = cols.row(c * 9 + ky * 3 + kx).data();
          const int x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            const T* s = src + sy * w + kx;
            T* d = dst + y * w;
            for (int xx = x0; xx < x1; ++xx) d[xx] = s[xx - 1];
          }
        }
      }
    }
  }

  static void col2im(const Matrix& cols, int h, int w, int channels, Matrix& x) {
    x.setZero(channels, static_cast<Eigen::Index>(h) * w);
    for (Eigen::Index c = 0; c < channels; ++c) {
      T* dst = x.row(c).data();
      for (int ky = 0; ky < 3; ++ky) {
        for (int kx = 0; kx < 3; ++kx) {
          const T* src = cols.row(c * 9 + ky * 3 + kx).data();
          const int x0 = kx == 0 ? 1 : 0, x1 = kx == 2 ? w - 1 : w;
          for (int y = 0; y < h; ++y) {
            const int sy = y + ky - 1;
            if (sy < 0 || sy >= h) continue;
            T* d = dst + sy * w + kx;
            const T* s = src + y * w;
            for (int xx = x0; xx < x1; ++xx) d[xx - 1] += s[xx];
          }
        }
      }
    }
  }

  // Max-pooling of the rectified input. Pooling before rectifying gives the same
  // values; argmax is -1 where the window maximum is not positive (zero gradient).
  static void relu_max_pool(const Matrix& x, int h, int w, Matrix& out, std::vector<int>& arg) {
    const int oh = h / 2, ow = w / 2;
    out.resize(x.rows(), static_cast<Eigen::Index>(oh) * ow);
    arg.resize(static_cast<std::size_t>(x.rows() * oh * ow));
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      const T* src = x.row(c).data();
      T* dst = out.row(c).data();
      int* a = arg.data() + c * oh * ow;
      for (int y = 0; y < oh; ++y) {
        for (int xx = 0; xx < ow; ++xx) {
          int best = (2 * y) * w + 2 * xx;
          for (int dy = 0; dy < 2; ++dy) {
            for (int dx = 0; dx < 2; ++dx) {
              const int s = (2 * y + dy) * w + 2 * xx + dx;
              if (src[s] > src[best]) best = s;
            }
          }
          const int o = y * ow + xx;
          if (src[best] > T(0)) {
            dst[o] = src[best];
            a[o] = best;
          } else {
            dst[o] = T(0);
            a[o] = -1;
          }
        }
      }
    }
  }

  Params params_;
  GlobalPooling pooling_ = GlobalPooling::Average;
};

}  // namespace spotcheck
