#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "spotcheck/models.hpp"

namespace spotcheck {

void validate(const ModelOutputs& outputs) {
  const auto n = static_cast<Eigen::Index>(outputs.image_ids.size());
  require(outputs.representations.rows() == n && outputs.confidences.size() == n,
          ErrorKind::DimensionMismatch, "model outputs have mismatched row counts");
  require(outputs.representations.cols() >= 2, ErrorKind::DimensionMismatch,
          "representation dimension must be at least 2");
  require(outputs.representations.allFinite(), ErrorKind::NumericalError, "non-finite representation");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double c = outputs.confidences(i);
    require(c >= 0.0 && c <= 1.0, ErrorKind::InvalidArgument,
            "confidence outside [0,1] for image " + std::to_string(outputs.image_ids[static_cast<std::size_t>(i)]));
  }
}

ModelOutputs select_rows(const ModelOutputs& outputs, std::span<const ImageId> ids) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < outputs.image_ids.size(); ++i) {
    if (contains(ids, outputs.image_ids[i])) rows.push_back(static_cast<Eigen::Index>(i));
  }
  ModelOutputs out;
  out.representations.resize(static_cast<Eigen::Index>(rows.size()), outputs.representations.cols());
  out.confidences.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    out.image_ids.push_back(outputs.image_ids[static_cast<std::size_t>(rows[r])]);
    out.representations.row(static_cast<Eigen::Index>(r)) = outputs.representations.row(rows[r]);
    out.confidences(static_cast<Eigen::Index>(r)) = outputs.confidences(rows[r]);
  }
  return out;
}

void write_outputs_csv(const ModelOutputs& outputs, const std::string& path) {
  validate(outputs);
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << "image_id,confidence";
  for (Eigen::Index c = 0; c < outputs.representations.cols(); ++c) out << ",r" << c;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < outputs.image_ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    out << outputs.image_ids[i];
    std::snprintf(buf, sizeof buf, "%.17g", outputs.confidences(r));
    out << ',' << buf;
    for (Eigen::Index c = 0; c < outputs.representations.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", outputs.representations(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
}

ModelOutputs read_outputs_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path);
  std::string line;
  std::getline(in, line);
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) header.push_back(cell);
  }
  require(header.size() >= 4 && header[0] == "image_id" && header[1] == "confidence",
          ErrorKind::ImportFormatError, path + ": header must start with image_id,confidence,r0,r1");
  for (std::size_t c = 2; c < header.size(); ++c) {
    require(header[c] == "r" + std::to_string(c - 2), ErrorKind::ImportFormatError,
            path + ": unexpected column '" + header[c] + "'");
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 2);
  std::vector<ImageId> ids;
  std::vector<double> conf, rep;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    require(cells.size() == header.size(), ErrorKind::ImportFormatError,
            path + ":" + std::to_string(line_no) + ": wrong column count");
    try {
      ids.push_back(std::stoll(cells[0]));
      conf.push_back(std::stod(cells[1]));
      for (std::size_t c = 2; c < cells.size(); ++c) rep.push_back(std::stod(cells[c]));
    } catch (const std::exception&) {
      fail(ErrorKind::ImportFormatError, path + ":" + std::to_string(line_no) + ": unparsable number");
    }
  }
  ModelOutputs out;
  out.image_ids = ids;
  const auto n = static_cast<Eigen::Index>(ids.size());
  out.confidences = Eigen::Map<Eigen::VectorXd>(conf.data(), n);
  out.representations = Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(rep.data(), n, d);
  validate(out);
  return out;
}

const char* to_string(SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return "train";
    case SplitTag::Val: return "val";
    case SplitTag::Test: return "test";
  }
  return "?";
}

namespace {

bool in_any(const BlindspotSet& set, const SceneDescription& scene) {
  return std::any_of(set.blindspots.begin(), set.blindspots.end(),
                     [&](const BlindspotSpec& b) { return matches(b, scene); });
}

}  // namespace

LabeledSplit induce_labels(const LabeledSplit& split, const BlindspotSet& blindspots) {
  LabeledSplit out = split;
  if (split.tag == SplitTag::Test) return out;
  for (std::size_t i = 0; i < out.scenes.size(); ++i) {
    if (in_any(blindspots, out.scenes[i])) out.training_labels[i] = !out.training_labels[i];
  }
  return out;
}

LabeledSplit induce_labels(std::vector<SceneDescription> scenes, const BlindspotSet& blindspots,
                           SplitTag tag) {
  LabeledSplit split;
  split.tag = tag;
  split.scenes = std::move(scenes);
  for (const auto& s : split.scenes) split.clean_labels.push_back(label_of(s));
  split.training_labels = split.clean_labels;
  return induce_labels(split, blindspots);
}

OracleModel::OracleModel(BlindspotSet blindspots, OracleConfig cfg, Seed seed)
    : blindspots_(std::move(blindspots)), cfg_(cfg), seed_(seed) {}

int OracleModel::representation_dim() const {
  return static_cast<int>(blindspots_.dataset.rollable.size()) + 1;
}

ModelOutputs OracleModel::outputs(const std::vector<SceneDescription>& scenes, const RenderConfig&) const {
  const auto& keys = blindspots_.dataset.rollable;
  const auto n = static_cast<Eigen::Index>(scenes.size());
  const int d = representation_dim();
  ModelOutputs out;
  out.representations.resize(n, d);
  out.confidences.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& scene = scenes[static_cast<std::size_t>(i)];
    out.image_ids.push_back(scene.image_id);
    Rng rng(derive_seed(seed_, static_cast<std::uint64_t>(scene.image_id)));
    for (std::size_t k = 0; k < keys.size(); ++k) {
      const double base = scene.value_of(keys[k]) == 1 ? 1.0 : -1.0;
      out.representations(i, static_cast<Eigen::Index>(k)) = base + cfg_.jitter * rng.normal();
    }
    const int rel = scene.value_of(kRelativePosition);
    const double rel_coord = rel == 1 ? 1.0 : (rel == 0 ? -1.0 : 0.0);
    out.representations(i, d - 1) = rel_coord + cfg_.jitter * rng.normal();

    const bool correct = !in_any(blindspots_, scene);
    const bool positive = label_of(scene);
    double c = (correct == positive) ? 1.0 - cfg_.epsilon : cfg_.epsilon;
    if (cfg_.confidence_noise > 0.0) c = std::clamp(c + cfg_.confidence_noise * rng.normal(), 0.0, 1.0);
    out.confidences(i) = c;
  }
  return out;
}

OracleModel oracle_model(const BlindspotSet& blindspots, const OracleConfig& cfg, Seed seed) {
  return OracleModel(blindspots, cfg, seed);
}

namespace {

using FloatNet = ConvNet<float>;

// Colour scaled to [-1, 1]; with 5 channels, row and column position follow.
FloatNet::Matrix to_input(const RgbImage& img, int channels) {
  FloatNet::Matrix x(channels, static_cast<Eigen::Index>(img.width) * img.height);
  const std::size_t pixels = static_cast<std::size_t>(img.width) * img.height;
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int c = 0; c < 3; ++c) x(c, static_cast<Eigen::Index>(p)) = img.pixels[3 * p + static_cast<std::size_t>(c)] / 127.5f - 1.0f;
  }
  if (channels == 5) {
    for (int r = 0; r < img.height; ++r) {
      for (int c = 0; c < img.width; ++c) {
        const auto p = static_cast<Eigen::Index>(r) * img.width + c;
        x(3, p) = 2.0f * (static_cast<float>(r) + 0.5f) / static_cast<float>(img.height) - 1.0f;
        x(4, p) = 2.0f * (static_cast<float>(c) + 0.5f) / static_cast<float>(img.width) - 1.0f;
      }
    }
  }
  return x;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
};

Evaluation evaluate_split(const FloatNet& net, const std::vector<FloatNet::Matrix>& images, int height, int width,
                          const std::vector<bool>& labels) {
  Evaluation e;
  FloatNet::Cache workspace;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const float z = net.forward(images[i], height, width, nullptr, &workspace);
    const float y = labels[i] ? 1.0f : 0.0f;
    e.loss += FloatNet::softplus(z) - y * z;
    e.accuracy += ((z >= 0.0f) == labels[i]) ? 1.0 : 0.0;
  }
  e.loss /= static_cast<double>(images.size());
  e.accuracy /= static_cast<double>(images.size());
  return e;
}

}  // namespace

TrainedModel::TrainedModel(ConvNet<float> net, RenderConfig render_cfg)
    : net_(std::move(net)), render_cfg_(std::move(render_cfg)) {}

ModelOutputs TrainedModel::outputs(const std::vector<SceneDescription>& scenes,
                                   const RenderConfig& render_cfg) const {
  const auto n = static_cast<Eigen::Index>(scenes.size());
  ModelOutputs out;
  out.representations.resize(n, net_.feature_dim());
  out.confidences.resize(n);
  FloatNet::Vector feat;
  FloatNet::Cache workspace;
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& scene = scenes[static_cast<std::size_t>(i)];
    const auto img = render(scene, render_cfg);
    const float z = net_.forward(to_input(img, net_.in_channels()), img.height, img.width, &feat, &workspace);
    out.image_ids.push_back(scene.image_id);
    out.representations.row(i) = feat.cast<double>().transpose();
    out.confidences(i) = static_cast<double>(FloatNet::sigmoid(z));
  }
  return out;
}

TrainedModel train_classifier(const LabeledSplit& train, const LabeledSplit& val, const TrainConfig& cfg,
                              Seed seed) {
  require(!train.scenes.empty() && !val.scenes.empty(), ErrorKind::InvalidArgument,
          "training and validation splits must be non-empty");
  const auto render_cfg = RenderConfig::for_resolution(cfg.resolution);
  const int side = render_cfg.resolution;
  std::vector<FloatNet::Matrix> train_images, val_images;
  const int channels = cfg.architecture.coordinates ? 5 : 3;
  for (const auto& s : train.scenes) train_images.push_back(to_input(render(s, render_cfg), channels));
  for (const auto& s : val.scenes) val_images.push_back(to_input(render(s, render_cfg), channels));

  Rng rng(seed);
  FloatNet net(channels, cfg.architecture, rng);
  auto best = net;
  double best_val = std::numeric_limits<double>::infinity();
  int best_epoch = 0;
  std::vector<EpochStats> history;

  FloatNet::Params grad = net.params(), velocity = net.params();
  velocity.set_zero();
  std::vector<std::size_t> order(train_images.size());
  std::iota(order.begin(), order.end(), 0);
  const auto lr = static_cast<float>(cfg.learning_rate);
  const auto mu = static_cast<float>(cfg.momentum);
  FloatNet::Cache workspace;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      grad.set_zero();
      const float scale = 1.0f / static_cast<float>(end - start);
      for (std::size_t b = start; b < end; ++b) {
        epoch_loss += net.accumulate(train_images[order[b]], side, side, train.training_labels[order[b]], grad, scale,
                                     &workspace);
      }
      velocity.zip(grad, [mu](float* v, float* g, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) v[i] = mu * v[i] + g[i];
      });
      net.params().zip(velocity, [lr](float* p, float* v, Eigen::Index n) {
        for (Eigen::Index i = 0; i < n; ++i) p[i] -= lr * v[i];
      });
    }
    epoch_loss /= static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss))
      fail(ErrorKind::DivergenceError, "training loss became non-finite at epoch " + std::to_string(epoch + 1));
    const auto v = evaluate_split(net, val_images, side, side, val.training_labels);
    history.push_back({epoch_loss, v.loss, v.accuracy});
    if (v.loss < best_val) {
      best_val = v.loss;
      best = net;
      best_epoch = epoch + 1;
    }
  }
  TrainedModel model(std::move(best), render_cfg);
  model.history = std::move(history);
  model.selected_epoch = best_epoch;
  return model;
}

InductionReport verify_induction(const ModelOutputs& val_outputs, const LabeledSplit& val,
                                 const BlindspotSet& blindspots, const InductionThresholds& thresholds) {
  require(val_outputs.image_ids.size() == val.scenes.size(), ErrorKind::DimensionMismatch,
          "outputs and split differ in size");
  const std::size_t m = blindspots.blindspots.size();
  InductionReport report;
  std::vector<double> inside_correct(m, 0.0), inside_pos(m, 0.0), inside_pos_hit(m, 0.0);
  report.inside_count.assign(m, 0);
  double outside_correct = 0.0, outside_total = 0.0, outside_pos = 0.0, outside_pos_hit = 0.0;

  for (std::size_t i = 0; i < val.scenes.size(); ++i) {
    const bool predicted = val_outputs.confidences(static_cast<Eigen::Index>(i)) >= 0.5;
    const bool truth = val.clean_labels[i];
    const bool correct = predicted == truth;
    bool inside_any = false;
    for (std::size_t b = 0; b < m; ++b) {
      if (!matches(blindspots.blindspots[b], val.scenes[i])) continue;
      inside_any = true;
      ++report.inside_count[b];
      inside_correct[b] += correct ? 1.0 : 0.0;
      if (truth) {
        inside_pos[b] += 1.0;
        inside_pos_hit[b] += predicted ? 1.0 : 0.0;
      }
    }
    if (!inside_any) {
      outside_total += 1.0;
      outside_correct += correct ? 1.0 : 0.0;
      if (truth) {
        outside_pos += 1.0;
        outside_pos_hit += predicted ? 1.0 : 0.0;
      }
    }
  }
  report.accuracy_outside = outside_total > 0 ? outside_correct / outside_total : 0.0;
  report.recall_outside = outside_pos > 0 ? outside_pos_hit / outside_pos : 0.0;
  for (std::size_t b = 0; b < m; ++b) {
    const double n = static_cast<double>(report.inside_count[b]);
    report.accuracy_inside.push_back(n > 0 ? inside_correct[b] / n : 0.0);
    report.recall_inside.push_back(inside_pos[b] > 0 ? inside_pos_hit[b] / inside_pos[b] : 0.0);
    bool ok;
    if (thresholds.real_data) {
      ok = inside_pos[b] > 0 && report.recall_outside - report.recall_inside[b] >= thresholds.recall_gap;
    } else {
      ok = n > 0 && report.accuracy_outside >= thresholds.outside && report.accuracy_inside[b] <= thresholds.inside;
    }
    report.verified.push_back(ok);
  }
  return report;
}

InductionReport verify_induction(const Model& model, const LabeledSplit& val, const BlindspotSet& blindspots,
                                 const InductionThresholds& thresholds, const RenderConfig& render_cfg) {
  return verify_induction(model.outputs(val.scenes, render_cfg), val, blindspots, thresholds);
}

}  // namespace spotcheck
