#pragma once

#include <memory>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spotcheck/blindspots.hpp"
#include "spotcheck/convnet.hpp"
#include "spotcheck/scenegen.hpp"

namespace spotcheck {

/// Per-image representation and positive-class confidence: the interchange unit
/// between models and discovery methods.
struct ModelOutputs {
  std::vector<ImageId> image_ids;
  Eigen::MatrixXd representations;  // n x d
  Eigen::VectorXd confidences;      // n, in [0,1]
};

void validate(const ModelOutputs& outputs);

/// Rows whose image id is in `ids` (sorted), keeping the original row order.
ModelOutputs select_rows(const ModelOutputs& outputs, std::span<const ImageId> ids);

/// CSV with header `image_id,confidence,r0,...,r{d-1}`.
void write_outputs_csv(const ModelOutputs& outputs, const std::string& path);
ModelOutputs read_outputs_csv(const std::string& path);

enum class SplitTag { Train, Val, Test };
const char* to_string(SplitTag tag);

struct LabeledSplit {
  SplitTag tag = SplitTag::Train;
  std::vector<SceneDescription> scenes;
  std::vector<bool> clean_labels;
  std::vector<bool> training_labels;
};

/// Train/val labels are flipped inside any blindspot; test labels stay clean.
/// `scenes` supplies the clean labels via `label_of`.
LabeledSplit induce_labels(std::vector<SceneDescription> scenes, const BlindspotSet& blindspots,
                           SplitTag tag);

/// Flips the training labels of an existing split (clean labels untouched).
LabeledSplit induce_labels(const LabeledSplit& split, const BlindspotSet& blindspots);

class Model {
 public:
  virtual ~Model() = default;
  virtual ModelOutputs outputs(const std::vector<SceneDescription>& scenes,
                               const RenderConfig& render_cfg) const = 0;
  virtual int representation_dim() const = 0;
  virtual std::string kind() const = 0;
};

struct OracleConfig {
  double epsilon = 0.0;
  double jitter = 0.05;
  double confidence_noise = 0.0;
};

/// Representations built from the triplet list (one ±1 coordinate per rollable
/// key, plus the meta-attribute) with Gaussian jitter; confidence 1-ε outside all
/// blindspots and ε inside, mirrored for negatives.
class OracleModel final : public Model {
 public:
  OracleModel(BlindspotSet blindspots, OracleConfig cfg, Seed seed);

  ModelOutputs outputs(const std::vector<SceneDescription>& scenes,
                       const RenderConfig& render_cfg) const override;
  int representation_dim() const override;
  std::string kind() const override { return "oracle"; }

 private:
  BlindspotSet blindspots_;
  OracleConfig cfg_;
  Seed seed_;
};

OracleModel oracle_model(const BlindspotSet& blindspots, const OracleConfig& cfg, Seed seed);

struct TrainConfig {
  int resolution = 64;
  // Max pooling and a hidden layer: the average-pooled linear head rarely memorized the flipped regions.
  ConvArchitecture architecture{{16, 32, 64}, {32}, GlobalPooling::Max, false};
  double learning_rate = 0.01;
  double momentum = 0.9;
  int batch_size = 64;
  int epochs = 20;
};

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

class TrainedModel final : public Model {
 public:
  TrainedModel(ConvNet<float> net, RenderConfig render_cfg);

  ModelOutputs outputs(const std::vector<SceneDescription>& scenes,
                       const RenderConfig& render_cfg) const override;
  int representation_dim() const override { return net_.feature_dim(); }
  std::string kind() const override { return "trained"; }

  const ConvNet<float>& net() const { return net_; }

  std::vector<EpochStats> history;
  int selected_epoch = 0;

 private:
  ConvNet<float> net_;
  RenderConfig render_cfg_;
};

/// Mini-batch SGD with momentum on binary cross-entropy; the epoch with the
/// lowest validation loss is kept.
TrainedModel train_classifier(const LabeledSplit& train, const LabeledSplit& val,
                              const TrainConfig& cfg, Seed seed);

struct InductionThresholds {
  double outside = 0.97;
  double inside = 0.05;
  double recall_gap = 0.20;
  bool real_data = false;
};

struct InductionReport {
  double accuracy_outside = 0.0;
  std::vector<double> accuracy_inside;  // per blindspot
  double recall_outside = 0.0;          // positives only
  std::vector<double> recall_inside;
  std::vector<std::size_t> inside_count;
  std::vector<bool> verified;
};

InductionReport verify_induction(const ModelOutputs& val_outputs, const LabeledSplit& val,
                                 const BlindspotSet& blindspots, const InductionThresholds& thresholds);

InductionReport verify_induction(const Model& model, const LabeledSplit& val,
                                 const BlindspotSet& blindspots, const InductionThresholds& thresholds,
                                 const RenderConfig& render_cfg);

}  // namespace spotcheck
