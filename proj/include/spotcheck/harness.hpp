#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "spotcheck/cluster.hpp"
#include "spotcheck/metrics.hpp"
#include "spotcheck/models.hpp"
#include "spotcheck/serialization.hpp"

namespace spotcheck {

enum class ModelKind { Trained, Oracle };

struct SplitSizes {
  int train = 4000;
  int val = 1000;
  int test = 2000;
};

struct EcSeeds {
  Seed dataset = 0;
  Seed blindspots = 0;
  Seed scenes = 0;
  Seed training = 0;
  Seed oracle = 0;
  Seed bdm = 0;
};

/// One evaluation unit: dataset, blindspots and the model to be built on them.
struct ExperimentConfiguration {
  std::string id;
  BlindspotSet blindspots;  // carries the DatasetSpec
  SplitSizes splits;
  EcSeeds seeds;
  ModelKind model_kind = ModelKind::Oracle;
  OracleConfig oracle;
  int resolution = 64;
  std::vector<bool> verified;  // per blindspot; empty until induction is checked

  const DatasetSpec& dataset() const { return blindspots.dataset; }
  bool is_verified() const;
};

struct SuiteOptions {
  int count = 100;
  int blindspots_min = 1;
  int blindspots_max = 3;
  BlindspotSizeRange triplets{5, 7};
  SplitSizes splits;
  ModelKind model_kind = ModelKind::Oracle;
  OracleConfig oracle;
  int resolution = 64;
  Seed master_seed = 0;
  std::string id_prefix = "ec";
  bool write_images = true;
};

void validate(const SuiteOptions& options);

/// EC number `index` of a suite. Factors are drawn independently per EC; a dataset
/// that cannot host the blindspot count is re-sampled.
ExperimentConfiguration make_ec(const SuiteOptions& options, int index);

/// Generates the suite and, when `out_dir` is given, writes one bundle per EC.
std::vector<ExperimentConfiguration> generate_ec_suite(const SuiteOptions& options,
                                                       const std::optional<std::filesystem::path>& out_dir);

/// Image-id range of a split: train, then val, then test.
std::pair<ImageId, ImageId> split_range(const SplitSizes& sizes, SplitTag tag);

std::vector<SceneDescription> ec_scenes(const ExperimentConfiguration& ec, SplitTag tag);
LabeledSplit ec_split(const ExperimentConfiguration& ec, SplitTag tag);

/// Per blindspot, the ids of matching scenes of the split (positives only when requested).
std::vector<ImageSet> truth_sets(const ExperimentConfiguration& ec, const std::vector<SceneDescription>& scenes,
                                 bool positives_only = true);

Json to_json(const ExperimentConfiguration& ec);
ExperimentConfiguration ec_from_json(const Json& j);

/// Checks dataset, blindspot and pairwise constraints; throws InvalidArgument.
void validate(const ExperimentConfiguration& ec);

void write_ec_bundle(const ExperimentConfiguration& ec, const std::filesystem::path& dir, bool write_images);
ExperimentConfiguration load_ec(const std::filesystem::path& dir);

/// Model outputs and verified flags for an EC.
struct BuiltModel {
  std::unique_ptr<Model> model;
  InductionReport induction;
};

BuiltModel build_oracle(const ExperimentConfiguration& ec, const InductionThresholds& thresholds = {});

struct TrainOutcome {
  TrainedModel model;
  InductionReport induction;
};

/// `run_seed` 0 trains from the EC's recorded training seed.
TrainOutcome train_ec_model(const ExperimentConfiguration& ec, const TrainConfig& cfg,
                            const InductionThresholds& thresholds = {}, Seed run_seed = 0);

Json to_json(const ConvNet<float>& net);
ConvNet<float> convnet_from_json(const Json& j);

struct BdmConfig {
  std::string name = "planespot";
  PlaneSpotConfig planespot;
  MetricThresholds thresholds = MetricThresholds::synthetic();
  std::size_t top_k = 10;
  std::optional<std::string> import_path;  // external hypothesis JSON
  bool require_verified = true;
  Seed run_seed = 0;  // 0: the EC's own discovery seed
};

/// Discovery seed of an EC under `cfg`.
Seed bdm_seed(const ExperimentConfiguration& ec, const BdmConfig& cfg);

std::string config_hash(const BdmConfig& cfg);

struct RunRecord {
  std::string ec_id;
  std::string bdm_name;
  std::string config_hash;
  HypothesisList hypotheses;  // untruncated
  MetricReport report;        // scored on the top_k prefix
  std::vector<BlindspotRecord> blindspot_records;
  std::vector<std::size_t> truth_sizes;
  std::optional<Embedding2D> embedding;
  ModelOutputs outputs;
  double seconds = 0.0;
};

/// Positive test images of the EC, through `model`.
ModelOutputs ec_test_outputs(const ExperimentConfiguration& ec, const Model& model);

/// Hypotheses for an EC: PlaneSpot on the model outputs, or the imported list
/// (validated against the known image ids).
struct Discovery {
  HypothesisList hypotheses;
  std::optional<Embedding2D> embedding;
};
Discovery discover(const ExperimentConfiguration& ec, const ModelOutputs& outputs, const BdmConfig& cfg);

/// Scores hypotheses against the EC's positive-test ground truth.
RunRecord score(const ExperimentConfiguration& ec, const BdmConfig& cfg, HypothesisList hypotheses,
                const std::vector<SceneDescription>& test_scenes);

RunRecord run_ec(const ExperimentConfiguration& ec, const Model& model, const BdmConfig& cfg);

/// Oracle ECs build their model on the fly.
RunRecord run_ec(const ExperimentConfiguration& ec, const BdmConfig& cfg);

Json to_json(const RunRecord& record, bool include_timing = true);

/// Summary fields only: no hypotheses, outputs or embedding.
RunRecord run_record_from_json(const Json& j);

/// A fresh runs/<name>-<hash>[-n]/ directory under the EC bundle; existing runs are never reused.
std::filesystem::path create_run_dir(const std::filesystem::path& ec_dir, const std::string& name,
                                     const std::string& hash);

/// hypotheses.json and, when an embedding is present, scatter.csv.
void write_discovery(const std::filesystem::path& run_dir, const HypothesisList& hypotheses,
                     const ModelOutputs& outputs, const std::optional<Embedding2D>& embedding);

/// report.json and record.json, plus a line in the suite's results.jsonl.
void write_scored(const RunRecord& record, const std::filesystem::path& run_dir,
                  const std::optional<std::filesystem::path>& suite_dir);

/// All of the above in one step.
std::filesystem::path persist_run(const RunRecord& record, const std::filesystem::path& ec_dir,
                                  const std::optional<std::filesystem::path>& suite_dir);

struct SweepRow {
  BdmConfig config;
  double mean_dr = 0.0;
  std::optional<double> mean_fdr;
  std::size_t ec_count = 0;
  std::size_t fdr_count = 0;
};

/// Evaluates every grid point on the tuning suite; rows are sorted best first
/// (highest DR, then lowest FDR).
std::vector<SweepRow> sweep(const std::vector<ExperimentConfiguration>& tuning_suite,
                            const std::vector<BdmConfig>& grid,
                            const std::vector<ExperimentConfiguration>& evaluation_suite = {});

struct ReportTables {
  std::string overall_csv;           // method, DR, SE, FDR, SE
  std::string by_blindspot_count_csv;
  std::string by_triplet_count_csv;
  std::string by_feature_csv;
  std::string failures_csv;          // method, not_returned, found, merged, impure
};

ReportTables report(const std::vector<RunRecord>& records);
void write_report(const ReportTables& tables, const std::filesystem::path& out_dir);

/// Rebuilds the per-blindspot records of a run from its EC.
std::vector<BlindspotRecord> blindspot_records(const ExperimentConfiguration& ec, const MetricReport& report,
                                               const std::vector<std::size_t>& kept_truths);

/// Scatter rows `image_id,x,y,confidence`.
std::string scatter_csv(const ModelOutputs& outputs, const Embedding2D& embedding);

}  // namespace spotcheck
