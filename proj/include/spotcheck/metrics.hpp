#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "spotcheck/common.hpp"

namespace spotcheck {

/// One hypothesized blindspot as returned by a discovery method.
struct Hypothesis {
  double importance = 0.0;
  ImageSet image_ids;
};

/// Ordered by non-increasing importance (rank = index + 1).
using HypothesisList = std::vector<Hypothesis>;

HypothesisList truncate(const HypothesisList& hyps, std::size_t k);

struct MetricThresholds {
  double lambda_p = 0.8;
  double lambda_r = 0.8;

  static MetricThresholds synthetic() { return {0.8, 0.8}; }
  static MetricThresholds real_data() { return {0.5, 0.5}; }
};

void validate(const MetricThresholds& t);

/// Blindspot precision |hyp ∩ truth| / |hyp|.
double bp(std::span<const ImageId> hyp, std::span<const ImageId> truth);

/// Blindspot recall of the union of hypotheses that belong to `truth`.
double br(const HypothesisList& hyps, std::span<const ImageId> truth, double lambda_p);

double dr(const HypothesisList& hyps, const std::vector<ImageSet>& truths, MetricThresholds t);

struct FdrResult {
  double value = 0.0;
  std::size_t prefix = 0;  // u
};

/// Absent when the discovery rate is zero.
std::optional<FdrResult> fdr(const HypothesisList& hyps, const std::vector<ImageSet>& truths,
                             MetricThresholds t);

struct FailureBreakdown {
  double not_returned = 0.0;
  double found = 0.0;
  double merged = 0.0;
  double impure = 0.0;
};

/// Per truth index, for uncovered truths only (BR < lambda_r).
std::map<std::size_t, FailureBreakdown> failure_breakdown(const HypothesisList& hyps,
                                                          const std::vector<ImageSet>& truths,
                                                          MetricThresholds t);

/// Per-image categorisation of one truth, first match wins.
FailureBreakdown categorize_failures(const HypothesisList& hyps, std::span<const ImageId> truth,
                                     std::span<const ImageId> truth_union, double lambda_p);

struct Aggregate {
  double mean = 0.0;
  double standard_error = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t count = 0;
};

enum class IntervalKind { StandardError, StandardDeviation };

/// Mean with sample standard error; CI = mean ± 1.96 × (SE or SD).
Aggregate aggregate(std::span<const double> values,
                    IntervalKind interval = IntervalKind::StandardError);

struct MetricReport {
  std::vector<double> blindspot_recall;      // per truth
  std::vector<bool> covered;                 // per truth
  double discovery_rate = 0.0;
  std::optional<FdrResult> false_discovery;  // absent when DR = 0
  std::vector<double> best_precision;        // per hypothesis, max over truths
  std::map<std::size_t, FailureBreakdown> failures;
  std::size_t hypothesis_count = 0;
};

MetricReport evaluate(const HypothesisList& hyps, const std::vector<ImageSet>& truths,
                      MetricThresholds t);

/// A single true blindspot's outcome, with the factors used for grouping.
struct BlindspotRecord {
  std::string ec_id;
  int blindspot_count = 0;  // blindspots in the EC
  int triplet_count = 0;
  bool has_relative_position = false;
  bool has_texture = false;
  bool has_circle = false;
  bool covered = false;
};

using GroupKey = std::optional<std::string>;

/// Groups with no members are absent from the result.
std::map<std::string, Aggregate> factor_grouping(
    const std::vector<BlindspotRecord>& records,
    const std::function<GroupKey(const BlindspotRecord&)>& predicate);

}  // namespace spotcheck
