#include "spotcheck/metrics.hpp"

#include <cmath>
#include <numeric>

namespace spotcheck {

HypothesisList truncate(const HypothesisList& hyps, std::size_t k) {
  return HypothesisList(hyps.begin(), hyps.begin() + static_cast<std::ptrdiff_t>(std::min(k, hyps.size())));
}

void validate(const MetricThresholds& t) {
  require(t.lambda_p > 0.0 && t.lambda_p <= 1.0 && t.lambda_r > 0.0 && t.lambda_r <= 1.0,
          ErrorKind::InvalidArgument, "metric thresholds must lie in (0,1]");
}

double bp(std::span<const ImageId> hyp, std::span<const ImageId> truth) {
  require(!hyp.empty(), ErrorKind::EmptyHypothesis, "precision of an empty hypothesis");
  return static_cast<double>(intersection_size(hyp, truth)) / static_cast<double>(hyp.size());
}

double br(const HypothesisList& hyps, std::span<const ImageId> truth, double lambda_p) {
  require(!truth.empty(), ErrorKind::EmptyTruth, "recall against an empty true blindspot");
  ImageSet covered;
  for (const auto& h : hyps) {
    if (h.image_ids.empty() || bp(h.image_ids, truth) < lambda_p) continue;
    covered = set_union(covered, set_intersection(h.image_ids, truth));
  }
  return static_cast<double>(covered.size()) / static_cast<double>(truth.size());
}

double dr(const HypothesisList& hyps, const std::vector<ImageSet>& truths, MetricThresholds t) {
  if (truths.empty()) return 0.0;
  std::size_t covered = 0;
  for (const auto& truth : truths) {
    if (br(hyps, truth, t.lambda_p) >= t.lambda_r) ++covered;
  }
  return static_cast<double>(covered) / static_cast<double>(truths.size());
}

namespace {

double best_precision(const Hypothesis& h, const std::vector<ImageSet>& truths) {
  double best = 0.0;
  for (const auto& truth : truths) best = std::max(best, bp(h.image_ids, truth));
  return best;
}

}  // namespace

std::optional<FdrResult> fdr(const HypothesisList& hyps, const std::vector<ImageSet>& truths,
                             MetricThresholds t) {
  const double full = dr(hyps, truths, t);
  if (full == 0.0) return std::nullopt;
  // DR is monotone in the prefix, so the first prefix reaching the full value is minimal.
  std::size_t u = hyps.size();
  for (std::size_t k = 1; k <= hyps.size(); ++k) {
    if (dr(truncate(hyps, k), truths, t) == full) {
      u = k;
      break;
    }
  }
  std::size_t false_hits = 0;
  for (std::size_t k = 0; k < u; ++k) {
    if (best_precision(hyps[k], truths) < t.lambda_p) ++false_hits;
  }
  return FdrResult{static_cast<double>(false_hits) / static_cast<double>(u), u};
}

FailureBreakdown categorize_failures(const HypothesisList& hyps, std::span<const ImageId> truth,
                                     std::span<const ImageId> truth_union, double lambda_p) {
  require(!truth.empty(), ErrorKind::EmptyTruth, "failure breakdown of an empty true blindspot");
  std::vector<double> precision_truth, precision_union;
  for (const auto& h : hyps) {
    precision_truth.push_back(bp(h.image_ids, truth));
    precision_union.push_back(bp(h.image_ids, truth_union));
  }
  std::size_t not_returned = 0, found = 0, merged = 0, impure = 0;
  for (ImageId id : truth) {
    bool returned = false, is_found = false, is_merged = false;
    for (std::size_t k = 0; k < hyps.size(); ++k) {
      if (!contains(hyps[k].image_ids, id)) continue;
      returned = true;
      is_found = is_found || precision_truth[k] >= lambda_p;
      is_merged = is_merged || precision_union[k] >= lambda_p;
    }
    if (!returned) {
      ++not_returned;
    } else if (is_found) {
      ++found;
    } else if (is_merged) {
      ++merged;
    } else {
      ++impure;
    }
  }
  const auto n = static_cast<double>(truth.size());
  return {not_returned / n, found / n, merged / n, impure / n};
}

std::map<std::size_t, FailureBreakdown> failure_breakdown(const HypothesisList& hyps,
                                                          const std::vector<ImageSet>& truths,
                                                          MetricThresholds t) {
  ImageSet all;
  for (const auto& truth : truths) all = set_union(all, truth);
  std::map<std::size_t, FailureBreakdown> out;
  for (std::size_t m = 0; m < truths.size(); ++m) {
    if (br(hyps, truths[m], t.lambda_p) >= t.lambda_r) continue;
    out[m] = categorize_failures(hyps, truths[m], all, t.lambda_p);
  }
  return out;
}

Aggregate aggregate(std::span<const double> values, IntervalKind interval) {
  require(!values.empty(), ErrorKind::InvalidArgument, "aggregate of no values");
  Aggregate a;
  a.count = values.size();
  const auto n = static_cast<double>(values.size());
  a.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double sd = 0.0;
  if (values.size() > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - a.mean) * (v - a.mean);
    sd = std::sqrt(ss / (n - 1.0));
  }
  a.standard_error = sd / std::sqrt(n);
  const double half = 1.96 * (interval == IntervalKind::StandardError ? a.standard_error : sd);
  a.ci_low = a.mean - half;
  a.ci_high = a.mean + half;
  return a;
}

MetricReport evaluate(const HypothesisList& hyps, const std::vector<ImageSet>& truths,
                      MetricThresholds t) {
  validate(t);
  MetricReport report;
  report.hypothesis_count = hyps.size();
  for (const auto& truth : truths) {
    const double recall = br(hyps, truth, t.lambda_p);
    report.blindspot_recall.push_back(recall);
    report.covered.push_back(recall >= t.lambda_r);
  }
  report.discovery_rate = dr(hyps, truths, t);
  report.false_discovery = fdr(hyps, truths, t);
  for (const auto& h : hyps) report.best_precision.push_back(best_precision(h, truths));
  report.failures = failure_breakdown(hyps, truths, t);
  return report;
}

std::map<std::string, Aggregate> factor_grouping(
    const std::vector<BlindspotRecord>& records,
    const std::function<GroupKey(const BlindspotRecord&)>& predicate) {
  std::map<std::string, std::vector<double>> groups;
  for (const auto& r : records) {
    if (auto key = predicate(r)) groups[*key].push_back(r.covered ? 1.0 : 0.0);
  }
  std::map<std::string, Aggregate> out;
  for (const auto& [key, values] : groups) out[key] = aggregate(values);
  return out;
}

}  // namespace spotcheck
