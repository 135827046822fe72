#include <cstdio>
#include <fstream>
#include <set>

#include "spotcheck/harness.hpp"

namespace spotcheck {

namespace fs = std::filesystem;

std::vector<SweepRow> sweep(const std::vector<ExperimentConfiguration>& tuning_suite,
                            const std::vector<BdmConfig>& grid,
                            const std::vector<ExperimentConfiguration>& evaluation_suite) {
  require(!tuning_suite.empty(), ErrorKind::InvalidArgument, "tuning suite is empty");
  require(!grid.empty(), ErrorKind::InvalidArgument, "sweep grid is empty");
  std::set<std::string> eval_ids;
  std::set<Seed> eval_seeds;
  for (const auto& ec : evaluation_suite) {
    eval_ids.insert(ec.id);
    eval_seeds.insert(ec.seeds.scenes);
  }
  for (const auto& ec : tuning_suite) {
    require(!eval_ids.contains(ec.id) && !eval_seeds.contains(ec.seeds.scenes), ErrorKind::InvalidArgument,
            "EC " + ec.id + " appears in both the tuning and the evaluation suite");
  }

  std::vector<SweepRow> rows;
  for (const auto& cfg : grid) {
    SweepRow row;
    row.config = cfg;
    double dr_sum = 0.0, fdr_sum = 0.0;
    for (const auto& ec : tuning_suite) {
      const auto record = run_ec(ec, cfg);
      dr_sum += record.report.discovery_rate;
      if (record.report.false_discovery) {
        fdr_sum += record.report.false_discovery->value;
        ++row.fdr_count;
      }
      ++row.ec_count;
    }
    row.mean_dr = dr_sum / static_cast<double>(row.ec_count);
    if (row.fdr_count > 0) row.mean_fdr = fdr_sum / static_cast<double>(row.fdr_count);
    rows.push_back(std::move(row));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
    if (a.mean_dr != b.mean_dr) return a.mean_dr > b.mean_dr;
    const double fa = a.mean_fdr.value_or(1.0), fb = b.mean_fdr.value_or(1.0);
    return fa < fb;
  });
  return rows;
}

RunRecord run_record_from_json(const Json& j) {
  RunRecord r;
  try {
    r.ec_id = j.at("ec_id").get<std::string>();
    r.bdm_name = j.at("bdm").get<std::string>();
    r.config_hash = j.at("config_hash").get<std::string>();
    r.truth_sizes = j.at("truth_sizes").get<std::vector<std::size_t>>();
    const auto& rep = j.at("report");
    r.report.hypothesis_count = rep.at("hypothesis_count").get<std::size_t>();
    r.report.blindspot_recall = rep.at("blindspot_recall").get<std::vector<double>>();
    r.report.covered = rep.at("covered").get<std::vector<bool>>();
    r.report.discovery_rate = rep.at("discovery_rate").get<double>();
    if (!rep.at("false_discovery_rate").is_null())
      r.report.false_discovery = FdrResult{rep.at("false_discovery_rate").get<double>(),
                                           rep.at("fdr_prefix").get<std::size_t>()};
    r.report.best_precision = rep.at("best_precision").get<std::vector<double>>();
    for (const auto& f : rep.at("failures")) {
      r.report.failures[f.at("truth").get<std::size_t>()] = {f.at("not_returned").get<double>(), f.at("found").get<double>(),
                                                             f.at("merged").get<double>(), f.at("impure").get<double>()};
    }
    for (const auto& b : j.at("blindspots")) {
      BlindspotRecord rec;
      rec.ec_id = r.ec_id;
      rec.blindspot_count = b.at("blindspot_count").get<int>();
      rec.triplet_count = b.at("triplet_count").get<int>();
      rec.has_relative_position = b.at("has_relative_position").get<bool>();
      rec.has_texture = b.at("has_texture").get<bool>();
      rec.has_circle = b.at("has_circle").get<bool>();
      rec.covered = b.at("covered").get<bool>();
      r.blindspot_records.push_back(rec);
    }
    if (j.contains("seconds")) r.seconds = j.at("seconds").get<double>();
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed run record: ") + e.what());
  }
  return r;
}

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string method_of(const RunRecord& r) { return r.bdm_name + "@" + r.config_hash.substr(0, 8); }

std::string grouped_rows(const std::string& method, const std::string& factor,
                         const std::map<std::string, Aggregate>& groups) {
  std::string out;
  for (const auto& [key, a] : groups) {
    out += method + "," + factor + "," + key + "," + fmt(a.mean) + "," + fmt(a.standard_error) + "," +
           fmt(a.ci_low) + "," + fmt(a.ci_high) + "," + std::to_string(a.count) + "\n";
  }
  return out;
}

}  // namespace

ReportTables report(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> by_method;
  for (const auto& r : records) by_method[method_of(r)].push_back(&r);

  ReportTables t;
  t.overall_csv = "method,dr,dr_se,fdr,fdr_se,ec_count,fdr_count\n";
  t.by_blindspot_count_csv = "method,blindspots,dr,dr_se,ci_low,ci_high,ec_count\n";
  t.by_triplet_count_csv = "method,factor,group,covered,se,ci_low,ci_high,count\n";
  t.by_feature_csv = t.by_triplet_count_csv;
  t.failures_csv = "method,not_returned,found,merged,impure,ec_count\n";

  for (const auto& [method, runs] : by_method) {
    std::vector<double> drs, fdrs;
    std::map<int, std::vector<double>> dr_by_count;
    std::vector<BlindspotRecord> blindspots;
    FailureBreakdown failure_sum;
    std::size_t uncovered = 0;
    for (const RunRecord* r : runs) {
      drs.push_back(r->report.discovery_rate);
      if (r->report.false_discovery) fdrs.push_back(r->report.false_discovery->value);
      const int m = static_cast<int>(r->truth_sizes.size());
      dr_by_count[m].push_back(r->report.discovery_rate);
      blindspots.insert(blindspots.end(), r->blindspot_records.begin(), r->blindspot_records.end());
      // Averaged over the EC's uncovered truths first, then over ECs.
      if (!r->report.failures.empty()) {
        const double k = static_cast<double>(r->report.failures.size());
        for (const auto& [truth, f] : r->report.failures) {
          failure_sum.not_returned += f.not_returned / k;
          failure_sum.found += f.found / k;
          failure_sum.merged += f.merged / k;
          failure_sum.impure += f.impure / k;
        }
        ++uncovered;
      }
    }
    const auto dr = aggregate(drs);
    const auto fdr = fdrs.empty() ? Aggregate{} : aggregate(fdrs);
    t.overall_csv += method + "," + fmt(dr.mean) + "," + fmt(dr.standard_error) + "," +
                     (fdrs.empty() ? "," : fmt(fdr.mean) + "," + fmt(fdr.standard_error)) + "," +
                     std::to_string(drs.size()) + "," + std::to_string(fdrs.size()) + "\n";
    for (const auto& [m, values] : dr_by_count) {
      const auto a = aggregate(values);
      t.by_blindspot_count_csv += method + "," + std::to_string(m) + "," + fmt(a.mean) + "," +
                                  fmt(a.standard_error) + "," + fmt(a.ci_low) + "," + fmt(a.ci_high) + "," +
                                  std::to_string(a.count) + "\n";
    }
    t.by_triplet_count_csv += grouped_rows(method, "triplets", factor_grouping(blindspots, [](const BlindspotRecord& b) -> GroupKey {
      return std::to_string(b.triplet_count);
    }));
    auto flag = [](bool v) -> GroupKey { return v ? "yes" : "no"; };
    t.by_feature_csv += grouped_rows(method, "relative_position", factor_grouping(blindspots, [&](const BlindspotRecord& b) {
      return flag(b.has_relative_position);
    }));
    t.by_feature_csv += grouped_rows(method, "texture", factor_grouping(blindspots, [&](const BlindspotRecord& b) {
      return flag(b.has_texture);
    }));
    t.by_feature_csv += grouped_rows(method, "circle", factor_grouping(blindspots, [&](const BlindspotRecord& b) {
      return flag(b.has_circle);
    }));
    if (uncovered > 0) {
      const double n = static_cast<double>(uncovered);
      t.failures_csv += method + "," + fmt(failure_sum.not_returned / n) + "," + fmt(failure_sum.found / n) + "," +
                        fmt(failure_sum.merged / n) + "," + fmt(failure_sum.impure / n) + "," +
                        std::to_string(uncovered) + "\n";
    }
  }
  return t;
}

void write_report(const ReportTables& tables, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  const std::pair<const char*, const std::string*> files[] = {
      {"overall.csv", &tables.overall_csv},
      {"by_blindspot_count.csv", &tables.by_blindspot_count_csv},
      {"by_triplet_count.csv", &tables.by_triplet_count_csv},
      {"by_feature.csv", &tables.by_feature_csv},
      {"failures.csv", &tables.failures_csv},
  };
  for (const auto& [name, text] : files) {
    std::ofstream out(out_dir / name);
    if (!out) fail(ErrorKind::IoError, "cannot write " + (out_dir / name).string());
    out << *text;
  }
}

}  // namespace spotcheck
