#include "spotcheck/spotcheck.h"

#include <chrono>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "spotcheck/config.hpp"
#include "spotcheck/harness.hpp"

using namespace spotcheck;
namespace fs = std::filesystem;

struct sc_suite {
  fs::path dir;
  std::vector<ExperimentConfiguration> ecs;
};

struct sc_outputs {
  ModelOutputs value;
};

struct sc_hypotheses {
  HypothesisList value;
};

namespace {

thread_local std::string g_error;

template <class F>
sc_status guarded(F&& f) {
  try {
    f();
    g_error.clear();
    return SC_OK;
  } catch (const Error& e) {
    g_error = e.what();
    if (e.kind() == ErrorKind::IoError) return SC_ERR_IO;
    return is_numerical(e.kind()) ? SC_ERR_NUMERICAL : SC_ERR_VALIDATION;
  } catch (const Json::exception& e) {
    g_error = std::string("JSON: ") + e.what();
    return SC_ERR_VALIDATION;
  } catch (const fs::filesystem_error& e) {
    g_error = e.what();
    return SC_ERR_IO;
  } catch (const std::exception& e) {
    g_error = e.what();
    return SC_ERR_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void set_out(char** out, const Json& j) {
  if (out) *out = dup(j.dump(2));
}

Json parse_config(const char* json) {
  if (!json || !*json) return Json::object();
  try {
    return Json::parse(json);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::InvalidArgument, std::string("configuration: ") + e.what());
  }
}

void require_arg(const void* p, const char* name) {
  require(p != nullptr, ErrorKind::InvalidArgument, std::string(name) + " must not be null");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void write_status(const fs::path& ec_dir, const InductionReport& r) {
  Json j;
  j["verified"] = r.verified;
  j["accuracy_outside"] = r.accuracy_outside;
  j["accuracy_inside"] = r.accuracy_inside;
  j["recall_outside"] = r.recall_outside;
  j["recall_inside"] = r.recall_inside;
  j["inside_count"] = r.inside_count;
  write_json_file(j, (ec_dir / "status.json").string());
}

Json induction_summary(const ExperimentConfiguration& ec, const InductionReport& r, double seconds) {
  return {{"ec_id", ec.id}, {"verified", r.verified}, {"accuracy_outside", r.accuracy_outside},
          {"accuracy_inside", r.accuracy_inside}, {"seconds", seconds}};
}

std::unique_ptr<Model> load_model(const ExperimentConfiguration& ec, const fs::path& ec_dir) {
  if (ec.model_kind == ModelKind::Oracle) return std::make_unique<OracleModel>(ec.blindspots, ec.oracle, ec.seeds.oracle);
  const fs::path weights = ec_dir / "model" / "weights.json";
  require(fs::exists(weights), ErrorKind::InvalidArgument, "EC " + ec.id + " has no trained model; run train first");
  const auto j = read_json_file(weights.string());
  return std::make_unique<TrainedModel>(convnet_from_json(j.at("network")), RenderConfig::for_resolution(ec.resolution));
}

std::vector<fs::path> run_dirs(const fs::path& ec_dir) {
  std::vector<fs::path> out;
  if (!fs::exists(ec_dir / "runs")) return out;
  for (const auto& e : fs::directory_iterator(ec_dir / "runs")) {
    if (e.is_directory()) out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

extern "C" {

const char* sc_last_error(void) { return g_error.c_str(); }

void sc_string_free(char* s) { std::free(s); }

sc_status sc_config_load(const char* path, char** json_out) {
  return guarded([&] {
    require_arg(path, "path");
    set_out(json_out, load_config_file(path));
  });
}

sc_status sc_suite_generate(const char* config_json, uint64_t seed, const char* out_dir, sc_suite** out) {
  return guarded([&] {
    require_arg(out_dir, "out_dir");
    require_arg(out, "out");
    const Json cfg = parse_config(config_json);
    const auto options = suite_options_from_json(cfg, seed);
    auto suite = std::make_unique<sc_suite>();
    suite->dir = out_dir;
    suite->ecs = generate_ec_suite(options, suite->dir);
    write_json_file(cfg, (suite->dir / "config.json").string());
    *out = suite.release();
  });
}

sc_status sc_suite_open(const char* dir, sc_suite** out) {
  return guarded([&] {
    require_arg(dir, "dir");
    require_arg(out, "out");
    auto suite = std::make_unique<sc_suite>();
    suite->dir = dir;
    const auto index = read_json_file((suite->dir / "suite.json").string());
    for (const auto& id : index.at("ecs")) suite->ecs.push_back(load_ec(suite->dir / id.get<std::string>()));
    *out = suite.release();
  });
}

size_t sc_suite_size(const sc_suite* suite) { return suite ? suite->ecs.size() : 0; }

const char* sc_suite_ec_id(const sc_suite* suite, size_t index) {
  if (!suite || index >= suite->ecs.size()) return nullptr;
  return suite->ecs[index].id.c_str();
}

void sc_suite_free(sc_suite* suite) { delete suite; }

sc_status sc_suite_train(sc_suite* suite, const char* config_json, uint64_t seed, char** summary_json) {
  return guarded([&] {
    require_arg(suite, "suite");
    const Json cfg = parse_config(config_json);
    const auto train_cfg = train_config_from_json(cfg);
    const auto thresholds = induction_thresholds_from_json(cfg);
    Json summary = Json::array();
    for (auto& ec : suite->ecs) {
      const auto start = std::chrono::steady_clock::now();
      const fs::path ec_dir = suite->dir / ec.id;
      InductionReport induction;
      if (ec.model_kind == ModelKind::Oracle) {
        induction = build_oracle(ec, thresholds).induction;
      } else {
        auto outcome = train_ec_model(ec, train_cfg, thresholds, seed);
        Json weights;
        weights["network"] = to_json(outcome.model.net());
        weights["selected_epoch"] = outcome.model.selected_epoch;
        Json history = Json::array();
        for (const auto& h : outcome.model.history)
          history.push_back({{"train_loss", h.train_loss}, {"val_loss", h.val_loss}, {"val_accuracy", h.val_accuracy}});
        weights["history"] = history;
        weights["run_seed"] = seed;
        fs::create_directories(ec_dir / "model");
        write_json_file(weights, (ec_dir / "model" / "weights.json").string());
        induction = std::move(outcome.induction);
      }
      ec.verified = induction.verified;
      write_status(ec_dir, induction);
      summary.push_back(induction_summary(ec, induction, seconds_since(start)));
    }
    set_out(summary_json, summary);
  });
}

sc_status sc_suite_discover(sc_suite* suite, const char* config_json, uint64_t seed, const char* import_path,
                            const char* ec_id, char** summary_json) {
  return guarded([&] {
    require_arg(suite, "suite");
    const Json cfg = parse_config(config_json);
    BdmConfig bdm = bdm_config_from_json(cfg);
    bdm.run_seed = seed;
    if (import_path) {
      bdm.import_path = import_path;
      if (bdm.name == BdmConfig{}.name) bdm.name = "imported";
    }
    const std::string hash = config_hash(bdm);
    bool matched = ec_id == nullptr;
    Json summary = Json::array();
    for (auto& ec : suite->ecs) {
      if (ec_id && ec.id != ec_id) continue;
      matched = true;
      Json entry{{"ec_id", ec.id}};
      if (bdm.require_verified && !ec.is_verified()) {
        if (ec.model_kind == ModelKind::Oracle && ec.verified.empty()) {
          ec.verified = build_oracle(ec).induction.verified;
        }
        if (!ec.is_verified()) {
          entry["skipped"] = "unverified";
          summary.push_back(entry);
          continue;
        }
      }
      BdmConfig per_ec = bdm;
      if (import_path) {
        const fs::path base(import_path);
        const fs::path file = fs::is_directory(base) ? base / (ec.id + ".json") : base;
        if (!fs::exists(file)) {
          entry["skipped"] = "no imported hypotheses";
          summary.push_back(entry);
          continue;
        }
        per_ec.import_path = file.string();
      }
      const auto start = std::chrono::steady_clock::now();
      const fs::path ec_dir = suite->dir / ec.id;
      const auto model = load_model(ec, ec_dir);
      const auto outputs = ec_test_outputs(ec, *model);
      const auto found = discover(ec, outputs, per_ec);
      const fs::path run = create_run_dir(ec_dir, bdm.name, hash);
      write_discovery(run, found.hypotheses, outputs, found.embedding);
      write_outputs_csv(outputs, (run / "outputs.csv").string());
      Json meta;
      meta["config"] = to_json(bdm);
      meta["config_hash"] = hash;
      meta["seed"] = bdm_seed(ec, bdm);
      write_json_file(meta, (run / "bdm.json").string());
      entry["run_dir"] = fs::relative(run, suite->dir).string();
      entry["hypotheses"] = found.hypotheses.size();
      entry["seconds"] = seconds_since(start);
      summary.push_back(entry);
    }
    require(matched, ErrorKind::InvalidArgument, std::string("no EC with id '") + (ec_id ? ec_id : "") + "'");
    set_out(summary_json, summary);
  });
}

sc_status sc_suite_eval(sc_suite* suite, char** summary_json) {
  return guarded([&] {
    require_arg(suite, "suite");
    Json summary = Json::array();
    for (const auto& ec : suite->ecs) {
      const fs::path ec_dir = suite->dir / ec.id;
      std::optional<std::vector<SceneDescription>> test_scenes;
      for (const auto& run : run_dirs(ec_dir)) {
        if (!fs::exists(run / "hypotheses.json") || fs::exists(run / "report.json")) continue;
        if (!test_scenes) test_scenes = ec_scenes(ec, SplitTag::Test);
        const auto meta = read_json_file((run / "bdm.json").string());
        const BdmConfig bdm = bdm_config_from_json(meta.at("config"));
        auto hyps = hypotheses_from_json(read_json_file((run / "hypotheses.json").string()));
        RunRecord record = score(ec, bdm, std::move(hyps), *test_scenes);
        require(record.config_hash == meta.at("config_hash").get<std::string>(), ErrorKind::InvalidArgument,
                "configuration hash mismatch in " + run.string());
        write_scored(record, run, suite->dir);
        Json entry{{"ec_id", ec.id}, {"run_dir", fs::relative(run, suite->dir).string()},
                   {"discovery_rate", record.report.discovery_rate}};
        entry["false_discovery_rate"] =
            record.report.false_discovery ? Json(record.report.false_discovery->value) : Json(nullptr);
        summary.push_back(entry);
      }
    }
    set_out(summary_json, summary);
  });
}

sc_status sc_suite_sweep(const sc_suite* tuning, const sc_suite* evaluation, const char* config_json, uint64_t seed,
                         const char* out_dir, char** table_json) {
  return guarded([&] {
    require_arg(tuning, "tuning");
    const Json cfg = parse_config(config_json);
    auto grid = sweep_grid_from_json(cfg);
    for (auto& g : grid) g.run_seed = seed;
    const auto rows = sweep(tuning->ecs, grid, evaluation ? evaluation->ecs : std::vector<ExperimentConfiguration>{});
    Json table = Json::array();
    std::ostringstream csv;
    csv << "rank,name,config_hash,mean_dr,mean_fdr,ec_count,fdr_count\n";
    csv.precision(6);
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto& row = rows[r];
      const std::string hash = config_hash(row.config);
      table.push_back({{"rank", r + 1}, {"name", row.config.name}, {"config_hash", hash}, {"mean_dr", row.mean_dr},
                       {"mean_fdr", row.mean_fdr ? Json(*row.mean_fdr) : Json(nullptr)},
                       {"ec_count", row.ec_count}, {"fdr_count", row.fdr_count}, {"config", to_json(row.config)}});
      csv << r + 1 << ",\"" << row.config.name << "\"," << hash << ',' << row.mean_dr << ',';
      if (row.mean_fdr) csv << *row.mean_fdr;
      csv << ',' << row.ec_count << ',' << row.fdr_count << '\n';
    }
    if (out_dir) {
      fs::create_directories(out_dir);
      std::ofstream out(fs::path(out_dir) / "sweep.csv");
      if (!out) fail(ErrorKind::IoError, std::string("cannot write sweep.csv in ") + out_dir);
      out << csv.str();
      write_json_file(table, (fs::path(out_dir) / "sweep.json").string());
    }
    set_out(table_json, table);
  });
}

sc_status sc_report(const char* const* suite_dirs, size_t count, const char* out_dir) {
  return guarded([&] {
    require_arg(out_dir, "out_dir");
    require(count > 0 && suite_dirs, ErrorKind::InvalidArgument, "at least one suite directory is required");
    // Re-runs append; the latest record per (EC, configuration) counts.
    std::map<std::pair<std::string, std::string>, RunRecord> latest;
    std::vector<std::pair<fs::path, std::string>> scatters;
    for (size_t i = 0; i < count; ++i) {
      const fs::path dir(suite_dirs[i]);
      std::ifstream in(dir / "results.jsonl");
      require(static_cast<bool>(in), ErrorKind::IoError, "no results.jsonl in " + dir.string());
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const auto j = Json::parse(line);
        auto record = run_record_from_json(j);
        const fs::path run = dir / j.at("run_dir").get<std::string>();
        if (fs::exists(run / "scatter.csv"))
          scatters.emplace_back(run / "scatter.csv", record.ec_id + "__" + run.filename().string() + ".csv");
        latest[{dir.string() + "/" + record.ec_id, record.config_hash}] = std::move(record);
      }
    }
    std::vector<RunRecord> records;
    for (auto& [key, r] : latest) records.push_back(std::move(r));
    write_report(report(records), out_dir);
    if (!scatters.empty()) {
      fs::create_directories(fs::path(out_dir) / "scatter");
      for (const auto& [src, name] : scatters)
        fs::copy_file(src, fs::path(out_dir) / "scatter" / name, fs::copy_options::overwrite_existing);
    }
  });
}

sc_status sc_outputs_read_csv(const char* path, sc_outputs** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new sc_outputs{read_outputs_csv(path)};
  });
}

size_t sc_outputs_count(const sc_outputs* outputs) { return outputs ? outputs->value.image_ids.size() : 0; }

void sc_outputs_free(sc_outputs* outputs) { delete outputs; }

sc_status sc_planespot(const sc_outputs* outputs, const char* config_json, uint64_t seed, sc_hypotheses** out) {
  return guarded([&] {
    require_arg(outputs, "outputs");
    require_arg(out, "out");
    const auto bdm = bdm_config_from_json(parse_config(config_json));
    *out = new sc_hypotheses{planespot(outputs->value, bdm.planespot, seed).all};
  });
}

sc_status sc_hypotheses_read_json(const char* path, sc_hypotheses** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new sc_hypotheses{hypotheses_from_json(read_json_file(path))};
  });
}

sc_status sc_hypotheses_to_json(const sc_hypotheses* hyps, char** json_out) {
  return guarded([&] {
    require_arg(hyps, "hyps");
    set_out(json_out, to_json(hyps->value));
  });
}

size_t sc_hypotheses_count(const sc_hypotheses* hyps) { return hyps ? hyps->value.size() : 0; }

void sc_hypotheses_free(sc_hypotheses* hyps) { delete hyps; }

sc_status sc_evaluate(const sc_hypotheses* hyps, const char* truths_json, const char* config_json,
                      char** report_json) {
  return guarded([&] {
    require_arg(hyps, "hyps");
    require_arg(truths_json, "truths_json");
    const auto bdm = bdm_config_from_json(parse_config(config_json));
    std::vector<ImageSet> truths;
    try {
      for (const auto& t : Json::parse(truths_json)) truths.push_back(make_image_set(t.get<std::vector<ImageId>>()));
    } catch (const Json::exception& e) {
      fail(ErrorKind::InvalidArgument, std::string("truths: ") + e.what());
    }
    set_out(report_json, to_json(evaluate(truncate(hyps->value, bdm.top_k), truths, bdm.thresholds)));
  });
}

}  // extern "C"
