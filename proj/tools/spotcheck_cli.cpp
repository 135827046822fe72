// Command-line front end; talks to the library only through the C API.
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "spotcheck/spotcheck.h"

namespace {

struct Common {
  uint64_t seed = 0;
  std::string config;
  std::string out;
};

int exit_code(sc_status s) {
  switch (s) {
    case SC_OK: return 0;
    case SC_ERR_VALIDATION:
    case SC_ERR_IO: return 2;
    case SC_ERR_NUMERICAL: return 3;
    default: return 1;
  }
}

int report_error(sc_status s) {
  std::fprintf(stderr, "error: %s\n", sc_last_error());
  return exit_code(s);
}

// Owns a string returned by the library.
struct Text {
  char* p = nullptr;
  ~Text() { sc_string_free(p); }
};

struct Suite {
  sc_suite* p = nullptr;
  ~Suite() { sc_suite_free(p); }
};

void print(const Text& t) {
  if (t.p) std::printf("%s\n", t.p);
}

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--seed", c.seed, "master random seed");
  cmd->add_option("--config", c.config, "TOML or JSON configuration file");
  auto* out = cmd->add_option("--out", c.out, "output directory");
  if (out_required) out->required();
}

sc_status load_config(const Common& c, std::string& json) {
  if (c.config.empty()) {
    json = "{}";
    return SC_OK;
  }
  Text t;
  const sc_status s = sc_config_load(c.config.c_str(), &t.p);
  if (s == SC_OK) json = t.p;
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SpotCheck blindspot discovery evaluation"};
  app.require_subcommand(1);

  Common gen_opts, train_opts, discover_opts, eval_opts, sweep_opts, report_opts;
  std::string import_path, ec_id, tuning_dir, eval_dir;
  std::vector<std::string> report_dirs;

  auto* gen = app.add_subcommand("gen", "generate an EC suite into --out");
  add_common(gen, gen_opts);
  auto* train = app.add_subcommand("train", "fit (or verify) the model of every EC in the suite at --out");
  add_common(train, train_opts);
  auto* disc = app.add_subcommand("discover", "run PlaneSpot, or import external hypotheses, for the suite at --out");
  add_common(disc, discover_opts);
  disc->add_option("--import", import_path, "hypothesis JSON file, or a directory of <ec_id>.json files");
  disc->add_option("--ec", ec_id, "restrict to one EC");
  auto* eval = app.add_subcommand("eval", "score pending discovery runs of the suite at --out");
  add_common(eval, eval_opts);
  auto* sw = app.add_subcommand("sweep", "grid search of PlaneSpot hyperparameters on an oracle tuning suite");
  add_common(sw, sweep_opts);
  sw->add_option("--suite", tuning_dir, "tuning suite directory")->required();
  sw->add_option("--eval-suite", eval_dir, "evaluation suite, checked to be disjoint");
  auto* rep = app.add_subcommand("report", "aggregate tables and scatter exports into --out");
  add_common(rep, report_opts);
  rep->add_option("suites", report_dirs, "suite directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  std::string cfg;
  sc_status s = SC_OK;
  Text summary;

  if (*gen) {
    if ((s = load_config(gen_opts, cfg)) != SC_OK) return report_error(s);
    Suite suite;
    s = sc_suite_generate(cfg.c_str(), gen_opts.seed, gen_opts.out.c_str(), &suite.p);
    if (s != SC_OK) return report_error(s);
    std::printf("generated %zu ECs in %s\n", sc_suite_size(suite.p), gen_opts.out.c_str());
  } else if (*train) {
    if ((s = load_config(train_opts, cfg)) != SC_OK) return report_error(s);
    Suite suite;
    if ((s = sc_suite_open(train_opts.out.c_str(), &suite.p)) != SC_OK) return report_error(s);
    s = sc_suite_train(suite.p, cfg.c_str(), train_opts.seed, &summary.p);
  } else if (*disc) {
    if ((s = load_config(discover_opts, cfg)) != SC_OK) return report_error(s);
    Suite suite;
    if ((s = sc_suite_open(discover_opts.out.c_str(), &suite.p)) != SC_OK) return report_error(s);
    s = sc_suite_discover(suite.p, cfg.c_str(), discover_opts.seed, import_path.empty() ? nullptr : import_path.c_str(),
                          ec_id.empty() ? nullptr : ec_id.c_str(), &summary.p);
  } else if (*eval) {
    if ((s = load_config(eval_opts, cfg)) != SC_OK) return report_error(s);
    Suite suite;
    if ((s = sc_suite_open(eval_opts.out.c_str(), &suite.p)) != SC_OK) return report_error(s);
    s = sc_suite_eval(suite.p, &summary.p);
  } else if (*sw) {
    if ((s = load_config(sweep_opts, cfg)) != SC_OK) return report_error(s);
    Suite tuning, evaluation;
    if ((s = sc_suite_open(tuning_dir.c_str(), &tuning.p)) != SC_OK) return report_error(s);
    if (!eval_dir.empty() && (s = sc_suite_open(eval_dir.c_str(), &evaluation.p)) != SC_OK) return report_error(s);
    s = sc_suite_sweep(tuning.p, evaluation.p, cfg.c_str(), sweep_opts.seed, sweep_opts.out.c_str(), &summary.p);
  } else if (*rep) {
    if ((s = load_config(report_opts, cfg)) != SC_OK) return report_error(s);
    std::vector<const char*> dirs;
    for (const auto& d : report_dirs) dirs.push_back(d.c_str());
    s = sc_report(dirs.data(), dirs.size(), report_opts.out.c_str());
    if (s == SC_OK) std::printf("report written to %s\n", report_opts.out.c_str());
  }
  if (s != SC_OK) return report_error(s);
  print(summary);
  return 0;
}
