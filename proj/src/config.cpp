#include "spotcheck/config.hpp"

#include <cstdio>
#include <set>

namespace spotcheck {

namespace {

const std::set<std::string> kSections{"suite", "oracle", "train", "induction", "planespot", "metrics", "sweep", "discover"};

// Typed access to one section; records the keys read so leftovers can be rejected.
class Section {
 public:
  Section(const Json& cfg, const std::string& name) : name_(name) {
    require(cfg.is_object(), ErrorKind::InvalidArgument, "configuration must be an object");
    for (const auto& [key, value] : cfg.items()) {
      require(kSections.contains(key), ErrorKind::InvalidArgument, "unknown configuration section '" + key + "'");
    }
    if (cfg.contains(name)) {
      node_ = &cfg.at(name);
      require(node_->is_object(), ErrorKind::InvalidArgument, "section '" + name + "' must be a table");
    }
  }

  void finish() const {
    if (!node_) return;
    for (const auto& [key, value] : node_->items()) {
      require(used_.contains(key), ErrorKind::InvalidArgument, "unknown key '" + name_ + "." + key + "'");
    }
  }

  template <class V>
  void read(const std::string& key, V& out) {
    used_.insert(key);
    if (!node_ || !node_->contains(key)) return;
    try {
      out = node_->at(key).get<V>();
    } catch (const Json::exception&) {
      fail(ErrorKind::InvalidArgument, "bad value for '" + name_ + "." + key + "'");
    }
  }

  void read_pair(const std::string& key, int& lo, int& hi) {
    std::vector<int> v{lo, hi};
    read(key, v);
    require(v.size() == 2, ErrorKind::InvalidArgument, "'" + name_ + "." + key + "' must be [min, max]");
    lo = v[0];
    hi = v[1];
  }

  const Json* node() const { return node_; }

 private:
  std::string name_;
  const Json* node_ = nullptr;
  std::set<std::string> used_;
};

GlobalPooling parse_pooling(const std::string& s) {
  if (s == "max") return GlobalPooling::Max;
  if (s == "average") return GlobalPooling::Average;
  fail(ErrorKind::InvalidArgument, "unknown pooling '" + s + "'");
}

ReducerKind parse_reducer(const std::string& s) {
  if (s == "parametric") return ReducerKind::Parametric;
  if (s == "pca") return ReducerKind::Pca;
  fail(ErrorKind::InvalidArgument, "unknown reducer '" + s + "'");
}

void read_planespot(Section& s, PlaneSpotConfig& p) {
  s.read("weight", p.weight);
  s.read("k_max", p.k_max);
  s.read("k_return", p.k_return);
  s.read("error_threshold", p.error_threshold);
  s.read("drop_zero_importance", p.drop_zero_importance);
  std::string reducer = p.reducer == ReducerKind::Pca ? "pca" : "parametric";
  s.read("reducer", reducer);
  p.reducer = parse_reducer(reducer);
  auto& r = p.reducer_config;
  s.read("perplexity", r.perplexity);
  s.read("hidden", r.hidden);
  s.read("reconstruction_weight", r.reconstruction_weight);
  s.read("reducer_epochs", r.epochs);
  s.read("reducer_batch_size", r.batch_size);
  s.read("reducer_learning_rate", r.learning_rate);
  s.read("gmm_restarts", p.gmm.restarts);
  s.read("gmm_max_iterations", p.gmm.max_iterations);
  s.read("gmm_tolerance", p.gmm.tolerance);
  require(p.weight >= 0.0, ErrorKind::InvalidArgument, "planespot.weight must be non-negative");
  require(p.k_max >= 1 && p.k_return >= 1, ErrorKind::InvalidArgument, "planespot.k_max and k_return must be positive");
}

}  // namespace

SuiteOptions suite_options_from_json(const Json& cfg, Seed master_seed) {
  SuiteOptions o;
  o.master_seed = master_seed;
  {
    Section s(cfg, "suite");
    s.read("count", o.count);
    s.read_pair("blindspots", o.blindspots_min, o.blindspots_max);
    s.read_pair("triplets", o.triplets.min, o.triplets.max);
    s.read("train", o.splits.train);
    s.read("val", o.splits.val);
    s.read("test", o.splits.test);
    std::string model = o.model_kind == ModelKind::Oracle ? "oracle" : "trained";
    s.read("model", model);
    require(model == "oracle" || model == "trained", ErrorKind::InvalidArgument, "suite.model must be oracle or trained");
    o.model_kind = model == "oracle" ? ModelKind::Oracle : ModelKind::Trained;
    s.read("resolution", o.resolution);
    s.read("id_prefix", o.id_prefix);
    s.read("write_images", o.write_images);
    s.finish();
  }
  {
    Section s(cfg, "oracle");
    s.read("epsilon", o.oracle.epsilon);
    s.read("jitter", o.oracle.jitter);
    s.read("confidence_noise", o.oracle.confidence_noise);
    s.finish();
  }
  validate(o);
  return o;
}

TrainConfig train_config_from_json(const Json& cfg) {
  TrainConfig t;
  Section s(cfg, "train");
  s.read("epochs", t.epochs);
  s.read("learning_rate", t.learning_rate);
  s.read("momentum", t.momentum);
  s.read("batch_size", t.batch_size);
  s.read("channels", t.architecture.channels);
  s.read("head_hidden", t.architecture.head_hidden);
  s.read("coordinates", t.architecture.coordinates);
  std::string pooling = t.architecture.pooling == GlobalPooling::Max ? "max" : "average";
  s.read("pooling", pooling);
  t.architecture.pooling = parse_pooling(pooling);
  s.finish();
  require(t.epochs >= 1 && t.batch_size >= 1 && t.learning_rate > 0.0, ErrorKind::InvalidArgument,
          "train.epochs, batch_size and learning_rate must be positive");
  return t;
}

InductionThresholds induction_thresholds_from_json(const Json& cfg) {
  InductionThresholds t;
  Section s(cfg, "induction");
  s.read("outside", t.outside);
  s.read("inside", t.inside);
  s.read("recall_gap", t.recall_gap);
  s.read("real_data", t.real_data);
  s.finish();
  return t;
}

BdmConfig bdm_config_from_json(const Json& cfg) {
  BdmConfig b;
  {
    Section s(cfg, "planespot");
    read_planespot(s, b.planespot);
    s.finish();
  }
  {
    Section s(cfg, "metrics");
    std::string mode;
    s.read("mode", mode);
    if (mode == "real_data") b.thresholds = MetricThresholds::real_data();
    else require(mode.empty() || mode == "synthetic", ErrorKind::InvalidArgument, "metrics.mode must be synthetic or real_data");
    s.read("lambda_p", b.thresholds.lambda_p);
    s.read("lambda_r", b.thresholds.lambda_r);
    s.read("top_k", b.top_k);
    validate(b.thresholds);
    s.finish();
  }
  {
    Section s(cfg, "discover");
    s.read("name", b.name);
    s.read("require_verified", b.require_verified);
    s.read("run_seed", b.run_seed);
    std::string import;
    s.read("import", import);
    if (!import.empty()) b.import_path = import;
    s.finish();
  }
  require(!b.name.empty() && b.name.find_first_of("/\\ ") == std::string::npos, ErrorKind::InvalidArgument,
          "discover.name must be a non-empty word");
  return b;
}

std::vector<BdmConfig> sweep_grid_from_json(const Json& cfg) {
  const BdmConfig base = bdm_config_from_json(cfg);
  require(cfg.contains("sweep") && cfg.at("sweep").is_object() && !cfg.at("sweep").empty(),
          ErrorKind::InvalidArgument, "a non-empty [sweep] section is required");
  std::vector<std::pair<std::string, Json>> axes;
  for (const auto& [key, values] : cfg.at("sweep").items()) {
    require(values.is_array() && !values.empty(), ErrorKind::InvalidArgument, "sweep." + key + " must be a non-empty list");
    axes.emplace_back(key, values);
  }
  std::vector<BdmConfig> grid;
  std::vector<std::size_t> index(axes.size(), 0);
  while (true) {
    Json doc = cfg;
    doc.erase("sweep");
    std::string label;
    for (std::size_t a = 0; a < axes.size(); ++a) {
      const auto& value = axes[a].second[index[a]];
      doc["planespot"][axes[a].first] = value;
      label += (label.empty() ? "" : ",") + axes[a].first + "=" + (value.is_string() ? value.get<std::string>() : value.dump());
    }
    BdmConfig point = bdm_config_from_json(doc);
    point.name = base.name + "[" + label + "]";
    grid.push_back(std::move(point));
    std::size_t a = 0;
    while (a < axes.size() && ++index[a] == axes[a].second.size()) index[a++] = 0;
    if (a == axes.size()) break;
  }
  return grid;
}

Json to_json(const BdmConfig& b) {
  Json j;
  const auto& p = b.planespot;
  const auto& r = p.reducer_config;
  j["planespot"] = {{"weight", p.weight}, {"k_max", p.k_max}, {"k_return", p.k_return},
                    {"error_threshold", p.error_threshold}, {"drop_zero_importance", p.drop_zero_importance},
                    {"reducer", p.reducer == ReducerKind::Pca ? "pca" : "parametric"},
                    {"perplexity", r.perplexity}, {"hidden", r.hidden},
                    {"reconstruction_weight", r.reconstruction_weight}, {"reducer_epochs", r.epochs},
                    {"reducer_batch_size", r.batch_size}, {"reducer_learning_rate", r.learning_rate},
                    {"gmm_restarts", p.gmm.restarts}, {"gmm_max_iterations", p.gmm.max_iterations},
                    {"gmm_tolerance", p.gmm.tolerance}};
  j["metrics"] = {{"lambda_p", b.thresholds.lambda_p}, {"lambda_r", b.thresholds.lambda_r}, {"top_k", b.top_k}};
  j["discover"] = {{"name", b.name}, {"require_verified", b.require_verified}, {"run_seed", b.run_seed},
                   {"import", b.import_path.value_or("")}};
  return j;
}

}  // namespace spotcheck
