#include "spotcheck/harness.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>

namespace spotcheck {

namespace fs = std::filesystem;

bool ExperimentConfiguration::is_verified() const {
  return !verified.empty() && std::all_of(verified.begin(), verified.end(), [](bool v) { return v; });
}

void validate(const SuiteOptions& o) {
  require(o.count >= 0, ErrorKind::InvalidArgument, "suite count must be non-negative");
  require(o.blindspots_min >= 1 && o.blindspots_max <= 3 && o.blindspots_min <= o.blindspots_max,
          ErrorKind::InvalidArgument, "blindspot count range must lie within [1,3]");
  require(o.triplets.min >= 2 && o.triplets.max <= 7 && o.triplets.min <= o.triplets.max,
          ErrorKind::InvalidArgument, "triplet range must lie within [2,7]");
  require(o.splits.train > 0 && o.splits.val > 0 && o.splits.test > 0, ErrorKind::InvalidArgument,
          "split sizes must be positive");
  require(o.resolution >= 32 && o.resolution % 8 == 0, ErrorKind::InvalidArgument,
          "resolution must be a multiple of 8 and at least 32");
  validate(RenderConfig::for_resolution(o.resolution));  // geometry must still fit
  require(o.oracle.epsilon >= 0.0 && o.oracle.epsilon < 0.5, ErrorKind::InvalidArgument,
          "oracle epsilon must lie in [0,0.5)");
}

ExperimentConfiguration make_ec(const SuiteOptions& options, int index) {
  const Seed ec_seed = derive_seed(options.master_seed, static_cast<std::uint64_t>(index));
  ExperimentConfiguration ec;
  char id[64];
  std::snprintf(id, sizeof id, "%s%04d", options.id_prefix.c_str(), index);
  ec.id = id;
  ec.splits = options.splits;
  ec.model_kind = options.model_kind;
  ec.oracle = options.oracle;
  ec.resolution = options.resolution;
  ec.seeds.scenes = derive_seed(ec_seed, 3);
  ec.seeds.training = derive_seed(ec_seed, 4);
  ec.seeds.oracle = derive_seed(ec_seed, 5);
  ec.seeds.bdm = derive_seed(ec_seed, 6);

  Rng count_rng(derive_seed(ec_seed, 7));
  const int m = count_rng.uniform_int(options.blindspots_min, options.blindspots_max);

  constexpr int kDatasetAttempts = 100;
  for (int attempt = 0; attempt < kDatasetAttempts; ++attempt) {
    const Seed dataset_seed = derive_seed(derive_seed(ec_seed, 1), static_cast<std::uint64_t>(attempt));
    const Seed blindspot_seed = derive_seed(derive_seed(ec_seed, 2), static_cast<std::uint64_t>(attempt));
    const DatasetSpec spec = sample_dataset_spec(dataset_seed);
    try {
      ec.blindspots = sample_blindspot_set(spec, m, blindspot_seed, options.triplets);
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::GenerationExhausted || e.kind() == ErrorKind::InfeasibleSpec) continue;
      throw;
    }
    ec.seeds.dataset = dataset_seed;
    ec.seeds.blindspots = blindspot_seed;
    return ec;
  }
  fail(ErrorKind::GenerationExhausted, "EC " + ec.id + ": no dataset admits the requested blindspots");
}

std::vector<ExperimentConfiguration> generate_ec_suite(const SuiteOptions& options,
                                                       const std::optional<fs::path>& out_dir) {
  validate(options);
  std::vector<ExperimentConfiguration> suite;
  for (int i = 0; i < options.count; ++i) suite.push_back(make_ec(options, i));
  if (out_dir) {
    fs::create_directories(*out_dir);
    Json index;
    index["master_seed"] = options.master_seed;
    index["count"] = options.count;
    index["id_prefix"] = options.id_prefix;
    Json ids = Json::array();
    for (const auto& ec : suite) {
      ids.push_back(ec.id);
      write_ec_bundle(ec, *out_dir / ec.id, options.write_images);
    }
    index["ecs"] = ids;
    write_json_file(index, (*out_dir / "suite.json").string());
  }
  return suite;
}

std::pair<ImageId, ImageId> split_range(const SplitSizes& sizes, SplitTag tag) {
  switch (tag) {
    case SplitTag::Train: return {0, sizes.train};
    case SplitTag::Val: return {sizes.train, sizes.train + sizes.val};
    case SplitTag::Test: return {sizes.train + sizes.val, sizes.train + sizes.val + sizes.test};
  }
  return {0, 0};
}

std::vector<SceneDescription> ec_scenes(const ExperimentConfiguration& ec, SplitTag tag) {
  const auto render_cfg = RenderConfig::for_resolution(ec.resolution);
  const auto [begin, end] = split_range(ec.splits, tag);
  std::vector<SceneDescription> scenes;
  scenes.reserve(static_cast<std::size_t>(end - begin));
  for (ImageId id = begin; id < end; ++id) {
    scenes.push_back(sample_scene(ec.dataset(), id, derive_seed(ec.seeds.scenes, static_cast<std::uint64_t>(id)), render_cfg));
  }
  return scenes;
}

LabeledSplit ec_split(const ExperimentConfiguration& ec, SplitTag tag) {
  return induce_labels(ec_scenes(ec, tag), ec.blindspots, tag);
}

std::vector<ImageSet> truth_sets(const ExperimentConfiguration& ec, const std::vector<SceneDescription>& scenes,
                                 bool positives_only) {
  std::vector<ImageSet> out;
  for (const auto& b : ec.blindspots.blindspots) {
    std::vector<ImageId> ids;
    for (const auto& s : scenes) {
      if ((!positives_only || label_of(s)) && matches(b, s)) ids.push_back(s.image_id);
    }
    out.push_back(make_image_set(std::move(ids)));
  }
  return out;
}

namespace {

const char* to_string(ModelKind k) { return k == ModelKind::Oracle ? "oracle" : "trained"; }

ModelKind parse_model_kind(const std::string& s) {
  if (s == "oracle") return ModelKind::Oracle;
  if (s == "trained") return ModelKind::Trained;
  fail(ErrorKind::InvalidArgument, "unknown model kind '" + s + "'");
}

}  // namespace

Json to_json(const ExperimentConfiguration& ec) {
  Json j;
  j["id"] = ec.id;
  j["model_kind"] = to_string(ec.model_kind);
  j["resolution"] = ec.resolution;
  j["splits"] = {{"train", ec.splits.train}, {"val", ec.splits.val}, {"test", ec.splits.test}};
  j["seeds"] = {{"dataset", ec.seeds.dataset}, {"blindspots", ec.seeds.blindspots}, {"scenes", ec.seeds.scenes},
                {"training", ec.seeds.training}, {"oracle", ec.seeds.oracle}, {"bdm", ec.seeds.bdm}};
  j["oracle"] = {{"epsilon", ec.oracle.epsilon}, {"jitter", ec.oracle.jitter},
                 {"confidence_noise", ec.oracle.confidence_noise}};
  j["dataset"] = to_json(ec.dataset());
  Json bs = Json::array();
  for (const auto& b : ec.blindspots.blindspots) bs.push_back(to_json(b));
  j["blindspots"] = bs;
  return j;
}

ExperimentConfiguration ec_from_json(const Json& j) {
  ExperimentConfiguration ec;
  try {
    ec.id = j.at("id").get<std::string>();
    ec.model_kind = parse_model_kind(j.at("model_kind").get<std::string>());
    ec.resolution = j.at("resolution").get<int>();
    const auto& s = j.at("splits");
    ec.splits = {s.at("train").get<int>(), s.at("val").get<int>(), s.at("test").get<int>()};
    const auto& seeds = j.at("seeds");
    ec.seeds = {seeds.at("dataset").get<Seed>(), seeds.at("blindspots").get<Seed>(), seeds.at("scenes").get<Seed>(),
                seeds.at("training").get<Seed>(), seeds.at("oracle").get<Seed>(), seeds.at("bdm").get<Seed>()};
    const auto& o = j.at("oracle");
    ec.oracle = {o.at("epsilon").get<double>(), o.at("jitter").get<double>(), o.at("confidence_noise").get<double>()};
    ec.blindspots.dataset = dataset_spec_from_json(j.at("dataset"));
    for (const auto& b : j.at("blindspots")) ec.blindspots.blindspots.push_back(blindspot_from_json(b));
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed EC manifest: ") + e.what());
  }
  return ec;
}

void validate(const ExperimentConfiguration& ec) {
  validate(ec.dataset());
  validate(ec.blindspots);
  require(!ec.blindspots.blindspots.empty(), ErrorKind::InvalidArgument, "EC " + ec.id + " has no blindspots");
}

void write_ec_bundle(const ExperimentConfiguration& ec, const fs::path& dir, bool write_images) {
  fs::create_directories(dir / "truth");
  write_json_file(to_json(ec), (dir / "manifest.json").string());
  if (!ec.verified.empty()) {
    Json status;
    status["verified"] = ec.verified;
    write_json_file(status, (dir / "status.json").string());
  }
  const auto render_cfg = RenderConfig::for_resolution(ec.resolution);
  std::ofstream scenes_out(dir / "scenes.jsonl");
  if (!scenes_out) fail(ErrorKind::IoError, "cannot write " + (dir / "scenes.jsonl").string());
  for (SplitTag tag : {SplitTag::Train, SplitTag::Val, SplitTag::Test}) {
    const auto scenes = ec_scenes(ec, tag);
    const std::string split = to_string(tag);
    if (write_images) fs::create_directories(dir / "images" / split);
    for (const auto& s : scenes) {
      const std::string file = "images/" + split + "/" + std::to_string(s.image_id) + ".png";
      Json row;
      row["image_id"] = s.image_id;
      row["split"] = split;
      row["file"] = write_images ? Json(file) : Json(nullptr);
      row["label"] = label_of(s);
      const auto scene_json = to_json(s);
      row["seed"] = scene_json["seed"];
      row["triplets"] = scene_json["triplets"];
      row["placements"] = scene_json["placements"];
      scenes_out << row.dump() << '\n';
      if (write_images) write_png(render(s, render_cfg), (dir / file).string());
    }
    const auto all = truth_sets(ec, scenes, false);
    const auto pos = truth_sets(ec, scenes, true);
    Json truth = Json::array();
    for (std::size_t b = 0; b < all.size(); ++b) {
      truth.push_back({{"blindspot", ec.blindspots.blindspots[b].id}, {"image_ids", all[b]},
                       {"positive_image_ids", pos[b]}});
    }
    write_json_file(truth, (dir / "truth" / (split + ".json")).string());
  }
}

ExperimentConfiguration load_ec(const fs::path& dir) {
  auto ec = ec_from_json(read_json_file((dir / "manifest.json").string()));
  if (fs::exists(dir / "status.json")) {
    const auto status = read_json_file((dir / "status.json").string());
    ec.verified = status.at("verified").get<std::vector<bool>>();
  }
  validate(ec);
  return ec;
}

BuiltModel build_oracle(const ExperimentConfiguration& ec, const InductionThresholds& thresholds) {
  BuiltModel built;
  built.model = std::make_unique<OracleModel>(ec.blindspots, ec.oracle, ec.seeds.oracle);
  const auto val = ec_split(ec, SplitTag::Val);
  built.induction = verify_induction(*built.model, val, ec.blindspots, thresholds,
                                     RenderConfig::for_resolution(ec.resolution));
  return built;
}

TrainOutcome train_ec_model(const ExperimentConfiguration& ec, const TrainConfig& cfg,
                            const InductionThresholds& thresholds, Seed run_seed) {
  auto train_cfg = cfg;
  train_cfg.resolution = ec.resolution;
  const auto train = ec_split(ec, SplitTag::Train);
  const auto val = ec_split(ec, SplitTag::Val);
  const Seed seed = run_seed == 0 ? ec.seeds.training : derive_seed(ec.seeds.training, run_seed);
  auto model = train_classifier(train, val, train_cfg, seed);
  auto induction = verify_induction(model, val, ec.blindspots, thresholds, RenderConfig::for_resolution(ec.resolution));
  return {std::move(model), std::move(induction)};
}

namespace {

Json layers_to_json(const std::vector<ConvNet<float>::Layer>& layers) {
  Json out = Json::array();
  for (const auto& l : layers) {
    const Eigen::VectorXd w = l.weight.cast<double>().reshaped<Eigen::RowMajor>();
    const Eigen::VectorXd b = l.bias.cast<double>();
    out.push_back({{"rows", l.weight.rows()}, {"cols", l.weight.cols()},
                   {"weight", std::vector<double>(w.begin(), w.end())},
                   {"bias", std::vector<double>(b.begin(), b.end())}});
  }
  return out;
}

std::vector<ConvNet<float>::Layer> layers_from_json(const Json& j) {
  using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  std::vector<ConvNet<float>::Layer> out;
  for (const auto& l : j) {
    const auto rows = l.at("rows").get<Eigen::Index>(), cols = l.at("cols").get<Eigen::Index>();
    const auto w = l.at("weight").get<std::vector<double>>();
    const auto b = l.at("bias").get<std::vector<double>>();
    require(static_cast<Eigen::Index>(w.size()) == rows * cols && static_cast<Eigen::Index>(b.size()) == rows,
            ErrorKind::InvalidArgument, "layer weight shape mismatch");
    out.push_back({Eigen::Map<const RowMajorXd>(w.data(), rows, cols).cast<float>(),
                   Eigen::Map<const Eigen::VectorXd>(b.data(), rows).cast<float>()});
  }
  return out;
}

}  // namespace

Json to_json(const ConvNet<float>& net) {
  Json j;
  j["pooling"] = net.pooling() == GlobalPooling::Max ? "max" : "average";
  j["convs"] = layers_to_json(net.params().convs);
  j["head"] = layers_to_json(net.params().head);
  return j;
}

ConvNet<float> convnet_from_json(const Json& j) {
  try {
    ConvNet<float>::Params params;
    params.convs = layers_from_json(j.at("convs"));
    params.head = layers_from_json(j.at("head"));
    const auto pooling = j.at("pooling").get<std::string>();
    require(pooling == "max" || pooling == "average", ErrorKind::InvalidArgument, "unknown pooling '" + pooling + "'");
    return ConvNet<float>(std::move(params), pooling == "max" ? GlobalPooling::Max : GlobalPooling::Average);
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed model weights: ") + e.what());
  }
}

std::string config_hash(const BdmConfig& cfg) {
  std::string text = cfg.name + "|" + (cfg.import_path ? "import:" + *cfg.import_path : describe(cfg.planespot));
  char buf[128];
  std::snprintf(buf, sizeof buf, "|lp=%.17g|lr=%.17g|top=%zu|seed=%llu", cfg.thresholds.lambda_p, cfg.thresholds.lambda_r,
                cfg.top_k, static_cast<unsigned long long>(cfg.run_seed));
  return hash_hex(text + buf);
}

Seed bdm_seed(const ExperimentConfiguration& ec, const BdmConfig& cfg) {
  return cfg.run_seed == 0 ? ec.seeds.bdm : derive_seed(ec.seeds.bdm, cfg.run_seed);
}

ModelOutputs ec_test_outputs(const ExperimentConfiguration& ec, const Model& model) {
  std::vector<SceneDescription> positives;
  for (auto& s : ec_scenes(ec, SplitTag::Test)) {
    if (label_of(s)) positives.push_back(std::move(s));
  }
  return model.outputs(positives, RenderConfig::for_resolution(ec.resolution));
}

Discovery discover(const ExperimentConfiguration& ec, const ModelOutputs& outputs, const BdmConfig& cfg) {
  Discovery d;
  if (cfg.import_path) {
    d.hypotheses = hypotheses_from_json(read_json_file(*cfg.import_path));
    const ImageSet known = make_image_set(outputs.image_ids);
    for (const auto& h : d.hypotheses) {
      for (ImageId id : h.image_ids) {
        if (!contains(known, id))
          fail(ErrorKind::ImportFormatError, "EC " + ec.id + ": unknown image id " + std::to_string(id) +
                                                 " in " + *cfg.import_path);
      }
    }
    return d;
  }
  auto result = planespot(outputs, cfg.planespot, bdm_seed(ec, cfg));
  d.hypotheses = std::move(result.all);
  d.embedding = std::move(result.embedding);
  return d;
}

std::vector<BlindspotRecord> blindspot_records(const ExperimentConfiguration& ec, const MetricReport& report,
                                               const std::vector<std::size_t>& kept_truths) {
  std::vector<BlindspotRecord> out;
  for (std::size_t i = 0; i < kept_truths.size(); ++i) {
    const auto& b = ec.blindspots.blindspots[kept_truths[i]];
    BlindspotRecord r;
    r.ec_id = ec.id;
    r.blindspot_count = static_cast<int>(ec.blindspots.blindspots.size());
    r.triplet_count = static_cast<int>(b.triplets.size());
    r.has_relative_position = b.has_key(kRelativePosition);
    r.has_texture = std::any_of(b.triplets.begin(), b.triplets.end(),
                                [](const ValueAssignment& t) { return t.key.attribute == Attribute::Texture; });
    r.has_circle = b.value_of({Layer::Circle, Attribute::Presence}) == 1;
    r.covered = report.covered[i];
    out.push_back(r);
  }
  return out;
}

RunRecord score(const ExperimentConfiguration& ec, const BdmConfig& cfg, HypothesisList hypotheses,
                const std::vector<SceneDescription>& test_scenes) {
  RunRecord record;
  record.ec_id = ec.id;
  record.bdm_name = cfg.name;
  record.config_hash = config_hash(cfg);
  const auto truths = truth_sets(ec, test_scenes, true);
  std::vector<ImageSet> kept;
  std::vector<std::size_t> kept_index;
  for (std::size_t m = 0; m < truths.size(); ++m) {
    record.truth_sizes.push_back(truths[m].size());
    if (truths[m].empty()) continue;
    kept.push_back(truths[m]);
    kept_index.push_back(m);
  }
  record.report = evaluate(truncate(hypotheses, cfg.top_k), kept, cfg.thresholds);
  record.blindspot_records = blindspot_records(ec, record.report, kept_index);
  record.hypotheses = std::move(hypotheses);
  return record;
}

RunRecord run_ec(const ExperimentConfiguration& ec, const Model& model, const BdmConfig& cfg) {
  if (cfg.require_verified && !ec.is_verified())
    fail(ErrorKind::UnverifiedEC, "EC " + ec.id + " has not passed induction verification");
  const auto start = std::chrono::steady_clock::now();
  const auto test_scenes = ec_scenes(ec, SplitTag::Test);
  std::vector<SceneDescription> positives;
  for (const auto& s : test_scenes) {
    if (label_of(s)) positives.push_back(s);
  }
  auto outputs = model.outputs(positives, RenderConfig::for_resolution(ec.resolution));
  auto found = discover(ec, outputs, cfg);
  RunRecord record = score(ec, cfg, std::move(found.hypotheses), test_scenes);
  record.embedding = std::move(found.embedding);
  record.outputs = std::move(outputs);
  record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return record;
}

RunRecord run_ec(const ExperimentConfiguration& ec, const BdmConfig& cfg) {
  require(ec.model_kind == ModelKind::Oracle, ErrorKind::InvalidArgument,
          "EC " + ec.id + " uses a trained model; load it before running");
  auto built = build_oracle(ec);
  auto checked = ec;
  checked.verified = built.induction.verified;
  return run_ec(checked, *built.model, cfg);
}

Json to_json(const RunRecord& record, bool include_timing) {
  Json j;
  j["ec_id"] = record.ec_id;
  j["bdm"] = record.bdm_name;
  j["config_hash"] = record.config_hash;
  j["truth_sizes"] = record.truth_sizes;
  j["report"] = to_json(record.report);
  Json bs = Json::array();
  for (const auto& r : record.blindspot_records) {
    bs.push_back({{"blindspot_count", r.blindspot_count}, {"triplet_count", r.triplet_count},
                  {"has_relative_position", r.has_relative_position}, {"has_texture", r.has_texture},
                  {"has_circle", r.has_circle}, {"covered", r.covered}});
  }
  j["blindspots"] = bs;
  if (include_timing) j["seconds"] = record.seconds;
  return j;
}

std::string scatter_csv(const ModelOutputs& outputs, const Embedding2D& embedding) {
  std::string out = "image_id,x,y,confidence\n";
  char buf[128];
  for (std::size_t i = 0; i < outputs.image_ids.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    std::snprintf(buf, sizeof buf, "%lld,%.9g,%.9g,%.9g\n", static_cast<long long>(outputs.image_ids[i]),
                  embedding.normalized(r, 0), embedding.normalized(r, 1), outputs.confidences(r));
    out += buf;
  }
  return out;
}

fs::path create_run_dir(const fs::path& ec_dir, const std::string& name, const std::string& hash) {
  const std::string base = name + "-" + hash;
  fs::path dir = ec_dir / "runs" / base;
  for (int n = 1; fs::exists(dir); ++n) dir = ec_dir / "runs" / (base + "-" + std::to_string(n));
  fs::create_directories(dir);
  return dir;
}

void write_discovery(const fs::path& run_dir, const HypothesisList& hypotheses, const ModelOutputs& outputs,
                     const std::optional<Embedding2D>& embedding) {
  write_json_file(to_json(hypotheses), (run_dir / "hypotheses.json").string());
  if (embedding && !outputs.image_ids.empty()) {
    std::ofstream scatter(run_dir / "scatter.csv");
    if (!scatter) fail(ErrorKind::IoError, "cannot write " + (run_dir / "scatter.csv").string());
    scatter << scatter_csv(outputs, *embedding);
  }
}

void write_scored(const RunRecord& record, const fs::path& run_dir, const std::optional<fs::path>& suite_dir) {
  write_json_file(to_json(record.report), (run_dir / "report.json").string());
  write_json_file(to_json(record), (run_dir / "record.json").string());
  if (suite_dir) {
    std::ofstream results(*suite_dir / "results.jsonl", std::ios::app);
    if (!results) fail(ErrorKind::IoError, "cannot append to results.jsonl");
    Json line = to_json(record);
    line["run_dir"] = fs::relative(run_dir, *suite_dir).string();
    results << line.dump() << '\n';
  }
}

fs::path persist_run(const RunRecord& record, const fs::path& ec_dir, const std::optional<fs::path>& suite_dir) {
  const fs::path dir = create_run_dir(ec_dir, record.bdm_name, record.config_hash);
  write_discovery(dir, record.hypotheses, record.outputs, record.embedding);
  write_scored(record, dir, suite_dir);
  return dir;
}

}  // namespace spotcheck
