#include "spotcheck/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace spotcheck {

Json to_json(const ValueAssignment& v) {
  Json j;
  j["layer"] = to_string(v.key.layer);
  j["attribute"] = to_string(v.key.attribute);
  j["value"] = value_name(v.key, v.value);
  return j;
}

ValueAssignment value_assignment_from_json(const Json& j) {
  try {
    AttributeKey key{parse_layer(j.at("layer").get<std::string>()),
                     parse_attribute(j.at("attribute").get<std::string>())};
    require(is_valid_key(key), ErrorKind::InvalidArgument, "invalid layer/attribute pair");
    return {key, parse_value(key, j.at("value").get<std::string>())};
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed triplet: ") + e.what());
  }
}

Json to_json(const DatasetSpec& spec) {
  Json j;
  j["seed"] = spec.seed;
  Json layers = Json::array();
  for (Layer l : spec.layers) layers.push_back(to_string(l));
  j["layers"] = layers;
  Json rollable = Json::array();
  for (const auto& k : spec.rollable) rollable.push_back({{"layer", to_string(k.layer)}, {"attribute", to_string(k.attribute)}});
  j["rollable"] = rollable;
  return j;
}

DatasetSpec dataset_spec_from_json(const Json& j) {
  DatasetSpec spec;
  try {
    spec.seed = j.at("seed").get<Seed>();
    for (const auto& l : j.at("layers")) spec.layers.push_back(parse_layer(l.get<std::string>()));
    for (const auto& k : j.at("rollable"))
      spec.rollable.push_back({parse_layer(k.at("layer").get<std::string>()),
                               parse_attribute(k.at("attribute").get<std::string>())});
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed dataset spec: ") + e.what());
  }
  std::sort(spec.layers.begin(), spec.layers.end());
  std::sort(spec.rollable.begin(), spec.rollable.end());
  return spec;
}

Json to_json(const BlindspotSpec& b) {
  Json triplets = Json::array();
  for (const auto& t : b.triplets) triplets.push_back(to_json(t));
  return Json{{"id", b.id}, {"triplets", triplets}};
}

BlindspotSpec blindspot_from_json(const Json& j) {
  BlindspotSpec b;
  try {
    b.id = j.at("id").get<int>();
    for (const auto& t : j.at("triplets")) b.triplets.push_back(value_assignment_from_json(t));
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed blindspot: ") + e.what());
  }
  std::sort(b.triplets.begin(), b.triplets.end());
  return b;
}

Json to_json(const SceneDescription& scene) {
  Json j;
  j["image_id"] = scene.image_id;
  j["seed"] = scene.seed;
  Json triplets = Json::array();
  for (const auto& t : scene.triplets) triplets.push_back(to_json(t));
  j["triplets"] = triplets;
  Json placements = Json::array();
  for (const auto& p : scene.placements)
    placements.push_back({{"layer", to_string(p.layer)}, {"x", p.x}, {"y", p.y}, {"width", p.width}, {"height", p.height}});
  j["placements"] = placements;
  return j;
}

SceneDescription scene_from_json(const Json& j) {
  SceneDescription s;
  try {
    s.image_id = j.at("image_id").get<ImageId>();
    s.seed = j.at("seed").get<Seed>();
    for (const auto& t : j.at("triplets")) s.triplets.push_back(value_assignment_from_json(t));
    for (const auto& p : j.at("placements"))
      s.placements.push_back({parse_layer(p.at("layer").get<std::string>()), p.at("x").get<int>(),
                              p.at("y").get<int>(), p.at("width").get<int>(), p.at("height").get<int>()});
  } catch (const Json::exception& e) {
    fail(ErrorKind::InvalidArgument, std::string("malformed scene: ") + e.what());
  }
  return s;
}

Json to_json(const HypothesisList& hyps) {
  Json arr = Json::array();
  for (std::size_t k = 0; k < hyps.size(); ++k) {
    arr.push_back({{"rank", k + 1}, {"importance", hyps[k].importance}, {"image_ids", hyps[k].image_ids}});
  }
  return arr;
}

HypothesisList hypotheses_from_json(const Json& j) {
  require(j.is_array(), ErrorKind::ImportFormatError, "hypothesis list must be a JSON array");
  struct Entry {
    long rank;
    Hypothesis h;
  };
  std::vector<Entry> entries;
  for (std::size_t k = 0; k < j.size(); ++k) {
    const auto& e = j[k];
    try {
      require(e.is_object(), ErrorKind::ImportFormatError, "entry " + std::to_string(k) + " is not an object");
      Entry entry;
      entry.rank = e.contains("rank") ? e.at("rank").get<long>() : static_cast<long>(k + 1);
      entry.h.importance = e.contains("importance") ? e.at("importance").get<double>() : 0.0;
      std::vector<ImageId> ids = e.at("image_ids").get<std::vector<ImageId>>();
      require(!ids.empty(), ErrorKind::ImportFormatError, "entry " + std::to_string(k) + " has no image ids");
      entry.h.image_ids = make_image_set(std::move(ids));
      entries.push_back(std::move(entry));
    } catch (const Json::exception& ex) {
      fail(ErrorKind::ImportFormatError, "entry " + std::to_string(k) + ": " + ex.what());
    }
  }
  std::stable_sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.rank < b.rank; });
  HypothesisList out;
  for (auto& e : entries) out.push_back(std::move(e.h));
  return out;
}

Json to_json(const Aggregate& a) {
  return Json{{"mean", a.mean}, {"standard_error", a.standard_error}, {"ci_low", a.ci_low},
              {"ci_high", a.ci_high}, {"count", a.count}};
}

Json to_json(const MetricReport& report) {
  Json j;
  j["hypothesis_count"] = report.hypothesis_count;
  j["blindspot_recall"] = report.blindspot_recall;
  Json covered = Json::array();
  for (bool c : report.covered) covered.push_back(c);
  j["covered"] = covered;
  j["discovery_rate"] = report.discovery_rate;
  if (report.false_discovery) {
    j["false_discovery_rate"] = report.false_discovery->value;
    j["fdr_prefix"] = report.false_discovery->prefix;
  } else {
    j["false_discovery_rate"] = nullptr;
    j["fdr_prefix"] = nullptr;
  }
  j["best_precision"] = report.best_precision;
  Json failures = Json::array();
  for (const auto& [m, f] : report.failures) {
    failures.push_back({{"truth", m}, {"not_returned", f.not_returned}, {"found", f.found},
                        {"merged", f.merged}, {"impure", f.impure}});
  }
  j["failures"] = failures;
  return j;
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    fail(ErrorKind::InvalidArgument, path + ": " + e.what());
  }
}

void write_json_file(const Json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) fail(ErrorKind::IoError, "cannot write " + path);
  out << j.dump(2) << '\n';
}

std::string hash_hex(const std::string& text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

Json parse_toml_value(const std::string& raw, std::size_t line_no) {
  const std::string v = trim(raw);
  auto bad = [&]() -> Json {
    fail(ErrorKind::InvalidArgument, "TOML line " + std::to_string(line_no) + ": cannot parse value '" + v + "'");
  };
  if (v.empty()) return bad();
  if (v.front() == '"') {
    if (v.size() < 2 || v.back() != '"') return bad();
    return v.substr(1, v.size() - 2);
  }
  if (v == "true") return true;
  if (v == "false") return false;
  if (v.front() == '[') {
    if (v.back() != ']') return bad();
    Json arr = Json::array();
    std::string inner = v.substr(1, v.size() - 2);
    std::stringstream ss(inner);
    std::string item;
    while (std::getline(ss, item, ',')) {
      if (!trim(item).empty()) arr.push_back(parse_toml_value(item, line_no));
    }
    return arr;
  }
  std::string number;
  for (char c : v) {
    if (c != '_') number += c;
  }
  try {
    std::size_t used = 0;
    if (number.find_first_of(".eE") == std::string::npos) {
      const long long i = std::stoll(number, &used);
      if (used == number.size()) return i;
    } else {
      const double d = std::stod(number, &used);
      if (used == number.size()) return d;
    }
  } catch (const std::exception&) {
  }
  return bad();
}

}  // namespace

Json parse_toml(const std::string& text) {
  Json root = Json::object();
  Json* table = &root;
  std::stringstream ss(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::InvalidArgument, "TOML line " + std::to_string(line_no) + ": bad table header");
      table = &root;
      std::stringstream path(line.substr(1, line.size() - 2));
      std::string part;
      while (std::getline(path, part, '.')) {
        part = trim(part);
        if (!table->contains(part)) (*table)[part] = Json::object();
        table = &(*table)[part];
      }
      continue;
    }
    const auto eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::InvalidArgument, "TOML line " + std::to_string(line_no) + ": expected key = value");
    (*table)[trim(line.substr(0, eq))] = parse_toml_value(line.substr(eq + 1), line_no);
  }
  return root;
}

Json load_config_file(const std::string& path) {
  const bool toml = path.size() >= 5 && path.substr(path.size() - 5) == ".toml";
  if (!toml) return read_json_file(path);
  std::ifstream in(path);
  if (!in) fail(ErrorKind::IoError, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_toml(buf.str());
}

}  // namespace spotcheck
