#include <algorithm>
#include <map>
#include <set>

#include "spotcheck/scenegen.hpp"

namespace spotcheck {

namespace {

struct ValueNames {
  const char* default_name;
  const char* alternative_name;
};

ValueNames names_for(AttributeKey key) {
  switch (key.attribute) {
    case Attribute::Color:
      return key.layer == Layer::Background ? ValueNames{"White", "Grey"}
                                            : ValueNames{"Blue", "Orange"};
    case Attribute::Texture:
      return key.layer == Layer::Background ? ValueNames{"Solid", "SaltAndPepper"}
                                            : ValueNames{"Solid", "VerticalStripes"};
    case Attribute::Presence: return {"False", "True"};
    case Attribute::Size: return {"Normal", "Small"};
    case Attribute::Number: return {"1", "2"};
    case Attribute::RelativePosition: return {"0", "1"};
  }
  return {"?", "?"};
}

}  // namespace

bool is_valid_key(AttributeKey key) {
  if (key.attribute == Attribute::RelativePosition) return key.layer == Layer::Background;
  const auto attrs = attributes_of(key.layer);
  return std::find(attrs.begin(), attrs.end(), key.attribute) != attrs.end();
}

bool is_meta_attribute(AttributeKey key) { return key == kRelativePosition; }

std::vector<Attribute> attributes_of(Layer layer) {
  switch (layer) {
    case Layer::Background: return {Attribute::Color, Attribute::Texture};
    case Layer::Square:
      return {Attribute::Color, Attribute::Texture, Attribute::Presence, Attribute::Size,
              Attribute::Number};
    default:
      return {Attribute::Color, Attribute::Texture, Attribute::Presence, Attribute::Size};
  }
}

const char* to_string(Layer layer) {
  switch (layer) {
    case Layer::Background: return "Background";
    case Layer::Square: return "Square";
    case Layer::Rectangle: return "Rectangle";
    case Layer::Circle: return "Circle";
    case Layer::Text: return "Text";
  }
  return "?";
}

const char* to_string(Attribute attribute) {
  switch (attribute) {
    case Attribute::Color: return "Color";
    case Attribute::Texture: return "Texture";
    case Attribute::Presence: return "Presence";
    case Attribute::Size: return "Size";
    case Attribute::Number: return "Number";
    case Attribute::RelativePosition: return "RelativePosition";
  }
  return "?";
}

Layer parse_layer(const std::string& name) {
  for (Layer l : kAllLayers) {
    if (name == to_string(l)) return l;
  }
  fail(ErrorKind::InvalidArgument, "unknown layer '" + name + "'");
}

Attribute parse_attribute(const std::string& name) {
  for (Attribute a : {Attribute::Color, Attribute::Texture, Attribute::Presence, Attribute::Size,
                      Attribute::Number, Attribute::RelativePosition}) {
    if (name == to_string(a)) return a;
  }
  fail(ErrorKind::InvalidArgument, "unknown attribute '" + name + "'");
}

std::string value_name(AttributeKey key, int value) {
  if (key.attribute == Attribute::RelativePosition) return std::to_string(value);
  const auto names = names_for(key);
  return value == 0 ? names.default_name : names.alternative_name;
}

int parse_value(AttributeKey key, const std::string& name) {
  if (key.attribute == Attribute::RelativePosition) {
    if (name == "-1") return -1;
    if (name == "0") return 0;
    if (name == "1") return 1;
  } else {
    const auto names = names_for(key);
    if (name == names.default_name) return 0;
    if (name == names.alternative_name) return 1;
  }
  fail(ErrorKind::InvalidArgument, "invalid value '" + name + "' for " + to_string(key.layer) +
                                       "." + to_string(key.attribute));
}

std::string to_string(const ValueAssignment& v) {
  return std::string("(") + to_string(v.key.layer) + ", " + to_string(v.key.attribute) + ", " +
         value_name(v.key, v.value) + ")";
}

bool DatasetSpec::has_layer(Layer layer) const {
  return std::binary_search(layers.begin(), layers.end(), layer);
}

bool DatasetSpec::is_rollable(AttributeKey key) const {
  return std::binary_search(rollable.begin(), rollable.end(), key);
}

void validate(const DatasetSpec& spec) {
  auto bad = [](const std::string& why) { fail(ErrorKind::InvalidArgument, "DatasetSpec: " + why); };
  if (!std::is_sorted(spec.layers.begin(), spec.layers.end()) ||
      std::adjacent_find(spec.layers.begin(), spec.layers.end()) != spec.layers.end())
    bad("layers must be sorted and unique");
  if (!spec.has_layer(Layer::Background) || !spec.has_layer(Layer::Square))
    bad("Background and Square layers are required");
  const auto extra = static_cast<int>(spec.layers.size()) - 2;
  if (extra < 1 || extra > 3) bad("expected 1-3 extra object layers, got " + std::to_string(extra));
  if (!std::is_sorted(spec.rollable.begin(), spec.rollable.end()) ||
      std::adjacent_find(spec.rollable.begin(), spec.rollable.end()) != spec.rollable.end())
    bad("rollable keys must be sorted and unique");
  if (spec.rollable.size() < 6 || spec.rollable.size() > 8)
    bad("rollable count " + std::to_string(spec.rollable.size()) + " outside [6,8]");
  for (const auto& key : spec.rollable) {
    if (!is_valid_key(key) || is_meta_attribute(key)) bad("invalid rollable key");
    if (!spec.has_layer(key.layer)) bad("rollable key on a layer not in the dataset");
  }
  for (Layer l : spec.layers) {
    if (is_object_layer(l) && !spec.is_rollable({l, Attribute::Presence}))
      bad(std::string("Presence of ") + to_string(l) + " must be rollable");
  }
}

DatasetSpec sample_dataset_spec(Seed seed) {
  Rng rng(seed);
  DatasetSpec spec;
  spec.seed = seed;
  spec.layers = {Layer::Background, Layer::Square};

  std::vector<Layer> optional(kOptionalObjectLayers.begin(), kOptionalObjectLayers.end());
  const int extra = rng.uniform_int(1, 3);
  for (int i = 0; i < extra; ++i) {
    const auto j = rng.index(optional.size());
    spec.layers.push_back(optional[j]);
    optional.erase(optional.begin() + static_cast<std::ptrdiff_t>(j));
  }
  std::sort(spec.layers.begin(), spec.layers.end());

  const int target = rng.uniform_int(6, 8);
  std::set<AttributeKey> rollable;
  for (Layer l : spec.layers) {
    if (is_object_layer(l)) rollable.insert({l, Attribute::Presence});
  }
  while (static_cast<int>(rollable.size()) < target) {
    std::vector<std::pair<Layer, std::vector<Attribute>>> open;
    for (Layer l : spec.layers) {
      std::vector<Attribute> remaining;
      for (Attribute a : attributes_of(l)) {
        if (!rollable.count({l, a})) remaining.push_back(a);
      }
      if (!remaining.empty()) open.emplace_back(l, std::move(remaining));
    }
    const auto& [layer, remaining] = open[rng.index(open.size())];
    rollable.insert({layer, rng.pick(remaining)});
  }
  spec.rollable.assign(rollable.begin(), rollable.end());
  return spec;
}

int SceneDescription::value_of(AttributeKey key) const {
  for (const auto& t : triplets) {
    if (t.key == key) return t.value;
  }
  if (key == kRelativePosition) return -1;
  return 0;
}

bool SceneDescription::has(const ValueAssignment& v) const {
  return std::find(triplets.begin(), triplets.end(), v) != triplets.end();
}

RenderConfig RenderConfig::for_resolution(int resolution) {
  RenderConfig cfg;
  cfg.resolution = resolution;
  // Reference proportions at 224 px: 56 px normal, 28 px small.
  auto scale = [resolution](int px224) { return std::max(1, px224 * resolution / 224); };
  cfg.square = {scale(56), scale(56), scale(28), scale(28)};
  cfg.rectangle = {scale(56), scale(28), scale(28), scale(14)};
  cfg.circle = cfg.square;
  cfg.text = cfg.rectangle;
  cfg.stripe_width = std::max(1, resolution / 56);
  return cfg;
}

const ObjectGeometry& RenderConfig::geometry(Layer layer) const {
  switch (layer) {
    case Layer::Square: return square;
    case Layer::Rectangle: return rectangle;
    case Layer::Circle: return circle;
    case Layer::Text: return text;
    case Layer::Background: break;
  }
  fail(ErrorKind::InvalidArgument, "Background has no object geometry");
}

void validate(const RenderConfig& cfg) {
  auto bad = [](const std::string& why) { fail(ErrorKind::GeometryError, "RenderConfig: " + why); };
  if (cfg.resolution < 32) bad("resolution must be at least 32");
  for (Layer l : {Layer::Square, Layer::Rectangle, Layer::Circle, Layer::Text}) {
    const auto& g = cfg.geometry(l);
    const int normal = std::min(g.normal_width, g.normal_height);
    const int small = std::min(g.small_width, g.small_height);
    if (small < 4) bad(std::string(to_string(l)) + " small size below 4 px");
    if (g.normal_width <= g.small_width || g.normal_height <= g.small_height || normal <= small)
      bad(std::string(to_string(l)) + " normal size must exceed small size");
    if (g.normal_width > cfg.resolution || g.normal_height > cfg.resolution)
      bad(std::string(to_string(l)) + " does not fit in the frame");
  }
  if (cfg.stripe_width < 1) bad("stripe width must be positive");
  if (cfg.noise_fraction < 0.0 || cfg.noise_fraction > 0.5) bad("noise fraction outside [0,0.5]");
}

namespace {

bool boxes_conflict(const Placement& a, const Placement& b, int margin) {
  return a.x < b.x + b.width + margin && b.x < a.x + a.width + margin &&
         a.y < b.y + b.height + margin && b.y < a.y + a.height + margin;
}

}  // namespace

SceneDescription sample_scene(const DatasetSpec& spec, ImageId image_id, Seed seed,
                              const RenderConfig& cfg) {
  Rng rng(seed);
  SceneDescription scene;
  scene.image_id = image_id;
  scene.seed = seed;
  for (const auto& key : spec.rollable) scene.triplets.push_back({key, rng.coin() ? 1 : 0});

  std::vector<Placement> wanted;
  for (Layer l : spec.layers) {
    if (!is_object_layer(l) || scene.value_of({l, Attribute::Presence}) != 1) continue;
    const auto& g = cfg.geometry(l);
    const bool small = scene.value_of({l, Attribute::Size}) == 1;
    Placement p{l, 0, 0, small ? g.small_width : g.normal_width,
                small ? g.small_height : g.normal_height};
    const int copies = (l == Layer::Square && scene.value_of({l, Attribute::Number}) == 1) ? 2 : 1;
    for (int c = 0; c < copies; ++c) wanted.push_back(p);
  }

  for (auto p : wanted) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_placement_attempts && !placed; ++attempt) {
      p.x = rng.uniform_int(0, cfg.resolution - p.width);
      p.y = rng.uniform_int(0, cfg.resolution - p.height);
      placed = std::none_of(scene.placements.begin(), scene.placements.end(),
                            [&](const Placement& q) { return boxes_conflict(p, q, cfg.placement_margin); });
    }
    if (!placed)
      fail(ErrorKind::PlacementFailure, "no non-overlapping layout for image " + std::to_string(image_id));
    scene.placements.push_back(p);
  }

  for (const auto& meta : compute_meta_attributes(scene, cfg)) scene.triplets.push_back(meta);
  return scene;
}

std::vector<ValueAssignment> compute_meta_attributes(const SceneDescription& scene,
                                                     const RenderConfig& cfg) {
  // The first-placed square decides when two squares are present.
  for (const auto& p : scene.placements) {
    if (p.layer != Layer::Square) continue;
    const bool above = 2 * p.y + p.height < cfg.resolution;
    return {{kRelativePosition, above ? 1 : 0}};
  }
  return {{kRelativePosition, -1}};
}

bool label_of(const SceneDescription& scene) {
  return scene.has({{Layer::Square, Attribute::Presence}, 1});
}

}  // namespace spotcheck
