#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spotcheck/common.hpp"
#include "spotcheck/rng.hpp"

namespace spotcheck {

enum class Layer : std::uint8_t { Background, Square, Rectangle, Circle, Text };
enum class Attribute : std::uint8_t { Color, Texture, Presence, Size, Number, RelativePosition };

inline constexpr std::array<Layer, 5> kAllLayers{Layer::Background, Layer::Square, Layer::Rectangle,
                                                 Layer::Circle, Layer::Text};
inline constexpr std::array<Layer, 3> kOptionalObjectLayers{Layer::Rectangle, Layer::Circle,
                                                            Layer::Text};

struct AttributeKey {
  Layer layer = Layer::Background;
  Attribute attribute = Attribute::Color;

  auto operator<=>(const AttributeKey&) const = default;
};

inline bool is_object_layer(Layer layer) { return layer != Layer::Background; }
bool is_valid_key(AttributeKey key);
bool is_meta_attribute(AttributeKey key);

/// Sampleable (non-meta) attributes of a layer, in canonical order.
std::vector<Attribute> attributes_of(Layer layer);

const char* to_string(Layer layer);
const char* to_string(Attribute attribute);
Layer parse_layer(const std::string& name);
Attribute parse_attribute(const std::string& name);

inline constexpr AttributeKey kRelativePosition{Layer::Background, Attribute::RelativePosition};

/// Values are 0 (Default) or 1 (Alternative). RelativePosition uses -1/0/1.
struct ValueAssignment {
  AttributeKey key;
  int value = 0;

  auto operator<=>(const ValueAssignment&) const = default;
};

/// Display name of a value, e.g. "Orange" for (Circle, Color, 1).
std::string value_name(AttributeKey key, int value);
int parse_value(AttributeKey key, const std::string& name);
std::string to_string(const ValueAssignment& v);

struct DatasetSpec {
  std::vector<Layer> layers;            // sorted
  std::vector<AttributeKey> rollable;   // sorted
  Seed seed = 0;

  bool has_layer(Layer layer) const;
  bool is_rollable(AttributeKey key) const;
};

/// Throws InvalidArgument naming the first violated invariant.
void validate(const DatasetSpec& spec);

struct Placement {
  Layer layer = Layer::Square;
  int x = 0;  // top-left anchor
  int y = 0;
  int width = 0;
  int height = 0;
};

struct SceneDescription {
  std::vector<ValueAssignment> triplets;  // rollable keys in canonical order, then meta
  std::vector<Placement> placements;      // in placement order
  ImageId image_id = 0;
  Seed seed = 0;

  /// Value of `key`, or the Default value (0) when the key is not listed.
  int value_of(AttributeKey key) const;
  bool has(const ValueAssignment& v) const;
};

struct Rgb {
  std::uint8_t r = 0, g = 0, b = 0;
  auto operator<=>(const Rgb&) const = default;
};

struct ObjectGeometry {
  int normal_width = 0, normal_height = 0;
  int small_width = 0, small_height = 0;
};

struct RenderConfig {
  int resolution = 64;
  Rgb white{255, 255, 255};
  Rgb grey{128, 128, 128};
  Rgb blue{30, 100, 220};
  Rgb orange{245, 130, 30};
  Rgb black{0, 0, 0};
  ObjectGeometry square, rectangle, circle, text;
  int stripe_width = 1;
  double noise_fraction = 0.05;  // per noise color
  int placement_margin = 1;
  int max_placement_attempts = 1000;

  /// Geometry scaled linearly from the 224 px reference proportions.
  static RenderConfig for_resolution(int resolution);
  const ObjectGeometry& geometry(Layer layer) const;
};

/// Throws GeometryError if the configuration is unusable.
void validate(const RenderConfig& cfg);

struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major RGB

  Rgb at(int x, int y) const {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  void set(int x, int y, Rgb c) {
    const std::size_t i = 3 * (static_cast<std::size_t>(y) * width + x);
    pixels[i] = c.r;
    pixels[i + 1] = c.g;
    pixels[i + 2] = c.b;
  }
};

DatasetSpec sample_dataset_spec(Seed seed);

SceneDescription sample_scene(const DatasetSpec& spec, ImageId image_id, Seed seed,
                              const RenderConfig& cfg = RenderConfig::for_resolution(64));

RgbImage render(const SceneDescription& scene, const RenderConfig& cfg);

std::vector<ValueAssignment> compute_meta_attributes(const SceneDescription& scene,
                                                     const RenderConfig& cfg);

bool label_of(const SceneDescription& scene);

/// 8-bit RGB PNG.
void write_png(const RgbImage& image, const std::string& path);

}  // namespace spotcheck
