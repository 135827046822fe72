#include <doctest.h>

#include <cmath>
#include <map>
#include <queue>

#include "spotcheck/scenegen.hpp"

using namespace spotcheck;

namespace {

DatasetSpec square_only() {
  DatasetSpec spec;
  spec.layers = {Layer::Background, Layer::Square};
  spec.rollable = {{Layer::Square, Attribute::Presence}};
  return spec;
}

SceneDescription scene_with(std::vector<ValueAssignment> triplets, std::vector<Placement> placements,
                            const RenderConfig& cfg) {
  SceneDescription s;
  s.triplets = std::move(triplets);
  s.placements = std::move(placements);
  for (const auto& m : compute_meta_attributes(s, cfg)) s.triplets.push_back(m);
  return s;
}

}  // namespace

TEST_CASE("dataset specs satisfy their invariants and |rollable| is uniform over 6..8") {
  std::map<std::size_t, int> sizes;
  const int n = 10000;
  for (int s = 0; s < n; ++s) {
    const auto spec = sample_dataset_spec(derive_seed(42, static_cast<std::uint64_t>(s)));
    CHECK_NOTHROW(validate(spec));
    REQUIRE(spec.has_layer(Layer::Background));
    REQUIRE(spec.has_layer(Layer::Square));
    for (Layer l : spec.layers) {
      if (is_object_layer(l)) REQUIRE(spec.is_rollable({l, Attribute::Presence}));
    }
    REQUIRE_FALSE(spec.is_rollable(kRelativePosition));
    sizes[spec.rollable.size()]++;
  }
  CHECK(sizes.size() == 3);
  const double p = 1.0 / 3.0, sd = std::sqrt(n * p * (1 - p));
  for (std::size_t k = 6; k <= 8; ++k) CHECK(std::abs(sizes[k] - n * p) < 3 * sd);
}

TEST_CASE("sample_scene: square-only spec yields presence plus the meta triplet") {
  const auto spec = square_only();
  const auto cfg = RenderConfig::for_resolution(64);
  const auto a = sample_scene(spec, 7, 99, cfg);
  const auto b = sample_scene(spec, 7, 99, cfg);
  REQUIRE(a.triplets.size() == 2);
  CHECK(a.triplets[0].key == AttributeKey{Layer::Square, Attribute::Presence});
  CHECK(a.triplets[1].key == kRelativePosition);
  CHECK(a.triplets == b.triplets);
  CHECK(a.placements.size() == b.placements.size());

  int present = 0;
  const int n = 10000;
  for (int i = 0; i < n; ++i) present += label_of(sample_scene(spec, i, derive_seed(5, static_cast<std::uint64_t>(i)), cfg));
  CHECK(std::abs(present - n / 2.0) < 3 * std::sqrt(n * 0.25));
}

TEST_CASE("rendering: single blue square on white") {
  const auto cfg = RenderConfig::for_resolution(64);
  const int side = cfg.square.normal_width;
  const auto scene = scene_with({{{Layer::Square, Attribute::Presence}, 1}},
                                {{Layer::Square, 10, 20, side, side}}, cfg);
  const auto img = render(scene, cfg);
  int blue = 0, white = 0;
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.at(x, y) == cfg.blue) ++blue;
      if (img.at(x, y) == cfg.white) ++white;
    }
  CHECK(blue == side * side);
  CHECK(white == 64 * 64 - side * side);
  CHECK(render(scene, cfg).pixels == img.pixels);
}

TEST_CASE("rendering: no objects gives pure background") {
  const auto cfg = RenderConfig::for_resolution(64);
  const auto scene = scene_with({{{Layer::Background, Attribute::Color}, 1}}, {}, cfg);
  const auto img = render(scene, cfg);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) REQUIRE(img.at(x, y) == cfg.grey);
}

TEST_CASE("rendering: striped circle alternates columns") {
  const auto cfg = RenderConfig::for_resolution(112);  // stripe width 2
  REQUIRE(cfg.stripe_width == 2);
  const int d = cfg.circle.normal_width;
  const auto scene = scene_with({{{Layer::Circle, Attribute::Presence}, 1}, {{Layer::Circle, Attribute::Texture}, 1}},
                                {{Layer::Circle, 5, 5, d, d}}, cfg);
  const auto img = render(scene, cfg);
  const Rgb secondary{static_cast<std::uint8_t>((cfg.blue.r + 255) / 2), static_cast<std::uint8_t>((cfg.blue.g + 255) / 2),
                      static_cast<std::uint8_t>((cfg.blue.b + 255) / 2)};
  const int row = 5 + d / 2;
  for (int i = 0; i < d; ++i) {
    const Rgb c = img.at(5 + i, row);
    if (c == cfg.white) continue;  // outside the disk at the row's ends
    CHECK(c == ((i / 2) % 2 == 1 ? secondary : cfg.blue));
  }
}

TEST_CASE("meta attribute: relative position of the square") {
  const auto cfg = RenderConfig::for_resolution(64);
  const int side = cfg.square.normal_width;  // 16
  auto rp = [&](int y) {
    SceneDescription s;
    s.placements = {{Layer::Square, 0, y, side, side}};
    return compute_meta_attributes(s, cfg).front().value;
  };
  CHECK(rp(16 - side / 2) == 1);      // centred at row 16 = resolution/4
  CHECK(rp(32 - side / 2) == 0);      // centred on the centreline
  CHECK(rp(32 - side / 2 - 1) == 1);
  SceneDescription none;
  CHECK(compute_meta_attributes(none, cfg).front().value == -1);
}

TEST_CASE("label_of follows square presence, also with two squares") {
  const auto cfg = RenderConfig::for_resolution(64);
  auto with_square = scene_with({{{Layer::Square, Attribute::Presence}, 1}, {{Layer::Square, Attribute::Number}, 1}},
                                {{Layer::Square, 0, 0, 16, 16}, {Layer::Square, 30, 30, 16, 16}}, cfg);
  CHECK(label_of(with_square));
  auto without = scene_with({{{Layer::Square, Attribute::Presence}, 0}}, {}, cfg);
  CHECK_FALSE(label_of(without));
}

// Connected components (4-neighbour) of object-coloured pixels; a square is a
// component that exactly fills a side x side box for one of the square sizes.
static bool has_square_component(const RgbImage& img, const RenderConfig& cfg) {
  auto object_colour = [&](Rgb c) {
    for (Rgb base : {cfg.white, cfg.grey})
      for (Rgb o : {cfg.blue, cfg.orange}) {
        const Rgb half{static_cast<std::uint8_t>((o.r + base.r) / 2), static_cast<std::uint8_t>((o.g + base.g) / 2),
                       static_cast<std::uint8_t>((o.b + base.b) / 2)};
        if (c == o || c == half) return true;
      }
    return false;
  };
  std::vector<int> seen(static_cast<std::size_t>(img.width * img.height), 0);
  for (int y0 = 0; y0 < img.height; ++y0)
    for (int x0 = 0; x0 < img.width; ++x0) {
      if (seen[static_cast<std::size_t>(y0 * img.width + x0)] || !object_colour(img.at(x0, y0))) continue;
      int count = 0, xmin = x0, xmax = x0, ymin = y0, ymax = y0;
      std::queue<std::pair<int, int>> q;
      q.push({x0, y0});
      seen[static_cast<std::size_t>(y0 * img.width + x0)] = 1;
      while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop();
        ++count;
        xmin = std::min(xmin, x), xmax = std::max(xmax, x), ymin = std::min(ymin, y), ymax = std::max(ymax, y);
        const int dx[] = {1, -1, 0, 0}, dy[] = {0, 0, 1, -1};
        for (int k = 0; k < 4; ++k) {
          const int nx = x + dx[k], ny = y + dy[k];
          if (nx < 0 || ny < 0 || nx >= img.width || ny >= img.height) continue;
          auto& v = seen[static_cast<std::size_t>(ny * img.width + nx)];
          if (v || !object_colour(img.at(nx, ny))) continue;
          v = 1;
          q.push({nx, ny});
        }
      }
      const int w = xmax - xmin + 1, h = ymax - ymin + 1;
      if (w == h && count == w * h && (w == cfg.square.normal_width || w == cfg.square.small_width)) return true;
    }
  return false;
}

TEST_CASE("pixel oracle: a square component exists iff the label is true") {
  const auto cfg = RenderConfig::for_resolution(64);
  for (int s = 0; s < 1000; ++s) {
    const auto spec = sample_dataset_spec(derive_seed(11, static_cast<std::uint64_t>(s)));
    const auto scene = sample_scene(spec, s, derive_seed(12, static_cast<std::uint64_t>(s)), cfg);
    for (std::size_t a = 0; a < scene.placements.size(); ++a)
      for (std::size_t b = a + 1; b < scene.placements.size(); ++b) {
        const auto& p = scene.placements[a];
        const auto& q = scene.placements[b];
        REQUIRE_FALSE((p.x < q.x + q.width && q.x < p.x + p.width && p.y < q.y + q.height && q.y < p.y + p.height));
      }
    REQUIRE(has_square_component(render(scene, cfg), cfg) == label_of(scene));
  }
}

TEST_CASE("render config validation") {
  auto cfg = RenderConfig::for_resolution(64);
  CHECK_NOTHROW(validate(cfg));
  cfg.resolution = 16;
  CHECK_THROWS_AS(validate(cfg), Error);
  auto small = RenderConfig::for_resolution(64);
  small.square.small_width = 2;
  CHECK_THROWS_AS(validate(small), Error);
}
