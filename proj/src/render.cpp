#include <array>

#include "spotcheck/scenegen.hpp"

namespace spotcheck {

namespace {

// 5x7 glyphs, one row per string, '#' = ink.
constexpr std::array<const char*, 7> kGlyphT{"#####", "..#..", "..#..", "..#..",
                                             "..#..", "..#..", "..#.."};
constexpr std::array<const char*, 7> kGlyphX{"#...#", "#...#", ".#.#.", "..#..",
                                             ".#.#.", "#...#", "#...#"};

constexpr int kGlyphWidth = 5;
constexpr int kGlyphHeight = 7;
constexpr int kTextColumns = 3 * kGlyphWidth + 2;  // "TXT" with 1-column gaps

bool text_ink(int col, int row) {
  const int glyph = col / (kGlyphWidth + 1);
  const int within = col % (kGlyphWidth + 1);
  if (within == kGlyphWidth) return false;
  const auto& bitmap = glyph == 1 ? kGlyphX : kGlyphT;
  return bitmap[static_cast<std::size_t>(row)][within] == '#';
}

Rgb mix(Rgb a, Rgb b) {
  return {static_cast<std::uint8_t>((a.r + b.r) / 2), static_cast<std::uint8_t>((a.g + b.g) / 2),
          static_cast<std::uint8_t>((a.b + b.b) / 2)};
}

bool covers(Layer layer, int i, int j, int w, int h) {
  switch (layer) {
    case Layer::Circle: {
      // Pixel centers inside the inscribed disk, in doubled integer coordinates.
      const long dx = 2L * i + 1 - w;
      const long dy = 2L * j + 1 - h;
      const long d = std::min(w, h);
      return dx * dx + dy * dy <= d * d;
    }
    case Layer::Text:
      return text_ink(i * kTextColumns / w, j * kGlyphHeight / h);
    default:
      return true;
  }
}

}  // namespace

RgbImage render(const SceneDescription& scene, const RenderConfig& cfg) {
  validate(cfg);
  const int res = cfg.resolution;
  RgbImage img{res, res, std::vector<std::uint8_t>(static_cast<std::size_t>(res) * res * 3)};

  const Rgb base = scene.value_of({Layer::Background, Attribute::Color}) == 1 ? cfg.grey : cfg.white;
  const bool noisy = scene.value_of({Layer::Background, Attribute::Texture}) == 1;
  Rng noise(derive_seed(scene.seed, 0x5A17));
  for (int y = 0; y < res; ++y) {
    for (int x = 0; x < res; ++x) {
      Rgb c = base;
      if (noisy) {
        const double u = noise.uniform();
        if (u < cfg.noise_fraction) {
          c = cfg.black;
        } else if (u < 2.0 * cfg.noise_fraction) {
          c = cfg.white;
        }
      }
      img.set(x, y, c);
    }
  }

  for (const auto& p : scene.placements) {
    if (p.x < 0 || p.y < 0 || p.x + p.width > res || p.y + p.height > res)
      fail(ErrorKind::GeometryError, std::string(to_string(p.layer)) + " placement exceeds the frame");
    const Rgb color = scene.value_of({p.layer, Attribute::Color}) == 1 ? cfg.orange : cfg.blue;
    const bool striped = scene.value_of({p.layer, Attribute::Texture}) == 1;
    const Rgb secondary = mix(color, base);
    for (int j = 0; j < p.height; ++j) {
      for (int i = 0; i < p.width; ++i) {
        if (!covers(p.layer, i, j, p.width, p.height)) continue;
        const bool alt = striped && (i / cfg.stripe_width) % 2 == 1;
        img.set(p.x + i, p.y + j, alt ? secondary : color);
      }
    }
  }
  return img;
}

}  // namespace spotcheck
