#include "spotcheck/rng.hpp"

#include <cmath>
#include <iterator>
#include <limits>
#include <numbers>

#include "spotcheck/common.hpp"

namespace spotcheck {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Seed derive_seed(Seed base, std::uint64_t stream) {
  return splitmix64(splitmix64(base) ^ splitmix64(stream + 0x632BE59BD9B4E019ULL));
}

std::uint64_t Rng::index(std::uint64_t n) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t r = next();
  while (r >= limit) r = next();
  return r % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::PlacementFailure: return "PlacementFailure";
    case ErrorKind::GeometryError: return "GeometryError";
    case ErrorKind::InfeasibleSpec: return "InfeasibleSpec";
    case ErrorKind::GenerationExhausted: return "GenerationExhausted";
    case ErrorKind::DivergenceError: return "DivergenceError";
    case ErrorKind::NumericalError: return "NumericalError";
    case ErrorKind::DegenerateInput: return "DegenerateInput";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::EmptyHypothesis: return "EmptyHypothesis";
    case ErrorKind::EmptyTruth: return "EmptyTruth";
    case ErrorKind::UnverifiedEC: return "UnverifiedEC";
    case ErrorKind::ImportFormatError: return "ImportFormatError";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::IoError: return "IoError";
  }
  return "Unknown";
}

bool is_numerical(ErrorKind kind) {
  return kind == ErrorKind::DivergenceError || kind == ErrorKind::NumericalError ||
         kind == ErrorKind::DegenerateInput;
}

std::size_t intersection_size(std::span<const ImageId> a, std::span<const ImageId> b) {
  std::size_t count = 0;
  auto ia = a.begin();
  auto ib = b.begin();
  while (ia != a.end() && ib != b.end()) {
    if (*ia < *ib) {
      ++ia;
    } else if (*ib < *ia) {
      ++ib;
    } else {
      ++count;
      ++ia;
      ++ib;
    }
  }
  return count;
}

ImageSet set_union(std::span<const ImageId> a, std::span<const ImageId> b) {
  ImageSet out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

ImageSet set_intersection(std::span<const ImageId> a, std::span<const ImageId> b) {
  ImageSet out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

bool contains(std::span<const ImageId> set, ImageId id) {
  return std::binary_search(set.begin(), set.end(), id);
}

}  // namespace spotcheck
