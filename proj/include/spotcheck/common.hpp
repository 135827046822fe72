#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace spotcheck {

using ImageId = std::int64_t;

/// Sorted, duplicate-free list of image ids.
using ImageSet = std::vector<ImageId>;

enum class ErrorKind {
  PlacementFailure,
  GeometryError,
  InfeasibleSpec,
  GenerationExhausted,
  DivergenceError,
  NumericalError,
  DegenerateInput,
  DimensionMismatch,
  EmptyHypothesis,
  EmptyTruth,
  UnverifiedEC,
  ImportFormatError,
  InvalidArgument,
  IoError,
};

const char* to_string(ErrorKind kind);

/// True for the kinds reported as numerical failures (CLI exit code 3).
bool is_numerical(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

inline void require(bool cond, ErrorKind kind, const std::string& what) {
  if (!cond) fail(kind, what);
}

inline ImageSet make_image_set(std::vector<ImageId> ids) {
  std::sort(ids.begin(), ids.end());
  ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
  return ids;
}

std::size_t intersection_size(std::span<const ImageId> a, std::span<const ImageId> b);
ImageSet set_union(std::span<const ImageId> a, std::span<const ImageId> b);
ImageSet set_intersection(std::span<const ImageId> a, std::span<const ImageId> b);
bool contains(std::span<const ImageId> set, ImageId id);

}  // namespace spotcheck
