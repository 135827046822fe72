#pragma once

#include <vector>

#include "spotcheck/scenegen.hpp"

namespace spotcheck {

struct BlindspotSpec {
  std::vector<ValueAssignment> triplets;  // sorted by key, keys unique
  int id = 0;

  int value_of(AttributeKey key, int missing = -2) const;
  bool has_key(AttributeKey key) const { return value_of(key) != -2; }
};

struct BlindspotSet {
  std::vector<BlindspotSpec> blindspots;
  DatasetSpec dataset;
};

struct BlindspotSizeRange {
  int min = 5;
  int max = 7;
};

/// Subset test: every triplet of `b` is in the scene's triplet list.
bool matches(const BlindspotSpec& b, const SceneDescription& scene);

/// Feasibility: a non-Presence attribute of an object layer forces that layer's Presence=True.
bool is_feasible(const BlindspotSpec& b);

/// Pairwise ambiguity check: at least two shared keys with differing values.
bool ambiguity_ok(const BlindspotSpec& a, const BlindspotSpec& b);

/// Keys must be rollable in `dataset` or meta-attributes; throws InvalidArgument otherwise.
void validate(const BlindspotSpec& b, const DatasetSpec& dataset);
void validate(const BlindspotSet& set);

BlindspotSpec sample_blindspot(const DatasetSpec& spec, BlindspotSizeRange size_range, Seed seed);

inline constexpr int kBlindspotSetAttempts = 10000;

BlindspotSet sample_blindspot_set(const DatasetSpec& spec, int m, Seed seed,
                                  BlindspotSizeRange size_range = {});

/// One point of the discrete scene space: values for every rollable key plus the
/// RelativePosition meta-attribute.
struct DiscreteScene {
  std::vector<ValueAssignment> triplets;
};

/// All attribute combinations of the dataset. RelativePosition ranges over {0,1}
/// when a square is present and is -1 otherwise.
std::vector<DiscreteScene> enumerate_scene_space(const DatasetSpec& spec);

bool matches(const BlindspotSpec& b, const DiscreteScene& scene);

/// Brute-force extensional check: no blindspot's image set is nested inside another's.
/// Returns the number of nested ordered pairs found.
int count_nested_pairs(const BlindspotSet& set);

}  // namespace spotcheck
