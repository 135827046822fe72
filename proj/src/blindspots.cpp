#include <algorithm>
#include <map>

#include "spotcheck/blindspots.hpp"

namespace spotcheck {

int BlindspotSpec::value_of(AttributeKey key, int missing) const {
  for (const auto& t : triplets) {
    if (t.key == key) return t.value;
  }
  return missing;
}

bool matches(const BlindspotSpec& b, const SceneDescription& scene) {
  return std::all_of(b.triplets.begin(), b.triplets.end(),
                     [&](const ValueAssignment& t) { return scene.has(t); });
}

bool matches(const BlindspotSpec& b, const DiscreteScene& scene) {
  return std::all_of(b.triplets.begin(), b.triplets.end(), [&](const ValueAssignment& t) {
    return std::find(scene.triplets.begin(), scene.triplets.end(), t) != scene.triplets.end();
  });
}

bool is_feasible(const BlindspotSpec& b) {
  for (const auto& t : b.triplets) {
    if (!is_object_layer(t.key.layer) || t.key.attribute == Attribute::Presence) continue;
    if (b.value_of({t.key.layer, Attribute::Presence}) != 1) return false;
  }
  return true;
}

bool ambiguity_ok(const BlindspotSpec& a, const BlindspotSpec& b) {
  int differing = 0;
  for (const auto& ta : a.triplets) {
    for (const auto& tb : b.triplets) {
      if (ta.key == tb.key && ta.value != tb.value) ++differing;
    }
  }
  return differing >= 2;
}

void validate(const BlindspotSpec& b, const DatasetSpec& dataset) {
  auto bad = [&](const std::string& why) {
    fail(ErrorKind::InvalidArgument, "blindspot " + std::to_string(b.id) + ": " + why);
  };
  for (std::size_t i = 0; i < b.triplets.size(); ++i) {
    const auto& t = b.triplets[i];
    if (!dataset.is_rollable(t.key) && !is_meta_attribute(t.key)) bad(to_string(t) + " is not rollable");
    for (std::size_t j = 0; j < i; ++j) {
      if (b.triplets[j].key == t.key) bad("duplicate key in " + to_string(t));
    }
    const bool ok_value = is_meta_attribute(t.key) ? (t.value >= -1 && t.value <= 1)
                                                   : (t.value == 0 || t.value == 1);
    if (!ok_value) bad("value out of range in " + to_string(t));
  }
  if (!is_feasible(b)) bad("violates the feasibility constraint");
}

void validate(const BlindspotSet& set) {
  for (const auto& b : set.blindspots) validate(b, set.dataset);
  for (std::size_t i = 0; i < set.blindspots.size(); ++i) {
    for (std::size_t j = i + 1; j < set.blindspots.size(); ++j) {
      if (!ambiguity_ok(set.blindspots[i], set.blindspots[j]))
        fail(ErrorKind::InvalidArgument, "blindspots " + std::to_string(set.blindspots[i].id) +
                                             " and " + std::to_string(set.blindspots[j].id) +
                                             " violate the ambiguity constraint");
    }
  }
}

BlindspotSpec sample_blindspot(const DatasetSpec& spec, BlindspotSizeRange size_range, Seed seed) {
  Rng rng(seed);
  const int target = rng.uniform_int(size_range.min, size_range.max);

  // Keys usable per layer: rollable keys plus the meta-attribute.
  std::map<Layer, std::vector<Attribute>> usable;
  for (const auto& key : spec.rollable) usable[key.layer].push_back(key.attribute);
  usable[Layer::Background].push_back(Attribute::RelativePosition);

  // Blindspots describe positives: the square layer enters first with Presence=True.
  std::map<AttributeKey, int> chosen;
  chosen[{Layer::Square, Attribute::Presence}] = 1;

  while (static_cast<int>(chosen.size()) < target) {
    std::vector<Layer> open;
    for (const auto& [layer, attrs] : usable) {
      if (std::any_of(attrs.begin(), attrs.end(),
                      [&, l = layer](Attribute a) { return !chosen.count({l, a}); }))
        open.push_back(layer);
    }
    if (open.empty())
      fail(ErrorKind::InfeasibleSpec, "dataset cannot supply " + std::to_string(target) + " triplets");

    const Layer layer = rng.pick(open);
    const AttributeKey presence{layer, Attribute::Presence};
    if (is_object_layer(layer) && !chosen.count(presence)) {
      chosen[presence] = rng.coin() ? 1 : 0;
      continue;
    }
    std::vector<Attribute> remaining;
    for (Attribute a : usable[layer]) {
      if (!chosen.count({layer, a})) remaining.push_back(a);
    }
    const AttributeKey key{layer, rng.pick(remaining)};
    chosen[key] = rng.coin() ? 1 : 0;  // RelativePosition draws from {0,1} as well
    if (is_object_layer(layer)) chosen[presence] = 1;
  }

  BlindspotSpec b;
  for (const auto& [key, value] : chosen) b.triplets.push_back({key, value});
  return b;
}

BlindspotSet sample_blindspot_set(const DatasetSpec& spec, int m, Seed seed,
                                  BlindspotSizeRange size_range) {
  require(m >= 1, ErrorKind::InvalidArgument, "blindspot count must be positive");
  BlindspotSet set;
  set.dataset = spec;
  Rng rng(seed);
  for (int attempt = 0; attempt < kBlindspotSetAttempts; ++attempt) {
    auto candidate = sample_blindspot(spec, size_range, rng.next());
    const bool ok = std::all_of(set.blindspots.begin(), set.blindspots.end(),
                                [&](const BlindspotSpec& b) { return ambiguity_ok(b, candidate); });
    if (!ok) continue;
    candidate.id = static_cast<int>(set.blindspots.size());
    set.blindspots.push_back(std::move(candidate));
    if (static_cast<int>(set.blindspots.size()) == m) return set;
  }
  fail(ErrorKind::GenerationExhausted,
       "no ambiguity-safe set of " + std::to_string(m) + " blindspots after " +
           std::to_string(kBlindspotSetAttempts) + " attempts");
}

std::vector<DiscreteScene> enumerate_scene_space(const DatasetSpec& spec) {
  const auto n = spec.rollable.size();
  std::vector<DiscreteScene> out;
  for (std::uint64_t bits = 0; bits < (1ULL << n); ++bits) {
    DiscreteScene s;
    bool square = false;
    for (std::size_t k = 0; k < n; ++k) {
      const int v = static_cast<int>((bits >> k) & 1U);
      s.triplets.push_back({spec.rollable[k], v});
      if (spec.rollable[k] == AttributeKey{Layer::Square, Attribute::Presence} && v == 1) square = true;
    }
    if (!square) {
      s.triplets.push_back({kRelativePosition, -1});
      out.push_back(std::move(s));
      continue;
    }
    for (int rel : {0, 1}) {
      auto copy = s;
      copy.triplets.push_back({kRelativePosition, rel});
      out.push_back(std::move(copy));
    }
  }
  return out;
}

int count_nested_pairs(const BlindspotSet& set) {
  const auto space = enumerate_scene_space(set.dataset);
  const auto m = set.blindspots.size();
  std::vector<std::vector<bool>> member(m, std::vector<bool>(space.size()));
  for (std::size_t b = 0; b < m; ++b) {
    for (std::size_t s = 0; s < space.size(); ++s) member[b][s] = matches(set.blindspots[b], space[s]);
  }
  int nested = 0;
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      if (a == b) continue;
      bool subset = true;
      for (std::size_t s = 0; s < space.size() && subset; ++s) {
        if (member[a][s] && !member[b][s]) subset = false;
      }
      if (subset) ++nested;
    }
  }
  return nested;
}

}  // namespace spotcheck
