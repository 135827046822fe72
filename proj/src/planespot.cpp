#include <algorithm>
#include <numeric>
#include <sstream>

#include "spotcheck/cluster.hpp"

namespace spotcheck {

PlaneSpotFeatures build_features(const Eigen::MatrixXd& sbar, const Eigen::VectorXd& confidence, double weight) {
  require(sbar.cols() == 2, ErrorKind::DimensionMismatch, "embedding must have two columns");
  require(sbar.rows() == confidence.size(), ErrorKind::DimensionMismatch,
          "embedding and confidence row counts differ");
  PlaneSpotFeatures f;
  f.weight = weight;
  f.r.resize(sbar.rows(), 3);
  f.r.leftCols(2) = sbar;
  f.r.col(2) = weight * confidence;
  return f;
}

HypothesisList rank_clusters(const std::vector<int>& assignments, int k, const std::vector<ImageId>& image_ids,
                             const Eigen::VectorXd& confidence, double error_threshold) {
  require(assignments.size() == image_ids.size() &&
              static_cast<Eigen::Index>(assignments.size()) == confidence.size(),
          ErrorKind::DimensionMismatch, "assignment, id and confidence lengths differ");
  struct Cluster {
    int index = 0;
    std::vector<ImageId> members;
    std::size_t errors = 0;
    double importance = 0.0;
  };
  std::vector<Cluster> clusters(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    auto& c = clusters[static_cast<std::size_t>(assignments[i])];
    c.members.push_back(image_ids[i]);
    if (confidence(static_cast<Eigen::Index>(i)) < error_threshold) ++c.errors;
  }
  for (int c = 0; c < k; ++c) clusters[static_cast<std::size_t>(c)].index = c;
  std::erase_if(clusters, [](const Cluster& c) { return c.members.empty(); });
  for (auto& c : clusters) {
    const auto e = static_cast<double>(c.errors);
    c.importance = (e / static_cast<double>(c.members.size())) * e;
  }
  std::stable_sort(clusters.begin(), clusters.end(), [](const Cluster& a, const Cluster& b) {
    if (a.importance != b.importance) return a.importance > b.importance;
    return a.members.size() > b.members.size();
  });
  HypothesisList out;
  for (auto& c : clusters) out.push_back({c.importance, make_image_set(std::move(c.members))});
  return out;
}

std::string describe(const PlaneSpotConfig& cfg) {
  std::ostringstream s;
  s.precision(17);
  s << "planespot;w=" << cfg.weight << ";k_max=" << cfg.k_max << ";k_return=" << cfg.k_return
    << ";err=" << cfg.error_threshold << ";drop0=" << cfg.drop_zero_importance
    << ";reducer=" << (cfg.reducer == ReducerKind::Pca ? "pca" : "parametric");
  if (cfg.reducer == ReducerKind::Parametric) {
    const auto& r = cfg.reducer_config;
    s << ";perp=" << r.perplexity << ";hidden=";
    for (int h : r.hidden) s << h << ',';
    s << ";lrec=" << r.reconstruction_weight << ";epochs=" << r.epochs << ";batch=" << r.batch_size
      << ";lr=" << r.learning_rate;
  }
  s << ";gmm=" << cfg.gmm.max_iterations << ',' << cfg.gmm.tolerance << ',' << cfg.gmm.restarts << ','
    << cfg.gmm.variance_floor;
  return s.str();
}

PlaneSpotResult planespot(const ModelOutputs& outputs, const PlaneSpotConfig& cfg, Seed seed) {
  validate(outputs);
  const auto n = static_cast<Eigen::Index>(outputs.image_ids.size());
  require(n >= 2, ErrorKind::InvalidArgument, "PlaneSpot needs at least two images");

  PlaneSpotResult result;
  if (cfg.reducer == ReducerKind::Pca) {
    result.embedding = reduce_pca2(outputs.representations);
  } else {
    const Reducer reducer = fit_reducer(outputs.representations, cfg.reducer_config, derive_seed(seed, 1));
    result.embedding = reducer.embed(outputs.representations);
  }
  result.features = build_features(result.embedding.normalized, outputs.confidences, cfg.weight);

  const int k_max = static_cast<int>(std::min<Eigen::Index>(cfg.k_max, n - 1));
  auto selection = select_k_bic(result.features.r, k_max, derive_seed(seed, 2), cfg.gmm);
  result.selected_k = selection.best.k;
  result.bic_by_k = std::move(selection.bic_by_k);

  result.all = rank_clusters(selection.best.hard_assignments(), selection.best.k, outputs.image_ids,
                             outputs.confidences, cfg.error_threshold);
  if (cfg.drop_zero_importance) {
    std::erase_if(result.all, [](const Hypothesis& h) { return h.importance == 0.0; });
  }
  result.top = truncate(result.all, cfg.k_return);
  return result;
}

}  // namespace spotcheck
