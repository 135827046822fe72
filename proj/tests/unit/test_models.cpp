#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "spotcheck/models.hpp"

using namespace spotcheck;

namespace {

BlindspotSet one_blindspot(Seed seed) {
  for (Seed s = seed;; ++s) {
    try {
      const auto spec = sample_dataset_spec(s);
      return sample_blindspot_set(spec, 1, derive_seed(s, 1));
    } catch (const Error&) {
    }
  }
}

std::vector<SceneDescription> scenes_for(const DatasetSpec& spec, int n, Seed seed, int resolution = 64) {
  std::vector<SceneDescription> out;
  const auto cfg = RenderConfig::for_resolution(resolution);
  for (int i = 0; i < n; ++i) out.push_back(sample_scene(spec, i, derive_seed(seed, static_cast<std::uint64_t>(i)), cfg));
  return out;
}

template <class Net>
double batch_loss(const Net& net, const std::vector<typename Net::Matrix>& xs, const std::vector<bool>& ys, int side) {
  double total = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double z = net.forward(xs[i], side, side, nullptr, nullptr);
    total += Net::softplus(z) - (ys[i] ? z : 0.0);
  }
  return total / static_cast<double>(xs.size());
}

void check_gradients(const ConvArchitecture& arch, Seed seed) {
  using Net = ConvNet<double>;
  Rng rng(seed);
  Net net(3, arch, rng);
  const int side = 8;
  std::vector<Net::Matrix> xs;
  std::vector<bool> ys{true, false, true, false};
  for (int i = 0; i < 4; ++i) {
    Net::Matrix x(3, side * side);
    for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = rng.normal();
    xs.push_back(x);
  }
  Net::Params grad = net.params();
  grad.set_zero();
  for (std::size_t i = 0; i < xs.size(); ++i) net.accumulate(xs[i], side, side, ys[i], grad, 0.25);
  const Net::Vector analytic = grad.flatten();
  const Net::Vector theta = net.params().flatten();
  const double h = 1e-6;
  double worst = 0.0;
  for (Eigen::Index k = 0; k < theta.size(); ++k) {
    Net::Vector t = theta;
    t(k) += h;
    net.params().assign(t);
    const double up = batch_loss(net, xs, ys, side);
    t(k) -= 2 * h;
    net.params().assign(t);
    const double down = batch_loss(net, xs, ys, side);
    const double numeric = (up - down) / (2 * h);
    const double scale = std::max({std::abs(numeric), std::abs(analytic(k)), 1e-7});
    worst = std::max(worst, std::abs(numeric - analytic(k)) / scale);
  }
  net.params().assign(theta);
  CHECK(worst < 1e-4);
}

}  // namespace

TEST_CASE("induce_labels flips inside blindspots only and is an involution") {
  const auto set = one_blindspot(17);
  const auto scenes = scenes_for(set.dataset, 400, 3);
  const auto train = induce_labels(scenes, set, SplitTag::Train);
  const auto test = induce_labels(scenes, set, SplitTag::Test);
  int flipped = 0;
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    const bool inside = matches(set.blindspots[0], scenes[i]);
    REQUIRE(train.clean_labels[i] == label_of(scenes[i]));
    REQUIRE(train.training_labels[i] == (train.clean_labels[i] != inside));
    REQUIRE(test.training_labels[i] == test.clean_labels[i]);
    flipped += inside;
  }
  const auto twice = induce_labels(train, set);
  CHECK(twice.training_labels == train.clean_labels);
  const auto clean = induce_labels(scenes, BlindspotSet{{}, set.dataset}, SplitTag::Train);
  CHECK(clean.training_labels == clean.clean_labels);
  (void)flipped;
}

TEST_CASE("oracle model construction") {
  const auto set = one_blindspot(21);
  const auto scenes = scenes_for(set.dataset, 300, 4);
  const auto cfg = RenderConfig::for_resolution(64);
  const auto exact = oracle_model(set, {0.0, 0.0, 0.0}, 9).outputs(scenes, cfg);
  for (Eigen::Index i = 0; i < exact.confidences.size(); ++i) {
    const double c = exact.confidences(i);
    REQUIRE((c == 0.0 || c == 1.0));
    for (Eigen::Index k = 0; k + 1 < exact.representations.cols(); ++k)
      REQUIRE(std::abs(exact.representations(i, k)) == 1.0);
  }
  auto split = induce_labels(scenes, set, SplitTag::Val);
  const auto report = verify_induction(exact, split, set, {});
  CHECK(report.accuracy_outside == 1.0);
  CHECK(report.accuracy_inside[0] == 0.0);
  CHECK(report.verified[0]);

  // Row order follows the input order.
  auto reversed = scenes;
  std::reverse(reversed.begin(), reversed.end());
  const auto model = oracle_model(set, {0.0, 0.05, 0.0}, 9);
  const auto fwd = model.outputs(scenes, cfg), rev = model.outputs(reversed, cfg);
  const auto n = fwd.representations.rows();
  for (Eigen::Index i = 0; i < n; ++i) REQUIRE(fwd.representations.row(i) == rev.representations.row(n - 1 - i));

  // With jitter, same-pattern points are closer than different-pattern points.
  double within = 0.0, across = 1e9;
  for (Eigen::Index i = 0; i < std::min<Eigen::Index>(n, 120); ++i)
    for (Eigen::Index j = i + 1; j < std::min<Eigen::Index>(n, 120); ++j) {
      const double dist = (fwd.representations.row(i) - fwd.representations.row(j)).norm();
      if (scenes[static_cast<std::size_t>(i)].triplets == scenes[static_cast<std::size_t>(j)].triplets)
        within = std::max(within, dist);
      else
        across = std::min(across, dist);
    }
  CHECK(within < across);
}

TEST_CASE("verify_induction thresholds") {
  // Real-data mode: outside recall 0.9, inside recall 0.75 is a gap of 0.15.
  DatasetSpec spec;
  spec.layers = {Layer::Background, Layer::Square};
  spec.rollable = {{Layer::Square, Attribute::Presence}, {Layer::Background, Attribute::Color}};
  BlindspotSpec b;
  b.triplets = {{{Layer::Background, Attribute::Color}, 1}, {{Layer::Square, Attribute::Presence}, 1}};
  std::sort(b.triplets.begin(), b.triplets.end());
  const BlindspotSet set{{b}, spec};
  LabeledSplit val;
  ModelOutputs out;
  std::vector<double> conf;
  auto add = [&](int grey, bool hit) {
    SceneDescription s;
    s.image_id = static_cast<ImageId>(val.scenes.size());
    s.triplets = {{{Layer::Background, Attribute::Color}, grey}, {{Layer::Square, Attribute::Presence}, 1}};
    val.scenes.push_back(s);
    val.clean_labels.push_back(true);
    val.training_labels.push_back(true);
    out.image_ids.push_back(s.image_id);
    conf.push_back(hit ? 0.9 : 0.1);
  };
  for (int i = 0; i < 20; ++i) add(0, i < 18);
  for (int i = 0; i < 20; ++i) add(1, i < 15);
  out.confidences = Eigen::Map<Eigen::VectorXd>(conf.data(), static_cast<Eigen::Index>(conf.size()));
  out.representations = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(conf.size()), 2);
  InductionThresholds real;
  real.real_data = true;
  const auto r = verify_induction(out, val, set, real);
  CHECK(r.recall_outside == doctest::Approx(0.9));
  CHECK(r.recall_inside[0] == doctest::Approx(0.75));
  CHECK_FALSE(r.verified[0]);
  real.recall_gap = 0.1;
  CHECK(verify_induction(out, val, set, real).verified[0]);
}

TEST_CASE("convnet gradients match central differences") {
  SUBCASE("average pooling, linear head") { check_gradients({{2, 3}, {}, GlobalPooling::Average, false}, 1); }
  SUBCASE("max pooling, hidden layer") { check_gradients({{2, 3}, {4}, GlobalPooling::Max, false}, 2); }
  SUBCASE("three blocks") { check_gradients({{2, 2, 3}, {3}, GlobalPooling::Average, false}, 3); }
}

TEST_CASE("outputs CSV round trip") {
  ModelOutputs o;
  o.image_ids = {4, 9, 12};
  o.representations = Eigen::MatrixXd::Random(3, 2);
  o.confidences = Eigen::Vector3d(0.1, 0.5, 1.0);
  const auto path = (std::filesystem::temp_directory_path() / "spotcheck_outputs_test.csv").string();
  write_outputs_csv(o, path);
  const auto back = read_outputs_csv(path);
  CHECK(back.image_ids == o.image_ids);
  CHECK(back.representations.isApprox(o.representations, 1e-15));
  CHECK(back.confidences == o.confidences);
  o.confidences(0) = 1.5;
  CHECK_THROWS_AS(validate(o), Error);
}

TEST_CASE("training: separable task, reproducibility, and a model that ignores blindspots") {
  // Background colour decides the label; a blindspot is defined but never induced.
  const auto set = one_blindspot(33);
  DatasetSpec spec = set.dataset;
  const AttributeKey bg{Layer::Background, Attribute::Color};
  if (!spec.is_rollable(bg)) {
    spec.rollable.push_back(bg);
    std::sort(spec.rollable.begin(), spec.rollable.end());
  }
  auto make = [&](int n, Seed seed, SplitTag tag) {
    LabeledSplit s;
    s.tag = tag;
    s.scenes = scenes_for(spec, n, seed, 64);
    for (const auto& sc : s.scenes) {
      s.clean_labels.push_back(sc.value_of(bg) == 1);
      s.training_labels.push_back(sc.value_of(bg) == 1);
    }
    return s;
  };
  const auto train = make(600, 1, SplitTag::Train);
  const auto val = make(200, 2, SplitTag::Val);
  TrainConfig cfg;
  cfg.architecture = {{4, 8, 8}, {}, GlobalPooling::Average, false};
  cfg.epochs = 3;
  cfg.batch_size = 32;
  const auto model = train_classifier(train, val, cfg, 5);
  const auto again = train_classifier(train, val, cfg, 5);
  REQUIRE(model.history.size() == 3);
  // selected_epoch counts from 1.
  REQUIRE(model.selected_epoch >= 1);
  CHECK(model.selected_epoch == again.selected_epoch);
  const auto best = model.history[static_cast<std::size_t>(model.selected_epoch - 1)];
  CHECK(best.val_loss == again.history[static_cast<std::size_t>(again.selected_epoch - 1)].val_loss);
  CHECK(best.val_accuracy >= 0.99);

  const auto outs = model.outputs(val.scenes, RenderConfig::for_resolution(64));
  for (Eigen::Index i = 0; i < outs.confidences.size(); ++i) {
    REQUIRE(outs.confidences(i) >= 0.0);
    REQUIRE(outs.confidences(i) <= 1.0);
  }
  CHECK(outs.representations.cols() == model.representation_dim());

  // Clean labels everywhere: against a real blindspot, inside ~ outside.
  BlindspotSpec probe;
  probe.triplets = {{bg, 1}};
  const BlindspotSet probe_set{{probe}, spec};
  const auto r = verify_induction(outs, val, probe_set, {});
  CHECK_FALSE(r.verified[0]);
  CHECK(std::abs(r.accuracy_inside[0] - r.accuracy_outside) < 0.05);
}
