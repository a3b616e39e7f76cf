#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fsad/error.hpp"
#include "fsad/protonet.hpp"
#include "support.hpp"

using namespace fsad;
using fsad::testing::ExampleStore;

namespace {

SparseFeatures one_hot(std::uint32_t dim, std::uint32_t bucket) { return {dim, {bucket}, {1.0}}; }

// B=4, H1=2, D=2 encoder mapping bucket 0 to (g, 0) and bucket 1 to (0, g).
EncoderParams axis_encoder(double g) {
  EncoderParams p(EncoderShape{4, 2, 2, false});
  p.w1_row(0)[0] = g;
  p.w1_row(1)[1] = g;
  p.w2()[0] = 1.0;  // hidden 0 -> embed 0
  p.w2()[3] = 1.0;  // hidden 1 -> embed 1
  return p;
}

Episode axis_episode(ExampleStore& store) {
  Episode ep;
  ep.support.push_back(store.add(one_hot(4, 0), kNormal));
  ep.support.push_back(store.add(one_hot(4, 1), kAnomaly));
  ep.query.push_back(store.add(one_hot(4, 1), kAnomaly));
  ep.query.push_back(store.add(one_hot(4, 0), kNormal));
  return ep;
}

Episode random_episode(ExampleStore& store, std::uint32_t dim, std::size_t n_support,
                       std::size_t n_query, Rng& rng) {
  Episode ep;
  for (std::size_t i = 0; i < n_support; ++i) {
    ep.support.push_back(store.add(fsad::testing::random_sparse(dim, 4, rng), i % 2 ? kAnomaly : kNormal));
  }
  for (std::size_t i = 0; i < n_query; ++i) {
    ep.query.push_back(store.add(fsad::testing::random_sparse(dim, 4, rng), i % 2 ? kNormal : kAnomaly));
  }
  return ep;
}

ModelSpec small_model() {
  ModelSpec m;
  m.features.n_buckets = 4096;
  m.hidden_dim = 16;
  m.embed_dim = 8;
  return m;
}

}  // namespace

TEST_CASE("prototypes are class means") {
  const std::vector<std::vector<double>> z{{0, 0}, {2, 0}, {5, -1}};
  const std::vector<int> labels{kNormal, kNormal, kAnomaly};
  const Prototypes p = compute_prototypes(z, labels);
  CHECK(p.normal == std::vector<double>{1, 0});
  CHECK(p.anomaly == std::vector<double>{5, -1});  // mean of one
  CHECK(p.n_normal == 2);
  CHECK(p.n_anomaly == 1);

  const std::vector<std::vector<double>> zp{{5, -1}, {2, 0}, {0, 0}};
  const std::vector<int> lp{kAnomaly, kNormal, kNormal};
  const Prototypes q = compute_prototypes(zp, lp);
  CHECK(q.normal == p.normal);
  CHECK(q.anomaly == p.anomaly);

  const std::vector<int> only_normal{kNormal, kNormal, kNormal};
  CHECK_THROWS_AS(compute_prototypes(z, only_normal), Error);
}

TEST_CASE("squared distance") {
  CHECK(squared_distance(std::vector<double>{1, 0}, std::vector<double>{0, 0}) == 1.0);
  CHECK(squared_distance(std::vector<double>{0.3, -2}, std::vector<double>{0.3, -2}) == 0.0);
  CHECK(squared_distance(std::vector<double>{3, 4}, std::vector<double>{0, 0}) == 25.0);
  CHECK_THROWS_AS(squared_distance(std::vector<double>{1}, std::vector<double>{1, 2}), Error);
}

TEST_CASE("equidistant query costs ln 2") {
  ExampleStore store;
  Rng rng(1);
  const Episode ep = random_episode(store, 64, 4, 6, rng);
  const EncoderParams zero(EncoderShape{64, 8, 4, false});
  Gradients g(zero.shape());
  CHECK(episode_loss_and_grads(ep, zero, g) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("loss vanishes as the prototype gap grows") {
  ExampleStore store;
  const Episode ep = axis_episode(store);
  double previous = INFINITY;
  for (double g : {0.5, 1.0, 2.0, 4.0, 6.0}) {
    const EncoderParams p = axis_encoder(g);
    Gradients grads(p.shape());
    const double loss = episode_loss_and_grads(ep, p, grads);
    CHECK(loss == doctest::Approx(softplus(-2.0 * g * g)).epsilon(1e-12));
    CHECK(loss < previous);
    previous = loss;
  }
  CHECK(previous < 1e-15);
}

TEST_CASE("loss is invariant to translating every embedding") {
  ExampleStore store;
  Rng rng(2);
  const Episode ep = random_episode(store, 64, 6, 6, rng);
  EncoderParams p = init_params(EncoderShape{64, 8, 4, false}, 3);
  Gradients g(p.shape());
  const double base = episode_loss_and_grads(ep, p, g);
  for (double& b : p.b2()) b += 7.5;
  CHECK(episode_loss_and_grads(ep, p, g) == doctest::Approx(base).epsilon(1e-10));
}

TEST_CASE("a small descent step lowers the episode loss") {
  ExampleStore store;
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const Episode ep = random_episode(store, 64, 6, 10, rng);
    EncoderParams p = init_params(EncoderShape{64, 8, 4, false}, 100 + trial);
    Gradients g(p.shape());
    const double before = episode_loss_and_grads(ep, p, g);
    sgd_step(p, g, GroupRates{1e-3, 1e-3});
    CHECK(episode_loss_and_grads(ep, p, g) < before);
  }
}

TEST_CASE("episode loss errors") {
  ExampleStore store;
  Episode ep = axis_episode(store);
  const EncoderParams p = axis_encoder(1.0);
  Gradients g(p.shape());
  Episode no_query = ep;
  no_query.query.clear();
  CHECK_THROWS_AS(episode_loss_and_grads(no_query, p, g), Error);
  Episode one_class = ep;
  one_class.support.pop_back();
  CHECK_THROWS_AS(episode_loss_and_grads(one_class, p, g), Error);
}

TEST_CASE("train_protonet: zero episodes, determinism, loss decrease") {
  const auto domains = generate_synthetic(fsad::testing::tiny_synth());
  const ModelSpec model = small_model();
  ProtoNetConfig config;
  EpisodeConfig episodes;

  config.episodes = 0;
  const auto init = train_protonet(domains, model, config, episodes, 5);
  CHECK(init.checkpoint.params == init_params(model.shape(false), mix_seed(5, 11)));
  CHECK(init.log.losses.empty());

  config.episodes = 400;
  config.lr = 1e-3;
  const auto a = train_protonet(domains, model, config, episodes, 5);
  const auto b = train_protonet(domains, model, config, episodes, 5);
  CHECK(a.checkpoint == b.checkpoint);
  CHECK(a.log.losses == b.log.losses);
  REQUIRE(a.log.losses.size() == 400);
  CHECK(a.log.mean_loss(300, 400) < a.log.mean_loss(0, 100));
  CHECK(a.checkpoint.method == Method::kPrototypical);
  CHECK_FALSE(a.checkpoint.params.shape().has_head);
}

TEST_CASE("fit_full_prototypes uses every example up to the normal cap") {
  const ModelSpec model = small_model();
  const EncoderParams p = init_params(model.shape(false), 8);
  const auto small = fsad::testing::make_records(12, 3);
  const Prototypes full = fit_full_prototypes(small, p, model.features, 1);
  CHECK(full.n_normal == 12);
  CHECK(full.n_anomaly == 3);

  std::vector<std::vector<double>> z;
  std::vector<int> labels;
  for (const auto& r : small) {
    z.push_back(embed(featurize(r.text, model.features), p));
    labels.push_back(r.label);
  }
  const Prototypes direct = compute_prototypes(z, labels);
  for (std::size_t e = 0; e < direct.normal.size(); ++e) {
    CHECK(full.normal[e] == doctest::Approx(direct.normal[e]).epsilon(1e-12));
    CHECK(full.anomaly[e] == doctest::Approx(direct.anomaly[e]).epsilon(1e-12));
  }

  const auto big = fsad::testing::make_records(6000, 5);
  const Prototypes capped = fit_full_prototypes(big, p, model.features, 3);
  CHECK(capped.n_normal == 5000);
  CHECK(capped.n_anomaly == 5);
  const Prototypes again = fit_full_prototypes(big, p, model.features, 3);
  CHECK(again.normal == capped.normal);
  const Prototypes other = fit_full_prototypes(big, p, model.features, 4);
  CHECK(other.normal != capped.normal);

  CHECK_THROWS_AS(fit_full_prototypes(fsad::testing::make_records(5, 0), p, model.features, 1), Error);
}

TEST_CASE("protonet score sign and probability") {
  Prototypes p;
  p.normal = {0, 0};
  p.anomaly = {4, 0};
  CHECK(protonet_score(std::vector<double>{4, 0}, p) == 16.0);
  CHECK(sigmoid(protonet_score(std::vector<double>{4, 0}, p)) >= 0.5);
  CHECK(protonet_score(std::vector<double>{2, 3}, p) == 0.0);
  CHECK(sigmoid(0.0) == 0.5);

  // Ranking by score and by probability agree.
  Rng rng(6);
  std::vector<double> scores;
  for (int i = 0; i < 50; ++i) {
    scores.push_back(protonet_score(std::vector<double>{8 * rng.uniform() - 2, 4 * rng.uniform() - 2}, p));
  }
  for (std::size_t i = 0; i < scores.size(); ++i) {
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (scores[i] < scores[j]) CHECK(sigmoid(scores[i]) <= sigmoid(scores[j]));
    }
  }
}
