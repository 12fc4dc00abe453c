#include "oracles.hpp"

#include "qfl/errors.hpp"
#include "qfl/exp_io.hpp"
#include "qfl/fl_core.hpp"

#include <doctest.h>

#include <algorithm>
#include <set>

using namespace qfl;

namespace {

LabeledDataset blobs(int classes, int per_class, int dim, double stddev, std::uint64_t seed) {
  return synth_blobs(BlobSpec{default_blob_centers(classes, dim, seed), stddev, per_class, dim, seed});
}

std::vector<double> row(const LabeledDataset& d, int r) {
  return {d.features.row(r).data(), d.features.row(r).data() + d.feature_dim()};
}

ModelParams scalar_model(double v) {
  ModelParams m;
  m.kind = ModelKind::Linear;
  m.linear = {0, 1};
  m.num_classes = 1;
  m.values = Eigen::VectorXd::Constant(1, v);
  return m;
}

}  // namespace

TEST_CASE("partition: two classes over two devices") {
  const LabeledDataset data = blobs(2, 30, 4, 0.05, 1);
  const auto shards = partition_noniid(data, 2, 9);
  REQUIRE(shards.size() == 2);
  CHECK(shards[0].size() == 30);
  CHECK(shards[1].size() == 30);
  CHECK(std::all_of(shards[0].labels.begin(), shards[0].labels.end(), [](int l) { return l == 0; }));
  CHECK(std::all_of(shards[1].labels.begin(), shards[1].labels.end(), [](int l) { return l == 1; }));
}

TEST_CASE("partition: four devices are single-label, disjoint and covering") {
  const LabeledDataset data = blobs(2, 100, 4, 0.05, 2);
  const auto rows = partition_noniid_rows(data, 4, 3);
  std::multiset<int> all;
  for (const auto& shard : rows) {
    CHECK(shard.size() == 50);
    std::set<int> labels;
    for (int r : shard) labels.insert(data.labels[static_cast<std::size_t>(r)]);
    CHECK(labels.size() == 1);
    all.insert(shard.begin(), shard.end());
  }
  std::multiset<int> expected;
  for (int r = 0; r < data.size(); ++r) expected.insert(r);
  CHECK(all == expected);
  CHECK(partition_noniid_rows(data, 4, 3) == rows);
  CHECK_THROWS_AS(partition_noniid_rows(data, 0, 3), ValidationError);
}

TEST_CASE("vqc scores at zero angles and zero features are all one") {
  const VqcShape shape{4, 2, 3};
  ModelParams m = init_model(ModelKind::Vqc, shape.feature_dim(), 3, shape, 0);
  m.values.setZero();
  const std::vector<double> x(static_cast<std::size_t>(shape.feature_dim()), 0.0);
  const Eigen::VectorXd s = vqc_scores(m, x);
  CHECK((s.array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK((softmax(s).array() - 1.0 / 3.0).abs().maxCoeff() < 1e-12);
}

TEST_CASE("vqc scores stay within the Pauli-Z bounds") {
  const VqcShape shape{4, 2, 2};
  const LabeledDataset data = blobs(2, 10, shape.feature_dim(), 0.2, 4);
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    ModelParams m = init_model(ModelKind::Vqc, shape.feature_dim(), 2, shape, seed);
    m.values *= 10.0;
    for (int r = 0; r < data.size(); ++r) {
      const Eigen::VectorXd s = vqc_scores(m, row(data, r));
      CHECK(s.cwiseAbs().maxCoeff() <= 1.0 + 1e-12);
      CHECK(softmax(s).sum() == doctest::Approx(1.0).epsilon(1e-14));
    }
  }
}

TEST_CASE("cross-entropy gradients match central differences") {
  const VqcShape shape{4, 1, 2};
  const LabeledDataset data = blobs(2, 3, shape.feature_dim(), 0.2, 5);
  for (ModelKind kind : {ModelKind::Vqc, ModelKind::Linear}) {
    const ModelParams m = init_model(kind, shape.feature_dim(), 2, shape, 8);
    for (int r = 0; r < data.size(); ++r) {
      const auto x = row(data, r);
      const int label = data.labels[static_cast<std::size_t>(r)];
      const Eigen::VectorXd grad = sample_gradient(m, x, label);
      std::vector<double> theta(m.values.data(), m.values.data() + m.values.size());
      auto f = [&](const std::vector<double>& t) {
        ModelParams p = m;
        p.values = Eigen::Map<const Eigen::VectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
        return cross_entropy(p, x, label);
      };
      for (std::size_t k = 0; k < theta.size(); ++k)
        CHECK(std::abs(grad[static_cast<Eigen::Index>(k)] - oracle::central_difference(f, theta, k, 1e-5)) <= 1e-6);
    }
  }
}

TEST_CASE("vqc readout needs enough qubits") {
  CHECK_THROWS_AS(init_model(ModelKind::Vqc, 4, 5, VqcShape{4, 1, 1}, 0), ValidationError);
  CHECK_THROWS_AS(init_model(ModelKind::Vqc, 5, 2, VqcShape{4, 1, 1}, 0), ValidationError);
}

TEST_CASE("local_train with zero learning rate is the identity") {
  const LabeledDataset data = blobs(2, 20, 4, 0.05, 6);
  const ModelParams m = init_model(ModelKind::Linear, 4, 2, {}, 1);
  const LocalUpdate u = local_train(m, data, 3, 0.0, 7, 2);
  CHECK(u.params.values == m.values);
  CHECK(u.sample_count == 40);
}

TEST_CASE("local_train fits separable blobs with a linear model") {
  const LabeledDataset data = blobs(2, 100, 16, 0.05, 7);
  const ModelParams m = init_model(ModelKind::Linear, 16, 2, {}, 3);
  const LocalUpdate u = local_train(m, data, 20, 0.5, 20, 4);
  CHECK(evaluate(u.params, data).accuracy >= 0.95);
  const LocalUpdate again = local_train(m, data, 20, 0.5, 20, 4);
  CHECK(again.params.values == u.params.values);
}

TEST_CASE("synthetic blobs with stddev 0.02 are learned to 0.99") {
  BlobSpec spec{{std::vector<double>(8, 0.2), std::vector<double>(8, 0.8)}, 0.02, 100, 8, 11};
  const LabeledDataset data = synth_blobs(spec);
  const LocalUpdate u = local_train(init_model(ModelKind::Linear, 8, 2, {}, 0), data, 20, 0.5, 20, 1);
  CHECK(evaluate(u.params, data).accuracy >= 0.99);
}

TEST_CASE("aggregate is the sample-weighted mean") {
  const ModelParams one = init_model(ModelKind::Linear, 3, 2, {}, 4);
  CHECK(aggregate({one}, {17}).values == one.values);

  const ModelParams avg = aggregate({scalar_model(1.0), scalar_model(3.0)}, {10, 30});
  CHECK(avg.values[0] == doctest::Approx(2.5).epsilon(1e-15));

  std::vector<ModelParams> models;
  std::vector<int> counts{4, 9, 1, 20};
  for (std::uint64_t s = 0; s < 4; ++s) models.push_back(init_model(ModelKind::Linear, 3, 2, {}, s));
  const ModelParams forward = aggregate(models, counts);
  std::reverse(models.begin(), models.end());
  std::reverse(counts.begin(), counts.end());
  CHECK((aggregate(models, counts).values - forward.values).cwiseAbs().maxCoeff() <= 1e-12);

  CHECK_THROWS_AS(aggregate({one}, {0}), ValidationError);
  CHECK_THROWS_AS(aggregate({one, scalar_model(1.0)}, {1, 1}), ValidationError);
}

TEST_CASE("round latency is the slowest upload plus compute") {
  CHECK(round_latency({1e6}, 1e5, {0}, 0.0) == doctest::Approx(0.1));
  CHECK(round_latency({1e6, 1e6}, 1e5, {0, 1}, 0.0) == round_latency({1e6}, 1e5, {0}, 0.0));
  CHECK(round_latency({1e6, 5e5}, 1e5, {0, 1}, 0.05) >= round_latency({1e6}, 1e5, {0}, 0.05));
  CHECK(round_latency({1e6, 5e5}, 1e5, {0, 1}, 0.05) == doctest::Approx(0.25));
  CHECK_THROWS_AS(round_latency({1e6, 0.0}, 1e5, {0, 1}, 0.0), ValidationError);
  CHECK_THROWS_AS(round_latency({1e6}, 1e5, {1}, 0.0), ValidationError);
}

TEST_CASE("federation arms differ only through their rates") {
  const VqcShape shape{4, 1, 1};
  const LabeledDataset data = blobs(2, 20, shape.feature_dim(), 0.1, 9);
  FederationConfig cfg;
  cfg.num_devices = 4;
  cfg.rounds = 3;
  cfg.vqc = shape;
  cfg.seed = 5;
  const std::vector<double> slow{1e4, 2e4, 3e4, 4e4};
  const std::vector<double> fast{2e4, 3e4, 4e4, 5e4};

  const FederationResult same = run_federation(data, cfg, slow, slow);
  CHECK(same.qfl == same.fl);
  REQUIRE(same.qfl.size() == 4);
  CHECK(same.qfl[0].cumulative_time_s == 0.0);

  const FederationResult diff = run_federation(data, cfg, fast, slow);
  for (std::size_t r = 0; r < diff.qfl.size(); ++r) {
    CHECK(diff.qfl[r].accuracy == diff.fl[r].accuracy);
    CHECK(diff.qfl[r].cumulative_time_s <= diff.fl[r].cumulative_time_s);
  }
  const double bits = 32.0 * shape.num_params();
  CHECK(diff.fl[1].round_latency_s == doctest::Approx(bits / 1e4 + cfg.latency.compute_vqc_s));

  CHECK(accuracy_at_time(diff.qfl, -1.0) == diff.qfl[0].accuracy);
  CHECK(accuracy_at_time(diff.qfl, 1e12) == diff.qfl.back().accuracy);
  CHECK(run_federation(data, cfg, fast, slow).qfl == diff.qfl);
  CHECK_THROWS_AS(run_federation(data, cfg, {1e4}, slow), ValidationError);
}

TEST_CASE("mixed model kinds per arm") {
  const VqcShape shape{4, 1, 1};
  const LabeledDataset data = blobs(2, 20, shape.feature_dim(), 0.1, 10);
  FederationConfig cfg;
  cfg.num_devices = 2;
  cfg.rounds = 2;
  cfg.vqc = shape;
  cfg.fl_model = ModelKind::Linear;
  const std::vector<double> rates{1e5, 1e5};
  const FederationResult r = run_federation(data, cfg, rates, rates);
  CHECK(r.fl[1].round_latency_s == doctest::Approx(32.0 * 2 * 5 / 1e5 + 0.05));
  CHECK(r.qfl[1].round_latency_s == doctest::Approx(32.0 * 4 / 1e5 + 0.10));
}
