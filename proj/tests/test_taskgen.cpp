#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>

#include "neuronml/errors.hpp"
#include "neuronml/taskgen.hpp"

using namespace neuronml;

namespace {

TaskGenConfig pinned_sine(double a, double w, double b, double sigma) {
  TaskGenConfig cfg;
  cfg.amplitude_min = cfg.amplitude_max = a;
  cfg.frequency_min = cfg.frequency_max = w;
  cfg.phase_min = cfg.phase_max = b;
  cfg.noise_sigma = sigma;
  return cfg;
}

}  // namespace

TEST_CASE("sinusoid episodes follow y = A sin(wx + b)") {
  std::mt19937_64 rng(7);

  SUBCASE("unit amplitude, zero phase") {
    const Task t = gen_sinusoid_task(pinned_sine(1.0, 1.0, 0.0, 0.0), rng);
    for (std::size_t i = 0; i < t.support_inputs.rows(); ++i)
      CHECK(t.support_targets.values[i] ==
            doctest::Approx(std::sin(t.support_inputs.values[i])).epsilon(1e-12));
    // Spot value: sin(pi/2) = 1 under these parameters.
    CHECK(1.0 * std::sin(1.0 * (3.14159265358979323846 / 2.0) + 0.0) ==
          doctest::Approx(1.0));
  }
  SUBCASE("amplitude two, phase pi flips the sign") {
    const double pi = 3.14159265358979323846;
    const Task t = gen_sinusoid_task(pinned_sine(2.0, 1.0, pi, 0.0), rng);
    for (std::size_t i = 0; i < t.query_inputs.rows(); ++i)
      CHECK(t.query_targets.values[i] ==
            doctest::Approx(-2.0 * std::sin(t.query_inputs.values[i])).epsilon(1e-9));
    CHECK(2.0 * std::sin(pi / 2.0 + pi) == doctest::Approx(-2.0));
  }
  SUBCASE("noiseless targets stay inside the amplitude") {
    TaskGenConfig cfg;
    cfg.noise_sigma = 0.0;
    for (int i = 0; i < 20; ++i) {
      const Task t = gen_sinusoid_task(cfg, rng);
      const double a = t.meta.at("amplitude")[0];
      for (double y : t.support_targets.values) CHECK(std::abs(y) <= a + 1e-12);
      for (double y : t.query_targets.values) CHECK(std::abs(y) <= a + 1e-12);
    }
  }
  SUBCASE("inputs live in [-5, 5] and shapes follow the config") {
    TaskGenConfig cfg;
    cfg.k_shot = 5;
    cfg.query_count = 10;
    const Task t = gen_sinusoid_task(cfg, rng);
    CHECK(t.kind == TaskKind::kRegression);
    CHECK(t.support_inputs.rows() == 5);
    CHECK(t.query_inputs.rows() == 10);
    CHECK(t.support_inputs.cols() == 1);
    for (double x : t.support_inputs.values) {
      CHECK(x >= -5.0);
      CHECK(x <= 5.0);
    }
    for (double x : t.query_inputs.values) {
      CHECK(x >= -5.0);
      CHECK(x <= 5.0);
    }
  }
  SUBCASE("parameter draws respect the configured ranges") {
    TaskGenConfig cfg;
    for (int i = 0; i < 50; ++i) {
      const Task t = gen_sinusoid_task(cfg, rng);
      CHECK(t.meta.at("amplitude")[0] >= cfg.amplitude_min);
      CHECK(t.meta.at("amplitude")[0] <= cfg.amplitude_max);
      CHECK(t.meta.at("frequency")[0] >= cfg.frequency_min);
      CHECK(t.meta.at("frequency")[0] <= cfg.frequency_max);
      CHECK(t.meta.at("phase")[0] >= cfg.phase_min);
      CHECK(t.meta.at("phase")[0] <= cfg.phase_max);
    }
  }
}

TEST_CASE("same seed, same episode") {
  TaskGenConfig cfg;
  std::mt19937_64 a(42), b(42), c(43);
  const Task ta = gen_sinusoid_task(cfg, a);
  const Task tb = gen_sinusoid_task(cfg, b);
  const Task tc = gen_sinusoid_task(cfg, c);
  CHECK(ta.support_inputs.values == tb.support_inputs.values);
  CHECK(ta.support_targets.values == tb.support_targets.values);
  CHECK(ta.query_inputs.values == tb.query_inputs.values);
  CHECK(ta.meta.at("amplitude")[0] == tb.meta.at("amplitude")[0]);
  CHECK(ta.support_inputs.values != tc.support_inputs.values);
}

TEST_CASE("cluster episodes are balanced and labeled by class index") {
  TaskGenConfig cfg;
  cfg.input_dim = 4;
  cfg.n_way = 3;
  cfg.k_shot = 2;
  cfg.query_count = 5;
  std::mt19937_64 rng(11);
  const Task t = gen_cluster_task(cfg, rng);

  CHECK(t.kind == TaskKind::kClassification);
  CHECK(t.n_way == 3);
  CHECK(t.support_inputs.rows() == 6);   // 3 classes x 2 shots
  CHECK(t.support_inputs.cols() == 4);
  CHECK(t.query_inputs.rows() == 15);    // 3 classes x 5 queries
  CHECK(t.meta.at("centroids").size() == 12);

  std::map<double, int> support_counts, query_counts;
  for (double y : t.support_targets.values) support_counts[y]++;
  for (double y : t.query_targets.values) query_counts[y]++;
  for (double c = 0.0; c < 3.0; c += 1.0) {
    CHECK(support_counts[c] == 2);
    CHECK(query_counts[c] == 5);
  }
}

TEST_CASE("wider separation spreads the centroids") {
  TaskGenConfig near_cfg, far_cfg;
  near_cfg.separation = 0.5;
  far_cfg.separation = 10.0;
  near_cfg.input_dim = far_cfg.input_dim = 2;

  auto mean_centroid_norm = [](const TaskGenConfig& cfg) {
    std::mt19937_64 rng(99);
    double total = 0.0;
    int n = 0;
    for (int i = 0; i < 50; ++i) {
      const Task t = gen_cluster_task(cfg, rng);
      for (double c : t.meta.at("centroids")) {
        total += std::abs(c);
        ++n;
      }
    }
    return total / n;
  };
  CHECK(mean_centroid_norm(far_cfg) > 5.0 * mean_centroid_norm(near_cfg));
}

TEST_CASE("self-supervised batches pseudo-label augmented views") {
  std::vector<std::vector<double>> pool;
  for (int i = 0; i < 8; ++i) pool.push_back({double(i), double(-i)});

  TaskGenConfig cfg;
  cfg.ssl_blocks = 2;
  cfg.ssl_views = 3;
  std::mt19937_64 rng(5);
  const std::vector<Task> tasks = build_ssl_batch(pool, cfg, rng);

  REQUIRE(tasks.size() == 2);
  for (const Task& t : tasks) {
    CHECK(t.kind == TaskKind::kClassification);
    CHECK(t.n_way == 4);                      // 8 items / 2 blocks
    CHECK(t.support_inputs.rows() == 8);      // 4 items x ceil(3/2) views
    CHECK(t.query_inputs.rows() == 4);        // 4 items x 1 view
    CHECK(t.support_inputs.rows() + t.query_inputs.rows() == 12);
    // Pseudo-labels are the within-block item indices, two support views each.
    std::map<double, int> counts;
    for (double y : t.support_targets.values) counts[y]++;
    for (double c = 0.0; c < 4.0; c += 1.0) CHECK(counts[c] == 2);
  }
  CHECK(tasks[0].meta.at("block")[0] == 0.0);
  CHECK(tasks[1].meta.at("block")[0] == 1.0);
}

TEST_CASE("identity augmentation reproduces the item exactly") {
  std::vector<std::vector<double>> pool = {{1.5, -2.0}, {0.25, 8.0}};
  TaskGenConfig cfg;
  cfg.ssl_blocks = 1;
  cfg.ssl_views = 2;  // one support view, one query view per item
  cfg.ssl_noise = 0.0;
  cfg.ssl_scaling = false;
  std::mt19937_64 rng(1);
  const std::vector<Task> tasks = build_ssl_batch(pool, cfg, rng);
  REQUIRE(tasks.size() == 1);
  const Task& t = tasks[0];
  for (std::size_t item = 0; item < 2; ++item)
    for (std::size_t k = 0; k < 2; ++k) {
      CHECK(t.support_inputs.at(item, k) == pool[item][k]);
      CHECK(t.query_inputs.at(item, k) == pool[item][k]);
    }
}

TEST_CASE("bad generator configs are rejected by name") {
  std::mt19937_64 rng(3);
  TaskGenConfig cfg;

  SUBCASE("zero shots") {
    cfg.k_shot = 0;
    CHECK_THROWS_WITH_AS(gen_sinusoid_task(cfg, rng),
                         doctest::Contains("k_shot"), ConfigError);
  }
  SUBCASE("inverted amplitude range") {
    cfg.amplitude_min = 2.0;
    cfg.amplitude_max = 1.0;
    CHECK_THROWS_WITH_AS(gen_sinusoid_task(cfg, rng),
                         doctest::Contains("amplitude"), ConfigError);
  }
  SUBCASE("negative noise") {
    cfg.noise_sigma = -0.1;
    CHECK_THROWS_WITH_AS(gen_sinusoid_task(cfg, rng),
                         doctest::Contains("noise_sigma"), ConfigError);
  }
  SUBCASE("one-way classification") {
    cfg.n_way = 1;
    CHECK_THROWS_WITH_AS(gen_cluster_task(cfg, rng),
                         doctest::Contains("n_way"), ConfigError);
  }
  SUBCASE("empty pool") {
    CHECK_THROWS_WITH_AS(build_ssl_batch({}, cfg, rng),
                         doctest::Contains("pool"), ConfigError);
  }
  SUBCASE("ragged pool") {
    CHECK_THROWS_WITH_AS(build_ssl_batch({{1.0}, {1.0, 2.0}}, cfg, rng),
                         doctest::Contains("ragged"), ConfigError);
  }
  SUBCASE("pool does not divide into blocks") {
    cfg.ssl_blocks = 2;
    CHECK_THROWS_WITH_AS(build_ssl_batch({{1.0}, {2.0}, {3.0}}, cfg, rng),
                         doctest::Contains("ssl_blocks"), ConfigError);
  }
  SUBCASE("single-view episodes cannot split") {
    cfg.ssl_views = 1;
    CHECK_THROWS_WITH_AS(build_ssl_batch({{1.0}, {2.0}}, cfg, rng),
                         doctest::Contains("ssl_views"), ConfigError);
  }
}

TEST_CASE("task dumps round-trip exactly") {
  namespace fs = std::filesystem;
  std::mt19937_64 rng(2718);
  TaskGenConfig cfg;
  std::vector<Task> batch;
  batch.push_back(gen_sinusoid_task(cfg, rng));
  cfg.input_dim = 3;
  batch.push_back(gen_cluster_task(cfg, rng));

  const fs::path path = fs::temp_directory_path() / "neuronml_taskdump_test.json";
  dump_tasks(path.string(), batch);
  const std::vector<Task> loaded = load_task_dump(path.string());
  fs::remove(path);

  REQUIRE(loaded.size() == batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    CHECK(loaded[i].kind == batch[i].kind);
    CHECK(loaded[i].n_way == batch[i].n_way);
    CHECK(loaded[i].support_inputs.values == batch[i].support_inputs.values);
    CHECK(loaded[i].support_targets.values == batch[i].support_targets.values);
    CHECK(loaded[i].query_inputs.values == batch[i].query_inputs.values);
    CHECK(loaded[i].query_targets.values == batch[i].query_targets.values);
    CHECK(loaded[i].meta == batch[i].meta);
  }
}
