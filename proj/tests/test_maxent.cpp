#include <catch2/catch_amalgamated.hpp>

#include <random>
#include <sstream>

#include "entrank/eval.hpp"
#include "entrank/maxent.hpp"
#include "oracles.hpp"

using namespace entrank;

namespace {

std::vector<Statistic> model_stats(int n) {
  return {Statistic::constant(n), Statistic::row_margins(n), Statistic::lazarus(n),
          Statistic::bounds_joint(n)};
}

std::vector<int> random_itemset(std::mt19937_64& rng, int n, double density = 0.3) {
  std::vector<int> items;
  for (int i = 0; i < n; ++i)
    if (detail::uniform01(rng) < density) items.push_back(i);
  return items;
}

}  // namespace

TEST_CASE("constant statistic reduces to the independence model", "[maxent]") {
  const Dataset d = generate_synthetic(GeneratorKind::clusters, 10, 400, 1);
  const auto model = fit(Constraints::from_dataset(d, Statistic::constant(10)));
  REQUIRE(model.diagnostics.converged);
  REQUIRE(model.diagnostics.sweeps == 1);

  const auto& m = model.constraints.column_margins;
  std::mt19937_64 rng(2);
  for (int rep = 0; rep < 50; ++rep) {
    const auto items = random_itemset(rng, 10);
    double product = 1.0;
    for (int i : items) product *= m[static_cast<std::size_t>(i)];
    REQUIRE(query_itemset(model, items) == Catch::Approx(product).margin(1e-9));
  }
  REQUIRE(model_bucket_probs(model).probs == std::vector<double>{1.0});
}

TEST_CASE("single-attribute rescale hits its target through the mixture", "[maxent]") {
  // the odds-rescaling update must satisfy the margin constraint exactly in
  // one step when every other parameter is frozen
  const Dataset d = generate_synthetic(GeneratorKind::markov, 6, 300, 3);
  const auto cons = Constraints::from_dataset(d, Statistic::lazarus(6));
  auto model = fit(cons, {.tolerance = 0.5, .max_sweeps = 1});  // one coarse sweep

  const int i = 2;
  const double target = 0.37;
  const auto cond = conditional_dist(model.indep, cons.stat, {i});
  const double before =
      model.indep.probs[i] * detail::dot(model.bucket_weight, cond.probs) / model.bucket_norm;
  model.indep.probs[i] = detail::rescale_success_prob(model.indep.probs[i], target, before);
  const double after =
      model.indep.probs[i] * detail::dot(model.bucket_weight, cond.probs) /
      detail::dot(model.bucket_weight, stat_dist(model.indep, cons.stat).probs);
  REQUIRE(after == Catch::Approx(target).margin(1e-12));
}

TEST_CASE("fit matches the full-space scaling oracle at N=8", "[maxent][oracle]") {
  std::mt19937_64 rng(4);
  const int n = 8;
  for (int rep = 0; rep < 3; ++rep) {
    const Dataset d = generate_synthetic(
        rep % 2 ? GeneratorKind::markov : GeneratorKind::clusters, n, 200, rng());
    for (const auto& stat : model_stats(n)) {
      FitConfig cfg;
      cfg.tolerance = 1e-10;
      cfg.max_sweeps = 20000;
      const auto model = fit(Constraints::from_dataset(d, stat), cfg);
      REQUIRE(model.diagnostics.converged);

      const auto oracle = oracles::ipf_maxent(model.constraints);
      const auto oracle_buckets = oracle.bucket_sums(stat);
      const auto fitted_buckets = model_bucket_probs(model);
      for (std::size_t k = 0; k < oracle_buckets.size(); ++k)
        REQUIRE(fitted_buckets.probs[k] == Catch::Approx(oracle_buckets[k]).margin(1e-7));

      for (int q = 0; q < 25; ++q) {
        const auto items = random_itemset(rng, n);
        REQUIRE(query_itemset(model, items) ==
                Catch::Approx(oracle.itemset_freq(items)).margin(1e-7));
      }
    }
  }
}

TEST_CASE("joint statistics fit through the enumeration engine", "[maxent][oracle]") {
  const int n = 8;
  const Dataset d = generate_synthetic(GeneratorKind::markov, n, 300, 21);
  const auto stat = Statistic::joint(Statistic::row_margins(n), Statistic::lazarus(n));
  FitConfig cfg;
  cfg.tolerance = 1e-10;
  cfg.max_sweeps = 20000;
  const auto model = fit(Constraints::from_dataset(d, stat), cfg);
  REQUIRE(model.diagnostics.converged);

  const auto oracle = oracles::ipf_maxent(model.constraints);
  const auto fitted = model_bucket_probs(model);
  const auto reference = oracle.bucket_sums(stat);
  for (std::size_t k = 0; k < fitted.probs.size(); ++k)
    REQUIRE(fitted.probs[k] == Catch::Approx(reference[k]).margin(1e-7));
  std::mt19937_64 rng(22);
  for (int rep = 0; rep < 20; ++rep) {
    const auto items = random_itemset(rng, n);
    REQUIRE(query_itemset(model, items) ==
            Catch::Approx(oracle.itemset_freq(items)).margin(1e-7));
  }
}

TEST_CASE("fitted models satisfy their constraints", "[maxent]") {
  std::mt19937_64 rng(5);
  for (const auto kind : {GeneratorKind::independent, GeneratorKind::clusters}) {
    const Dataset d = generate_synthetic(kind, 12, 500, rng());
    for (const auto& stat : model_stats(12)) {
      const auto model = fit(Constraints::from_dataset(d, stat));
      REQUIRE(model.diagnostics.converged);
      REQUIRE(model.diagnostics.max_residual <= 1e-6);
      const auto& cons = model.constraints;
      for (int i = 0; i < 12; ++i)
        REQUIRE(query_itemset(model, {i}) ==
                Catch::Approx(cons.column_margins[static_cast<std::size_t>(i)]).margin(1e-5));
      const auto buckets = model_bucket_probs(model);
      for (std::size_t k = 0; k < buckets.probs.size(); ++k)
        REQUIRE(buckets.probs[k] == Catch::Approx(cons.stat_targets[k]).margin(1e-5));
    }
  }
}

TEST_CASE("acceleration changes nothing for the row-margin fit", "[maxent]") {
  const Dataset d = generate_synthetic(GeneratorKind::clusters, 14, 900, 6);
  const auto cons = Constraints::from_dataset(d, Statistic::row_margins(14));
  FitConfig fast, slow;
  fast.tolerance = slow.tolerance = 1e-11;
  fast.max_sweeps = slow.max_sweeps = 10000;
  slow.accelerate_row_margins = false;
  const auto a = fit(cons, fast);
  const auto b = fit(cons, slow);
  REQUIRE(a.diagnostics.converged);
  REQUIRE(b.diagnostics.converged);
  for (int i = 0; i < 14; ++i)
    REQUIRE(a.indep.probs[static_cast<std::size_t>(i)] ==
            Catch::Approx(b.indep.probs[static_cast<std::size_t>(i)]).margin(1e-8));
}

TEST_CASE("query edge cases", "[maxent]") {
  const Dataset d = generate_synthetic(GeneratorKind::markov, 8, 100, 7);
  const auto model = fit(Constraints::from_dataset(d, Statistic::row_margins(8)));
  REQUIRE(query_itemset(model, {}) == 1.0);
  REQUIRE_THROWS_AS(query_itemset(model, {8}), std::invalid_argument);
  REQUIRE_THROWS_AS(query_itemset(model, {-1}), std::invalid_argument);
  // duplicates collapse to the set
  REQUIRE(query_itemset(model, {2, 2, 5}) == Catch::Approx(query_itemset(model, {2, 5})));
}

TEST_CASE("queries agree with direct enumeration of the model", "[maxent][oracle]") {
  std::mt19937_64 rng(8);
  const int n = 8;
  const Dataset d = generate_synthetic(GeneratorKind::clusters, n, 300, 9);
  for (const auto& stat : model_stats(n)) {
    FitConfig cfg;
    cfg.tolerance = 1e-9;
    cfg.max_sweeps = 10000;
    const auto model = fit(Constraints::from_dataset(d, stat), cfg);

    // tabulate p(t) over the whole space and cross-check every surface
    std::vector<double> table(std::size_t{1} << n);
    double total = 0.0;
    for (std::uint32_t mask = 0; mask < table.size(); ++mask) {
      table[mask] = transaction_prob(model, oracles::mask_to_transaction(mask, n));
      total += table[mask];
    }
    REQUIRE(total == Catch::Approx(1.0).margin(1e-9));

    const auto buckets = model_bucket_probs(model);
    std::vector<double> bucket_sum(buckets.probs.size(), 0.0);
    for (std::uint32_t mask = 0; mask < table.size(); ++mask)
      bucket_sum[static_cast<std::size_t>(
          stat.evaluate(oracles::mask_to_transaction(mask, n)))] += table[mask];
    for (std::size_t k = 0; k < buckets.probs.size(); ++k)
      REQUIRE(buckets.probs[k] == Catch::Approx(bucket_sum[k]).margin(1e-9));

    for (int rep = 0; rep < 30; ++rep) {
      const auto items = random_itemset(rng, n);
      std::uint32_t want = 0;
      for (int i : items) want |= std::uint32_t{1} << i;
      double direct = 0.0;
      for (std::uint32_t mask = 0; mask < table.size(); ++mask)
        if ((mask & want) == want) direct += table[mask];
      REQUIRE(query_itemset(model, items) == Catch::Approx(direct).margin(1e-9));
    }
  }
}

TEST_CASE("mixture identity for itemset queries", "[maxent][oracle]") {
  // p(X=1) = sum_k r(k) q(X=1 | S=k), the right side built from enumeration
  // of the independence component only
  std::mt19937_64 rng(10);
  const int n = 10;
  const Dataset d = generate_synthetic(GeneratorKind::markov, n, 400, 11);
  const auto stat = Statistic::lazarus(n);
  const auto model = fit(Constraints::from_dataset(d, stat));
  const auto r = model_bucket_probs(model);

  for (int rep = 0; rep < 20; ++rep) {
    const auto items = random_itemset(rng, n);
    std::uint32_t want = 0;
    for (int i : items) want |= std::uint32_t{1} << i;

    std::vector<double> joint(r.probs.size(), 0.0);  // q(X=1, S=k)
    std::vector<double> bucket(r.probs.size(), 0.0);  // q(S=k)
    for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << n); ++mask) {
      double w = 1.0;
      for (int i = 0; i < n; ++i)
        w *= (mask >> i & 1) ? model.indep.probs[static_cast<std::size_t>(i)]
                             : 1.0 - model.indep.probs[static_cast<std::size_t>(i)];
      const auto k = static_cast<std::size_t>(stat.evaluate_mask(mask));
      bucket[k] += w;
      if ((mask & want) == want) joint[k] += w;
    }
    double rhs = 0.0;
    for (std::size_t k = 0; k < r.probs.size(); ++k)
      if (bucket[k] > 0.0) rhs += r.probs[k] * joint[k] / bucket[k];
    REQUIRE(query_itemset(model, items) == Catch::Approx(rhs).margin(1e-10));
  }
}

TEST_CASE("transaction probabilities respect the zero set", "[maxent]") {
  Dataset d;
  d.n_attributes = 4;
  d.attribute_labels = {1, 2, 3, 4};
  // only row margins 1 and 2 appear; ones counts 0, 3, 4 are forced to zero
  d.transactions = {{1, 0, 0, 0}, {0, 1, 1, 0}, {0, 0, 1, 1}, {1, 1, 0, 0}, {0, 0, 0, 1}};
  const auto model = fit(Constraints::from_dataset(d, Statistic::row_margins(4)));
  REQUIRE(transaction_prob(model, {0, 0, 0, 0}) == 0.0);
  REQUIRE(transaction_prob(model, {1, 1, 1, 0}) == 0.0);
  REQUIRE(transaction_prob(model, {1, 1, 1, 1}) == 0.0);
  REQUIRE(transaction_prob(model, {1, 0, 0, 0}) > 0.0);

  const auto indep = fit(Constraints::from_dataset(d, Statistic::constant(4)));
  const Transaction t{1, 0, 1, 0};
  double expect = 1.0;
  for (int i = 0; i < 4; ++i) {
    const double q = indep.indep.probs[static_cast<std::size_t>(i)];
    expect *= t[static_cast<std::size_t>(i)] ? q : 1.0 - q;
  }
  REQUIRE(transaction_prob(indep, t) == Catch::Approx(expect).margin(1e-15));
}

TEST_CASE("entropy dominates the empirical distribution", "[maxent][oracle]") {
  std::mt19937_64 rng(12);
  const int n = 10;
  for (int rep = 0; rep < 3; ++rep) {
    const Dataset d = generate_synthetic(GeneratorKind::clusters, n, 150, rng());
    for (const auto& stat : model_stats(n)) {
      const auto model = fit(Constraints::from_dataset(d, stat));
      double h_model = 0.0;
      for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << n); ++mask) {
        const double p = transaction_prob(model, oracles::mask_to_transaction(mask, n));
        if (p > 0.0) h_model -= p * std::log(p);
      }
      REQUIRE(h_model >= oracles::empirical_entropy(d) - 1e-9);
    }
  }
}

TEST_CASE("training log-likelihood never decreases across sweeps", "[maxent][oracle]") {
  const Dataset d = generate_synthetic(GeneratorKind::clusters, 9, 250, 13);
  for (const auto& stat : {Statistic::row_margins(9), Statistic::lazarus(9)}) {
    const auto cons = Constraints::from_dataset(d, stat);
    double previous = -std::numeric_limits<double>::infinity();
    for (int sweeps = 1; sweeps <= 12; ++sweeps) {
      FitConfig cfg;
      cfg.tolerance = 1e-300;  // never satisfied: run exactly `sweeps` sweeps
      cfg.max_sweeps = sweeps;
      const auto model = fit(cons, cfg);
      const double ll = dataset_log_likelihood(model, d);
      REQUIRE(ll >= previous - 1e-9);
      previous = ll;
    }
  }
}

TEST_CASE("degenerate margins: clamped by default, pinned on request", "[maxent]") {
  Dataset d;
  d.n_attributes = 3;
  d.attribute_labels = {1, 2, 3};
  d.transactions = {{1, 0, 1}, {1, 0, 0}, {1, 0, 1}, {1, 0, 0}};  // column 0 all ones, 1 all zeros

  const auto clamped = fit(Constraints::from_dataset(d, Statistic::row_margins(3)));
  REQUIRE(clamped.diagnostics.converged);
  const double delta = 0.5 / 4.0;
  REQUIRE(query_itemset(clamped, {0}) == Catch::Approx(1.0 - delta).margin(1e-5));
  REQUIRE(query_itemset(clamped, {1}) == Catch::Approx(delta).margin(1e-5));

  FitConfig cfg;
  cfg.exclude_degenerate = true;
  const auto pinned = fit(Constraints::from_dataset(d, Statistic::row_margins(3)), cfg);
  REQUIRE(pinned.diagnostics.converged);
  REQUIRE(query_itemset(pinned, {0}) == Catch::Approx(1.0).margin(1e-9));
  REQUIRE(query_itemset(pinned, {1}) == 0.0);
  REQUIRE(query_itemset(pinned, {2}) == Catch::Approx(0.5).margin(1e-5));
}

TEST_CASE("fit failure modes", "[maxent]") {
  const Dataset d = generate_synthetic(GeneratorKind::clusters, 8, 200, 14);
  const auto cons = Constraints::from_dataset(d, Statistic::row_margins(8));

  FitConfig starved;
  starved.max_sweeps = 1;
  starved.tolerance = 1e-14;
  const auto model = fit(cons, starved);
  REQUIRE_FALSE(model.diagnostics.converged);
  REQUIRE(model.diagnostics.sweeps == 1);
  REQUIRE(model.diagnostics.max_residual > 1e-14);

  // target mass on an unattainable bounds code (first=2, last=1)
  Constraints bad;
  bad.stat = Statistic::bounds_joint(2);
  bad.column_margins = {0.5, 0.5};
  bad.stat_targets.assign(static_cast<std::size_t>(bad.stat.k_max()) + 1, 0.0);
  bad.stat_targets[0] = 0.5;                                    // (0,0)
  bad.stat_targets[static_cast<std::size_t>(2 + 3 * 1)] = 0.5;  // infeasible
  bad.n_observations = 100;
  REQUIRE_THROWS_AS(fit(bad), InfeasibleBucketError);

  Constraints mismatched = cons;
  mismatched.column_margins.pop_back();
  REQUIRE_THROWS_AS(fit(mismatched), std::invalid_argument);

  FitConfig bad_cfg;
  bad_cfg.max_sweeps = 0;
  REQUIRE_THROWS_AS(fit(cons, bad_cfg), std::invalid_argument);
}

TEST_CASE("serialization round trips exactly", "[maxent]") {
  const Dataset d = generate_synthetic(GeneratorKind::markov, 7, 350, 15);
  for (const auto& stat :
       {Statistic::row_margins(7), Statistic::row_margins(7, 3), Statistic::lazarus(7),
        Statistic::bounds_joint(7), Statistic::constant(7)}) {
    const auto model = fit(Constraints::from_dataset(d, stat));
    const auto back = deserialize(serialize(model));
    REQUIRE(back.indep.probs == model.indep.probs);
    REQUIRE(back.bucket_weight == model.bucket_weight);
    REQUIRE(back.bucket_norm == model.bucket_norm);
    REQUIRE(back.constraints.column_margins == model.constraints.column_margins);
    REQUIRE(back.constraints.stat_targets == model.constraints.stat_targets);
    REQUIRE(back.constraints.stat == model.constraints.stat);
    REQUIRE(back.constraints.n_observations == model.constraints.n_observations);
    REQUIRE(back.diagnostics.sweeps == model.diagnostics.sweeps);
    REQUIRE(back.diagnostics.max_residual == model.diagnostics.max_residual);
    REQUIRE(back.diagnostics.converged == model.diagnostics.converged);

    std::mt19937_64 rng(16);
    for (int rep = 0; rep < 10; ++rep) {
      const auto items = random_itemset(rng, 7);
      REQUIRE(query_itemset(back, items) == query_itemset(model, items));
    }
  }
}

TEST_CASE("deserialize rejects malformed input", "[maxent]") {
  const Dataset d = generate_synthetic(GeneratorKind::markov, 5, 100, 17);
  const auto model = fit(Constraints::from_dataset(d, Statistic::lazarus(5)));
  const std::string text = serialize(model);

  REQUIRE_THROWS_AS(deserialize(std::string("")), DataError);
  REQUIRE_THROWS_AS(deserialize(std::string("maxent-v2 " + text.substr(10))), DataError);
  REQUIRE_THROWS_AS(deserialize(text.substr(0, text.size() / 2)), DataError);
  REQUIRE_THROWS_AS(deserialize(std::string("maxent-v1 5 9 nosuchstat\n")), DataError);
}
