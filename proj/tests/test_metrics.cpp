#include <doctest.h>

#include "ctcv/error.hpp"
#include "ctcv/metrics.hpp"
#include "ctcv/random.hpp"
#include "oracles.hpp"

using namespace ctcv;

namespace {

ConfusionMatrix cm(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  ConfusionMatrix m;
  m.tp = tp;
  m.tn = tn;
  m.fp = fp;
  m.fn = fn;
  return m;
}

// a/b == c/d without rounding.
bool same_ratio(Fraction x, std::uint64_t c, std::uint64_t d) {
  if (x.den == 0 || d == 0) return x.den == 0 && c == 0;
  return static_cast<unsigned __int128>(x.num) * d == static_cast<unsigned __int128>(c) * x.den;
}

std::vector<ScoredSample> scored(std::initializer_list<std::pair<double, int>> v) {
  std::vector<ScoredSample> out;
  for (auto [s, y] : v) out.push_back({s, y == 1});
  return out;
}

}  // namespace

TEST_CASE("worked metric examples") {
  CHECK(cm(50, 40, 5, 5).accuracy().value() == doctest::Approx(0.90).epsilon(1e-15));
  const auto m = cm(8, 0, 2, 2);
  CHECK(std::abs(m.precision().value() - 0.8) < 1e-15);
  CHECK(std::abs(m.recall().value() - 0.8) < 1e-15);
  CHECK(std::abs(m.f1().value() - 0.8) < 1e-15);
}

TEST_CASE("zero-denominator conventions") {
  const auto none = cm(0, 10, 0, 0);
  CHECK(none.precision().value() == 0.0);
  CHECK(none.recall().value() == 0.0);
  CHECK(none.f1().value() == 0.0);
  CHECK(none.accuracy().value() == 1.0);
  CHECK(cm(0, 0, 0, 0).accuracy().value() == 0.0);
  CHECK(cm(0, 3, 4, 5).f1().value() == 0.0);
}

TEST_CASE("random confusion matrices match the closed forms exactly") {
  Rng rng(12);
  for (int i = 0; i < 1000; ++i) {
    const auto m = cm(rng.index(50), rng.index(50), rng.index(50), rng.index(50));
    CHECK(same_ratio(m.accuracy(), m.tp + m.tn, m.tp + m.tn + m.fp + m.fn));
    CHECK(same_ratio(m.precision(), m.tp, m.tp + m.fp));
    CHECK(same_ratio(m.recall(), m.tp, m.tp + m.fn));
    // 2PR / (P + R) with P = tp/(tp+fp), R = tp/(tp+fn) reduces to 2tp / (2tp + fp + fn).
    if (m.tp > 0) CHECK(same_ratio(m.f1(), 2 * m.tp, 2 * m.tp + m.fp + m.fn));
    else CHECK(m.f1().value() == 0.0);
  }
}

TEST_CASE("AUC examples") {
  CHECK(compute_auc(scored({{0.9, 1}, {0.8, 1}, {0.3, 0}, {0.1, 0}})) == 1.0);
  CHECK(compute_auc(scored({{0.9, 1}, {0.4, 1}, {0.6, 0}, {0.1, 0}})) == 0.75);
  CHECK(compute_auc(scored({{0.5, 1}, {0.5, 1}, {0.5, 0}, {0.5, 0}})) == 0.5);
  CHECK_THROWS_AS(compute_auc(scored({{0.5, 1}, {0.7, 1}})), InvalidArgument);
}

TEST_CASE("AUC matches the pairwise oracle with heavy ties") {
  Rng rng(31);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + rng.index(199);
    const bool ties = i % 2 == 0;
    std::vector<ScoredSample> s(n);
    for (std::size_t j = 0; j < n; ++j) {
      s[j].positive = rng.bernoulli(0.5);
      s[j].covid_probability = ties ? double(rng.index(5)) / 4.0 : rng.uniform01();
    }
    s[0].positive = true;
    s[1].positive = false;
    CHECK(std::abs(compute_auc(s) - oracle::auc_pairs(s)) <= 1e-12);
  }
}

TEST_CASE("compute_metrics thresholds at 0.5 inclusive") {
  const auto s = scored({{0.5, 1}, {0.93, 1}, {0.49, 1}, {0.2, 0}, {0.7, 0}});
  const auto r = compute_metrics(s, 0.25);
  CHECK(r.confusion == cm(2, 1, 1, 1));
  CHECK(r.confusion.total() == s.size());
  CHECK(r.accuracy == doctest::Approx(0.6));
  REQUIRE(r.auc.has_value());
  CHECK(*r.auc == doctest::Approx(oracle::auc_pairs(s)));
  CHECK(r.loss == 0.25);
  CHECK(std::abs(r.f1 - 2 * r.precision * r.recall / (r.precision + r.recall)) < 1e-15);
  CHECK_THROWS_AS(compute_metrics(std::vector<ScoredSample>{}, 0.0), InvalidArgument);
}

TEST_CASE("perfect classifier has no off-diagonal counts") {
  const auto r = compute_metrics(scored({{0.9, 1}, {0.1, 0}, {0.6, 1}}), 0.0);
  CHECK(r.accuracy == 1.0);
  CHECK(r.confusion.fp == 0);
  CHECK(r.confusion.fn == 0);
}

TEST_CASE("single-class evaluation omits AUC") {
  const auto r = compute_metrics(scored({{0.9, 1}, {0.2, 1}}), 0.0);
  CHECK_FALSE(r.auc.has_value());
  const std::string text = format_metrics(r);
  CHECK(text.find("auc") == std::string::npos);
  CHECK_FALSE(parse_metrics(text).auc.has_value());
}

TEST_CASE("metrics text round-trips to six decimals") {
  const auto r = compute_metrics(scored({{0.9, 1}, {0.4, 1}, {0.6, 0}, {0.1, 0}}), 0.123456789);
  const std::string text = format_metrics(r);
  CHECK(text.rfind("accuracy 0.500000\n", 0) == 0);
  CHECK(text.find("auc 0.750000\n") != std::string::npos);
  CHECK(text.find("tp 1\n") != std::string::npos);
  const auto back = parse_metrics(text);
  CHECK(back.confusion == r.confusion);
  CHECK(std::abs(back.loss - 0.123457) < 1e-12);
  CHECK(*back.auc == 0.75);
  CHECK_THROWS_AS(parse_metrics("accuracy x\n"), InvalidArgument);
}
