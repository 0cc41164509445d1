#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bms/detect.hpp"

using namespace bms;

TEST_CASE("perfect predictions score 1.0 across the board") {
  std::vector<std::string> y = {"a", "b", "a", "c", "b"};
  ClassReport r = classification_metrics(y, y);
  CHECK(r.accuracy == 1.0);
  CHECK(r.macro_f1 == doctest::Approx(1.0));
  CHECK(r.weighted_f1 == doctest::Approx(1.0));
  CHECK(r.balanced_accuracy == doctest::Approx(1.0));
  CHECK(r.kappa == doctest::Approx(1.0));
  for (double p : r.precision) CHECK(p == doctest::Approx(1.0));
}

TEST_CASE("constant predictor on balanced labels: kappa collapses to zero") {
  std::vector<std::string> truth = {"a", "a", "b", "b"};
  std::vector<std::string> pred(4, "a");
  ClassReport r = classification_metrics(truth, pred);
  CHECK(r.accuracy == doctest::Approx(0.5));
  CHECK(r.kappa == doctest::Approx(0.0));
  CHECK(r.balanced_accuracy == doctest::Approx(0.5));
}

TEST_CASE("hand-worked 3-row confusion matrix") {
  std::vector<std::string> truth = {"a", "a", "b"};
  std::vector<std::string> pred = {"a", "b", "b"};
  ClassReport r = classification_metrics(truth, pred);
  CHECK(r.accuracy == doctest::Approx(2.0 / 3.0));
  REQUIRE(r.labels == std::vector<std::string>{"a", "b"});
  CHECK(r.confusion[0][0] == 1);
  CHECK(r.confusion[0][1] == 1);
  CHECK(r.confusion[1][0] == 0);
  CHECK(r.confusion[1][1] == 1);
  // class a: P=1, R=1/2, F1=2/3; class b: P=1/2, R=1, F1=2/3
  CHECK(r.precision[0] == doctest::Approx(1.0));
  CHECK(r.recall[0] == doctest::Approx(0.5));
  CHECK(r.f1[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.precision[1] == doctest::Approx(0.5));
  CHECK(r.recall[1] == doctest::Approx(1.0));
  CHECK(r.macro_f1 == doctest::Approx(2.0 / 3.0));
  // kappa oracle: p_o = 2/3, p_e = (2*1 + 1*2)/9 = 4/9
  CHECK(r.kappa == doctest::Approx((2.0 / 3.0 - 4.0 / 9.0) / (1.0 - 4.0 / 9.0)));
  CHECK_THROWS_AS(classification_metrics({}, {}), Error);
  CHECK_THROWS_AS(classification_metrics(truth, {"a"}), Error);
}

TEST_CASE("json report serializes every metric") {
  auto j = classification_metrics({"a", "b"}, {"a", "b"}).to_json();
  CHECK(j.contains("confusion"));
  CHECK(j.contains("kappa"));
  CHECK(j.at("accuracy").get<double>() == 1.0);
}

TEST_CASE("cramers_v: perfect association, independence and symmetry") {
  std::vector<std::string> x, y;
  for (int i = 0; i < 50; ++i) {
    x.push_back(i % 2 ? "p" : "q");
    y.push_back(i % 2 ? "u" : "v");
  }
  CHECK(cramers_v(x, y).value == doctest::Approx(1.0));

  // independent draws over 10k samples stay near zero
  DetRng rng(3);
  std::vector<std::string> a, b;
  for (int i = 0; i < 10000; ++i) {
    a.push_back("a" + std::to_string(rng.next_below(3)));
    b.push_back("b" + std::to_string(rng.next_below(4)));
  }
  CramersV v = cramers_v(a, b);
  CHECK(!v.degenerate);
  CHECK(v.value <= 0.05);
  CHECK(cramers_v(a, b).value == doctest::Approx(cramers_v(b, a).value));
}

TEST_CASE("cramers_v flags single-category series as degenerate") {
  std::vector<std::string> flat(10, "same");
  std::vector<std::string> mixed = {"a", "b", "a", "b", "a",
                                    "b", "a", "b", "a", "b"};
  CramersV v = cramers_v(flat, mixed);
  CHECK(v.degenerate);
  CHECK(v.value == 0.0);
  CHECK_THROWS_AS(cramers_v({}, {}), Error);
  CHECK_THROWS_AS(cramers_v({"a"}, {"a", "b"}), Error);
}

TEST_CASE("subgroup report tallies correctness within target classes") {
  std::vector<std::string> truth = {"f", "f", "f", "ok", "f"};
  std::vector<std::string> pred  = {"f", "ok", "f", "ok", "f"};
  std::vector<std::string> group = {"m", "m", "w", "w", "x"};
  auto rep = subgroup_report(truth, pred, group, {"f"}, {"m", "w"});
  CHECK(rep.at("m").correct == 1);
  CHECK(rep.at("m").incorrect == 1);
  CHECK(rep.at("m").accuracy() == doctest::Approx(0.5));
  CHECK(rep.at("w").correct == 1);
  CHECK(rep.at("w").incorrect == 0);
  CHECK(rep.at("other").correct == 1);  // unknown group collapses
  CHECK(rep.count("x") == 0);
  // row 3 has truth "ok", outside the target classes: not tallied anywhere
  std::int64_t total = 0;
  for (const auto& [g, s] : rep) total += s.correct + s.incorrect;
  CHECK(total == 4);
  CHECK_THROWS_AS(subgroup_report(truth, pred, {"m"}, {"f"}), Error);
}

TEST_CASE("embedding drift angles: 0, pi/2, pi and zero-vector flags") {
  Tensor before = Tensor::matrix(4, 2, {1, 0,
                                        1, 0,
                                        1, 0,
                                        0, 0});
  Tensor after = Tensor::matrix(4, 2, {2, 0,     // same direction
                                       0, 3,     // orthogonal
                                       -1, 0,    // reversed
                                       1, 1});   // was zero
  DriftSummary s = embedding_drift(before, after);
  REQUIRE(s.angles.size() == 4);
  CHECK(s.angles[0] == doctest::Approx(0.0));
  CHECK(s.angles[1] == doctest::Approx(M_PI / 2));
  CHECK(s.angles[2] == doctest::Approx(M_PI));
  CHECK(std::isnan(s.angles[3]));
  CHECK(s.flagged == std::vector<std::int64_t>{3});
  CHECK(s.mean_angle == doctest::Approx(M_PI / 2));
  std::int64_t binned = 0;
  for (auto c : s.histogram) binned += c;
  CHECK(binned == 3);
  CHECK(s.histogram[0] == 1);
  CHECK(s.histogram[17] == 1);
  CHECK_THROWS_AS(embedding_drift(before, Tensor({3, 2})), Error);
  CHECK_THROWS_AS(embedding_drift(before, Tensor({4, 5})), Error);
}

TEST_CASE("auc: perfect, reversed, ties and degenerate labels") {
  std::vector<int> y = {0, 0, 1, 1};
  CHECK(auc_score(y, {0.1, 0.2, 0.8, 0.9}) == doctest::Approx(1.0));
  CHECK(auc_score(y, {0.9, 0.8, 0.2, 0.1}) == doctest::Approx(0.0));
  CHECK(auc_score(y, {0.5, 0.5, 0.5, 0.5}) == doctest::Approx(0.5));
  // midrank tie oracle: scores [1,1,0] with truth [1,0,0]
  // pairs: (pos vs score-1 neg) = 0.5, (pos vs score-0 neg) = 1 -> 0.75
  CHECK(auc_score({1, 0, 0}, {1.0, 1.0, 0.0}) == doctest::Approx(0.75));
  try {
    auc_score({1, 1}, {0.3, 0.4});
    FAIL("expected DegenerateLabels");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DegenerateLabels);
  }
  CHECK_THROWS_AS(auc_score({}, {}), Error);
  CHECK_THROWS_AS(auc_score({1}, {0.1, 0.2}), Error);
}

TEST_CASE("auc equals the pair-counting estimator (property)") {
  DetRng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<int> y;
    std::vector<double> s;
    for (int i = 0; i < 60; ++i) {
      y.push_back(int(rng.next_below(2)));
      s.push_back(double(rng.next_below(10)) / 10.0);  // many ties
    }
    if (std::count(y.begin(), y.end(), 1) == 0 ||
        std::count(y.begin(), y.end(), 0) == 0)
      continue;
    double wins = 0, total = 0;
    for (std::size_t i = 0; i < y.size(); ++i)
      for (std::size_t j = 0; j < y.size(); ++j) {
        if (y[i] != 1 || y[j] != 0) continue;
        total += 1;
        if (s[i] > s[j]) wins += 1;
        else if (s[i] == s[j]) wins += 0.5;
      }
    CHECK(auc_score(y, s) == doctest::Approx(wins / total));
  }
}
