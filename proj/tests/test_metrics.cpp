#include "swec/metrics.hpp"
#include "swec/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <sstream>

using namespace swec;

namespace {

ConfusionMatrix reference_matrix() {
  return ConfusionMatrix::from_rows({{{13, 0, 0, 0}, {0, 29, 1, 0}, {0, 0, 60, 2}, {0, 0, 3, 12}}});
}

ConfusionMatrix random_matrix(Rng& rng) {
  ConfusionMatrix cm;
  for (int p = 0; p < 4; ++p)
    for (int t = 0; t < 4; ++t) cm.counts(p, t) = static_cast<std::int64_t>(rng.below(20));
  cm.counts(0, 0) += 1;
  return cm;
}

}  // namespace

TEST_CASE("confusion counts predicted rows against target columns") {
  const std::vector<int> same{1, 2, 3, 4};
  const auto id = confusion(same, same);
  CHECK(id.counts == decltype(id.counts)::Identity());
  CHECK(id.accuracy() == 1.0);

  const std::vector<int> ones(8, 1);
  const std::vector<int> targets{1, 2, 3, 4, 1, 2, 3, 4};
  const auto first = confusion(ones, targets);
  for (int t = 0; t < 4; ++t) CHECK(first.counts(0, t) == 2);
  CHECK(first.counts.bottomRows(3).sum() == 0);
  CHECK(first.accuracy() == 0.25);

  const std::vector<int> bad{1, 5};
  const std::vector<int> two{1, 2};
  CHECK_THROWS_AS(confusion(bad, two), ParameterError);
  CHECK_THROWS_AS(confusion(same, two), ParameterError);
  CHECK_THROWS_AS(confusion(std::span<const int>{}, std::span<const int>{}), ParameterError);
}

TEST_CASE("reference confusion matrix aggregates to known values") {
  const auto cm = reference_matrix();
  CHECK(cm.total() == 120);
  const auto r = aggregate(cm);
  CHECK(std::abs(r.accuracy * 100 - 95.00) <= 0.01);
  CHECK(std::abs(*r.macro.precision * 100 - 93.36) <= 0.01);
  CHECK(std::abs(*r.macro.recall * 100 - 94.87) <= 0.01);
  CHECK(std::abs(*r.macro.f1 * 100 - 94.11) <= 0.01);
  CHECK(std::abs(*r.macro.fpr * 100 - 1.875) <= 0.001);
  CHECK(r.undefined_excluded == 0);

  const double pre[] = {100.0, 96.7, 96.8, 80.0};
  const double rec[] = {100.0, 100.0, 93.8, 85.7};
  for (int c = 0; c < 4; ++c) {
    CHECK(std::abs(*r.per_class[c].precision * 100 - pre[c]) <= 0.05);
    CHECK(std::abs(*r.per_class[c].recall * 100 - rec[c]) <= 0.05);
  }
  CHECK(*r.per_class[1].fpr == doctest::Approx(1.0 / 91.0));
  CHECK(*r.per_class[3].fpr == doctest::Approx(3.0 / 106.0));
}

TEST_CASE("hand-worked one-vs-rest substitution") {
  // Class 1 predicted twice, once correctly; nothing else of class 1 exists.
  const auto cm = ConfusionMatrix::from_rows({{{1, 1, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}});
  const auto m = class_metrics(cm, EventClass::CapacitorSwitching);
  CHECK(m.tp == 1);
  CHECK(m.fp == 1);
  CHECK(m.fn == 0);
  CHECK(m.tn == 0);
  CHECK(*m.precision == 0.5);
  CHECK(*m.recall == 1.0);
  CHECK(*m.f1 == doctest::Approx(2.0 / 3.0));
  CHECK(*m.fpr == 1.0);
}

TEST_CASE("empty predicted classes are undefined and excluded from macro means") {
  const auto cm = ConfusionMatrix::from_rows({{{5, 1, 2, 1}, {0, 0, 0, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}}});
  const auto r = aggregate(cm);
  CHECK_FALSE(r.per_class[1].precision.has_value());
  CHECK_FALSE(r.per_class[2].precision.has_value());
  CHECK(r.undefined_excluded >= 3);
  CHECK(*r.macro.precision == doctest::Approx(5.0 / 9.0));
  CHECK(format_percent(r.per_class[1].precision) == "NA");
  CHECK_FALSE(f1_score(std::nullopt, 0.5).has_value());
  CHECK_FALSE(f1_score(0.0, 0.0).has_value());
}

TEST_CASE("perfect diagonal gives perfect scores") {
  const auto r = aggregate(ConfusionMatrix::from_rows({{{3, 0, 0, 0}, {0, 4, 0, 0}, {0, 0, 5, 0}, {0, 0, 0, 6}}}));
  CHECK(r.accuracy == 1.0);
  CHECK(*r.macro.precision == 1.0);
  CHECK(*r.macro.recall == 1.0);
  CHECK(*r.macro.f1 == 1.0);
  CHECK(*r.macro.fpr == 0.0);
}

TEST_CASE("micro precision, recall and F1 equal accuracy") {
  Rng rng(31);
  for (int t = 0; t < 200; ++t) {
    const auto cm = random_matrix(rng);
    const auto r = aggregate(cm);
    CHECK(*r.micro.precision == doctest::Approx(r.accuracy).epsilon(1e-12));
    CHECK(*r.micro.recall == doctest::Approx(r.accuracy).epsilon(1e-12));
    if (r.micro.f1) CHECK(*r.micro.f1 == doctest::Approx(r.accuracy).epsilon(1e-12));
    for (const auto& m : r.per_class) {
      CHECK(m.tp + m.fp + m.fn + m.tn == cm.total());
      for (const auto& v : {m.precision, m.recall, m.f1, m.fpr})
        if (v) {
          CHECK(*v >= 0.0);
          CHECK(*v <= 1.0);
        }
    }
  }
}

TEST_CASE("relabelling classes leaves macro metrics unchanged") {
  Rng rng(32);
  const int perm[] = {2, 0, 3, 1};
  for (int t = 0; t < 50; ++t) {
    const auto cm = random_matrix(rng);
    ConfusionMatrix moved;
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q) moved.counts(perm[p], perm[q]) = cm.counts(p, q);
    const auto a = aggregate(cm);
    const auto b = aggregate(moved);
    CHECK(a.accuracy == b.accuracy);
    CHECK(a.undefined_excluded == b.undefined_excluded);
    for (auto [x, y] : {std::pair{a.macro.precision, b.macro.precision},
                        std::pair{a.macro.recall, b.macro.recall},
                        std::pair{a.macro.fpr, b.macro.fpr}}) {
      REQUIRE(x.has_value() == y.has_value());
      if (x) CHECK(*x == doctest::Approx(*y).epsilon(1e-12));
    }
  }
}

TEST_CASE("percentages round half up to two decimals") {
  CHECK(format_percent(0.95) == "95.00");
  CHECK(format_percent(0.123456) == "12.35");
  CHECK(format_percent(1.0) == "100.00");
  CHECK(format_percent(0.0) == "0.00");
  CHECK(format_percent(0.01875) == "1.88");
  CHECK(format_percent(std::nullopt) == "NA");
}

TEST_CASE("report CSV round trip") {
  const auto r = aggregate(reference_matrix());
  std::ostringstream os;
  write_report_csv(os, "cnn", r);
  const std::string text = os.str();
  CHECK(text.rfind("method,acc,pre_macro,rec_macro,f1_macro,fpr_macro\ncnn,95.00,93.36,94.87,94.11,1.88\n", 0) == 0);
  std::istringstream is(text);
  const auto parsed = read_report_csv(is);
  CHECK(parsed.method == "cnn");
  CHECK(parsed.report.confusion == r.confusion);
  CHECK(parsed.report.accuracy == r.accuracy);

  std::string broken = text;
  broken.replace(broken.find("95.00"), 5, "94.00");
  std::istringstream bad(broken);
  CHECK_THROWS_AS(read_report_csv(bad), FormatError);
  std::istringstream cut(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_report_csv(cut), FormatError);
}
