#include "db4_oracle.hpp"
#include "swec/featpipe.hpp"
#include "swec/rng.hpp"
#include "swec/synthgrid.hpp"

#include <doctest.h>

#include <limits>
#include <numbers>

using namespace swec;

namespace {

VectorX<double> random_vector(Rng& rng, Eigen::Index n) {
  VectorX<double> x(n);
  for (Eigen::Index i = 0; i < n; ++i) x(i) = rng.normal();
  return x;
}

}  // namespace

TEST_CASE("Clarke alpha mode") {
  PhaseMatrix<> ex(3, 3);
  ex << 1.0, -0.5, -0.5,
        0.7, 0.7, 0.7,
        1.0, 0.0, 0.0;
  const VectorX<double> m = clarke_mode1(ex);
  CHECK(m(0) == doctest::Approx(1.0));
  CHECK(m(1) == 0.0);
  CHECK(m(2) == doctest::Approx(2.0 / 3.0));
  CHECK_THROWS_AS(clarke_mode1(VectorX<double>::Ones(3), VectorX<double>::Ones(3),
                               VectorX<double>::Ones(2)),
                  ParameterError);

  Rng rng(5);
  PhaseMatrix<> x(50, 3), y(50, 3);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (int p = 0; p < 3; ++p) {
      x(i, p) = rng.normal();
      y(i, p) = rng.normal();
    }
  const VectorX<double> lin = clarke_mode1(PhaseMatrix<>(2.5 * x - 1.5 * y));
  const VectorX<double> sep = 2.5 * clarke_mode1(x) - 1.5 * clarke_mode1(y);
  CHECK((lin - sep).cwiseAbs().maxCoeff() < 1e-12);

  PhaseMatrix<> shifted = x;
  shifted.array() += 3.25;
  CHECK((clarke_mode1(shifted) - clarke_mode1(x)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("db4 taps match the spectral factorization oracle") {
  const auto oracle = test::daubechies_scaling(4);
  REQUIRE(oracle.size() == 8);
  CHECK(oracle[0] == doctest::Approx(0.2303778133).epsilon(1e-9));
  for (std::size_t i = 0; i < 8; ++i) CHECK(std::abs(kDb4Scaling[i] - oracle[i]) < 1e-10);

  double sum = 0.0, energy = 0.0;
  for (double h : kDb4Scaling) {
    sum += h;
    energy += h * h;
  }
  CHECK(sum == doctest::Approx(std::numbers::sqrt2).epsilon(1e-14));
  CHECK(energy == doctest::Approx(1.0).epsilon(1e-12));
  for (std::size_t i = 0; i < 8; ++i)
    CHECK(kDb4Wavelet[i] == doctest::Approx((i % 2 ? -1.0 : 1.0) * kDb4Scaling[7 - i]));
}

TEST_CASE("constant input has zero detail and sqrt2 approximation") {
  const VectorX<double> x = VectorX<double>::Ones(16);
  const auto lv = dwt_db4_level1(x);
  CHECK(lv.detail.size() == 8);
  CHECK(lv.detail.cwiseAbs().maxCoeff() < 1e-15);
  for (Eigen::Index i = 0; i < 8; ++i)
    CHECK(lv.approx(i) == doctest::Approx(std::numbers::sqrt2).epsilon(1e-14));
  const VectorX<double> back = idwt_db4_level1(lv.approx, VectorX<double>::Zero(8));
  CHECK((back - x).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("periodized transform is orthogonal") {
  Rng rng(12);
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index n = 8 + 2 * static_cast<Eigen::Index>(rng.below(200));
    const VectorX<double> x = random_vector(rng, n);
    const auto lv = dwt_db4_level1(x);
    const double parseval = lv.approx.squaredNorm() + lv.detail.squaredNorm() - x.squaredNorm();
    CHECK(std::abs(parseval) < 1e-9);
    CHECK((idwt_db4_level1(lv.approx, lv.detail) - x).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("cubic polynomials vanish in the interior detail") {
  const Eigen::Index n = 64;
  VectorX<double> x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / n;
    x(i) = 0.3 - 1.2 * t + 2.0 * t * t - 0.7 * t * t * t;
  }
  const auto lv = dwt_db4_level1(x);
  for (Eigen::Index k = 4; k <= n / 2 - 5; ++k)
    CHECK(std::abs(lv.detail(k)) < 1e-9 * x.cwiseAbs().maxCoeff());
}

TEST_CASE("dwt and idwt reject bad lengths") {
  CHECK_THROWS_AS(dwt_db4_level1(VectorX<double>::Ones(9)), ParameterError);
  CHECK_THROWS_AS(dwt_db4_level1(VectorX<double>::Ones(6)), ParameterError);
  CHECK_THROWS_AS(idwt_db4_level1(VectorX<double>::Ones(4), VectorX<double>::Ones(5)),
                  ParameterError);
  CHECK(idwt_db4_level1(VectorX<double>::Zero(4), VectorX<double>::Zero(4)).isZero(0.0));
}

TEST_CASE("absolute peak normalization") {
  VectorX<double> x(3);
  x << 0.5, -1.0, 0.25;
  const VectorX<double> y = normalize_abs_peak(x);
  CHECK(y(0) == 0.5);
  CHECK(y(1) == 1.0);
  CHECK(y(2) == 0.25);
  CHECK(normalize_abs_peak(VectorX<double>::Zero(3)).isZero(0.0));
  CHECK(normalize_abs_peak(VectorX<double>::Constant(3, 1e-13)).isZero(0.0));

  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const VectorX<double> r = random_vector(rng, 31);
    const VectorX<double> once = normalize_abs_peak(r);
    CHECK(once.maxCoeff() == 1.0);
    CHECK(once.minCoeff() >= 0.0);
    CHECK(normalize_abs_peak(once) == once);
  }
}

TEST_CASE("featurize stacks one normalized detail row per bus") {
  const auto spec = make_event_spec(EventClass::CapacitorSwitching, 90.0, BusId::Bus675,
                                    CapacitorParams{2});
  const auto rec = synth_event(spec, 20000.0, 3);
  const auto w = extract_window(rec, GeneratorOptions{});
  const auto fm = featurize(w, kMonitoredBuses);
  CHECK(fm.height() == 3);
  CHECK(fm.width() == 166);
  CHECK(fm.buses == std::vector<BusId>(kMonitoredBuses.begin(), kMonitoredBuses.end()));
  CHECK(fm.values.minCoeff() >= 0.0);
  CHECK(fm.values.maxCoeff() <= 1.0);
  for (Eigen::Index r = 0; r < 3; ++r) CHECK(fm.values.row(r).maxCoeff() == 1.0);

  // Row for bus 671 computed by hand.
  const VectorX<double> mode1 = clarke_mode1(w[1].samples);
  const VectorX<double> row = normalize_abs_peak(dwt_db4_level1(mode1).detail);
  CHECK(fm.values.row(1).transpose() == row);

  // Unordered subsets are stacked in ascending bus order.
  const std::vector<BusId> pick{BusId::Bus675, BusId::Bus632};
  const auto two = featurize(w, pick);
  CHECK(two.height() == 2);
  CHECK(two.values.row(0) == fm.values.row(0));
  CHECK(two.values.row(1) == fm.values.row(2));
}

TEST_CASE("featurize at the lowest rate on one bus") {
  const auto spec = make_event_spec(EventClass::Fault, 20.0, BusId::Bus632,
                                    FaultParams{FaultType::LG, 0});
  const auto rec = synth_event(spec, 1250.0, 2);
  const std::vector<BusId> one{BusId::Bus632};
  const auto fm = featurize(extract_window(rec, GeneratorOptions{}), one);
  CHECK(fm.height() == 1);
  CHECK(fm.width() == 10);
}

TEST_CASE("featurize rejects missing or unmonitored buses") {
  const auto spec = make_event_spec(EventClass::Fault, 20.0, BusId::Bus632, FaultParams{});
  const auto w = extract_window(synth_event(spec, 5000.0, 2), GeneratorOptions{});
  const MultiBusWindow partial{w[0]};
  const std::vector<BusId> want{BusId::Bus632, BusId::Bus671};
  CHECK_THROWS_AS(featurize(partial, want), ParameterError);
  const std::vector<BusId> bad{BusId::Bus634};
  CHECK_THROWS_AS(featurize(w, bad), ParameterError);
  const std::vector<BusId> dup{BusId::Bus632, BusId::Bus632};
  CHECK_THROWS_AS(featurize(w, dup), ParameterError);
}

/// Detail energy over the coefficients whose filter support does not wrap around the
/// window end. The wrapped ones see the jump between the last and first sample, which a
/// non-integer number of cycles makes nonzero even for a pure sinusoid.
double interior_detail_energy(const PhaseMatrix<>& phases) {
  const auto d = dwt_db4_level1(clarke_mode1(phases)).detail;
  const Eigen::Index keep = (phases.rows() - 8) / 2 + 1;
  return d.head(keep).squaredNorm();
}

TEST_CASE("steady windows carry far less detail energy than capacitor switching") {
  GeneratorOptions o;
  o.snr_db = std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (const auto& spec : GeneratorGrid::defaults().enumerate(o)) {
    if (spec.event_class != EventClass::CapacitorSwitching) continue;
    // Same record and window position with the disturbance switched off.
    EventSpec quiet = spec;
    std::get<CapacitorParams>(quiet.params).amplitude_scale = 0.0;
    const auto w = extract_window(synth_event(spec, 20000.0, 1, o), o);
    const auto s = extract_window(synth_event(quiet, 20000.0, 1, o), o);
    for (std::size_t b = 0; b < w.size(); ++b)
      worst = std::max(worst, interior_detail_energy(s[b].samples) /
                                  interior_detail_energy(w[b].samples));
  }
  CHECK(worst < 0.1);
}
