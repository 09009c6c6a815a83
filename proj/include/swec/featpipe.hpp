#ifndef SWEC_FEATPIPE_HPP
#define SWEC_FEATPIPE_HPP

// Window -> classifier input: mode-1 projection, one level of periodized db4 DWT,
// absolute-peak normalization of the detail band, one row per bus.

#include "swec/synthgrid.hpp"
#include "swec/types.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace swec {

/// Daubechies scaling filter with four vanishing moments (8 taps), sum = sqrt(2).
inline constexpr std::array<double, 8> kDb4Scaling = {
    0.23037781330885523,  0.7148465705525415,   0.6308807679295904,  -0.02798376941698385,
    -0.18703481171888114, 0.030841381835986965, 0.032883011666982945, -0.010597401784997278};

/// Quadrature mirror of kDb4Scaling: g[n] = (-1)^n h[7 - n].
inline constexpr std::array<double, 8> kDb4Wavelet = [] {
  std::array<double, 8> g{};
  for (std::size_t n = 0; n < 8; ++n) g[n] = (n % 2 == 0 ? 1.0 : -1.0) * kDb4Scaling[7 - n];
  return g;
}();

inline constexpr double kPeakEpsilon = 1e-12;

/// Clarke alpha component, (2 va - vb - vc) / 3.
template <typename DA, typename DB, typename DC>
VectorX<typename DA::Scalar> clarke_mode1(const Eigen::MatrixBase<DA>& va,
                                          const Eigen::MatrixBase<DB>& vb,
                                          const Eigen::MatrixBase<DC>& vc) {
  if (va.size() == 0 || va.size() != vb.size() || va.size() != vc.size())
    throw ParameterError("phase sequences must be non-empty and of equal length");
  using Scalar = typename DA::Scalar;
  return ((Scalar(2) * va.reshaped() - vb.reshaped() - vc.reshaped()) / Scalar(3)).eval();
}

/// Mode-1 of an N x 3 phase block.
template <typename Derived>
VectorX<typename Derived::Scalar> clarke_mode1(const Eigen::MatrixBase<Derived>& phases) {
  if (phases.cols() != 3) throw ParameterError("phase block must have three columns");
  return clarke_mode1(phases.col(0), phases.col(1), phases.col(2));
}

template <typename Scalar>
struct DwtLevel {
  VectorX<Scalar> approx;
  VectorX<Scalar> detail;
};

/// One level of the periodized orthogonal db4 transform:
///   approx[k] = sum_n h[n] x[(2k + n) mod N],  detail[k] = sum_n g[n] x[(2k + n) mod N].
template <typename Derived>
DwtLevel<typename Derived::Scalar> dwt_db4_level1(const Eigen::MatrixBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  const Eigen::Index n = x.size();
  if (n < 8 || n % 2 != 0) throw ParameterError("DWT input length must be even and at least 8");
  DwtLevel<Scalar> out{VectorX<Scalar>::Zero(n / 2), VectorX<Scalar>::Zero(n / 2)};
  for (Eigen::Index k = 0; k < n / 2; ++k) {
    Scalar a(0), d(0);
    for (Eigen::Index t = 0; t < 8; ++t) {
      const Scalar v = x((2 * k + t) % n);
      a += Scalar(kDb4Scaling[t]) * v;
      d += Scalar(kDb4Wavelet[t]) * v;
    }
    out.approx(k) = a;
    out.detail(k) = d;
  }
  return out;
}

/// Inverse of dwt_db4_level1 (the transform is orthogonal, so this is its transpose).
template <typename DA, typename DD>
VectorX<typename DA::Scalar> idwt_db4_level1(const Eigen::MatrixBase<DA>& approx,
                                             const Eigen::MatrixBase<DD>& detail) {
  using Scalar = typename DA::Scalar;
  if (approx.size() != detail.size())
    throw ParameterError("approximation and detail lengths differ");
  const Eigen::Index half = approx.size();
  const Eigen::Index n = 2 * half;
  VectorX<Scalar> x = VectorX<Scalar>::Zero(n);
  for (Eigen::Index k = 0; k < half; ++k)
    for (Eigen::Index t = 0; t < 8; ++t)
      x((2 * k + t) % n) +=
          Scalar(kDb4Scaling[t]) * approx(k) + Scalar(kDb4Wavelet[t]) * detail(k);
  return x;
}

/// |x| / max|x|, or all zeros when the peak is at most kPeakEpsilon.
template <typename Derived>
VectorX<typename Derived::Scalar> normalize_abs_peak(const Eigen::MatrixBase<Derived>& coeffs) {
  using Scalar = typename Derived::Scalar;
  VectorX<Scalar> mag = coeffs.reshaped().cwiseAbs();
  if (mag.size() == 0) return mag;
  const Scalar peak = mag.maxCoeff();
  if (!(peak > Scalar(kPeakEpsilon))) return VectorX<Scalar>::Zero(mag.size());
  mag /= peak;
  return mag;
}

/// Stacked normalized detail rows, one per bus in ascending id order. Values in [0, 1].
struct FeatureMatrix {
  MatrixX<double> values;  // B x L
  std::vector<BusId> buses;
  std::optional<EventClass> label;

  Eigen::Index height() const { return values.rows(); }
  Eigen::Index width() const { return values.cols(); }
};

/// Sorts, de-duplicates and validates a bus subset of the monitored set.
std::vector<BusId> canonical_buses(std::span<const BusId> buses);

FeatureMatrix featurize(const MultiBusWindow& window, std::span<const BusId> buses);

/// Energy of the level-1 detail band of one bus's mode-1 window.
double detail_energy(const PhaseMatrix<>& phases);

}  // namespace swec

#endif  // SWEC_FEATPIPE_HPP
