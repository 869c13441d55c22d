#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "ds2dp/error.hpp"
#include "ds2dp/tensor.hpp"

namespace ds2dp {

/// Reported when a band (or the whole cube) is reproduced without error.
inline constexpr double kMetricCapDb = 100.0;

struct PsnrResult {
  double mean = 0.0;
  std::vector<double> per_band;
};

struct SsimResult {
  double mean = 0.0;
  std::vector<double> per_band;
};

struct SamResult {
  double radians = 0.0;
  Index skipped = 0; ///< pixels with a zero-norm spectrum in either cube
};

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Per-band 10 log10(peak^2 / MSE) and its mean over bands (MPSNR).
template <typename Scalar>
PsnrResult psnr(const CubeT<Scalar> &ref, const CubeT<Scalar> &test, double peak = 1.0) {
  require_same_shape(ref, test, "psnr");
  if (!(peak > 0.0)) throw ContractError("psnr: peak must be positive");
  PsnrResult out;
  out.per_band.reserve(static_cast<std::size_t>(ref.bands()));
  for (Index k = 0; k < ref.bands(); ++k) {
    double sq = 0.0;
    const auto a = ref.band(k);
    const auto b = test.band(k);
    for (Index i = 0; i < ref.rows(); ++i)
      for (Index j = 0; j < ref.cols(); ++j) {
        const double d = static_cast<double>(a(i, j)) - static_cast<double>(b(i, j));
        sq += d * d;
      }
    const double mse = sq / static_cast<double>(ref.pixels());
    out.per_band.push_back(mse == 0.0 ? kMetricCapDb : 10.0 * std::log10(peak * peak / mse));
  }
  double acc = 0.0;
  for (const double v : out.per_band) acc += v;
  out.mean = out.per_band.empty() ? 0.0 : acc / static_cast<double>(out.per_band.size());
  return out;
}

namespace detail {

inline Eigen::VectorXd gaussian_window(int size, double sigma) {
  Eigen::VectorXd w(size);
  const double center = 0.5 * (size - 1);
  for (int n = 0; n < size; ++n) w[n] = std::exp(-0.5 * std::pow((n - center) / sigma, 2));
  return w / w.sum();
}

// Separable "valid" filtering of a row-major slab with a normalized 1-D window.
inline Eigen::MatrixXd filter_valid(const Eigen::MatrixXd &img, const Eigen::VectorXd &w) {
  const Index n = w.size();
  const Index rows = img.rows() - n + 1;
  const Index cols = img.cols() - n + 1;
  Eigen::MatrixXd horizontal(img.rows(), cols);
  for (Index j = 0; j < cols; ++j) horizontal.col(j) = img.middleCols(j, n) * w;
  Eigen::MatrixXd out(rows, cols);
  for (Index i = 0; i < rows; ++i) out.row(i) = w.transpose() * horizontal.middleRows(i, n);
  return out;
}

} // namespace detail

/// Mean structural similarity per band over all fully contained Gaussian windows.
template <typename Scalar>
SsimResult ssim(const CubeT<Scalar> &ref, const CubeT<Scalar> &test, const SsimOptions &opt = {}) {
  require_same_shape(ref, test, "ssim");
  if (ref.rows() < opt.window || ref.cols() < opt.window)
    throw ShapeError("ssim: image " + std::to_string(ref.rows()) + "x" +
                     std::to_string(ref.cols()) + " is smaller than the " +
                     std::to_string(opt.window) + "x" + std::to_string(opt.window) + " window");
  const Eigen::VectorXd w = detail::gaussian_window(opt.window, opt.sigma);
  const double c1 = std::pow(opt.k1 * opt.dynamic_range, 2);
  const double c2 = std::pow(opt.k2 * opt.dynamic_range, 2);
  SsimResult out;
  for (Index k = 0; k < ref.bands(); ++k) {
    const Eigen::MatrixXd x = ref.band(k).template cast<double>();
    const Eigen::MatrixXd y = test.band(k).template cast<double>();
    const Eigen::ArrayXXd mx = detail::filter_valid(x, w).array();
    const Eigen::ArrayXXd my = detail::filter_valid(y, w).array();
    const Eigen::ArrayXXd sxx = detail::filter_valid(x.cwiseProduct(x), w).array() - mx * mx;
    const Eigen::ArrayXXd syy = detail::filter_valid(y.cwiseProduct(y), w).array() - my * my;
    const Eigen::ArrayXXd sxy = detail::filter_valid(x.cwiseProduct(y), w).array() - mx * my;
    const Eigen::ArrayXXd map = ((2 * mx * my + c1) * (2 * sxy + c2)) /
                                ((mx * mx + my * my + c1) * (sxx + syy + c2));
    out.per_band.push_back(map.mean());
  }
  double acc = 0.0;
  for (const double v : out.per_band) acc += v;
  out.mean = out.per_band.empty() ? 0.0 : acc / static_cast<double>(out.per_band.size());
  return out;
}

/// Mean spectral angle between corresponding pixel spectra. Pixels where either
/// spectrum has zero norm are skipped and counted.
template <typename Scalar> SamResult sam(const CubeT<Scalar> &ref, const CubeT<Scalar> &test) {
  require_same_shape(ref, test, "sam");
  SamResult out;
  double acc = 0.0;
  Index used = 0;
  for (Index i = 0; i < ref.rows(); ++i)
    for (Index j = 0; j < ref.cols(); ++j) {
      double na = 0.0, nb = 0.0;
      for (Index k = 0; k < ref.bands(); ++k) {
        const double a = ref(i, j, k);
        const double b = test(i, j, k);
        na += a * a;
        nb += b * b;
      }
      if (na == 0.0 || nb == 0.0) {
        ++out.skipped;
        continue;
      }
      // arccos of the normalized inner product, evaluated in Kahan's form
      // 2 atan2(|u - v|, |u + v|) on the unit spectra, which stays accurate for
      // nearly parallel spectra and is exactly zero for identical ones.
      const double inv_a = 1.0 / std::sqrt(na);
      const double inv_b = 1.0 / std::sqrt(nb);
      double diff = 0.0, sum = 0.0;
      for (Index k = 0; k < ref.bands(); ++k) {
        const double u = static_cast<double>(ref(i, j, k)) * inv_a;
        const double v = static_cast<double>(test(i, j, k)) * inv_b;
        diff += (u - v) * (u - v);
        sum += (u + v) * (u + v);
      }
      acc += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(sum));
      ++used;
    }
  if (used == 0) throw UndefinedError("sam: every pixel spectrum has zero norm");
  out.radians = acc / static_cast<double>(used);
  return out;
}

/// 10 log10(||clean||^2 / ||noisy - clean||^2), capped when the noise power is zero.
template <typename Scalar> double snr(const CubeT<Scalar> &clean, const CubeT<Scalar> &noisy) {
  require_same_shape(clean, noisy, "snr");
  double signal = 0.0, noise = 0.0;
  for (Index n = 0; n < clean.size(); ++n) {
    const double c = clean.data()[n];
    const double d = static_cast<double>(noisy.data()[n]) - c;
    signal += c * c;
    noise += d * d;
  }
  if (noise == 0.0) return kMetricCapDb;
  return 10.0 * std::log10(signal / noise);
}

struct MetricReport {
  double mpsnr = 0.0;
  std::vector<double> psnr;
  double mssim = 0.0;
  std::vector<double> ssim;
  double sam = 0.0;
  Index sam_skipped = 0;
  double snr = 0.0;
};

MetricReport evaluate(const Cube &ref, const Cube &test, double peak = 1.0);

/// Comma-separated report: a summary block followed by one row per band.
std::string to_csv(const MetricReport &report);
/// Line-oriented human-readable summary.
std::string to_summary(const MetricReport &report);

} // namespace ds2dp
