#pragma once

#include <algorithm>
#include <cmath>
#include <mutex>
#include <string>
#include <vector>

#include <fftw3.h>

#include "anc/common.hpp"
#include "anc/result.hpp"

namespace anc {

struct SampleRange {
  long begin = 0;
  long end = 0;  // half-open [begin, end)
};

// Reported figures use the final quarter of a run, past convergence.
inline SampleRange steady_state_range(long n_samples) {
  return {3 * n_samples / 4, n_samples};
}

// 10 log10(sum baseline^2 / sum controlled^2) over the window; positive
// means the controller reduced energy. Baseline is the simultaneously
// recorded noise-only signal, not a before/after split.
inline double noise_reduction_db(const Eigen::Ref<const VectorXd>& controlled,
                                 const Eigen::Ref<const VectorXd>& baseline,
                                 SampleRange window) {
  if (window.begin < 0 || window.end <= window.begin ||
      window.end > controlled.size() || window.end > baseline.size())
    throw ValidationError("noise_reduction_db: window out of range");
  const long n = window.end - window.begin;
  const double base = baseline.segment(window.begin, n).squaredNorm();
  if (!(base > 0))
    throw ValidationError("noise_reduction_db: baseline window energy is zero");
  const double ctrl = controlled.segment(window.begin, n).squaredNorm();
  return 10.0 * std::log10(base / ctrl);
}

struct CurvePoint {
  long t_end = 0;  // sample index just past the window
  double nr_db = 0.0;
};

// Tiled-window NR sequence. hop defaults to the window length
// (non-overlapping); window equal to the full series yields the single
// whole-run NR value.
inline std::vector<CurvePoint> convergence_curve(
    const Eigen::Ref<const VectorXd>& controlled,
    const Eigen::Ref<const VectorXd>& baseline, long window, long hop = 0) {
  if (window < 1) throw ValidationError("convergence_curve: window must be >= 1");
  if (hop <= 0) hop = window;
  const long n = std::min(controlled.size(), baseline.size());
  if (window > n)
    throw ValidationError("convergence_curve: window exceeds the series length");
  std::vector<CurvePoint> curve;
  for (long begin = 0; begin + window <= n; begin += hop)
    curve.push_back({begin + window,
                     noise_reduction_db(controlled, baseline,
                                        {begin, begin + window})});
  return curve;
}

struct PsdEstimate {
  VectorXd freq_hz;   // strictly increasing, 0 .. fs/2
  VectorXd psd;       // one-sided density, power per Hz
  VectorXd psd_db;    // 10 log10(psd), re 1
  long segment = 0;
  double overlap = 0.0;
  long n_segments = 0;
  std::string window = "hann";
};

namespace detail {

// FFTW plan creation/destruction is not thread-safe; execution is.
inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace detail

// Welch averaged periodogram: periodic Hann window, one-sided density
// scaled so that sum(psd) * (fs / segment) matches the series variance.
inline PsdEstimate welch_psd(const Eigen::Ref<const VectorXd>& series,
                             double sample_rate_hz, long segment = 1024,
                             double overlap = 0.5) {
  if (!(sample_rate_hz > 0))
    throw ValidationError("welch_psd: sample rate must be > 0");
  if (segment < 2 || segment % 2 != 0)
    throw ValidationError("welch_psd: segment must be even and >= 2");
  if (segment > series.size())
    throw ValidationError("welch_psd: segment longer than series");
  if (!(overlap >= 0.0 && overlap < 1.0))
    throw ValidationError("welch_psd: overlap must be in [0, 1)");

  const long hop = std::max<long>(
      1, std::lround(static_cast<double>(segment) * (1.0 - overlap)));
  const long n_segs = 1 + (series.size() - segment) / hop;
  const long n_bins = segment / 2 + 1;

  VectorXd hann(segment);
  for (long i = 0; i < segment; ++i)
    hann[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * static_cast<double>(i) /
                                   static_cast<double>(segment));
  const double win_power = hann.squaredNorm();

  double* in = fftw_alloc_real(static_cast<size_t>(segment));
  fftw_complex* out = fftw_alloc_complex(static_cast<size_t>(n_bins));
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(segment), in, out,
                                FFTW_ESTIMATE);
  }

  VectorXd acc = VectorXd::Zero(n_bins);
  for (long s = 0; s < n_segs; ++s) {
    const long off = s * hop;
    for (long i = 0; i < segment; ++i) in[i] = series[off + i] * hann[i];
    fftw_execute(plan);
    for (long k = 0; k < n_bins; ++k)
      acc[k] += out[k][0] * out[k][0] + out[k][1] * out[k][1];
  }

  {
    std::lock_guard<std::mutex> lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
  fftw_free(in);
  fftw_free(out);

  PsdEstimate est;
  est.segment = segment;
  est.overlap = overlap;
  est.n_segments = n_segs;
  est.freq_hz.resize(n_bins);
  est.psd.resize(n_bins);
  est.psd_db.resize(n_bins);
  const double scale =
      1.0 / (static_cast<double>(n_segs) * sample_rate_hz * win_power);
  for (long k = 0; k < n_bins; ++k) {
    est.freq_hz[k] =
        static_cast<double>(k) * sample_rate_hz / static_cast<double>(segment);
    double p = acc[k] * scale;
    if (k != 0 && k != n_bins - 1) p *= 2.0;  // fold negative frequencies
    est.psd[k] = p;
    est.psd_db[k] = 10.0 * std::log10(std::max(p, 1e-300));
  }
  return est;
}

struct HeatmapRow {
  Eigen::Vector3d position_m = Eigen::Vector3d::Zero();
  std::string mic_role;  // "primary" or "secondary"
  double nr_db = 0.0;
};

// Raw point table, one row per microphone; interpolation is left to the
// plotting layer.
inline std::vector<HeatmapRow> heatmap_table(
    const std::vector<Eigen::Vector3d>& positions,
    const std::vector<std::string>& roles, const std::vector<double>& nr_db) {
  if (positions.size() != roles.size() || positions.size() != nr_db.size())
    throw ValidationError("heatmap_table: positions, roles and values must "
                          "have equal length");
  std::vector<HeatmapRow> rows(positions.size());
  for (size_t i = 0; i < positions.size(); ++i)
    rows[i] = {positions[i], roles[i], nr_db[i]};
  return rows;
}

}  // namespace anc
