#pragma once

#include <cstring>
#include <tuple>

#include "anc/common.hpp"
#include "anc/scene.hpp"

namespace anc {

// ----- weight vector layout -----
//
// The stacked control filter w has length L = N_s*N_r*N_t with
// index(s, r, tau) = (s*N_r + r)*N_t + tau: tap index fastest within each
// (speaker, reference) pair. Column index(s,r,tau) of X_e/X_z holds
// tilde_x_{mic,s,r}[t - tau], so e = d_e + X_e w for time-invariant weights.

struct WeightLayout {
  int n_speakers = 0;  // N_s
  int n_refs = 0;      // N_r
  int n_taps = 0;      // N_t

  int size() const { return n_speakers * n_refs * n_taps; }
  int index(int s, int r, int tau) const {
    return (s * n_refs + r) * n_taps + tau;
  }
  std::tuple<int, int, int> unravel(int col) const {
    const int tau = col % n_taps;
    const int pair = col / n_taps;
    return {pair / n_refs, pair % n_refs, tau};
  }
  bool operator==(const WeightLayout&) const = default;

  static WeightLayout from_config(const SceneConfig& c) {
    return {c.n_speakers, c.n_refs, c.filter_taps};
  }
};

struct FilterWeights {
  WeightLayout layout;
  VectorXd w;

  static FilterWeights zeros(const WeightLayout& layout) {
    return {layout, VectorXd::Zero(layout.size())};
  }
  double& at(int s, int r, int tau) { return w[layout.index(s, r, tau)]; }
  double at(int s, int r, int tau) const { return w[layout.index(s, r, tau)]; }
};

// Per-sample view of the filtered-reference matrices.
struct ReferenceSnapshot {
  RowMatrixXd x_e;  // N_e x L
  RowMatrixXd x_z;  // N_z x L
  std::int64_t t = 0;
  WeightLayout layout;
};

// ----- single FIR with its own state -----

class FirFilter {
public:
  explicit FirFilter(VectorXd coeffs)
      : coeffs_(std::move(coeffs)), hist_(VectorXd::Zero(coeffs_.size())) {
    if (coeffs_.size() == 0) throw ValidationError("FIR needs >= 1 coefficient");
  }

  // Pushes one input sample and returns sum_k coeffs[k] * input[t-k].
  double step(double sample) {
    const Eigen::Index n = hist_.size();
    if (n > 1)
      std::memmove(hist_.data() + 1, hist_.data(),
                   static_cast<std::size_t>(n - 1) * sizeof(double));
    hist_[0] = sample;
    return coeffs_.dot(hist_);
  }

  void reset() { hist_.setZero(); }
  const VectorXd& coeffs() const { return coeffs_; }

private:
  VectorXd coeffs_;
  VectorXd hist_;  // hist_[k] = input[t-k]
};

// ----- reference history + control filter output -----

// x_hist(r, tau) = x_r[t - tau]; newest sample enters at column 0.
inline void push_history(RowMatrixXd& hist, const VectorXd& x_t) {
  const Eigen::Index taps = hist.cols();
  for (Eigen::Index r = 0; r < hist.rows(); ++r) {
    double* row = hist.row(r).data();
    if (taps > 1)
      std::memmove(row + 1, row, static_cast<std::size_t>(taps - 1) * sizeof(double));
    row[0] = x_t[r];
  }
}

// y_s[t] = sum_r sum_tau w_{s,r}[tau] * x_r[t - tau]
inline void control_output(const FilterWeights& weights,
                           const RowMatrixXd& x_hist, VectorXd& y_out) {
  const WeightLayout& lay = weights.layout;
  y_out.resize(lay.n_speakers);
  for (int s = 0; s < lay.n_speakers; ++s) {
    double acc = 0.0;
    for (int r = 0; r < lay.n_refs; ++r)
      acc += weights.w.segment(lay.index(s, r, 0), lay.n_taps)
                 .dot(x_hist.row(r));
    y_out[s] = acc;
  }
}

// ----- physical propagation -----

struct PropagatedSample {
  VectorXd e;    // primary mics, noise + control
  VectorXd z;    // secondary mics, noise + control
  VectorXd d_e;  // primary mics, noise-only
  VectorXd d_z;  // secondary mics, noise-only
};

// Runs the true acoustic paths sample by sample. Owns all path filter state.
class ScenePropagator {
public:
  explicit ScenePropagator(const ImpulseResponseSet& irs)
      : n_e_(irs.n_primary), n_z_(irs.n_secondary), n_s_(irs.n_speakers) {
    irs.validate();
    for (const auto& h : irs.p_e) primary_noise_.emplace_back(h);
    for (const auto& h : irs.p_z) secondary_noise_.emplace_back(h);
    for (const auto& h : irs.g_e) primary_ctrl_.emplace_back(h);
    for (const auto& h : irs.g_z) secondary_ctrl_.emplace_back(h);
  }

  void step(double noise_sample, const VectorXd& speaker_out,
            PropagatedSample& out) {
    out.e.resize(n_e_);
    out.z.resize(n_z_);
    out.d_e.resize(n_e_);
    out.d_z.resize(n_z_);
    for (int j = 0; j < n_e_; ++j) {
      double v = primary_noise_[j].step(noise_sample);
      out.d_e[j] = v;
      for (int s = 0; s < n_s_; ++s)
        v += primary_ctrl_[j * n_s_ + s].step(speaker_out[s]);
      out.e[j] = v;
    }
    for (int k = 0; k < n_z_; ++k) {
      double v = secondary_noise_[k].step(noise_sample);
      out.d_z[k] = v;
      for (int s = 0; s < n_s_; ++s)
        v += secondary_ctrl_[k * n_s_ + s].step(speaker_out[s]);
      out.z[k] = v;
    }
  }

private:
  int n_e_, n_z_, n_s_;
  std::vector<FirFilter> primary_noise_, secondary_noise_;
  std::vector<FirFilter> primary_ctrl_, secondary_ctrl_;
};

// ----- filtered-reference assembly -----

// Maintains X_e and X_z in place: one FIR per (mic, speaker, ref) through the
// secondary-path estimate, with each row block shifted per sample. No
// per-sample allocation.
class FilteredReferencePipeline {
public:
  FilteredReferencePipeline(const ImpulseResponseSet& estimated_paths,
                            const WeightLayout& layout) {
    snap_.layout = layout;
    snap_.t = -1;
    snap_.x_e = RowMatrixXd::Zero(estimated_paths.n_primary, layout.size());
    snap_.x_z = RowMatrixXd::Zero(estimated_paths.n_secondary, layout.size());
    if (layout.n_speakers != estimated_paths.n_speakers ||
        layout.n_refs != estimated_paths.n_refs)
      throw ValidationError("weight layout does not match impulse response set");
    for (int j = 0; j < estimated_paths.n_primary; ++j)
      for (int s = 0; s < layout.n_speakers; ++s)
        for (int r = 0; r < layout.n_refs; ++r)
          tilde_e_.emplace_back(estimated_paths.ge(j, s));
    for (int k = 0; k < estimated_paths.n_secondary; ++k)
      for (int s = 0; s < layout.n_speakers; ++s)
        for (int r = 0; r < layout.n_refs; ++r)
          tilde_z_.emplace_back(estimated_paths.gz(k, s));
  }

  // Advances all tilde filters by one reference sample vector.
  void push(const VectorXd& x_t) {
    advance(tilde_e_, snap_.x_e, x_t);
    advance(tilde_z_, snap_.x_z, x_t);
    ++snap_.t;
  }

  // Valid until the next push; copies are the caller's business.
  const ReferenceSnapshot& view() const { return snap_; }
  ReferenceSnapshot snapshot() const { return snap_; }
  const RowMatrixXd& x_e() const { return snap_.x_e; }
  const RowMatrixXd& x_z() const { return snap_.x_z; }

private:
  void advance(std::vector<FirFilter>& bank, RowMatrixXd& x, const VectorXd& x_t) {
    const int pairs = snap_.layout.n_speakers * snap_.layout.n_refs;
    const int taps = snap_.layout.n_taps;
    for (Eigen::Index mic = 0; mic < x.rows(); ++mic) {
      double* row = x.row(mic).data();
      for (int p = 0; p < pairs; ++p) {
        const int r = p % snap_.layout.n_refs;
        const double v = bank[mic * pairs + p].step(x_t[r]);
        double* block = row + p * taps;
        if (taps > 1)
          std::memmove(block + 1, block,
                       static_cast<std::size_t>(taps - 1) * sizeof(double));
        block[0] = v;
      }
    }
  }

  ReferenceSnapshot snap_;
  std::vector<FirFilter> tilde_e_, tilde_z_;  // (mic, s, r) row-major
};

}  // namespace anc
