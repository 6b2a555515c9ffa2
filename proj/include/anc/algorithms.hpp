#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Cholesky>
#include <Eigen/LU>
#include <Eigen/QR>
#include <Eigen/SVD>

#include "anc/filtering.hpp"
#include "anc/params.hpp"
#include "anc/result.hpp"
#include "anc/scene.hpp"

namespace anc {

// Adaptive controller state. Weights start at zero (silence before
// adaptation); divergence is detected, never silently propagated.
struct ControllerState {
  Algorithm algorithm = Algorithm::two_point_fxlms;
  HyperParams params;
  FilterWeights weights;
  long step_count = 0;
  double last_finite_norm = 0.0;
  double divergence_reference = -1.0;  // first nonzero ||w|| after an update
};

inline ControllerState make_controller(Algorithm algorithm,
                                       const HyperParams& params,
                                       const WeightLayout& layout) {
  params.validate();
  return {algorithm, params, FilterWeights::zeros(layout), 0, 0.0, -1.0};
}

namespace detail {

// Weight growth beyond 1e6x the first-update norm aborts the run.
constexpr double kDivergenceFactor = 1e6;

inline void commit_update(ControllerState& state) {
  if (!state.weights.w.allFinite())
    throw DivergenceError("controller diverged (non-finite weights) at step " +
                              std::to_string(state.step_count),
                          state.step_count, state.last_finite_norm);
  const double nrm = state.weights.w.norm();
  if (state.divergence_reference > 0 &&
      nrm > kDivergenceFactor * state.divergence_reference)
    throw DivergenceError("controller diverged (||w|| = " + std::to_string(nrm) +
                              ") at step " + std::to_string(state.step_count),
                          state.step_count, nrm);
  if (state.divergence_reference <= 0 && nrm > 0)
    state.divergence_reference = nrm;
  state.last_finite_norm = nrm;
  ++state.step_count;
}

// Default delta is deliberately large: in a causal loop the measured error
// lags the weights by the secondary-path delay, and an undamped constraint
// correction (delta = 0) is a unit-gain delayed feedback that oscillates.
// Scaling delta with the mean constraint-row energy caps the per-step
// correction gain at ~1/11 regardless of signal level. Pass delta = 0.0
// explicitly to recover the exact one-step constraint kill.
inline constexpr double kDefaultDeltaScale = 10.0;

inline double effective_delta(const HyperParams& params, const MatrixXd& gram) {
  if (params.delta) return *params.delta;
  const Eigen::Index n = gram.rows();
  if (n == 0) return 0.0;
  return kDefaultDeltaScale * gram.trace() / static_cast<double>(n);
}

// Step size actually applied to the variance-gradient term.
inline double effective_alpha(const HyperParams& params, double input_energy) {
  if (!params.normalized) return params.alpha;
  return params.alpha / (input_energy + params.norm_floor);
}

// Solves sym * x = rhs by LDLT and verifies the residual, so a rank-deficient
// system surfaces as an error instead of a silently wrong solution.
inline MatrixXd checked_spd_solve(const MatrixXd& sym, const MatrixXd& rhs,
                                  const char* context) {
  Eigen::LDLT<MatrixXd> ldlt(sym);
  MatrixXd x = ldlt.solve(rhs);
  const double scale =
      rhs.norm() + sym.norm() * x.norm() + 1e-300;
  if (!x.allFinite() || (sym * x - rhs).norm() > 1e-8 * scale)
    throw SingularityError(std::string(context) +
                           ": Gram matrix is numerically singular; set a "
                           "regularizer (delta or mu) > 0");
  return x;
}

}  // namespace detail

// ----- FxLMS baselines -----

// w <- w - alpha * X_e' e  (normalized: alpha / (||X_e||_F^2 + floor))
inline void two_point_fxlms_update(ControllerState& state,
                                   const ReferenceSnapshot& snap,
                                   const VectorXd& e) {
  const double alpha =
      detail::effective_alpha(state.params, snap.x_e.squaredNorm());
  state.weights.w.noalias() -= alpha * (snap.x_e.transpose() * e);
  detail::commit_update(state);
}

// w <- w - alpha * (X_e' e + X_z' z), normalized by the total input energy.
// Mic locations are weighted uniformly unless per-mic weights are given.
inline void multi_point_fxlms_update(ControllerState& state,
                                     const ReferenceSnapshot& snap,
                                     const VectorXd& e, const VectorXd& z,
                                     const VectorXd* e_weights = nullptr,
                                     const VectorXd* z_weights = nullptr) {
  if (e_weights && e_weights->size() != e.size())
    throw ValidationError("e_weights length does not match e");
  if (z_weights && z_weights->size() != z.size())
    throw ValidationError("z_weights length does not match z");
  const double alpha = detail::effective_alpha(
      state.params, snap.x_e.squaredNorm() + snap.x_z.squaredNorm());
  const VectorXd we = e_weights ? e_weights->cwiseProduct(e) : e;
  const VectorXd wz = z_weights ? z_weights->cwiseProduct(z) : z;
  state.weights.w.noalias() -=
      alpha * (snap.x_e.transpose() * we + snap.x_z.transpose() * wz);
  detail::commit_update(state);
}

// ----- adaptive LCMV (Frost-GSC form) -----

// lambda = -(X_e X_e' + delta I)^-1 (X_e X_z' z - e / alpha), with alpha the
// step actually applied to the variance term. Solved by symmetric
// factorization, never an explicit inverse.
inline VectorXd compute_lambda(const ReferenceSnapshot& snap, const VectorXd& z,
                               const VectorXd& e, const HyperParams& params) {
  const Eigen::Index n_e = snap.x_e.rows();
  if (n_e == 0) return VectorXd();
  if (n_e > snap.x_e.cols())
    throw ValidationError("compute_lambda requires N_e <= L");
  const double alpha =
      detail::effective_alpha(params, snap.x_z.squaredNorm());
  if (!(alpha > 0))
    throw ValidationError("compute_lambda requires alpha > 0");
  MatrixXd gram = snap.x_e * snap.x_e.transpose();
  gram.diagonal().array() += detail::effective_delta(params, gram);
  const VectorXd rhs = snap.x_e * (snap.x_z.transpose() * z) - e / alpha;
  return -detail::checked_spd_solve(gram, rhs, "compute_lambda");
}

// Lagrangian SGD step: w <- w - alpha (X_z' z + X_e' lambda). Equivalent to
// the projector form w - alpha P^C X_z' z - P^MN e at delta = 0.
inline void lcmv_adaptive_update(ControllerState& state,
                                 const ReferenceSnapshot& snap,
                                 const VectorXd& e, const VectorXd& z) {
  const double alpha =
      detail::effective_alpha(state.params, snap.x_z.squaredNorm());
  if (!(alpha > 0)) {  // adaptation frozen
    detail::commit_update(state);
    return;
  }
  const VectorXd lambda = compute_lambda(snap, z, e, state.params);
  VectorXd direction = snap.x_z.transpose() * z;
  if (lambda.size() > 0) direction.noalias() += snap.x_e.transpose() * lambda;
  state.weights.w.noalias() -= alpha * direction;
  detail::commit_update(state);
}

// P^C = I - X_e' (X_e X_e' + delta I)^-1 X_e. Diagnostic only: the runtime
// update path never materializes an LxL matrix.
inline MatrixXd projector_kernel(const ReferenceSnapshot& snap, double delta) {
  const Eigen::Index L = snap.x_e.cols();
  if (snap.x_e.rows() == 0) return MatrixXd::Identity(L, L);
  MatrixXd gram = snap.x_e * snap.x_e.transpose();
  gram.diagonal().array() += delta;
  const MatrixXd y =
      detail::checked_spd_solve(gram, MatrixXd(snap.x_e), "projector_kernel");
  return MatrixXd::Identity(L, L) - snap.x_e.transpose() * y;
}

// P^MN = X_e' (X_e X_e' + delta I)^-1, the minimum-norm constraint corrector.
inline MatrixXd projector_min_norm(const ReferenceSnapshot& snap, double delta) {
  const Eigen::Index n_e = snap.x_e.rows();
  if (n_e == 0) return MatrixXd::Zero(snap.x_e.cols(), 0);
  MatrixXd gram = snap.x_e * snap.x_e.transpose();
  gram.diagonal().array() += delta;
  const MatrixXd inv = detail::checked_spd_solve(
      gram, MatrixXd(MatrixXd::Identity(n_e, n_e)), "projector_min_norm");
  return snap.x_e.transpose() * inv;
}

// ----- batch LCMV closed form -----

// w_opt = A X_e'(X_e A X_e' + mu I)^-1 (X_e A X_z' d_z - d_e) - A X_z' d_z
// with A = (X_z' X_z + eps I)^-1. When X_z has fewer rows than columns the
// A-products go through the Woodbury identity on the row-sized Gram, so no
// LxL inverse is formed.
inline VectorXd batch_lcmv_solve(const MatrixXd& x_e, const MatrixXd& x_z,
                                 const VectorXd& d_e, const VectorXd& d_z,
                                 const HyperParams& params) {
  const Eigen::Index L = x_z.cols();
  if (x_e.cols() != L) throw ValidationError("X_e and X_z column counts differ");
  if (d_e.size() != x_e.rows() || d_z.size() != x_z.rows())
    throw ValidationError("d_e/d_z lengths do not match X_e/X_z row counts");
  if (!(params.epsilon > 0))
    throw ValidationError("batch_lcmv_solve requires epsilon > 0");
  const double eps = params.epsilon;

  VectorXd a_xzt_dz(L);   // A X_z' d_z
  MatrixXd a_xet(L, x_e.rows());  // A X_e'
  if (x_z.rows() <= L) {
    MatrixXd s = x_z * x_z.transpose();
    s.diagonal().array() += eps;
    Eigen::LLT<MatrixXd> llt(s);
    if (llt.info() != Eigen::Success)
      throw SingularityError("batch_lcmv_solve: row Gram factorization failed");
    // push-through: (X_z'X_z + eps I)^-1 X_z' = X_z' (X_z X_z' + eps I)^-1
    a_xzt_dz.noalias() = x_z.transpose() * llt.solve(d_z);
    a_xet.noalias() =
        (x_e.transpose() - x_z.transpose() * llt.solve(x_z * x_e.transpose())) /
        eps;
  } else {
    MatrixXd r = x_z.transpose() * x_z;
    r.diagonal().array() += eps;
    Eigen::LLT<MatrixXd> llt(r);
    if (llt.info() != Eigen::Success)
      throw SingularityError("batch_lcmv_solve: column Gram factorization failed");
    a_xzt_dz.noalias() = llt.solve(x_z.transpose() * d_z);
    a_xet.noalias() = llt.solve(MatrixXd(x_e.transpose()));
  }

  MatrixXd constraint_gram = x_e * a_xet;  // X_e A X_e'
  constraint_gram.diagonal().array() += params.mu;
  const VectorXd rhs = x_e * a_xzt_dz - d_e;
  const VectorXd nu =
      detail::checked_spd_solve(constraint_gram, rhs, "batch_lcmv_solve");
  return a_xet * nu - a_xzt_dz;
}

// ----- independent KKT oracle -----

// Solves min 1/2 ||d_z + X_z w||^2 s.t. d_e + X_e w = 0 through the saddle
// system [[X_z'X_z, X_e'], [X_e, 0]]; singular systems fall back to a
// pseudoinverse route that returns the minimum-norm minimizer. Kept free of
// the regularized closed form so the two can check each other.
inline VectorXd oracle_constrained_ls(const MatrixXd& x_e, const MatrixXd& x_z,
                                      const VectorXd& d_e, const VectorXd& d_z) {
  const Eigen::Index L = x_e.cols();
  const Eigen::Index n_e = x_e.rows();
  if (x_z.cols() != L) throw ValidationError("X_e and X_z column counts differ");
  if (d_e.size() != n_e || d_z.size() != x_z.rows())
    throw ValidationError("d_e/d_z lengths do not match X_e/X_z row counts");

  const double scale = 1.0 + x_e.norm() + x_z.norm() + d_e.norm() + d_z.norm();

  MatrixXd kkt = MatrixXd::Zero(L + n_e, L + n_e);
  kkt.topLeftCorner(L, L).noalias() = x_z.transpose() * x_z;
  kkt.topRightCorner(L, n_e) = x_e.transpose();
  kkt.bottomLeftCorner(n_e, L) = x_e;
  VectorXd rhs(L + n_e);
  rhs.head(L).noalias() = -(x_z.transpose() * d_z);
  rhs.tail(n_e) = -d_e;

  Eigen::FullPivLU<MatrixXd> lu(kkt);
  if (lu.isInvertible()) {
    const VectorXd sol = lu.solve(rhs);
    if (sol.allFinite() && (kkt * sol - rhs).norm() <= 1e-10 * scale * scale)
      return sol.head(L);
  }

  // Singular saddle system: minimizer set is non-unique (or constraints are
  // rank-deficient). Minimum-norm particular solution plus a nullspace
  // least-squares correction; both via rank-revealing decompositions.
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(x_e);
  const VectorXd w_p = cod.solve(-d_e);
  if ((x_e * w_p + d_e).norm() > 1e-8 * (1.0 + d_e.norm() + x_e.norm() * w_p.norm()))
    throw InfeasibleError("oracle_constrained_ls: constraint system infeasible");
  const Eigen::Index rank = cod.rank();
  if (rank >= L) return w_p;  // constraints pin w completely

  Eigen::JacobiSVD<MatrixXd> svd(x_e, Eigen::ComputeFullV);
  const MatrixXd nullspace = svd.matrixV().rightCols(L - rank);
  const MatrixXd b = x_z * nullspace;
  const VectorXd target = -(d_z + x_z * w_p);
  const VectorXd u = b.bdcSvd(Eigen::ComputeThinU | Eigen::ComputeThinV)
                         .solve(target);
  return w_p + nullspace * u;
}

// ----- full simulation loop -----

struct RunOptions {
  // Collect every snapshot_stride-th snapshot (with matching noise-only mic
  // samples) starting at snapshot_start_frac of the run; 0 disables.
  long snapshot_stride = 0;
  double snapshot_start_frac = 0.75;
  // Secondary-path estimates used for the filtered references; defaults to
  // the true paths. Lets tests inject estimation error.
  const ImpulseResponseSet* estimated_paths = nullptr;
};

// Per-sample loop: noise -> reference pickup -> control output -> physical
// propagation -> filtered-reference snapshot -> weight update. Weights are
// frozen for the first max(N_t, longest path) samples.
inline ExperimentResult run_controller(const SceneConfig& config,
                                       const ImpulseResponseSet& irs,
                                       Algorithm algorithm,
                                       const HyperParams& params,
                                       long n_samples, std::uint64_t seed,
                                       const RunOptions& opts = {}) {
  config.validate();
  irs.validate_against(config);
  params.validate();
  const ImpulseResponseSet& est =
      opts.estimated_paths ? *opts.estimated_paths : irs;
  est.validate_against(config);
  if (n_samples < 1) throw ValidationError("n_samples must be >= 1");

  const WeightLayout layout = WeightLayout::from_config(config);
  if (algorithm == Algorithm::lcmv_adaptive &&
      config.n_primary_mics > layout.size())
    throw ValidationError("lcmv_adaptive requires N_e <= L");

  const VectorXd noise = generate_noise(config.noise, n_samples, seed);
  const long warmup = std::max<long>(config.filter_taps,
                                     std::max(irs.max_path_taps(),
                                              est.max_path_taps()));

  ControllerState state = make_controller(algorithm, params, layout);
  std::vector<FirFilter> ref_pickup;
  for (const auto& h : irs.h_ref) ref_pickup.emplace_back(h);
  RowMatrixXd x_hist = RowMatrixXd::Zero(config.n_refs, config.filter_taps);
  FilteredReferencePipeline pipeline(est, layout);
  ScenePropagator propagator(irs);

  ExperimentResult result;
  result.e.resize(config.n_primary_mics, n_samples);
  result.z.resize(config.n_secondary_mics, n_samples);
  result.d_e.resize(config.n_primary_mics, n_samples);
  result.d_z.resize(config.n_secondary_mics, n_samples);
  result.sample_rate_hz = config.sample_rate_hz;
  result.meta = {algorithm_name(algorithm), params, seed,
                 scene_digest_hex(config, irs), config.sample_rate_hz, warmup};

  const long snapshot_start =
      static_cast<long>(opts.snapshot_start_frac * n_samples);

  PropagatedSample ps;
  VectorXd x_t(config.n_refs), y(config.n_speakers);
  for (long t = 0; t < n_samples; ++t) {
    const double d_t = noise[t];
    for (int r = 0; r < config.n_refs; ++r) x_t[r] = ref_pickup[r].step(d_t);
    push_history(x_hist, x_t);
    control_output(state.weights, x_hist, y);
    propagator.step(d_t, y, ps);
    pipeline.push(x_t);

    result.e.col(t) = ps.e;
    result.z.col(t) = ps.z;
    result.d_e.col(t) = ps.d_e;
    result.d_z.col(t) = ps.d_z;

    if (t < warmup) continue;
    state.step_count = t;
    const ReferenceSnapshot& snap = pipeline.view();
    switch (algorithm) {
      case Algorithm::two_point_fxlms:
        two_point_fxlms_update(state, snap, ps.e);
        break;
      case Algorithm::multi_point_fxlms:
        multi_point_fxlms_update(state, snap, ps.e, ps.z);
        break;
      case Algorithm::lcmv_adaptive:
        lcmv_adaptive_update(state, snap, ps.e, ps.z);
        break;
    }
    if (opts.snapshot_stride > 0 && t >= snapshot_start &&
        (t - snapshot_start) % opts.snapshot_stride == 0)
      result.snapshots.push_back({pipeline.snapshot(), ps.d_e, ps.d_z});
  }
  result.final_weights = state.weights;
  return result;
}

}  // namespace anc
