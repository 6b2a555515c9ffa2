#pragma once

#include <optional>
#include <string>

#include "anc/common.hpp"

namespace anc {

enum class Algorithm { two_point_fxlms, multi_point_fxlms, lcmv_adaptive };

inline const char* algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::two_point_fxlms: return "two_point_fxlms";
    case Algorithm::multi_point_fxlms: return "multi_point_fxlms";
    case Algorithm::lcmv_adaptive: return "lcmv_adaptive";
  }
  return "unknown";
}

inline Algorithm algorithm_from_name(const std::string& name) {
  if (name == "two_point_fxlms") return Algorithm::two_point_fxlms;
  if (name == "multi_point_fxlms") return Algorithm::multi_point_fxlms;
  if (name == "lcmv_adaptive") return Algorithm::lcmv_adaptive;
  throw ValidationError("unrecognized algorithm name: " + name);
}

struct HyperParams {
  double alpha = 0.5;      // learning rate
  double epsilon = 1e-8;   // regularizer on X_z'X_z in the batch solver
  double mu = 1e-8;        // regularizer on the constraint Gram (batch solver)
  // Regularizer on X_e X_e' in the adaptive update. Unset -> per-snapshot
  // default 10 * trace(X_e X_e') / N_e, which damps the constraint correction
  // enough to stay stable against the secondary-path loop delay; 0 -> exact
  // one-step constraint kill (only safe when the error has no loop lag).
  std::optional<double> delta;
  bool normalized = true;
  double norm_floor = 1e-10;

  // alpha = 0 is allowed: it freezes adaptation, giving the no-control
  // baseline with the full machinery still running.
  void validate() const {
    if (!(alpha >= 0)) throw ValidationError("alpha must be >= 0");
    if (epsilon < 0) throw ValidationError("epsilon must be >= 0");
    if (mu < 0) throw ValidationError("mu must be >= 0");
    if (delta && *delta < 0) throw ValidationError("delta must be >= 0");
    if (!(norm_floor > 0)) throw ValidationError("norm_floor must be > 0");
  }
};

}  // namespace anc
