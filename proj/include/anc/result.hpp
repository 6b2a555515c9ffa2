#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "anc/filtering.hpp"
#include "anc/params.hpp"

namespace anc {

struct RunMetadata {
  std::string algorithm;
  HyperParams params;
  std::uint64_t seed = 0;
  std::string scene_digest;  // hash of scene config + impulse responses
  int sample_rate_hz = 0;
  long warmup_samples = 0;
};

// One recorded snapshot with the matching noise-only mic samples; collected
// on a stride for offline batch comparisons.
struct SnapshotRecord {
  ReferenceSnapshot snap;
  VectorXd d_e;
  VectorXd d_z;
};

// Everything one controller run produces. Rows are microphones, columns are
// samples; d_* hold the simultaneously recorded noise-only field.
struct ExperimentResult {
  RowMatrixXd e;    // N_e x n
  RowMatrixXd z;    // N_z x n
  RowMatrixXd d_e;  // N_e x n
  RowMatrixXd d_z;  // N_z x n
  int sample_rate_hz = 0;
  RunMetadata meta;
  FilterWeights final_weights;
  std::vector<SnapshotRecord> snapshots;

  long n_samples() const { return e.cols(); }
};

}  // namespace anc
