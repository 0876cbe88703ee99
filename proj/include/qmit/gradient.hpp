#pragma once

#include <vector>

#include "qmit/losses.hpp"
#include "qmit/noise.hpp"
#include "qmit/pqc.hpp"

namespace qmit {

/// Everything that shapes the per-sample objective.
struct ObjectiveSettings {
  LossWeights weights;
  int step = 1;
  int classes = 4;
  ExecutionMode mode = ExecutionMode::LossOnly;
  bool grad_theta = true;
  bool grad_rates = true;
};

struct SampleEvaluation {
  double loss = 0.0;  // alpha_fb * L_fb + alpha_task * L_task
  double fb = 0.0;
  double task = 0.0;
  double clamped_mass = 0.0;
  int capped_blocks = 0;
  std::vector<double> z;
  /// d loss / d params, laid out as [circuit.flat_theta() ..., mitigation.flat_rates() ...].
  /// Empty unless gradients were requested.
  std::vector<double> grad;
};

/// Loss of one encoded sample and, if `want_grad`, its exact gradient by reverse-mode
/// differentiation through the density-matrix chain.
SampleEvaluation evaluate_sample(const CMatrix& rho0, int label, const CircuitSpec& circuit,
                                 const std::vector<NoiseModel>& noise, const MitigationModel& mitigation,
                                 const ObjectiveSettings& settings, bool want_grad);

/// Readout vector of the state the classifier sees (mitigated final state for either mode).
std::vector<double> predict_readout(const CMatrix& rho0, const CircuitSpec& circuit,
                                    const std::vector<NoiseModel>& noise, const MitigationModel& mitigation,
                                    ExecutionMode mode);

}  // namespace qmit
