#pragma once

#include <span>
#include <vector>

#include "qmit/noise.hpp"
#include "qmit/pqc.hpp"
#include "qmit/qsim.hpp"

namespace qmit {

struct LossWeights {
  double fb = 1.0;
  double task = 1.0;

  /// Both nonnegative and finite, not both zero.
  void validate() const;
};

/// Eigenvalues below this are treated as genuinely negative (quasi-state) rather than round-off.
inline constexpr double kClampThreshold = 1e-12;
/// -log F is capped here when F underflows.
inline constexpr double kLossCap = 50.0;

struct FidelityDetail {
  double value;
  double clamped_mass;  // total negative eigenvalue mass removed from both inputs
};

/// Uhlmann fidelity (Tr sqrt(sqrt(sigma) rho sqrt(sigma)))^2. Quasi-states are clamped to
/// their positive part and renormalized before use.
double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma);
FidelityDetail fidelity_detail(const DensityMatrix& rho, const DensityMatrix& sigma);

/// 2 log Tr sqrt(sqrt(sigma) rho sqrt(sigma)) = log F. Diagnostic only.
double log_fidelity_paper_form(const DensityMatrix& rho, const DensityMatrix& sigma);

/// Fidelity and its gradients with respect to the raw (unclamped) inputs:
/// dF = Tr(d_rho drho) + Tr(d_sigma dsigma) for Hermitian perturbations.
struct FidelityGradient {
  double value;
  double clamped_mass;
  CMatrix d_rho;
  CMatrix d_sigma;
};
FidelityGradient fidelity_with_gradient(const CMatrix& rho, const CMatrix& sigma, bool need_rho = true,
                                        bool need_sigma = true);

/// (alpha - 1)^{-1} log Tr[rho^alpha sigma^{1 - alpha}]
double petz_renyi_divergence(const DensityMatrix& rho, const DensityMatrix& sigma, double alpha = 2.0);

/// D_alpha(rho || I / 2^n) from the spectrum of rho.
double divergence_to_maximally_mixed(const DensityMatrix& rho, double alpha = 2.0);
/// The same quantity from the traceless deviation rho - I/2^n of a unit-trace state.
/// Unital evolutions can act on the deviation directly and keep its relative precision.
double divergence_from_deviation(const CMatrix& delta, double alpha = 2.0);

struct FbLoss {
  double value;
  bool capped;
  double clamped_mass;
};

/// -log F(prev, mitigated_prev), capped at kLossCap.
FbLoss forward_backward_loss(const DensityMatrix& prev, const DensityMatrix& mitigated_prev);

struct FbSummary {
  double loss = 0.0;          // mean over blocks
  double clamped_mass = 0.0;  // mean over blocks
  int capped_blocks = 0;
};

/// Blocks of `step` layers: forward the block start through `step` noisy layers, then walk back
/// through V_j^dagger Lambda^-1_j for each layer of the block and compare with the block start.
/// The block start is the noisy chain state (LossOnly) or the mitigated chain state (Cascaded).
FbSummary total_fb_loss(const DensityMatrix& rho0, const CircuitSpec& circuit, const std::vector<NoiseModel>& noise,
                        const MitigationModel& mitigation, int step, ExecutionMode mode);

/// softmax over the first `classes` components of z.
std::vector<double> class_probabilities(std::span<const double> z, int classes);

/// -log softmax(z[0..classes))[label]
double task_loss(std::span<const double> z, int label, int classes);

double total_loss(double fb, double task, const LossWeights& w);

}  // namespace qmit
