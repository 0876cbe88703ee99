#include "qmit/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qmit/errors.hpp"

namespace qmit {

void LossWeights::validate() const {
  if (!std::isfinite(fb) || !std::isfinite(task) || fb < 0.0 || task < 0.0)
    throw ValidationError("loss weights must be finite and nonnegative");
  if (fb == 0.0 && task == 0.0) throw ValidationError("alpha_fb and alpha_task cannot both be zero");
}

namespace {

/// A state made usable for fidelity: positive part, renormalized.
struct Prepared {
  HermitianEig eig;   // of the raw input
  RVector clamped;    // max(e, 0) when clamping, raw eigenvalues otherwise
  double trace;       // trace of the clamped matrix
  bool was_clamped;
  double clamped_mass;

  /// Number of eigenvalues that are not round-off.
  Eigen::Index rank() const {
    const double top = clamped.cwiseAbs().maxCoeff();
    return (clamped.array() > 1e-14 * top).count();
  }
  CMatrix normalized() const { return eig.vectors * (clamped / trace).asDiagonal() * eig.vectors.adjoint(); }
  CMatrix sqrt_normalized() const {
    RVector s(clamped.size());
    for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = std::sqrt(std::max(clamped[i], 0.0) / trace);
    return eig.vectors * s.asDiagonal() * eig.vectors.adjoint();
  }
};

Prepared prepare(const CMatrix& m) {
  if (hermiticity_defect(m) > 1e-8) throw ValidationError("fidelity input is not Hermitian");
  Prepared p{hermitian_eig(m), {}, 0.0, false, 0.0};
  p.clamped = p.eig.values;
  if (p.eig.values[0] < -kClampThreshold) {
    p.was_clamped = true;
    for (Eigen::Index i = 0; i < p.clamped.size(); ++i) {
      if (p.clamped[i] < 0.0) {
        p.clamped_mass -= p.clamped[i];
        p.clamped[i] = 0.0;
      }
    }
  }
  p.trace = p.clamped.sum();
  if (!(p.trace > 0.0)) throw ComputationError("fidelity input has no positive spectrum");
  return p;
}

/// Adjoint of the clamp-and-normalize map: given G = dF/d(normalized), return dF/d(raw).
CMatrix pull_back(const Prepared& p, const CMatrix& grad_normalized) {
  const CMatrix normalized = p.normalized();
  const double shift = real_trace_product(grad_normalized, normalized);
  CMatrix g = grad_normalized;
  g.diagonal().array() -= shift;
  g /= p.trace;
  if (!p.was_clamped) return g;
  // Daleckii-Krein with f(x) = max(x, 0)
  const RVector& e = p.eig.values;
  const Eigen::Index d = e.size();
  CMatrix inner = p.eig.vectors.adjoint() * g * p.eig.vectors;
  for (Eigen::Index j = 0; j < d; ++j) {
    for (Eigen::Index i = 0; i < d; ++i) {
      double gamma;
      const double fi = std::max(e[i], 0.0), fj = std::max(e[j], 0.0);
      if (i == j || e[i] == e[j]) gamma = e[i] > 0.0 ? 1.0 : 0.0;
      else gamma = (fi - fj) / (e[i] - e[j]);
      inner(i, j) *= gamma;
    }
  }
  return p.eig.vectors * inner * p.eig.vectors.adjoint();
}

/// sqrt(F) and, optionally, d sqrt(F)/d(target) where M = s * target * s, s = sqrt(other).
/// d Tr sqrt(M) = 1/2 Tr(s M^{-1/2} s d target), M^{-1/2} on the support of M.
struct RootTrace {
  double root;
  CMatrix grad;
};

/// M has rank at most `rank`; the remaining eigenvalues are round-off and are dropped, since their
/// square roots would otherwise add noise of order sqrt(eps).
RootTrace root_trace(const CMatrix& s_other, const CMatrix& target, Eigen::Index rank, bool want_grad) {
  const CMatrix m = s_other * target * s_other;
  const HermitianEig eig = hermitian_eig(m);
  const Eigen::Index d = eig.values.size();
  const double top = std::max(eig.values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  const double cutoff = 1e-14 * top;
  double root = 0.0;
  RVector inv_sqrt = RVector::Zero(d);
  for (Eigen::Index i = d - rank; i < d; ++i) {
    const double v = eig.values[i];
    root += std::sqrt(std::max(v, 0.0));
    inv_sqrt[i] = v > cutoff ? 1.0 / std::sqrt(v) : 0.0;
  }
  RootTrace out{root, {}};
  if (want_grad) {
    out.grad = 0.5 * s_other * (eig.vectors * inv_sqrt.asDiagonal() * eig.vectors.adjoint()) * s_other;
  }
  return out;
}

}  // namespace

FidelityGradient fidelity_with_gradient(const CMatrix& rho, const CMatrix& sigma, bool need_rho, bool need_sigma) {
  if (rho.rows() != sigma.rows() || rho.cols() != sigma.cols()) throw ValidationError("fidelity: dimension mismatch");
  const Prepared pr = prepare(rho);
  const Prepared ps = prepare(sigma);
  const CMatrix sr = pr.sqrt_normalized();
  const CMatrix rn = pr.normalized();
  const CMatrix sn = ps.normalized();

  // sqrt F from M = sqrt(rho) sigma sqrt(rho); its gradient is with respect to sigma
  const Eigen::Index rank = std::min(pr.rank(), ps.rank());
  const RootTrace via_rho = root_trace(sr, sn, rank, need_sigma);
  const double root = via_rho.root;
  FidelityGradient out{root * root, pr.clamped_mass + ps.clamped_mass, {}, {}};
  if (need_sigma) out.d_sigma = pull_back(ps, 2.0 * root * via_rho.grad);
  if (need_rho) {
    const RootTrace via_sigma = root_trace(ps.sqrt_normalized(), rn, rank, true);
    out.d_rho = pull_back(pr, 2.0 * root * via_sigma.grad);
  }
  return out;
}

FidelityDetail fidelity_detail(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.qubits() != sigma.qubits()) throw ValidationError("fidelity: qubit count mismatch");
  const FidelityGradient g = fidelity_with_gradient(rho.matrix(), sigma.matrix(), false, false);
  return {g.value, g.clamped_mass};
}

double fidelity(const DensityMatrix& rho, const DensityMatrix& sigma) { return fidelity_detail(rho, sigma).value; }

double log_fidelity_paper_form(const DensityMatrix& rho, const DensityMatrix& sigma) {
  if (rho.qubits() != sigma.qubits()) throw ValidationError("fidelity: qubit count mismatch");
  const CMatrix s = hermitian_sqrt(sigma.matrix());
  const CMatrix inner = hermitian_sqrt(s * rho.matrix() * s);
  const double tr = inner.trace().real();
  if (!(tr > 0.0)) throw ComputationError("Tr sqrt(sqrt(sigma) rho sqrt(sigma)) is not positive");
  return 2.0 * std::log(tr);
}

double petz_renyi_divergence(const DensityMatrix& rho, const DensityMatrix& sigma, double alpha) {
  if (rho.qubits() != sigma.qubits()) throw ValidationError("divergence: qubit count mismatch");
  if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha))
    throw ValidationError("Renyi order must be positive, finite and != 1");
  if (alpha > 1.0 && sigma.min_eigenvalue() <= 1e-14)
    throw ValidationError("reference state must be full rank for alpha > 1");
  // eigenvalues at round-off level count as zero; their fractional powers would not be small
  auto power = [](const CMatrix& m, double p) {
    const HermitianEig e = hermitian_eig(m);
    const double cut = 1e-14 * std::max(e.values.maxCoeff(), 0.0);
    return reconstruct(e, [&](double x) { return x > cut ? std::pow(x, p) : 0.0; });
  };
  const CMatrix a = power(rho.matrix(), alpha);
  const CMatrix b = power(sigma.matrix(), 1.0 - alpha);
  const double tr = real_trace_product(a, b);
  if (!(tr > 0.0)) throw ComputationError("Tr[rho^a sigma^(1-a)] is not positive");
  return std::log(tr) / (alpha - 1.0);
}

namespace {

/// (1 + u)^alpha - 1 - alpha u without cancellation for small u.
double renyi_excess(double u, double alpha) {
  if (alpha == 2.0) return u * u;
  if (u == -1.0) return alpha - 1.0;
  if (std::abs(u) < 1e-3) {
    double term = 1.0, sum = 0.0;
    for (int k = 2; k <= 7; ++k) {
      term = k == 2 ? alpha * (alpha - 1.0) / 2.0 * u * u : term * (alpha - k + 1) / k * u;
      sum += term;
    }
    return sum;
  }
  return std::expm1(alpha * std::log1p(u)) - alpha * u;
}

}  // namespace

double divergence_to_maximally_mixed(const DensityMatrix& rho, double alpha) {
  if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha))
    throw ValidationError("Renyi order must be positive, finite and != 1");
  // Written in terms of delta = rho / Tr rho - I/d so that states close to I/d keep full
  // relative precision: D = log1p(sum_i g(d delta_i) / d) / (alpha - 1),
  // g(u) = (1 + u)^alpha - 1 - alpha u.
  CMatrix delta = rho.matrix() / rho.trace();
  delta.diagonal().array() -= 1.0 / static_cast<double>(delta.rows());
  return divergence_from_deviation(delta, alpha);
}

double divergence_from_deviation(const CMatrix& delta, double alpha) {
  if (!(alpha > 0.0) || alpha == 1.0 || !std::isfinite(alpha))
    throw ValidationError("Renyi order must be positive, finite and != 1");
  const auto d = static_cast<double>(delta.rows());
  const RVector e = hermitian_eig(delta).values;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < e.size(); ++i) {
    const double u = std::max(d * e[i], -1.0);
    sum += renyi_excess(u, alpha);
  }
  return std::log1p(sum / d) / (alpha - 1.0);
}

FbLoss forward_backward_loss(const DensityMatrix& prev, const DensityMatrix& mitigated_prev) {
  const FidelityDetail f = fidelity_detail(prev, mitigated_prev);
  const double fid = std::min(f.value, 1.0);
  if (fid <= std::exp(-kLossCap)) return {kLossCap, true, f.clamped_mass};
  return {std::max(0.0, -std::log(fid)), false, f.clamped_mass};
}

FbSummary total_fb_loss(const DensityMatrix& rho0, const CircuitSpec& circuit, const std::vector<NoiseModel>& noise,
                        const MitigationModel& mitigation, int step, ExecutionMode mode) {
  const auto num_layers = static_cast<int>(circuit.num_layers());
  if (step < 1 || num_layers % step != 0)
    throw ValidationError("step size " + std::to_string(step) + " does not divide " + std::to_string(num_layers) +
                          " layers");
  const MitigatedPass pass = forward_mitigated(rho0, circuit, noise, mitigation, mode);
  const int n = circuit.n;
  FbSummary summary;
  const int blocks = num_layers / step;
  for (int b = 0; b < blocks; ++b) {
    const int start = b * step;
    const DensityMatrix& block_start =
        start == 0 ? rho0
                   : (mode == ExecutionMode::LossOnly ? pass.states[static_cast<std::size_t>(start - 1)]
                                                      : pass.mitigated[static_cast<std::size_t>(start - 1)]);
    CMatrix t = block_start.matrix();
    for (int j = start; j < start + step; ++j) {
      apply_layer(t, circuit.layers[static_cast<std::size_t>(j)]);
      apply_channel_inplace(t, noise[static_cast<std::size_t>(j)]);
    }
    for (int j = start + step - 1; j >= start; --j) {
      apply_inverse_channel_inplace(t, mitigation.layers[static_cast<std::size_t>(j)]);
      apply_layer_adjoint(t, circuit.layers[static_cast<std::size_t>(j)]);
    }
    const FbLoss l = forward_backward_loss(block_start, DensityMatrix(n, std::move(t), StateCheck::None));
    summary.loss += l.value;
    summary.clamped_mass += l.clamped_mass;
    summary.capped_blocks += l.capped ? 1 : 0;
  }
  summary.loss /= blocks;
  summary.clamped_mass /= blocks;
  return summary;
}

std::vector<double> class_probabilities(std::span<const double> z, int classes) {
  if (classes < 1 || static_cast<std::size_t>(classes) > z.size())
    throw ValidationError("class count " + std::to_string(classes) + " exceeds readout length " +
                          std::to_string(z.size()));
  const auto c = static_cast<std::size_t>(classes);
  const double top = *std::max_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(c));
  std::vector<double> p(c);
  double sum = 0.0;
  for (std::size_t i = 0; i < c; ++i) sum += p[i] = std::exp(z[i] - top);
  for (auto& v : p) v /= sum;
  return p;
}

double task_loss(std::span<const double> z, int label, int classes) {
  if (label < 0 || label >= classes)
    throw ValidationError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  if (static_cast<std::size_t>(classes) > z.size()) throw ValidationError("class count exceeds readout length");
  const auto c = static_cast<std::size_t>(classes);
  const double top = *std::max_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(c));
  double sum = 0.0;
  for (std::size_t i = 0; i < c; ++i) sum += std::exp(z[i] - top);
  return -(z[static_cast<std::size_t>(label)] - top - std::log(sum));
}

double total_loss(double fb, double task, const LossWeights& w) { return w.fb * fb + w.task * task; }

}  // namespace qmit
