#include "qmit/gradient.hpp"

#include <cmath>

#include "qmit/errors.hpp"
#include "qmit/kernels.hpp"

namespace qmit {

namespace {

constexpr std::size_t kNoParam = static_cast<std::size_t>(-1);

enum class OpKind { Rotation, Cnot, PauliMix, InverseMix };

struct Op {
  OpKind kind;
  int in;
  int out;
  // Rotation
  Axis axis = Axis::X;
  int qubit = 0;
  double angle = 0.0;  // signed angle actually applied
  double sign = 1.0;   // d angle / d param
  // Cnot
  int control = 0;
  int target = 0;
  // PauliMix / InverseMix: out = a in + b sigma in sigma
  kernels::PauliMask mask{};
  double a = 1.0;
  double b = 0.0;
  double rate = 0.0;
  std::size_t param = kNoParam;
};

struct FidelityTerm {
  int reference;  // block start
  int probe;      // walked-back state
  double weight;
};

struct TaskTerm {
  int node;
  int label;
  double weight;
};

/// Density matrices produced by a chain of linear maps, recorded for the adjoint sweep.
class StateTape {
 public:
  StateTape(int n, std::size_t num_params) : n_(n), grad_(num_params, 0.0) {}

  int input(const CMatrix& rho) {
    values_.push_back(rho);
    depends_.push_back(false);
    return static_cast<int>(values_.size()) - 1;
  }

  const CMatrix& value(int node) const { return values_[static_cast<std::size_t>(node)]; }

  int rotation(int in, Axis axis, int qubit, double theta, double sign, std::size_t param) {
    CMatrix v = value(in);
    const double angle = sign * theta;
    kernels::conjugate_single(v, rotation_matrix(axis, angle), qubit, n_);
    Op op{OpKind::Rotation, in, 0};
    op.axis = axis;
    op.qubit = qubit;
    op.angle = angle;
    op.sign = sign;
    op.param = param;
    return record(std::move(v), op, param != kNoParam);
  }

  int cnot(int in, int control, int target) {
    CMatrix v = value(in);
    kernels::conjugate_cnot(v, control, target, n_);
    Op op{OpKind::Cnot, in, 0};
    op.control = control;
    op.target = target;
    return record(std::move(v), op, false);
  }

  int pauli_mix(int in, kernels::PauliMask mask, double a, double b, OpKind kind, double rate, std::size_t param) {
    CMatrix v = value(in);
    kernels::pauli_mix(v, mask, a, b);
    Op op{kind, in, 0};
    op.mask = mask;
    op.a = a;
    op.b = b;
    op.rate = rate;
    op.param = param;
    return record(std::move(v), op, param != kNoParam);
  }

  void add_fidelity(int reference, int probe, double weight) { fidelity_terms_.push_back({reference, probe, weight}); }
  void add_task(int node, int label, double weight) { task_terms_.push_back({node, label, weight}); }

  /// Evaluates the recorded loss terms; fills `eval` and, when requested, the gradient.
  void finish(SampleEvaluation& eval, const ObjectiveSettings& s, bool want_grad) {
    if (want_grad) adjoint_.assign(values_.size(), CMatrix());
    const double blocks = static_cast<double>(fidelity_terms_.size());
    for (const auto& t : fidelity_terms_) {
      const bool need_ref = want_grad && depends(t.reference);
      const bool need_probe = want_grad && depends(t.probe);
      const FidelityGradient f = fidelity_with_gradient(value(t.reference), value(t.probe), need_ref, need_probe);
      const double fid = std::min(f.value, 1.0);
      eval.clamped_mass += f.clamped_mass / blocks;
      if (fid <= std::exp(-kLossCap)) {
        eval.fb += kLossCap / blocks;
        ++eval.capped_blocks;
        continue;  // flat beyond the cap
      }
      eval.fb += std::max(0.0, -std::log(fid)) / blocks;
      if (!want_grad || t.weight == 0.0) continue;
      const double scale = -t.weight / f.value;
      if (need_ref) accumulate(t.reference, scale * f.d_rho);
      if (need_probe) accumulate(t.probe, scale * f.d_sigma);
    }
    for (const auto& t : task_terms_) {
      const CMatrix& rho = value(t.node);
      eval.z = readout_z(rho, n_);
      eval.task = task_loss(eval.z, t.label, s.classes);
      if (!want_grad || t.weight == 0.0 || !depends(t.node)) continue;
      const std::vector<double> p = class_probabilities(eval.z, s.classes);
      // dL/dz_i = p_i - [i == label]; dz_i/drho = H_i (diagonal)
      const std::size_t d = dimension(n_);
      CMatrix g = CMatrix::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
      for (int i = 0; i < s.classes; ++i) {
        const double dz = t.weight * (p[static_cast<std::size_t>(i)] - (i == t.label ? 1.0 : 0.0));
        const std::size_t bit = qubit_bit(i, n_);
        for (std::size_t k = 0; k < d; ++k)
          g(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k)) += (k & bit) ? -dz : dz;
      }
      accumulate(t.node, g);
    }
    eval.loss = total_loss(eval.fb, eval.task, s.weights);
    if (want_grad) backward();
  }

  std::vector<double>& grad() { return grad_; }

 private:
  int record(CMatrix v, Op op, bool has_param) {
    const bool dep = has_param || depends(op.in);
    values_.push_back(std::move(v));
    depends_.push_back(dep);
    op.out = static_cast<int>(values_.size()) - 1;
    ops_.push_back(op);
    return op.out;
  }

  bool depends(int node) const { return depends_[static_cast<std::size_t>(node)]; }

  void accumulate(int node, const CMatrix& g) {
    CMatrix& a = adjoint_[static_cast<std::size_t>(node)];
    const CMatrix herm = 0.5 * (g + g.adjoint());
    if (a.size() == 0) a = herm;
    else a += herm;
  }

  void backward() {
    for (auto it = ops_.rbegin(); it != ops_.rend(); ++it) {
      const Op& op = *it;
      CMatrix& a_out = adjoint_[static_cast<std::size_t>(op.out)];
      if (a_out.size() == 0) continue;
      switch (op.kind) {
        case OpKind::Rotation: {
          if (op.param != kNoParam) {
            // d/dtheta of G X G^dagger = (-i s / 2)[P, out]  =>  dL/dtheta = s Im Tr(A P out)
            CMatrix p_out = value(op.out);
            const CMatrix pauli = pauli_matrix(op.axis);
            kernels::left_multiply_single(p_out, Eigen::Matrix2cd(pauli), op.qubit, n_);
            grad_[op.param] += op.sign * trace_product(a_out, p_out).imag();
          }
          if (depends(op.in)) {
            CMatrix a_in = a_out;
            kernels::conjugate_single(a_in, rotation_matrix(op.axis, -op.angle), op.qubit, n_);
            accumulate(op.in, a_in);
          }
          break;
        }
        case OpKind::Cnot: {
          if (depends(op.in)) {
            CMatrix a_in = a_out;
            kernels::conjugate_cnot(a_in, op.control, op.target, n_);
            accumulate(op.in, a_in);
          }
          break;
        }
        case OpKind::PauliMix:
        case OpKind::InverseMix: {
          if (op.kind == OpKind::InverseMix && op.param != kNoParam) {
            // a = (e^{2l} + 1)/2, b = -(e^{2l} - 1)/2  =>  d out / d l = e^{2l}(in - sigma in sigma)
            const CMatrix& in = value(op.in);
            const CMatrix diff = in - kernels::pauli_conjugate(in, op.mask);
            grad_[op.param] += std::exp(2.0 * op.rate) * real_trace_product(a_out, diff);
          }
          if (depends(op.in)) {
            CMatrix a_in = a_out;
            kernels::pauli_mix(a_in, op.mask, op.a, op.b);
            accumulate(op.in, a_in);
          }
          break;
        }
      }
      a_out.resize(0, 0);
    }
  }

  int n_;
  std::vector<CMatrix> values_;
  std::vector<bool> depends_;
  std::vector<Op> ops_;
  std::vector<CMatrix> adjoint_;
  std::vector<FidelityTerm> fidelity_terms_;
  std::vector<TaskTerm> task_terms_;
  std::vector<double> grad_;
};

struct Layout {
  std::vector<std::size_t> theta_offset;  // per layer
  std::vector<std::size_t> rate_offset;   // per layer
  std::size_t total = 0;
};

Layout make_layout(const CircuitSpec& circuit, const MitigationModel& mitigation) {
  Layout l;
  std::size_t off = 0;
  for (const auto& layer : circuit.layers) {
    l.theta_offset.push_back(off);
    off += layer.num_params();
  }
  for (const auto& m : mitigation.layers) {
    l.rate_offset.push_back(off);
    off += m.size();
  }
  l.total = off;
  return l;
}

class Builder {
 public:
  Builder(StateTape& tape, const CircuitSpec& circuit, const std::vector<NoiseModel>& noise,
          const MitigationModel& mitigation, const Layout& layout, const ObjectiveSettings& s)
      : tape_(tape), circuit_(circuit), noise_(noise), mitigation_(mitigation), layout_(layout), s_(s) {}

  int layer(int node, std::size_t l) {
    const LayerSpec& spec = circuit_.layers[l];
    const int n = circuit_.n;
    for (int q = 0; q < n; ++q)
      for (int slot = 0; slot < spec.slots(); ++slot)
        node = tape_.rotation(node, design_axis(slot), q, spec.angle(q, slot), 1.0,
                              theta_param(l, static_cast<std::size_t>(q * spec.slots() + slot)));
    for (auto [c, t] : cnot_ring(n)) node = tape_.cnot(node, c, t);
    return node;
  }

  int layer_adjoint(int node, std::size_t l) {
    const LayerSpec& spec = circuit_.layers[l];
    const int n = circuit_.n;
    const auto ring = cnot_ring(n);
    for (auto it = ring.rbegin(); it != ring.rend(); ++it) node = tape_.cnot(node, it->first, it->second);
    for (int q = n - 1; q >= 0; --q)
      for (int slot = spec.slots() - 1; slot >= 0; --slot)
        node = tape_.rotation(node, design_axis(slot), q, spec.angle(q, slot), -1.0,
                              theta_param(l, static_cast<std::size_t>(q * spec.slots() + slot)));
    return node;
  }

  int noise(int node, std::size_t l) {
    for (const auto& g : noise_[l].generators()) {
      if (g.rate == 0.0) continue;
      const double q = -0.5 * std::expm1(-2.0 * g.rate);
      node = tape_.pauli_mix(node, g.pauli.mask(), 1.0 - q, q, OpKind::PauliMix, g.rate, kNoParam);
    }
    return node;
  }

  int inverse(int node, std::size_t l) {
    const auto& gens = mitigation_.layers[l].generators();
    for (std::size_t i = 0; i < gens.size(); ++i) {
      const double rate = gens[i].rate;
      const std::size_t param = s_.grad_rates ? layout_.rate_offset[l] + i : kNoParam;
      if (rate == 0.0 && param == kNoParam) continue;
      const double q = -0.5 * std::expm1(-2.0 * rate);
      const double norm = std::exp(2.0 * rate);
      node = tape_.pauli_mix(node, gens[i].pauli.mask(), norm * (1.0 - q), -norm * q, OpKind::InverseMix, rate, param);
    }
    return node;
  }

 private:
  std::size_t theta_param(std::size_t l, std::size_t i) const {
    return s_.grad_theta ? layout_.theta_offset[l] + i : kNoParam;
  }

  StateTape& tape_;
  const CircuitSpec& circuit_;
  const std::vector<NoiseModel>& noise_;
  const MitigationModel& mitigation_;
  const Layout& layout_;
  const ObjectiveSettings& s_;
};

void check_inputs(const CMatrix& rho0, const CircuitSpec& circuit, const std::vector<NoiseModel>& noise,
                  const MitigationModel& mitigation, int step) {
  circuit.validate();
  const auto d = static_cast<Eigen::Index>(dimension(circuit.n));
  if (rho0.rows() != d || rho0.cols() != d) throw ValidationError("initial state dimension differs from circuit");
  if (noise.size() != circuit.num_layers() || mitigation.num_layers() != circuit.num_layers())
    throw ValidationError("need one noise and one mitigation model per layer");
  const auto layers = static_cast<int>(circuit.num_layers());
  if (step < 1 || layers % step != 0)
    throw ValidationError("step size " + std::to_string(step) + " does not divide " + std::to_string(layers) +
                          " layers");
}

}  // namespace

SampleEvaluation evaluate_sample(const CMatrix& rho0, int label, const CircuitSpec& circuit,
                                 const std::vector<NoiseModel>& noise, const MitigationModel& mitigation,
                                 const ObjectiveSettings& s, bool want_grad) {
  check_inputs(rho0, circuit, noise, mitigation, s.step);
  const Layout layout = make_layout(circuit, mitigation);
  StateTape tape(circuit.n, layout.total);
  Builder build(tape, circuit, noise, mitigation, layout, s);
  const std::size_t num_layers = circuit.num_layers();

  // main chain; chain[i] is the input of layer i + 1 in the regime's sense
  std::vector<int> chain{tape.input(rho0)};
  std::vector<int> noisy;  // noisy output of each layer
  for (std::size_t l = 0; l < num_layers; ++l) {
    const int out = build.noise(build.layer(chain.back(), l), l);
    noisy.push_back(out);
    chain.push_back(s.mode == ExecutionMode::Cascaded ? build.inverse(out, l) : out);
  }
  const int readout_node = s.mode == ExecutionMode::Cascaded ? chain.back() : build.inverse(noisy.back(), num_layers - 1);

  if (s.weights.fb > 0.0) {
    const auto step = static_cast<std::size_t>(s.step);
    const std::size_t blocks = num_layers / step;
    for (std::size_t b = 0; b < blocks; ++b) {
      const std::size_t start = b * step;
      const int reference = chain[start];
      int t = reference;
      if (s.mode == ExecutionMode::LossOnly) {
        t = noisy[start + step - 1];
      } else {
        for (std::size_t j = start; j < start + step; ++j) t = j == start ? noisy[j] : build.noise(build.layer(t, j), j);
      }
      for (std::size_t j = start + step; j-- > start;) t = build.layer_adjoint(build.inverse(t, j), j);
      tape.add_fidelity(reference, t, s.weights.fb / static_cast<double>(blocks));
    }
  }
  tape.add_task(readout_node, label, s.weights.task);

  SampleEvaluation eval;
  tape.finish(eval, s, want_grad);
  if (!std::isfinite(eval.loss)) throw TrainingError("non-finite loss for sample with label " + std::to_string(label));
  if (want_grad) eval.grad = std::move(tape.grad());
  return eval;
}

std::vector<double> predict_readout(const CMatrix& rho0, const CircuitSpec& circuit,
                                    const std::vector<NoiseModel>& noise, const MitigationModel& mitigation,
                                    ExecutionMode mode) {
  check_inputs(rho0, circuit, noise, mitigation, 1);
  CMatrix rho = rho0;
  for (std::size_t l = 0; l < circuit.num_layers(); ++l) {
    apply_layer(rho, circuit.layers[l]);
    apply_channel_inplace(rho, noise[l]);
    if (mode == ExecutionMode::Cascaded || l + 1 == circuit.num_layers())
      apply_inverse_channel_inplace(rho, mitigation.layers[l]);
  }
  return readout_z(rho, circuit.n);
}

}  // namespace qmit
