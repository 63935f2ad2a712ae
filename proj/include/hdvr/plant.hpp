#pragma once

// Source of the voltages v(t) that the dual updates read: either the linear
// model itself or a nonlinear DistFlow "measurement".

#include <memory>
#include <string>
#include <string_view>

#include "hdvr/feeder.hpp"
#include "hdvr/physics.hpp"

namespace hdvr {

enum class VoltageSource { Linear, Nonlinear };

inline std::string_view to_string(VoltageSource s) { return s == VoltageSource::Linear ? "linear" : "nonlinear"; }

inline VoltageSource parse_voltage_source(std::string_view text) {
  if (text == "linear") return VoltageSource::Linear;
  if (text == "nonlinear") return VoltageSource::Nonlinear;
  throw ValidationError("unknown voltage source '" + std::string(text) + "'");
}

class Plant {
 public:
  static Plant linear(const SensitivityPair& sens) {
    Plant p;
    p.source_ = VoltageSource::Linear;
    p.sens_ = std::make_shared<const SensitivityPair>(sens);
    return p;
  }

  // Same linear model, evaluated by sweeps over the feeder lines. Used by the
  // hierarchical solver so no global R, X is ever formed.
  static Plant linear_sweep(const FeederModel& model) {
    Plant p;
    p.source_ = VoltageSource::Linear;
    p.model_ = std::make_shared<const FeederModel>(model);
    p.tree_ = std::make_shared<const Tree>(model);
    return p;
  }

  static Plant nonlinear(const FeederModel& model, DistFlowOptions opts = {}) {
    Plant p;
    p.source_ = VoltageSource::Nonlinear;
    p.model_ = std::make_shared<const FeederModel>(model);
    p.flow_opts_ = opts;
    return p;
  }

  static Plant make(VoltageSource source, const FeederModel& model, const SensitivityPair& sens) {
    return source == VoltageSource::Linear ? linear(sens) : nonlinear(model);
  }

  static Plant make(VoltageSource source, const FeederModel& model) {
    return source == VoltageSource::Linear ? linear_sweep(model) : nonlinear(model);
  }

  VoltageSource source() const { return source_; }

  // Node voltages (length N) for dispatch deviations (p, q).
  Vector measure(const Vector& p, const Vector& q) const {
    if (source_ == VoltageSource::Linear) {
      if (sens_) return voltages(*sens_, p, q);
      return linear_sweep_voltages(*model_, *tree_, total_real_injection(*model_, p), total_reactive_injection(*model_, q));
    }
    return solve_distflow(*model_, total_real_injection(*model_, p), total_reactive_injection(*model_, q), flow_opts_)
        .node_voltages();
  }

 private:
  Plant() = default;

  VoltageSource source_ = VoltageSource::Linear;
  std::shared_ptr<const SensitivityPair> sens_;
  std::shared_ptr<const FeederModel> model_;
  std::shared_ptr<const Tree> tree_;
  DistFlowOptions flow_opts_;
};

}  // namespace hdvr
