#pragma once

// Options, per-iteration trace, and the stop/divergence monitor shared by the
// central and hierarchical solvers.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "hdvr/opf.hpp"

namespace hdvr {

enum class StopRule {
  Residual,  // ||z(t+1) - z(t)||_inf <= tolerance
  HeadPower  // |P0(t+1) - P0(t)| < tolerance
};

inline std::string_view to_string(StopRule r) { return r == StopRule::Residual ? "residual" : "p0"; }

inline StopRule parse_stop_rule(std::string_view text) {
  if (text == "residual") return StopRule::Residual;
  if (text == "p0") return StopRule::HeadPower;
  throw ValidationError("unknown stop rule '" + std::string(text) + "'");
}

struct SolverOptions {
  double step = 1e-3;          // epsilon
  double tolerance = 1e-8;     // sigma
  std::size_t max_iter = 10000;
  StopRule stop = StopRule::Residual;
  std::size_t divergence_window = 50;
  double divergence_factor = 10.0;
  // Called after every iteration with the new iterate.
  std::function<void(const IterateState&)> on_iterate;
};

struct IterationRecord {
  std::size_t t = 0;
  double residual = 0.0;      // ||z(t) - z(t-1)||_2
  double residual_inf = 0.0;  // ||z(t) - z(t-1)||_inf
  double objective = 0.0;     // sum C_i + C_0
  double v_min = 0.0;
  double v_max = 0.0;
  double p0 = 0.0;
  std::uint64_t coupling_flops = 0;
  std::uint64_t messages = 0;  // scalars exchanged this iteration
  double wall_seconds = 0.0;
};

struct RunTrace {
  std::vector<IterationRecord> records;
  bool converged = false;
  std::size_t iterations = 0;
  StopRule stop = StopRule::Residual;
  double step = 0.0;
  std::optional<ConvergenceCertificate> certificate;
};

struct RunResult {
  IterateState state;
  RunTrace trace;
};

// Records iterations, decides convergence, and raises DivergenceError when the
// residual grows by `divergence_factor` over `divergence_window` iterations.
class RunMonitor {
 public:
  RunMonitor(const OpfProblem& prob, const SolverOptions& opts) : prob_(prob), opts_(opts) {
    trace_.stop = opts.stop;
    trace_.step = opts.step;
    last_ = std::chrono::steady_clock::now();
  }

  // Returns true when the stop rule is met.
  bool observe(const IterateState& prev, const IterateState& next, std::uint64_t flops, std::uint64_t messages) {
    const auto now = std::chrono::steady_clock::now();
    IterationRecord rec;
    rec.t = next.t;
    const Vector dz = next.stacked() - prev.stacked();
    rec.residual = dz.norm();
    rec.residual_inf = dz.lpNorm<Eigen::Infinity>();
    rec.objective = objective(prob_, next.p, next.q);
    rec.v_min = next.v.minCoeff();
    rec.v_max = next.v.maxCoeff();
    rec.p0 = next.p0;
    rec.coupling_flops = flops;
    rec.messages = messages;
    rec.wall_seconds = std::chrono::duration<double>(now - last_).count();
    last_ = now;
    trace_.records.push_back(rec);
    trace_.iterations = next.t;

    if (!std::isfinite(rec.residual) || !next.v.allFinite()) {
      throw DivergenceError(diagnostic("non-finite iterate"));
    }
    const auto& recs = trace_.records;
    if (recs.size() > opts_.divergence_window) {
      const double before = recs[recs.size() - 1 - opts_.divergence_window].residual;
      if (before > 0.0 && rec.residual > opts_.divergence_factor * before) {
        std::ostringstream why;
        why << "residual grew from " << before << " to " << rec.residual << " over " << opts_.divergence_window
            << " iterations (step " << opts_.step << ")";
        throw DivergenceError(diagnostic(why.str()));
      }
    }
    if (opts_.on_iterate) opts_.on_iterate(next);

    const bool done = opts_.stop == StopRule::Residual ? rec.residual_inf <= opts_.tolerance
                                                       : std::abs(next.p0 - prev.p0) < opts_.tolerance;
    if (done) trace_.converged = true;
    return done;
  }

  RunTrace& trace() { return trace_; }
  RunTrace take() { return std::move(trace_); }

 private:
  std::string diagnostic(const std::string& why) const {
    return "divergence detected at iteration " + std::to_string(trace_.iterations) + ": " + why;
  }

  const OpfProblem& prob_;
  const SolverOptions& opts_;
  RunTrace trace_;
  std::chrono::steady_clock::time_point last_;
};

inline void require_step(const SolverOptions& opts) {
  if (!(opts.step > 0.0)) throw ValidationError("step size must be positive");
  if (!(opts.tolerance > 0.0)) throw ValidationError("tolerance must be positive");
}

}  // namespace hdvr
