#pragma once

// Synchronous message-passing simulation of the hierarchical iteration.
//
// Each round:
//   [1] nodes update (p, q, mu) from their own state and last round's signals
//   [2] nodes send mu_hi - mu_lo to their RC (or to the CC when unclustered);
//       each RC sends its AG aggregate to the CC
//   [3] CC sends (alpha_out, beta_out) to every RC and (alpha_i, beta_i) to
//       every unclustered node
//   [4] RCs add their intra-AG terms and send (alpha_i, beta_i) to members
//   [5] voltages are measured at every node; the CC meters P0 at the head
//   [6] CC broadcasts C0'(P0)
// Every step ends with a barrier. Round 0 runs [2]-[6] to seed the signals.

#include <algorithm>
#include <future>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "hdvr/hierarchy/messages.hpp"
#include "hdvr/hierarchy/views.hpp"
#include "hdvr/opf.hpp"
#include "hdvr/plant.hpp"
#include "hdvr/run.hpp"

namespace hdvr {

class NodeAgent {
 public:
  NodeAgent(NodeId id, DeviceSpec device, double v_min, double v_max, double phi, AgentId manager)
      : id_(id), device_(device), v_min_(v_min), v_max_(v_max), phi_(phi), manager_(manager) {}

  AgentId id() const { return node_agent(id_); }
  NodeId node() const { return id_; }

  void start(double p, double q, double mu_lo, double mu_hi) {
    p_ = p;
    q_ = q;
    mu_lo_ = mu_lo;
    mu_hi_ = mu_hi;
  }

  // [1]
  void update(double step) {
    const auto [p, q] = primal_update(device_, p_, q_, alpha_, beta_, slope_, step);
    mu_lo_ = lower_dual_update(mu_lo_, v_min_, v_, phi_, step);
    mu_hi_ = upper_dual_update(mu_hi_, v_max_, v_, phi_, step);
    p_ = p;
    q_ = q;
  }

  // [2]
  Message report() const { return make_message(id(), manager_, Payload::DualDifference, mu_hi_ - mu_lo_); }

  // After [3] or [4], and after [6].
  void receive(const MessageBus& bus) {
    for (const auto& m : bus.inbox(id())) {
      if (m.kind != Payload::NodeCoupling) continue;
      if (!(m.from == manager_)) {
        throw InformationHidingError("node " + std::to_string(id_) + " got coupling from " + to_string(m.from));
      }
      alpha_ = m.values[0];
      beta_ = m.values[1];
    }
    for (const auto& m : bus.inbox(broadcast())) {
      if (m.kind == Payload::HeadCostSlope) slope_ = m.values[0];
    }
  }

  // [5]
  void measure(double v) { v_ = v; }

  double p() const { return p_; }
  double q() const { return q_; }
  double mu_lo() const { return mu_lo_; }
  double mu_hi() const { return mu_hi_; }
  double v() const { return v_; }
  double alpha() const { return alpha_; }
  double beta() const { return beta_; }

 private:
  NodeId id_;
  DeviceSpec device_;
  double v_min_, v_max_, phi_;
  AgentId manager_;
  double p_ = 0.0, q_ = 0.0, mu_lo_ = 0.0, mu_hi_ = 0.0;
  double alpha_ = 0.0, beta_ = 0.0, slope_ = 0.0, v_ = 0.0;
};

class RegionalCoordinator {
 public:
  explicit RegionalCoordinator(const RegionalView& view) : view_(view), d_(view.size(), 0.0) {
    const auto& members = view_.members();
    for (std::size_t a = 0; a < members.size(); ++a) index_[members[a]] = a;
  }

  AgentId id() const { return regional_agent(view_.k()); }

  // [2] second half: collect member reports, send the aggregate up.
  Message aggregate(const MessageBus& bus) {
    std::fill(d_.begin(), d_.end(), 0.0);
    for (const auto& m : bus.inbox(id())) {
      if (m.kind != Payload::DualDifference) continue;
      const auto it = m.from.role == Role::Node ? index_.find(m.from.index) : index_.end();
      if (it == index_.end()) {
        throw InformationHidingError("RC " + std::to_string(view_.k() + 1) + " got a report from " + to_string(m.from));
      }
      d_[it->second] = m.values[0];
    }
    flops_ = 0;
    return make_message(id(), central_agent(), Payload::RegionAggregate, view_.aggregate(d_, flops_));
  }

  // [4]
  std::vector<Message> dispatch(const MessageBus& bus) {
    double a_out = 0.0, b_out = 0.0;
    for (const auto& m : bus.inbox(id())) {
      if (m.kind == Payload::OuterCoupling) {
        a_out = m.values[0];
        b_out = m.values[1];
      }
    }
    view_.inner(d_, alpha_in_, beta_in_, flops_);
    std::vector<Message> out;
    out.reserve(d_.size());
    const auto& members = view_.members();
    for (std::size_t a = 0; a < members.size(); ++a) {
      out.push_back(make_message(id(), node_agent(members[a]), Payload::NodeCoupling, alpha_in_[a] + a_out,
                                 beta_in_[a] + b_out));
    }
    flops_ += 2ull * members.size();
    return out;
  }

  std::uint64_t flops() const { return flops_; }

 private:
  const RegionalView& view_;
  std::map<NodeId, std::size_t> index_;
  std::vector<double> d_;
  std::vector<double> alpha_in_, beta_in_;
  std::uint64_t flops_ = 0;
};

class CentralCoordinator {
 public:
  CentralCoordinator(const CentralView& view, const OpfProblem& prob)
      : view_(view),
        inelastic_load_(prob.inelastic_load),
        alpha_(prob.alpha),
        p0_target_(prob.p0_target),
        aggregates_(view.K(), 0.0),
        d_unc_(view.U(), 0.0) {
    const auto& unc = view_.unclustered();
    for (std::size_t u = 0; u < unc.size(); ++u) index_[unc[u]] = u;
  }

  AgentId id() const { return central_agent(); }

  // [3]
  std::vector<Message> coordinate(const MessageBus& bus) {
    for (const auto& m : bus.inbox(id())) {
      if (m.kind == Payload::RegionAggregate && m.from.role == Role::Regional) {
        aggregates_.at(static_cast<std::size_t>(m.from.index)) = m.values[0];
      } else if (m.kind == Payload::DualDifference) {
        const auto it = m.from.role == Role::Node ? index_.find(m.from.index) : index_.end();
        if (it == index_.end()) {
          throw InformationHidingError("CC got a node report from " + to_string(m.from) + ", which belongs to an AG");
        }
        d_unc_[it->second] = m.values[0];
      }
    }
    flops_ = 0;
    std::vector<Message> out;
    for (std::size_t k = 0; k < view_.K(); ++k) {
      const auto [a, b] = view_.outer(k, aggregates_, d_unc_, flops_);
      out.push_back(make_message(id(), regional_agent(k), Payload::OuterCoupling, a, b));
    }
    for (std::size_t u = 0; u < view_.U(); ++u) {
      const auto [a, b] = view_.unclustered_coupling(u, aggregates_, d_unc_, flops_);
      out.push_back(make_message(id(), node_agent(view_.unclustered()[u]), Payload::NodeCoupling, a, b));
    }
    return out;
  }

  // [5] head metering: P0 = -P_I - sum of dispatched deviations.
  void meter(double total_dispatch) { p0_ = -inelastic_load_ - total_dispatch; }

  // [6]
  Message broadcast_slope() const {
    return make_message(id(), broadcast(), Payload::HeadCostSlope, 2.0 * alpha_ * (p0_ - p0_target_));
  }

  double p0() const { return p0_; }
  std::uint64_t flops() const { return flops_; }

 private:
  const CentralView& view_;
  double inelastic_load_, alpha_, p0_target_;
  std::map<NodeId, std::size_t> index_;
  std::vector<double> aggregates_;
  std::vector<double> d_unc_;
  double p0_ = 0.0;
  std::uint64_t flops_ = 0;
};

struct HierarchyOptions {
  bool parallel_regions = false;  // run RC steps on worker threads
  bool keep_messages = true;      // keep every message in the log, not just counts
};

struct HierarchicalResult {
  IterateState state;
  RunTrace trace;
  RoundMessageLog log;
};

// Views and partition must describe the same AGs (see make_agent_views).
inline void require_matching_views(const AgentViews& views, const Partition& part) {
  if (views.regional.size() != part.K() || views.central.K() != part.K()) {
    throw ValidationError("agent views do not match the partition: AG count differs");
  }
  for (std::size_t k = 0; k < part.K(); ++k) {
    if (views.regional[k].members() != part.groups[k].members || views.central.root(k) != part.groups[k].root) {
      throw ValidationError("agent views do not match the partition at AG " + std::to_string(k + 1));
    }
  }
  if (views.central.unclustered() != part.unclustered) {
    throw ValidationError("agent views do not match the partition: unclustered sets differ");
  }
}

inline HierarchicalResult run_hierarchical(const OpfProblem& prob, const AgentViews& views, const Partition& part,
                                           const Plant& plant, const SolverOptions& opts,
                                           const HierarchyOptions& hopts = {},
                                           std::optional<IterateState> start = std::nullopt) {
  prob.require_valid();
  require_step(opts);
  require_matching_views(views, part);
  const auto n = prob.size();
  std::size_t covered = part.U();
  for (const auto& g : part.groups) covered += g.size();
  if (static_cast<Eigen::Index>(covered) != n) throw DimensionError("run_hierarchical: partition does not cover the problem");

  const auto owner = part.owner(static_cast<std::size_t>(n));
  std::vector<NodeAgent> nodes;
  nodes.reserve(static_cast<std::size_t>(n));
  const IterateState init = start ? *start : initial_dispatch(prob);
  for (Eigen::Index s = 0; s < n; ++s) {
    const NodeId i = node_at(s);
    const int k = owner[static_cast<std::size_t>(i)];
    const AgentId manager = k < 0 ? central_agent() : regional_agent(static_cast<std::size_t>(k));
    nodes.emplace_back(i, prob.devices[static_cast<std::size_t>(s)], prob.v_min[s], prob.v_max[s], prob.phi, manager);
    nodes.back().start(init.p[s], init.q[s], init.mu_lo[s], init.mu_hi[s]);
  }
  std::vector<RegionalCoordinator> regions;
  regions.reserve(part.K());
  for (const auto& view : views.regional) regions.emplace_back(view);
  CentralCoordinator cc(views.central, prob);

  HierarchicalResult result{IterateState{}, RunTrace{}, RoundMessageLog(hopts.keep_messages)};
  MessageBus bus(result.log);
  const bool threaded = hopts.parallel_regions && regions.size() > 1;

  auto for_regions = [&](auto&& fn) {
    using Out = decltype(fn(regions[0]));
    std::vector<Out> outs(regions.size());
    if (threaded) {
      std::vector<std::future<Out>> jobs;
      for (auto& rc : regions) jobs.push_back(std::async(std::launch::async, [&fn, &rc] { return fn(rc); }));
      for (std::size_t k = 0; k < jobs.size(); ++k) outs[k] = jobs[k].get();
    } else {
      for (std::size_t k = 0; k < regions.size(); ++k) outs[k] = fn(regions[k]);
    }
    return outs;  // posted by the caller in ascending AG order
  };

  Vector p(n), q(n);
  auto snapshot = [&](std::size_t t) {
    IterateState s{Vector(n), Vector(n), Vector(n), Vector(n), Vector(n), cc.p0(), t};
    for (Eigen::Index a = 0; a < n; ++a) {
      const auto& node = nodes[static_cast<std::size_t>(a)];
      s.p[a] = node.p();
      s.q[a] = node.q();
      s.mu_lo[a] = node.mu_lo();
      s.mu_hi[a] = node.mu_hi();
      s.v[a] = node.v();
    }
    return s;
  };

  // Steps [2]-[6]; returns the coupling flops spent.
  auto exchange = [&]() -> std::uint64_t {
    for (const auto& node : nodes) bus.post(node.report());
    bus.barrier();
    for (auto& m : for_regions([&bus](RegionalCoordinator& rc) { return rc.aggregate(bus); })) bus.post(m);
    bus.barrier();
    bus.post(cc.coordinate(bus));
    bus.barrier();
    for (auto& ms : for_regions([&bus](RegionalCoordinator& rc) { return rc.dispatch(bus); })) bus.post(ms);
    bus.barrier();
    for (auto& node : nodes) node.receive(bus);

    for (Eigen::Index a = 0; a < n; ++a) {
      p[a] = nodes[static_cast<std::size_t>(a)].p();
      q[a] = nodes[static_cast<std::size_t>(a)].q();
    }
    const Vector v = plant.measure(p, q);
    for (Eigen::Index a = 0; a < n; ++a) nodes[static_cast<std::size_t>(a)].measure(v[a]);
    double total = 0.0;
    for (Eigen::Index a = 0; a < n; ++a) total += p[a];
    cc.meter(total);

    bus.post(cc.broadcast_slope());
    bus.barrier();
    for (auto& node : nodes) node.receive(bus);

    std::uint64_t flops = cc.flops();
    for (const auto& rc : regions) flops += rc.flops();
    return flops;
  };

  // Setup round: seeds alpha(0), beta(0), v(0) and C0'(0).
  bus.begin_round(0);
  exchange();
  IterateState cur = snapshot(0);

  RunMonitor monitor(prob, opts);
  for (std::size_t t = 0; t < opts.max_iter; ++t) {
    bus.begin_round(t + 1);
    for (auto& node : nodes) node.update(opts.step);
    const std::uint64_t flops = exchange();
    IterateState next = snapshot(t + 1);
    const bool done = monitor.observe(cur, next, flops, result.log.summaries().back().total_scalars());
    cur = std::move(next);
    if (done) break;
  }
  result.state = std::move(cur);
  result.trace = monitor.take();
  return result;
}

}  // namespace hdvr
