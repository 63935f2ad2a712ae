#pragma once

// Logged, barrier-synchronized message channel between agents.
//
// Messages posted during a step are held back until `barrier()`, which
// delivers them to the receivers' inboxes and appends them to the round log.

#include <array>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

namespace hdvr {

enum class Role : std::uint8_t { Node, Regional, Central, Broadcast };

struct AgentId {
  Role role = Role::Node;
  int index = 0;  // node id, AG index (0-based), or 0

  friend bool operator==(const AgentId&, const AgentId&) = default;
  friend bool operator<(const AgentId& a, const AgentId& b) {
    return std::tie(a.role, a.index) < std::tie(b.role, b.index);
  }
};

inline AgentId node_agent(int id) { return {Role::Node, id}; }
inline AgentId regional_agent(std::size_t k) { return {Role::Regional, static_cast<int>(k)}; }
inline AgentId central_agent() { return {Role::Central, 0}; }
inline AgentId broadcast() { return {Role::Broadcast, 0}; }

inline std::string to_string(const AgentId& a) {
  switch (a.role) {
    case Role::Node: return "node" + std::to_string(a.index);
    case Role::Regional: return "rc" + std::to_string(a.index + 1);
    case Role::Central: return "cc";
    case Role::Broadcast: return "all";
  }
  return "?";
}

enum class Payload : std::uint8_t {
  DualDifference,   // node -> manager: mu_hi - mu_lo
  RegionAggregate,  // RC -> CC: sum over the AG
  OuterCoupling,    // CC -> RC: (alpha_out, beta_out)
  NodeCoupling,     // RC or CC -> node: (alpha_i, beta_i)
  HeadCostSlope     // CC -> all: C0'(P0)
};
inline constexpr std::size_t kPayloadKinds = 5;

inline std::string_view to_string(Payload p) {
  switch (p) {
    case Payload::DualDifference: return "dual_difference";
    case Payload::RegionAggregate: return "region_aggregate";
    case Payload::OuterCoupling: return "outer_coupling";
    case Payload::NodeCoupling: return "node_coupling";
    case Payload::HeadCostSlope: return "head_cost_slope";
  }
  return "?";
}

struct Message {
  AgentId from;
  AgentId to;
  Payload kind = Payload::DualDifference;
  std::array<double, 2> values{0.0, 0.0};
  std::uint8_t scalars = 1;
};

inline Message make_message(AgentId from, AgentId to, Payload kind, double a) { return {from, to, kind, {a, 0.0}, 1}; }
inline Message make_message(AgentId from, AgentId to, Payload kind, double a, double b) {
  return {from, to, kind, {a, b}, 2};
}

class RoundMessageLog {
 public:
  struct Summary {
    std::size_t round = 0;
    std::array<std::uint64_t, kPayloadKinds> messages{};
    std::array<std::uint64_t, kPayloadKinds> scalars{};

    std::uint64_t total_scalars() const {
      std::uint64_t s = 0;
      for (auto v : scalars) s += v;
      return s;
    }
    std::uint64_t count(Payload p) const { return messages[static_cast<std::size_t>(p)]; }
    std::uint64_t scalars_of(Payload p) const { return scalars[static_cast<std::size_t>(p)]; }
  };

  explicit RoundMessageLog(bool keep_messages = true) : keep_(keep_messages) {}

  void begin_round(std::size_t round) {
    summaries_.push_back({round, {}, {}});
    if (keep_) details_.emplace_back();
  }

  void record(const Message& m) {
    if (summaries_.empty()) begin_round(0);
    auto& s = summaries_.back();
    s.messages[static_cast<std::size_t>(m.kind)] += 1;
    s.scalars[static_cast<std::size_t>(m.kind)] += m.scalars;
    if (keep_) details_.back().push_back(m);
  }

  bool keeps_messages() const { return keep_; }
  std::size_t rounds() const { return summaries_.size(); }
  const Summary& summary(std::size_t r) const { return summaries_.at(r); }
  const std::vector<Summary>& summaries() const { return summaries_; }
  // Empty when the log was created without message detail.
  const std::vector<Message>& messages(std::size_t r) const {
    static const std::vector<Message> none;
    return keep_ ? details_.at(r) : none;
  }

  // CSV: round,from,to,kind,scalars,value0,value1
  void write_csv(std::ostream& out) const {
    out << "round,from,to,kind,scalars,value0,value1\n";
    const auto old = out.precision(17);
    for (std::size_t r = 0; r < details_.size(); ++r) {
      for (const auto& m : details_[r]) {
        out << summaries_[r].round << ',' << to_string(m.from) << ',' << to_string(m.to) << ',' << to_string(m.kind)
            << ',' << static_cast<int>(m.scalars) << ',' << m.values[0] << ',' << m.values[1] << '\n';
      }
    }
    out.precision(old);
  }

 private:
  bool keep_;
  std::vector<Summary> summaries_;
  std::vector<std::vector<Message>> details_;
};

class MessageBus {
 public:
  explicit MessageBus(RoundMessageLog& log) : log_(log) {}

  void post(const Message& m) { pending_.push_back(m); }
  void post(const std::vector<Message>& ms) { pending_.insert(pending_.end(), ms.begin(), ms.end()); }

  // Start of a round: empty all inboxes.
  void begin_round(std::size_t round) {
    for (auto& [id, box] : inbox_) box.clear();
    log_.begin_round(round);
  }

  // End of a step: deliver everything posted since the last barrier. Inboxes
  // accumulate over the round's steps.
  void barrier() {
    for (const auto& m : pending_) {
      inbox_[m.to].push_back(m);
      log_.record(m);
    }
    pending_.clear();
  }

  const std::vector<Message>& inbox(const AgentId& id) const {
    static const std::vector<Message> none;
    const auto it = inbox_.find(id);
    return it == inbox_.end() ? none : it->second;
  }

  bool idle() const { return pending_.empty(); }

 private:
  RoundMessageLog& log_;
  std::vector<Message> pending_;
  std::map<AgentId, std::vector<Message>> inbox_;
};

}  // namespace hdvr
