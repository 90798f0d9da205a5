#pragma once

#include <cstddef>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cscache/errors.hpp"

namespace cscache {

struct MessageRecord {
  std::size_t round = 0;
  std::size_t sender = 0;
  std::size_t receiver = 0;
  std::size_t scalars = 0;
};

/// Running account of what a synchronous network has carried.
struct MessageLog {
  std::size_t full_payload = 0;  // scalars a full-vector consensus message would carry (NW)
  std::size_t rounds = 0;
  std::size_t messages_sent = 0;
  std::size_t messages_received = 0;
  std::size_t scalars_sent = 0;
  std::vector<std::size_t> round_scalars;  // per-round totals
  std::vector<MessageRecord> records;      // only filled when the network keeps records
};

/// In-process synchronous network over a fixed neighbor graph. Each round every
/// cache hands one payload per neighbor; the round closes only if all of them
/// are present, and delivery is lossless.
class SyncNetwork {
 public:
  SyncNetwork(std::vector<std::vector<std::size_t>> neighbors, std::size_t full_payload,
              bool keep_records = false)
      : neighbors_(std::move(neighbors)), keep_records_(keep_records) {
    log_.full_payload = full_payload;
    // slot_of_[c][k]: position of c inside neighbors_[neighbors_[c][k]]
    slot_of_.resize(neighbors_.size());
    for (std::size_t c = 0; c < neighbors_.size(); ++c) {
      for (std::size_t nb : neighbors_[c]) {
        detail::require(nb < neighbors_.size(), "SyncNetwork: neighbor out of range");
        const auto& back = neighbors_[nb];
        std::size_t slot = back.size();
        for (std::size_t k = 0; k < back.size(); ++k)
          if (back[k] == c) slot = k;
        detail::require(slot < back.size(), "SyncNetwork: neighbor graph must be symmetric");
        slot_of_[c].push_back(slot);
      }
    }
  }

  const std::vector<std::vector<std::size_t>>& neighbors() const { return neighbors_; }
  const MessageLog& log() const { return log_; }

  /// outgoing[c][k] is the payload cache c sends to neighbors()[c][k]. Returns
  /// incoming[c][k]: the payload cache c received from neighbors()[c][k].
  std::vector<std::vector<Eigen::VectorXd>> exchange_round(
      const std::vector<std::vector<Eigen::VectorXd>>& outgoing) {
    if (outgoing.size() != neighbors_.size()) {
      throw ProtocolViolation("exchange_round: expected outboxes from " +
                              std::to_string(neighbors_.size()) + " caches, got " +
                              std::to_string(outgoing.size()));
    }
    for (std::size_t c = 0; c < neighbors_.size(); ++c) {
      if (outgoing[c].size() != neighbors_[c].size()) {
        throw ProtocolViolation("exchange_round: cache " + std::to_string(c) + " posted " +
                                std::to_string(outgoing[c].size()) + " of " +
                                std::to_string(neighbors_[c].size()) + " neighbor messages");
      }
    }
    std::vector<std::vector<Eigen::VectorXd>> incoming(neighbors_.size());
    for (std::size_t c = 0; c < neighbors_.size(); ++c) incoming[c].resize(neighbors_[c].size());

    std::size_t round_total = 0;
    for (std::size_t c = 0; c < neighbors_.size(); ++c) {
      for (std::size_t k = 0; k < neighbors_[c].size(); ++k) {
        const std::size_t to = neighbors_[c][k];
        const auto scalars = static_cast<std::size_t>(outgoing[c][k].size());
        incoming[to][slot_of_[c][k]] = outgoing[c][k];
        ++log_.messages_sent;
        ++log_.messages_received;
        round_total += scalars;
        if (keep_records_) log_.records.push_back({log_.rounds, c, to, scalars});
      }
    }
    log_.scalars_sent += round_total;
    log_.round_scalars.push_back(round_total);
    ++log_.rounds;
    return incoming;
  }

 private:
  std::vector<std::vector<std::size_t>> neighbors_;
  std::vector<std::vector<std::size_t>> slot_of_;
  bool keep_records_;
  MessageLog log_;
};

struct CommReport {
  std::size_t iterations = 0;
  std::size_t per_round_scalars = 0;
  std::size_t messages_per_round = 0;
  std::size_t total_scalars = 0;
  std::size_t full_consensus_scalars = 0;  // same message pattern carrying NW scalars each
  double reduction_ratio = 0.0;            // full_consensus_scalars / total_scalars
  double total_bytes = 0.0;
};

/// Totals for `iterations` rounds of the traffic pattern recorded in `log`.
inline CommReport comm_report(const MessageLog& log, std::size_t iterations,
                              double bytes_per_scalar = 8.0) {
  CommReport r;
  r.iterations = iterations;
  if (log.rounds > 0) {
    r.per_round_scalars = log.round_scalars.front();
    r.messages_per_round = log.messages_sent / log.rounds;
  }
  r.total_scalars = r.per_round_scalars * iterations;
  r.full_consensus_scalars = r.messages_per_round * log.full_payload * iterations;
  if (r.total_scalars > 0) {
    r.reduction_ratio =
        static_cast<double>(r.full_consensus_scalars) / static_cast<double>(r.total_scalars);
  } else if (r.full_consensus_scalars > 0) {
    r.reduction_ratio = std::numeric_limits<double>::infinity();
  }
  r.total_bytes = static_cast<double>(r.total_scalars) * bytes_per_scalar;
  return r;
}

inline void write_message_log(std::ostream& os, const MessageLog& log) {
  os << "# cscache-messages v1 rounds=" << log.rounds << "\n";
  os << "round\tsender\treceiver\tscalars\n";
  for (const auto& m : log.records)
    os << m.round << '\t' << m.sender << '\t' << m.receiver << '\t' << m.scalars << '\n';
}

}  // namespace cscache
