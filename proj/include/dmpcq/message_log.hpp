#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dmpcq {

/// One neighbor-to-neighbor message. Only metadata is kept: the payload
/// itself never leaves the owning agent's data structures, which is what the
/// locality audit checks.
struct MessageRecord {
  std::string phase;   // "gac", "admm"
  std::string kind;    // "gac_vector", "trajectory_copy", "consensus_broadcast"
  std::int64_t step;   // environment step, -1 outside a run
  int round;           // protocol iteration within the phase
  int sender;
  int receiver;
  int num_scalars;     // payload size
};

class MessageLog {
 public:
  void record(MessageRecord rec) { records_.push_back(std::move(rec)); }
  const std::vector<MessageRecord>& records() const { return records_; }
  void clear() { records_.clear(); }

  /// Environment step stamped onto records made while this is set.
  void set_step(std::int64_t step) { step_ = step; }
  std::int64_t step() const { return step_; }

  void write_csv(const std::string& path) const;
  static MessageLog read_csv(const std::string& path);

 private:
  std::vector<MessageRecord> records_;
  std::int64_t step_ = -1;
};

}  // namespace dmpcq
