#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nv {

enum class EventPhase : std::uint8_t { Emit, Move, Dock, Release, Decay, Update };

std::string_view phase_name(EventPhase p);

// One structured record. Field meaning per phase:
//   emit    node = birth node, value = lifetime at birth
//   move    node = destination, aux = origin
//   dock    node = dock site, value = dock probability (1 if forced)
//   release node = dock site, aux = operator mask
//   decay   node = last location, value = lifetime at removal, aux = absorbed
//   update  vesicle = -1; node = layer or synapse post, aux = synapse pre, value = step size / delta w
struct EventRecord {
  std::uint64_t step = 0;
  EventPhase phase = EventPhase::Emit;
  std::int64_t vesicle = -1;
  std::int64_t node = -1;
  std::int64_t type = -1;
  double value = 0.0;
  std::int64_t aux = -1;
};

// Append-only log for one run.
class EventLog {
 public:
  void append(const EventRecord& r) { records_.push_back(r); }
  const std::vector<EventRecord>& records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }
  bool empty() const noexcept { return records_.empty(); }

  std::size_t count(std::uint64_t step, EventPhase phase) const;
  std::size_t count(EventPhase phase) const;

  void write_ndjson(std::ostream& os) const;
  std::string to_ndjson() const;

 private:
  std::vector<EventRecord> records_;
};

std::string format_record(const EventRecord& r);
EventRecord parse_record(std::string_view line);

}  // namespace nv
