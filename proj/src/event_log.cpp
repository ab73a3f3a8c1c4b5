#include "nv/event_log.hpp"

#include <algorithm>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace nv {

std::string_view phase_name(EventPhase p) {
  switch (p) {
    case EventPhase::Emit: return "emit";
    case EventPhase::Move: return "move";
    case EventPhase::Dock: return "dock";
    case EventPhase::Release: return "release";
    case EventPhase::Decay: return "decay";
    case EventPhase::Update: return "update";
  }
  return "unknown";
}

namespace {
EventPhase phase_from_name(std::string_view s) {
  for (auto p : {EventPhase::Emit, EventPhase::Move, EventPhase::Dock, EventPhase::Release, EventPhase::Decay,
                 EventPhase::Update})
    if (phase_name(p) == s) return p;
  throw std::invalid_argument("unknown event phase: " + std::string(s));
}
}  // namespace

std::size_t EventLog::count(std::uint64_t step, EventPhase phase) const {
  return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const EventRecord& r) {
    return r.step == step && r.phase == phase;
  }));
}

std::size_t EventLog::count(EventPhase phase) const {
  return static_cast<std::size_t>(
      std::count_if(records_.begin(), records_.end(), [&](const EventRecord& r) { return r.phase == phase; }));
}

std::string format_record(const EventRecord& r) {
  nlohmann::ordered_json j;
  j["step"] = r.step;
  j["phase"] = phase_name(r.phase);
  j["id"] = r.vesicle;
  j["node"] = r.node;
  j["type"] = r.type;
  j["value"] = r.value;
  j["aux"] = r.aux;
  return j.dump();
}

EventRecord parse_record(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  EventRecord r;
  r.step = j.at("step").get<std::uint64_t>();
  r.phase = phase_from_name(j.at("phase").get<std::string>());
  r.vesicle = j.at("id").get<std::int64_t>();
  r.node = j.at("node").get<std::int64_t>();
  r.type = j.at("type").get<std::int64_t>();
  r.value = j.at("value").get<double>();
  r.aux = j.at("aux").get<std::int64_t>();
  return r;
}

void EventLog::write_ndjson(std::ostream& os) const {
  for (const auto& r : records_) os << format_record(r) << '\n';
}

std::string EventLog::to_ndjson() const {
  std::ostringstream os;
  write_ndjson(os);
  return os.str();
}

}  // namespace nv
