#include "roadcast/contact_map.hpp"

namespace roadcast::map {

void ContactGraph::observe(const ApId& from, const ApId& to) { add_count(from, to, 1); }

void ContactGraph::add_count(const ApId& from, const ApId& to, std::uint64_t n) {
  if (from == to) throw std::invalid_argument("observe: self-transition " + from);
  aps_.insert(from);
  aps_.insert(to);
  if (n > 0) counts_[{from, to}] += n;
}

std::uint64_t ContactGraph::count(const ApId& from, const ApId& to) const {
  auto it = counts_.find({from, to});
  return it == counts_.end() ? 0 : it->second;
}

std::uint64_t ContactGraph::row_total(const ApId& from) const {
  std::uint64_t total = 0;
  for (auto it = counts_.lower_bound({from, ApId()});
       it != counts_.end() && it->first.first == from; ++it)
    total += it->second;
  return total;
}

double ContactGraph::probability(const ApId& from, const ApId& to) const {
  std::uint64_t total = row_total(from);
  if (total == 0) return 0.0;
  return static_cast<double>(count(from, to)) / static_cast<double>(total);
}

std::vector<std::pair<ApId, double>> ContactGraph::row(const ApId& from) const {
  std::vector<std::pair<ApId, double>> out;
  std::uint64_t total = row_total(from);
  if (total == 0) return out;
  for (auto it = counts_.lower_bound({from, ApId()});
       it != counts_.end() && it->first.first == from; ++it)
    out.emplace_back(it->first.second,
                     static_cast<double>(it->second) / static_cast<double>(total));
  return out;
}

ContactGraph merge(const ContactGraph& a, const ContactGraph& b) {
  ContactGraph out = a;
  for (const ApId& ap : b.aps()) out.add_ap(ap);
  for (const auto& [edge, count] : b.counts()) out.add_count(edge.first, edge.second, count);
  return out;
}

ContactGraph learn_from_trace(std::span<const ContactRecord> trace, double max_gap_s) {
  struct VehicleState {
    bool seen = false;
    bool in_contact = false;
    ApId ap;              // current or last AP
    double last_time = 0;  // time of the latest record
    double depart_time = 0;
  };

  ContactGraph graph;
  std::map<std::string, VehicleState> vehicles;

  for (std::size_t i = 0; i < trace.size(); ++i) {
    const ContactRecord& rec = trace[i];
    VehicleState& v = vehicles[rec.vehicle];
    if (v.seen && rec.time_s < v.last_time)
      throw TraceError(i, "record out of time order for vehicle " + rec.vehicle);

    if (rec.event == ContactEvent::Arrive) {
      if (v.in_contact)
        throw TraceError(i, "arrive without preceding depart for vehicle " + rec.vehicle);
      if (v.seen && rec.ap != v.ap && rec.time_s - v.depart_time <= max_gap_s)
        graph.observe(v.ap, rec.ap);
      graph.add_ap(rec.ap);
      v.in_contact = true;
      v.ap = rec.ap;
    } else {
      if (!v.in_contact)
        throw TraceError(i, "depart without preceding arrive for vehicle " + rec.vehicle);
      if (rec.ap != v.ap)
        throw TraceError(i, "depart from " + rec.ap + " while in contact with " + v.ap);
      v.in_contact = false;
      v.depart_time = rec.time_s;
    }
    v.seen = true;
    v.last_time = rec.time_s;
  }
  return graph;
}

}  // namespace roadcast::map
