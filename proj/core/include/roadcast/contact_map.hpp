#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace roadcast::map {

using ApId = std::string;

enum class ContactEvent { Arrive, Depart };

struct ContactRecord {
  double time_s = 0;
  std::string vehicle;
  ApId ap;
  ContactEvent event = ContactEvent::Arrive;
};

struct TraceError : std::runtime_error {
  TraceError(std::size_t record_index, const std::string& what)
      : std::runtime_error(what), record_index(record_index) {}
  std::size_t record_index;
};

// First-order Markov transition statistics over APs, estimated from
// observed vehicle handoffs by maximum likelihood (count ratios).
class ContactGraph {
 public:
  void add_ap(const ApId& ap) { aps_.insert(ap); }

  // Counts one observed handoff. Self-transitions are rejected: returning
  // to the same AP is a continued contact, not an edge.
  void observe(const ApId& from, const ApId& to);

  void add_count(const ApId& from, const ApId& to, std::uint64_t n);

  std::uint64_t count(const ApId& from, const ApId& to) const;
  std::uint64_t row_total(const ApId& from) const;
  double probability(const ApId& from, const ApId& to) const;

  // Successors of `from` with probabilities, sorted by ApId.
  std::vector<std::pair<ApId, double>> row(const ApId& from) const;

  const std::set<ApId>& aps() const { return aps_; }
  const std::map<std::pair<ApId, ApId>, std::uint64_t>& counts() const { return counts_; }

  bool operator==(const ContactGraph&) const = default;

 private:
  std::set<ApId> aps_;
  std::map<std::pair<ApId, ApId>, std::uint64_t> counts_;
};

// Entry-wise sum of counts; commutative and associative.
ContactGraph merge(const ContactGraph& a, const ContactGraph& b);

// For each vehicle, every consecutive depart(a) -> arrive(b) pair with a
// gap of at most max_gap_s contributes one observation a -> b. Malformed
// alternation raises TraceError with the offending record index.
ContactGraph learn_from_trace(std::span<const ContactRecord> trace, double max_gap_s = 600.0);

}  // namespace roadcast::map
