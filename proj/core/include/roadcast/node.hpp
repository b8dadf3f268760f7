#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "roadcast/coding.hpp"
#include "roadcast/contact_map.hpp"

namespace roadcast::node {

using map::ApId;

struct ContentItem {
  std::string content_id;
  std::uint64_t size_bytes = 0;
  std::size_t piece_size = 4096;
  int generation_size = 16;

  std::uint32_t piece_count() const {
    return static_cast<std::uint32_t>((size_bytes + piece_size - 1) / piece_size);
  }
  std::uint32_t generation_count() const {
    std::uint64_t per_generation = static_cast<std::uint64_t>(piece_size) * generation_size;
    return static_cast<std::uint32_t>((size_bytes + per_generation - 1) / per_generation);
  }
  // Real (unpadded) pieces in a generation.
  int pieces_in_generation(std::uint32_t generation_id) const;
};

// Creates the buffer for one generation with the tail padding pre-absorbed:
// padded source pieces are known-zero, so their unit rows cost nothing to
// transfer and every peer can assume them.
coding::GenerationBuffer make_buffer(const ContentItem& content, std::uint32_t generation_id);

// Serving order: the generation with the largest rank deficit, ties broken
// by the lowest generation id. Entries with no deficit are ignored.
std::optional<std::uint32_t> pick_serve_generation(
    std::span<const std::pair<std::uint32_t, int>> deficits);

struct CacheKey {
  std::string content_id;
  std::uint32_t generation_id = 0;
  auto operator<=>(const CacheKey&) const = default;
};

struct CacheEntry {
  coding::GenerationBuffer buf;
  double last_use_s = 0;
  std::map<std::string, double> pins;  // vehicle -> expiry time

  bool pinned_at(double now) const {
    for (const auto& [vehicle, until] : pins)
      if (until > now) return true;
    return false;
  }
};

// Roadside AP storage: generation buffers under a byte budget, with LRU
// eviction of unpinned whole generations and up-front reservations for
// accepted prefetches.
class ApNode {
 public:
  ApNode(ApId id, std::uint64_t capacity_bytes) : id_(std::move(id)), capacity_(capacity_bytes) {}

  const ApId& id() const { return id_; }
  std::uint64_t capacity_bytes() const { return capacity_; }
  std::uint64_t used_bytes() const { return used_; }
  std::uint64_t reserved_bytes() const { return reserved_; }
  std::uint64_t free_bytes() const { return capacity_ - used_ - reserved_; }

  const CacheEntry* find(const CacheKey& key) const;
  CacheEntry* find(const CacheKey& key);
  int rank_of(const CacheKey& key) const;

  // Creates the entry (charging any pre-absorbed padding rows) if missing.
  CacheEntry& ensure_entry(const ContentItem& content, std::uint32_t generation_id, double now);

  // Bytes ensure_entry would charge for a missing entry, zero if present.
  std::uint64_t entry_create_cost(const ContentItem& content, std::uint32_t generation_id) const;

  // Absorbs into the entry, charging storage for an innovative row.
  // Returns true when the piece was innovative.
  bool absorb(const ContentItem& content, const coding::CodedPiece& piece, double now);

  void touch(const CacheKey& key, double now);
  void pin(const CacheKey& key, const std::string& vehicle, double until);
  void release_pins(const std::string& vehicle);

  void reserve(std::uint64_t bytes);
  void release_reservation(std::uint64_t bytes);

  // Evicts least-recently-used unpinned entries until free space reaches
  // bytes_needed. Returns the evicted keys, or nullopt (and no mutation)
  // when that is impossible.
  std::optional<std::vector<CacheKey>> evict_for(std::uint64_t bytes_needed, double now);

  const std::map<CacheKey, CacheEntry>& cache() const { return cache_; }

  // Debug dump: one "content_id generation_id rank" line per entry.
  std::string dump() const;

 private:
  ApId id_;
  std::uint64_t capacity_ = 0;
  std::uint64_t used_ = 0;
  std::uint64_t reserved_ = 0;
  std::map<CacheKey, CacheEntry> cache_;
};

// Content catalog plus deterministic source payloads. Piece bytes are
// synthesized on demand from the content's payload seed so large catalogs
// cost no resident memory.
class OriginServer {
 public:
  explicit OriginServer(double response_latency_s) : response_latency_s_(response_latency_s) {}

  void add_content(const ContentItem& item, std::uint64_t payload_seed);
  const ContentItem* find(const std::string& content_id) const;
  const std::map<std::string, ContentItem>& catalog() const { return catalog_; }
  double response_latency_s() const { return response_latency_s_; }

  coding::SourcePiece source_piece(const std::string& content_id, std::uint32_t piece_index) const;
  std::vector<coding::SourcePiece> generation_sources(const std::string& content_id,
                                                      std::uint32_t generation_id) const;

  coding::CodedPiece encode_random(const std::string& content_id, std::uint32_t generation_id,
                                   Rng& rng) const;
  coding::CodedPiece encode_for(const std::string& content_id, std::uint32_t generation_id,
                                const coding::GenerationBuffer& receiver, Rng& rng) const;
  coding::CodedPiece encode_for(const std::string& content_id, std::uint32_t generation_id,
                                const coding::CoeffRows& receiver_rows, Rng& rng) const;

 private:
  const std::vector<coding::SourcePiece>& cached_sources(const std::string& content_id,
                                                         std::uint32_t generation_id) const;

  double response_latency_s_ = 0;
  std::map<std::string, ContentItem> catalog_;
  std::map<std::string, std::uint64_t> payload_seeds_;
  // Encoding works generation-at-a-time, so a tiny cache removes nearly all
  // payload re-synthesis without holding whole contents in memory.
  mutable std::map<std::pair<std::string, std::uint32_t>, std::vector<coding::SourcePiece>>
      source_cache_;
};

}  // namespace roadcast::node
