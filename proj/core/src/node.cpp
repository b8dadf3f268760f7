#include "roadcast/node.hpp"

#include <algorithm>
#include <cstring>

namespace roadcast::node {

int ContentItem::pieces_in_generation(std::uint32_t generation_id) const {
  std::uint64_t total = piece_count();
  std::uint64_t before = static_cast<std::uint64_t>(generation_id) * generation_size;
  if (before >= total) return 0;
  return static_cast<int>(std::min<std::uint64_t>(generation_size, total - before));
}

std::optional<std::uint32_t> pick_serve_generation(
    std::span<const std::pair<std::uint32_t, int>> deficits) {
  std::optional<std::uint32_t> best;
  int best_deficit = 0;
  for (const auto& [gen, deficit] : deficits) {
    if (deficit <= 0) continue;
    if (deficit > best_deficit || (deficit == best_deficit && (!best || gen < *best))) {
      best = gen;
      best_deficit = deficit;
    }
  }
  return best;
}

coding::GenerationBuffer make_buffer(const ContentItem& content, std::uint32_t generation_id) {
  coding::GenerationBuffer buf(content.content_id, generation_id, content.generation_size,
                               content.piece_size);
  int real = content.pieces_in_generation(generation_id);
  for (int j = real; j < content.generation_size; ++j) {
    coding::CodedPiece pad;
    pad.content_id = content.content_id;
    pad.generation_id = generation_id;
    pad.coeffs.assign(content.generation_size, 0);
    pad.coeffs[j] = 1;
    pad.payload.assign(content.piece_size, 0);
    buf.absorb(pad);
  }
  return buf;
}

const CacheEntry* ApNode::find(const CacheKey& key) const {
  auto it = cache_.find(key);
  return it == cache_.end() ? nullptr : &it->second;
}

CacheEntry* ApNode::find(const CacheKey& key) {
  auto it = cache_.find(key);
  return it == cache_.end() ? nullptr : &it->second;
}

int ApNode::rank_of(const CacheKey& key) const {
  const CacheEntry* entry = find(key);
  return entry ? entry->buf.rank() : 0;
}

std::uint64_t ApNode::entry_create_cost(const ContentItem& content,
                                        std::uint32_t generation_id) const {
  if (find({content.content_id, generation_id})) return 0;
  int padding = content.generation_size - content.pieces_in_generation(generation_id);
  return static_cast<std::uint64_t>(padding) * content.piece_size;
}

CacheEntry& ApNode::ensure_entry(const ContentItem& content, std::uint32_t generation_id,
                                 double now) {
  CacheKey key{content.content_id, generation_id};
  auto it = cache_.find(key);
  if (it == cache_.end()) {
    CacheEntry entry{make_buffer(content, generation_id), now, {}};
    used_ += static_cast<std::uint64_t>(entry.buf.rank()) * content.piece_size;
    it = cache_.emplace(key, std::move(entry)).first;
  }
  return it->second;
}

bool ApNode::absorb(const ContentItem& content, const coding::CodedPiece& piece, double now) {
  CacheEntry& entry = ensure_entry(content, piece.generation_id, now);
  entry.last_use_s = now;
  bool innovative = entry.buf.absorb(piece);
  if (innovative) used_ += content.piece_size;
  return innovative;
}

void ApNode::touch(const CacheKey& key, double now) {
  if (CacheEntry* entry = find(key)) entry->last_use_s = now;
}

void ApNode::pin(const CacheKey& key, const std::string& vehicle, double until) {
  if (CacheEntry* entry = find(key)) {
    double& expiry = entry->pins[vehicle];
    expiry = std::max(expiry, until);
  }
}

void ApNode::release_pins(const std::string& vehicle) {
  for (auto& [key, entry] : cache_) entry.pins.erase(vehicle);
}

void ApNode::reserve(std::uint64_t bytes) {
  if (bytes > free_bytes()) throw std::logic_error("reserve: beyond free space");
  reserved_ += bytes;
}

void ApNode::release_reservation(std::uint64_t bytes) {
  if (bytes > reserved_) throw std::logic_error("release_reservation: more than reserved");
  reserved_ -= bytes;
}

std::optional<std::vector<CacheKey>> ApNode::evict_for(std::uint64_t bytes_needed, double now) {
  if (free_bytes() >= bytes_needed) return std::vector<CacheKey>{};

  struct Candidate {
    double last_use;
    CacheKey key;
    std::uint64_t bytes;
  };
  std::vector<Candidate> candidates;
  for (const auto& [key, entry] : cache_) {
    if (entry.pinned_at(now)) continue;
    candidates.push_back(
        {entry.last_use_s, key,
         static_cast<std::uint64_t>(entry.buf.rank()) * entry.buf.piece_size()});
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.last_use != b.last_use) return a.last_use < b.last_use;
    return a.key < b.key;
  });

  // Dry run first: a declined request must leave the cache untouched.
  std::uint64_t freed = 0;
  std::size_t take = 0;
  while (take < candidates.size() && free_bytes() + freed < bytes_needed)
    freed += candidates[take++].bytes;
  if (free_bytes() + freed < bytes_needed) return std::nullopt;

  std::vector<CacheKey> evicted;
  for (std::size_t i = 0; i < take; ++i) {
    used_ -= candidates[i].bytes;
    cache_.erase(candidates[i].key);
    evicted.push_back(candidates[i].key);
  }
  return evicted;
}

std::string ApNode::dump() const {
  std::string out;
  for (const auto& [key, entry] : cache_) {
    out += key.content_id + " " + std::to_string(key.generation_id) + " " +
           std::to_string(entry.buf.rank()) + "\n";
  }
  return out;
}

void OriginServer::add_content(const ContentItem& item, std::uint64_t payload_seed) {
  if (item.size_bytes == 0) throw std::invalid_argument("content size must be positive");
  catalog_[item.content_id] = item;
  payload_seeds_[item.content_id] = payload_seed;
}

const ContentItem* OriginServer::find(const std::string& content_id) const {
  auto it = catalog_.find(content_id);
  return it == catalog_.end() ? nullptr : &it->second;
}

coding::SourcePiece OriginServer::source_piece(const std::string& content_id,
                                               std::uint32_t piece_index) const {
  const ContentItem* item = find(content_id);
  if (!item) throw std::invalid_argument("unknown content " + content_id);

  coding::SourcePiece piece;
  piece.payload.assign(item->piece_size, 0);
  if (piece_index >= item->piece_count()) return piece;  // pure padding

  std::uint64_t offset = static_cast<std::uint64_t>(piece_index) * item->piece_size;
  std::uint64_t logical = std::min<std::uint64_t>(item->piece_size, item->size_bytes - offset);
  Rng fill(derive_seed(payload_seeds_.at(content_id), std::to_string(piece_index)));
  std::uint64_t i = 0;
  for (; i + 8 <= logical; i += 8) {
    std::uint64_t word = fill.next_u64();
    std::memcpy(piece.payload.data() + i, &word, 8);
  }
  for (; i < logical; ++i) piece.payload[i] = fill.byte();
  return piece;
}

std::vector<coding::SourcePiece> OriginServer::generation_sources(
    const std::string& content_id, std::uint32_t generation_id) const {
  const ContentItem* item = find(content_id);
  if (!item) throw std::invalid_argument("unknown content " + content_id);
  std::vector<coding::SourcePiece> sources;
  sources.reserve(item->generation_size);
  for (int j = 0; j < item->generation_size; ++j)
    sources.push_back(
        source_piece(content_id, generation_id * item->generation_size + j));
  return sources;
}

const std::vector<coding::SourcePiece>& OriginServer::cached_sources(
    const std::string& content_id, std::uint32_t generation_id) const {
  auto key = std::make_pair(content_id, generation_id);
  auto it = source_cache_.find(key);
  if (it == source_cache_.end()) {
    if (source_cache_.size() >= 64) source_cache_.clear();
    it = source_cache_.emplace(key, generation_sources(content_id, generation_id)).first;
  }
  return it->second;
}

coding::CodedPiece OriginServer::encode_random(const std::string& content_id,
                                               std::uint32_t generation_id, Rng& rng) const {
  const auto& sources = cached_sources(content_id, generation_id);
  auto coeffs = coding::random_coeffs(static_cast<int>(sources.size()), rng);
  return coding::encode(content_id, generation_id, sources, coeffs);
}

coding::CodedPiece OriginServer::encode_for(const std::string& content_id,
                                            std::uint32_t generation_id,
                                            const coding::GenerationBuffer& receiver,
                                            Rng& rng) const {
  const auto& sources = cached_sources(content_id, generation_id);
  return coding::encode_innovative(content_id, generation_id, sources, receiver, rng);
}

coding::CodedPiece OriginServer::encode_for(const std::string& content_id,
                                            std::uint32_t generation_id,
                                            const coding::CoeffRows& receiver_rows,
                                            Rng& rng) const {
  const auto& sources = cached_sources(content_id, generation_id);
  return coding::encode_innovative(content_id, generation_id, sources, receiver_rows, rng);
}

}  // namespace roadcast::node
