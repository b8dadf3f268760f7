#include "roadcast/coding.hpp"

#include <algorithm>
#include <cstring>

namespace roadcast::coding {

namespace {

int first_nonzero(std::span<const std::uint8_t> v) {
  for (std::size_t i = 0; i < v.size(); ++i)
    if (v[i] != 0) return static_cast<int>(i);
  return -1;
}

}  // namespace

GenerationBuffer::GenerationBuffer(std::string content_id, std::uint32_t generation_id, int g,
                                   std::size_t piece_size)
    : content_id_(std::move(content_id)),
      generation_id_(generation_id),
      g_(g),
      piece_size_(piece_size) {
  if (g <= 0) throw std::invalid_argument("generation size must be positive");
  if (piece_size == 0) throw std::invalid_argument("piece size must be positive");
}

void GenerationBuffer::reduce(std::vector<std::uint8_t>& coeffs,
                              std::vector<std::uint8_t>* payload) const {
  for (const Row& row : rows_) {
    std::uint8_t f = coeffs[row.pivot];
    if (f == 0) continue;
    gf::axpy(coeffs.data(), row.coeffs.data(), coeffs.size(), f);
    if (payload) gf::axpy(payload->data(), row.payload.data(), payload->size(), f);
  }
}

bool GenerationBuffer::absorb(const CodedPiece& piece) {
  if (piece.content_id != content_id_ || piece.generation_id != generation_id_)
    throw std::invalid_argument("absorb: piece belongs to a different generation");
  if (static_cast<int>(piece.coeffs.size()) != g_ || piece.payload.size() != piece_size_)
    throw std::invalid_argument("absorb: piece shape mismatch");

  std::vector<std::uint8_t> coeffs = piece.coeffs;
  std::vector<std::uint8_t> payload = piece.payload;
  reduce(coeffs, &payload);

  int pivot = first_nonzero(coeffs);
  if (pivot < 0) return false;  // dependent: buffer unchanged

  std::uint8_t norm = gf::inv(coeffs[pivot]);
  gf::scale(coeffs.data(), coeffs.size(), norm);
  gf::scale(payload.data(), payload.size(), norm);

  // Back-substitute into existing rows to keep reduced echelon form.
  for (Row& row : rows_) {
    std::uint8_t f = row.coeffs[pivot];
    if (f == 0) continue;
    gf::axpy(row.coeffs.data(), coeffs.data(), coeffs.size(), f);
    gf::axpy(row.payload.data(), payload.data(), payload.size(), f);
  }

  Row row{std::move(coeffs), std::move(payload), pivot};
  auto pos = std::lower_bound(rows_.begin(), rows_.end(), pivot,
                              [](const Row& r, int p) { return r.pivot < p; });
  rows_.insert(pos, std::move(row));
  return true;
}

CodedPiece GenerationBuffer::recode(Rng& rng) const {
  if (rows_.empty()) throw std::logic_error("recode: empty generation buffer");
  std::vector<std::uint8_t> mix = random_coeffs(rank(), rng);
  CodedPiece out;
  out.content_id = content_id_;
  out.generation_id = generation_id_;
  out.coeffs.assign(g_, 0);
  out.payload.assign(piece_size_, 0);
  for (int i = 0; i < rank(); ++i) {
    gf::axpy(out.coeffs.data(), rows_[i].coeffs.data(), out.coeffs.size(), mix[i]);
    gf::axpy(out.payload.data(), rows_[i].payload.data(), out.payload.size(), mix[i]);
  }
  return out;
}

std::vector<SourcePiece> GenerationBuffer::decode() const {
  if (!decodable()) throw NotDecodable("decode: rank below generation size");
  // Full-rank reduced echelon form is the identity: rows are the sources.
  std::vector<SourcePiece> out(g_);
  for (int i = 0; i < g_; ++i) out[i].payload = rows_[i].payload;
  return out;
}

CodedPiece encode(const std::string& content_id, std::uint32_t generation_id,
                  std::span<const SourcePiece> sources, std::span<const std::uint8_t> coeffs) {
  if (sources.size() != coeffs.size())
    throw std::invalid_argument("encode: sources/coeffs length mismatch");
  if (sources.empty()) throw std::invalid_argument("encode: empty generation");
  std::size_t piece_size = sources[0].payload.size();
  for (const SourcePiece& s : sources)
    if (s.payload.size() != piece_size)
      throw std::invalid_argument("encode: uneven piece sizes");

  CodedPiece out;
  out.content_id = content_id;
  out.generation_id = generation_id;
  out.coeffs.assign(coeffs.begin(), coeffs.end());
  out.payload.assign(piece_size, 0);
  for (std::size_t i = 0; i < sources.size(); ++i)
    gf::axpy(out.payload.data(), sources[i].payload.data(), piece_size, coeffs[i]);
  return out;
}

std::vector<std::uint8_t> random_coeffs(int g, Rng& rng) {
  std::vector<std::uint8_t> coeffs(g);
  for (;;) {
    bool all_zero = true;
    for (auto& c : coeffs) {
      c = rng.byte();
      all_zero = all_zero && c == 0;
    }
    if (!all_zero) return coeffs;
  }
}

std::vector<SourcePiece> segment(std::span<const std::uint8_t> bytes, std::size_t piece_size) {
  if (piece_size == 0) throw std::invalid_argument("segment: piece size must be positive");
  std::size_t count = (bytes.size() + piece_size - 1) / piece_size;
  std::vector<SourcePiece> pieces(count);
  for (std::size_t i = 0; i < count; ++i) {
    pieces[i].payload.assign(piece_size, 0);
    std::size_t off = i * piece_size;
    std::size_t n = std::min(piece_size, bytes.size() - off);
    std::memcpy(pieces[i].payload.data(), bytes.data() + off, n);
  }
  return pieces;
}

std::vector<std::vector<SourcePiece>> group_generations(std::vector<SourcePiece> pieces, int g) {
  if (g <= 0) throw std::invalid_argument("group_generations: g must be positive");
  std::size_t piece_size = pieces.empty() ? 0 : pieces[0].payload.size();
  std::vector<std::vector<SourcePiece>> gens;
  for (std::size_t i = 0; i < pieces.size(); i += g) {
    std::vector<SourcePiece> gen;
    gen.reserve(g);
    for (std::size_t j = i; j < std::min(pieces.size(), i + g); ++j)
      gen.push_back(std::move(pieces[j]));
    while (gen.size() < static_cast<std::size_t>(g))
      gen.push_back(SourcePiece{std::vector<std::uint8_t>(piece_size, 0)});
    gens.push_back(std::move(gen));
  }
  return gens;
}

std::vector<std::uint8_t> reassemble(const std::vector<std::vector<SourcePiece>>& generations,
                                     std::uint64_t total_size) {
  std::vector<std::uint8_t> out;
  out.reserve(total_size);
  for (const auto& gen : generations)
    for (const auto& piece : gen) {
      if (out.size() >= total_size) break;
      std::size_t n = std::min<std::uint64_t>(piece.payload.size(), total_size - out.size());
      out.insert(out.end(), piece.payload.begin(), piece.payload.begin() + n);
    }
  if (out.size() != total_size)
    throw std::invalid_argument("reassemble: generations do not cover total_size");
  return out;
}

namespace {

// Incremental coefficient-only elimination. Rows pass through add() and are
// kept with unit pivots and zeros at all earlier pivots, so membership and
// independence checks reduce against each stored row once.
struct CoeffSpan {
  std::vector<std::vector<std::uint8_t>> rows;
  std::vector<int> pivots;

  // Reduces v in place; returns true (and keeps it) if independent.
  bool add(std::vector<std::uint8_t> v) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::uint8_t f = v[pivots[i]];
      if (f == 0) continue;
      gf::axpy(v.data(), rows[i].data(), v.size(), f);
    }
    int pivot = first_nonzero(v);
    if (pivot < 0) return false;
    gf::scale(v.data(), v.size(), gf::inv(v[pivot]));
    rows.push_back(std::move(v));
    pivots.push_back(pivot);
    return true;
  }

  bool contains(std::vector<std::uint8_t> v) const {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::uint8_t f = v[pivots[i]];
      if (f == 0) continue;
      gf::axpy(v.data(), rows[i].data(), v.size(), f);
    }
    return first_nonzero(v) < 0;
  }

  // Any nonzero span element is nonzero at the pivot of its first
  // contributing row, so a unit vector off every pivot lies outside.
  int first_non_pivot(int g) const {
    std::vector<bool> is_pivot(g, false);
    for (int p : pivots) is_pivot[p] = true;
    for (int j = 0; j < g; ++j)
      if (!is_pivot[j]) return j;
    return -1;
  }
};

CoeffSpan span_of(const CoeffRows& rows) {
  CoeffSpan span;
  for (const auto& row : rows) span.add(row);
  return span;
}

CoeffRows buffer_rows(const GenerationBuffer& buf) {
  CoeffRows rows;
  rows.reserve(buf.rows().size());
  for (const auto& row : buf.rows()) rows.push_back(row.coeffs);
  return rows;
}

void check_compatible(const GenerationBuffer& a, const GenerationBuffer& b) {
  if (a.content_id() != b.content_id() || a.generation_id() != b.generation_id() ||
      a.generation_size() != b.generation_size() || a.piece_size() != b.piece_size())
    throw std::invalid_argument("generation buffers refer to different generations");
}

}  // namespace

int span_rank(int g, const CoeffRows& rows) {
  for (const auto& row : rows)
    if (static_cast<int>(row.size()) != g)
      throw std::invalid_argument("span_rank: row length mismatch");
  return static_cast<int>(span_of(rows).rows.size());
}

int innovative_capacity(const GenerationBuffer& sender, const CoeffRows& receiver_rows) {
  CoeffSpan span = span_of(receiver_rows);
  int capacity = 0;
  for (const auto& row : sender.rows())
    if (span.add(row.coeffs)) ++capacity;
  return capacity;
}

int innovative_capacity(const GenerationBuffer& sender, const GenerationBuffer& receiver) {
  check_compatible(sender, receiver);
  return innovative_capacity(sender, buffer_rows(receiver));
}

CodedPiece recode_innovative(const GenerationBuffer& sender, const CoeffRows& receiver_rows,
                             Rng& rng) {
  CodedPiece piece = sender.recode(rng);

  CoeffSpan span = span_of(receiver_rows);
  if (!span.contains(piece.coeffs)) return piece;

  // The random draw landed inside the receiver's span. Adding any sender
  // row outside that span fixes it, since piece + row stays outside.
  for (const auto& row : sender.rows()) {
    if (span.contains(row.coeffs)) continue;
    gf::axpy(piece.coeffs.data(), row.coeffs.data(), piece.coeffs.size(), 1);
    gf::axpy(piece.payload.data(), row.payload.data(), piece.payload.size(), 1);
    return piece;
  }
  throw std::logic_error("recode_innovative: sender has no innovation for receiver");
}

CodedPiece recode_innovative(const GenerationBuffer& sender, const GenerationBuffer& receiver,
                             Rng& rng) {
  check_compatible(sender, receiver);
  return recode_innovative(sender, buffer_rows(receiver), rng);
}

CodedPiece encode_innovative(const std::string& content_id, std::uint32_t generation_id,
                             std::span<const SourcePiece> sources, const CoeffRows& receiver_rows,
                             Rng& rng) {
  int g = static_cast<int>(sources.size());
  std::vector<std::uint8_t> coeffs = random_coeffs(g, rng);

  CoeffSpan span = span_of(receiver_rows);
  if (span.contains(coeffs)) {
    int j = span.first_non_pivot(g);
    if (j < 0) throw std::logic_error("encode_innovative: receiver already has full rank");
    coeffs[j] ^= 1;
  }
  return encode(content_id, generation_id, sources, coeffs);
}

CodedPiece encode_innovative(const std::string& content_id, std::uint32_t generation_id,
                             std::span<const SourcePiece> sources,
                             const GenerationBuffer& receiver, Rng& rng) {
  if (receiver.content_id() != content_id || receiver.generation_id() != generation_id ||
      receiver.generation_size() != static_cast<int>(sources.size()))
    throw std::invalid_argument("encode_innovative: receiver/generation mismatch");
  return encode_innovative(content_id, generation_id, sources, buffer_rows(receiver), rng);
}

}  // namespace roadcast::coding
