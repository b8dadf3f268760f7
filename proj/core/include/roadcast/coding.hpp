#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "roadcast/gf256.hpp"
#include "roadcast/rng.hpp"

namespace roadcast::coding {

// One fixed-size segment of a content file. The final segment of a file is
// zero-padded up to the configured piece size.
struct SourcePiece {
  std::vector<std::uint8_t> payload;
};

struct CodedPiece {
  std::string content_id;
  std::uint32_t generation_id = 0;
  std::vector<std::uint8_t> coeffs;   // length g, over GF(2^8)
  std::vector<std::uint8_t> payload;  // length piece_size
};

struct NotDecodable : std::logic_error {
  using std::logic_error::logic_error;
};

// Per-generation decoding state: coefficient/payload rows kept in reduced
// row echelon form, so the stored row count always equals the rank and a
// full-rank buffer holds the source pieces directly.
class GenerationBuffer {
 public:
  GenerationBuffer(std::string content_id, std::uint32_t generation_id, int g,
                   std::size_t piece_size);

  // Stores the piece if its coefficient vector is linearly independent of
  // the rows already held. Returns true exactly when the rank grew by one.
  bool absorb(const CodedPiece& piece);

  int rank() const { return static_cast<int>(rows_.size()); }
  int generation_size() const { return g_; }
  std::size_t piece_size() const { return piece_size_; }
  bool decodable() const { return rank() == g_; }
  const std::string& content_id() const { return content_id_; }
  std::uint32_t generation_id() const { return generation_id_; }

  // Random combination of the stored rows; never the all-zero vector.
  // Requires rank >= 1.
  CodedPiece recode(Rng& rng) const;

  // Requires rank == g. Returns the g source pieces in order.
  std::vector<SourcePiece> decode() const;

  struct Row {
    std::vector<std::uint8_t> coeffs;
    std::vector<std::uint8_t> payload;
    int pivot = 0;
  };
  const std::vector<Row>& rows() const { return rows_; }

 private:
  friend CodedPiece recode_innovative(const GenerationBuffer&, const GenerationBuffer&, Rng&);

  // Reduces coeffs (and payload alongside, when given) by the stored rows.
  void reduce(std::vector<std::uint8_t>& coeffs, std::vector<std::uint8_t>* payload) const;

  std::string content_id_;
  std::uint32_t generation_id_ = 0;
  int g_ = 0;
  std::size_t piece_size_ = 0;
  std::vector<Row> rows_;  // sorted by pivot column
};

// payload[j] = sum_i coeffs[i] * sources[i].payload[j]
CodedPiece encode(const std::string& content_id, std::uint32_t generation_id,
                  std::span<const SourcePiece> sources, std::span<const std::uint8_t> coeffs);

// Uniform coefficient vector of length g; the all-zero draw is retried.
std::vector<std::uint8_t> random_coeffs(int g, Rng& rng);

// Splits a byte stream into ceil(size / piece_size) pieces, zero-padding the tail.
std::vector<SourcePiece> segment(std::span<const std::uint8_t> bytes, std::size_t piece_size);

// Groups pieces into generations of g, zero-padding the final generation.
std::vector<std::vector<SourcePiece>> group_generations(std::vector<SourcePiece> pieces, int g);

// Inverse of segment+group: concatenates decoded generations and trims to size.
std::vector<std::uint8_t> reassemble(const std::vector<std::vector<SourcePiece>>& generations,
                                     std::uint64_t total_size);

// A receiver-side span given as arbitrary coefficient rows (reduced
// internally); lets senders code against combined feedback, e.g. the union
// of an AP's stored rows and the requesting vehicle's reported rows.
using CoeffRows = std::vector<std::vector<std::uint8_t>>;

// Number of sender rows independent of the receiver's span, i.e. how many
// innovative pieces the sender can still produce for this receiver.
int innovative_capacity(const GenerationBuffer& sender, const GenerationBuffer& receiver);
int innovative_capacity(const GenerationBuffer& sender, const CoeffRows& receiver_rows);

// Rank the given rows span on their own.
int span_rank(int g, const CoeffRows& rows);

// Combination of sender rows guaranteed to be innovative for the receiver.
// Requires innovative_capacity(sender, receiver) >= 1.
CodedPiece recode_innovative(const GenerationBuffer& sender, const GenerationBuffer& receiver,
                             Rng& rng);
CodedPiece recode_innovative(const GenerationBuffer& sender, const CoeffRows& receiver_rows,
                             Rng& rng);

// Same guarantee for a sender holding the source pieces themselves.
CodedPiece encode_innovative(const std::string& content_id, std::uint32_t generation_id,
                             std::span<const SourcePiece> sources,
                             const GenerationBuffer& receiver, Rng& rng);
CodedPiece encode_innovative(const std::string& content_id, std::uint32_t generation_id,
                             std::span<const SourcePiece> sources, const CoeffRows& receiver_rows,
                             Rng& rng);

}  // namespace roadcast::coding
