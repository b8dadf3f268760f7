#include <benchmark/benchmark.h>

#include "roadcast/coding.hpp"
#include "roadcast/gf256.hpp"
#include "roadcast/rng.hpp"

using namespace roadcast;

static void BM_GfAxpy(benchmark::State& state) {
  std::vector<std::uint8_t> dst(state.range(0), 0x5a);
  std::vector<std::uint8_t> src(state.range(0), 0xa5);
  for (auto _ : state) {
    gf::axpy(dst.data(), src.data(), dst.size(), 0x1d);
    benchmark::DoNotOptimize(dst.data());
  }
  state.SetBytesProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GfAxpy)->Arg(4096)->Arg(65536);

static void BM_AbsorbGeneration(benchmark::State& state) {
  const int g = static_cast<int>(state.range(0));
  const std::size_t piece_size = 4096;
  Rng rng(1);
  std::vector<coding::SourcePiece> sources(g);
  for (auto& s : sources) {
    s.payload.resize(piece_size);
    for (auto& b : s.payload) b = rng.byte();
  }
  for (auto _ : state) {
    coding::GenerationBuffer buf("c", 0, g, piece_size);
    while (!buf.decodable())
      buf.absorb(coding::encode("c", 0, sources, coding::random_coeffs(g, rng)));
    benchmark::DoNotOptimize(buf.rank());
  }
  state.SetBytesProcessed(state.iterations() * g * piece_size);
}
BENCHMARK(BM_AbsorbGeneration)->Arg(8)->Arg(16)->Arg(32);

static void BM_Recode(benchmark::State& state) {
  const int g = 16;
  const std::size_t piece_size = 4096;
  Rng rng(2);
  std::vector<coding::SourcePiece> sources(g);
  for (auto& s : sources) {
    s.payload.resize(piece_size);
    for (auto& b : s.payload) b = rng.byte();
  }
  coding::GenerationBuffer buf("c", 0, g, piece_size);
  while (!buf.decodable())
    buf.absorb(coding::encode("c", 0, sources, coding::random_coeffs(g, rng)));
  for (auto _ : state) {
    auto piece = buf.recode(rng);
    benchmark::DoNotOptimize(piece.payload.data());
  }
  state.SetBytesProcessed(state.iterations() * piece_size);
}
BENCHMARK(BM_Recode);
