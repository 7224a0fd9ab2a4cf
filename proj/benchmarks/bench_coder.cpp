#include <benchmark/benchmark.h>

#include <vector>

#include "lottery/coder.hpp"
#include "lottery/rng.hpp"

namespace {

void BM_RangeCode(benchmark::State& state) {
  const lottery::QuantizedCdf cdf = lottery::quantize_cdf(0.0, 2.0, -16, 16);
  lottery::Rng rng = lottery::derive_stream(1, "bench-coder");
  std::vector<int> symbols(1 << 16);
  for (int& s : symbols) s = static_cast<int>(rng.uniform(-4, 5));

  for (auto _ : state) {
    lottery::RangeEncoder enc;
    for (int s : symbols) cdf.encode_symbol(enc, s);
    const auto bytes = enc.finish();
    lottery::RangeDecoder dec(bytes);
    for (std::size_t i = 0; i < symbols.size(); ++i)
      benchmark::DoNotOptimize(cdf.decode_symbol(dec));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(symbols.size()));
}
BENCHMARK(BM_RangeCode);

void BM_QuantizeCdf(benchmark::State& state) {
  lottery::Rng rng = lottery::derive_stream(2, "bench-cdf");
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        lottery::quantize_cdf(rng.uniform(-4, 4), rng.uniform(0.05, 8.0), -20, 20));
  }
}
BENCHMARK(BM_QuantizeCdf);

}  // namespace

BENCHMARK_MAIN();
