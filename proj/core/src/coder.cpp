#include "lottery/coder.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>

#include "lottery/arm.hpp"

namespace lottery {

namespace {
constexpr std::uint32_t kTopValue = 1u << 24;
}

void RangeEncoder::shift_low() {
  const auto carry = static_cast<std::uint8_t>(low_ >> 32);
  if (carry != 0 || static_cast<std::uint32_t>(low_) < 0xFF000000u) {
    if (have_cache_) bytes_.push_back(static_cast<std::uint8_t>(cache_ + carry));
    have_cache_ = true;
    for (; pending_ > 0; --pending_) bytes_.push_back(static_cast<std::uint8_t>(0xFF + carry));
    cache_ = static_cast<std::uint8_t>(low_ >> 24);
  } else {
    ++pending_;
  }
  // The byte just moved into the cache (or the pending run) leaves low.
  low_ = (low_ & 0x00FFFFFFull) << 8;
}

void RangeEncoder::encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total) {
  assert(freq > 0 && cum + freq <= total && total <= kCdfTotal);
  range_ /= total;
  low_ += static_cast<std::uint64_t>(cum) * range_;
  range_ *= freq;
  while (range_ < kTopValue) {
    shift_low();
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 5; ++i) shift_low();
  return std::move(bytes_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> data) : data_(data) {
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  return pos_ < data_.size() ? data_[pos_++] : 0;
}

std::uint32_t RangeDecoder::decode_freq(std::uint32_t total) {
  range_ /= total;
  const std::uint32_t f = code_ / range_;
  if (f >= total) throw DecodeError("range decoder desynchronized", pos_);
  return f;
}

void RangeDecoder::decode_update(std::uint32_t cum, std::uint32_t freq) {
  code_ -= cum * range_;
  range_ *= freq;
  while (range_ < kTopValue) {
    code_ = (code_ << 8) | next_byte();
    range_ <<= 8;
  }
}

double QuantizedCdf::bits(int symbol) const {
  return -std::log2(static_cast<double>(count(symbol)) / kCdfTotal);
}

void QuantizedCdf::encode_symbol(RangeEncoder& enc, int symbol) const {
  if (symbol < lo || symbol > hi)
    throw std::invalid_argument("encode_symbol: symbol outside CDF range");
  const int i = symbol - lo;
  enc.encode(cum[i], cum[i + 1] - cum[i], kCdfTotal);
}

int QuantizedCdf::decode_symbol(RangeDecoder& dec) const {
  const std::uint32_t f = dec.decode_freq(kCdfTotal);
  // cum is strictly increasing; find i with cum[i] <= f < cum[i+1].
  const auto it = std::upper_bound(cum.begin(), cum.end(), f);
  const int i = static_cast<int>(it - cum.begin()) - 1;
  dec.decode_update(cum[i], cum[i + 1] - cum[i]);
  return lo + i;
}

QuantizedCdf quantize_cdf(double mu, double scale, int lo, int hi) {
  if (lo > hi) throw std::invalid_argument("quantize_cdf: lo > hi");
  const std::int64_t n = static_cast<std::int64_t>(hi) - lo + 1;
  if (n > static_cast<std::int64_t>(kCdfTotal))
    throw std::invalid_argument("quantize_cdf: alphabet larger than 2^16");

  QuantizedCdf cdf;
  cdf.lo = lo;
  cdf.hi = hi;
  if (n == 1) {
    cdf.cum = {0, kCdfTotal};
    return cdf;
  }

  std::vector<double> pmf(n);
  double total = 0.0;
  for (std::int64_t s = 0; s < n; ++s) {
    pmf[s] = laplace_integer_pmf(lo + s, mu, scale);
    total += pmf[s];
  }

  std::vector<std::uint32_t> counts(n);
  std::int64_t sum = 0;
  for (std::int64_t s = 0; s < n; ++s) {
    const double share = pmf[s] / total * kCdfTotal;
    counts[s] = static_cast<std::uint32_t>(std::max<std::int64_t>(1, std::llround(share)));
    sum += counts[s];
  }
  // Settle the rounding residual against the largest bin (first on ties);
  // when the largest bin cannot absorb a deficit it is drained to 1 and the
  // remainder moves to the next largest.
  std::int64_t diff = static_cast<std::int64_t>(kCdfTotal) - sum;
  while (diff != 0) {
    std::int64_t best = 0;
    for (std::int64_t s = 1; s < n; ++s)
      if (counts[s] > counts[best]) best = s;
    if (diff > 0) {
      counts[best] += static_cast<std::uint32_t>(diff);
      diff = 0;
    } else {
      const std::int64_t take = std::min<std::int64_t>(counts[best] - 1, -diff);
      counts[best] -= static_cast<std::uint32_t>(take);
      diff += take;
      if (take == 0) throw std::logic_error("quantize_cdf: cannot settle residual");
    }
  }

  cdf.cum.resize(n + 1);
  cdf.cum[0] = 0;
  for (std::int64_t s = 0; s < n; ++s) cdf.cum[s + 1] = cdf.cum[s] + counts[s];
  return cdf;
}

QuantizedCdf bernoulli_cdf(std::int64_t ones, std::int64_t total) {
  if (total <= 0 || ones < 0 || ones > total)
    throw std::invalid_argument("bernoulli_cdf: invalid counts");
  const double p = static_cast<double>(ones) / static_cast<double>(total);
  const std::uint32_t c1 = static_cast<std::uint32_t>(
      std::clamp<std::int64_t>(std::llround(p * kCdfTotal), 1, kCdfTotal - 1));
  QuantizedCdf cdf;
  cdf.lo = 0;
  cdf.hi = 1;
  cdf.cum = {0, kCdfTotal - c1, kCdfTotal};
  return cdf;
}

std::vector<std::uint8_t> range_encode(std::span<const int> symbols, const CdfProvider& cdf_for) {
  RangeEncoder enc;
  for (std::size_t i = 0; i < symbols.size(); ++i)
    cdf_for(i, symbols.first(i)).encode_symbol(enc, symbols[i]);
  return enc.finish();
}

std::vector<int> range_decode(std::span<const std::uint8_t> bytes, std::size_t count,
                              const CdfProvider& cdf_for) {
  RangeDecoder dec(bytes);
  std::vector<int> symbols;
  symbols.reserve(count);
  for (std::size_t i = 0; i < count; ++i)
    symbols.push_back(cdf_for(i, symbols).decode_symbol(dec));
  return symbols;
}

std::vector<std::uint8_t> encode_mask(const std::vector<std::span<const std::uint8_t>>& mask,
                                      std::int64_t active) {
  std::int64_t total = 0;
  for (const auto& layer : mask) total += static_cast<std::int64_t>(layer.size());
  const QuantizedCdf cdf = bernoulli_cdf(active, total);
  RangeEncoder enc;
  for (const auto& layer : mask)
    for (std::uint8_t bit : layer) cdf.encode_symbol(enc, bit ? 1 : 0);
  return enc.finish();
}

std::vector<std::vector<std::uint8_t>> decode_mask(std::span<const std::uint8_t> bytes,
                                                   const std::vector<std::size_t>& layer_sizes,
                                                   std::int64_t active) {
  std::int64_t total = 0;
  for (std::size_t n : layer_sizes) total += static_cast<std::int64_t>(n);
  const QuantizedCdf cdf = bernoulli_cdf(active, total);
  RangeDecoder dec(bytes);
  std::vector<std::vector<std::uint8_t>> mask;
  mask.reserve(layer_sizes.size());
  for (std::size_t n : layer_sizes) {
    std::vector<std::uint8_t> layer(n);
    for (std::size_t i = 0; i < n; ++i)
      layer[i] = static_cast<std::uint8_t>(cdf.decode_symbol(dec));
    mask.push_back(std::move(layer));
  }
  return mask;
}

QuantizedCdf network_param_cdf(double delta, float stddev, int qlo, int qhi) {
  // Laplace scale from the transmitted stddev, mapped onto the q lattice.
  const double scale_real = static_cast<double>(stddev) / std::sqrt(2.0);
  const double scale_lattice = scale_real / delta;
  return quantize_cdf(0.0, std::max(scale_lattice, 1e-12), qlo, qhi);
}

CompressedParams compress_network_params(std::span<const double> params, double delta) {
  if (!(delta > 0.0)) throw std::invalid_argument("compress_network_params: delta must be > 0");
  CompressedParams out;
  out.q.resize(params.size());
  out.reconstructed.resize(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    out.q[i] = static_cast<int>(std::llround(params[i] / delta));
    out.reconstructed[i] = out.q[i] * delta;
  }

  double mean = 0.0;
  for (double v : out.reconstructed) mean += v;
  mean = params.empty() ? 0.0 : mean / static_cast<double>(params.size());
  double var = 0.0;
  for (double v : out.reconstructed) var += (v - mean) * (v - mean);
  var = params.empty() ? 0.0 : var / static_cast<double>(params.size());
  out.stddev = static_cast<float>(std::max(std::sqrt(var), 1e-8));

  out.qlo = 0;
  out.qhi = 0;
  for (int q : out.q) {
    out.qlo = std::min(out.qlo, q);
    out.qhi = std::max(out.qhi, q);
  }

  const QuantizedCdf cdf = network_param_cdf(delta, out.stddev, out.qlo, out.qhi);
  RangeEncoder enc;
  for (int q : out.q) {
    cdf.encode_symbol(enc, q);
    out.model_bits += cdf.bits(q);
  }
  out.bytes = enc.finish();
  return out;
}

std::vector<double> decompress_network_params(std::span<const std::uint8_t> bytes,
                                              std::size_t count, double delta, float stddev,
                                              int qlo, int qhi) {
  const QuantizedCdf cdf = network_param_cdf(delta, stddev, qlo, qhi);
  RangeDecoder dec(bytes);
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) params[i] = cdf.decode_symbol(dec) * delta;
  return params;
}

StepSearchResult search_quantization_steps(const std::function<double(double)>& psi_cost,
                                           const std::function<double(double)>& theta_cost) {
  StepSearchResult result;
  result.psi_cost = std::numeric_limits<double>::infinity();
  result.theta_cost = std::numeric_limits<double>::infinity();
  for (int k = kStepSearchMin; k <= kStepSearchMax; ++k) {
    const double cost = psi_cost(std::exp2(-k));
    if (cost < result.psi_cost) {
      result.psi_cost = cost;
      result.psi_log2 = k;
    }
  }
  for (int k = kStepSearchMin; k <= kStepSearchMax; ++k) {
    const double cost = theta_cost(std::exp2(-k));
    if (cost < result.theta_cost) {
      result.theta_cost = cost;
      result.theta_log2 = k;
    }
  }
  return result;
}

}  // namespace lottery
