#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace lottery {

struct DecodeError : std::runtime_error {
  DecodeError(const std::string& what, std::size_t offset)
      : std::runtime_error(what + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset = 0;
};

// Byte-oriented range coder (carry-propagating, 32-bit range over a 64-bit
// low accumulator). Frequencies are 16-bit: every model quantizes its CDF
// to a total of 2^16. The leading byte of the classical flush carries only
// the overflow above the decoder's 32-bit window, so it is dropped; a
// finished stream costs the payload plus exactly 4 tail bytes.
class RangeEncoder {
 public:
  void encode(std::uint32_t cum, std::uint32_t freq, std::uint32_t total);
  std::vector<std::uint8_t> finish();
  std::size_t bytes_written() const { return bytes_.size(); }

 private:
  void shift_low();

  std::uint64_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint8_t cache_ = 0;
  std::uint64_t pending_ = 0;
  bool have_cache_ = false;
  std::vector<std::uint8_t> bytes_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(std::span<const std::uint8_t> data);

  // decode_freq / decode_update must be called strictly in pairs.
  std::uint32_t decode_freq(std::uint32_t total);
  void decode_update(std::uint32_t cum, std::uint32_t freq);
  std::size_t consumed() const { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::uint32_t code_ = 0;
};

inline constexpr std::uint32_t kCdfTotal = 1u << 16;

// CDF over the inclusive symbol range [lo, hi], cumulative counts summing
// to exactly 2^16 with every symbol count >= 1.
struct QuantizedCdf {
  int lo = 0;
  int hi = 0;
  std::vector<std::uint32_t> cum;  // size (hi-lo+2), cum.front()=0, cum.back()=2^16

  int symbol_count() const { return hi - lo + 1; }
  std::uint32_t count(int symbol) const { return cum[symbol - lo + 1] - cum[symbol - lo]; }
  double bits(int symbol) const;
  void encode_symbol(RangeEncoder& enc, int symbol) const;
  int decode_symbol(RangeDecoder& dec) const;
};

// Counts proportional to the integrated Laplace pmf, renormalized to 2^16
// with a floor of 1; the residual is settled against the largest bin.
QuantizedCdf quantize_cdf(double mu, double scale, int lo, int hi);

// Static two-symbol model with p(1) = k/n clamped to [2^-16, 1 - 2^-16].
QuantizedCdf bernoulli_cdf(std::int64_t ones, std::int64_t total);

// Generic adaptive coding: the model for symbol i may depend on the prefix
// of symbols before it, which is exactly what the provider receives (the
// already-encoded prefix on the encode side, the already-decoded prefix on
// the decode side).
using CdfProvider = std::function<QuantizedCdf(std::size_t index, std::span<const int> prefix)>;

std::vector<std::uint8_t> range_encode(std::span<const int> symbols, const CdfProvider& cdf_for);
std::vector<int> range_decode(std::span<const std::uint8_t> bytes, std::size_t count,
                              const CdfProvider& cdf_for);

// Mask section: bits in fixed (layer, row-major) traversal order under the
// static Bernoulli model; the active count travels in the header.
std::vector<std::uint8_t> encode_mask(const std::vector<std::span<const std::uint8_t>>& mask,
                                      std::int64_t active);
std::vector<std::vector<std::uint8_t>> decode_mask(std::span<const std::uint8_t> bytes,
                                                   const std::vector<std::size_t>& layer_sizes,
                                                   std::int64_t active);

// Scalar quantization q = round(p / delta) coded with a zero-mean
// integrated-Laplace prior of scale stddev(q*delta)/sqrt(2), expressed on
// the integer lattice. The stddev is rounded through f32 before the CDF is
// built, exactly as the decoder will see it.
struct CompressedParams {
  std::vector<std::uint8_t> bytes;
  std::vector<int> q;
  float stddev = 0.0f;
  int qlo = 0;
  int qhi = 0;
  std::vector<double> reconstructed;  // q * delta
  double model_bits = 0.0;            // -sum log2 P under the quantized CDF
};

CompressedParams compress_network_params(std::span<const double> params, double delta);
std::vector<double> decompress_network_params(std::span<const std::uint8_t> bytes,
                                              std::size_t count, double delta, float stddev,
                                              int qlo, int qhi);

// The CDF both sides use for a parameter section.
QuantizedCdf network_param_cdf(double delta, float stddev, int qlo, int qhi);

// Greedy quantization-step search over delta = 2^-k, k = 2..12. The two
// objectives decompose: psi affects only rate (its own section plus the
// latent section it models), theta affects distortion and its own section.
struct StepSearchResult {
  int psi_log2 = 2;
  int theta_log2 = 2;
  double psi_cost = 0.0;
  double theta_cost = 0.0;
};

inline constexpr int kStepSearchMin = 2;
inline constexpr int kStepSearchMax = 12;

StepSearchResult search_quantization_steps(const std::function<double(double)>& psi_cost,
                                           const std::function<double(double)>& theta_cost);

}  // namespace lottery
