#include "lottery/bitstream.hpp"

#include <bit>
#include <cstring>

namespace lottery {

namespace {

class ByteWriter {
 public:
  explicit ByteWriter(std::vector<std::uint8_t>& out) : out_(out) {}

  void u8(std::uint8_t v) { out_.push_back(v); }
  void u16(std::uint16_t v) { raw(&v, 2); }
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void i16(std::int16_t v) { raw(&v, 2); }
  void f32(float v) { raw(&v, 4); }
  void bytes(std::span<const std::uint8_t> v) {
    out_.insert(out_.end(), v.begin(), v.end());
  }

 private:
  void raw(const void* p, std::size_t n) {
    static_assert(std::endian::native == std::endian::little,
                  "serialization assumes a little-endian host");
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  std::vector<std::uint8_t>& out_;
};

class ByteReader {
 public:
  explicit ByteReader(std::span<const std::uint8_t> data) : data_(data) {}

  std::uint8_t u8() { return take<std::uint8_t>(); }
  std::uint16_t u16() { return take<std::uint16_t>(); }
  std::uint32_t u32() { return take<std::uint32_t>(); }
  std::uint64_t u64() { return take<std::uint64_t>(); }
  std::int16_t i16() { return take<std::int16_t>(); }
  float f32() { return take<float>(); }

  std::vector<std::uint8_t> bytes(std::size_t n) {
    require(n);
    std::vector<std::uint8_t> out(data_.begin() + pos_, data_.begin() + pos_ + n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  template <class T>
  T take() {
    require(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void require(std::size_t n) const {
    if (data_.size() - pos_ < n) throw DecodeError("truncated bitstream", pos_);
  }

  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

constexpr std::size_t kFixedHeaderBytes =
    4 + 1 + 1 + 4 + 4 + 8 + 4 + 2 + 2 + 1 + 1 + 2 + 2 + 1 + 1 + 4 + 4 + 4 * 2 + 4;
constexpr std::size_t kDenseExtraBytes = 1 + 4 + 2 + 2;

}  // namespace

std::size_t BitstreamHeader::serialized_size() const {
  std::size_t n = kFixedHeaderBytes + latent_bounds.size() * 4;
  if (mode == CodecMode::kDenseTrained) n += kDenseExtraBytes;
  return n;
}

std::size_t Bitstream::total_bytes() const {
  std::size_t n = header.serialized_size();
  n += 4 + psi.size();
  n += 4 + z.size();
  n += 4 + theta.size();
  n += 4 + tau.size();
  if (header.mode == CodecMode::kDenseTrained) n += 4 + w.size();
  return n;
}

std::vector<std::uint8_t> serialize(const Bitstream& stream) {
  std::vector<std::uint8_t> out;
  out.reserve(stream.total_bytes());
  ByteWriter wr(out);
  const BitstreamHeader& h = stream.header;

  wr.bytes({reinterpret_cast<const std::uint8_t*>(kMagic), 4});
  wr.u8(kVersion);
  wr.u8(static_cast<std::uint8_t>(h.mode));
  wr.u32(h.height);
  wr.u32(h.width);
  wr.u64(h.seed);
  wr.f32(h.mask_ratio);
  wr.u16(h.modnet_width);
  wr.u16(h.arm_context);
  wr.u8(h.latent_levels);
  wr.u8(h.extra_convs);
  wr.u16(h.fourier_phases);
  wr.u16(h.fourier_freqs);
  for (const auto& b : h.latent_bounds) {
    wr.i16(b.lo);
    wr.i16(b.hi);
  }
  wr.u8(h.delta_theta_log2);
  wr.u8(h.delta_psi_log2);
  wr.f32(h.stddev_theta);
  wr.f32(h.stddev_psi);
  wr.i16(h.theta_bounds.lo);
  wr.i16(h.theta_bounds.hi);
  wr.i16(h.psi_bounds.lo);
  wr.i16(h.psi_bounds.hi);
  wr.u32(h.active_count);
  if (h.mode == CodecMode::kDenseTrained) {
    wr.u8(h.delta_w_log2);
    wr.f32(h.stddev_w);
    wr.i16(h.w_bounds.lo);
    wr.i16(h.w_bounds.hi);
  }

  auto section = [&wr](const std::vector<std::uint8_t>& s) {
    wr.u32(static_cast<std::uint32_t>(s.size()));
    wr.bytes(s);
  };
  section(stream.psi);
  section(stream.z);
  section(stream.theta);
  section(stream.tau);
  if (h.mode == CodecMode::kDenseTrained) section(stream.w);
  return out;
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  ByteReader rd(bytes);
  Bitstream stream;
  BitstreamHeader& h = stream.header;

  const auto magic = rd.bytes(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0)
    throw DecodeError("bad magic", 0);
  const std::uint8_t version = rd.u8();
  if (version != kVersion) throw DecodeError("unsupported version", rd.pos() - 1);
  const std::uint8_t mode = rd.u8();
  if (mode > 2) throw DecodeError("unknown codec mode", rd.pos() - 1);
  h.mode = static_cast<CodecMode>(mode);
  h.height = rd.u32();
  h.width = rd.u32();
  if (h.height == 0 || h.width == 0) throw DecodeError("empty image dimensions", rd.pos());
  h.seed = rd.u64();
  h.mask_ratio = rd.f32();
  h.modnet_width = rd.u16();
  h.arm_context = rd.u16();
  h.latent_levels = rd.u8();
  h.extra_convs = rd.u8();
  h.fourier_phases = rd.u16();
  h.fourier_freqs = rd.u16();
  if (h.latent_levels == 0) throw DecodeError("no latent levels", rd.pos());
  h.latent_bounds.resize(h.latent_levels);
  for (auto& b : h.latent_bounds) {
    b.lo = rd.i16();
    b.hi = rd.i16();
    if (b.lo > b.hi) throw DecodeError("invalid latent bounds", rd.pos());
  }
  h.delta_theta_log2 = rd.u8();
  h.delta_psi_log2 = rd.u8();
  h.stddev_theta = rd.f32();
  h.stddev_psi = rd.f32();
  h.theta_bounds.lo = rd.i16();
  h.theta_bounds.hi = rd.i16();
  h.psi_bounds.lo = rd.i16();
  h.psi_bounds.hi = rd.i16();
  h.active_count = rd.u32();
  if (h.mode == CodecMode::kDenseTrained) {
    h.delta_w_log2 = rd.u8();
    h.stddev_w = rd.f32();
    h.w_bounds.lo = rd.i16();
    h.w_bounds.hi = rd.i16();
  }

  auto section = [&rd]() {
    const std::uint32_t len = rd.u32();
    if (len > rd.remaining()) throw DecodeError("section length exceeds stream", rd.pos());
    return rd.bytes(len);
  };
  stream.psi = section();
  stream.z = section();
  stream.theta = section();
  stream.tau = section();
  if (h.mode == CodecMode::kDenseTrained) stream.w = section();
  if (rd.remaining() != 0) throw DecodeError("trailing bytes after last section", rd.pos());
  return stream;
}

}  // namespace lottery
