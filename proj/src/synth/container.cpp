#include <algorithm>

#include "gds/binary_io.hpp"
#include "gds/synth.hpp"

namespace gds {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'S', '1'};

}  // namespace

std::vector<std::uint8_t> encode_container(const Dataset& dataset) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kContainerVersion);
  w.u32(static_cast<std::uint32_t>(dataset.samples.size()));
  w.u32(static_cast<std::uint32_t>(dataset.profiles.size()));
  for (const auto& p : dataset.profiles) {
    w.u32(p.id);
    w.f64(p.systematic_offset);
    w.f64(p.jitter_lo);
    w.f64(p.jitter_hi);
  }
  for (const auto& s : dataset.samples) {
    const std::size_t start = w.size();
    w.u64(s.seed);
    w.u32(static_cast<std::uint32_t>(s.height()));
    w.u32(static_cast<std::uint32_t>(s.width()));
    w.u32(static_cast<std::uint32_t>(s.annotations.size()));
    w.u8(static_cast<std::uint8_t>(s.split));
    for (double v : s.image.data) w.f64(v);
    w.bytes(s.latent_mask.data);
    for (std::size_t k = 0; k < s.annotations.size(); ++k) {
      w.u32(s.annotator_ids[k]);
      w.bytes(s.annotations[k].data);
    }
    w.crc_since(start);
  }
  return w.take();
}

Dataset decode_container(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "dataset container");
  if (bytes.size() < 4 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    throw BadMagicError("dataset container: bad magic (expected \"GDS1\")");
  }
  r.bytes(4);
  const auto version = r.u32();
  if (version != kContainerVersion) {
    throw VersionMismatchError("dataset container: version " + std::to_string(version) +
                               " is not supported (expected " + std::to_string(kContainerVersion) + ")");
  }
  const auto sample_count = r.u32();
  const auto annotator_count = r.u32();
  Dataset ds;
  for (std::uint32_t i = 0; i < annotator_count; ++i) {
    AnnotatorProfile p;
    p.id = r.u32();
    p.systematic_offset = r.f64();
    p.jitter_lo = r.f64();
    p.jitter_hi = r.f64();
    ds.profiles.push_back(p);
  }
  auto known = [&](std::uint32_t id) {
    return std::any_of(ds.profiles.begin(), ds.profiles.end(), [id](const auto& p) { return p.id == id; });
  };
  for (std::uint32_t i = 0; i < sample_count; ++i) {
    const std::string record = "sample record " + std::to_string(i);
    const std::size_t start = r.position();
    MultiRaterSample s;
    s.seed = r.u64();
    const auto h = static_cast<int>(r.u32());
    const auto w = static_cast<int>(r.u32());
    const auto n = r.u32();
    const auto split = r.u8();
    const auto pixels = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
    s.image = ImageGrid(h, w);
    s.latent_mask = MaskGrid(h, w);
    // Bound the claimed payload before allocating for annotations.
    if (r.remaining() < pixels * 9 + static_cast<std::size_t>(n) * (4 + pixels) + 4) {
      throw TruncatedError("dataset container: truncated payload in " + record);
    }
    for (auto& v : s.image.data) v = r.f64();
    auto latent = r.bytes(pixels);
    std::copy(latent.begin(), latent.end(), s.latent_mask.data.begin());
    for (std::uint32_t k = 0; k < n; ++k) {
      s.annotator_ids.push_back(r.u32());
      auto m = r.bytes(pixels);
      MaskGrid mask(h, w);
      std::copy(m.begin(), m.end(), mask.data.begin());
      s.annotations.push_back(std::move(mask));
    }
    if (!r.check_crc_since(start)) {
      throw ChecksumError("dataset container: checksum mismatch in " + record);
    }
    if (split > 2) throw FormatError("dataset container: invalid split tag in " + record);
    s.split = static_cast<Split>(split);
    for (std::size_t k = 0; k < s.annotator_ids.size(); ++k) {
      if (!known(s.annotator_ids[k])) {
        throw FormatError("dataset container: unknown annotator id in " + record);
      }
      for (std::size_t j = k + 1; j < s.annotator_ids.size(); ++j) {
        if (s.annotator_ids[j] == s.annotator_ids[k]) {
          throw FormatError("dataset container: duplicate annotator id in " + record);
        }
      }
    }
    s.blur_sigma = blur_sigma_for_seed(s.seed);
    ds.samples.push_back(std::move(s));
  }
  if (r.remaining() != 0) throw FormatError("dataset container: trailing bytes after last record");
  return ds;
}

void write_container(const Dataset& dataset, const std::string& path) {
  write_file_bytes(path, encode_container(dataset));
}

Dataset read_container(const std::string& path) { return decode_container(read_file_bytes(path)); }

}  // namespace gds
