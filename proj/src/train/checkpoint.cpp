#include "gds/checkpoint.hpp"

#include <algorithm>

#include "gds/binary_io.hpp"
#include "gds/errors.hpp"

namespace gds {

namespace {

constexpr char kMagic[4] = {'G', 'D', 'S', 'C'};

std::string echo_text(const KeyValues& kv) {
  std::string s;
  for (const auto& [k, v] : kv) {
    if (k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ContractError("checkpoint: config echo entry '" + k + "' cannot be encoded");
    }
    s += k + "=" + v + "\n";
  }
  return s;
}

KeyValues parse_echo(const std::string& text) {
  KeyValues kv;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string::npos) throw FormatError("checkpoint: unterminated config echo line");
    const std::string line = text.substr(pos, end - pos);
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("checkpoint: malformed config echo line '" + line + "'");
    kv.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    pos = end + 1;
  }
  return kv;
}

NamedTensor snapshot(const std::string& name, const Tensor& t) {
  return {name, t.shape(), std::vector<double>(t.values().begin(), t.values().end())};
}

void copy_into(std::span<double> dst, const NamedTensor& src, const Shape& expected) {
  if (src.shape != expected) {
    throw ShapeError("checkpoint tensor '" + src.name + "' has shape " + shape_str(src.shape) +
                     ", model expects " + shape_str(expected));
  }
  std::copy(src.values.begin(), src.values.end(), dst.begin());
}

const std::string& required(const KeyValues& kv, const std::string& key) {
  const std::string* v = find_value(kv, key);
  if (!v) throw FormatError("checkpoint: config echo lacks '" + key + "'");
  return *v;
}

// Walks the tensor records of a file whose trailing CRC failed so the error
// can name the damaged tensor.
[[noreturn]] void report_corruption(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "checkpoint");
  r.bytes(8);
  r.u64();
  r.str();
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t start = r.position();
    const std::string name = r.str();
    const auto rank = r.u8();
    std::size_t numel = 1;
    for (int a = 0; a < rank; ++a) numel *= r.u32();
    r.bytes(numel * 8);
    if (!r.check_crc_since(start)) throw ChecksumError("checkpoint: checksum mismatch in tensor '" + name + "'");
  }
  r.u32();
  throw ChecksumError("checkpoint: file checksum mismatch");
}

}  // namespace

const NamedTensor& Checkpoint::tensor(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t;
  }
  throw MissingTensorError("checkpoint has no tensor named '" + std::string(name) + "'");
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  ByteWriter w;
  w.raw(std::string_view(kMagic, 4));
  w.u32(kCheckpointVersion);
  w.u64(ckpt.epoch);
  w.str(echo_text(ckpt.config));
  w.u32(static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    if (t.shape.size() > 255 || shape_numel(t.shape) != t.values.size()) {
      throw ContractError("checkpoint: tensor '" + t.name + "' has inconsistent shape");
    }
    const std::size_t start = w.size();
    w.str(t.name);
    w.u8(static_cast<std::uint8_t>(t.shape.size()));
    for (int e : t.shape) w.u32(static_cast<std::uint32_t>(e));
    for (double v : t.values) w.f64(v);
    w.crc_since(start);
  }
  w.crc_since(0);
  return w.take();
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  ByteReader r(bytes, "checkpoint");
  auto magic = r.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic)) throw BadMagicError("checkpoint: bad magic, not a GDSC file");
  const auto version = r.u32();
  if (version != kCheckpointVersion) {
    throw VersionMismatchError("checkpoint: version " + std::to_string(version) + " unsupported (expected " +
                               std::to_string(kCheckpointVersion) + ")");
  }
  const auto body = std::span(bytes).first(bytes.size() - 4);
  if (bytes.size() < 12 || crc32_of(body) != ByteReader(std::span(bytes).last(4), "checkpoint").u32()) {
    report_corruption(bytes);
  }
  Checkpoint ckpt;
  ckpt.epoch = r.u64();
  ckpt.config = parse_echo(r.str());
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    const std::size_t start = r.position();
    NamedTensor t;
    t.name = r.str();
    const auto rank = r.u8();
    for (int a = 0; a < rank; ++a) t.shape.push_back(static_cast<int>(r.u32()));
    t.values.resize(shape_numel(t.shape));
    for (auto& v : t.values) v = r.f64();
    if (!r.check_crc_since(start)) throw ChecksumError("checkpoint: checksum mismatch in tensor '" + t.name + "'");
    ckpt.tensors.push_back(std::move(t));
  }
  r.u32();
  if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after file checksum");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  write_file_bytes(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file_bytes(path)); }

Checkpoint capture(const TrainState& state) {
  Checkpoint ckpt;
  ckpt.epoch = static_cast<std::uint64_t>(state.epoch);
  ckpt.config = model_echo(state.model.config);
  for (auto& kv : train_echo(state.config)) ckpt.config.push_back(std::move(kv));
  ckpt.config.emplace_back("state.adam_step", std::to_string(state.opt.step));
  ckpt.config.emplace_back("state.best_val_dice", format_double(state.best_val_dice));
  ckpt.config.emplace_back("state.best_epoch", std::to_string(state.best_epoch));
  ckpt.config.emplace_back("state.rng", state.rng.state());
  for (const auto& [name, t] : state.model.params) ckpt.tensors.push_back(snapshot(name, t));
  std::size_t i = 0;
  for (const auto& [name, t] : state.model.params) {
    ckpt.tensors.push_back({"adam.m/" + name, t.shape(), state.opt.m[i]});
    ckpt.tensors.push_back({"adam.v/" + name, t.shape(), state.opt.v[i]});
    ++i;
  }
  return ckpt;
}

GdsModel restore_model(const Checkpoint& ckpt) {
  Rng unused(0);
  GdsModel model = make_model(model_from_echo(ckpt.config), unused);
  for (auto& [name, t] : model.params) copy_into(t.mutable_values(), ckpt.tensor(name), t.shape());
  return model;
}

TrainState restore_training(const Checkpoint& ckpt, const TrainConfig* expected, const WarnFn& warn) {
  TrainState state{restore_model(ckpt), {}, train_from_echo(ckpt.config), Rng(0)};
  if (expected) {
    for (const auto& [k, v] : train_echo(*expected)) {
      const std::string* have = find_value(ckpt.config, k);
      if (warn && (!have || *have != v)) {
        warn("checkpoint config echo differs for " + k + ": checkpoint has '" + (have ? *have : "") +
             "', using '" + v + "'");
      }
    }
    state.config = *expected;
  }
  state.opt = make_adam_state(state.model.params);
  state.opt.step = parse_int("state.adam_step", required(ckpt.config, "state.adam_step"));
  std::size_t i = 0;
  for (const auto& [name, t] : state.model.params) {
    copy_into(state.opt.m[i], ckpt.tensor("adam.m/" + name), t.shape());
    copy_into(state.opt.v[i], ckpt.tensor("adam.v/" + name), t.shape());
    ++i;
  }
  state.rng.set_state(required(ckpt.config, "state.rng"));
  state.epoch = static_cast<int>(ckpt.epoch);
  state.best_val_dice = parse_double("state.best_val_dice", required(ckpt.config, "state.best_val_dice"));
  state.best_epoch = static_cast<int>(parse_int("state.best_epoch", required(ckpt.config, "state.best_epoch")));
  return state;
}

}  // namespace gds
