#include "inttower/checkpoint.hpp"

#include <fstream>
#include <iterator>

#include "inttower/binary_io.hpp"
#include "inttower/errors.hpp"

namespace inttower {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + path.string());
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  std::string out;
  binary::put_bytes(out, "ITCK");
  binary::put<std::uint32_t>(out, kCheckpointVersion);
  binary::put<std::uint64_t>(out, ckpt.schema_hash);
  binary::put<std::uint64_t>(out, ckpt.config_text.size());
  binary::put_bytes(out, ckpt.config_text);
  binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.params.size()));
  for (const Parameter& p : ckpt.params.all()) {
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    binary::put_bytes(out, p.name);
    binary::put<std::uint8_t>(out, static_cast<std::uint8_t>(p.role));
    binary::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (std::size_t d : p.value.shape()) binary::put<std::uint64_t>(out, d);
    for (double v : p.value.values()) binary::put<double>(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  binary::Reader in(bytes.data(), bytes.size(), "checkpoint");
  if (in.bytes(4) != "ITCK") throw FormatError("not a checkpoint (bad magic)");
  const auto version = in.get<std::uint32_t>();
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  Checkpoint ckpt;
  ckpt.schema_hash = in.get<std::uint64_t>();
  const auto config_len = in.get<std::uint64_t>();
  if (config_len > in.remaining()) throw FormatError("checkpoint config length exceeds file");
  ckpt.config_text = std::string(in.bytes(config_len));
  const auto count = in.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = in.get<std::uint32_t>();
    std::string name(in.bytes(name_len));
    const auto role = in.get<std::uint8_t>();
    if (role > 2) throw FormatError("parameter " + name + " has unknown role " + std::to_string(role));
    const auto rank = in.get<std::uint32_t>();
    if (rank > 8) throw FormatError("parameter " + name + " has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = in.get<std::uint64_t>();
      numel *= d;
    }
    if (numel > in.remaining() / sizeof(double)) throw FormatError("parameter " + name + " exceeds file size");
    std::vector<double> values(numel);
    for (double& v : values) v = in.get<double>();
    ckpt.params.add(name, static_cast<ParamRole>(role), Tensor(std::move(shape), std::move(values)));
  }
  if (in.remaining() != 0) throw FormatError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) { write_file(path, encode_checkpoint(ckpt)); }

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

}  // namespace inttower
