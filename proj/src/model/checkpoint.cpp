#include "dvfy/model/checkpoint.hpp"

#include <zlib.h>

#include <charconv>
#include <fstream>
#include <sstream>

#include "dvfy/binary_io.hpp"
#include "dvfy/error.hpp"

namespace dvfy::model {

namespace {

constexpr std::string_view kMagic = "DVFY1\n";

std::string format_real(Real v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  require(ec == std::errc() && ptr == text.data() + text.size(), ErrorKind::kParse,
          "checkpoint key '" + key + "' has malformed value '" + text + "'");
  return value;
}

}  // namespace

std::uint32_t crc32(std::string_view bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

void CheckpointFile::set(const std::string& key, const std::string& value) {
  require(key.find_first_of("=\n") == std::string::npos && !key.empty() && value.find('\n') == std::string::npos,
          ErrorKind::kInput, "checkpoint manifest entry '" + key + "' is not a single key=value line");
  for (auto& [k, v] : manifest_)
    if (k == key) {
      v = value;
      return;
    }
  manifest_.emplace_back(key, value);
}

std::optional<std::string> CheckpointFile::find(const std::string& key) const {
  for (const auto& [k, v] : manifest_)
    if (k == key) return v;
  return std::nullopt;
}

const std::string& CheckpointFile::get(const std::string& key) const {
  for (const auto& [k, v] : manifest_)
    if (k == key) return v;
  fail(ErrorKind::kParse, "checkpoint manifest lacks '" + key + "'");
}

void CheckpointFile::add_blob(std::string name, std::vector<Real> values) {
  require(name.size() < 65536, ErrorKind::kInput, "blob name too long");
  blobs_.push_back(Blob{std::move(name), std::move(values)});
}

bool CheckpointFile::has_blob(const std::string& name) const {
  for (const auto& b : blobs_)
    if (b.name == name) return true;
  return false;
}

const Blob& CheckpointFile::blob(const std::string& name) const {
  for (const auto& b : blobs_)
    if (b.name == name) return b;
  fail(ErrorKind::kParse, "checkpoint lacks blob '" + name + "'");
}

void write_checkpoint(std::ostream& os, const CheckpointFile& file, BlobPrecision precision) {
  std::string manifest = "version=" + std::to_string(kCheckpointVersion) + "\n";
  manifest += std::string("blob_dtype=") + (precision == BlobPrecision::kFloat32 ? "f32" : "f64") + "\n";
  for (const auto& [k, v] : file.manifest()) {
    if (k == "version" || k == "blob_dtype") continue;
    manifest += k + "=" + v + "\n";
  }
  manifest += "\n";
  os.write(kMagic.data(), static_cast<std::streamsize>(kMagic.size()));
  os.write(manifest.data(), static_cast<std::streamsize>(manifest.size()));
  binary::put_le<std::uint32_t>(os, crc32(manifest));
  binary::put_le<std::uint32_t>(os, static_cast<std::uint32_t>(file.blobs().size()));
  for (const auto& b : file.blobs()) {
    std::ostringstream payload;
    for (Real v : b.values) {
      if (precision == BlobPrecision::kFloat32) {
        binary::put_f32(payload, static_cast<float>(v));
      } else {
        binary::put_f64(payload, v);
      }
    }
    const std::string bytes = payload.str();
    binary::put_le<std::uint16_t>(os, static_cast<std::uint16_t>(b.name.size()));
    os.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    binary::put_le<std::uint64_t>(os, bytes.size());
    binary::put_le<std::uint32_t>(os, crc32(bytes));
    os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  require(static_cast<bool>(os), ErrorKind::kIo, "failed writing checkpoint");
}

CheckpointFile read_checkpoint(std::istream& is) {
  std::string magic(kMagic.size(), '\0');
  is.read(magic.data(), static_cast<std::streamsize>(magic.size()));
  require(is.gcount() == static_cast<std::streamsize>(kMagic.size()) && magic == kMagic, ErrorKind::kParse,
          "not a DVFY1 checkpoint (bad magic)");

  CheckpointFile file;
  std::string manifest, line;
  while (true) {
    require(static_cast<bool>(std::getline(is, line)), ErrorKind::kParse, "truncated checkpoint manifest");
    manifest += line + "\n";
    if (line.empty()) break;
    const auto eq = line.find('=');
    require(eq != std::string::npos && eq > 0, ErrorKind::kParse, "malformed manifest line '" + line + "'");
    file.set(line.substr(0, eq), line.substr(eq + 1));
  }
  const int version = parse_value<int>("version", file.get("version"));
  require(version == kCheckpointVersion, ErrorKind::kVersion,
          "unsupported version " + std::to_string(version) + " (expected " + std::to_string(kCheckpointVersion) + ")");
  const auto stored_crc = binary::get_le<std::uint32_t>(is, "manifest checksum");
  require(stored_crc == crc32(manifest), ErrorKind::kChecksum, "manifest checksum mismatch");

  const std::string& dtype = file.get("blob_dtype");
  require(dtype == "f32" || dtype == "f64", ErrorKind::kParse, "unknown blob_dtype '" + dtype + "'");
  const std::size_t width = dtype == "f32" ? 4 : 8;

  const auto count = binary::get_le<std::uint32_t>(is, "blob count");
  for (std::uint32_t b = 0; b < count; ++b) {
    const auto name_len = binary::get_le<std::uint16_t>(is, "blob name length");
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    require(is.gcount() == name_len, ErrorKind::kParse, "truncated blob name");
    const auto bytes = binary::get_le<std::uint64_t>(is, "blob '" + name + "' length");
    const auto crc = binary::get_le<std::uint32_t>(is, "blob '" + name + "' checksum");
    require(bytes % width == 0 && bytes < (1ULL << 34), ErrorKind::kParse, "blob '" + name + "' has a bad length");
    std::string payload(bytes, '\0');
    is.read(payload.data(), static_cast<std::streamsize>(bytes));
    require(is.gcount() == static_cast<std::streamsize>(bytes), ErrorKind::kParse, "truncated blob '" + name + "'");
    require(crc == crc32(payload), ErrorKind::kChecksum, "blob '" + name + "' checksum mismatch");
    std::istringstream ps(payload);
    std::vector<Real> values(bytes / width);
    for (auto& v : values) v = width == 4 ? binary::get_f32(ps, name) : binary::get_f64(ps, name);
    file.add_blob(std::move(name), std::move(values));
  }
  return file;
}

void write_checkpoint_file(const std::filesystem::path& path, const CheckpointFile& file, BlobPrecision precision) {
  std::ofstream os(path, std::ios::binary);
  require(static_cast<bool>(os), ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  write_checkpoint(os, file, precision);
}

CheckpointFile read_checkpoint_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  require(static_cast<bool>(is), ErrorKind::kIo, "cannot open " + path.string());
  return read_checkpoint(is);
}

void encode_arch(CheckpointFile& f, const ArchConfig& a) {
  f.set("arch.channels", std::to_string(a.channels));
  f.set("arch.window", std::to_string(a.window));
  f.set("arch.classes", std::to_string(a.classes));
  f.set("arch.latent_domains", std::to_string(a.latent_domains));
  f.set("arch.kernel_width", std::to_string(a.kernel_width));
  f.set("arch.conv1_channels", std::to_string(a.conv1_channels));
  f.set("arch.conv2_channels", std::to_string(a.conv2_channels));
  f.set("arch.pool_kernel", std::to_string(a.pool_kernel));
  f.set("arch.pool_stride", std::to_string(a.pool_stride));
  f.set("arch.bottleneck_dim", std::to_string(a.bottleneck_dim));
  f.set("arch.adversary_hidden", std::to_string(a.adversary_hidden));
  f.set("arch.adversary_layers", std::to_string(a.adversary_layers));
  f.set("arch.bn_eps", format_real(a.bn_eps));
  f.set("arch.bn_momentum", format_real(a.bn_momentum));
  f.set("arch.seed", std::to_string(a.seed));
  f.set("arch.init", "uniform_fan_in");
  f.set("arch.activation", "relu");
  f.set("arch.block_order", "conv,maxpool,batchnorm,relu");
}

ArchConfig decode_arch(const CheckpointFile& f) {
  ArchConfig a;
  auto sz = [&](const char* key) { return parse_value<std::size_t>(key, f.get(key)); };
  a.channels = sz("arch.channels");
  a.window = sz("arch.window");
  a.classes = parse_value<int>("arch.classes", f.get("arch.classes"));
  a.latent_domains = parse_value<int>("arch.latent_domains", f.get("arch.latent_domains"));
  a.kernel_width = sz("arch.kernel_width");
  a.conv1_channels = sz("arch.conv1_channels");
  a.conv2_channels = sz("arch.conv2_channels");
  a.pool_kernel = sz("arch.pool_kernel");
  a.pool_stride = sz("arch.pool_stride");
  a.bottleneck_dim = sz("arch.bottleneck_dim");
  a.adversary_hidden = sz("arch.adversary_hidden");
  a.adversary_layers = sz("arch.adversary_layers");
  a.bn_eps = parse_value<Real>("arch.bn_eps", f.get("arch.bn_eps"));
  a.bn_momentum = parse_value<Real>("arch.bn_momentum", f.get("arch.bn_momentum"));
  a.seed = parse_value<std::uint64_t>("arch.seed", f.get("arch.seed"));
  return a;
}

void encode_bundle(CheckpointFile& file, ModelBundle& bundle, const std::string& prefix) {
  if (prefix.empty()) {
    encode_arch(file, bundle.arch());
    file.set("inference_step", std::to_string(bundle.inference_step()));
  } else {
    file.set(prefix + "inference_step", std::to_string(bundle.inference_step()));
  }
  for (auto& [name, tensor] : bundle.named_tensors()) file.add_blob(prefix + name, tensor->values());
}

ModelBundle decode_bundle(const CheckpointFile& file, const std::string& prefix) {
  ModelBundle bundle(decode_arch(file));
  for (auto& [name, tensor] : bundle.named_tensors()) {
    const Blob& b = file.blob(prefix + name);
    require(b.values.size() == tensor->size(), ErrorKind::kShape,
            "blob '" + b.name + "' holds " + std::to_string(b.values.size()) + " values, expected " +
                std::to_string(tensor->size()));
    *tensor = Tensor(tensor->shape(), b.values);
  }
  bundle.set_inference_step(parse_value<int>("inference_step", file.get(prefix + "inference_step")));
  return bundle;
}

void save_checkpoint(const std::filesystem::path& path, ModelBundle& bundle, BlobPrecision precision) {
  CheckpointFile file;
  encode_bundle(file, bundle);
  write_checkpoint_file(path, file, precision);
}

ModelBundle load_checkpoint(const std::filesystem::path& path) { return decode_bundle(read_checkpoint_file(path)); }

}  // namespace dvfy::model
