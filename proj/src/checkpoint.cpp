#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gla/model.hpp"

namespace gla::model {

namespace {

constexpr const char* kMagic = "gla-checkpoint";
constexpr const char* kSeparator = "---";

void put_le(std::ostream& os, double v) {
  std::uint64_t bits = std::bit_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

double get_le(const unsigned char* b) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return std::bit_cast<double>(bits);
}

std::string expect_key(std::istream& is, const std::string& key) {
  std::string line;
  if (!std::getline(is, line)) throw CheckpointError("corrupt checkpoint: missing '" + key + "'");
  std::istringstream ls(line);
  std::string k, v;
  ls >> k;
  std::getline(ls >> std::ws, v);
  if (k != key) throw CheckpointError("corrupt checkpoint: expected '" + key + "', got '" + k + "'");
  return v;
}

}  // namespace

void save_checkpoint(ModelBundle& m, const std::filesystem::path& path, std::uint64_t config_hash) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw CheckpointError("cannot write checkpoint " + path.string());
  const auto& o = m.options();
  auto state = m.state();
  os << kMagic << '\n'
     << "version " << kCheckpointVersion << '\n'
     << "latent_dim " << kLatentDim << '\n'
     << "num_classes " << o.num_classes << '\n'
     << "tied " << (o.tied ? 1 : 0) << '\n'
     << "two_heads " << (o.two_heads ? 1 : 0) << '\n'
     << "decoder_final " << final_activation_name(o.decoder_final) << '\n'
     << "seed " << m.seed() << '\n';
  char hash[32];
  std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(config_hash));
  os << "config_hash " << hash << '\n' << "tensors " << state.size() << '\n';
  for (const auto& [name, t] : state)
    os << "tensor " << name << ' ' << t->rows() << ' ' << t->cols() << '\n';
  os << kSeparator << '\n';
  for (const auto& [name, t] : state)
    for (double v : t->values()) put_le(os, v);
  if (!os) throw CheckpointError("failed writing checkpoint " + path.string());
}

ModelBundle load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw CheckpointError("cannot read checkpoint " + path.string());
  std::string line;
  if (!std::getline(is, line) || line != kMagic)
    throw CheckpointError("corrupt checkpoint: bad magic");
  const int version = std::stoi(expect_key(is, "version"));
  if (version != kCheckpointVersion)
    throw CheckpointError("version mismatch: file has " + std::to_string(version) +
                          ", expected " + std::to_string(kCheckpointVersion));
  const auto latent = std::stoull(expect_key(is, "latent_dim"));
  if (latent != kLatentDim)
    throw CheckpointError("shape mismatch: latent_dim " + std::to_string(latent) + ", expected " +
                          std::to_string(kLatentDim));
  ModelOptions o;
  o.num_classes = std::stoull(expect_key(is, "num_classes"));
  o.tied = expect_key(is, "tied") == "1";
  o.two_heads = expect_key(is, "two_heads") == "1";
  o.decoder_final = final_activation_from_name(expect_key(is, "decoder_final"));
  const std::uint64_t seed = std::stoull(expect_key(is, "seed"));
  expect_key(is, "config_hash");
  const auto count = std::stoull(expect_key(is, "tensors"));

  ModelBundle m = ModelBundle::create(o, seed);
  auto state = m.state();
  if (count != state.size())
    throw CheckpointError("shape mismatch: " + std::to_string(count) + " tensors, expected " +
                          std::to_string(state.size()));
  std::size_t total = 0;
  for (const auto& [name, t] : state) {
    const std::string rec = expect_key(is, "tensor");
    std::istringstream rs(rec);
    std::string n;
    std::size_t r = 0, c = 0;
    if (!(rs >> n >> r >> c)) throw CheckpointError("corrupt checkpoint: bad tensor record");
    if (n != name || r != t->rows() || c != t->cols())
      throw CheckpointError("shape mismatch: " + n + " " + std::to_string(r) + "x" +
                            std::to_string(c) + ", expected " + name + " " + t->shape_str());
    total += t->size();
  }
  if (!std::getline(is, line) || line != kSeparator)
    throw CheckpointError("corrupt checkpoint: missing separator");
  std::vector<unsigned char> bytes(total * 8);
  is.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (static_cast<std::size_t>(is.gcount()) != bytes.size())
    throw CheckpointError("corrupt checkpoint: truncated parameter data");
  if (is.peek() != std::char_traits<char>::eof())
    throw CheckpointError("corrupt checkpoint: trailing bytes");
  std::size_t off = 0;
  for (const auto& [name, t] : state)
    for (double& v : t->values()) {
      v = get_le(bytes.data() + off);
      off += 8;
    }
  return m;
}

}  // namespace gla::model
