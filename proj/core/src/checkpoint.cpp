#include "vvs/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>
#include <openssl/evp.h>

#include "vvs/config.hpp"
#include "vvs/error.hpp"

namespace vvs {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'V', 'V', 'S', 'C', 'K', 'P', 'T', '1'};

struct Header {
  nlohmann::json json;
  std::uint64_t data_offset = 0;
};

Header read_header(std::ifstream& in, const std::filesystem::path& path) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw DataError("not a checkpoint file: " + path.string());
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof len);
  if (!in || len > (1u << 26)) throw DataError("corrupt checkpoint header: " + path.string());
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError("truncated checkpoint header: " + path.string());
  Header h;
  try {
    h.json = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("corrupt checkpoint header in " + path.string() + ": " + e.what());
  }
  if (h.json.value("format", "") != "vvs-checkpoint")
    throw DataError("not a vvs checkpoint: " + path.string());
  if (h.json.value("version", 0) != kCheckpointVersion)
    throw DataError("unsupported checkpoint version in " + path.string());
  h.data_offset = 16 + len;
  return h;
}

void read_tensors(std::ifstream& in, const nlohmann::json& header, Model<float>& model,
                  const std::filesystem::path& path) {
  auto refs = model.parameters();
  const auto& table = header.at("tensors");
  if (table.size() != refs.params.size() + refs.buffers.size())
    throw ConfigError("checkpoint", "tensor count differs from the model in " + path.string());
  std::size_t idx = 0;
  auto read_into = [&](const std::string& name, nn::Buf<float>& dst) {
    const auto& e = table.at(idx++);
    if (e.at("name").get<std::string>() != name || e.at("count").get<std::size_t>() != dst.size())
      throw ConfigError("checkpoint", "tensor '" + e.at("name").get<std::string>() +
                                          "' does not match the model layout");
    in.read(reinterpret_cast<char*>(dst.data()), static_cast<std::streamsize>(dst.size() * sizeof(float)));
    if (!in) throw DataError("truncated checkpoint data: " + path.string());
  };
  for (auto* p : refs.params) read_into(p->name, p->value);
  for (auto* b : refs.buffers) read_into(b->name, b->value);
  in.peek();
  if (!in.eof()) throw DataError("trailing bytes in checkpoint: " + path.string());
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, Model<float>& model, const CheckpointMeta& meta) {
  auto refs = model.parameters();
  nlohmann::json tensors = nlohmann::json::array();
  for (auto* p : refs.params)
    tensors.push_back({{"name", p->name}, {"kind", "param"}, {"shape", p->shape}, {"count", p->size()}});
  for (auto* b : refs.buffers)
    tensors.push_back({{"name", b->name}, {"kind", "buffer"}, {"count", b->value.size()}});
  nlohmann::json header = {{"format", "vvs-checkpoint"},
                           {"version", kCheckpointVersion},
                           {"backbone", to_json(model.backbone_config())},
                           {"heads", to_json(model.head_config())},
                           {"train", to_json(meta.config)},
                           {"epoch", meta.epoch},
                           {"step", meta.step},
                           {"model_version", model.version()},
                           {"tensors", tensors}};
  const std::string text = header.dump();
  const std::uint64_t len = text.size();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp.string());
    out.write(kMagic, 8);
    out.write(reinterpret_cast<const char*>(&len), sizeof len);
    out.write(text.data(), static_cast<std::streamsize>(len));
    for (auto* p : refs.params)
      out.write(reinterpret_cast<const char*>(p->value.data()),
                static_cast<std::streamsize>(p->size() * sizeof(float)));
    for (auto* b : refs.buffers)
      out.write(reinterpret_cast<const char*>(b->value.data()),
                static_cast<std::streamsize>(b->value.size() * sizeof(float)));
    out.flush();
    if (!out) {
      std::error_code ec;
      std::filesystem::remove(tmp, ec);
      throw Error("writing checkpoint " + path.string() + " failed (disk full?)");
    }
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const Header h = read_header(in, path);
  CheckpointMeta meta;
  meta.config = train_config_from_json(h.json.at("train"));
  meta.epoch = h.json.at("epoch").get<int>();
  meta.step = h.json.at("step").get<std::uint64_t>();
  const BackboneConfig bb = backbone_config_from_json(h.json.at("backbone"), "backbone");
  const HeadConfig hd = head_config_from_json(h.json.at("heads"), "heads");
  Model<float> model(bb, hd, meta.config.seed);
  read_tensors(in, h.json, model, path);
  for (std::uint64_t v = 0; v < h.json.value("model_version", std::uint64_t{0}); ++v) model.bump_version();
  return {std::move(model), meta};
}

CheckpointMeta load_weights(const std::filesystem::path& path, Model<float>& model) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  const Header h = read_header(in, path);
  const BackboneConfig bb = backbone_config_from_json(h.json.at("backbone"), "backbone");
  const HeadConfig hd = head_config_from_json(h.json.at("heads"), "heads");
  if (!(bb == model.backbone_config()))
    throw ConfigError("backbone", "checkpoint architecture " + h.json.at("backbone").dump() +
                                      " does not match the model " + to_json(model.backbone_config()).dump());
  if (!(hd == model.head_config()))
    throw ConfigError("heads", "checkpoint heads " + h.json.at("heads").dump() +
                                   " do not match the model " + to_json(model.head_config()).dump());
  read_tensors(in, h.json, model, path);
  CheckpointMeta meta;
  meta.config = train_config_from_json(h.json.at("train"));
  meta.epoch = h.json.at("epoch").get<int>();
  meta.step = h.json.at("step").get<std::uint64_t>();
  return meta;
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1) {
    EVP_MD_CTX_free(ctx);
    throw Error("sha256: OpenSSL init failed");
  }
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int mdlen = 0;
  EVP_DigestFinal_ex(ctx, md, &mdlen);
  EVP_MD_CTX_free(ctx);
  std::ostringstream os;
  for (unsigned int i = 0; i < mdlen; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
  return os.str();
}

}  // namespace vvs
