#include "gpool/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <unistd.h>

#include "gpool/config.hpp"
#include "gpool/error.hpp"

namespace gpool {

namespace {

constexpr char kMagic[8] = {'G', 'P', 'O', 'O', 'L', 'C', 'K', 'P'};
constexpr char kEnd[8] = {'G', 'P', 'O', 'O', 'L', 'E', 'N', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(b[i], b[sizeof(T) - 1 - i]);
    std::memcpy(&v, b, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.append(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void bytes(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& in) : in_(in) {}

  template <class T>
  T get() {
    T v;
    std::memcpy(&v, take(sizeof(T)), sizeof(T));
    return to_little(v);
  }
  const char* take(std::size_t n) {
    if (n > in_.size() - pos_) throw FormatError("checkpoint is truncated");
    const char* p = in_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool at_end() const { return pos_ == in_.size(); }

 private:
  const std::string& in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Checkpoint& ckpt) {
  nlohmann::json meta;
  meta["model"] = model_config_to_json(ckpt.model.config());
  meta["labels"] = ckpt.labels;
  meta["lowercase"] = ckpt.lowercase;
  meta["vocab"] = ckpt.vocab.regular_tokens();
  // Bytes as numbers: JSON strings must be valid UTF-8.
  meta["alphabet"] = std::vector<unsigned>(ckpt.vocab.alphabet().begin(), ckpt.vocab.alphabet().end());
  meta["info"] = ckpt.info;
  const std::string meta_text = meta.dump();

  std::vector<std::pair<std::string, const Tensor*>> tensors;
  ckpt.model.visit([&](const std::string& name, const Tensor& t, bool) { tensors.emplace_back(name, &t); });

  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.put<std::uint32_t>(kVersion);
  w.put<std::uint64_t>(meta_text.size());
  w.bytes(meta_text.data(), meta_text.size());
  w.put<std::uint64_t>(tensors.size());
  for (const auto& [name, t] : tensors) {
    w.put<std::uint32_t>(static_cast<std::uint32_t>(name.size()));
    w.bytes(name.data(), name.size());
    w.put<std::uint32_t>(static_cast<std::uint32_t>(t->rank()));
    for (auto e : t->shape()) w.put<std::uint64_t>(e);
    for (double v : t->data()) w.put<double>(v);
  }
  w.bytes(kEnd, sizeof kEnd);
  return w.take();
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  if (std::memcmp(r.take(sizeof kMagic), kMagic, sizeof kMagic) != 0)
    throw FormatError("not a checkpoint file (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const auto meta_len = r.get<std::uint64_t>();
  const char* meta_ptr = r.take(meta_len);

  Checkpoint ckpt;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(meta_ptr, meta_ptr + meta_len);
    ckpt.labels = meta.at("labels").get<std::vector<std::string>>();
    ckpt.lowercase = meta.at("lowercase").get<bool>();
    const auto alphabet = meta.at("alphabet").get<std::vector<unsigned>>();
    std::vector<unsigned char> chars;
    for (auto c : alphabet) {
      if (c > 255) throw FormatError("checkpoint alphabet entry out of range");
      chars.push_back(static_cast<unsigned char>(c));
    }
    ckpt.vocab = Vocabulary::from_parts(meta.at("vocab").get<std::vector<std::string>>(), chars);
    ckpt.info = meta.value("info", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("checkpoint metadata: ") + e.what());
  }
  const auto config = model_config_from_json(meta.at("model"));

  std::map<std::string, Tensor> stored;
  const auto count = r.get<std::uint64_t>();
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len), name_len);
    const auto rank = r.get<std::uint32_t>();
    Tensor::Shape shape(rank);
    std::size_t size = 1;
    for (auto& e : shape) {
      e = r.get<std::uint64_t>();
      if (e == 0 || e > (std::uint64_t{1} << 32)) throw FormatError("checkpoint tensor '" + name + "' has a bad extent");
      size *= e;
    }
    if (size > bytes.size() / sizeof(double)) throw FormatError("checkpoint is truncated");
    std::vector<double> values(size);
    for (auto& v : values) v = r.get<double>();
    stored.emplace(std::move(name), Tensor(std::move(shape), std::move(values)));
  }
  if (std::memcmp(r.take(sizeof kEnd), kEnd, sizeof kEnd) != 0 || !r.at_end())
    throw FormatError("checkpoint has a bad end marker");

  std::mt19937_64 rng(0);
  ckpt.model = Model::init(config, rng);
  std::size_t used = 0;
  ckpt.model.visit([&](const std::string& name, Tensor& t, bool) {
    auto it = stored.find(name);
    if (it == stored.end()) throw FormatError("checkpoint lacks tensor '" + name + "'");
    if (it->second.shape() != t.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(it->second.shape()) +
                        ", expected " + shape_string(t.shape()));
    }
    t = it->second;
    ++used;
  });
  if (used != stored.size()) throw FormatError("checkpoint has tensors the model does not use");
  return ckpt;
}

void write_file_atomic(const std::string& path, const std::string& contents) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + tmp.string() + "'");
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw InputError("failed writing '" + tmp.string() + "'");
    }
  }
  fs::rename(tmp, target);
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return deserialize_checkpoint(buf.str());
}

}  // namespace gpool
