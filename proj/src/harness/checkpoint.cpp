#include "hjscc/harness/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace hjscc::harness {

namespace {

constexpr char kMagic[8] = {'H', 'J', 'S', 'C', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}
  template <typename T>
  void pod(const T& v) { out_.write(reinterpret_cast<const char*>(&v), sizeof(T)); }
  void string(const std::string& s) {
    pod<std::uint64_t>(s.size());
    out_.write(s.data(), static_cast<std::streamsize>(s.size()));
  }
  void tensor(const Tensor& t) {
    pod<std::int32_t>(t.shape().c);
    pod<std::int32_t>(t.shape().h);
    pod<std::int32_t>(t.shape().w);
    out_.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::filesystem::path& path) : in_(in), path_(path) {}
  template <typename T>
  T pod() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    check();
    return v;
  }
  std::string string() {
    const auto n = pod<std::uint64_t>();
    if (n > (1u << 26)) fail("implausible string length");
    std::string s(n, '\0');
    in_.read(s.data(), static_cast<std::streamsize>(n));
    check();
    return s;
  }
  Tensor tensor() {
    Shape s;
    s.c = pod<std::int32_t>();
    s.h = pod<std::int32_t>();
    s.w = pod<std::int32_t>();
    if (s.c < 0 || s.h < 0 || s.w < 0 || s.numel() > (std::size_t{1} << 28)) fail("bad tensor shape");
    Tensor t(s);
    in_.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    check();
    return t;
  }
  [[noreturn]] void fail(const std::string& what) {
    throw CheckpointVersionError(path_.string() + ": " + what);
  }

 private:
  void check() {
    if (!in_) fail("truncated checkpoint");
  }
  std::ifstream& in_;
  const std::filesystem::path& path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config, long step,
                     const nn::ParamStore& params, const AdamState& optimizer) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    Writer w(out);
    out.write(kMagic, sizeof(kMagic));
    w.pod<std::uint32_t>(kCheckpointVersion);
    w.string(to_json(config).dump());
    w.pod<std::int64_t>(step);
    const auto names = params.names();
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(names.size()));
    for (const auto& name : names) {
      w.string(name);
      w.tensor(params.get(name).value());
    }
    w.pod<std::int64_t>(optimizer.step);
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(optimizer.first.size()));
    for (std::size_t k = 0; k < optimizer.first.size(); ++k) {
      w.tensor(optimizer.first[k]);
      w.tensor(optimizer.second[k]);
    }
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  Reader r(in, path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) r.fail("not an hjscc checkpoint");
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    r.fail("format version " + std::to_string(version) + ", expected " +
           std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  try {
    ckpt.config = run_config_from_json(nlohmann::json::parse(r.string()));
  } catch (const std::exception& e) {
    r.fail(std::string("embedded config invalid: ") + e.what());
  }
  ckpt.step = r.pod<std::int64_t>();
  const auto count = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.string();
    ckpt.params.emplace_back(std::move(name), r.tensor());
  }
  ckpt.optimizer.step = r.pod<std::int64_t>();
  const auto moments = r.pod<std::uint32_t>();
  for (std::uint32_t i = 0; i < moments; ++i) {
    ckpt.optimizer.first.push_back(r.tensor());
    ckpt.optimizer.second.push_back(r.tensor());
  }
  return ckpt;
}

void restore_params(const Checkpoint& ckpt, nn::ParamStore& params) {
  if (ckpt.params.size() != params.size()) {
    throw CheckpointVersionError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                                 " arrays, model expects " + std::to_string(params.size()));
  }
  for (const auto& [name, value] : ckpt.params) {
    if (!params.contains(name)) throw CheckpointVersionError("unknown parameter " + name);
    Var& p = params.get(name);
    if (!(p.shape() == value.shape())) {
      throw CheckpointVersionError("shape mismatch for " + name + ": " + value.shape().str() +
                                   " vs " + p.shape().str());
    }
    p.mutable_value() = value;
  }
}

}  // namespace hjscc::harness
