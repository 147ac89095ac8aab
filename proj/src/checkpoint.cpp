#include "mgvton/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <vector>

namespace mgvton {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'M', 'G', 'V', 'T', 'C', 'K', 'P', 'T'};

std::uint8_t dtype_code(torch::ScalarType t) {
  switch (t) {
    case torch::kFloat32: return 0;
    case torch::kFloat64: return 1;
    case torch::kInt64: return 2;
    case torch::kUInt8: return 3;
    default: throw std::invalid_argument("checkpoint: unsupported tensor dtype");
  }
}

torch::ScalarType dtype_from_code(std::uint8_t c) {
  switch (c) {
    case 0: return torch::kFloat32;
    case 1: return torch::kFloat64;
    case 2: return torch::kInt64;
    case 3: return torch::kUInt8;
    default: throw std::invalid_argument("unknown dtype code " + std::to_string(c));
  }
}

class Writer {
 public:
  template <class T>
  void pod(T v) {
    raw(&v, sizeof v);
  }
  void str(const std::string& s) {
    pod(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const char*>(p);
    buf_.insert(buf_.end(), c, c + n);
  }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class Reader {
 public:
  Reader(const std::vector<char>& buf, std::size_t end) : buf_(buf), end_(end) {}
  template <class T>
  T pod() {
    T v;
    raw(&v, sizeof v);
    return v;
  }
  std::string str() {
    const auto n = pod<std::uint32_t>();
    need(n);
    std::string s(buf_.data() + pos_, n);
    pos_ += n;
    return s;
  }
  void raw(void* p, std::size_t n) {
    need(n);
    std::memcpy(p, buf_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::size_t n) const {
    if (n > end_ - pos_) throw std::invalid_argument("truncated data");
  }
  const std::vector<char>& buf_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::map<std::string, torch::Tensor> module_tensors(const torch::nn::Module& module) {
  std::map<std::string, torch::Tensor> out;
  for (const auto& p : module.named_parameters(true)) out[p.key()] = p.value();
  for (const auto& b : module.named_buffers(true)) out[b.key()] = b.value();
  return out;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t hash) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= p[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string file_digest(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << fnv1a64(bytes.data(), bytes.size());
  return s.str();
}

void Checkpoint::add_module(const std::string& prefix, const torch::nn::Module& module) {
  for (const auto& [name, t] : module_tensors(module)) blocks[prefix + "/" + name] = t.detach().cpu().contiguous().clone();
}

void Checkpoint::load_module(const std::string& prefix, torch::nn::Module& module) const {
  torch::NoGradGuard guard;
  for (auto& [name, t] : module_tensors(module)) {
    const auto key = prefix + "/" + name;
    const auto it = blocks.find(key);
    if (it == blocks.end()) throw CheckpointError("checkpoint block '" + key + "' is missing");
    if (it->second.sizes() != t.sizes() || it->second.scalar_type() != t.scalar_type()) {
      throw CheckpointError("checkpoint block '" + key + "' has a mismatched shape or dtype");
    }
    t.copy_(it->second);
  }
}

void Checkpoint::add_optimizer(const std::string& prefix, torch::optim::Adam& optimizer) {
  const auto& state = optimizer.state();
  std::size_t index = 0;
  for (const auto& group : optimizer.param_groups()) {
    for (const auto& p : group.params()) {
      const auto it = state.find(p.unsafeGetTensorImpl());
      const auto key = prefix + "/" + std::to_string(index++);
      if (it == state.end()) continue;
      const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
      blocks[key + "/step"] = torch::tensor({s.step()}, torch::kInt64);
      blocks[key + "/exp_avg"] = s.exp_avg().detach().contiguous().clone();
      blocks[key + "/exp_avg_sq"] = s.exp_avg_sq().detach().contiguous().clone();
    }
  }
}

void Checkpoint::load_optimizer(const std::string& prefix, torch::optim::Adam& optimizer) const {
  auto& state = optimizer.state();
  std::size_t index = 0;
  for (auto& group : optimizer.param_groups()) {
    for (auto& p : group.params()) {
      const auto key = prefix + "/" + std::to_string(index++);
      const auto step = blocks.find(key + "/step");
      if (step == blocks.end()) {
        state.erase(p.unsafeGetTensorImpl());
        continue;
      }
      auto s = std::make_unique<torch::optim::AdamParamState>();
      s->step(step->second.item<int64_t>());
      s->exp_avg(blocks.at(key + "/exp_avg").clone());
      s->exp_avg_sq(blocks.at(key + "/exp_avg_sq").clone());
      if (s->exp_avg().sizes() != p.sizes()) throw CheckpointError("optimizer state '" + key + "' has a mismatched shape");
      state[p.unsafeGetTensorImpl()] = std::move(s);
    }
  }
}

const std::string& Checkpoint::meta(const std::string& key) const {
  const auto it = metadata.find(key);
  if (it == metadata.end()) throw CheckpointError("checkpoint metadata '" + key + "' is missing");
  return it->second;
}

void Checkpoint::save(const std::filesystem::path& path) const {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.pod<std::uint32_t>(kVersion);
  w.pod<std::uint32_t>(0);
  w.str(stage);
  w.pod<std::uint64_t>(step);
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(metadata.size()));
  for (const auto& [k, v] : metadata) {
    w.str(k);
    w.str(v);
  }
  w.pod<std::uint32_t>(static_cast<std::uint32_t>(blocks.size()));
  for (const auto& [name, tensor] : blocks) {
    const auto t = tensor.detach().cpu().contiguous();
    w.str(name);
    w.pod<std::uint8_t>(dtype_code(t.scalar_type()));
    w.pod<std::uint32_t>(static_cast<std::uint32_t>(t.dim()));
    for (auto d : t.sizes()) w.pod<std::int64_t>(d);
    const std::uint64_t nbytes = t.numel() * t.element_size();
    w.pod<std::uint64_t>(nbytes);
    w.raw(t.data_ptr(), nbytes);
  }
  w.pod<std::uint64_t>(fnv1a64(w.bytes().data(), w.bytes().size()));

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("checkpoint not found: " + path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    if (bytes.size() < sizeof kMagic + 16 || std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
      throw std::invalid_argument("bad magic");
    }
    const std::size_t body = bytes.size() - 8;
    std::uint64_t stored = 0;
    std::memcpy(&stored, bytes.data() + body, 8);
    if (stored != fnv1a64(bytes.data(), body)) throw std::invalid_argument("checksum mismatch");

    Reader r(bytes, body);
    char magic[8];
    r.raw(magic, 8);
    const auto version = r.pod<std::uint32_t>();
    if (version != kVersion) throw std::invalid_argument("unsupported version " + std::to_string(version));
    r.pod<std::uint32_t>();
    Checkpoint c;
    c.stage = r.str();
    c.step = r.pod<std::uint64_t>();
    const auto n_meta = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_meta; ++i) {
      auto k = r.str();
      c.metadata[k] = r.str();
    }
    const auto n_blocks = r.pod<std::uint32_t>();
    for (std::uint32_t i = 0; i < n_blocks; ++i) {
      auto name = r.str();
      const auto dtype = dtype_from_code(r.pod<std::uint8_t>());
      const auto ndim = r.pod<std::uint32_t>();
      if (ndim > 8) throw std::invalid_argument("implausible rank in block " + name);
      std::vector<int64_t> dims(ndim);
      for (auto& d : dims) {
        d = r.pod<std::int64_t>();
        if (d < 0) throw std::invalid_argument("negative dimension in block " + name);
      }
      auto t = torch::empty(dims, torch::TensorOptions().dtype(dtype));
      const auto nbytes = r.pod<std::uint64_t>();
      if (nbytes != static_cast<std::uint64_t>(t.numel() * t.element_size())) {
        throw std::invalid_argument("size mismatch in block " + name);
      }
      r.raw(t.data_ptr(), nbytes);
      c.blocks[name] = t;
    }
    if (!r.done()) throw std::invalid_argument("trailing bytes");
    return c;
  } catch (const std::invalid_argument& e) {
    throw CheckpointError("corrupted checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace mgvton
