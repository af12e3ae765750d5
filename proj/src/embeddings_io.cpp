#include "gapcoref/embeddings_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "gapcoref/error.hpp"

namespace gapcoref {
namespace {

constexpr std::string_view kMagic = "CSEM1";

static_assert(std::endian::native == std::endian::little, "embedding files assume a little-endian host");

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint32_t u32(const char* what) {
    std::uint32_t v;
    take(&v, sizeof v, what);
    return v;
  }

  void take(void* dst, std::size_t n, const char* what) {
    if (bytes_.size() - pos_ < n) {
      throw Error(ErrorCode::CorruptHeader, std::string("file ends inside ") + what);
    }
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_u32(std::string& out, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  out.append(buf, 4);
}

}  // namespace

void EmbeddingStore::insert(const std::string& key, FloatMatrix states) {
  if (states.cols() != hidden_dim_) {
    throw Error(ErrorCode::DimensionMismatch, "example " + key + " has width " + std::to_string(states.cols()) +
                                                  ", store expects " + std::to_string(hidden_dim_));
  }
  states_[key] = std::move(states);
}

const FloatMatrix& EmbeddingStore::get(const std::string& key) const {
  const auto it = states_.find(key);
  if (it == states_.end()) throw Error(ErrorCode::MissingExample, "no embeddings for '" + key + "'");
  return it->second;
}

Matrix EmbeddingStore::states(const std::string& key, std::int64_t expected_rows) const {
  const FloatMatrix& m = get(key);
  if (expected_rows >= 0 && m.rows() != expected_rows) {
    throw Error(ErrorCode::DimensionMismatch, "example " + key + " has " + std::to_string(m.rows()) +
                                                  " token rows, input has " + std::to_string(expected_rows));
  }
  return m.cast<double>();
}

EmbeddingStore load_external_embeddings(std::string_view bytes) {
  if (bytes.size() < kMagic.size() || bytes.substr(0, kMagic.size()) != kMagic) {
    throw Error(ErrorCode::CorruptHeader, "bad magic");
  }
  Reader r(bytes.substr(kMagic.size()));
  const std::uint32_t hidden = r.u32("header");
  const std::uint32_t count = r.u32("header");
  if (hidden == 0) throw Error(ErrorCode::CorruptHeader, "hidden dimension is zero");

  EmbeddingStore store(static_cast<int>(hidden));
  for (std::uint32_t e = 0; e < count; ++e) {
    const std::uint32_t id_len = r.u32("example id length");
    std::string id(id_len, '\0');
    r.take(id.data(), id_len, "example id");
    const std::uint32_t tokens = r.u32("token count");
    const std::uint64_t floats = std::uint64_t{tokens} * hidden;
    if (floats * sizeof(float) > r.remaining()) {
      throw Error(ErrorCode::DimensionMismatch, "example " + id + " declares more values than the file holds");
    }
    FloatMatrix m(tokens, hidden);
    r.take(m.data(), floats * sizeof(float), "embedding values");
    store.insert(id, std::move(m));
  }
  if (r.remaining() != 0) throw Error(ErrorCode::DimensionMismatch, "trailing bytes after last example");
  return store;
}

EmbeddingStore load_external_embeddings_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return load_external_embeddings(buffer.str());
}

std::string serialize_embeddings(const EmbeddingStore& store) {
  std::string out(kMagic);
  put_u32(out, static_cast<std::uint32_t>(store.hidden_dim()));
  put_u32(out, static_cast<std::uint32_t>(store.size()));
  for (const auto& [id, m] : store.entries()) {
    put_u32(out, static_cast<std::uint32_t>(id.size()));
    out += id;
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(float));
  }
  return out;
}

void write_embeddings_file(const EmbeddingStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  const std::string bytes = serialize_embeddings(store);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace gapcoref
