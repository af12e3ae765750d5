#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "gapcoref/embeddings_io.hpp"
#include "gapcoref/error.hpp"
#include "gapcoref/rng.hpp"

using namespace gapcoref;

namespace {

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

void put_f32(std::string& out, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  put_u32(out, bits);
}

ErrorCode load_code(const std::string& bytes) {
  try {
    load_external_embeddings(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("bytes accepted");
  return ErrorCode::Io;
}

}  // namespace

TEST_CASE("hand-assembled 3x4 example loads") {
  std::string bytes = "CSEM1";
  put_u32(bytes, 4);
  put_u32(bytes, 1);
  put_u32(bytes, 5);
  bytes += "rec-1";
  put_u32(bytes, 3);
  for (int i = 0; i < 12; ++i) put_f32(bytes, 0.5f * static_cast<float>(i) - 1.0f);

  const EmbeddingStore store = load_external_embeddings(bytes);
  CHECK(store.hidden_dim() == 4);
  CHECK(store.size() == 1);
  const FloatMatrix& m = store.get("rec-1");
  REQUIRE(m.rows() == 3);
  REQUIRE(m.cols() == 4);
  CHECK(m(0, 0) == -1.0f);
  CHECK(m(1, 2) == 2.0f);
  CHECK(m(2, 3) == 4.5f);
  CHECK(store.states("rec-1", 3)(2, 3) == 4.5);
  CHECK(serialize_embeddings(store) == bytes);
}

TEST_CASE("property: random stores round-trip bitwise") {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const int h = 1 + static_cast<int>(rng.below(16));
    EmbeddingStore store(h);
    const int count = static_cast<int>(rng.below(6));
    for (int e = 0; e < count; ++e) {
      FloatMatrix m(static_cast<Eigen::Index>(rng.below(9)), h);
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(rng.uniform(-1e3, 1e3));
      store.insert("id-" + std::to_string(trial) + "-" + std::to_string(e) + "#ü", m);
    }
    const std::string bytes = serialize_embeddings(store);
    const EmbeddingStore back = load_external_embeddings(bytes);
    REQUIRE(back.size() == store.size());
    for (const auto& [key, m] : store.entries()) {
      const FloatMatrix& n = back.get(key);
      REQUIRE(n.rows() == m.rows());
      CHECK(std::memcmp(n.data(), m.data(), sizeof(float) * static_cast<std::size_t>(m.size())) == 0);
    }
    CHECK(serialize_embeddings(back) == bytes);
  }
}

TEST_CASE("file round trip") {
  EmbeddingStore store(2);
  FloatMatrix m(1, 2);
  m << 1.25f, -3.5f;
  store.insert("a", m);
  const auto path = std::filesystem::temp_directory_path() / "gapcoref_embeddings_test.bin";
  write_embeddings_file(store, path);
  CHECK(load_external_embeddings_file(path).get("a") == m);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_external_embeddings_file(path), Error);
}

TEST_CASE("lookup and shape errors") {
  EmbeddingStore store(3);
  store.insert("a", FloatMatrix::Zero(2, 3));
  try {
    store.get("b");
    FAIL("missing key accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingExample);
  }
  try {
    store.insert("c", FloatMatrix::Zero(2, 4));
    FAIL("wrong width accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
  try {
    store.states("a", 5);
    FAIL("wrong row count accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("corrupt files") {
  CHECK(load_code("") == ErrorCode::CorruptHeader);
  CHECK(load_code("CSEM2xxxxxxxx") == ErrorCode::CorruptHeader);

  std::string zero_width = "CSEM1";
  put_u32(zero_width, 0);
  put_u32(zero_width, 0);
  CHECK(load_code(zero_width) == ErrorCode::CorruptHeader);

  std::string short_header = "CSEM1";
  put_u32(short_header, 4);
  CHECK(load_code(short_header) == ErrorCode::CorruptHeader);

  std::string overlong = "CSEM1";
  put_u32(overlong, 2);
  put_u32(overlong, 1);
  put_u32(overlong, 1);
  overlong += "x";
  put_u32(overlong, 3);
  put_f32(overlong, 1.0f);
  CHECK(load_code(overlong) == ErrorCode::DimensionMismatch);

  EmbeddingStore store(1);
  store.insert("x", FloatMatrix::Ones(1, 1));
  CHECK(load_code(serialize_embeddings(store) + "z") == ErrorCode::DimensionMismatch);
}
