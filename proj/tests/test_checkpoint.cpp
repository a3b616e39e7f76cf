#include <doctest.h>

#include <cstring>
#include <filesystem>

#include "fsad/baselines.hpp"
#include "fsad/checkpoint.hpp"
#include "fsad/error.hpp"

using namespace fsad;

namespace {

Checkpoint sample_checkpoint(bool head) {
  Checkpoint c;
  c.method = head ? Method::kMaml : Method::kPrototypical;
  c.features.n_buckets = 1024;
  c.features.ngram_orders = {1, 2, 4};
  c.features.max_tokens = 64;
  c.params = init_params(EncoderShape{1024, 6, 3, head}, 99);
  c.config_snapshot = R"({"method":"maml","seed":"3"})";
  c.seed = 0xfeedfacecafebeefULL;
  return c;
}

ErrorCode load_error(const std::string& bytes) {
  try {
    deserialize_checkpoint(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected a format error");
  return ErrorCode::kInternal;
}

}  // namespace

TEST_CASE("checkpoint round trip is bitwise") {
  for (bool head : {false, true}) {
    const Checkpoint c = sample_checkpoint(head);
    const std::string bytes = serialize_checkpoint(c);
    CHECK(bytes.compare(0, 8, "FSADCKPT") == 0);
    const Checkpoint back = deserialize_checkpoint(bytes);
    CHECK(back == c);
    CHECK(serialize_checkpoint(back) == bytes);
  }
}

TEST_CASE("checkpoint file save and load") {
  const auto path = std::filesystem::temp_directory_path() / "fsad_test_ckpt.ckpt";
  const Checkpoint c = sample_checkpoint(true);
  save_checkpoint(c, path);
  CHECK(load_checkpoint(path) == c);
  CHECK_THROWS_AS(load_checkpoint(path.string() + ".missing"), Error);
}

TEST_CASE("one-class checkpoint round trip") {
  const std::vector<std::string> normals{"alpha beta", "gamma delta", "alpha beta", "zeta"};
  FeatureConfig f;
  f.n_buckets = 1024;
  const OneClassModel m = fit_oneclass(normals, f, 2, 1);
  Checkpoint c = to_checkpoint(m);
  c.domain = "news";
  const Checkpoint back = deserialize_checkpoint(serialize_checkpoint(c));
  CHECK(back == c);
  const OneClassModel m2 = oneclass_from_checkpoint(back);
  CHECK(m2.references == m.references);
  CHECK(m2.k_nn == 2);
}

TEST_CASE("corrupted magic is a format error") {
  std::string bytes = serialize_checkpoint(sample_checkpoint(false));
  bytes[0] = 'X';
  CHECK(load_error(bytes) == ErrorCode::kFormat);
}

TEST_CASE("unknown version is a format error") {
  std::string bytes = serialize_checkpoint(sample_checkpoint(false));
  const std::uint32_t next = Checkpoint::kFormatVersion + 1;
  std::memcpy(bytes.data() + 8, &next, sizeof next);
  try {
    deserialize_checkpoint(bytes);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }
}

TEST_CASE("truncated and padded files are format errors") {
  const std::string bytes = serialize_checkpoint(sample_checkpoint(true));
  CHECK(load_error(bytes.substr(0, bytes.size() - 3)) == ErrorCode::kFormat);
  CHECK(load_error(bytes.substr(0, 10)) == ErrorCode::kFormat);
  CHECK(load_error(bytes + "x") == ErrorCode::kFormat);
  CHECK(load_error("") == ErrorCode::kFormat);
}

TEST_CASE("garbled header is a format error") {
  std::string bytes = serialize_checkpoint(sample_checkpoint(false));
  bytes[20] = '\x01';
  CHECK(load_error(bytes) == ErrorCode::kFormat);
}
