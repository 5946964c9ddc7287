#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <limits>
#include <random>

#include <unistd.h>

#include "test_util.hpp"

using namespace gloss;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  auto dir = fs::temp_directory_path() / ("gloss_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

}  // namespace

TEST(TensorIo, HeaderLayout) {
  const DenseTensor t({2, 3}, {1, 2, 3, 4, 5, 6});
  const std::string bytes = encode_tensor(t);
  ASSERT_EQ(bytes.size(), 8u + 8u + 8u + 2u * 8u + 6u * 8u);
  EXPECT_EQ(bytes.substr(0, 8), "GLSTENSR");
  // Little-endian u64 fields: version 1, order 2, extents 2 and 3.
  EXPECT_EQ(static_cast<unsigned char>(bytes[8]), 1);
  EXPECT_EQ(static_cast<unsigned char>(bytes[16]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[24]), 2);
  EXPECT_EQ(static_cast<unsigned char>(bytes[32]), 3);
  double first = 0.0;
  std::memcpy(&first, bytes.data() + 40, 8);
  EXPECT_EQ(first, 1.0);
}

TEST(TensorIo, RoundTripIsBitwise) {
  std::mt19937_64 rng(1);
  DenseTensor t = gloss::testing::random_tensor({3, 4, 2, 5}, rng, -1e6, 1e6);
  t[0] = -0.0;
  t[1] = std::numeric_limits<double>::denorm_min();
  const DenseTensor back = decode_tensor(encode_tensor(t));
  ASSERT_EQ(back.shape(), t.shape());
  EXPECT_EQ(std::memcmp(back.data(), t.data(), sizeof(double) * static_cast<std::size_t>(t.size())), 0);
}

TEST(TensorIo, FileRoundTripWithSidecar) {
  const auto dir = scratch_dir("file");
  std::mt19937_64 rng(2);
  const DenseTensor t = gloss::testing::random_tensor({2, 3, 4, 2}, rng);
  TensorMetadata meta;
  meta.units = "trips";
  meta.provenance = {{"seed", 7}};
  save_tensor(dir / "y.bin", t, meta);
  EXPECT_EQ(load_tensor(dir / "y.bin"), t);
  const TensorMetadata m = load_metadata(dir / "y.bin");
  EXPECT_EQ(m.units, "trips");
  EXPECT_EQ(m.mode_names, default_mode_names(4));
  EXPECT_EQ(m.provenance["seed"], 7);
  EXPECT_FALSE(fs::exists(dir / "y.bin.tmp"));

  const SupportSet s = gloss::testing::random_support(t.shape(), 0.4, rng);
  save_mask(dir / "omega.bin", s.mask());
  EXPECT_EQ(load_mask(dir / "omega.bin"), s.mask());
  fs::remove_all(dir);
}

TEST(TensorIo, RejectsCorruptInput) {
  const DenseTensor t({2, 2}, {1, 2, 3, 4});
  std::string bytes = encode_tensor(t);
  EXPECT_THROW(decode_tensor(bytes.substr(0, 10)), Error);
  EXPECT_THROW(decode_tensor(bytes.substr(0, bytes.size() - 1)), Error);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_tensor(bad_magic), Error);
  std::string bad_version = bytes;
  bad_version[8] = 2;
  EXPECT_THROW(decode_tensor(bad_version), Error);
  // A tensor container is not a mask and vice versa.
  EXPECT_THROW(decode_mask(bytes), Error);
  EXPECT_THROW(decode_tensor(encode_mask(BoolTensor({2, 2}, 1))), Error);
  try {
    decode_tensor(bad_magic);
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::io);
  }
  EXPECT_THROW(load_tensor("/nonexistent/path/y.bin"), Error);
}
