#include "invaria/io.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>

using namespace invaria;

namespace {

std::filesystem::path temp_path(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("invaria_io_" + name);
}

}  // namespace

TEST(Pts, BinaryRoundTripIsBitExact) {
  const PointCloud pc = round_to_storage_precision(invaria::testing::random_cloud(300, 1, 4));
  const auto path = temp_path("rt.pts");
  save_pts(path, pc, PtsFormat::kBinary);
  const PointCloud back = load_pts(path);
  ASSERT_EQ(back.size(), pc.size());
  EXPECT_EQ(std::memcmp(back.coords.data(), pc.coords.data(), sizeof(double) * pc.coords.size()), 0);
  EXPECT_EQ(std::memcmp(back.feats.data(), pc.feats.data(), sizeof(double) * pc.feats.size()), 0);
  EXPECT_EQ(back.labels, pc.labels);
  EXPECT_EQ(serialize_pts(back), serialize_pts(pc));
  std::filesystem::remove(path);
}

TEST(Pts, TextRoundTripRecoversFloats) {
  const PointCloud pc = round_to_storage_precision(invaria::testing::random_cloud(100, 2, 2));
  const PointCloud back = parse_pts(serialize_pts(pc, PtsFormat::kText));
  EXPECT_EQ(back.coords, pc.coords);
  EXPECT_EQ(back.feats, pc.feats);
  EXPECT_EQ(back.labels, pc.labels);
}

TEST(Pts, HandWrittenTextFixture) {
  const PointCloud pc = parse_pts("PTS1 3 1 1\n0 0 0 0.5 2\n1.25 -2 3 1 0\n0.1 0.2 0.3 -4 1\n");
  ASSERT_EQ(pc.size(), 3);
  EXPECT_EQ(pc.coords(1, 0), 1.25);
  EXPECT_EQ(pc.coords(1, 1), -2.0);
  EXPECT_EQ(pc.coords(2, 0), static_cast<double>(0.1f));
  EXPECT_EQ(pc.feats(2, 0), -4.0);
  EXPECT_EQ(pc.labels, (std::vector<int>{2, 0, 1}));
}

TEST(Pts, UnlabeledText) {
  const PointCloud pc = parse_pts("PTS1 1 0 0\n1 2 3\n");
  EXPECT_FALSE(pc.has_labels());
  EXPECT_EQ(pc.feature_dim(), 0);
}

TEST(Pts, RejectsZeroPoints) { EXPECT_THROW(parse_pts("PTS1 0 1 1\n"), ParseError); }

TEST(Pts, TruncatedBinaryReportsOffset) {
  const PointCloud pc = round_to_storage_precision(invaria::testing::random_cloud(5, 3, 1));
  std::string bytes = serialize_pts(pc);
  bytes.resize(bytes.size() - 3);
  try {
    parse_pts(bytes);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_GT(e.offset(), 0u);
    EXPECT_LE(e.offset(), bytes.size());
  }
}

TEST(Pts, MalformedHeader) {
  EXPECT_THROW(parse_pts("PTS2 1 0 0\n1 2 3\n"), ParseError);
  EXPECT_THROW(parse_pts("PTS1 1 0 7\n1 2 3\n"), ParseError);
  EXPECT_THROW(parse_pts("PTS1 2 0 0\n1 2 3\n"), ParseError);
}

TEST(Pts, MissingFileNamesPath) {
  try {
    load_pts("/nonexistent/invaria.pts");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/invaria.pts"), std::string::npos);
  }
}

TEST(AtomicWrite, CreatesParentDirectories) {
  const auto dir = temp_path("nested_dir");
  std::filesystem::remove_all(dir);
  write_file_atomic(dir / "a" / "b.txt", "hello");
  EXPECT_EQ(read_file(dir / "a" / "b.txt"), "hello");
  std::filesystem::remove_all(dir);
}
