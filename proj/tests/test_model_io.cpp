#include "dpo/model_io.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <random>
#include <sstream>

namespace {

template <typename Model>
dpo::AnyModel round_trip(const Model& m) {
  std::stringstream ss;
  dpo::write_model(ss, m);
  return dpo::read_model(ss);
}

dpo::AnyModel parse(const std::string& text) {
  std::istringstream is(text);
  return dpo::read_model(is);
}

TEST(ModelIo, QuboRoundTripIsBitExact) {
  std::mt19937_64 rng(90);
  for (int k = 0; k < 10; ++k) {
    const auto q = oracle::random_block_tridiagonal({1 + rng() % 4, 1 + rng() % 4, 2}, rng);
    const auto back = std::get<dpo::Qubo>(round_trip(q));
    EXPECT_EQ(back.coeffs(), q.coeffs());
    EXPECT_EQ(back.offset(), q.offset());
    EXPECT_EQ(back.partition(), q.partition());
  }
}

TEST(ModelIo, QuboWithoutPartition) {
  std::mt19937_64 rng(91);
  const dpo::Qubo q(oracle::random_symmetric(5, rng), -3.0);
  const auto back = std::get<dpo::Qubo>(round_trip(q));
  EXPECT_EQ(back.coeffs(), q.coeffs());
  EXPECT_FALSE(back.partition());
}

TEST(ModelIo, IsingRoundTripIsBitExact) {
  std::mt19937_64 rng(92);
  const auto m = oracle::random_ising(6, rng, 1e-3);
  const auto back = std::get<dpo::IsingModel>(round_trip(m));
  EXPECT_EQ(back.linear(), m.linear());
  EXPECT_EQ(back.quadratic(), m.quadratic());
  EXPECT_EQ(back.offset(), m.offset());
}

TEST(ModelIo, QuantizedRoundTrip) {
  std::mt19937_64 rng(93);
  auto q = dpo::quantize_int8(oracle::random_ising(7, rng));
  q.tuning_steps = 0;
  std::stringstream ss;
  dpo::write_model(ss, q, dpo::BlockPartition::uniform(1, 7));
  const auto back = std::get<dpo::QuantizedIsing>(dpo::read_model(ss));
  EXPECT_EQ(back.linear, q.linear);
  EXPECT_EQ(back.quadratic, q.quadratic);
  EXPECT_EQ(back.scale, q.scale);
  EXPECT_EQ(back.degenerate, q.degenerate);
}

TEST(ModelIo, SaveAndLoadFile) {
  const auto path = std::filesystem::temp_directory_path() / "dpo_model_io_test.txt";
  Eigen::MatrixXd Q(2, 2);
  Q << 1.0 / 3.0, -0.1, -0.1, 2.0;
  const dpo::Qubo q(Q, 0.7, dpo::BlockPartition::uniform(2, 1));
  dpo::save_model(path.string(), q);
  const auto back = std::get<dpo::Qubo>(dpo::load_model(path.string()));
  EXPECT_EQ(back.coeffs(), q.coeffs());
  std::filesystem::remove(path);
  EXPECT_THROW(dpo::load_model(path.string()), std::runtime_error);
}

TEST(ModelIo, CommentsAndBlankLinesAreSkipped) {
  const auto m = parse(
      "# header comment\n"
      "dpo-model 1\n\nkind qubo\nn 2\noffset 0.5\ninteger 0\nscale 1\ndegenerate 0\n"
      "blocks 0\n# entries follow\nentries 2\n0 0 -1\n0 1 0.25\nend\n");
  const auto& q = std::get<dpo::Qubo>(m);
  EXPECT_EQ(q.coeffs()(0, 0), -1.0);
  EXPECT_EQ(q.coeffs()(1, 0), 0.25);
  EXPECT_EQ(q.offset(), 0.5);
}

TEST(ModelIo, MalformedInputReportsLine) {
  const std::string head = "dpo-model 1\nkind qubo\nn 2\noffset 0\ninteger 0\nscale 1\ndegenerate 0\n";
  const std::vector<std::string> bad = {
      "dpo-model 2\n",
      "dpo-model 1\nkind tensor\n",
      head + "blocks 1 0 1\nentries 0\nend\n",
      head + "blocks 0\nentries 1\n1 0 2\nend\n",
      head + "blocks 0\nentries 1\n0 5 2\nend\n",
      head + "blocks 0\nentries 1\n0 1 nan\nend\n",
      head + "blocks 0\nentries 2\n0 1 2\nend\n",
      head + "blocks 0\nentries 0\n",
      "dpo-model 1\nkind qubo\nn 2\noffset 0\ninteger 1\nscale 1\ndegenerate 0\nblocks 0\n"
      "entries 0\nend\n",
  };
  for (const auto& text : bad) {
    EXPECT_THROW(parse(text), dpo::ModelFormatError) << text;
  }
  try {
    parse(head + "blocks 0\nentries 1\n0 x 2\nend\n");
    FAIL();
  } catch (const dpo::ModelFormatError& e) {
    EXPECT_EQ(e.line(), 10u);
  }
}

TEST(ModelIo, QuantizedRejectsNonIntegerValues) {
  EXPECT_THROW(parse("dpo-model 1\nkind ising\nn 1\noffset 0\ninteger 1\nscale 2\ndegenerate 0\n"
                     "blocks 0\nentries 1\n0 0 1.5\nend\n"),
               dpo::ModelFormatError);
  EXPECT_THROW(parse("dpo-model 1\nkind ising\nn 1\noffset 0\ninteger 1\nscale 2\ndegenerate 0\n"
                     "blocks 0\nentries 1\n0 0 200\nend\n"),
               dpo::ModelFormatError);
}

}  // namespace
