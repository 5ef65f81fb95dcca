#include <gtest/gtest.h>

#include "gpool/error.hpp"
#include "gpool/tensor.hpp"

using gpool::Tensor;

TEST(Tensor, ShapeMatchesDataLength) {
  Tensor t({2, 3}, 1.5);
  EXPECT_EQ(t.size(), 6u);
  EXPECT_EQ(t.rows(), 2u);
  EXPECT_EQ(t.cols(), 3u);
  EXPECT_THROW(Tensor({2, 2}, std::vector<double>{1, 2, 3}), gpool::DimensionError);
  EXPECT_THROW(Tensor({0, 2}), gpool::DimensionError);
}

TEST(Tensor, ScalarHasEmptyShape) {
  Tensor s = Tensor::scalar(4.0);
  EXPECT_EQ(s.rank(), 0u);
  EXPECT_DOUBLE_EQ(s.item(), 4.0);
  EXPECT_THROW(Tensor::vector({1, 2}).item(), gpool::DimensionError);
}

TEST(Tensor, MatmulIdentity) {
  auto eye = Tensor::matrix({{1, 0}, {0, 1}});
  auto m = Tensor::matrix({{1, 2}, {3, 4}});
  EXPECT_EQ(gpool::matmul(eye, m), m);
}

TEST(Tensor, MatmulHandComputed) {
  EXPECT_EQ(gpool::matmul(Tensor::matrix({{1, 0}, {0, 0}}), Tensor::matrix({{5, 6}, {7, 8}})),
            Tensor::matrix({{5, 6}, {0, 0}}));
  EXPECT_EQ(gpool::matmul(Tensor::matrix({{1, 2}}), Tensor::matrix({{3}, {4}})),
            Tensor::matrix({{11}}));
}

TEST(Tensor, MatmulMismatchNamesBothShapes) {
  try {
    gpool::matmul(Tensor({2, 3}), Tensor({2, 3}));
    FAIL() << "expected DimensionError";
  } catch (const gpool::DimensionError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("[2x3]"), std::string::npos);
    EXPECT_NE(msg.find("and [2x3]"), std::string::npos);
  }
}

TEST(Tensor, InPlaceArithmeticChecksShape) {
  Tensor a = Tensor::vector({1, 2});
  a += Tensor::vector({3, 4});
  a *= 0.5;
  EXPECT_EQ(a, Tensor::vector({2, 3}));
  EXPECT_THROW(a += Tensor::vector({1, 2, 3}), gpool::DimensionError);
}

TEST(Tensor, TransposeAndNorms) {
  auto m = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  auto t = gpool::transpose(m);
  EXPECT_EQ(t.rows(), 3u);
  EXPECT_DOUBLE_EQ(t.at(2, 1), 6.0);
  EXPECT_DOUBLE_EQ(gpool::squared_norm(m), 91.0);
  EXPECT_DOUBLE_EQ(gpool::max_abs_diff(m, m), 0.0);
}
