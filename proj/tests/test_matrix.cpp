#include <gtest/gtest.h>

#include "home/matrix.hpp"
#include "test_util.hpp"

using namespace home;

namespace {

Matrix naive_product(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<long double>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(s);
    }
  return out;
}

void expect_close(const Matrix& a, const Matrix& b, double tol) {
  ASSERT_EQ(a.rows(), b.rows());
  ASSERT_EQ(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.flat()[i], b.flat()[i], tol);
}

}  // namespace

TEST(Matrix, ShapeAndAccess) {
  Matrix m(2, 3, 1.5);
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  m(1, 2) = 4;
  EXPECT_EQ(m.row(1)[2], 4);
  EXPECT_EQ(m.column(2), (std::vector<double>{1.5, 4}));
  EXPECT_EQ(m.transposed()(2, 1), 4);
}

TEST(Matrix, RejectsBadData) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ShapeError);
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), ShapeError);
  Matrix a(2, 2), b(2, 3);
  EXPECT_THROW(a += b, ShapeError);
}

TEST(Matrix, ProductsMatchNaive) {
  const Matrix a = oracle::random_matrix(7, 5, 1);
  const Matrix b = oracle::random_matrix(5, 4, 2);
  const Matrix c = oracle::random_matrix(6, 5, 3);
  const Matrix d = oracle::random_matrix(7, 3, 4);
  expect_close(matmul(a, b), naive_product(a, b), 1e-13);
  expect_close(matmul_nt(a, c), naive_product(a, c.transposed()), 1e-13);
  expect_close(matmul_tn(a, d), naive_product(a.transposed(), d), 1e-13);
  EXPECT_THROW(matmul(a, c), ShapeError);
  EXPECT_THROW(matmul_nt(a, b), ShapeError);
  EXPECT_THROW(matmul_tn(a, b), ShapeError);
}

TEST(Matrix, AllFinite) {
  Matrix m(2, 2);
  EXPECT_TRUE(m.all_finite());
  m(0, 1) = std::nan("");
  EXPECT_FALSE(m.all_finite());
}
