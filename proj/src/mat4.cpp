#include "mirrorboard/mat4.hpp"

#include <cmath>

namespace mirrorboard {

namespace {

void require_finite(std::initializer_list<double> xs, const char* what) {
  for (double x : xs)
    if (!std::isfinite(x)) throw NonFiniteInput(std::string(what) + ": non-finite argument");
}

}  // namespace

Mat4 Mat4::identity() {
  Mat4 r;
  for (int i = 0; i < 4; ++i) r(i, i) = 1.0;
  return r;
}

Mat4 mat_translation(double dx, double dy, double dz) {
  require_finite({dx, dy, dz}, "mat_translation");
  Mat4 r = Mat4::identity();
  r(0, 3) = dx;
  r(1, 3) = dy;
  r(2, 3) = dz;
  return r;
}

// Rotation in the (i, j) coordinate plane, counter-clockwise from i toward j.
static Mat4 plane_rotation(int i, int j, double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Mat4 r = Mat4::identity();
  r(i, i) = c;
  r(i, j) = -s;
  r(j, i) = s;
  r(j, j) = c;
  return r;
}

Mat4 mat_rotation_x(double angle) {
  require_finite({angle}, "mat_rotation_x");
  return plane_rotation(1, 2, angle);
}

Mat4 mat_rotation_y(double angle) {
  require_finite({angle}, "mat_rotation_y");
  return plane_rotation(2, 0, angle);
}

Mat4 mat_rotation_z(double angle) {
  require_finite({angle}, "mat_rotation_z");
  return plane_rotation(0, 1, angle);
}

Mat4 mat_scale(double s) {
  require_finite({s}, "mat_scale");
  Mat4 r = Mat4::identity();
  for (int i = 0; i < 3; ++i) r(i, i) = s;
  return r;
}

Mat4 mat_mul(const Mat4& a, const Mat4& b) {
  Mat4 r;
  for (int row = 0; row < 4; ++row)
    for (int col = 0; col < 4; ++col) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += a(row, k) * b(k, col);
      r(row, col) = acc;
    }
  return r;
}

Vec4 mat_apply(const Mat4& a, const Vec4& v) {
  Vec4 r{};
  for (int row = 0; row < 4; ++row)
    for (int k = 0; k < 4; ++k) r[row] += a(row, k) * v[k];
  return r;
}

Mat4 mat_transpose(const Mat4& a) {
  Mat4 r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = a(j, i);
  return r;
}

double max_abs_diff(const Mat4& a, const Mat4& b) {
  double worst = 0.0;
  for (int i = 0; i < 16; ++i) worst = std::max(worst, std::abs(a.m[i] - b.m[i]));
  return worst;
}

board::Mat4f to_float(const Mat4& a) {
  board::Mat4f r{};
  for (int i = 0; i < 16; ++i) r[i] = static_cast<float>(a.m[i]);
  return r;
}

}  // namespace mirrorboard
