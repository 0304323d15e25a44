#pragma once

#include <array>
#include <stdexcept>
#include <string>

#include "mirrorboard/board.hpp"

namespace mirrorboard {

class NonFiniteInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Vec4 = std::array<double, 4>;

/// 4x4 homogeneous matrix, column-major: element (row r, col c) is m[c * 4 + r].
struct Mat4 {
  std::array<double, 16> m{};

  static Mat4 identity();

  double operator()(int r, int c) const { return m[c * 4 + r]; }
  double& operator()(int r, int c) { return m[c * 4 + r]; }

  bool operator==(const Mat4&) const = default;
};

/// Throw NonFiniteInput for NaN/inf arguments.
Mat4 mat_translation(double dx, double dy, double dz);
Mat4 mat_rotation_x(double angle);
Mat4 mat_rotation_y(double angle);
Mat4 mat_rotation_z(double angle);
Mat4 mat_scale(double s);

/// a∘b: applying the product applies b first.
Mat4 mat_mul(const Mat4& a, const Mat4& b);
Vec4 mat_apply(const Mat4& a, const Vec4& v);
Mat4 mat_transpose(const Mat4& a);
/// max |a_ij - b_ij|
double max_abs_diff(const Mat4& a, const Mat4& b);

board::Mat4f to_float(const Mat4& a);

}  // namespace mirrorboard
