#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace spixseg {

// Row-major double matrix used for scenes and patterns (pixel (y,x) at (row,col)).
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using VectorF = Eigen::VectorXf;
using LabelMap = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Bad configuration or argument outside its documented domain (CLI exit 2).
class ConfigError : public Error {
public:
  using Error::Error;
};

// Dataset / file ingestion problems (CLI exit 3).
class DataError : public Error {
public:
  using Error::Error;
};

// Dimension mismatches between operands.
class ShapeError : public Error {
public:
  using Error::Error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

inline void require_shape(bool cond, const std::string& msg) {
  if (!cond) throw ShapeError(msg);
}

}  // namespace spixseg
