#ifndef MWI_TYPES_HPP_
#define MWI_TYPES_HPP_

#include <cstdint>

#include <Eigen/Core>

namespace mwi {

// Rows are examples, columns are classes or embedding coordinates.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using BinaryMatrix =
    Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

}  // namespace mwi

#endif  // MWI_TYPES_HPP_
