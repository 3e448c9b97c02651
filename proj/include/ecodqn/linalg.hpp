#ifndef ECODQN_LINALG_HPP
#define ECODQN_LINALG_HPP

#include <Eigen/Core>

namespace ecodqn {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;
using Vector = Eigen::VectorXd;

} // namespace ecodqn

#endif // ECODQN_LINALG_HPP
