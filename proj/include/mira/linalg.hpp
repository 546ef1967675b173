#pragma once

#include <Eigen/Dense>

namespace mira {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

} // namespace mira
