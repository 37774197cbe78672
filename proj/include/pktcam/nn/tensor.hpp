#pragma once

#include <Eigen/Core>

namespace pktcam::nn {

/// (channels, length) feature maps and (rows, cols) weight matrices; row-major so each channel is contiguous.
template <class T>
using Tensor = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <class T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

} // namespace pktcam::nn
