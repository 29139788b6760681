#pragma once

#include <cstddef>

#include <Eigen/Core>

namespace posecam {

/// Per-frame visual tokens: row (i * tokens_per_frame + k) holds token k of frame i.
struct FrameFeatures {
  std::size_t n_frames = 0;
  std::size_t tokens_per_frame = 0;
  Eigen::MatrixXd data;

  std::size_t dim() const { return static_cast<std::size_t>(data.cols()); }
  auto token(std::size_t frame, std::size_t k) { return data.row(row_of(frame, k)); }
  auto token(std::size_t frame, std::size_t k) const { return data.row(row_of(frame, k)); }
  auto frame_block(std::size_t frame) const {
    return data.middleRows(row_of(frame, 0), static_cast<Eigen::Index>(tokens_per_frame));
  }
  Eigen::Index row_of(std::size_t frame, std::size_t k) const {
    return static_cast<Eigen::Index>(frame * tokens_per_frame + k);
  }
  /// Frames at `indices`, in that order.
  template <typename Range>
  FrameFeatures select(const Range& indices) const {
    FrameFeatures out{static_cast<std::size_t>(std::size(indices)), tokens_per_frame,
                      Eigen::MatrixXd(static_cast<Eigen::Index>(std::size(indices) * tokens_per_frame),
                                      data.cols())};
    std::size_t f = 0;
    for (auto i : indices) {
      out.data.middleRows(out.row_of(f++, 0), static_cast<Eigen::Index>(tokens_per_frame)) =
          frame_block(static_cast<std::size_t>(i));
    }
    return out;
  }
};

}  // namespace posecam
