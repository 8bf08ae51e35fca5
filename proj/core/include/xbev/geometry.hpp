// SPDX-License-Identifier: Apache-2.0
//
// BEV grid construction, pillar lifting and camera projection. Produces the
// normalized reference points R and the hit mask b consumed by the merge.
//
// Grid enumeration is row-major with x along columns: cell (i, j) has index
// i * W_bev + j, x increases with j and y increases with i.

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xbev {

using Vec2 = std::array<double, 2>;
using Vec3 = std::array<double, 3>;

struct BevExtent {
  double x_min = -51.2;
  double x_max = 51.2;
  double y_min = -51.2;
  double y_max = 51.2;
  bool operator==(const BevExtent&) const = default;
};

struct BEVGridSpec {
  int H_bev = 50;
  int W_bev = 50;
  BevExtent extent;
  std::vector<double> pillar_z{-1.0, 1.0 / 3.0, 5.0 / 3.0, 3.0};

  std::size_t queries() const noexcept {
    return static_cast<std::size_t>(H_bev) * static_cast<std::size_t>(W_bev);
  }
  std::size_t pillars() const noexcept { return pillar_z.size(); }
  void validate() const;
  bool operator==(const BEVGridSpec&) const = default;

  // Z evenly spaced heights over [z_lo, z_hi] inclusive.
  static std::vector<double> even_pillars(int count, double z_lo, double z_hi);
};

struct CameraModel {
  // Row-major 4x4 map from ego-frame homogeneous points to image homogeneous
  // coordinates (u*w, v*w, w, 1) in pixels.
  std::array<double, 16> proj{};
  int img_w = 1600;
  int img_h = 900;

  void validate() const;
  bool operator==(const CameraModel&) const = default;
};

// Pinhole camera at `position` looking horizontally along ego yaw `yaw_rad`
// (x forward, y left, z up) with a horizontal field of view `hfov_rad` and
// square pixels; the principal point is the image center.
CameraModel make_pinhole_camera(double yaw_rad, const Vec3& position, double hfov_rad, int img_w,
                                int img_h);

// `count` cameras at a common position, yaws yaw0 + k * 2pi / count, each with
// horizontal FOV 2pi / count so that their footprints tile the horizon.
std::vector<CameraModel> make_ring_rig(int count, double yaw0, const Vec3& position, int img_w,
                                       int img_h);

std::vector<Vec2> bev_cell_centers(const BEVGridSpec& spec);

struct Projection {
  std::size_t queries = 0;
  std::size_t pillars = 0;
  std::vector<Vec2> uv;          // queries x pillars, normalized image coordinates
  std::vector<std::uint8_t> valid;  // point in front of the camera (w > eps)
};

Projection lift_and_project(std::span<const Vec2> centers, const BEVGridSpec& spec,
                            const CameraModel& cam);

struct Hits {
  std::vector<std::uint8_t> b;  // queries x pillars
  std::size_t M = 0;
};

Hits compute_hits(const Projection& projection);

struct ReferencePointSet {
  std::size_t cameras = 0;
  std::size_t queries = 0;
  std::size_t pillars = 0;
  std::vector<Vec2> R;           // cameras x queries x pillars
  std::vector<std::uint8_t> b;   // cameras x queries x pillars
  std::vector<std::size_t> M;    // per camera

  std::size_t index(std::size_t cam, std::size_t q, std::size_t z) const noexcept {
    return (cam * queries + q) * pillars + z;
  }
  bool hit(std::size_t cam, std::size_t q, std::size_t z) const noexcept {
    return b[index(cam, q, z)] != 0;
  }
  const Vec2& point(std::size_t cam, std::size_t q, std::size_t z) const noexcept {
    return R[index(cam, q, z)];
  }
  std::size_t total_hits() const noexcept;
  // Hits of query q summed over cameras and pillars.
  std::size_t hits_of_query(std::size_t q) const noexcept;
};

ReferencePointSet build_reference_points(const BEVGridSpec& spec,
                                         std::span<const CameraModel> cameras);

}  // namespace xbev
