// SPDX-License-Identifier: Apache-2.0

#include "xbev/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "xbev/error.hpp"
#include "xbev/tolerances.hpp"

namespace xbev {

void BEVGridSpec::validate() const {
  require(H_bev >= 1 && W_bev >= 1, ErrorKind::kInvalidSpec, "BEV grid must be at least 1x1");
  require(std::isfinite(extent.x_min) && std::isfinite(extent.x_max) &&
              std::isfinite(extent.y_min) && std::isfinite(extent.y_max),
          ErrorKind::kInvalidSpec, "BEV extent must be finite");
  require(extent.x_min < extent.x_max && extent.y_min < extent.y_max, ErrorKind::kInvalidSpec,
          "degenerate BEV extent");
  require(!pillar_z.empty(), ErrorKind::kInvalidSpec, "pillar_z needs at least one height");
  for (std::size_t k = 1; k < pillar_z.size(); ++k) {
    require(pillar_z[k] > pillar_z[k - 1], ErrorKind::kInvalidSpec,
            "pillar_z must be strictly increasing");
  }
}

std::vector<double> BEVGridSpec::even_pillars(int count, double z_lo, double z_hi) {
  require(count >= 1, ErrorKind::kInvalidSpec, "pillar count must be >= 1");
  std::vector<double> z(static_cast<std::size_t>(count));
  if (count == 1) {
    z[0] = 0.5 * (z_lo + z_hi);
    return z;
  }
  for (int k = 0; k < count; ++k) z[static_cast<std::size_t>(k)] = z_lo + (z_hi - z_lo) * k / (count - 1);
  return z;
}

void CameraModel::validate() const {
  require(img_w >= 1 && img_h >= 1, ErrorKind::kInvalidSpec, "image size must be positive");
  require(std::all_of(proj.begin(), proj.end(), [](double v) { return std::isfinite(v); }),
          ErrorKind::kInvalidSpec, "projection matrix must be finite");
}

CameraModel make_pinhole_camera(double yaw_rad, const Vec3& position, double hfov_rad, int img_w,
                                int img_h) {
  require(hfov_rad > 0.0 && hfov_rad < std::numbers::pi, ErrorKind::kInvalidSpec,
          "horizontal FOV must be in (0, pi)");
  const double fx = 0.5 * img_w / std::tan(0.5 * hfov_rad);
  const double cx = 0.5 * img_w;
  const double cy = 0.5 * img_h;
  const Vec3 forward{std::cos(yaw_rad), std::sin(yaw_rad), 0.0};
  const Vec3 right{std::sin(yaw_rad), -std::cos(yaw_rad), 0.0};
  const Vec3 down{0.0, 0.0, -1.0};

  std::array<Vec3, 3> rows{};
  for (int k = 0; k < 3; ++k) {
    rows[0][k] = fx * right[k] + cx * forward[k];
    rows[1][k] = fx * down[k] + cy * forward[k];
    rows[2][k] = forward[k];
  }
  CameraModel cam;
  cam.img_w = img_w;
  cam.img_h = img_h;
  for (int r = 0; r < 3; ++r) {
    double t = 0.0;
    for (int k = 0; k < 3; ++k) {
      cam.proj[r * 4 + k] = rows[r][k];
      t -= rows[r][k] * position[k];
    }
    cam.proj[r * 4 + 3] = t;
  }
  cam.proj[15] = 1.0;
  return cam;
}

std::vector<CameraModel> make_ring_rig(int count, double yaw0, const Vec3& position, int img_w,
                                       int img_h) {
  require(count >= 3, ErrorKind::kInvalidSpec, "a ring rig needs at least 3 cameras");
  const double step = 2.0 * std::numbers::pi / count;
  std::vector<CameraModel> rig;
  for (int k = 0; k < count; ++k) {
    rig.push_back(make_pinhole_camera(yaw0 + k * step, position, step, img_w, img_h));
  }
  return rig;
}

std::vector<Vec2> bev_cell_centers(const BEVGridSpec& spec) {
  spec.validate();
  const double dx = (spec.extent.x_max - spec.extent.x_min) / spec.W_bev;
  const double dy = (spec.extent.y_max - spec.extent.y_min) / spec.H_bev;
  std::vector<Vec2> centers;
  centers.reserve(spec.queries());
  for (int i = 0; i < spec.H_bev; ++i) {
    for (int j = 0; j < spec.W_bev; ++j) {
      centers.push_back({spec.extent.x_min + (j + 0.5) * dx, spec.extent.y_min + (i + 0.5) * dy});
    }
  }
  return centers;
}

Projection lift_and_project(std::span<const Vec2> centers, const BEVGridSpec& spec,
                            const CameraModel& cam) {
  spec.validate();
  cam.validate();
  Projection out;
  out.queries = centers.size();
  out.pillars = spec.pillars();
  out.uv.assign(out.queries * out.pillars, Vec2{-1.0, -1.0});
  out.valid.assign(out.queries * out.pillars, 0);
  const auto& P = cam.proj;
  for (std::size_t q = 0; q < out.queries; ++q) {
    const auto [x, y] = centers[q];
    for (std::size_t k = 0; k < out.pillars; ++k) {
      const double z = spec.pillar_z[k];
      const double u = P[0] * x + P[1] * y + P[2] * z + P[3];
      const double v = P[4] * x + P[5] * y + P[6] * z + P[7];
      const double w = P[8] * x + P[9] * y + P[10] * z + P[11];
      const std::size_t idx = q * out.pillars + k;
      if (w > Tolerances::kHomogeneousEps) {
        out.uv[idx] = {u / w / cam.img_w, v / w / cam.img_h};
        out.valid[idx] = 1;
      }
    }
  }
  return out;
}

Hits compute_hits(const Projection& projection) {
  Hits hits;
  hits.b.assign(projection.uv.size(), 0);
  for (std::size_t i = 0; i < projection.uv.size(); ++i) {
    const auto [u, v] = projection.uv[i];
    const bool in = projection.valid[i] != 0 && u >= 0.0 && u <= 1.0 && v >= 0.0 && v <= 1.0;
    hits.b[i] = in ? 1 : 0;
    hits.M += in ? 1 : 0;
  }
  return hits;
}

std::size_t ReferencePointSet::total_hits() const noexcept {
  return std::accumulate(M.begin(), M.end(), std::size_t{0});
}

std::size_t ReferencePointSet::hits_of_query(std::size_t q) const noexcept {
  std::size_t n = 0;
  for (std::size_t c = 0; c < cameras; ++c) {
    for (std::size_t z = 0; z < pillars; ++z) n += hit(c, q, z) ? 1 : 0;
  }
  return n;
}

ReferencePointSet build_reference_points(const BEVGridSpec& spec,
                                         std::span<const CameraModel> cameras) {
  require(!cameras.empty(), ErrorKind::kInvalidSpec, "at least one camera is required");
  const auto centers = bev_cell_centers(spec);
  ReferencePointSet refs;
  refs.cameras = cameras.size();
  refs.queries = centers.size();
  refs.pillars = spec.pillars();
  refs.R.reserve(refs.cameras * refs.queries * refs.pillars);
  refs.b.reserve(refs.R.capacity());
  for (const auto& cam : cameras) {
    const auto projection = lift_and_project(centers, spec, cam);
    const auto hits = compute_hits(projection);
    refs.R.insert(refs.R.end(), projection.uv.begin(), projection.uv.end());
    refs.b.insert(refs.b.end(), hits.b.begin(), hits.b.end());
    refs.M.push_back(hits.M);
  }
  return refs;
}

}  // namespace xbev
