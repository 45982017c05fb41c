#include "modqp/environment.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace modqp {

bool BoundaryPolyhedron::contains(const Vec3& p, double margin) const {
  for (const auto& f : faces) {
    if (f.normal.dot(p) > f.offset - margin) return false;
  }
  return true;
}

std::vector<ObstacleSphere> generate_spheres(const OrientedBox& box, int level) {
  if (level < 1 || level > 4) {
    throw std::invalid_argument("generate_spheres: level must be in [1, 4]");
  }
  if (box.half_extents.minCoeff() <= 0.0) {
    throw std::invalid_argument("generate_spheres: degenerate box '" + box.id + "'");
  }
  const int cells = 1 << level;  // per axis
  const Vec3 cell_half = box.half_extents / cells;
  const double radius = cell_half.norm();  // circumscribing sphere
  std::vector<ObstacleSphere> out;
  out.reserve(static_cast<size_t>(cells) * cells * cells);
  for (int ix = 0; ix < cells; ++ix) {
    for (int iy = 0; iy < cells; ++iy) {
      for (int iz = 0; iz < cells; ++iz) {
        Vec3 local(-box.half_extents.x() + (2 * ix + 1) * cell_half.x(),
                   -box.half_extents.y() + (2 * iy + 1) * cell_half.y(),
                   -box.half_extents.z() + (2 * iz + 1) * cell_half.z());
        out.push_back({box.center + box.orientation * local, radius, box.id});
      }
    }
  }
  return out;
}

std::vector<ConstraintRow> boundary_rows(const Vec3& p_M, double r_i, const MatX& J_M,
                                         const BoundaryPolyhedron& poly) {
  std::vector<ConstraintRow> rows;
  rows.reserve(poly.faces.size());
  const Mat36 L = point_velocity_map(p_M);
  for (size_t j = 0; j < poly.faces.size(); ++j) {
    const auto& f = poly.faces[j];
    const double d = f.offset - f.normal.dot(p_M);  // perpendicular distance to face
    if (d < 0.0) {
      std::ostringstream oss;
      oss << "module center outside boundary face " << j << " by " << -d << " m";
      throw InfeasibleStateError(oss.str());
    }
    // s^_ij is the direction from p_M toward the face, which is the
    // outward face normal for a point inside the region.
    rows.push_back({(f.normal.transpose() * L * J_M).transpose(), d - r_i});
  }
  return rows;
}

ObstaclePlane obstacle_plane(const Vec3& p_M, double r_i, const ObstacleSphere& s) {
  const Vec3 diff = s.center - p_M;
  const double dist = diff.norm();
  if (dist <= s.radius) {
    std::ostringstream oss;
    oss << "module center penetrates obstacle sphere '" << s.source_id << "' by "
        << s.radius - dist << " m";
    throw PenetrationError(oss.str(), s.radius - dist);
  }
  ObstaclePlane p;
  p.normal = diff / dist;
  p.tangency_point = s.center - s.radius * p.normal;
  p.rhs = (p.tangency_point - p_M).norm() - r_i;
  return p;
}

RefineResult refine_spheres(const Vec3& p_M, double r_i,
                            const std::vector<ObstacleSphere>& spheres) {
  std::vector<size_t> order(spheres.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
    return (spheres[a].center - p_M).squaredNorm() < (spheres[b].center - p_M).squaredNorm();
  });

  RefineResult res;
  for (size_t idx : order) {
    const ObstacleSphere& q = spheres[idx];
    bool separated = false;
    for (size_t k = 0; k < res.kept.size(); ++k) {
      const ObstaclePlane& plane = res.planes[k];
      // Kept plane shifted by r_i toward the module: the conservative
      // module-side face. q is prunable if it lies strictly beyond it.
      const Vec3 point_on_plane = plane.tangency_point - r_i * plane.normal;
      const double signed_dist = plane.normal.dot(q.center - point_on_plane) - q.radius;
      if (signed_dist > 0.0) {
        separated = true;
        break;
      }
    }
    if (!separated) {
      res.planes.push_back(obstacle_plane(p_M, r_i, q));
      res.kept.push_back(q);
    }
  }
  return res;
}

}  // namespace modqp
