#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "modqp/lie.hpp"

namespace modqp {

struct BoundaryFace {
  Vec3 normal;    // outward unit normal
  double offset;  // face plane: normal . x = offset; feasible side normal . x <= offset
};

/// Intersection of inner half-spaces; the robot-feasible region.
struct BoundaryPolyhedron {
  std::vector<BoundaryFace> faces;

  bool contains(const Vec3& p, double margin = 0.0) const;
};

struct ObstacleSphere {
  Vec3 center;
  double radius = 0.0;
  std::string source_id;
};

/// Linearized no-touch constraint surface for one (module, sphere) pair:
/// tangent plane to the sphere, normal from the module center toward the
/// sphere center.
struct ObstaclePlane {
  Vec3 normal;          // s~, unit, module -> sphere center
  Vec3 tangency_point;  // o' = o - r^o * s~
  double rhs = 0.0;     // ||o' - p_M|| - r_i
};

/// Axis-oriented box placed in the world, subdivided into spheres.
struct OrientedBox {
  Vec3 center;
  Vec3 half_extents;
  Mat3 orientation = Mat3::Identity();
  std::string id;
};

/// Thrown when a module center is already outside the boundary or inside
/// an obstacle sphere: the scenario state, not the solver, is bad.
struct InfeasibleStateError : std::runtime_error {
  explicit InfeasibleStateError(const std::string& what) : std::runtime_error(what) {}
};

struct PenetrationError : std::runtime_error {
  PenetrationError(const std::string& what, double depth_)
      : std::runtime_error(what), depth(depth_) {}
  double depth;
};

/// Octree cover of a box: 8^level cells, one circumscribing sphere per
/// cell. The union of spheres covers the box.
std::vector<ObstacleSphere> generate_spheres(const OrientedBox& box, int level);

/// One inequality row per boundary face for a module body at p_M with
/// bounding radius r_i and spatial module Jacobian J_M (columns in the
/// caller's joint order). row . theta_dot <= bound keeps the body inside.
struct ConstraintRow {
  VecX row;
  double bound;
};
std::vector<ConstraintRow> boundary_rows(const Vec3& p_M, double r_i, const MatX& J_M,
                                         const BoundaryPolyhedron& poly);

/// Tangent-plane constraint data for one sphere. Throws PenetrationError
/// if the module center is inside the sphere.
ObstaclePlane obstacle_plane(const Vec3& p_M, double r_i, const ObstacleSphere& s);

struct RefineResult {
  std::vector<ObstacleSphere> kept;
  std::vector<ObstaclePlane> planes;  // one per kept sphere, same order
};

/// Per-module sphere pruning: keeps only spheres not strictly separated
/// from the module by an already-kept sphere's plane (shifted by r_i
/// toward the module). Processes spheres in ascending distance from p_M.
RefineResult refine_spheres(const Vec3& p_M, double r_i,
                            const std::vector<ObstacleSphere>& spheres);

}  // namespace modqp
