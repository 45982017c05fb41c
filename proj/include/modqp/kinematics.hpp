#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "modqp/lie.hpp"
#include "modqp/module_library.hpp"

namespace modqp {

struct JointRef {
  std::string module_id;
  std::string label;
  auto operator<=>(const JointRef&) const = default;
  std::string str() const { return module_id + "." + label; }
};

struct ConfigModule {
  std::string id;
  std::string kind;
};

struct ConfigConnection {
  std::string id_a, conn_a;
  std::string id_b, conn_b;
  int case_index = 0;
};

struct BaseAttachment {
  std::string module_id;
  std::string connector;
  Transform world;  // pose of the attached connector frame in W
};

/// Whole-robot configuration: which modules, how they dock, where the
/// base connector sits in the world. Must be a connected tree.
struct ConfigurationGraph {
  std::vector<ConfigModule> modules;
  std::vector<ConfigConnection> connections;
  BaseAttachment base;

  const ConfigModule& module(const std::string& id) const;
};

/// One multiplicative factor of an edge transform: either a constant
/// rigid transform or exp(xi^ * theta_j) for a referenced joint. The
/// stored twist already carries the traversal sign.
struct EdgeFactor {
  std::optional<Transform> constant;
  JointRef joint;
  TwistCoords twist;

  static EdgeFactor Const(const Transform& g) {
    EdgeFactor f;
    f.constant = g;
    return f;
  }
  static EdgeFactor Joint(JointRef ref, const TwistCoords& xi) {
    EdgeFactor f;
    f.joint = std::move(ref);
    f.twist = xi;
    return f;
  }
  bool is_joint() const { return !constant.has_value(); }
};

struct JointInfo {
  JointRef ref;
  double pos_min, pos_max, vel_min, vel_max;
};

/// Kinematic chain from W to one frame: ordered joints, current
/// parameters, and lazily cached transform / position / Jacobian.
/// Single-writer: set_theta invalidates the caches via a version bump.
class ChainState {
 public:
  ChainState(std::string frame, std::vector<EdgeFactor> factors,
             std::vector<std::pair<std::string, int>> frame_offsets);

  const std::string& frame() const { return frame_; }
  const std::vector<JointRef>& joints() const { return joints_; }
  int joint_count() const { return static_cast<int>(joints_.size()); }

  void set_theta(const VecX& theta);
  void set_theta(const std::map<JointRef, double>& theta);
  const VecX& theta() const { return theta_; }

  Transform transform() const;   // g_WF
  Vec3 position() const;         // p_F
  const MatX& jacobian() const;  // 6 x n spatial chain Jacobian

  /// 6 x n spatial module Jacobian: columns of joints downstream of the
  /// given module body zeroed. Throws std::out_of_range if the module
  /// body frame is not on this chain's path.
  MatX module_jacobian(const std::string& module_id) const;

  /// Factor-sequence offset of a visited frame, if on the path.
  std::optional<int> frame_offset(const std::string& frame) const;

 private:
  void refresh() const;

  std::string frame_;
  std::vector<EdgeFactor> factors_;
  std::vector<std::pair<std::string, int>> frame_offsets_;  // path order
  std::vector<JointRef> joints_;
  std::map<JointRef, int> joint_index_;
  VecX theta_;

  mutable std::uint64_t version_ = 1, cached_version_ = 0;
  mutable Transform g_wf_;
  mutable MatX jac_;
};

/// Velocity of the point p on a body with spatial Jacobian J:
/// point_velocity_map(p) * J * theta_dot. Throws on dimension mismatch.
Vec3 frame_point_velocity(const MatX& J, const VecX& theta_dot, const Vec3& p);

/// Tree-structured frame graph of the whole robot: W, every module body
/// frame "<id>.M", every connector frame "<id>.<conn>". Immutable after
/// build.
class KinematicsGraph {
 public:
  static KinematicsGraph Build(const ConfigurationGraph& config, const ModuleLibrary& library);

  bool has_frame(const std::string& frame) const;
  std::vector<std::string> frames() const;

  /// The unique W -> frame chain (tree paths are unique). Joints appear
  /// in path order; theta starts at zero.
  ChainState chain(const std::string& frame) const;

  /// Modules in BFS discovery order.
  const std::vector<ConfigModule>& modules() const { return modules_; }
  const ModuleDescriptor& descriptor(const std::string& module_id) const;

  /// All joints of all modules, BFS module order, descriptor joint order.
  const std::vector<JointInfo>& all_joints() const { return joints_; }
  const JointInfo& joint_info(const JointRef& ref) const;

 private:
  struct FrameNode {
    std::string parent;
    std::vector<EdgeFactor> edge;  // parent -> this
  };
  std::map<std::string, FrameNode> nodes_;
  std::vector<std::string> frame_order_;
  std::vector<ConfigModule> modules_;
  std::map<std::string, ModuleDescriptor> desc_by_id_;
  std::vector<JointInfo> joints_;
};

}  // namespace modqp
