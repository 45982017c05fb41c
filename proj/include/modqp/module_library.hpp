#pragma once

#include <map>
#include <string>
#include <vector>

#include "modqp/lie.hpp"

namespace modqp {

struct JointSpec {
  std::string label;
  TwistCoords twist;  // expressed in the module body frame M
  double pos_min = 0.0;
  double pos_max = 0.0;  // radians (or meters for prismatic)
  double vel_min = 0.0;
  double vel_max = 0.0;
  bool continuous() const;
};

struct ConnectorSpec {
  std::string label;
  Transform rest;  // g_MC(0)
  std::vector<std::string> joints;  // ordered M->C joint dependency
};

/// One module type: body frame M, connector frames, joints and their
/// twists, and a bounding-sphere radius for the body.
struct ModuleDescriptor {
  std::string kind;
  double body_radius = 0.0;  // meters
  std::vector<JointSpec> joints;
  std::vector<ConnectorSpec> connectors;

  const JointSpec& joint(const std::string& label) const;
  const ConnectorSpec& connector(const std::string& label) const;
  bool has_connector(const std::string& label) const;
};

/// Docking pose between two mated connector frames. Cases 0..3 differ
/// by successive 90 degree rotations about the docking normal.
struct ConnectionCase {
  int case_index = 0;
};

inline constexpr int kConnectionCaseCount = 4;

class ModuleLibrary {
 public:
  void add(ModuleDescriptor desc);
  const ModuleDescriptor& get(const std::string& kind) const;
  bool has(const std::string& kind) const;
  std::vector<std::string> kinds() const;

 private:
  std::map<std::string, ModuleDescriptor> descriptors_;
};

/// g_MC(theta): product of joint exponentials along the M->C path times
/// the rest transform. `theta` maps joint labels to values; every joint
/// on the path must be present, extra entries are ignored.
Transform module_forward(const ModuleDescriptor& desc, const std::string& connector,
                         const std::map<std::string, double>& theta);

/// Fixed transform between two mated connector frames for the given
/// docking case: RotZ(case * pi/2) * RotX(pi). Mating then reverse-
/// mating with the same case composes to identity.
Transform mate_transform(const ConnectionCase& c);

/// Checked variant: verifies both connectors exist and the case index is
/// in [0, 4). Throws std::out_of_range with the valid range otherwise.
Transform mate_transform(const ModuleDescriptor& kind_a, const std::string& conn_a,
                         const ModuleDescriptor& kind_b, const std::string& conn_b,
                         const ConnectionCase& c);

/// Validates descriptor invariants; throws std::invalid_argument on
/// violation (bad limits, dangling joint reference, non-unit twist).
void validate_descriptor(const ModuleDescriptor& desc);

}  // namespace modqp
