#include "modqp/module_library.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace modqp {

bool JointSpec::continuous() const {
  return !std::isfinite(pos_min) && !std::isfinite(pos_max);
}

const JointSpec& ModuleDescriptor::joint(const std::string& label) const {
  for (const auto& j : joints) {
    if (j.label == label) return j;
  }
  throw std::out_of_range("module kind '" + kind + "' has no joint '" + label + "'");
}

const ConnectorSpec& ModuleDescriptor::connector(const std::string& label) const {
  for (const auto& c : connectors) {
    if (c.label == label) return c;
  }
  throw std::out_of_range("module kind '" + kind + "' has no connector '" + label + "'");
}

bool ModuleDescriptor::has_connector(const std::string& label) const {
  for (const auto& c : connectors) {
    if (c.label == label) return true;
  }
  return false;
}

void ModuleLibrary::add(ModuleDescriptor desc) {
  validate_descriptor(desc);
  descriptors_[desc.kind] = std::move(desc);
}

const ModuleDescriptor& ModuleLibrary::get(const std::string& kind) const {
  auto it = descriptors_.find(kind);
  if (it == descriptors_.end()) {
    throw std::out_of_range("unknown module kind '" + kind + "'");
  }
  return it->second;
}

bool ModuleLibrary::has(const std::string& kind) const {
  return descriptors_.count(kind) != 0;
}

std::vector<std::string> ModuleLibrary::kinds() const {
  std::vector<std::string> out;
  for (const auto& [k, _] : descriptors_) out.push_back(k);
  return out;
}

Transform module_forward(const ModuleDescriptor& desc, const std::string& connector,
                         const std::map<std::string, double>& theta) {
  const ConnectorSpec& c = desc.connector(connector);
  Transform g = Transform::Identity();
  for (const auto& label : c.joints) {
    auto it = theta.find(label);
    if (it == theta.end()) {
      throw std::invalid_argument("module_forward: missing value for joint '" + label + "'");
    }
    g = compose(g, exp_twist(desc.joint(label).twist, it->second));
  }
  return compose(g, c.rest);
}

Transform mate_transform(const ConnectionCase& c) {
  if (c.case_index < 0 || c.case_index >= kConnectionCaseCount) {
    throw std::out_of_range("connection case " + std::to_string(c.case_index) +
                            " out of range [0, " + std::to_string(kConnectionCaseCount) + ")");
  }
  const double half_pi = std::numbers::pi / 2.0;
  return Transform::FromRotation(rot_z(c.case_index * half_pi) * rot_x(std::numbers::pi));
}

Transform mate_transform(const ModuleDescriptor& kind_a, const std::string& conn_a,
                         const ModuleDescriptor& kind_b, const std::string& conn_b,
                         const ConnectionCase& c) {
  kind_a.connector(conn_a);
  kind_b.connector(conn_b);
  return mate_transform(c);
}

void validate_descriptor(const ModuleDescriptor& desc) {
  if (desc.kind.empty()) throw std::invalid_argument("module descriptor has empty kind");
  if (!(desc.body_radius > 0.0)) {
    throw std::invalid_argument("module '" + desc.kind + "': body_radius must be positive");
  }
  for (const auto& j : desc.joints) {
    if (!(j.pos_min < j.pos_max)) {
      throw std::invalid_argument("module '" + desc.kind + "' joint '" + j.label +
                                  "': position limits must satisfy min < max");
    }
    if (!(j.vel_min < 0.0 && 0.0 < j.vel_max)) {
      throw std::invalid_argument("module '" + desc.kind + "' joint '" + j.label +
                                  "': velocity limits must straddle zero");
    }
    const double wn = j.twist.omega.norm();
    const double vn = j.twist.v.norm();
    const bool revolute_unit = std::abs(wn - 1.0) <= 1e-12;
    const bool prismatic_unit = wn == 0.0 && std::abs(vn - 1.0) <= 1e-12;
    if (!revolute_unit && !prismatic_unit) {
      throw std::invalid_argument("module '" + desc.kind + "' joint '" + j.label +
                                  "': twist is not a unit screw");
    }
  }
  if (desc.connectors.empty()) {
    throw std::invalid_argument("module '" + desc.kind + "' declares no connectors");
  }
  for (const auto& c : desc.connectors) {
    for (const auto& label : c.joints) {
      desc.joint(label);  // throws on dangling reference
    }
  }
}

}  // namespace modqp
