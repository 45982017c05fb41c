#include "modqp/kinematics.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>
#include <stdexcept>

namespace modqp {

const ConfigModule& ConfigurationGraph::module(const std::string& id) const {
  for (const auto& m : modules) {
    if (m.id == id) return m;
  }
  throw std::out_of_range("configuration has no module '" + id + "'");
}

ChainState::ChainState(std::string frame, std::vector<EdgeFactor> factors,
                       std::vector<std::pair<std::string, int>> frame_offsets)
    : frame_(std::move(frame)),
      factors_(std::move(factors)),
      frame_offsets_(std::move(frame_offsets)) {
  for (const auto& f : factors_) {
    if (f.is_joint() && !joint_index_.count(f.joint)) {
      joint_index_[f.joint] = static_cast<int>(joints_.size());
      joints_.push_back(f.joint);
    }
  }
  theta_ = VecX::Zero(static_cast<int>(joints_.size()));
}

void ChainState::set_theta(const VecX& theta) {
  if (theta.size() != theta_.size()) {
    throw std::invalid_argument("ChainState::set_theta: expected " +
                                std::to_string(theta_.size()) + " values, got " +
                                std::to_string(theta.size()));
  }
  theta_ = theta;
  ++version_;
}

void ChainState::set_theta(const std::map<JointRef, double>& theta) {
  for (const auto& [ref, idx] : joint_index_) {
    auto it = theta.find(ref);
    if (it != theta.end()) theta_[idx] = it->second;
  }
  ++version_;
}

void ChainState::refresh() const {
  if (cached_version_ == version_) return;
  const int n = joint_count();
  jac_ = MatX::Zero(6, n);
  Transform prefix = Transform::Identity();
  for (const auto& f : factors_) {
    if (f.is_joint()) {
      const int col = joint_index_.at(f.joint);
      jac_.col(col) += adjoint(prefix) * f.twist.vector();
      prefix = compose(prefix, exp_twist(f.twist, theta_[col]));
    } else {
      prefix = compose(prefix, *f.constant);
    }
  }
  g_wf_ = prefix;
  cached_version_ = version_;
}

Transform ChainState::transform() const {
  refresh();
  return g_wf_;
}

Vec3 ChainState::position() const {
  refresh();
  return g_wf_.p;
}

const MatX& ChainState::jacobian() const {
  refresh();
  return jac_;
}

std::optional<int> ChainState::frame_offset(const std::string& frame) const {
  for (const auto& [f, off] : frame_offsets_) {
    if (f == frame) return off;
  }
  return std::nullopt;
}

MatX ChainState::module_jacobian(const std::string& module_id) const {
  const auto off = frame_offset(module_id + ".M");
  if (!off) {
    throw std::out_of_range("module '" + module_id + "' is not on the chain to '" + frame_ + "'");
  }
  MatX J = MatX::Zero(6, joint_count());
  Transform prefix = Transform::Identity();
  for (int i = 0; i < *off; ++i) {
    const auto& f = factors_[static_cast<size_t>(i)];
    if (f.is_joint()) {
      const int col = joint_index_.at(f.joint);
      J.col(col) += adjoint(prefix) * f.twist.vector();
      prefix = compose(prefix, exp_twist(f.twist, theta_[col]));
    } else {
      prefix = compose(prefix, *f.constant);
    }
  }
  return J;
}

Vec3 frame_point_velocity(const MatX& J, const VecX& theta_dot, const Vec3& p) {
  if (J.rows() != 6 || J.cols() != theta_dot.size()) {
    throw std::invalid_argument("frame_point_velocity: dimension mismatch");
  }
  return point_velocity_map(p) * (J * theta_dot);
}

KinematicsGraph KinematicsGraph::Build(const ConfigurationGraph& config,
                                       const ModuleLibrary& library) {
  KinematicsGraph gk;
  if (config.modules.empty()) {
    throw std::invalid_argument("configuration has no modules");
  }

  // Connector-use bookkeeping: each connector docks at most once.
  std::set<std::string> used;
  auto mark_used = [&used](const std::string& id, const std::string& conn) {
    const std::string key = id + "." + conn;
    if (!used.insert(key).second) {
      throw std::invalid_argument("connector '" + key + "' used by more than one connection");
    }
  };
  mark_used(config.base.module_id, config.base.connector);
  for (const auto& c : config.connections) {
    mark_used(c.id_a, c.conn_a);
    mark_used(c.id_b, c.conn_b);
  }

  // Adjacency: module id -> (local connector, peer id, peer connector, case).
  struct Dock {
    std::string conn, peer_id, peer_conn;
    int case_index;
  };
  std::map<std::string, std::vector<Dock>> adj;
  for (const auto& c : config.connections) {
    adj[c.id_a].push_back({c.conn_a, c.id_b, c.conn_b, c.case_index});
    adj[c.id_b].push_back({c.conn_b, c.id_a, c.conn_a, c.case_index});
  }

  auto add_frame = [&gk](const std::string& frame, const std::string& parent,
                         std::vector<EdgeFactor> edge) {
    gk.nodes_[frame] = {parent, std::move(edge)};
    gk.frame_order_.push_back(frame);
  };

  gk.nodes_["W"] = {"", {}};
  gk.frame_order_.push_back("W");

  // Visit one module: its entry connector frame already exists; attach
  // body frame and remaining connector frames.
  auto visit_module = [&](const ConfigModule& m, const std::string& entry_conn) {
    const ModuleDescriptor& desc = library.get(m.kind);
    gk.modules_.push_back(m);
    gk.desc_by_id_[m.id] = desc;
    for (const auto& j : desc.joints) {
      gk.joints_.push_back({{m.id, j.label}, j.pos_min, j.pos_max, j.vel_min, j.vel_max});
    }

    // Entry connector -> M: inverse of g_MC(theta).
    const ConnectorSpec& entry = desc.connector(entry_conn);
    std::vector<EdgeFactor> to_body;
    to_body.push_back(EdgeFactor::Const(inverse(entry.rest)));
    for (auto it = entry.joints.rbegin(); it != entry.joints.rend(); ++it) {
      const TwistCoords& xi = desc.joint(*it).twist;
      to_body.push_back(EdgeFactor::Joint({m.id, *it}, {-xi.v, -xi.omega}));
    }
    add_frame(m.id + ".M", m.id + "." + entry_conn, std::move(to_body));

    for (const auto& c : desc.connectors) {
      if (c.label == entry_conn) continue;
      std::vector<EdgeFactor> edge;
      for (const auto& label : c.joints) {
        edge.push_back(EdgeFactor::Joint({m.id, label}, desc.joint(label).twist));
      }
      edge.push_back(EdgeFactor::Const(c.rest));
      add_frame(m.id + "." + c.label, m.id + ".M", std::move(edge));
    }
  };

  // BFS from the base module.
  std::set<std::string> visited;
  const ConfigModule& base_mod = config.module(config.base.module_id);
  library.get(base_mod.kind).connector(config.base.connector);  // validate
  add_frame(config.base.module_id + "." + config.base.connector, "W",
            {EdgeFactor::Const(config.base.world)});
  visited.insert(base_mod.id);
  visit_module(base_mod, config.base.connector);

  std::deque<std::pair<std::string, std::string>> queue;  // (module id, entry connector)
  queue.emplace_back(base_mod.id, config.base.connector);
  while (!queue.empty()) {
    auto [id, entry] = queue.front();
    queue.pop_front();
    auto it = adj.find(id);
    if (it == adj.end()) continue;
    for (const auto& dock : it->second) {
      if (dock.conn == entry) continue;  // edge we came through (or the base attachment)
      if (visited.count(dock.peer_id)) {
        // Each connector docks at most once, so any dock back into a
        // visited module closes a loop.
        throw std::invalid_argument("configuration contains a loop through connector '" + id +
                                    "." + dock.conn + "'");
      }
      const ConfigModule& peer = config.module(dock.peer_id);
      const ModuleDescriptor& desc_a = library.get(config.module(id).kind);
      const ModuleDescriptor& desc_b = library.get(peer.kind);
      const Transform mate =
          mate_transform(desc_a, dock.conn, desc_b, dock.peer_conn, {dock.case_index});
      // Connector frame of the peer hangs off our connector frame.
      add_frame(dock.peer_id + "." + dock.peer_conn, id + "." + dock.conn,
                {EdgeFactor::Const(mate)});
      visited.insert(peer.id);
      visit_module(peer, dock.peer_conn);
      queue.emplace_back(peer.id, dock.peer_conn);
    }
  }

  if (visited.size() != config.modules.size()) {
    std::ostringstream oss;
    oss << "configuration is disconnected; unreachable modules:";
    for (const auto& m : config.modules) {
      if (!visited.count(m.id)) oss << " " << m.id;
    }
    throw std::invalid_argument(oss.str());
  }
  return gk;
}

bool KinematicsGraph::has_frame(const std::string& frame) const {
  return nodes_.count(frame) != 0;
}

std::vector<std::string> KinematicsGraph::frames() const { return frame_order_; }

ChainState KinematicsGraph::chain(const std::string& frame) const {
  if (!nodes_.count(frame)) {
    throw std::out_of_range("unknown frame '" + frame + "'");
  }
  // Walk up to W, then flatten edges in W -> frame order.
  std::vector<const std::string*> path;
  const std::string* cur = &frame;
  while (*cur != "W") {
    path.push_back(cur);
    cur = &nodes_.at(*cur).parent;
  }
  std::reverse(path.begin(), path.end());

  std::vector<EdgeFactor> factors;
  std::vector<std::pair<std::string, int>> offsets;
  offsets.emplace_back("W", 0);
  for (const std::string* f : path) {
    const auto& edge = nodes_.at(*f).edge;
    factors.insert(factors.end(), edge.begin(), edge.end());
    offsets.emplace_back(*f, static_cast<int>(factors.size()));
  }
  return ChainState(frame, std::move(factors), std::move(offsets));
}

const ModuleDescriptor& KinematicsGraph::descriptor(const std::string& module_id) const {
  auto it = desc_by_id_.find(module_id);
  if (it == desc_by_id_.end()) {
    throw std::out_of_range("unknown module id '" + module_id + "'");
  }
  return it->second;
}

const JointInfo& KinematicsGraph::joint_info(const JointRef& ref) const {
  for (const auto& j : joints_) {
    if (j.ref == ref) return j;
  }
  throw std::out_of_range("unknown joint '" + ref.str() + "'");
}

}  // namespace modqp
