#include "modqp/scenario_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace modqp {

namespace fs = std::filesystem;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Line {
  int number;
  std::vector<std::string> tokens;
};

std::vector<Line> read_lines(const fs::path& path, const std::string& header) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::vector<Line> lines;
  std::string raw;
  int number = 0;
  while (std::getline(in, raw)) {
    ++number;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::istringstream iss(raw);
    Line line{number, {}};
    std::string tok;
    while (iss >> tok) line.tokens.push_back(tok);
    if (!line.tokens.empty()) lines.push_back(std::move(line));
  }
  if (lines.empty() || lines.front().tokens.size() != 2 ||
      lines.front().tokens[0] + " " + lines.front().tokens[1] != header) {
    throw LoadError(path.string() + ": expected version header '" + header + "'");
  }
  lines.erase(lines.begin());
  return lines;
}

[[noreturn]] void fail(const fs::path& path, int line, const std::string& msg) {
  throw LoadError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

double parse_num(const fs::path& path, const Line& line, size_t idx) {
  if (idx >= line.tokens.size()) fail(path, line.number, "missing numeric field");
  const std::string& t = line.tokens[idx];
  if (t == "pi") return std::numbers::pi;
  if (t == "-pi") return -std::numbers::pi;
  if (t == "pi/2") return std::numbers::pi / 2;
  if (t == "-pi/2") return -std::numbers::pi / 2;
  if (t == "pi/4") return std::numbers::pi / 4;
  if (t == "-pi/4") return -std::numbers::pi / 4;
  if (t == "inf") return kInf;
  if (t == "-inf") return -kInf;
  try {
    size_t pos = 0;
    const double v = std::stod(t, &pos);
    if (pos != t.size()) throw std::invalid_argument(t);
    return v;
  } catch (const std::exception&) {
    fail(path, line.number, "malformed number '" + t + "'");
  }
}

Vec3 parse_vec3(const fs::path& path, const Line& line, size_t idx) {
  return {parse_num(path, line, idx), parse_num(path, line, idx + 1),
          parse_num(path, line, idx + 2)};
}

const std::string& expect(const fs::path& path, const Line& line, size_t idx,
                          const std::string& what) {
  if (idx >= line.tokens.size()) fail(path, line.number, "missing field: " + what);
  return line.tokens[idx];
}

// Optional `key` at position idx; returns true and advances idx past the
// consumed fields when present.
bool keyword_at(const Line& line, size_t idx, const std::string& key) {
  return idx < line.tokens.size() && line.tokens[idx] == key;
}

std::string fmt(double v) {
  char buf[64];
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt9(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

// Orientation back to roll-pitch-yaw for serialization (R = Rz Ry Rx).
Vec3 rpy_of(const Mat3& R) {
  const double pitch = std::asin(std::clamp(-R(2, 0), -1.0, 1.0));
  double roll, yaw;
  if (std::abs(std::cos(pitch)) > 1e-10) {
    roll = std::atan2(R(2, 1), R(2, 2));
    yaw = std::atan2(R(1, 0), R(0, 0));
  } else {
    roll = std::atan2(-R(1, 2), R(1, 1));
    yaw = 0.0;
  }
  return {roll, pitch, yaw};
}

}  // namespace

ModuleDescriptor load_module_descriptor(const fs::path& path) {
  ModuleDescriptor desc;
  for (const auto& line : read_lines(path, "modqp-module v1")) {
    const std::string& key = line.tokens[0];
    if (key == "kind") {
      desc.kind = expect(path, line, 1, "kind name");
    } else if (key == "body_radius") {
      desc.body_radius = parse_num(path, line, 1);
    } else if (key == "joint") {
      JointSpec j;
      j.label = expect(path, line, 1, "joint label");
      const std::string& type = expect(path, line, 2, "joint type");
      size_t idx = 3;
      if (!keyword_at(line, idx, "axis")) fail(path, line.number, "expected 'axis'");
      const Vec3 axis = parse_vec3(path, line, idx + 1);
      idx += 4;
      if (type == "revolute") {
        Vec3 origin = Vec3::Zero();
        if (keyword_at(line, idx, "origin")) {
          origin = parse_vec3(path, line, idx + 1);
          idx += 4;
        }
        j.twist = TwistCoords::Revolute(axis, origin);
      } else if (type == "prismatic") {
        j.twist = TwistCoords::Prismatic(axis);
      } else {
        fail(path, line.number, "unknown joint type '" + type + "'");
      }
      if (!keyword_at(line, idx, "limits")) fail(path, line.number, "expected 'limits'");
      ++idx;
      if (keyword_at(line, idx, "continuous")) {
        j.pos_min = -kInf;
        j.pos_max = kInf;
        ++idx;
      } else {
        j.pos_min = parse_num(path, line, idx);
        j.pos_max = parse_num(path, line, idx + 1);
        idx += 2;
      }
      if (!keyword_at(line, idx, "vel")) fail(path, line.number, "expected 'vel'");
      j.vel_min = parse_num(path, line, idx + 1);
      j.vel_max = parse_num(path, line, idx + 2);
      desc.joints.push_back(std::move(j));
    } else if (key == "connector") {
      ConnectorSpec c;
      c.label = expect(path, line, 1, "connector label");
      size_t idx = 2;
      if (!keyword_at(line, idx, "offset")) fail(path, line.number, "expected 'offset'");
      c.rest.p = parse_vec3(path, line, idx + 1);
      idx += 4;
      if (keyword_at(line, idx, "rpy")) {
        const Vec3 a = parse_vec3(path, line, idx + 1);
        c.rest.R = rot_rpy(a.x(), a.y(), a.z());
        idx += 4;
      }
      if (keyword_at(line, idx, "joints")) {
        for (++idx; idx < line.tokens.size(); ++idx) c.joints.push_back(line.tokens[idx]);
      }
      desc.connectors.push_back(std::move(c));
    } else {
      fail(path, line.number, "unknown directive '" + key + "'");
    }
  }
  try {
    validate_descriptor(desc);
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  return desc;
}

ModuleLibrary load_module_library(const fs::path& dir) {
  ModuleLibrary lib;
  if (!fs::is_directory(dir)) throw LoadError("module directory '" + dir.string() + "' not found");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.path().extension() == ".mod") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) lib.add(load_module_descriptor(f));
  return lib;
}

void write_module_descriptor(const fs::path& path, const ModuleDescriptor& desc) {
  std::ofstream out(path);
  out << "modqp-module v1\n";
  out << "kind " << desc.kind << "\n";
  out << "body_radius " << fmt(desc.body_radius) << "\n";
  for (const auto& j : desc.joints) {
    out << "joint " << j.label;
    if (j.twist.omega.isZero(0.0)) {
      out << " prismatic axis " << fmt(j.twist.v.x()) << " " << fmt(j.twist.v.y()) << " "
          << fmt(j.twist.v.z());
    } else {
      const Vec3 origin = j.twist.omega.cross(j.twist.v);
      out << " revolute axis " << fmt(j.twist.omega.x()) << " " << fmt(j.twist.omega.y()) << " "
          << fmt(j.twist.omega.z()) << " origin " << fmt(origin.x()) << " " << fmt(origin.y())
          << " " << fmt(origin.z());
    }
    if (j.continuous()) {
      out << " limits continuous";
    } else {
      out << " limits " << fmt(j.pos_min) << " " << fmt(j.pos_max);
    }
    out << " vel " << fmt(j.vel_min) << " " << fmt(j.vel_max) << "\n";
  }
  for (const auto& c : desc.connectors) {
    const Vec3 a = rpy_of(c.rest.R);
    out << "connector " << c.label << " offset " << fmt(c.rest.p.x()) << " " << fmt(c.rest.p.y())
        << " " << fmt(c.rest.p.z()) << " rpy " << fmt(a.x()) << " " << fmt(a.y()) << " "
        << fmt(a.z());
    if (!c.joints.empty()) {
      out << " joints";
      for (const auto& l : c.joints) out << " " << l;
    }
    out << "\n";
  }
}

ConfigurationGraph load_config(const fs::path& path) {
  ConfigurationGraph cfg;
  bool have_base = false;
  for (const auto& line : read_lines(path, "modqp-config v1")) {
    const std::string& key = line.tokens[0];
    if (key == "module") {
      cfg.modules.push_back(
          {expect(path, line, 1, "module id"), expect(path, line, 2, "module kind")});
    } else if (key == "connect") {
      ConfigConnection c;
      c.id_a = expect(path, line, 1, "module id");
      c.conn_a = expect(path, line, 2, "connector");
      c.id_b = expect(path, line, 3, "module id");
      c.conn_b = expect(path, line, 4, "connector");
      if (!keyword_at(line, 5, "case")) fail(path, line.number, "expected 'case'");
      c.case_index = static_cast<int>(parse_num(path, line, 6));
      cfg.connections.push_back(std::move(c));
    } else if (key == "base") {
      cfg.base.module_id = expect(path, line, 1, "module id");
      cfg.base.connector = expect(path, line, 2, "connector");
      size_t idx = 3;
      if (!keyword_at(line, idx, "pos")) fail(path, line.number, "expected 'pos'");
      cfg.base.world.p = parse_vec3(path, line, idx + 1);
      idx += 4;
      if (keyword_at(line, idx, "rpy")) {
        const Vec3 a = parse_vec3(path, line, idx + 1);
        cfg.base.world.R = rot_rpy(a.x(), a.y(), a.z());
      }
      have_base = true;
    } else {
      fail(path, line.number, "unknown directive '" + key + "'");
    }
  }
  if (cfg.modules.empty()) throw LoadError(path.string() + ": configuration lists no modules");
  if (!have_base) throw LoadError(path.string() + ": missing 'base' attachment");
  return cfg;
}

void write_config(const fs::path& path, const ConfigurationGraph& cfg) {
  std::ofstream out(path);
  out << "modqp-config v1\n";
  for (const auto& m : cfg.modules) out << "module " << m.id << " " << m.kind << "\n";
  for (const auto& c : cfg.connections) {
    out << "connect " << c.id_a << " " << c.conn_a << " " << c.id_b << " " << c.conn_b << " case "
        << c.case_index << "\n";
  }
  const Vec3 a = rpy_of(cfg.base.world.R);
  out << "base " << cfg.base.module_id << " " << cfg.base.connector << " pos "
      << fmt(cfg.base.world.p.x()) << " " << fmt(cfg.base.world.p.y()) << " "
      << fmt(cfg.base.world.p.z()) << " rpy " << fmt(a.x()) << " " << fmt(a.y()) << " "
      << fmt(a.z()) << "\n";
}

EnvironmentData load_environment(const fs::path& path) {
  EnvironmentData env;
  for (const auto& line : read_lines(path, "modqp-env v1")) {
    const std::string& key = line.tokens[0];
    if (key == "face") {
      BoundaryFace f;
      f.normal = parse_vec3(path, line, 1);
      f.offset = parse_num(path, line, 4);
      const double n = f.normal.norm();
      if (std::abs(n - 1.0) > 1e-9) fail(path, line.number, "face normal must be unit length");
      f.normal /= n;
      env.boundary.faces.push_back(f);
    } else if (key == "box") {
      OrientedBox box;
      size_t idx = 1;
      if (keyword_at(line, idx, "id")) {
        box.id = expect(path, line, idx + 1, "box id");
        idx += 2;
      }
      if (!keyword_at(line, idx, "center")) fail(path, line.number, "expected 'center'");
      box.center = parse_vec3(path, line, idx + 1);
      idx += 4;
      if (!keyword_at(line, idx, "half_extent")) fail(path, line.number, "expected 'half_extent'");
      box.half_extents = parse_vec3(path, line, idx + 1);
      idx += 4;
      if (keyword_at(line, idx, "rpy")) {
        const Vec3 a = parse_vec3(path, line, idx + 1);
        box.orientation = rot_rpy(a.x(), a.y(), a.z());
        idx += 4;
      }
      int level = 1;
      if (keyword_at(line, idx, "level")) level = static_cast<int>(parse_num(path, line, idx + 1));
      env.boxes.push_back(std::move(box));
      env.box_levels.push_back(level);
    } else if (key == "sphere") {
      ObstacleSphere s;
      size_t idx = 1;
      if (keyword_at(line, idx, "id")) {
        s.source_id = expect(path, line, idx + 1, "sphere id");
        idx += 2;
      }
      if (!keyword_at(line, idx, "center")) fail(path, line.number, "expected 'center'");
      s.center = parse_vec3(path, line, idx + 1);
      idx += 4;
      if (!keyword_at(line, idx, "radius")) fail(path, line.number, "expected 'radius'");
      s.radius = parse_num(path, line, idx + 1);
      if (s.radius <= 0.0) fail(path, line.number, "sphere radius must be positive");
      env.raw_spheres.push_back(std::move(s));
    } else {
      fail(path, line.number, "unknown directive '" + key + "'");
    }
  }
  return env;
}

void write_environment(const fs::path& path, const EnvironmentData& env) {
  std::ofstream out(path);
  out << "modqp-env v1\n";
  for (const auto& f : env.boundary.faces) {
    out << "face " << fmt(f.normal.x()) << " " << fmt(f.normal.y()) << " " << fmt(f.normal.z())
        << " " << fmt(f.offset) << "\n";
  }
  for (size_t i = 0; i < env.boxes.size(); ++i) {
    const auto& b = env.boxes[i];
    const Vec3 a = rpy_of(b.orientation);
    out << "box id " << (b.id.empty() ? "box" + std::to_string(i) : b.id) << " center "
        << fmt(b.center.x()) << " " << fmt(b.center.y()) << " " << fmt(b.center.z())
        << " half_extent " << fmt(b.half_extents.x()) << " " << fmt(b.half_extents.y()) << " "
        << fmt(b.half_extents.z()) << " rpy " << fmt(a.x()) << " " << fmt(a.y()) << " "
        << fmt(a.z()) << " level " << env.box_levels[i] << "\n";
  }
  for (const auto& s : env.raw_spheres) {
    out << "sphere id " << s.source_id << " center " << fmt(s.center.x()) << " "
        << fmt(s.center.y()) << " " << fmt(s.center.z()) << " radius " << fmt(s.radius) << "\n";
  }
}

Scenario load_scenario(const fs::path& path) {
  Scenario sc;
  const fs::path base_dir = path.parent_path();
  bool have_library = false;
  for (const auto& line : read_lines(path, "modqp-scenario v1")) {
    const std::string& key = line.tokens[0];
    if (key == "modules") {
      sc.library = load_module_library(base_dir / expect(path, line, 1, "module directory"));
      have_library = true;
    } else if (key == "config") {
      sc.config = load_config(base_dir / expect(path, line, 1, "config path"));
    } else if (key == "env") {
      EnvironmentData env = load_environment(base_dir / expect(path, line, 1, "env path"));
      sc.boundary = std::move(env.boundary);
      sc.obstacle_boxes = std::move(env.boxes);
      sc.box_levels = std::move(env.box_levels);
      sc.raw_spheres = std::move(env.raw_spheres);
    } else if (key == "mode") {
      const std::string& mode = expect(path, line, 1, "mode");
      if (mode == "hard") {
        sc.tuning.mode = ControlMode::kHardEquality;
      } else if (mode == "soft") {
        sc.tuning.mode = ControlMode::kSequentialSoft;
      } else {
        fail(path, line.number, "mode must be 'hard' or 'soft'");
      }
    } else if (key == "dt") {
      sc.tuning.dt = parse_num(path, line, 1);
    } else if (key == "epsilon") {
      sc.tuning.epsilon = parse_num(path, line, 1);
    } else if (key == "lambda") {
      sc.tuning.lambda = parse_num(path, line, 1);
    } else if (key == "mu") {
      sc.tuning.mu = parse_num(path, line, 1);
    } else if (key == "gamma_max") {
      sc.tuning.gamma_max = parse_num(path, line, 1);
    } else if (key == "d_min") {
      sc.tuning.d_min = parse_num(path, line, 1);
    } else if (key == "contact_eps") {
      sc.tuning.contact_eps = parse_num(path, line, 1);
    } else if (key == "step_budget") {
      sc.step_budget = static_cast<int>(parse_num(path, line, 1));
    } else if (key == "init") {
      const std::string& ref = expect(path, line, 1, "module.joint");
      const auto dot = ref.find('.');
      if (dot == std::string::npos) fail(path, line.number, "init expects <module>.<joint>");
      sc.initial_theta[{ref.substr(0, dot), ref.substr(dot + 1)}] = parse_num(path, line, 2);
    } else if (key == "goal") {
      sc.goal_frames.push_back(expect(path, line, 1, "goal frame"));
      size_t idx = 2;
      if (!keyword_at(line, idx, "gain")) fail(path, line.number, "expected 'gain'");
      sc.tuning.gains.push_back(parse_vec3(path, line, idx + 1));
      idx += 4;
      GoalTrajectory tr;
      if (keyword_at(line, idx, "dest")) {
        tr.waypoints.emplace_back(0.0, parse_vec3(path, line, idx + 1));
      } else {
        while (keyword_at(line, idx, "waypoint")) {
          const double t = parse_num(path, line, idx + 1);
          tr.waypoints.emplace_back(t, parse_vec3(path, line, idx + 2));
          idx += 5;
        }
        if (tr.waypoints.empty()) fail(path, line.number, "goal needs 'dest' or 'waypoint's");
        for (size_t i = 1; i < tr.waypoints.size(); ++i) {
          if (!(tr.waypoints[i - 1].first < tr.waypoints[i].first)) {
            fail(path, line.number, "waypoint times must be strictly increasing");
          }
        }
      }
      sc.goal_trajectories.push_back(std::move(tr));
    } else {
      fail(path, line.number, "unknown directive '" + key + "'");
    }
  }
  if (!have_library) throw LoadError(path.string() + ": missing 'modules' directive");
  if (sc.config.modules.empty()) throw LoadError(path.string() + ": missing or empty config");
  if (sc.goal_frames.empty()) throw LoadError(path.string() + ": scenario declares no goals");

  // Cross-reference validation: building the graph checks kinds,
  // connections, and tree topology; then check goal frames and boundary.
  KinematicsGraph gk;
  try {
    gk = KinematicsGraph::Build(sc.config, sc.library);
  } catch (const std::exception& e) {
    throw LoadError(path.string() + ": " + e.what());
  }
  for (const auto& f : sc.goal_frames) {
    if (!gk.has_frame(f)) throw LoadError(path.string() + ": unknown goal frame '" + f + "'");
  }
  if (!sc.boundary.faces.empty() && !sc.boundary.contains(sc.config.base.world.p)) {
    throw LoadError(path.string() + ": boundary region does not contain the base attachment");
  }
  for (const auto& [ref, _] : sc.initial_theta) {
    gk.joint_info(ref);  // throws on unknown joints
  }
  return sc;
}

void write_scenario(const fs::path& dir, const Scenario& sc) {
  fs::create_directories(dir / "modules");
  for (const auto& kind : sc.library.kinds()) {
    write_module_descriptor(dir / "modules" / (kind + ".mod"), sc.library.get(kind));
  }
  write_config(dir / "config.cfg", sc.config);
  EnvironmentData env{sc.boundary, sc.obstacle_boxes, sc.box_levels, sc.raw_spheres};
  write_environment(dir / "environment.env", env);

  std::ofstream out(dir / "normalized.scn");
  out << "modqp-scenario v1\n";
  out << "modules modules\n";
  out << "config config.cfg\n";
  out << "env environment.env\n";
  out << "mode " << (sc.tuning.mode == ControlMode::kHardEquality ? "hard" : "soft") << "\n";
  out << "dt " << fmt(sc.tuning.dt) << "\n";
  out << "epsilon " << fmt(sc.tuning.epsilon) << "\n";
  out << "lambda " << fmt(sc.tuning.lambda) << "\n";
  out << "mu " << fmt(sc.tuning.mu) << "\n";
  out << "gamma_max " << fmt(sc.tuning.gamma_max) << "\n";
  out << "d_min " << fmt(sc.tuning.d_min) << "\n";
  out << "contact_eps " << fmt(sc.tuning.contact_eps) << "\n";
  out << "step_budget " << sc.step_budget << "\n";
  for (const auto& [ref, v] : sc.initial_theta) {
    out << "init " << ref.str() << " " << fmt(v) << "\n";
  }
  for (size_t i = 0; i < sc.goal_frames.size(); ++i) {
    const Vec3& g = sc.tuning.gains[i];
    out << "goal " << sc.goal_frames[i] << " gain " << fmt(g.x()) << " " << fmt(g.y()) << " "
        << fmt(g.z());
    const auto& tr = sc.goal_trajectories[i];
    if (tr.destination_only()) {
      const Vec3& p = tr.waypoints[0].second;
      out << " dest " << fmt(p.x()) << " " << fmt(p.y()) << " " << fmt(p.z());
    } else {
      for (const auto& [t, p] : tr.waypoints) {
        out << " waypoint " << fmt(t) << " " << fmt(p.x()) << " " << fmt(p.y()) << " "
            << fmt(p.z());
      }
    }
    out << "\n";
  }
}

void write_trajectory_csv(const fs::path& path, const RunResult& result,
                          const std::vector<JointRef>& joints,
                          const std::vector<std::string>& goal_frames,
                          const std::vector<ConfigModule>& modules) {
  std::ofstream out(path);
  out << "t";
  for (const auto& j : joints) out << ",theta_" << j.str();
  for (const auto& j : joints) out << ",thetadot_" << j.str();
  for (const auto& g : goal_frames) out << ",p_" << g << "_x,p_" << g << "_y,p_" << g << "_z";
  out << ",min_margin_boundary,min_margin_obstacle,min_margin_repulsive";
  for (const auto& m : modules) out << ",kept_" << m.id;
  out << ",status\n";

  auto min_margin = [](const StepRecord& rec, RowKind kind) {
    double v = kInf;
    for (size_t i = 0; i < rec.margins.size(); ++i) {
      if (rec.margin_kinds[i] == kind) v = std::min(v, rec.margins[i]);
    }
    return v;
  };

  for (const auto& rec : result.log.records) {
    out << fmt9(rec.t);
    for (int k = 0; k < rec.theta.size(); ++k) out << "," << fmt9(rec.theta[k]);
    for (int k = 0; k < rec.theta_dot.size(); ++k) out << "," << fmt9(rec.theta_dot[k]);
    for (const auto& p : rec.goal_positions) {
      out << "," << fmt9(p.x()) << "," << fmt9(p.y()) << "," << fmt9(p.z());
    }
    for (RowKind kind : {RowKind::kBoundary, RowKind::kObstacle, RowKind::kRepulsive}) {
      const double v = min_margin(rec, kind);
      out << "," << (v == kInf ? "inf" : fmt9(v));
    }
    for (int c : rec.kept_counts) out << "," << c;
    out << "," << to_string(rec.status) << "\n";
  }
}

ParsedTrajectory read_trajectory_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw LoadError("cannot open '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) throw LoadError(path.string() + ": empty file");

  std::vector<std::string> cols;
  {
    std::istringstream iss(header);
    std::string c;
    while (std::getline(iss, c, ',')) cols.push_back(c);
  }
  int n_theta = 0, n_goals = 0, n_kept = 0;
  for (const auto& c : cols) {
    if (c.rfind("theta_", 0) == 0) ++n_theta;
    if (c.rfind("p_", 0) == 0) ++n_goals;
    if (c.rfind("kept_", 0) == 0) ++n_kept;
  }
  n_goals /= 3;

  ParsedTrajectory out;
  std::string row;
  while (std::getline(in, row)) {
    if (row.empty()) continue;
    std::vector<std::string> vals;
    std::istringstream iss(row);
    std::string v;
    while (std::getline(iss, v, ',')) vals.push_back(v);
    if (vals.size() != cols.size()) throw LoadError(path.string() + ": ragged row");
    size_t idx = 0;
    auto next_num = [&]() { return std::stod(vals[idx++]); };
    out.t.push_back(next_num());
    VecX theta(n_theta), theta_dot(n_theta);
    for (int k = 0; k < n_theta; ++k) theta[k] = next_num();
    for (int k = 0; k < n_theta; ++k) theta_dot[k] = next_num();
    out.theta.push_back(theta);
    out.theta_dot.push_back(theta_dot);
    std::vector<Vec3> goals;
    for (int g = 0; g < n_goals; ++g) {
      Vec3 p;
      p.x() = next_num();
      p.y() = next_num();
      p.z() = next_num();
      goals.push_back(p);
    }
    out.goal_positions.push_back(goals);
    idx += 3;  // margin columns
    std::vector<int> kept;
    for (int k = 0; k < n_kept; ++k) kept.push_back(static_cast<int>(next_num()));
    out.kept_counts.push_back(kept);
    out.status.push_back(vals[idx]);
  }
  return out;
}

void write_metrics(const fs::path& path, const RunResult& result, double wall_seconds) {
  double sum = 0.0, sumsq = 0.0, mx = 0.0;
  const size_t n = result.log.records.size();
  for (const auto& rec : result.log.records) {
    sum += rec.solve_time;
    sumsq += rec.solve_time * rec.solve_time;
    mx = std::max(mx, rec.solve_time);
  }
  const double mean = n > 0 ? sum / static_cast<double>(n) : 0.0;
  const double var = n > 0 ? std::max(0.0, sumsq / static_cast<double>(n) - mean * mean) : 0.0;
  std::ofstream out(path);
  out << "result " << (result.success ? "success" : "failure") << "\n";
  if (result.budget_exhausted) out << "budget_exhausted true\n";
  if (!result.failure.empty()) out << "failure " << result.failure << "\n";
  out << "steps " << n << "\n";
  out << "solve_time_mean_s " << fmt9(mean) << "\n";
  out << "solve_time_stddev_s " << fmt9(std::sqrt(var)) << "\n";
  out << "solve_time_max_s " << fmt9(mx) << "\n";
  out << "wall_time_s " << fmt9(wall_seconds) << "\n";
}

void write_qp_dump(const fs::path& path, const StepProgram& qp) {
  std::ofstream out(path);
  out << "modqp-qp v1\n";
  out << "n " << qp.n << "\n";
  auto dump_mat = [&](const std::string& name, const MatX& m) {
    out << name << " " << m.rows() << " " << m.cols() << "\n";
    for (int r = 0; r < m.rows(); ++r) {
      for (int c = 0; c < m.cols(); ++c) out << (c ? " " : "") << fmt(m(r, c));
      out << "\n";
    }
  };
  auto dump_vec = [&](const std::string& name, const VecX& v) {
    out << name << " " << v.size() << "\n";
    for (int k = 0; k < v.size(); ++k) out << (k ? " " : "") << fmt(v[k]);
    out << "\n";
  };
  dump_mat("H", qp.H);
  dump_vec("f", qp.f);
  dump_mat("A", qp.A);
  dump_vec("b", qp.b);
  dump_mat("G", qp.G);
  dump_vec("h", qp.h);
  dump_vec("lo", qp.lo);
  dump_vec("hi", qp.hi);
  out << "eq_rows";
  for (auto k : qp.eq_kinds) out << " " << to_string(k);
  out << "\nineq_rows";
  for (auto k : qp.ineq_kinds) out << " " << to_string(k);
  out << "\n";
}

}  // namespace modqp
