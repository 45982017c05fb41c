#include "modqp/qp.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace modqp {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

std::string to_string(RowKind k) {
  switch (k) {
    case RowKind::kControlGoal: return "control-goal";
    case RowKind::kJointPosLimit: return "joint-pos-limit";
    case RowKind::kJointVelLimit: return "joint-vel-limit";
    case RowKind::kBoundary: return "boundary";
    case RowKind::kObstacle: return "obstacle";
    case RowKind::kRepulsive: return "repulsive";
  }
  return "?";
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::kOptimal: return "optimal";
    case SolveStatus::kInfeasible: return "infeasible";
    case SolveStatus::kMaxIterations: return "max-iterations";
  }
  return "?";
}

void control_rows(const std::vector<IndexedChain>& chains, const std::vector<MotionGoal>& goals,
                  const std::vector<Vec3>& gains, int n_global, MatX* M, VecX* rhs) {
  if (chains.size() != goals.size() || chains.size() != gains.size()) {
    throw std::invalid_argument("control_rows: one goal and gain per chain required");
  }
  const int rows = 3 * static_cast<int>(chains.size());
  *M = MatX::Zero(rows, n_global);
  *rhs = VecX::Zero(rows);
  for (size_t i = 0; i < chains.size(); ++i) {
    const ChainState& chain = *chains[i].chain;
    const Vec3 p = chain.position();
    const MatX local = point_velocity_map(p) * chain.jacobian();  // 3 x n_chain
    for (int c = 0; c < local.cols(); ++c) {
      M->block<3, 1>(3 * static_cast<int>(i), chains[i].global_cols[static_cast<size_t>(c)]) +=
          local.col(c);
    }
    rhs->segment<3>(3 * static_cast<int>(i)) =
        goals[i].velocity + gains[i].asDiagonal() * (goals[i].position - p);
  }
}

void limit_bounds(const VecX& theta, const std::vector<JointLimits>& limits,
                  const std::vector<std::string>& joint_names, double dt, VecX* lo, VecX* hi) {
  if (dt <= 0.0) throw std::invalid_argument("limit_bounds: dt must be positive");
  const int n = static_cast<int>(limits.size());
  *lo = VecX::Constant(n, -kInf);
  *hi = VecX::Constant(n, kInf);
  for (int k = 0; k < n; ++k) {
    const auto& lim = limits[static_cast<size_t>(k)];
    (*lo)[k] = std::max(lim.vel_min, (lim.pos_min - theta[k]) / dt);
    (*hi)[k] = std::min(lim.vel_max, (lim.pos_max - theta[k]) / dt);
    if ((*lo)[k] > (*hi)[k]) {
      throw std::runtime_error("joint '" + joint_names[static_cast<size_t>(k)] +
                               "' is outside its position range");
    }
  }
}

StepProgram assemble(const AssembleInputs& in, const TuningConfig& tuning) {
  StepProgram qp;
  qp.n = static_cast<int>(in.limits.size());

  limit_bounds(in.theta, in.limits, in.joint_names, tuning.dt, &qp.lo, &qp.hi);

  MatX M;
  VecX rhs;
  control_rows(in.chains, in.goals, tuning.gains, qp.n, &M, &rhs);

  if (tuning.mode == ControlMode::kHardEquality) {
    qp.H = MatX::Identity(qp.n, qp.n);
    qp.f = VecX::Zero(qp.n);
    qp.A = M;
    qp.b = rhs;
    qp.eq_kinds.assign(static_cast<size_t>(M.rows()), RowKind::kControlGoal);
  } else {
    qp.H = 2.0 * MatX::Identity(qp.n, qp.n) + 2.0 * tuning.lambda * M.transpose() * M;
    qp.f = -2.0 * tuning.lambda * M.transpose() * rhs;
    qp.A = MatX::Zero(0, qp.n);
    qp.b = VecX::Zero(0);
  }

  std::vector<VecX> rows;
  std::vector<double> bounds;
  std::vector<RowKind> kinds;

  for (const auto& body : in.bodies) {
    const Mat36 L = point_velocity_map(body.p);
    const MatX vel_map = L * body.J_global;  // 3 x n

    if (in.boundary != nullptr) {
      for (const auto& r : boundary_rows(body.p, body.radius, body.J_global, *in.boundary)) {
        rows.push_back(r.row);
        bounds.push_back(r.bound);
        kinds.push_back(RowKind::kBoundary);
      }
    }

    for (size_t k = 0; k < body.kept.size(); ++k) {
      const ObstaclePlane& plane = body.planes[k];
      const VecX a = (plane.normal.transpose() * vel_map).transpose();
      rows.push_back(a);
      bounds.push_back(plane.rhs);
      kinds.push_back(RowKind::kObstacle);

      if (tuning.mode == ControlMode::kSequentialSoft) {
        const double dist =
            (body.kept[k].center - body.p).norm() - body.kept[k].radius - body.radius;
        if (dist < tuning.d_min) {
          qp.H += 2.0 * tuning.mu * a * a.transpose();
        }
      }
    }

    for (const auto& s : body.contacts) {
      const Vec3 diff = s.center - body.p;
      const double dn = diff.norm();
      if (dn <= 0.0) continue;  // degenerate: module center at sphere center
      const Vec3 dir = diff / dn;
      const VecX a = (dir.transpose() * vel_map).transpose();
      const double gamma = std::min(0.25 * body.prev_speed, tuning.gamma_max);
      rows.push_back(a);
      bounds.push_back(-gamma);
      kinds.push_back(RowKind::kRepulsive);
    }
  }

  qp.G = MatX::Zero(static_cast<int>(rows.size()), qp.n);
  qp.h = VecX::Zero(static_cast<int>(rows.size()));
  for (size_t r = 0; r < rows.size(); ++r) {
    qp.G.row(static_cast<int>(r)) = rows[r].transpose();
    qp.h[static_cast<int>(r)] = bounds[r];
  }
  qp.ineq_kinds = std::move(kinds);
  return qp;
}

namespace {

// Internal constraint indexing for the dual active-set method:
// [0, meq): equalities; [meq, meq+mi): general rows of G; then finite
// upper bounds; then finite lower bounds. All inequalities are kept in
// the form n' x >= b.
struct ConstraintSet {
  MatX N;     // n x m normals
  VecX rhs;   // m
  int meq = 0;
  int mi = 0;
  std::vector<int> hi_var, lo_var;  // variable index per bound constraint
};

ConstraintSet build_constraints(const StepProgram& qp) {
  ConstraintSet cs;
  cs.meq = static_cast<int>(qp.A.rows());
  cs.mi = static_cast<int>(qp.G.rows());
  for (int k = 0; k < qp.n; ++k) {
    if (std::isfinite(qp.hi[k])) cs.hi_var.push_back(k);
  }
  for (int k = 0; k < qp.n; ++k) {
    if (std::isfinite(qp.lo[k])) cs.lo_var.push_back(k);
  }
  const int m = cs.meq + cs.mi + static_cast<int>(cs.hi_var.size() + cs.lo_var.size());
  cs.N = MatX::Zero(qp.n, m);
  cs.rhs = VecX::Zero(m);
  for (int j = 0; j < cs.meq; ++j) {
    cs.N.col(j) = qp.A.row(j).transpose();
    cs.rhs[j] = qp.b[j];
  }
  for (int j = 0; j < cs.mi; ++j) {
    cs.N.col(cs.meq + j) = -qp.G.row(j).transpose();
    cs.rhs[cs.meq + j] = -qp.h[j];
  }
  int col = cs.meq + cs.mi;
  for (int k : cs.hi_var) {
    cs.N(k, col) = -1.0;
    cs.rhs[col] = -qp.hi[k];
    ++col;
  }
  for (int k : cs.lo_var) {
    cs.N(k, col) = 1.0;
    cs.rhs[col] = qp.lo[k];
    ++col;
  }
  return cs;
}

}  // namespace

StepSolution solve(const StepProgram& qp, double tol, int max_iter) {
  const auto t_start = std::chrono::steady_clock::now();
  StepSolution sol;
  const int n = qp.n;

  Eigen::LLT<MatX> llt(qp.H);
  if (llt.info() != Eigen::Success) {
    throw std::invalid_argument("solve: Hessian is not positive definite");
  }

  const ConstraintSet cs = build_constraints(qp);
  const int m = static_cast<int>(cs.N.cols());

  VecX x = llt.solve(-qp.f);
  std::vector<int> active;          // internal constraint indices
  std::vector<double> sign;         // normal sign used at activation
  std::vector<double> u;            // multipliers in the working form
  int iters = 0;
  bool failed_max_iter = false;

  auto slack = [&](int j) { return cs.N.col(j).dot(x) - cs.rhs[j]; };

  auto finish_time = [&]() {
    sol.solve_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  };

  // Drives constraint p into the active set (or detects infeasibility /
  // iteration exhaustion). Returns false on failure.
  auto activate = [&](int p, double sgn) -> bool {
    VecX np = sgn * cs.N.col(p);
    double sp = sgn * slack(p);  // <= 0
    double up = 0.0;
    while (true) {
      if (++iters > max_iter) {
        failed_max_iter = true;
        return false;
      }
      const VecX y = llt.solve(np);
      const int q = static_cast<int>(active.size());
      VecX z = y, r;
      if (q > 0) {
        MatX Na(n, q);
        for (int k = 0; k < q; ++k) Na.col(k) = sign[static_cast<size_t>(k)] *
                                                cs.N.col(active[static_cast<size_t>(k)]);
        const MatX S = Na.transpose() * llt.solve(Na);
        r = S.ldlt().solve(Na.transpose() * y);
        z = y - llt.solve(Na * r);
      }
      // Partial step: first active inequality whose multiplier hits zero.
      double t1 = kInf;
      int drop = -1;
      for (int k = 0; k < q; ++k) {
        if (active[static_cast<size_t>(k)] < cs.meq) continue;  // equalities never dropped
        if (r.size() > 0 && r[k] > tol) {
          const double t = u[static_cast<size_t>(k)] / r[k];
          if (t < t1) {
            t1 = t;
            drop = k;
          }
        }
      }
      const double ztn = np.dot(z);
      const double t2 = (ztn > tol) ? -sp / ztn : kInf;
      if (!std::isfinite(t1) && !std::isfinite(t2)) {
        // No step direction left: p's normal is dependent on the active
        // set (or zero). If p already holds, it is redundant and can be
        // left inactive with a zero multiplier; otherwise infeasible.
        if (up == 0.0 && sp >= -std::max(tol, 1e-8 * (1.0 + std::abs(cs.rhs[p])))) return true;
        std::ostringstream oss;
        oss << "constraint " << p << " cannot be satisfied given the active set {";
        for (int a : active) oss << " " << a;
        oss << " } (Farkas direction in dual space)";
        sol.certificate = oss.str();
        return false;
      }
      const double t = std::min(t1, t2);
      if (std::isfinite(t2)) x += t * z;
      for (int k = 0; k < q; ++k) u[static_cast<size_t>(k)] -= t * (r.size() > 0 ? r[k] : 0.0);
      up += t;
      if (t == t2) {
        active.push_back(p);
        sign.push_back(sgn);
        u.push_back(up);
        return true;
      }
      sp += t * ztn;
      active.erase(active.begin() + drop);
      sign.erase(sign.begin() + drop);
      u.erase(u.begin() + drop);
    }
  };

  bool ok = true;
  // Equalities first, in order, regardless of violation.
  for (int j = 0; j < cs.meq && ok; ++j) {
    const double s = slack(j);
    ok = activate(j, s > 0 ? -1.0 : 1.0);
  }
  // Then the most violated inequality until none remains.
  while (ok) {
    int p = -1;
    double worst = tol;
    for (int j = cs.meq; j < m; ++j) {
      bool is_active = false;
      for (int a : active) {
        if (a == j) {
          is_active = true;
          break;
        }
      }
      if (is_active) continue;
      const double v = -slack(j);
      if (v > worst) {
        worst = v;
        p = j;
      }
    }
    if (p < 0) break;
    ok = activate(p, 1.0);
  }

  finish_time();
  if (!ok) {
    sol.status = failed_max_iter ? SolveStatus::kMaxIterations : SolveStatus::kInfeasible;
    sol.theta_dot = x;
    return sol;
  }

  sol.status = SolveStatus::kOptimal;
  sol.theta_dot = x;
  sol.eq_mult = VecX::Zero(cs.meq);
  sol.ineq_mult = VecX::Zero(cs.mi);
  sol.lo_mult = VecX::Zero(n);
  sol.hi_mult = VecX::Zero(n);
  const int hi_begin = cs.meq + cs.mi;
  const int lo_begin = hi_begin + static_cast<int>(cs.hi_var.size());
  for (size_t k = 0; k < active.size(); ++k) {
    const int j = active[k];
    if (j < cs.meq) {
      sol.eq_mult[j] = -u[k] * sign[k];
    } else if (j < hi_begin) {
      sol.ineq_mult[j - cs.meq] = u[k];
      if (u[k] > tol) sol.active_set.push_back(j - cs.meq);
    } else if (j < lo_begin) {
      sol.hi_mult[cs.hi_var[static_cast<size_t>(j - hi_begin)]] = u[k];
    } else {
      sol.lo_mult[cs.lo_var[static_cast<size_t>(j - lo_begin)]] = u[k];
    }
  }
  sol.kkt_residual = kkt_residual(qp, sol);
  return sol;
}

double kkt_residual(const StepProgram& qp, const StepSolution& sol) {
  const VecX& x = sol.theta_dot;
  VecX stat = qp.H * x + qp.f;
  if (qp.A.rows() > 0) stat += qp.A.transpose() * sol.eq_mult;
  if (qp.G.rows() > 0) stat += qp.G.transpose() * sol.ineq_mult;
  stat += sol.hi_mult - sol.lo_mult;
  double res = stat.cwiseAbs().maxCoeff();

  if (qp.A.rows() > 0) res = std::max(res, (qp.A * x - qp.b).cwiseAbs().maxCoeff());
  if (qp.G.rows() > 0) {
    const VecX slack = qp.G * x - qp.h;
    res = std::max(res, slack.cwiseMax(0.0).maxCoeff());
    res = std::max(res, sol.ineq_mult.cwiseProduct(slack).cwiseAbs().maxCoeff());
    res = std::max(res, (-sol.ineq_mult).maxCoeff());
  }
  for (int k = 0; k < qp.n; ++k) {
    if (std::isfinite(qp.hi[k])) {
      res = std::max(res, x[k] - qp.hi[k]);
      res = std::max(res, std::abs(sol.hi_mult[k] * (x[k] - qp.hi[k])));
    }
    if (std::isfinite(qp.lo[k])) {
      res = std::max(res, qp.lo[k] - x[k]);
      res = std::max(res, std::abs(sol.lo_mult[k] * (qp.lo[k] - x[k])));
    }
    res = std::max(res, -sol.hi_mult[k]);
    res = std::max(res, -sol.lo_mult[k]);
  }
  return std::max(res, 0.0);
}

}  // namespace modqp
