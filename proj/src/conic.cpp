// Copyright 2026 The stintopt Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "stintopt/conic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <Eigen/OrderingMethods>
#include <Eigen/SparseCholesky>

#include "stintopt/errors.hpp"

namespace stintopt {
namespace {

using Eigen::VectorXd;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStepFraction = 0.99;

// Layout of the cone product: orthant first, then second-order cones.
struct Cones {
  int orthant = 0;
  std::vector<int> dims;
  std::vector<int> offsets;
  int rows = 0;
  int degree = 0;

  explicit Cones(const ConicProblem& p) : orthant(p.n_orthant), dims(p.soc_dims) {
    int off = orthant;
    for (int d : dims) {
      offsets.push_back(off);
      off += d;
    }
    rows = off;
    degree = orthant + static_cast<int>(dims.size());
  }
};

double soc_residual(const VectorXd& u, int off, int d) {
  const double head = u[off];
  const double tail = u.segment(off + 1, d - 1).norm();
  return (head - tail) * (head + tail);
}

// Smallest eigenvalue-like margin of u: min over orthant entries and
// u0 - |u1| over cones.
double cone_margin(const VectorXd& u, const Cones& k) {
  double m = kInf;
  for (int i = 0; i < k.orthant; ++i) m = std::min(m, u[i]);
  for (std::size_t c = 0; c < k.dims.size(); ++c) {
    const int off = k.offsets[c];
    const int d = k.dims[c];
    m = std::min(m, u[off] - u.segment(off + 1, d - 1).norm());
  }
  return m;
}

void add_identity(VectorXd& u, const Cones& k, double alpha) {
  for (int i = 0; i < k.orthant; ++i) u[i] += alpha;
  for (int off : k.offsets) u[off] += alpha;
}

VectorXd jordan_product(const VectorXd& u, const VectorXd& v, const Cones& k) {
  VectorXd w(u.size());
  w.head(k.orthant) = u.head(k.orthant).cwiseProduct(v.head(k.orthant));
  for (std::size_t c = 0; c < k.dims.size(); ++c) {
    const int off = k.offsets[c];
    const int d = k.dims[c];
    w[off] = u.segment(off, d).dot(v.segment(off, d));
    w.segment(off + 1, d - 1) = u[off] * v.segment(off + 1, d - 1) +
                                v[off] * u.segment(off + 1, d - 1);
  }
  return w;
}

// Solves lambda o q = r for q.
VectorXd jordan_divide(const VectorXd& lambda, const VectorXd& r, const Cones& k) {
  VectorXd q(r.size());
  q.head(k.orthant) = r.head(k.orthant).cwiseQuotient(lambda.head(k.orthant));
  for (std::size_t c = 0; c < k.dims.size(); ++c) {
    const int off = k.offsets[c];
    const int d = k.dims[c];
    const auto l1 = lambda.segment(off + 1, d - 1);
    const auto r1 = r.segment(off + 1, d - 1);
    const double l0 = lambda[off];
    const double q0 = (l0 * r[off] - l1.dot(r1)) / soc_residual(lambda, off, d);
    q[off] = q0;
    q.segment(off + 1, d - 1) = (r1 - q0 * l1) / l0;
  }
  return q;
}

// Largest alpha with u + alpha*du in the cone (u interior); kInf if none.
double max_step(const VectorXd& u, const VectorXd& du, const Cones& k) {
  double alpha = kInf;
  for (int i = 0; i < k.orthant; ++i) {
    if (du[i] < 0.0) alpha = std::min(alpha, -u[i] / du[i]);
  }
  for (std::size_t c = 0; c < k.dims.size(); ++c) {
    const int off = k.offsets[c];
    const int d = k.dims[c];
    const auto u1 = u.segment(off + 1, d - 1);
    const auto d1 = du.segment(off + 1, d - 1);
    // f(a) = (u0 + a d0)^2 - |u1 + a d1|^2 = qa a^2 + qb a + qc, f(0) > 0.
    const double qa = du[off] * du[off] - d1.squaredNorm();
    const double qb = 2.0 * (u[off] * du[off] - u1.dot(d1));
    const double qc = std::max(soc_residual(u, off, d), 0.0);
    double root = kInf;
    if (std::abs(qa) < 1e-300) {
      if (qb < 0.0) root = -qc / qb;
    } else {
      const double disc = qb * qb - 4.0 * qa * qc;
      if (disc >= 0.0) {
        const double sq = std::sqrt(disc);
        const double t = -0.5 * (qb + std::copysign(sq, qb));
        for (double r : {t / qa, t != 0.0 ? qc / t : kInf}) {
          if (r > 0.0) root = std::min(root, r);
        }
      }
    }
    // The head must also stay positive.
    if (du[off] < 0.0) root = std::min(root, -u[off] / du[off]);
    alpha = std::min(alpha, root);
  }
  return alpha;
}

// Nesterov-Todd scaling W with W z = W^{-1} s = lambda.
struct Scaling {
  VectorXd orth;  // sqrt(s/z)
  std::vector<Eigen::MatrixXd> W, Winv, W2;
  VectorXd lambda;

  void update(const VectorXd& s, const VectorXd& z, const Cones& k) {
    orth = (s.head(k.orthant).cwiseQuotient(z.head(k.orthant))).cwiseSqrt();
    lambda.resize(s.size());
    lambda.head(k.orthant) =
        (s.head(k.orthant).cwiseProduct(z.head(k.orthant))).cwiseSqrt();
    W.resize(k.dims.size());
    Winv.resize(k.dims.size());
    W2.resize(k.dims.size());
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
      const int off = k.offsets[c];
      const int d = k.dims[c];
      const double sres = std::sqrt(soc_residual(s, off, d));
      const double zres = std::sqrt(soc_residual(z, off, d));
      const VectorXd sb = s.segment(off, d) / sres;
      const VectorXd zb = z.segment(off, d) / zres;
      const double gamma = std::sqrt(0.5 * (1.0 + sb.dot(zb)));
      VectorXd wb(d);
      wb[0] = (sb[0] + zb[0]) / (2.0 * gamma);
      wb.tail(d - 1) = (sb.tail(d - 1) - zb.tail(d - 1)) / (2.0 * gamma);
      const double eta = std::sqrt(sres / zres);
      const auto w1 = wb.tail(d - 1);
      Eigen::MatrixXd inner = Eigen::MatrixXd::Identity(d - 1, d - 1) +
                              w1 * w1.transpose() / (1.0 + wb[0]);
      Eigen::MatrixXd w(d, d), wi(d, d);
      w(0, 0) = wb[0];
      w.block(1, 0, d - 1, 1) = w1;
      w.block(0, 1, 1, d - 1) = w1.transpose();
      w.block(1, 1, d - 1, d - 1) = inner;
      wi = w;
      wi.block(1, 0, d - 1, 1) = -w1;
      wi.block(0, 1, 1, d - 1) = -w1.transpose();
      W[c] = eta * w;
      Winv[c] = wi / eta;
      W2[c] = W[c] * W[c];
      lambda.segment(off, d) = W[c] * z.segment(off, d);
    }
  }

  VectorXd apply(const VectorXd& v, const Cones& k, bool inverse) const {
    VectorXd out(v.size());
    if (inverse) {
      out.head(k.orthant) = v.head(k.orthant).cwiseQuotient(orth);
    } else {
      out.head(k.orthant) = v.head(k.orthant).cwiseProduct(orth);
    }
    for (std::size_t c = 0; c < k.dims.size(); ++c) {
      const int off = k.offsets[c];
      const int d = k.dims[c];
      out.segment(off, d) = (inverse ? Winv[c] : W[c]) * v.segment(off, d);
    }
    return out;
  }
};

// Quasi-definite KKT system
//   [ dI   A'    G'        ]
//   [ A   -dI    0         ]
//   [ G    0   -W^2 - dI   ]
// stored as its lower triangle with a fixed sparsity pattern. Solves are
// refined against the unregularized matrix.
class KktSystem {
 public:
  KktSystem(const SparseMatrix& A, const SparseMatrix& G, const Cones& cones,
            double delta)
      : n_(static_cast<int>(A.cols())),
        p_(static_cast<int>(A.rows())),
        m_(static_cast<int>(G.rows())),
        delta_(delta),
        cones_(cones) {
    const int N = n_ + p_ + m_;
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(n_ + p_ + m_ + A.nonZeros() + G.nonZeros()) +
              9 * cones.dims.size());
    for (int j = 0; j < n_; ++j) t.emplace_back(j, j, delta_);
    for (int j = 0; j < A.outerSize(); ++j) {
      for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
        t.emplace_back(n_ + it.row(), j, it.value());
      }
    }
    for (int j = 0; j < G.outerSize(); ++j) {
      for (SparseMatrix::InnerIterator it(G, j); it; ++it) {
        t.emplace_back(n_ + p_ + it.row(), j, it.value());
      }
    }
    for (int i = 0; i < p_; ++i) t.emplace_back(n_ + i, n_ + i, -delta_);
    const int zo = n_ + p_;
    for (int i = 0; i < cones.orthant; ++i) t.emplace_back(zo + i, zo + i, -1.0);
    for (std::size_t c = 0; c < cones.dims.size(); ++c) {
      const int off = zo + cones.offsets[c];
      for (int j = 0; j < cones.dims[c]; ++j) {
        for (int i = j; i < cones.dims[c]; ++i) {
          t.emplace_back(off + i, off + j, i == j ? -1.0 : 0.0);
        }
      }
    }
    K_.resize(N, N);
    K_.setFromTriplets(t.begin(), t.end());
    K_.makeCompressed();

    // Value slots of the scaling block, in the order update() writes them.
    const auto slot = [&](int i, int j) {
      return static_cast<int>(&K_.coeffRef(i, j) - K_.valuePtr());
    };
    for (int i = 0; i < cones.orthant; ++i) slots_.push_back(slot(zo + i, zo + i));
    for (std::size_t c = 0; c < cones.dims.size(); ++c) {
      const int off = zo + cones.offsets[c];
      for (int j = 0; j < cones.dims[c]; ++j) {
        for (int i = j; i < cones.dims[c]; ++i) slots_.push_back(slot(off + i, off + j));
      }
    }
    solver_.analyzePattern(K_);
  }

  bool factor(const Scaling& sc) {
    double* v = K_.valuePtr();
    std::size_t idx = 0;
    for (int i = 0; i < cones_.orthant; ++i) {
      v[slots_[idx++]] = -sc.orth[i] * sc.orth[i] - delta_;
    }
    for (std::size_t c = 0; c < cones_.dims.size(); ++c) {
      const int d = cones_.dims[c];
      for (int j = 0; j < d; ++j) {
        for (int i = j; i < d; ++i) {
          v[slots_[idx++]] = -sc.W2[c](i, j) - (i == j ? delta_ : 0.0);
        }
      }
    }
    solver_.factorize(K_);
    return solver_.info() == Eigen::Success;
  }

  VectorXd solve(const VectorXd& rhs, int refinement) const {
    VectorXd u = solver_.solve(rhs);
    const double rnorm = std::max(1.0, rhs.lpNorm<Eigen::Infinity>());
    for (int it = 0; it < refinement; ++it) {
      const VectorXd r = rhs - multiply_unregularized(u);
      if (!(r.lpNorm<Eigen::Infinity>() > 1e-14 * rnorm)) break;
      u += solver_.solve(r);
    }
    return u;
  }

 private:
  VectorXd multiply_unregularized(const VectorXd& u) const {
    VectorXd out = K_.selfadjointView<Eigen::Lower>() * u;
    out.head(n_) -= delta_ * u.head(n_);
    out.tail(p_ + m_) += delta_ * u.tail(p_ + m_);
    return out;
  }

  int n_, p_, m_;
  double delta_;
  const Cones& cones_;
  SparseMatrix K_;
  std::vector<int> slots_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
};

// Ruiz equilibration of [A; G]. Rows of one second-order cone share a
// scale so the cone is preserved.
struct Equilibration {
  VectorXd col, row_eq, row_cone;
};

Equilibration equilibrate(SparseMatrix& A, SparseMatrix& G, const Cones& cones,
                          int passes) {
  const int n = static_cast<int>(A.cols());
  Equilibration e{VectorXd::Ones(n), VectorXd::Ones(A.rows()),
                  VectorXd::Ones(G.rows())};
  const auto clamp = [](double v) {
    return std::clamp(v > 0.0 ? 1.0 / std::sqrt(v) : 1.0, 1e-4, 1e4);
  };
  for (int pass = 0; pass < passes; ++pass) {
    VectorXd cmax = VectorXd::Zero(n);
    VectorXd rA = VectorXd::Zero(A.rows());
    VectorXd rG = VectorXd::Zero(G.rows());
    for (int j = 0; j < n; ++j) {
      for (SparseMatrix::InnerIterator it(A, j); it; ++it) {
        const double a = std::abs(it.value());
        cmax[j] = std::max(cmax[j], a);
        rA[it.row()] = std::max(rA[it.row()], a);
      }
      for (SparseMatrix::InnerIterator it(G, j); it; ++it) {
        const double a = std::abs(it.value());
        cmax[j] = std::max(cmax[j], a);
        rG[it.row()] = std::max(rG[it.row()], a);
      }
    }
    for (std::size_t c = 0; c < cones.dims.size(); ++c) {
      auto seg = rG.segment(cones.offsets[c], cones.dims[c]);
      seg.setConstant(seg.maxCoeff());
    }
    const VectorXd dc = cmax.unaryExpr(clamp);
    const VectorXd dA = rA.unaryExpr(clamp);
    const VectorXd dG = rG.unaryExpr(clamp);
    A = dA.asDiagonal() * A * dc.asDiagonal();
    G = dG.asDiagonal() * G * dc.asDiagonal();
    e.col = e.col.cwiseProduct(dc);
    e.row_eq = e.row_eq.cwiseProduct(dA);
    e.row_cone = e.row_cone.cwiseProduct(dG);
  }
  return e;
}

std::string dominant_family(const ConicProblem& p, const VectorXd& y,
                            const VectorXd& z) {
  if (p.eq_tags.empty() && p.cone_tags.empty()) return "";
  std::map<std::string, double> share;
  // Certificate: b'y + h'z < 0; the most negative family dominates.
  for (int i = 0; i < p.num_eq() && !p.eq_tags.empty(); ++i) {
    share[p.eq_tags[i]] += p.b[i] * y[i];
  }
  for (int i = 0; i < p.num_cone_rows() && !p.cone_tags.empty(); ++i) {
    share[p.cone_tags[i]] += p.h[i] * z[i];
  }
  std::string best;
  double most = kInf;
  for (const auto& [tag, v] : share) {
    if (v < most) {
      most = v;
      best = tag;
    }
  }
  return best;
}

}  // namespace

const char* to_string(ConicStatus status) {
  switch (status) {
    case ConicStatus::kOptimal: return "optimal";
    case ConicStatus::kOptimalInaccurate: return "optimal_inaccurate";
    case ConicStatus::kPrimalInfeasible: return "primal_infeasible";
    case ConicStatus::kDualInfeasible: return "dual_infeasible";
    case ConicStatus::kMaxIterations: return "max_iterations";
    case ConicStatus::kNumericalFailure: return "numerical_failure";
  }
  return "unknown";
}

void ConicProblem::validate() const {
  const auto n = c.size();
  if (A.cols() != n || G.cols() != n) {
    throw InputError("conic problem: A and G must have one column per variable");
  }
  if (A.rows() != b.size() || G.rows() != h.size()) {
    throw InputError("conic problem: right-hand side sizes do not match");
  }
  int rows = n_orthant;
  for (int d : soc_dims) {
    if (d < 2) throw InputError("conic problem: cone dimension below 2");
    rows += d;
  }
  if (n_orthant < 0 || rows != h.size()) {
    throw InputError("conic problem: cone dimensions do not cover G rows");
  }
  if ((!eq_tags.empty() && static_cast<Eigen::Index>(eq_tags.size()) != b.size()) ||
      (!cone_tags.empty() && static_cast<Eigen::Index>(cone_tags.size()) != h.size())) {
    throw InputError("conic problem: tag count mismatch");
  }
}

ConicResult solve_conic(const ConicProblem& problem, const ConicSettings& settings) {
  problem.validate();
  const Cones cones(problem);
  const int n = problem.num_vars();
  const int p = problem.num_eq();
  const int m = problem.num_cone_rows();

  SparseMatrix A = problem.A;
  SparseMatrix G = problem.G;
  const Equilibration eq = equilibrate(A, G, cones, settings.equilibration_passes);
  const VectorXd c = problem.c.cwiseProduct(eq.col);
  const VectorXd b = problem.b.cwiseProduct(eq.row_eq);
  const VectorXd h = problem.h.cwiseProduct(eq.row_cone);
  const SparseMatrix At = A.transpose();
  const SparseMatrix Gt = G.transpose();

  KktSystem kkt(A, G, cones, settings.static_regularization);
  Scaling sc;
  const auto assemble = [&](const VectorXd& r1, const VectorXd& r2,
                            const VectorXd& r3) {
    VectorXd r(n + p + m);
    r << r1, r2, r3;
    return r;
  };

  ConicResult result;
  const auto finish = [&](ConicStatus status, const VectorXd& x, const VectorXd& y,
                          const VectorXd& z, const VectorXd& s, double scale) {
    result.status = status;
    result.x = x.cwiseProduct(eq.col) / scale;
    result.y = y.cwiseProduct(eq.row_eq) / scale;
    result.z = z.cwiseProduct(eq.row_cone) / scale;
    result.s = s.cwiseQuotient(eq.row_cone) / scale;
    result.primal_objective = problem.c.dot(result.x);
    result.dual_objective = -problem.b.dot(result.y) - problem.h.dot(result.z);
    result.primal_residual = std::max(
        (problem.A * result.x - problem.b).lpNorm<Eigen::Infinity>(),
        (problem.G * result.x + result.s - problem.h).lpNorm<Eigen::Infinity>());
    result.dual_residual =
        (problem.A.transpose() * result.y + problem.G.transpose() * result.z +
         problem.c).lpNorm<Eigen::Infinity>();
    result.gap = result.s.dot(result.z);
    if (status == ConicStatus::kPrimalInfeasible) {
      result.infeasible_family = dominant_family(problem, result.y, result.z);
    }
    return result;
  };

  // Initial point: least-squares primal and dual estimates shifted into
  // the cone interior.
  sc.orth = VectorXd::Ones(cones.orthant);
  sc.W.clear();
  for (int d : cones.dims) {
    sc.W.push_back(Eigen::MatrixXd::Identity(d, d));
    sc.Winv.push_back(Eigen::MatrixXd::Identity(d, d));
    sc.W2.push_back(Eigen::MatrixXd::Identity(d, d));
  }
  if (!kkt.factor(sc)) {
    result.status = ConicStatus::kNumericalFailure;
    return result;
  }
  const VectorXd up = kkt.solve(assemble(VectorXd::Zero(n), b, h),
                                settings.refinement_steps);
  VectorXd x = up.head(n);
  VectorXd s = -up.tail(m);
  const VectorXd ud = kkt.solve(assemble(-c, VectorXd::Zero(p), VectorXd::Zero(m)),
                                settings.refinement_steps);
  VectorXd y = ud.segment(n, p);
  VectorXd z = ud.tail(m);
  for (VectorXd* v : {&s, &z}) {
    const double margin = cone_margin(*v, cones);
    if (margin <= 0.0) add_identity(*v, cones, 1.0 - margin);
  }
  double tau = 1.0;
  double kappa = 1.0;

  const double bnorm = std::max({1.0, b.norm(), h.norm()});
  const double cnorm = std::max(1.0, c.norm());
  const VectorXd rhs_u1_base = assemble(-c, b, h);

  // Best iterate meeting the relaxed tolerances, returned on stall.
  bool have_fallback = false;
  VectorXd fx, fy, fz, fs;
  double ftau = 1.0;

  for (int iter = 0; iter <= settings.max_iterations; ++iter) {
    result.iterations = iter;
    const VectorXd rx = At * y + Gt * z + c * tau;
    const VectorXd ry = A * x - b * tau;
    const VectorXd rz = s + G * x - h * tau;
    const double cx = c.dot(x);
    const double byhz = b.dot(y) + h.dot(z);
    const double rt = kappa + cx + byhz;

    const double pres = std::sqrt(ry.squaredNorm() + rz.squaredNorm()) / tau / bnorm;
    const double dres = rx.norm() / tau / cnorm;
    const double pcost = cx / tau;
    const double dcost = -byhz / tau;
    const double gap = s.dot(z) / (tau * tau);
    const double relgap = gap / std::max(1e-300, std::min(std::abs(pcost), std::abs(dcost)));
    const auto converged = [&](double ft, double at, double rt_) {
      return pres < ft && dres < ft && (gap < at || relgap < rt_);
    };
    if (converged(settings.feastol, settings.abstol, settings.reltol)) {
      return finish(ConicStatus::kOptimal, x, y, z, s, tau);
    }
    if (converged(settings.feastol_inaccurate, settings.abstol_inaccurate,
                  settings.reltol_inaccurate)) {
      have_fallback = true;
      fx = x; fy = y; fz = z; fs = s; ftau = tau;
    }
    const double hresx = (At * y + Gt * z).norm();
    if (byhz < 0.0 && hresx / -byhz < settings.feastol) {
      return finish(ConicStatus::kPrimalInfeasible, x, y, z, s, -byhz);
    }
    const double hresp = std::sqrt((A * x).squaredNorm() + (G * x + s).squaredNorm());
    if (cx < 0.0 && hresp / -cx < settings.feastol) {
      return finish(ConicStatus::kDualInfeasible, x, y, z, s, -cx);
    }
    if (iter == settings.max_iterations) break;

    sc.update(s, z, cones);
    if (!kkt.factor(sc)) break;
    const VectorXd u1 = kkt.solve(rhs_u1_base, settings.refinement_steps);
    const VectorXd x1 = u1.head(n), y1 = u1.segment(n, p), z1 = u1.tail(m);
    const double den_base = c.dot(x1) + b.dot(y1) + h.dot(z1);
    const double mu = (s.dot(z) + tau * kappa) / (cones.degree + 1);

    struct Direction {
      VectorXd dx, dy, dz, ds;
      double dtau, dkappa;
    };
    // Newton direction for centering sigma, complementarity target rc
    // (lambda o (W dz + W^{-1} ds) = rc) and d_kappa (tau dk + kappa dt).
    const auto direction = [&](double sigma, const VectorXd& rc, double dk) {
      const VectorXd q = jordan_divide(sc.lambda, rc, cones);
      const VectorXd Wq = sc.apply(q, cones, false);
      const VectorXd u0 = kkt.solve(
          assemble(-(1.0 - sigma) * rx, -(1.0 - sigma) * ry, -(1.0 - sigma) * rz - Wq),
          settings.refinement_steps);
      const VectorXd x0 = u0.head(n), y0 = u0.segment(n, p), z0 = u0.tail(m);
      Direction d;
      d.dtau = (-(1.0 - sigma) * rt - dk / tau -
                (c.dot(x0) + b.dot(y0) + h.dot(z0))) /
               (den_base - kappa / tau);
      d.dx = x0 + d.dtau * x1;
      d.dy = y0 + d.dtau * y1;
      d.dz = z0 + d.dtau * z1;
      const VectorXd Wdz = sc.apply(d.dz, cones, false);
      d.ds = sc.apply(q - Wdz, cones, false);
      d.dkappa = (dk - kappa * d.dtau) / tau;
      return d;
    };
    const auto step_length = [&](const Direction& d) {
      double a = std::min(max_step(s, d.ds, cones), max_step(z, d.dz, cones));
      if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
      if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
      return a;
    };

    const VectorXd ll = jordan_product(sc.lambda, sc.lambda, cones);
    const Direction aff = direction(0.0, -ll, -tau * kappa);
    const double a_aff = std::min(1.0, step_length(aff));
    const double sigma = std::clamp(std::pow(1.0 - a_aff, 3), 0.0, 1.0);

    VectorXd e = VectorXd::Zero(m);
    add_identity(e, cones, 1.0);
    const VectorXd corr = jordan_product(sc.apply(aff.ds, cones, true),
                                         sc.apply(aff.dz, cones, false), cones);
    const Direction d = direction(sigma, -ll - corr + sigma * mu * e,
                                  -tau * kappa - aff.dtau * aff.dkappa + sigma * mu);
    const double alpha = std::min(1.0, kStepFraction * step_length(d));
    if (!(alpha > 1e-10)) break;
    x += alpha * d.dx;
    y += alpha * d.dy;
    z += alpha * d.dz;
    s += alpha * d.ds;
    tau += alpha * d.dtau;
    kappa += alpha * d.dkappa;
  }
  if (have_fallback) {
    return finish(ConicStatus::kOptimalInaccurate, fx, fy, fz, fs, ftau);
  }
  finish(result.iterations >= settings.max_iterations ? ConicStatus::kMaxIterations
                                                      : ConicStatus::kNumericalFailure,
         x, y, z, s, tau);
  return result;
}

}  // namespace stintopt
