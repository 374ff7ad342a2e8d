#include "mdpalloc/lp.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "mdpalloc/errors.hpp"

namespace mdpalloc {

namespace {

thread_local LpCounters g_counters;

double sense_sign(Sense s) { return s == Sense::kMaximize ? -1.0 : 1.0; }

// Minimization form used by the tableau: min c^T z, M z = b, lo <= z <= hi,
// every lo finite. Each internal column remembers where it came from.
struct InternalLp {
  Eigen::MatrixXd m;
  Eigen::VectorXd b, c, lo, hi;
  std::vector<Index> aug;    // augmented index of the source variable
  std::vector<double> sign;  // z contributes sign * z to that variable
};

InternalLp to_internal(const LpProblem& p, const Eigen::MatrixXd& aug) {
  const Index n = p.num_vars();
  const Index meq = p.num_eq();
  const Index rows = p.num_rows();
  const double s = sense_sign(p.sense);
  std::vector<Index> cols;
  std::vector<double> signs, lo, hi, cost;
  auto push = [&](Index a, double sg, double l, double h, double c) {
    cols.push_back(a);
    signs.push_back(sg);
    lo.push_back(l);
    hi.push_back(h);
    cost.push_back(c);
  };
  for (Index j = 0; j < n; ++j) {
    const double l = p.lower(j), h = p.upper(j), c = s * p.objective(j);
    if (std::isfinite(l)) {
      push(j, 1.0, l, h, c);
    } else if (std::isfinite(h)) {
      push(j, -1.0, -h, kInf, -c);
    } else {
      push(j, 1.0, 0.0, kInf, c);
      push(j, -1.0, 0.0, kInf, -c);
    }
  }
  for (Index i = meq; i < rows; ++i) push(n + i, 1.0, 0.0, kInf, 0.0);

  InternalLp out;
  const Index nc = static_cast<Index>(cols.size());
  out.m.resize(rows, nc);
  for (Index k = 0; k < nc; ++k) out.m.col(k) = signs[k] * aug.col(cols[k]);
  out.b = augmented_rhs(p);
  out.c = Eigen::Map<Eigen::VectorXd>(cost.data(), nc);
  out.lo = Eigen::Map<Eigen::VectorXd>(lo.data(), nc);
  out.hi = Eigen::Map<Eigen::VectorXd>(hi.data(), nc);
  out.aug = std::move(cols);
  out.sign = std::move(signs);
  return out;
}

// Dense tableau over internal columns followed by one artificial per row.
class Tableau {
 public:
  Tableau(const InternalLp& lp, const SimplexOptions& opt, std::vector<double>& storage)
      : lp_(lp), opt_(opt), t_(storage) {}

  Index rows() const { return m_; }

  void init_cold() {
    m_ = lp_.m.rows();
    nint_ = lp_.m.cols();
    ncols_ = nint_ + m_;
    lo_.assign(ncols_, 0.0);
    hi_.assign(ncols_, kInf);
    val_.assign(ncols_, 0.0);
    pos_.assign(ncols_, -1);
    for (Index j = 0; j < nint_; ++j) {
      lo_[j] = lp_.lo(j);
      hi_[j] = lp_.hi(j);
      val_[j] = lo_[j];
    }
    Eigen::VectorXd resid = lp_.b - lp_.m * Eigen::Map<Eigen::VectorXd>(val_.data(), nint_);
    row_sign_.assign(m_, 1.0);
    for (Index i = 0; i < m_; ++i)
      if (resid(i) < 0) row_sign_[i] = -1.0;
    t_.assign(static_cast<std::size_t>(m_ * ncols_), 0.0);
    beta_.assign(m_, 0.0);
    basis_.assign(m_, 0);
    for (Index i = 0; i < m_; ++i) {
      double* row = &t_[i * ncols_];
      for (Index j = 0; j < nint_; ++j) row[j] = row_sign_[i] * lp_.m(i, j);
      row[nint_ + i] = 1.0;
      basis_[i] = nint_ + i;
      pos_[nint_ + i] = i;
      beta_[i] = std::abs(resid(i));
      val_[nint_ + i] = beta_[i];
    }
  }

  // Phase one: minimize the artificial sum. Returns the remaining infeasibility.
  double phase_one() {
    cost_.assign(ncols_, 0.0);
    for (Index i = 0; i < m_; ++i) cost_[nint_ + i] = 1.0;
    price();
    run();
    double w = 0.0;
    for (Index i = 0; i < m_; ++i)
      if (basis_[i] >= nint_) w += beta_[i];
    return w;
  }

  // Pivot zero-valued artificials out where possible and fix them at zero.
  void drop_artificials() {
    for (Index r = 0; r < m_; ++r) {
      if (basis_[r] < nint_) continue;
      const double* row = &t_[r * ncols_];
      Index best = -1;
      double best_abs = opt_.pivot_tol * 1e3;
      for (Index j = 0; j < nint_; ++j) {
        if (pos_[j] >= 0 || lo_[j] == hi_[j]) continue;
        if (std::abs(row[j]) > best_abs) {
          best_abs = std::abs(row[j]);
          best = j;
        }
      }
      if (best >= 0) {
        const Index leaving = basis_[r];
        const double entering_value = val_[best];
        pivot(r, best);
        val_[leaving] = 0.0;
        beta_[r] = entering_value;
      }
    }
    for (Index j = nint_; j < ncols_; ++j) {
      hi_[j] = 0.0;
      if (pos_[j] < 0) val_[j] = 0.0;
    }
  }

  void phase_two() {
    cost_.assign(ncols_, 0.0);
    for (Index j = 0; j < nint_; ++j) cost_[j] = lp_.c(j);
    price();
    run();
  }

  bool unbounded() const { return unbounded_; }
  std::int64_t iterations() const { return iterations_; }
  const std::vector<Index>& basis() const { return basis_; }
  Index num_internal() const { return nint_; }
  double value(Index j) const { return pos_[j] >= 0 ? beta_[pos_[j]] : val_[j]; }
  bool at_upper(Index j) const { return pos_[j] < 0 && val_[j] == hi_[j] && hi_[j] != lo_[j]; }
  double row_sign(Index i) const { return row_sign_[i]; }

  // Rebuild tableau rows and basic values from the current basis.
  void reinvert() {
    Eigen::MatrixXd full(m_, ncols_);
    full.leftCols(nint_) = lp_.m;
    full.rightCols(m_).setZero();
    for (Index i = 0; i < m_; ++i) full(i, nint_ + i) = row_sign_[i];
    Eigen::MatrixXd bm(m_, m_);
    for (Index i = 0; i < m_; ++i) bm.col(i) = full.col(basis_[i]);
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
    ++g_counters.factorizations;
    Eigen::MatrixXd tab = lu.solve(full);
    Eigen::VectorXd rhs = lp_.b;
    for (Index j = 0; j < ncols_; ++j)
      if (pos_[j] < 0 && val_[j] != 0.0) rhs -= val_[j] * full.col(j);
    Eigen::VectorXd xb = lu.solve(rhs);
    for (Index i = 0; i < m_; ++i) {
      for (Index j = 0; j < ncols_; ++j) t_[i * ncols_ + j] = tab(i, j);
      beta_[i] = xb(i);
    }
    price();
  }

  void run() {
    unbounded_ = false;
    int stalls = 0;
    bool bland = false;
    const std::int64_t limit =
        opt_.max_iterations > 0 ? opt_.max_iterations : 50 * (m_ + ncols_) + 10000;
    while (true) {
      if (iterations_ > limit) throw NumericalError("simplex iteration limit reached");
      // pricing
      Index q = -1;
      double best = 0.0;
      double dir = 0.0;
      for (Index j = 0; j < ncols_; ++j) {
        if (pos_[j] >= 0 || lo_[j] == hi_[j]) continue;
        const double dj = d_[j];
        double score = 0.0, dj_dir = 0.0;
        if (val_[j] == lo_[j]) {
          if (dj < -opt_.optimality_tol) {
            score = -dj;
            dj_dir = 1.0;
          }
        } else if (dj > opt_.optimality_tol) {
          score = dj;
          dj_dir = -1.0;
        }
        if (score <= 0.0) continue;
        if (bland) {
          q = j;
          dir = dj_dir;
          break;
        }
        if (score > best) {
          best = score;
          q = j;
          dir = dj_dir;
        }
      }
      if (q < 0) return;
      ++iterations_;

      // ratio test
      double tmin = hi_[q] - lo_[q];
      Index r = -1;
      bool to_upper = false;
      double rbest_abs = 0.0;
      for (Index i = 0; i < m_; ++i) {
        const double a = t_[i * ncols_ + q];
        if (std::abs(a) <= opt_.pivot_tol) continue;
        const double delta = -dir * a;
        const Index bi = basis_[i];
        double lim;
        bool up;
        if (delta < 0) {
          if (!std::isfinite(lo_[bi])) continue;
          lim = (beta_[i] - lo_[bi]) / -delta;
          up = false;
        } else {
          if (!std::isfinite(hi_[bi])) continue;
          lim = (hi_[bi] - beta_[i]) / delta;
          up = true;
        }
        if (lim < 0) lim = 0;
        bool take = false;
        if (r < 0) {
          take = lim <= tmin;
        } else if (lim < tmin - 1e-12) {
          take = true;
        } else if (lim <= tmin + 1e-12) {
          take = bland ? basis_[i] < basis_[r] : std::abs(a) > rbest_abs;
        }
        if (take) {
          tmin = std::min(tmin, lim);
          r = i;
          to_upper = up;
          rbest_abs = std::abs(a);
        }
      }
      if (!std::isfinite(tmin)) {
        unbounded_ = true;
        return;
      }
      const double range = hi_[q] - lo_[q];
      if (r >= 0 && range <= tmin) r = -1;  // prefer a bound flip
      const double t = r >= 0 ? tmin : range;

      if (t <= 1e-12) {
        if (++stalls > opt_.bland_after_stalls) bland = true;
      } else {
        stalls = 0;
        bland = false;
      }

      for (Index i = 0; i < m_; ++i) {
        const double a = t_[i * ncols_ + q];
        if (a != 0.0) beta_[i] -= dir * t * a;
      }
      if (r < 0) {
        val_[q] = dir > 0 ? hi_[q] : lo_[q];
        continue;
      }
      const Index leaving = basis_[r];
      const double entering_value = val_[q] + dir * t;
      pivot(r, q);
      val_[leaving] = to_upper ? hi_[leaving] : lo_[leaving];
      beta_[r] = entering_value;
    }
  }

 private:
  void price() {
    d_.assign(ncols_, 0.0);
    for (Index j = 0; j < ncols_; ++j) d_[j] = cost_[j];
    for (Index i = 0; i < m_; ++i) {
      const double cb = cost_[basis_[i]];
      if (cb == 0.0) continue;
      const double* row = &t_[i * ncols_];
      for (Index j = 0; j < ncols_; ++j) d_[j] -= cb * row[j];
    }
    for (Index i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  void pivot(Index r, Index q) {
    double* prow = &t_[r * ncols_];
    const double inv = 1.0 / prow[q];
    nz_.clear();
    for (Index j = 0; j < ncols_; ++j) {
      if (prow[j] != 0.0) {
        prow[j] *= inv;
        nz_.push_back(j);
      }
    }
    prow[q] = 1.0;
    for (Index i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* row = &t_[i * ncols_];
      const double f = row[q];
      if (f == 0.0) continue;
      for (Index j : nz_) row[j] -= f * prow[j];
      row[q] = 0.0;
    }
    const double fd = d_[q];
    if (fd != 0.0) {
      for (Index j : nz_) d_[j] -= fd * prow[j];
      d_[q] = 0.0;
    }
    pos_[basis_[r]] = -1;
    basis_[r] = q;
    pos_[q] = r;
  }

  const InternalLp& lp_;
  const SimplexOptions& opt_;
  std::vector<double>& t_;
  Index m_ = 0, nint_ = 0, ncols_ = 0;
  std::vector<double> lo_, hi_, val_, beta_, d_, cost_, row_sign_;
  std::vector<Index> pos_, basis_, nz_;
  bool unbounded_ = false;
  std::int64_t iterations_ = 0;
};

struct Recovered {
  Eigen::VectorXd xa;  // augmented primal
  Eigen::VectorXd y;
  double primal_violation = 0.0;
  double dual_violation = 0.0;
};

// Augmented primal/dual reconstruction from a basis via one LU solve.
Recovered recover(const LpProblem& p, const Eigen::MatrixXd& aug, const std::vector<Index>& basis,
                  const Eigen::VectorXd& nonbasic_values) {
  const Index na = aug.cols();
  const Index m = aug.rows();
  Eigen::MatrixXd bm(m, m);
  std::vector<char> is_basic(na, 0);
  for (Index i = 0; i < m; ++i) {
    bm.col(i) = aug.col(basis[i]);
    is_basic[basis[i]] = 1;
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
  ++g_counters.factorizations;
  Recovered out;
  out.xa = nonbasic_values;
  Eigen::VectorXd rhs = augmented_rhs(p);
  for (Index j = 0; j < na; ++j) {
    if (is_basic[j]) {
      out.xa(j) = 0.0;
    } else if (out.xa(j) != 0.0) {
      rhs -= out.xa(j) * aug.col(j);
    }
  }
  Eigen::VectorXd xb = lu.solve(rhs);
  for (Index i = 0; i < m; ++i) out.xa(basis[i]) = xb(i);
  const Eigen::VectorXd ca = augmented_cost(p);
  Eigen::VectorXd cb(m);
  for (Index i = 0; i < m; ++i) cb(i) = ca(basis[i]);
  out.y = lu.transpose().solve(cb);

  const Eigen::VectorXd lo = augmented_lower(p), hi = augmented_upper(p);
  const Eigen::VectorXd d = ca - aug.transpose() * out.y;
  const double s = sense_sign(p.sense);
  for (Index j = 0; j < na; ++j) {
    const double x = out.xa(j);
    const double scale = 1.0 + std::abs(x);
    if (std::isfinite(lo(j)))
      out.primal_violation = std::max(out.primal_violation, (lo(j) - x) / scale);
    if (std::isfinite(hi(j)))
      out.primal_violation = std::max(out.primal_violation, (x - hi(j)) / scale);
    if (is_basic[j] || lo(j) == hi(j)) continue;
    const double dj = s * d(j);
    // nonbasic at its lower bound needs dj >= 0, at the upper bound dj <= 0
    const bool at_lo = std::isfinite(lo(j)) && std::abs(x - lo(j)) <= 1e-12 * scale;
    const bool at_hi = std::isfinite(hi(j)) && std::abs(x - hi(j)) <= 1e-12 * scale;
    double viol = 0.0;
    if (at_lo)
      viol = std::max(0.0, -dj);
    else if (at_hi)
      viol = std::max(0.0, dj);
    else
      viol = std::abs(dj);
    out.dual_violation = std::max(out.dual_violation, viol / (1.0 + std::abs(ca(j))));
  }
  return out;
}

}  // namespace

LpProblem LpProblem::nonnegative(Index n, Sense sense) {
  LpProblem p;
  p.sense = sense;
  p.objective = Eigen::VectorXd::Zero(n);
  p.eq_matrix.resize(0, n);
  p.eq_rhs.resize(0);
  p.ineq_matrix.resize(0, n);
  p.ineq_rhs.resize(0);
  p.lower = Eigen::VectorXd::Zero(n);
  p.upper = Eigen::VectorXd::Constant(n, kInf);
  return p;
}

void LpProblem::validate() const {
  const Index n = num_vars();
  auto fail = [](const std::string& what) { throw InputError("LpProblem: " + what); };
  if (eq_matrix.cols() != n || ineq_matrix.cols() != n) fail("matrix column count mismatch");
  if (eq_rhs.size() != eq_matrix.rows()) fail("equality rhs size mismatch");
  if (ineq_rhs.size() != ineq_matrix.rows()) fail("inequality rhs size mismatch");
  if (lower.size() != n || upper.size() != n) fail("bound vector size mismatch");
  if (!objective.allFinite() || !eq_matrix.allFinite() || !ineq_matrix.allFinite() ||
      !eq_rhs.allFinite() || !ineq_rhs.allFinite())
    fail("non-finite entry");
  for (Index j = 0; j < n; ++j) {
    if (std::isnan(lower(j)) || std::isnan(upper(j))) fail("NaN bound");
    if (lower(j) > upper(j)) fail("lower bound exceeds upper bound");
    if (lower(j) == kInf || upper(j) == -kInf) fail("empty bound interval");
  }
}

std::string to_string(LpStatus s) {
  switch (s) {
    case LpStatus::kOptimal: return "optimal";
    case LpStatus::kInfeasible: return "infeasible";
    case LpStatus::kUnbounded: return "unbounded";
  }
  return "unknown";
}

std::string to_string(VerifyReason r) {
  switch (r) {
    case VerifyReason::kNone: return "none";
    case VerifyReason::kMalformed: return "malformed";
    case VerifyReason::kPrimalInfeasible: return "primal-infeasible";
    case VerifyReason::kDualInfeasible: return "dual-infeasible";
    case VerifyReason::kComplementarySlackness: return "complementary-slackness";
    case VerifyReason::kGap: return "gap";
  }
  return "unknown";
}

Eigen::MatrixXd augmented_matrix(const LpProblem& p) {
  const Index n = p.num_vars(), meq = p.num_eq(), m = p.num_rows();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, n + m);
  if (meq > 0) a.topLeftCorner(meq, n) = p.eq_matrix;
  if (m > meq) a.bottomLeftCorner(m - meq, n) = p.ineq_matrix;
  a.rightCols(m).setIdentity();
  return a;
}

Eigen::VectorXd augmented_rhs(const LpProblem& p) {
  Eigen::VectorXd b(p.num_rows());
  b << p.eq_rhs, p.ineq_rhs;
  return b;
}

Eigen::VectorXd augmented_lower(const LpProblem& p) {
  Eigen::VectorXd l(p.num_vars() + p.num_rows());
  l << p.lower, Eigen::VectorXd::Zero(p.num_rows());
  return l;
}

Eigen::VectorXd augmented_upper(const LpProblem& p) {
  Eigen::VectorXd u(p.num_vars() + p.num_rows());
  u << p.upper, Eigen::VectorXd::Zero(p.num_eq()), Eigen::VectorXd::Constant(p.num_ineq(), kInf);
  return u;
}

Eigen::VectorXd augmented_cost(const LpProblem& p) {
  Eigen::VectorXd c(p.num_vars() + p.num_rows());
  c << p.objective, Eigen::VectorXd::Zero(p.num_rows());
  return c;
}

SimplexSolver::SimplexSolver(SimplexOptions options) : options_(options) {}

LpSolution SimplexSolver::solve(const LpProblem& p) {
  p.validate();
  ++g_counters.simplex_runs;
  const Index n = p.num_vars();
  const Index m = p.num_rows();
  const Eigen::MatrixXd aug = augmented_matrix(p);
  const InternalLp lp = to_internal(p, aug);
  Tableau tab(lp, options_, tableau_);
  tab.init_cold();
  LpSolution sol;

  const double w = tab.phase_one();
  const double bscale = std::max(1.0, lp.b.lpNorm<Eigen::Infinity>());
  if (w > options_.infeasible_threshold * bscale) {
    last_iterations_ = tab.iterations();
    // Farkas ray from the phase-one duals, mapped back to the original rows.
    const Index nint = tab.num_internal();
    Eigen::MatrixXd bm(m, m);
    Eigen::VectorXd cb(m);
    for (Index i = 0; i < m; ++i) {
      const Index col = tab.basis()[i];
      if (col < nint) {
        for (Index k = 0; k < m; ++k) bm(k, i) = tab.row_sign(k) * lp.m(k, col);
        cb(i) = 0.0;
      } else {
        bm.col(i).setZero();
        bm(col - nint, i) = 1.0;
        cb(i) = 1.0;
      }
    }
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
    ++g_counters.factorizations;
    Eigen::VectorXd pi = lu.transpose().solve(cb);
    sol.status = LpStatus::kInfeasible;
    sol.dual.resize(m);
    for (Index i = 0; i < m; ++i) sol.dual(i) = tab.row_sign(i) * pi(i);
    return sol;
  }
  tab.drop_artificials();
  tab.phase_two();

  for (int attempt = 0;; ++attempt) {
    if (tab.unbounded()) {
      last_iterations_ = tab.iterations();
      sol.status = LpStatus::kUnbounded;
      return sol;
    }
    const Index nint = tab.num_internal();
    std::vector<Index> basis(m);
    std::unordered_set<Index> seen;
    for (Index i = 0; i < m; ++i) {
      const Index col = tab.basis()[i];
      basis[i] = col < nint ? lp.aug[col] : n + (col - nint);
      if (!seen.insert(basis[i]).second) throw NumericalError("simplex produced a repeated basis column");
    }
    Eigen::VectorXd nb = Eigen::VectorXd::Zero(n + m);
    for (Index k = 0; k < nint; ++k) nb(lp.aug[k]) += lp.sign[k] * tab.value(k);
    Recovered rec = recover(p, aug, basis, nb);
    const bool ok = rec.primal_violation <= 1e-7 && rec.dual_violation <= 1e-7;
    const bool clean = rec.primal_violation <= options_.feasibility_tol &&
                       rec.dual_violation <= options_.optimality_tol;
    if (clean || (ok && attempt >= 2)) {
      last_iterations_ = tab.iterations();
      sol.status = LpStatus::kOptimal;
      sol.primal = rec.xa.head(n);
      sol.dual = rec.y;
      sol.objective = p.objective.dot(sol.primal);
      sol.basis = std::move(basis);
      return sol;
    }
    if (attempt >= 3) {
      std::ostringstream os;
      os << "residuals not met after refactorization (primal " << rec.primal_violation << ", dual "
         << rec.dual_violation << ")";
      throw NumericalError(os.str());
    }
    tab.reinvert();
    tab.run();
  }
}

LpSolution solve_lp(const LpProblem& problem, const SimplexOptions& options) {
  SimplexSolver solver(options);
  return solver.solve(problem);
}

LpCounters lp_counters() { return g_counters; }

namespace {

Verdict reject(VerifyReason r, std::string detail) {
  Verdict v;
  v.accepted = false;
  v.reason = r;
  v.detail = std::move(detail);
  return v;
}

Verdict verify_infeasible(const LpProblem& p, const LpSolution& c, double tol) {
  const Index m = p.num_rows();
  if (c.dual.size() != m || !c.dual.allFinite())
    return reject(VerifyReason::kMalformed, "Farkas ray has wrong size or non-finite entries");
  const Eigen::MatrixXd aug = augmented_matrix(p);
  const Eigen::VectorXd g = aug.transpose() * c.dual;
  const Eigen::VectorXd lo = augmented_lower(p), hi = augmented_upper(p);
  const double yscale = std::max(1.0, c.dual.lpNorm<Eigen::Infinity>());
  double box_max = 0.0;
  for (Index j = 0; j < g.size(); ++j) {
    const double gj = std::abs(g(j)) <= 1e-9 * yscale ? 0.0 : g(j);
    if (gj == 0.0) continue;
    const double bound = gj > 0 ? hi(j) : lo(j);
    if (!std::isfinite(bound)) return reject(VerifyReason::kDualInfeasible, "Farkas ray unbounded over the box");
    box_max += gj * bound;
  }
  const double margin = c.dual.dot(augmented_rhs(p)) - box_max;
  if (margin <= tol * 1e-2 * yscale)
    return reject(VerifyReason::kGap, "Farkas ray does not certify infeasibility");
  Verdict v;
  v.accepted = true;
  v.reason = VerifyReason::kNone;
  return v;
}

Verdict verify_optimal(const LpProblem& p, const LpSolution& c, double tol) {
  const Index n = p.num_vars(), m = p.num_rows();
  if (c.primal.size() != n || c.dual.size() != m || static_cast<Index>(c.basis.size()) != m)
    return reject(VerifyReason::kMalformed, "solution dimensions do not match the problem");
  if (!c.primal.allFinite() || !c.dual.allFinite() || !std::isfinite(c.objective))
    return reject(VerifyReason::kMalformed, "non-finite entries");
  std::vector<char> is_basic(n + m, 0);
  for (Index b : c.basis) {
    if (b < 0 || b >= n + m || is_basic[b]) return reject(VerifyReason::kMalformed, "invalid basis index set");
    is_basic[b] = 1;
  }
  const Eigen::MatrixXd aug = augmented_matrix(p);
  Eigen::VectorXd xa(n + m);
  const Eigen::VectorXd rhs = augmented_rhs(p);
  const Eigen::VectorXd row_act = aug.leftCols(n) * c.primal;
  xa << c.primal, rhs - row_act;
  const Eigen::VectorXd lo = augmented_lower(p), hi = augmented_upper(p);
  const Eigen::VectorXd ca = augmented_cost(p);

  // one factorization of the claimed basis
  Eigen::MatrixXd bm(m, m);
  Eigen::VectorXd cb(m);
  for (Index i = 0; i < m; ++i) {
    bm.col(i) = aug.col(c.basis[i]);
    cb(i) = ca(c.basis[i]);
  }
  Eigen::FullPivLU<Eigen::MatrixXd> lu(bm);
  ++g_counters.factorizations;

  // primal feasibility
  const double xscale = 1.0 + c.primal.lpNorm<Eigen::Infinity>();
  for (Index j = 0; j < n + m; ++j) {
    const double t = tol * (j < n ? 1.0 + std::abs(xa(j)) : xscale + std::abs(rhs(j - n)));
    if (xa(j) < lo(j) - t || xa(j) > hi(j) + t) {
      std::ostringstream os;
      os << (j < n ? "variable " : "row ") << (j < n ? j : j - n) << " violates its bounds by "
         << std::max(lo(j) - xa(j), xa(j) - hi(j));
      return reject(VerifyReason::kPrimalInfeasible, os.str());
    }
  }

  if (m > 0 && !lu.isInvertible()) return reject(VerifyReason::kMalformed, "claimed basis is singular");
  const Eigen::VectorXd yb = m > 0 ? Eigen::VectorXd(lu.transpose().solve(cb)) : Eigen::VectorXd();
  const double yscale = 1.0 + yb.lpNorm<Eigen::Infinity>();
  if ((c.dual - yb).lpNorm<Eigen::Infinity>() > tol * yscale)
    return reject(VerifyReason::kDualInfeasible, "dual does not match the claimed basis");

  const double s = sense_sign(p.sense);
  const Eigen::VectorXd d = ca - aug.transpose() * c.dual;
  const double cscale = 1.0 + ca.lpNorm<Eigen::Infinity>() + yscale;
  for (Index j = 0; j < n + m; ++j) {
    const double dj = s * d(j);
    const bool bad = (dj < -tol * cscale && hi(j) == kInf) || (dj > tol * cscale && lo(j) == -kInf);
    if (bad) {
      std::ostringstream os;
      os << "reduced cost " << d(j) << " of augmented variable " << j << " has the wrong sign";
      return reject(VerifyReason::kDualInfeasible, os.str());
    }
  }
  for (Index j = 0; j < n + m; ++j) {
    const double dj = s * d(j);
    double slack = 0.0;
    if (dj > 0)
      slack = std::isfinite(lo(j)) ? xa(j) - lo(j) : 0.0;
    else if (dj < 0)
      slack = std::isfinite(hi(j)) ? hi(j) - xa(j) : 0.0;
    if (std::abs(slack * dj) > tol * (1.0 + std::abs(xa(j)))) {
      std::ostringstream os;
      os << "augmented variable " << j << " has x*d = " << slack * dj;
      return reject(VerifyReason::kComplementarySlackness, os.str());
    }
  }

  const double primal_obj = p.objective.dot(c.primal);
  double dual_obj = c.dual.dot(rhs);
  for (Index j = 0; j < n + m; ++j) {
    const double dj = s * d(j);
    if (dj == 0.0) continue;
    const double bound = dj > 0 ? lo(j) : hi(j);
    if (std::isfinite(bound)) dual_obj += d(j) * bound;
  }
  const double gscale = tol * (1.0 + std::abs(primal_obj));
  if (std::abs(c.objective - primal_obj) > gscale || std::abs(primal_obj - dual_obj) > gscale) {
    std::ostringstream os;
    os << "claimed " << c.objective << ", primal " << primal_obj << ", dual " << dual_obj;
    return reject(VerifyReason::kGap, os.str());
  }
  Verdict v;
  v.accepted = true;
  v.reason = VerifyReason::kNone;
  return v;
}

}  // namespace

Verdict verify_solution(const LpProblem& problem, const LpSolution& claimed, const VerifyOptions& options) {
  const LpCounters before = g_counters;
  Verdict v;
  try {
    problem.validate();
    switch (claimed.status) {
      case LpStatus::kOptimal: v = verify_optimal(problem, claimed, options.tol); break;
      case LpStatus::kInfeasible: v = verify_infeasible(problem, claimed, options.tol); break;
      case LpStatus::kUnbounded:
        v = reject(VerifyReason::kMalformed, "unbounded claims carry no certificate");
        break;
    }
  } catch (const std::exception& e) {
    v = reject(VerifyReason::kMalformed, e.what());
  }
  v.factorizations = g_counters.factorizations - before.factorizations;
  v.simplex_runs = g_counters.simplex_runs - before.simplex_runs;
  return v;
}

std::optional<LpSolution> adjacent_vertex(const LpProblem& p, const LpSolution& opt) {
  if (opt.status != LpStatus::kOptimal) return std::nullopt;
  const Index n = p.num_vars(), m = p.num_rows();
  const Eigen::MatrixXd aug = augmented_matrix(p);
  Eigen::VectorXd xa(n + m);
  xa << opt.primal, augmented_rhs(p) - aug.leftCols(n) * opt.primal;
  std::vector<char> is_basic(n + m, 0);
  Eigen::MatrixXd bm(m, m);
  for (Index i = 0; i < m; ++i) {
    is_basic[opt.basis[i]] = 1;
    bm.col(i) = aug.col(opt.basis[i]);
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
  const Eigen::VectorXd lo = augmented_lower(p), hi = augmented_upper(p);
  const Eigen::VectorXd d = augmented_cost(p) - aug.transpose() * opt.dual;
  for (Index j = 0; j < n + m; ++j) {
    if (is_basic[j] || std::abs(d(j)) <= 1e-7 || lo(j) == hi(j)) continue;
    const double dir = std::abs(xa(j) - lo(j)) <= 1e-9 ? 1.0 : -1.0;
    const Eigen::VectorXd col = lu.solve(aug.col(j));
    double t = hi(j) - lo(j);
    for (Index i = 0; i < m; ++i) {
      const double delta = -dir * col(i);
      const Index b = opt.basis[i];
      if (delta < -1e-12 && std::isfinite(lo(b))) t = std::min(t, (xa(b) - lo(b)) / -delta);
      if (delta > 1e-12 && std::isfinite(hi(b))) t = std::min(t, (hi(b) - xa(b)) / delta);
    }
    if (!std::isfinite(t) || t * std::abs(d(j)) <= 1e-4) continue;
    Eigen::VectorXd next = xa;
    next(j) += dir * t;
    for (Index i = 0; i < m; ++i) next(opt.basis[i]) -= dir * t * col(i);
    LpSolution out = opt;
    out.primal = next.head(n);
    out.objective = p.objective.dot(out.primal);
    return out;
  }
  return std::nullopt;
}

DualSimplex::DualSimplex(const LpProblem& p) {
  p.validate();
  n_ = p.num_vars();
  m_ = p.num_rows();
  sense_ = p.sense;
  const Eigen::MatrixXd aug = augmented_matrix(p);
  a_ = aug.sparseView();
  a_.makeCompressed();
  a_rows_ = a_;
  b_ = augmented_rhs(p);
  cost_ = sense_sign(p.sense) * augmented_cost(p);
  logical_lo_ = augmented_lower(p).tail(m_);
  logical_hi_ = augmented_upper(p).tail(m_);
}

std::shared_ptr<const RowMatrix> DualSimplex::invert(const std::vector<Index>& basis) const {
  if (static_cast<Index>(basis.size()) != m_) return nullptr;
  Eigen::MatrixXd bm = Eigen::MatrixXd::Zero(m_, m_);
  for (Index i = 0; i < m_; ++i) {
    if (basis[i] < 0 || basis[i] >= n_ + m_) return nullptr;
    for (Eigen::SparseMatrix<double>::InnerIterator it(a_, basis[i]); it; ++it) bm(it.row(), i) = it.value();
  }
  Eigen::PartialPivLU<Eigen::MatrixXd> lu(bm);
  if (m_ > 0 && !(lu.rcond() > 1e-12)) return nullptr;
  return std::make_shared<const RowMatrix>(lu.inverse());
}

namespace {

constexpr std::size_t kMaxEtaUpdates = 96;

// Basis inverse in product form: B^-1 = E_k ... E_1 * base.
struct ProductForm {
  std::shared_ptr<const RowMatrix> base;
  std::vector<std::shared_ptr<const EtaUpdate>> etas;

  void forward(Eigen::VectorXd& v) const {
    for (const auto& e : etas) {
      const double t = v(e->row) / e->column(e->row);
      if (t != 0.0) v.noalias() -= t * e->column;
      v(e->row) = t;
    }
  }
  // u^T E_k ... E_1, in place
  void backward(Eigen::VectorXd& u) const {
    for (auto it = etas.rbegin(); it != etas.rend(); ++it) {
      const EtaUpdate& e = **it;
      const double ur = u(e.row), wr = e.column(e.row);
      u(e.row) = (ur - (u.dot(e.column) - ur * wr)) / wr;
    }
  }
  Eigen::VectorXd solve_column(const Eigen::SparseMatrix<double>& a, Index j) const {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(base->rows());
    for (Eigen::SparseMatrix<double>::InnerIterator it(a, j); it; ++it) v += it.value() * base->col(it.row());
    forward(v);
    return v;
  }
  Eigen::VectorXd solve_dense(const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd v = *base * rhs;
    forward(v);
    return v;
  }
  Eigen::VectorXd solve_transposed(Eigen::VectorXd u) const {
    backward(u);
    return base->transpose() * u;
  }
  // Row r of B^-1; the transformed unit vector has at most |etas| + 1 nonzeros.
  Eigen::VectorXd row(Index r) const {
    const Index m = base->rows();
    Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
    u(r) = 1.0;
    backward(u);
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
    for (Index i = 0; i < m; ++i)
      if (u(i) != 0.0) out += u(i) * base->row(i).transpose();
    return out;
  }
  void collapse() {
    RowMatrix m = *base;
    for (const auto& e : etas) {
      const Eigen::RowVectorXd pivot = m.row(e->row) / e->column(e->row);
      for (Index i = 0; i < m.rows(); ++i)
        if (i != e->row && e->column(i) != 0.0) m.row(i) -= e->column(i) * pivot;
      m.row(e->row) = pivot;
    }
    base = std::make_shared<const RowMatrix>(std::move(m));
    etas.clear();
  }
};

}  // namespace

std::optional<LpSolution> DualSimplex::resolve(const Eigen::VectorXd& lower, const Eigen::VectorXd& upper,
                                               const WarmBasis& start, WarmBasis* optimal_out) const {
  if (lower.size() != n_ || upper.size() != n_) throw InputError("bound vectors do not match the problem");
  const Index nn = n_ + m_;
  if (static_cast<Index>(start.basis.size()) != m_) return std::nullopt;
  Eigen::VectorXd lo(nn), hi(nn);
  lo << lower, logical_lo_;
  hi << upper, logical_hi_;
  for (Index j = 0; j < n_; ++j)
    if (lo(j) > hi(j)) return LpSolution{};

  std::vector<Index> basis = start.basis;
  std::vector<Index> pos(nn, -1);
  for (Index i = 0; i < m_; ++i) {
    if (basis[i] < 0 || basis[i] >= nn || pos[basis[i]] >= 0) return std::nullopt;
    pos[basis[i]] = i;
  }
  ProductForm f;
  bool fresh = true;
  if (start.inverse && start.inverse->rows() == m_) {
    f.base = start.inverse;
    f.etas = start.updates;
    fresh = start.values.size() != nn || start.reduced.size() != nn;
  } else {
    f.base = invert(basis);
    if (!f.base) return std::nullopt;
  }

  const double cscale = 1.0 + (nn > 0 ? cost_.lpNorm<Eigen::Infinity>() : 0.0);
  const double dtol = 1e-7 * cscale;
  Eigen::VectorXd d(nn), x = Eigen::VectorXd::Zero(nn);

  auto reduced_costs = [&] {
    Eigen::VectorXd cb(m_);
    for (Index i = 0; i < m_; ++i) cb(i) = cost_(basis[i]);
    const Eigen::VectorXd y = f.solve_transposed(std::move(cb));
    d = cost_ - a_.transpose() * y;
    for (Index i = 0; i < m_; ++i) d(basis[i]) = 0.0;
    return y;
  };
  auto basic_values = [&] {
    for (Index i = 0; i < m_; ++i) x(basis[i]) = 0.0;
    const Eigen::VectorXd xb = f.solve_dense(b_ - a_ * x);
    for (Index i = 0; i < m_; ++i) x(basis[i]) = xb(i);
  };
  auto refactor = [&] {
    f.base = invert(basis);
    f.etas.clear();
    if (!f.base) return false;
    reduced_costs();
    basic_values();
    return true;
  };

  if (fresh) {
    reduced_costs();
  } else {
    x = start.values;
    d = start.reduced;
  }
  // nonbasic placement under the new bounds
  Eigen::VectorXd shift = Eigen::VectorXd::Zero(m_);
  bool shifted = false;
  for (Index j = 0; j < nn; ++j) {
    if (pos[j] >= 0) continue;
    const bool has_lo = std::isfinite(lo(j)), has_hi = std::isfinite(hi(j));
    double want;
    if (lo(j) == hi(j)) {
      want = lo(j);
    } else if (d(j) > dtol) {
      if (!has_lo) return std::nullopt;
      want = lo(j);
    } else if (d(j) < -dtol) {
      if (!has_hi) return std::nullopt;
      want = hi(j);
    } else if (!fresh && ((has_lo && x(j) == lo(j)) || (has_hi && x(j) == hi(j)))) {
      want = x(j);
    } else {
      want = has_lo ? lo(j) : (has_hi ? hi(j) : 0.0);
    }
    if (!fresh && want != x(j)) {
      for (Eigen::SparseMatrix<double>::InnerIterator it(a_, j); it; ++it) shift(it.row()) += it.value() * (want - x(j));
      shifted = true;
    }
    x(j) = want;
  }
  if (fresh) {
    basic_values();
  } else if (shifted) {
    const Eigen::VectorXd dxb = f.solve_dense(shift);
    for (Index i = 0; i < m_; ++i) x(basis[i]) -= dxb(i);
  }

  const Index max_iter = 20 * m_ + 200;
  Eigen::VectorXd alpha = Eigen::VectorXd::Zero(nn);
  std::vector<char> mark(nn, 0);
  std::vector<Index> touched;
  int mismatches = 0;
  for (Index iter = 0;; ++iter) {
    if (iter > max_iter) return std::nullopt;
    Index r = -1;
    double worst = 0.0, target = 0.0;
    for (Index i = 0; i < m_; ++i) {
      const Index j = basis[i];
      const double v = x(j);
      if (v < lo(j) - 1e-9 * (1.0 + std::abs(lo(j))) && lo(j) - v > worst) {
        worst = lo(j) - v;
        r = i;
        target = lo(j);
      } else if (v > hi(j) + 1e-9 * (1.0 + std::abs(hi(j))) && v - hi(j) > worst) {
        worst = v - hi(j);
        r = i;
        target = hi(j);
      }
    }
    if (r < 0) break;
    const Index leaving = basis[r];
    const double dir = x(leaving) < target ? 1.0 : -1.0;

    const Eigen::VectorXd rho = f.row(r);
    for (Index j : touched) {
      alpha(j) = 0.0;
      mark[j] = 0;
    }
    touched.clear();
    for (Index i = 0; i < m_; ++i) {
      const double ri = rho(i);
      if (ri == 0.0) continue;
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(a_rows_, i); it; ++it) {
        const Index j = it.col();
        if (!mark[j]) {
          mark[j] = 1;
          touched.push_back(j);
        }
        alpha(j) += ri * it.value();
      }
    }
    Index q = -1;
    double best_ratio = kInf, best_abs = 0.0;
    for (Index j : touched) {
      const double a = alpha(j);
      if (std::abs(a) <= 1e-9 || pos[j] >= 0 || lo(j) == hi(j)) continue;
      const bool free = !std::isfinite(lo(j)) && !std::isfinite(hi(j));
      double ratio;
      if (free)
        ratio = std::abs(d(j));
      else if (x(j) == lo(j) && a * dir < 0.0)
        ratio = std::max(0.0, d(j));
      else if (x(j) == hi(j) && a * dir > 0.0)
        ratio = std::max(0.0, -d(j));
      else
        continue;
      ratio /= std::abs(a);
      if (ratio < best_ratio - 1e-12 || (ratio <= best_ratio + 1e-12 && std::abs(a) > best_abs)) {
        best_ratio = ratio;
        best_abs = std::abs(a);
        q = j;
      }
    }
    if (q < 0) return LpSolution{};

    const double aq = alpha(q);
    Eigen::VectorXd w = f.solve_column(a_, q);
    if (std::abs(w(r) - aq) > 1e-7 * (1.0 + std::abs(aq))) {
      if (++mismatches > 2 || !refactor()) return std::nullopt;
      continue;
    }
    const double step = (x(leaving) - target) / aq;
    for (Index i = 0; i < m_; ++i) x(basis[i]) -= step * w(i);
    x(q) += step;
    x(leaving) = target;

    const double theta = d(q) / aq;
    for (Index j : touched) d(j) -= theta * alpha(j);
    for (Index i = 0; i < m_; ++i) d(basis[i]) = 0.0;
    d(leaving) = -theta;
    d(q) = 0.0;

    pos[leaving] = -1;
    pos[q] = r;
    basis[r] = q;
    f.etas.push_back(std::make_shared<const EtaUpdate>(EtaUpdate{r, std::move(w)}));
    if (f.etas.size() >= kMaxEtaUpdates) f.collapse();
  }

  // accept only a vertex that is primal and dual feasible on fresh numbers
  Eigen::VectorXd y = reduced_costs();
  const double bscale = 1.0 + (m_ > 0 ? b_.lpNorm<Eigen::Infinity>() : 0.0) + x.lpNorm<Eigen::Infinity>();
  if (m_ > 0 && (a_ * x - b_).lpNorm<Eigen::Infinity>() > 1e-9 * bscale) {
    if (!refactor()) return std::nullopt;
    if ((a_ * x - b_).lpNorm<Eigen::Infinity>() > 1e-9 * bscale) return std::nullopt;
    y = reduced_costs();
  }
  for (Index j = 0; j < nn; ++j) {
    const double t = 1e-7 * (1.0 + std::abs(x(j)));
    if (x(j) < lo(j) - t || x(j) > hi(j) + t) return std::nullopt;
    if (pos[j] >= 0 || lo(j) == hi(j)) continue;
    if ((d(j) < -dtol && x(j) != hi(j)) || (d(j) > dtol && x(j) != lo(j))) return std::nullopt;
  }

  const double s = sense_sign(sense_);
  LpSolution sol;
  sol.status = LpStatus::kOptimal;
  sol.primal = x.head(n_);
  sol.dual = s * y;
  sol.objective = s * cost_.head(n_).dot(sol.primal);
  sol.basis = basis;
  if (optimal_out) {
    optimal_out->basis = std::move(basis);
    optimal_out->inverse = std::move(f.base);
    optimal_out->updates = std::move(f.etas);
    optimal_out->values = std::move(x);
    optimal_out->reduced = std::move(d);
  }
  return sol;
}

}  // namespace mdpalloc
