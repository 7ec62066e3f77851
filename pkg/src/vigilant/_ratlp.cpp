// Exact-rational two-phase primal simplex over GMP rationals.
//
// Pivot rule: Dantzig (largest reduced cost, lowest index on ties) with an
// automatic switch to Bland's rule after a run of degenerate pivots, which
// restores the anticycling termination guarantee. The leaving row is always
// chosen by the minimum-ratio test with ties broken by the lowest basic
// variable index. The pure-Python fallback in vigilant.lp mirrors this
// algorithm step for step, so both backends visit the same vertices.
//
// Exposed to Python as vigilant._ratlp.solve(). The Python module scales every
// constraint row to integers before calling in, and reconstructs Fractions
// from the (numerator, denominator) pairs returned here.

#include <pybind11/pybind11.h>

#include <gmpxx.h>

#include <stdexcept>
#include <utility>
#include <vector>

namespace py = pybind11;

namespace {

constexpr int STATUS_OPTIMAL = 0;
constexpr int STATUS_INFEASIBLE = 1;
constexpr int STATUS_UNBOUNDED = 2;
constexpr int STATUS_POSITIVE = 3;  // early exit: feasible point with objective > 0

void int_from_py(const py::handle& h, mpz_class& out) {
  int overflow = 0;
  long long v = PyLong_AsLongLongAndOverflow(h.ptr(), &overflow);
  if (overflow == 0) {
    if (v == -1 && PyErr_Occurred()) {
      PyErr_Clear();
    } else {
      out = static_cast<long>(v);
      return;
    }
  }
  std::string s = py::str(h);
  if (mpz_set_str(out.get_mpz_t(), s.c_str(), 10) != 0) {
    throw std::invalid_argument("expected an integer coefficient");
  }
}

py::object py_from_mpz(const mpz_class& v) {
  std::string s = v.get_str();
  PyObject* obj = PyLong_FromString(s.c_str(), nullptr, 10);
  if (obj == nullptr) {
    throw std::runtime_error("mpz -> int conversion failed");
  }
  return py::reinterpret_steal<py::object>(obj);
}

struct Tableau {
  int ncols = 0;
  std::vector<std::vector<mpq_class>> rows;
  std::vector<mpq_class> rhs;
  std::vector<int> basis;

  std::vector<mpq_class> red;  // reduced costs for the active phase
  mpq_class value;             // current objective value
  mpq_class threshold;         // stop_when_positive fires when value > threshold

  // row R -= f * P over P's nonzero columns nz, with fast paths for f = +-1.
  void eliminate(std::vector<mpq_class>& R, mpq_class& rrhs, const mpq_class& f,
                 const std::vector<mpq_class>& P, const mpq_class& prhs,
                 const std::vector<int>& nz, bool rhs_nz, mpq_t tmp) {
    if (f == 1) {
      for (int j : nz) mpq_sub(R[j].get_mpq_t(), R[j].get_mpq_t(), P[j].get_mpq_t());
      if (rhs_nz) mpq_sub(rrhs.get_mpq_t(), rrhs.get_mpq_t(), prhs.get_mpq_t());
    } else if (f == -1) {
      for (int j : nz) mpq_add(R[j].get_mpq_t(), R[j].get_mpq_t(), P[j].get_mpq_t());
      if (rhs_nz) mpq_add(rrhs.get_mpq_t(), rrhs.get_mpq_t(), prhs.get_mpq_t());
    } else {
      for (int j : nz) {
        mpq_mul(tmp, f.get_mpq_t(), P[j].get_mpq_t());
        mpq_sub(R[j].get_mpq_t(), R[j].get_mpq_t(), tmp);
      }
      if (rhs_nz) {
        mpq_mul(tmp, f.get_mpq_t(), prhs.get_mpq_t());
        mpq_sub(rrhs.get_mpq_t(), rrhs.get_mpq_t(), tmp);
      }
    }
  }

  void pivot(int prow, int pcol) {
    std::vector<mpq_class>& P = rows[prow];
    const mpq_class piv = P[pcol];
    if (piv != 1) {
      for (int j = 0; j < ncols; ++j) {
        if (P[j] != 0) P[j] /= piv;
      }
      rhs[prow] /= piv;
    }
    std::vector<int> nz;
    nz.reserve(ncols / 2);
    for (int j = 0; j < ncols; ++j) {
      if (P[j] != 0) nz.push_back(j);
    }
    const bool rhs_nz = (rhs[prow] != 0);
    mpq_t tmp;
    mpq_init(tmp);
    for (size_t r = 0; r < rows.size(); ++r) {
      if (static_cast<int>(r) == prow) continue;
      mpq_class f = rows[r][pcol];
      if (f == 0) continue;
      eliminate(rows[r], rhs[r], f, P, rhs[prow], nz, rhs_nz, tmp);
    }
    mpq_class f = red[pcol];
    if (f != 0) {
      if (rhs_nz) {
        mpq_mul(tmp, f.get_mpq_t(), rhs[prow].get_mpq_t());
        mpq_add(value.get_mpq_t(), value.get_mpq_t(), tmp);
      }
      for (int j : nz) {
        mpq_mul(tmp, f.get_mpq_t(), P[j].get_mpq_t());
        mpq_sub(red[j].get_mpq_t(), red[j].get_mpq_t(), tmp);
      }
    }
    mpq_clear(tmp);
    basis[prow] = pcol;
  }

  int entering_bland(int limit) const {
    for (int j = 0; j < limit; ++j) {
      if (red[j] > 0) return j;
    }
    return -1;
  }

  int entering_dantzig(int limit) const {
    int best = -1;
    for (int j = 0; j < limit; ++j) {
      if (red[j] > 0 && (best < 0 || red[j] > red[best])) best = j;
    }
    return best;
  }

  int leaving(int pcol) const {
    int best = -1;
    mpq_class best_ratio;
    for (size_t r = 0; r < rows.size(); ++r) {
      const mpq_class& a = rows[r][pcol];
      if (a <= 0) continue;
      mpq_class ratio = rhs[r] / a;
      if (best < 0 || ratio < best_ratio ||
          (ratio == best_ratio && basis[r] < basis[best])) {
        best = static_cast<int>(r);
        best_ratio = std::move(ratio);
      }
    }
    return best;
  }

  // Runs the current phase to optimality. Returns false when unbounded.
  // When stop_positive is set, stops as soon as value > 0.
  bool optimize(int limit, bool stop_positive) {
    bool bland = false;
    int degen = 0;
    const int degen_limit = 10 + static_cast<int>(rows.size());
    if (stop_positive && value > threshold) return true;
    while (true) {
      int pcol = bland ? entering_bland(limit) : entering_dantzig(limit);
      if (pcol < 0) return true;
      int prow = leaving(pcol);
      if (prow < 0) return false;
      mpq_class before = value;
      pivot(prow, pcol);
      if (value > before) {
        degen = 0;
        bland = false;
      } else if (++degen > degen_limit) {
        bland = true;
      }
      if (stop_positive && value > threshold) return true;
    }
  }
};

// rows: list of (terms, rel, rhs) with terms = list of (var, int coeff),
// rel in {-1: <=, 0: ==, +1: >=}, integer rhs. objective: list of (var, coeff).
py::tuple solve(int num_vars, const py::list& constraint_rows, const py::list& objective,
                bool stop_when_positive, const py::object& threshold_num,
                const py::object& threshold_den) {
  const int n_rows = static_cast<int>(constraint_rows.size());

  std::vector<std::vector<std::pair<int, mpz_class>>> terms(n_rows);
  std::vector<int> rels(n_rows);
  std::vector<mpz_class> rhs_in(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    py::tuple row = constraint_rows[r].cast<py::tuple>();
    py::list tlist = row[0].cast<py::list>();
    rels[r] = row[1].cast<int>();
    int_from_py(row[2], rhs_in[r]);
    for (const auto& t : tlist) {
      py::tuple vt = t.cast<py::tuple>();
      int var = vt[0].cast<int>();
      if (var < 0 || var >= num_vars) throw std::invalid_argument("variable index out of range");
      mpz_class coeff;
      int_from_py(vt[1], coeff);
      terms[r].emplace_back(var, std::move(coeff));
    }
  }

  int n_slack = 0;
  for (int r = 0; r < n_rows; ++r) {
    if (rels[r] != 0) ++n_slack;
  }

  Tableau t;
  {
    mpz_class tn, td;
    int_from_py(threshold_num, tn);
    int_from_py(threshold_den, td);
    t.threshold = mpq_class(tn) / mpq_class(td);
  }
  const int slack_start = num_vars;
  const int art_start = num_vars + n_slack;

  t.rows.assign(n_rows, {});
  t.rhs.assign(n_rows, mpq_class(0));
  t.basis.assign(n_rows, -1);
  int slack_idx = 0;
  int n_art = 0;
  std::vector<std::vector<mpq_class>> pending(n_rows);
  for (int r = 0; r < n_rows; ++r) {
    const bool negate_rel = (rels[r] == 1);  // >= becomes <= before the slack
    mpq_class b(rhs_in[r]);
    if (negate_rel) b = -b;
    std::vector<mpq_class> row(art_start, mpq_class(0));
    for (const auto& [var, coeff] : terms[r]) {
      mpq_class c(coeff);
      if (negate_rel) c = -c;
      row[var] += c;
    }
    int my_slack = -1;
    if (rels[r] != 0) {
      my_slack = slack_start + slack_idx++;
      row[my_slack] = 1;
    }
    if (b < 0) {
      for (auto& v : row) v = -v;
      b = -b;
      my_slack = -1;  // slack flipped to -1, unusable as an initial basis
    }
    if (my_slack >= 0) {
      t.basis[r] = my_slack;
    } else {
      t.basis[r] = -1;
      ++n_art;
    }
    pending[r] = std::move(row);
    t.rhs[r] = std::move(b);
  }

  t.ncols = art_start + n_art;
  int art_idx = 0;
  for (int r = 0; r < n_rows; ++r) {
    pending[r].resize(t.ncols, mpq_class(0));
    if (t.basis[r] < 0) {
      int a = art_start + art_idx++;
      pending[r][a] = 1;
      t.basis[r] = a;
    }
    t.rows[r] = std::move(pending[r]);
  }

  // Phase 1: maximize -(sum of artificials); feasible iff the optimum is 0.
  if (n_art > 0) {
    t.red.assign(t.ncols, mpq_class(0));
    t.value = 0;
    for (int r = 0; r < n_rows; ++r) {
      if (t.basis[r] >= art_start) {
        for (int j = 0; j < t.ncols; ++j) t.red[j] += t.rows[r][j];
        t.value -= t.rhs[r];
      }
    }
    for (int j = art_start; j < t.ncols; ++j) t.red[j] -= 1;
    t.optimize(t.ncols, /*stop_positive=*/false);  // bounded above by 0
    if (t.value != 0) {
      return py::make_tuple(STATUS_INFEASIBLE, py::none(), py::none());
    }
    // Drive leftover (degenerate) artificials out of the basis.
    for (int r = static_cast<int>(t.rows.size()) - 1; r >= 0; --r) {
      if (t.basis[r] < art_start) continue;
      int pcol = -1;
      for (int j = 0; j < art_start; ++j) {
        if (t.rows[r][j] != 0) {
          pcol = j;
          break;
        }
      }
      if (pcol >= 0) {
        t.red.assign(t.ncols, mpq_class(0));
        t.value = 0;
        t.pivot(r, pcol);
      } else {
        t.rows.erase(t.rows.begin() + r);
        t.rhs.erase(t.rhs.begin() + r);
        t.basis.erase(t.basis.begin() + r);
      }
    }
  }

  // Phase 2: maximize the real objective over columns below art_start.
  std::vector<mpq_class> cost(t.ncols, mpq_class(0));
  for (const auto& item : objective) {
    py::tuple vt = item.cast<py::tuple>();
    int var = vt[0].cast<int>();
    if (var < 0 || var >= num_vars) throw std::invalid_argument("objective index out of range");
    mpz_class coeff;
    int_from_py(vt[1], coeff);
    cost[var] += mpq_class(coeff);
  }
  t.red = cost;
  t.value = 0;
  for (size_t r = 0; r < t.rows.size(); ++r) {
    const mpq_class& cb = cost[t.basis[r]];
    if (cb != 0) {
      for (int j = 0; j < t.ncols; ++j) t.red[j] -= cb * t.rows[r][j];
      t.value += cb * t.rhs[r];
    }
  }
  bool bounded = t.optimize(art_start, stop_when_positive);
  if (!bounded) {
    return py::make_tuple(STATUS_UNBOUNDED, py::none(), py::none());
  }

  std::vector<mpq_class> point(num_vars, mpq_class(0));
  for (size_t r = 0; r < t.rows.size(); ++r) {
    if (t.basis[r] < num_vars) point[t.basis[r]] = t.rhs[r];
  }
  const int status =
      (stop_when_positive && t.value > t.threshold && t.entering_dantzig(art_start) >= 0)
          ? STATUS_POSITIVE
          : STATUS_OPTIMAL;
  py::list nums, dens;
  for (const auto& v : point) {
    nums.append(py_from_mpz(v.get_num()));
    dens.append(py_from_mpz(v.get_den()));
  }
  return py::make_tuple(status, nums, dens);
}

}  // namespace

PYBIND11_MODULE(_ratlp, m) {
  m.doc() = "Exact rational simplex core (GMP)";
  m.def("solve", &solve, py::arg("num_vars"), py::arg("rows"), py::arg("objective"),
        py::arg("stop_when_positive") = false, py::arg("threshold_num") = py::int_(0),
        py::arg("threshold_den") = py::int_(1));
}
