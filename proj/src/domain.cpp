#include "fdlab/domain.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace fdlab {

namespace {

double harmonic(double u, double v) { return 2.0 * u * v / (u + v); }

}  // namespace

bool GridDomain::on_outer(int id) const {
  int i = id % (nx + 1);
  if (i == 0 || i == nx) return true;
  if (dim == 2) {
    int j = id / (nx + 1);
    if (j == 0 || j == ny) return true;
  }
  return false;
}

double GridDomain::boundary_weight(int id) const {
  if (dim == 1) return 1.0;
  int i = id % (nx + 1);
  return (i == 0 || i == nx) ? hy : hx;
}

Eigen::VectorXd GridDomain::pack(const std::vector<double>& full) const {
  Eigen::VectorXd u(static_cast<int>(fluid.size()));
  for (size_t k = 0; k < fluid.size(); ++k) u[k] = full[fluid[k]];
  return u;
}

std::vector<double> GridDomain::unpack(
    const Eigen::VectorXd& u, const std::vector<double>& boundary_full) const {
  std::vector<double> full(node_count(), 0.0);
  for (int id = 0; id < node_count(); ++id)
    if (on_outer(id)) full[id] = boundary_full.empty() ? 0.0 : boundary_full[id];
  for (size_t k = 0; k < fluid.size(); ++k) full[fluid[k]] = u[k];
  return full;
}

GridDomain build_domain(const DomainSpec& spec) {
  if (spec.dim != 1 && spec.dim != 2)
    throw std::invalid_argument("domain: dim must be 1 or 2");
  if (spec.nx < 8 || (spec.dim == 2 && spec.ny < 8))
    throw std::invalid_argument("domain: need at least 8 cells per axis");
  if (!(spec.lx > 0.0) || (spec.dim == 2 && !(spec.ly > 0.0)))
    throw std::invalid_argument("domain: nonpositive extent");

  GridDomain d;
  d.dim = spec.dim;
  d.nx = spec.nx;
  d.ny = spec.dim == 2 ? spec.ny : 0;
  d.hx = spec.lx / spec.nx;
  d.hy = spec.dim == 2 ? spec.ly / spec.ny : 0.0;
  d.obstacle.assign(d.node_count(), 0);

  bool box = spec.ox0 < spec.ox1 && (spec.dim == 1 || spec.oy0 < spec.oy1);
  auto inside = [&](double x, double y) -> bool {
    if (spec.mask_fn) return spec.mask_fn(x, y);
    if (!box) return false;
    return x >= spec.ox0 && x <= spec.ox1 &&
           (spec.dim == 1 || (y >= spec.oy0 && y <= spec.oy1));
  };

  bool any = false;
  for (int id = 0; id < d.node_count(); ++id) {
    if (!inside(d.x_of(id), d.y_of(id))) continue;
    any = true;
    int i = id % (d.nx + 1);
    int j = d.dim == 2 ? id / (d.nx + 1) : 0;
    // the ring of nodes next to the outer boundary must stay fluid, so there
    // is always at least one fluid cell separating obstacle and boundary
    if (i <= 1 || i >= d.nx - 1 ||
        (d.dim == 2 && (j <= 1 || j >= d.ny - 1)))
      throw std::invalid_argument(
          "domain: obstacle touches or crowds the outer boundary");
    d.obstacle[id] = 1;
  }
  if (any && d.dim == 1)
    throw std::invalid_argument(
        "domain: an interior obstacle disconnects a 1D interval");

  // collect fluid interior nodes
  auto is_interior = [&](int i, int j) {
    if (i < 1 || i > d.nx - 1) return false;
    if (d.dim == 2 && (j < 1 || j > d.ny - 1)) return false;
    return true;
  };
  d.unknown_of.assign(d.node_count(), -1);
  for (int id = 0; id < d.node_count(); ++id) {
    int i = id % (d.nx + 1);
    int j = d.dim == 2 ? id / (d.nx + 1) : 0;
    if (is_interior(i, j) && !d.obstacle[id]) {
      d.unknown_of[id] = static_cast<int>(d.fluid.size());
      d.fluid.push_back(id);
    }
  }
  if (d.fluid.empty()) throw std::invalid_argument("domain: no fluid nodes");

  // flood fill over edge neighbors
  std::vector<char> seen(d.node_count(), 0);
  std::queue<int> bfs;
  bfs.push(d.fluid[0]);
  seen[d.fluid[0]] = 1;
  size_t reached = 0;
  while (!bfs.empty()) {
    int id = bfs.front();
    bfs.pop();
    ++reached;
    int i = id % (d.nx + 1);
    int j = d.dim == 2 ? id / (d.nx + 1) : 0;
    const int di[4] = {-1, 1, 0, 0};
    const int dj[4] = {0, 0, -1, 1};
    int ndirs = d.dim == 2 ? 4 : 2;
    for (int s = 0; s < ndirs; ++s) {
      int ii = i + di[s], jj = j + dj[s];
      if (!is_interior(ii, jj)) continue;
      int nid = d.node(ii, jj);
      if (d.obstacle[nid] || seen[nid]) continue;
      seen[nid] = 1;
      bfs.push(nid);
    }
  }
  if (reached != d.fluid.size())
    throw std::invalid_argument("domain: fluid region is disconnected");

  // boundary node sets per side; 2D corners are skipped (they never couple
  // to an interior stencil)
  auto collect = [&](unsigned sides) {
    std::vector<int> out;
    if (d.dim == 1) {
      if (sides & kLeft) out.push_back(0);
      if (sides & kRight) out.push_back(d.nx);
    } else {
      for (int j = 1; j <= d.ny - 1; ++j) {
        if (sides & kLeft) out.push_back(d.node(0, j));
        if (sides & kRight) out.push_back(d.node(d.nx, j));
      }
      for (int i = 1; i <= d.nx - 1; ++i) {
        if (sides & kBottom) out.push_back(d.node(i, 0));
        if (sides & kTop) out.push_back(d.node(i, d.ny));
      }
      std::sort(out.begin(), out.end());
    }
    return out;
  };
  d.gamma_in = collect(spec.gamma_in);
  d.gamma_out = collect(spec.gamma_out);
  if (d.gamma_in.empty() || d.gamma_out.empty())
    throw std::invalid_argument("domain: empty boundary set");
  return d;
}

void CoefficientField::validate(const GridDomain& dom) const {
  size_t n = static_cast<size_t>(dom.node_count());
  if (a.size() != n || rho.size() != n || q.size() != n)
    throw std::invalid_argument("coefficients: field size mismatch");
  if (!bx.empty() && (bx.size() != n || (dom.dim == 2 && by.size() != n)))
    throw std::invalid_argument("coefficients: drift size mismatch");
  std::vector<int> bad;
  for (size_t i = 0; i < n && bad.size() < 8; ++i)
    if (!(a[i] > 0.0) || !(rho[i] > 0.0) || q[i] < 0.0)
      bad.push_back(static_cast<int>(i));
  if (!bad.empty()) {
    std::ostringstream os;
    os << "coefficients: bounds violated at nodes";
    for (int id : bad) os << ' ' << id;
    throw std::invalid_argument(os.str());
  }
}

CoefficientField CoefficientField::constant(const GridDomain& dom, double av,
                                            double rhov, double qv) {
  CoefficientField cf;
  size_t n = static_cast<size_t>(dom.node_count());
  cf.a.assign(n, av);
  cf.rho.assign(n, rhov);
  cf.q.assign(n, qv);
  return cf;
}

CoefficientField CoefficientField::from_functions(
    const GridDomain& dom, const std::function<double(double, double)>& af,
    const std::function<double(double, double)>& rhof,
    const std::function<double(double, double)>& qf) {
  CoefficientField cf;
  int n = dom.node_count();
  cf.a.resize(n);
  cf.rho.resize(n);
  cf.q.resize(n);
  for (int id = 0; id < n; ++id) {
    double x = dom.x_of(id), y = dom.y_of(id);
    cf.a[id] = af(x, y);
    cf.rho[id] = rhof(x, y);
    cf.q[id] = qf(x, y);
  }
  return cf;
}

int DiscreteOperator::border_index(int node_id) const {
  auto it = std::lower_bound(border.begin(), border.end(), node_id);
  if (it == border.end() || *it != node_id)
    throw std::out_of_range("border_index: node not on the outer boundary");
  return static_cast<int>(it - border.begin());
}

Eigen::VectorXd DiscreteOperator::apply(const Eigen::VectorXd& u,
                                        const Eigen::VectorXd& g) const {
  Eigen::VectorXd r = stiffness * u;
  if (has_drift) r += drift * u;
  if (g.size()) r -= boundary_coupling * g;
  return r;
}

DiscreteOperator assemble(const GridDomain& dom, const CoefficientField& cf) {
  cf.validate(dom);
  DiscreteOperator op;
  op.dom = dom;
  op.cf = cf;
  op.n = static_cast<int>(dom.fluid.size());
  op.has_drift = cf.has_drift();

  // full outer boundary (sans 2D corners) in ascending node order
  for (int id = 0; id < dom.node_count(); ++id) {
    if (!dom.on_outer(id)) continue;
    if (dom.dim == 2) {
      int i = id % (dom.nx + 1), j = id / (dom.nx + 1);
      if ((i == 0 || i == dom.nx) && (j == 0 || j == dom.ny)) continue;
    }
    op.border.push_back(id);
  }

  std::vector<Eigen::Triplet<double>> ts, td, tc;
  op.mass.resize(op.n);
  const int di[4] = {-1, 1, 0, 0};
  const int dj[4] = {0, 0, -1, 1};
  int ndirs = dom.dim == 2 ? 4 : 2;

  for (int p = 0; p < op.n; ++p) {
    int id = dom.fluid[p];
    int i = id % (dom.nx + 1);
    int j = dom.dim == 2 ? id / (dom.nx + 1) : 0;
    op.mass[p] = cf.rho[id];
    double diag = cf.q[id];
    for (int s = 0; s < ndirs; ++s) {
      int nid = dom.node(i + di[s], j + dj[s]);
      double h = s < 2 ? dom.hx : dom.hy;
      double w = harmonic(cf.a[id], cf.a[nid]) / (h * h);
      diag += w;
      if (dom.obstacle[nid]) continue;  // pinned to zero
      if (dom.unknown_of[nid] >= 0) {
        ts.emplace_back(p, dom.unknown_of[nid], -w);
      } else {
        tc.emplace_back(p, op.border_index(nid), w);
      }
      if (op.has_drift) {
        // centered B.grad; di/dj = +-1 gives the upwind/downwind sign
        double b = s < 2 ? cf.bx[id] : cf.by[id];
        double c = b * (s < 2 ? di[s] : dj[s]) / (2.0 * h);
        if (dom.unknown_of[nid] >= 0)
          td.emplace_back(p, dom.unknown_of[nid], c);
        else
          tc.emplace_back(p, op.border_index(nid), -c);
      }
    }
    ts.emplace_back(p, p, diag);
  }

  op.stiffness.resize(op.n, op.n);
  op.stiffness.setFromTriplets(ts.begin(), ts.end());
  if (op.has_drift) {
    op.drift.resize(op.n, op.n);
    op.drift.setFromTriplets(td.begin(), td.end());
  }
  op.boundary_coupling.resize(op.n, static_cast<int>(op.border.size()));
  op.boundary_coupling.setFromTriplets(tc.begin(), tc.end());
  return op;
}

namespace {

// direction of the inward step from an outer-boundary node, and the spacing
// along it; rejects 2D corners
void inward_step(const GridDomain& dom, int id, int& step, double& h) {
  int i = id % (dom.nx + 1);
  int j = dom.dim == 2 ? id / (dom.nx + 1) : 0;
  int hits = 0;
  if (i == 0) { step = 1; h = dom.hx; ++hits; }
  if (i == dom.nx) { step = -1; h = dom.hx; ++hits; }
  if (dom.dim == 2 && j == 0) { step = dom.nx + 1; h = dom.hy; ++hits; }
  if (dom.dim == 2 && j == dom.ny) { step = -(dom.nx + 1); h = dom.hy; ++hits; }
  if (hits != 1)
    throw std::out_of_range("boundary flux: node not on a unique side");
}

}  // namespace

std::vector<double> boundary_flux(const GridDomain& dom,
                                  const CoefficientField& cf,
                                  const std::vector<double>& field,
                                  const std::vector<int>& where) {
  std::vector<double> out;
  out.reserve(where.size());
  for (int id : where) {
    int step;
    double h;
    inward_step(dom, id, step, h);
    double u0 = field[id], u1 = field[id + step], u2 = field[id + 2 * step];
    out.push_back(cf.a[id] * (3.0 * u0 - 4.0 * u1 + u2) / (2.0 * h));
  }
  return out;
}

std::vector<double> variational_flux(const GridDomain& dom,
                                     const CoefficientField& cf,
                                     const std::vector<double>& field,
                                     const std::vector<int>& where) {
  std::vector<double> out;
  out.reserve(where.size());
  for (int id : where) {
    int step;
    double h;
    inward_step(dom, id, step, h);
    double aface = harmonic(cf.a[id], cf.a[id + step]);
    out.push_back(aface * (field[id] - field[id + step]) / h);
  }
  return out;
}

}  // namespace fdlab
