#include "bilevel/instances.hpp"

#include "bilevel/lp.hpp"

#include <json.hpp>

#include <cmath>

namespace bilevel {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::mt19937_64 instance_rng(std::uint64_t seed, std::uint64_t index) {
  return std::mt19937_64(splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ULL));
}

std::string family_name(Family f) { return f == Family::Linear ? "linear" : "quadlinear"; }

Family parse_family(const std::string& name) {
  if (name == "linear") return Family::Linear;
  if (name == "quadlinear") return Family::Quadlinear;
  throw InputError("unknown instance family '" + name + "'");
}

namespace {

Vec normal_vec(std::mt19937_64& rng, Index size, double sd) {
  std::normal_distribution<double> N(0.0, sd);
  Vec v(size);
  for (Index i = 0; i < size; ++i) v[i] = N(rng);
  return v;
}

Mat normal_mat(std::mt19937_64& rng, Index rows, Index cols, double sd) {
  std::normal_distribution<double> N(0.0, sd);
  Mat M(rows, cols);
  // Row-major draw order, matching the serialized layout.
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) M(i, j) = N(rng);
  return M;
}

/// Draws the lower level (At, Bt, bt, dt, y_hat) with y_hat optimal at x = 0.
bool draw_lower(std::mt19937_64& rng, AffineInstance& inst) {
  const Index n = inst.n, m = inst.m, l = inst.l;
  inst.At = normal_mat(rng, l, n, 0.01);
  inst.Bt = normal_mat(rng, l, m, 0.01);
  inst.y_hat = normal_vec(rng, m, 0.1).cwiseMax(-1.0).cwiseMin(1.0);
  std::uniform_real_distribution<double> U(0.5, 1.5);
  const double omega = U(rng);
  const double nb = inst.Bt.row(0).norm();
  if (!(nb > 0)) return false;
  // Stationarity at x = 0: dt + Bt^T u + v = 0 with u = (omega / ||Bt_1||) e_1 and
  // v in the normal cone of the box at y_hat. Taking v = 0 is valid for every y_hat.
  inst.dt = -omega * inst.Bt.row(0).transpose() / nb;
  inst.bt = inst.Bt * inst.y_hat;
  for (Index i = 1; i < l; ++i)
    inst.bt[i] += inst.At.row(i).lpNorm<1>() + inst.Bt.row(i).lpNorm<1>();
  const Vec ones_n = Vec::Ones(n), ones_m = Vec::Ones(m);
  const double G =
      uniform_slater_margin(inst.At, inst.Bt, inst.bt, -ones_n, ones_n, -ones_m, ones_m);
  return G > 1e-6;
}

AffineInstance gen_affine(Family family, Index n, Index m, Index l, std::uint64_t seed) {
  if (n <= 0 || m <= 0 || l <= 0) throw InputError("instance dimensions must be positive");
  std::mt19937_64 rng = instance_rng(seed);
  AffineInstance inst;
  inst.family = family;
  inst.n = n;
  inst.m = m;
  inst.l = l;
  inst.seed = seed;
  if (family == Family::Linear) {
    inst.A = Mat::Zero(n, n);
    inst.B = Mat::Zero(n, m);
    inst.C = Mat::Zero(m, m);
    inst.c = normal_vec(rng, n, 1.0);
    inst.d = normal_vec(rng, m, 1.0);
  } else {
    inst.A = normal_mat(rng, n, n, 0.1);
    inst.B = normal_mat(rng, n, m, 0.1);
    inst.C = normal_mat(rng, m, m, 0.1);
    inst.c = normal_vec(rng, n, 0.1);
    inst.d = normal_vec(rng, m, 0.1);
  }
  for (int attempt = 0; attempt < 10; ++attempt)
    if (draw_lower(rng, inst)) return inst;
  throw NumericalFailure("could not draw a strictly feasible lower level in 10 attempts", Vec());
}

}  // namespace

AffineInstance gen_linear(Index n, Index m, Index l, std::uint64_t seed) {
  return gen_affine(Family::Linear, n, m, l, seed);
}

AffineInstance gen_quadlinear(Index n, Index m, Index l, std::uint64_t seed) {
  return gen_affine(Family::Quadlinear, n, m, l, seed);
}

AffineInstance generate(Family family, Index n, Index m, Index l, std::uint64_t seed) {
  return gen_affine(family, n, m, l, seed);
}

void AffineInstance::validate() const {
  if (n <= 0 || m <= 0 || l <= 0) throw InputError("instance dimensions must be positive");
  auto shape = [](const Mat& M, Index r, Index c, const char* name) {
    if (M.rows() != r || M.cols() != c)
      throw InputError(std::string("matrix ") + name + " has the wrong shape");
    if (!M.allFinite()) throw InputError(std::string("matrix ") + name + " is not finite");
  };
  shape(A, n, n, "A");
  shape(B, n, m, "B");
  shape(C, m, m, "C");
  shape(At, l, n, "At");
  shape(Bt, l, m, "Bt");
  require_size(c, n, "c");
  require_size(d, m, "d");
  require_size(bt, l, "bt");
  require_size(dt, m, "dt");
  require_size(y_hat, m, "y_hat");
  require_finite(c, "c");
  require_finite(d, "d");
  require_finite(bt, "bt");
  require_finite(dt, "dt");
  require_finite(y_hat, "y_hat");
}

double AffineInstance::initial_objective() const {
  const Vec x = Vec::Zero(n);
  return problem().f(x, y_hat);
}

BilevelProblem AffineInstance::problem() const {
  validate();
  BilevelProblem p;
  p.name = family_name(family) + "-" + std::to_string(n) + "-" + std::to_string(m) + "-" +
           std::to_string(l) + "-" + std::to_string(seed);
  p.n = n;
  p.m = m;
  const Vec ones_n = Vec::Ones(n), ones_m = Vec::Ones(m);
  p.f2 = box_indicator(-ones_n, ones_n);
  p.tf2 = box_indicator(-ones_m, ones_m);

  const Mat As = A + A.transpose();
  const Mat Cs = C + C.transpose();
  const Mat Bm = B;
  const Vec cc = c, dd = d;
  const Mat Aq = A, Cq = C;
  p.f1.value = [Aq, Bm, Cq, cc, dd](const Vec& x, const Vec& y) {
    return x.dot(Aq * x) + x.dot(Bm * y) + y.dot(Cq * y) + cc.dot(x) + dd.dot(y);
  };
  p.f1.gradient = [As, Bm, Cs, cc, dd](const Vec& x, const Vec& y, Vec& gx, Vec& gy) {
    gx = As * x + Bm * y + cc;
    gy = Bm.transpose() * x + Cs * y + dd;
  };
  Mat H(n + m, n + m);
  H << As, Bm, Bm.transpose(), Cs;
  p.f1.lipschitz_grad = spectral_norm(H);
  // |grad| over the box is bounded entrywise by |H| 1 + |(c, d)|.
  Vec cd(n + m);
  cd << c, d;
  p.f1.lipschitz_val = (H.cwiseAbs() * Vec::Ones(n + m) + cd.cwiseAbs()).norm();

  const Vec dtt = dt;
  p.tf1.value = [dtt](const Vec&, const Vec& z) { return dtt.dot(z); };
  p.tf1.gradient = [dtt](const Vec& x, const Vec&, Vec& gx, Vec& gz) {
    gx = Vec::Zero(x.size());
    gz = dtt;
  };
  p.tf1.lipschitz_grad = 0.0;
  p.tf1.lipschitz_val = dt.norm();

  const Mat Att = At, Btt = Bt;
  const Vec btt = bt;
  p.g.dim = l;
  p.g.value = [Att, Btt, btt](const Vec& x, const Vec& z) { return Vec(Att * x + Btt * z - btt); };
  p.g.jacobian = [Att, Btt](const Vec&, const Vec&) {
    Mat J(Att.rows(), Att.cols() + Btt.cols());
    J << Att, Btt;
    return J;
  };
  p.g.jacobian_transpose_times = [Att, Btt](const Vec&, const Vec&, const Vec& v, Vec& gx,
                                            Vec& gz) {
    gx = Att.transpose() * v;
    gz = Btt.transpose() * v;
  };
  const BoxAffineConstants bc = box_affine_constants(-ones_n, ones_n, -ones_m, ones_m, At, Bt, bt);
  p.g.lipschitz_val = bc.L_g;
  p.g.lipschitz_grad = 0.0;
  p.g.sup_norm = bc.g_hi;
  p.sigma = 0.0;

  ProblemConstants& k = p.constants;
  k.D_x = bc.D_x;
  k.D_y = bc.D_y;
  // Over [-1, 1]: |x^T A x| <= sum |A_ij| and likewise for the other terms.
  const double fmax = A.cwiseAbs().sum() + B.cwiseAbs().sum() + C.cwiseAbs().sum() +
                      c.lpNorm<1>() + d.lpNorm<1>();
  k.f_hi = fmax;
  k.f_low = -fmax;
  k.tf_low = -dt.lpNorm<1>();
  k.tf_star_hi = dt.lpNorm<1>();
  k.g_hi = bc.g_hi;
  k.slater_G = uniform_slater_margin(At, Bt, bt, -ones_n, ones_n, -ones_m, ones_m);

  p.lower_value_solver = [Att, Btt, btt, dtt, ones_m](const Vec& x) {
    const LpResult r = solve_lp(dtt, Btt, Vec(btt - Att * x), -ones_m, ones_m);
    if (r.status != LpStatus::Optimal) throw OracleFailure("lower level is infeasible at x");
    return r.value;
  };
  return p;
}

namespace {

nlohmann::json mat_json(const Mat& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < M.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index j = 0; j < M.cols(); ++j) row.push_back(M(i, j));
    rows.push_back(row);
  }
  return rows;
}

nlohmann::json vec_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Mat json_mat(const nlohmann::json& j, Index rows, Index cols, const char* name) {
  if (!j.is_array() || static_cast<Index>(j.size()) != rows)
    throw ParseError(std::string("matrix ") + name + " has the wrong number of rows", 0);
  Mat M(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    const auto& row = j[static_cast<size_t>(i)];
    if (!row.is_array() || static_cast<Index>(row.size()) != cols)
      throw ParseError(std::string("matrix ") + name + " has a row of the wrong length", 0);
    for (Index k = 0; k < cols; ++k) M(i, k) = row[static_cast<size_t>(k)].get<double>();
  }
  return M;
}

Vec json_vec(const nlohmann::json& j, Index size, const char* name) {
  if (!j.is_array() || static_cast<Index>(j.size()) != size)
    throw ParseError(std::string("vector ") + name + " has the wrong length", 0);
  Vec v(size);
  for (Index i = 0; i < size; ++i) v[i] = j[static_cast<size_t>(i)].get<double>();
  return v;
}

}  // namespace

std::string to_json(const AffineInstance& inst) {
  nlohmann::json j;
  j["family"] = family_name(inst.family);
  j["dims"] = {inst.n, inst.m, inst.l};
  j["seed"] = inst.seed;
  j["A"] = mat_json(inst.A);
  j["B"] = mat_json(inst.B);
  j["C"] = mat_json(inst.C);
  j["c"] = vec_json(inst.c);
  j["d"] = vec_json(inst.d);
  j["At"] = mat_json(inst.At);
  j["Bt"] = mat_json(inst.Bt);
  j["bt"] = vec_json(inst.bt);
  j["dt"] = vec_json(inst.dt);
  j["y_hat"] = vec_json(inst.y_hat);
  return j.dump(1);
}

AffineInstance instance_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), 0);
  }
  try {
    AffineInstance inst;
    inst.family = parse_family(j.at("family").get<std::string>());
    const auto& dims = j.at("dims");
    if (!dims.is_array() || dims.size() != 3) throw ParseError("dims must have three entries", 0);
    inst.n = dims[0].get<Index>();
    inst.m = dims[1].get<Index>();
    inst.l = dims[2].get<Index>();
    if (inst.n <= 0 || inst.m <= 0 || inst.l <= 0) throw ParseError("dims must be positive", 0);
    inst.seed = j.at("seed").get<std::uint64_t>();
    inst.A = json_mat(j.at("A"), inst.n, inst.n, "A");
    inst.B = json_mat(j.at("B"), inst.n, inst.m, "B");
    inst.C = json_mat(j.at("C"), inst.m, inst.m, "C");
    inst.c = json_vec(j.at("c"), inst.n, "c");
    inst.d = json_vec(j.at("d"), inst.m, "d");
    inst.At = json_mat(j.at("At"), inst.l, inst.n, "At");
    inst.Bt = json_mat(j.at("Bt"), inst.l, inst.m, "Bt");
    inst.bt = json_vec(j.at("bt"), inst.l, "bt");
    inst.dt = json_vec(j.at("dt"), inst.m, "dt");
    inst.y_hat = json_vec(j.at("y_hat"), inst.m, "y_hat");
    return inst;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(e.what(), 0);
  }
}

}  // namespace bilevel

namespace bilevel {

BilevelProblem analytic_instance() {
  BilevelProblem p;
  p.name = "analytic-1d";
  p.n = 1;
  p.m = 1;
  const Vec lo = Vec::Constant(1, -2.0), hi = Vec::Constant(1, 2.0);
  p.f2 = box_indicator(lo, hi);
  p.tf2 = box_indicator(lo, hi);
  p.f1.value = [](const Vec& x, const Vec& y) {
    return (x[0] - 1.0) * (x[0] - 1.0) + (y[0] - 1.0) * (y[0] - 1.0);
  };
  p.f1.gradient = [](const Vec& x, const Vec& y, Vec& gx, Vec& gy) {
    gx = Vec::Constant(1, 2.0 * (x[0] - 1.0));
    gy = Vec::Constant(1, 2.0 * (y[0] - 1.0));
  };
  p.f1.lipschitz_grad = 2.0;
  p.f1.lipschitz_val = 6.0 * std::sqrt(2.0);
  p.tf1.value = [](const Vec& x, const Vec& z) { return (z[0] - x[0]) * (z[0] - x[0]); };
  p.tf1.gradient = [](const Vec& x, const Vec& z, Vec& gx, Vec& gz) {
    gx = Vec::Constant(1, -2.0 * (z[0] - x[0]));
    gz = Vec::Constant(1, 2.0 * (z[0] - x[0]));
  };
  p.tf1.lipschitz_grad = 4.0;
  p.tf1.lipschitz_val = 8.0 * std::sqrt(2.0);
  p.sigma = 2.0;
  p.g.dim = 1;
  p.g.value = [](const Vec& x, const Vec& z) { return Vec::Constant(1, z[0] - x[0] - 0.5); };
  p.g.jacobian = [](const Vec&, const Vec&) {
    Mat J(1, 2);
    J << -1.0, 1.0;
    return J;
  };
  p.g.lipschitz_val = std::sqrt(2.0);
  p.g.lipschitz_grad = 0.0;
  p.g.sup_norm = 4.5;
  ProblemConstants& k = p.constants;
  k.D_x = 4.0;
  k.D_y = 4.0;
  k.f_hi = 18.0;
  k.f_low = 0.0;
  k.tf_low = 0.0;
  k.tf_star_hi = 0.0;
  k.g_hi = 4.5;
  // The single point z = -2 satisfies z - x - 0.5 <= -0.5 for every x in [-2, 2].
  k.slater_G = 0.5;
  p.lower_value_solver = [](const Vec&) { return 0.0; };
  return p;
}

}  // namespace bilevel
