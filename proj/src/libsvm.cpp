#include "bilevel/libsvm.hpp"

#include "bilevel/instances.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace bilevel {

namespace {

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtod(s.c_str(), &end);
  return errno == 0 && end == s.c_str() + s.size() && std::isfinite(out);
}

bool parse_index(const std::string& s, long& out) {
  if (s.empty()) return false;
  char* end = nullptr;
  errno = 0;
  out = std::strtol(s.c_str(), &end, 10);
  return errno == 0 && end == s.c_str() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// log(1 + exp(-t)) without overflow.
double softplus_neg(double t) { return std::max(-t, 0.0) + std::log1p(std::exp(-std::abs(t))); }

/// 1 / (1 + exp(t)), the magnitude of the loss derivative.
double sigmoid_neg(double t) {
  if (t >= 0) {
    const double e = std::exp(-t);
    return e / (1.0 + e);
  }
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

Dataset parse_libsvm(const std::string& text) {
  std::vector<double> labels;
  std::vector<std::vector<std::pair<long, double>>> rows;
  long max_index = 0;
  std::istringstream in(text);
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tok;
    if (!(ls >> tok)) continue;
    double label = 0.0;
    if (!parse_double(tok, label)) throw ParseError("invalid label '" + tok + "'", lineno);
    std::vector<std::pair<long, double>> entries;
    long last = 0;
    while (ls >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos)
        throw ParseError("expected index:value, found '" + tok + "'", lineno);
      long idx = 0;
      double val = 0.0;
      if (!parse_index(tok.substr(0, colon), idx) || idx < 1)
        throw ParseError("invalid feature index in '" + tok + "'", lineno);
      if (idx <= last) throw ParseError("feature indices must increase strictly", lineno);
      if (!parse_double(tok.substr(colon + 1), val))
        throw ParseError("invalid feature value in '" + tok + "'", lineno);
      last = idx;
      entries.emplace_back(idx, val);
    }
    max_index = std::max(max_index, last);
    labels.push_back(label);
    rows.push_back(std::move(entries));
  }
  Dataset d;
  d.labels.resize(static_cast<Index>(labels.size()));
  d.X = Mat::Zero(static_cast<Index>(rows.size()), max_index);
  for (size_t i = 0; i < rows.size(); ++i) {
    d.labels[static_cast<Index>(i)] = labels[i];
    for (const auto& [idx, val] : rows[i]) d.X(static_cast<Index>(i), idx - 1) = val;
  }
  return d;
}

Dataset load_libsvm(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InputError("cannot open dataset '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_libsvm(ss.str());
}

std::string to_libsvm(const Dataset& data) {
  std::string out;
  for (Index i = 0; i < data.samples(); ++i) {
    out += format_double(data.labels[i]);
    for (Index j = 0; j < data.features(); ++j) {
      if (data.X(i, j) == 0.0) continue;
      out += ' ';
      out += std::to_string(j + 1);
      out += ':';
      out += format_double(data.X(i, j));
    }
    out += '\n';
  }
  return out;
}

void write_libsvm(const Dataset& data, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  f << to_libsvm(data);
}

Dataset synthetic_svm_dataset(Index samples, Index features, double noise, std::uint64_t seed) {
  if (samples <= 0 || features <= 0) throw InputError("dataset sizes must be positive");
  if (!(noise >= 0 && noise < 0.5)) throw InputError("label noise must lie in [0, 0.5)");
  std::mt19937_64 rng = instance_rng(seed);
  std::normal_distribution<double> N(0.0, 1.0);
  std::uniform_real_distribution<double> U(-1.0, 1.0);
  std::uniform_real_distribution<double> B(-0.2, 0.2);
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  Vec w(features);
  for (Index j = 0; j < features; ++j) w[j] = N(rng);
  w.normalize();
  const double b = B(rng);
  Dataset d;
  d.X.resize(samples, features);
  d.labels.resize(samples);
  for (Index i = 0; i < samples; ++i) {
    for (Index j = 0; j < features; ++j) d.X(i, j) = U(rng);
    double label = d.X.row(i).dot(w) + b >= 0 ? 1.0 : -1.0;
    if (coin(rng) < noise) label = -label;
    d.labels[i] = label;
  }
  return d;
}

double SvmInstance::validation_loss(const Vec& y) const {
  const Index q = train.features();
  require_size(y, problem.m, "y");
  const Vec u = validation.X * y.head(q) + Vec::Constant(validation.samples(), y[q]);
  double s = 0.0;
  for (Index j = 0; j < validation.samples(); ++j) s += softplus_neg(validation.labels[j] * u[j]);
  return s / static_cast<double>(validation.samples());
}

double SvmInstance::validation_accuracy(const Vec& y) const {
  const Index q = train.features();
  require_size(y, problem.m, "y");
  const Vec u = validation.X * y.head(q) + Vec::Constant(validation.samples(), y[q]);
  Index ok = 0;
  for (Index j = 0; j < validation.samples(); ++j)
    if (validation.labels[j] * u[j] > 0) ++ok;
  return static_cast<double>(ok) / static_cast<double>(validation.samples());
}

Vec SvmInstance::random_start(std::uint64_t seed) const {
  std::mt19937_64 rng = instance_rng(seed, 1);
  std::uniform_real_distribution<double> U(0.0, 1.0);
  Vec y(problem.m);
  for (Index i = 0; i < y.size(); ++i) y[i] = U(rng);
  return y;
}

SvmInstance build_svm_problem(const Dataset& data, std::uint64_t seed) {
  const Index N = data.samples();
  const Index q = data.features();
  if (N < 4 || q <= 0) throw InputError("dataset needs at least 4 samples and one feature");
  if (!data.X.allFinite()) throw InputError("features must be finite");
  std::map<double, Index> classes;
  for (Index i = 0; i < N; ++i) classes[data.labels[i]]++;
  if (classes.size() != 2) throw InputError("labels must form exactly two nonempty classes");
  const double neg = classes.begin()->first;

  std::vector<Index> perm(static_cast<size_t>(N));
  std::iota(perm.begin(), perm.end(), Index{0});
  std::mt19937_64 rng = instance_rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  const Index n_val = N / 4;
  SvmInstance inst;
  inst.validation_rows.assign(perm.begin(), perm.begin() + n_val);
  inst.train_rows.assign(perm.begin() + n_val, perm.end());
  std::sort(inst.validation_rows.begin(), inst.validation_rows.end());
  std::sort(inst.train_rows.begin(), inst.train_rows.end());
  auto take = [&](const std::vector<Index>& rows) {
    Dataset d;
    d.X.resize(static_cast<Index>(rows.size()), q);
    d.labels.resize(static_cast<Index>(rows.size()));
    for (size_t k = 0; k < rows.size(); ++k) {
      d.X.row(static_cast<Index>(k)) = data.X.row(rows[k]);
      d.labels[static_cast<Index>(k)] = data.labels[rows[k]] == neg ? -1.0 : 1.0;
    }
    return d;
  };
  inst.train = take(inst.train_rows);
  inst.validation = take(inst.validation_rows);
  const Index n = inst.train.samples();
  const Index mv = inst.validation.samples();
  if (n == 0 || mv == 0) throw InputError("training and validation sets must be nonempty");

  BilevelProblem& p = inst.problem;
  p.name = "svm-" + std::to_string(N) + "-" + std::to_string(q) + "-" + std::to_string(seed);
  p.n = n;
  p.m = q + 1 + n;
  p.f2 = box_indicator(Vec::Zero(n), Vec::Constant(n, 10.0));
  Vec zlo(p.m), zhi(p.m);
  zlo << Vec::Constant(q + 1, -1.0), Vec::Zero(n);
  zhi << Vec::Constant(q + 1, 1.0), Vec::Constant(n, 20.0);
  p.tf2 = box_indicator(zlo, zhi);

  const Mat Xv = inst.validation.X;
  const Vec yv = inst.validation.labels;
  const Mat Xt = inst.train.X;
  const Vec yt = inst.train.labels;
  const double inv_mv = 1.0 / static_cast<double>(mv);

  p.f1.value = [Xv, yv, q, inv_mv](const Vec&, const Vec& y) {
    const Vec u = Xv * y.head(q) + Vec::Constant(Xv.rows(), y[q]);
    double s = 0.0;
    for (Index j = 0; j < u.size(); ++j) s += softplus_neg(yv[j] * u[j]);
    return s * inv_mv;
  };
  p.f1.gradient = [Xv, yv, q, inv_mv](const Vec& x, const Vec& y, Vec& gx, Vec& gy) {
    const Vec u = Xv * y.head(q) + Vec::Constant(Xv.rows(), y[q]);
    Vec s(u.size());
    for (Index j = 0; j < u.size(); ++j) s[j] = -yv[j] * sigmoid_neg(yv[j] * u[j]) * inv_mv;
    gx = Vec::Zero(x.size());
    gy = Vec::Zero(y.size());
    gy.head(q) = Xv.transpose() * s;
    gy[q] = s.sum();
  };
  Mat Xv1(mv, q + 1);
  Xv1 << Xv, Vec::Ones(mv);
  const double nv = spectral_norm(Xv1);
  p.f1.lipschitz_grad = nv * nv / (4.0 * static_cast<double>(mv));
  p.f1.lipschitz_val = nv * std::sqrt(static_cast<double>(mv)) * inv_mv;

  p.tf1.value = [Xt, yt, q](const Vec& c, const Vec& z) {
    const Index n = Xt.rows();
    const Vec u = Xt * z.head(q) + Vec::Constant(n, z[q]);
    double s = 0.0;
    for (Index i = 0; i < n; ++i) s += softplus_neg(yt[i] * u[i]);
    return s + c.dot(z.tail(n));
  };
  p.tf1.gradient = [Xt, yt, q](const Vec& c, const Vec& z, Vec& gx, Vec& gz) {
    const Index n = Xt.rows();
    const Vec u = Xt * z.head(q) + Vec::Constant(n, z[q]);
    Vec s(n);
    for (Index i = 0; i < n; ++i) s[i] = -yt[i] * sigmoid_neg(yt[i] * u[i]);
    gx = z.tail(n);
    gz.resize(z.size());
    gz.head(q) = Xt.transpose() * s;
    gz[q] = s.sum();
    gz.tail(n) = c;
  };
  Mat Xt1(n, q + 1);
  Xt1 << Xt, Vec::Ones(n);
  const double nt = spectral_norm(Xt1);
  // Logistic curvature is at most 1/4; the bilinear term c^T xi adds 1.
  p.tf1.lipschitz_grad = nt * nt / 4.0 + 1.0;
  const double sn = std::sqrt(static_cast<double>(n));
  const double g_c = 20.0 * sn, g_wb = nt * sn, g_xi = 10.0 * sn;
  p.tf1.lipschitz_val = std::sqrt(g_c * g_c + g_wb * g_wb + g_xi * g_xi);

  // g(x, z) = 1 - xi - yhat .* (X w + b), independent of x.
  Mat Jz(n, p.m);
  Jz << -(yt.asDiagonal() * Xt1), -Mat::Identity(n, n);
  p.g.dim = n;
  p.g.value = [Xt, yt, q](const Vec&, const Vec& z) {
    const Index n = Xt.rows();
    const Vec u = Xt * z.head(q) + Vec::Constant(n, z[q]);
    return Vec(Vec::Ones(n) - z.tail(n) - yt.cwiseProduct(u));
  };
  const Index nx = n;
  p.g.jacobian = [Jz, nx](const Vec&, const Vec&) {
    Mat J(Jz.rows(), nx + Jz.cols());
    J << Mat::Zero(Jz.rows(), nx), Jz;
    return J;
  };
  p.g.jacobian_transpose_times = [Jz, nx](const Vec&, const Vec&, const Vec& v, Vec& gx, Vec& gz) {
    gx = Vec::Zero(nx);
    gz = Jz.transpose() * v;
  };
  p.g.lipschitz_val = spectral_norm(Jz);
  p.g.lipschitz_grad = 0.0;
  double ghi2 = 0.0;
  for (Index i = 0; i < n; ++i) {
    const double r = Xt1.row(i).lpNorm<1>();
    // 1 - xi - yhat u with xi in [0, 20] and |u| <= ||(x_i, 1)||_1.
    const double hi = 1.0 + r;
    const double lo = 1.0 - 20.0 - r;
    const double worst = std::max(std::abs(hi), std::abs(lo));
    ghi2 += worst * worst;
  }
  p.g.sup_norm = std::sqrt(ghi2);
  p.sigma = 0.0;

  ProblemConstants& k = p.constants;
  k.D_x = 10.0 * sn;
  k.D_y = std::sqrt(4.0 * static_cast<double>(q + 1) + 400.0 * static_cast<double>(n));
  double fmax = 0.0;
  for (Index j = 0; j < mv; ++j) fmax = std::max(fmax, softplus_neg(-Xv1.row(j).lpNorm<1>()));
  k.f_hi = fmax;
  k.f_low = 0.0;
  k.tf_low = 0.0;
  // w = b = 0 and xi = 1 is feasible for every c.
  k.tf_star_hi = static_cast<double>(n) * (std::log(2.0) + 10.0);
  k.g_hi = p.g.sup_norm;
  // w = b = 0 and xi = 20 gives g_i = -19 for every i and every c.
  k.slater_G = 19.0;
  return inst;
}

}  // namespace bilevel
