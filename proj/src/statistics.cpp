#include "squeezelab/statistics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "squeezelab/error.hpp"
#include "squeezelab/numerics.hpp"

namespace squeezelab {

namespace {

std::size_t tail_start(std::size_t dim) {
  const auto width = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(dim)));
  return dim - std::max<std::size_t>(1, width);
}

bool guard_active(TailCheck check, double truncated_mass, bool empirical) {
  switch (check) {
    case TailCheck::Enforce: return true;
    case TailCheck::Skip: return false;
    case TailCheck::Auto: return truncated_mass > 0.0 && !empirical;
  }
  return true;
}

void check_tail_share(double tail, double total, const std::string& what) {
  if (total == 0.0) return;
  const double share = std::abs(tail / total);
  if (share > kTailRelTol) {
    std::ostringstream os;
    os << what << ": last 5% of the support carries " << share
       << " of the value; truncation too tight";
    throw Error(ErrorKind::TruncationUnreliable, os.str());
  }
}

// log of the falling factorial k (k-1) ... (k-order+1) for k = 0..dim-1.
std::vector<double> log_ff_table(std::size_t dim, int order) {
  std::vector<double> out(dim);
  for (std::size_t k = 0; k < dim; ++k) out[k] = log_falling_factorial(static_cast<long>(k), order);
  return out;
}

double weighted_sum(std::span<const double> p, std::span<const double> log_w, std::size_t begin,
                    std::size_t end, double shift) {
  CompensatedSum s;
  for (std::size_t k = begin; k < end; ++k) {
    if (p[k] != 0.0 && std::isfinite(log_w[k])) s.add(p[k] * std::exp(log_w[k] - shift));
  }
  return s.value();
}

struct Moments1 {
  double mass = 0.0;
  double first = 0.0;
};

Moments1 first_moment(std::span<const double> p) {
  CompensatedSum mass, first;
  for (std::size_t k = 0; k < p.size(); ++k) {
    mass.add(p[k]);
    first.add(static_cast<double>(k) * p[k]);
  }
  return {mass.value(), first.value()};
}

// sum_k p_k ff_order(k) exp(-shift) / mass, with the tail guard applied.
double normalized_fm(const MarginalDist& m, int order, TailCheck check, double shift) {
  require(order >= 0, ErrorKind::InvalidParameter, "moment order must be >= 0");
  const double mass = m.total();
  require(mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  const auto logs = log_ff_table(m.dim(), order);
  const double total = weighted_sum(m.probs, logs, 0, m.dim(), shift);
  if (guard_active(check, m.truncated_mass, m.n_events.has_value())) {
    const double tail = weighted_sum(m.probs, logs, tail_start(m.dim()), m.dim(), shift);
    check_tail_share(tail, total, "factorial moment of order " + std::to_string(order));
  }
  return total / mass;
}

// Per-arm tables log ff_order(k) - order * log(mean) for order in 0..max.
std::vector<std::vector<double>> scaled_log_tables(std::size_t dim, int max_order, double log_mean) {
  std::vector<std::vector<double>> t(static_cast<std::size_t>(max_order) + 1);
  for (int o = 0; o <= max_order; ++o) {
    t[static_cast<std::size_t>(o)] = log_ff_table(dim, o);
    for (double& v : t[static_cast<std::size_t>(o)]) v -= o * log_mean;
  }
  return t;
}

struct JointMeans {
  double mass = 0.0;
  double mean_s = 0.0;
  double mean_i = 0.0;
};

JointMeans joint_means(const JointDist& j) {
  CompensatedSum mass, s, i;
  for (std::size_t m = 0; m < j.dim_s(); ++m) {
    for (std::size_t n = 0; n < j.dim_i(); ++n) {
      const double p = j(m, n);
      mass.add(p);
      s.add(static_cast<double>(m) * p);
      i.add(static_cast<double>(n) * p);
    }
  }
  JointMeans out{mass.value(), 0.0, 0.0};
  require(out.mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  out.mean_s = s.value() / out.mass;
  out.mean_i = i.value() / out.mass;
  return out;
}

// Weighted joint sums W[a][b] = sum_kl p_kl exp(ws[a][k]) exp(wi[b][l]) for
// every pair of weight tables, via a row pass and a column pass. With the
// guard on, the share coming from the last 5% of either axis is checked.
std::vector<double> weighted_grid(const JointDist& j, const std::vector<std::vector<double>>& ws,
                                  const std::vector<std::vector<double>>& wi, bool guard,
                                  const std::string& what,
                                  std::size_t max_degree = std::numeric_limits<std::size_t>::max()) {
  const std::size_t ds = j.dim_s();
  const std::size_t di = j.dim_i();
  const std::size_t na = ws.size();
  const std::size_t nb = wi.size();
  const std::size_t ks = guard ? tail_start(ds) : ds;
  const std::size_t ls = guard ? tail_start(di) : di;

  auto expo = [](const std::vector<std::vector<double>>& t, std::size_t dim) {
    std::vector<double> e(t.size() * dim, 0.0);
    for (std::size_t a = 0; a < t.size(); ++a) {
      for (std::size_t k = 0; k < dim; ++k) {
        if (std::isfinite(t[a][k])) e[a * dim + k] = std::exp(t[a][k]);
      }
    }
    return e;
  };
  const std::vector<double> es = expo(ws, ds);
  const std::vector<double> ei = expo(wi, di);

  std::vector<double> inner(ds * nb, 0.0);
  std::vector<double> inner_head(guard ? ds * nb : 0, 0.0);
  for (std::size_t k = 0; k < ds; ++k) {
    const auto row = j.row(k);
    for (std::size_t b = 0; b < nb; ++b) {
      CompensatedSum s, h;
      const double* w = &ei[b * di];
      for (std::size_t l = 0; l < di; ++l) {
        if (row[l] == 0.0) continue;
        s.add(row[l] * w[l]);
        if (guard && l < ls) h.add(row[l] * w[l]);
      }
      inner[k * nb + b] = s.value();
      if (guard) inner_head[k * nb + b] = h.value();
    }
  }
  std::vector<double> out(na * nb, 0.0);
  for (std::size_t a = 0; a < na; ++a) {
    for (std::size_t b = 0; b < nb; ++b) {
      // Cells above max_degree are left at 0 and not guarded.
      if (a + b > max_degree) continue;
      CompensatedSum s, h;
      for (std::size_t k = 0; k < ds; ++k) {
        const double w = es[a * ds + k];
        if (w == 0.0) continue;
        s.add(w * inner[k * nb + b]);
        if (guard && k < ks) h.add(w * inner_head[k * nb + b]);
      }
      out[a * nb + b] = s.value();
      if (guard) check_tail_share(s.value() - h.value(), s.value(), what);
    }
  }
  return out;
}

Arm parse_arm(std::string_view s) {
  if (s == "s" || s == "signal") return Arm::Signal;
  if (s == "i" || s == "idler") return Arm::Idler;
  throw Error(ErrorKind::InvalidParameter, "unknown arm '" + std::string(s) + "'");
}

int parse_int(std::string_view s) {
  int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::InvalidParameter,
          "expected an integer, got '" + std::string(s) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

const MarginalDist& pick(const std::pair<MarginalDist, MarginalDist>& ms, Arm arm) {
  return arm == Arm::Signal ? ms.first : ms.second;
}

}  // namespace

double mean(const MarginalDist& m) {
  const Moments1 r = first_moment(m.probs);
  require(r.mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  return r.first / r.mass;
}

double factorial_moment(const MarginalDist& m, int order, TailCheck check) {
  require(order >= 1, ErrorKind::InvalidParameter, "factorial moment order must be >= 1");
  return normalized_fm(m, order, check, 0.0);
}

double joint_factorial_moment(const JointDist& j, int m, int n, TailCheck check) {
  require(m >= 0 && n >= 0, ErrorKind::InvalidParameter, "moment orders must be >= 0");
  const double mass = j.total();
  require(mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  const bool guard = guard_active(check, j.truncated_mass(), j.n_events().has_value());
  return weighted_grid(j, {log_ff_table(j.dim_s(), m)}, {log_ff_table(j.dim_i(), n)}, guard,
                       "joint factorial moment")[0] /
         mass;
}

double g_n(const MarginalDist& m, int order, TailCheck check) {
  require(order >= 1, ErrorKind::InvalidParameter, "correlation order must be >= 1");
  const double mu = mean(m);
  require(mu > 0.0, ErrorKind::ZeroMean, "g^(n) undefined for zero mean");
  return normalized_fm(m, order, check, order * std::log(mu));
}

std::vector<double> g_surface(const JointDist& j, int max_m, int max_n, TailCheck check) {
  require(max_m >= 1 && max_n >= 1, ErrorKind::InvalidParameter, "surface orders must be >= 1");
  const JointMeans mu = joint_means(j);
  require(mu.mean_s > 0.0 && mu.mean_i > 0.0, ErrorKind::ZeroMean, "g^(m,n) undefined for zero mean");
  auto ts = scaled_log_tables(j.dim_s(), max_m, std::log(mu.mean_s));
  auto ti = scaled_log_tables(j.dim_i(), max_n, std::log(mu.mean_i));
  ts.erase(ts.begin());
  ti.erase(ti.begin());
  const bool guard = guard_active(check, j.truncated_mass(), j.n_events().has_value());
  std::vector<double> out = weighted_grid(j, ts, ti, guard, "g^(m,n)");
  for (double& v : out) v /= mu.mass;
  return out;
}

double g_mn(const JointDist& j, int m, int n, TailCheck check) {
  require(m >= 0 && n >= 0, ErrorKind::InvalidParameter, "correlation orders must be >= 0");
  const JointMeans mu = joint_means(j);
  require((m == 0 || mu.mean_s > 0.0) && (n == 0 || mu.mean_i > 0.0), ErrorKind::ZeroMean,
          "g^(m,n) undefined for zero mean");
  auto ws = log_ff_table(j.dim_s(), m);
  auto wi = log_ff_table(j.dim_i(), n);
  if (m > 0) {
    for (double& v : ws) v -= m * std::log(mu.mean_s);
  }
  if (n > 0) {
    for (double& v : wi) v -= n * std::log(mu.mean_i);
  }
  const bool guard = guard_active(check, j.truncated_mass(), j.n_events().has_value());
  return weighted_grid(j, {ws}, {wi}, guard, "g^(m,n)")[0] / mu.mass;
}

double nrf(const JointDist& j) {
  const JointMeans mu = joint_means(j);
  const double total_mean = mu.mean_s + mu.mean_i;
  require(total_mean > 0.0, ErrorKind::ZeroMean, "NRF undefined for zero mean");
  const double d = mu.mean_s - mu.mean_i;
  CompensatedSum var;
  for (std::size_t m = 0; m < j.dim_s(); ++m) {
    for (std::size_t n = 0; n < j.dim_i(); ++n) {
      const double x = static_cast<double>(m) - static_cast<double>(n) - d;
      var.add(j(m, n) * x * x);
    }
  }
  return var.value() / mu.mass / total_mean;
}

double parity(const MarginalDist& m) {
  CompensatedSum s;
  for (std::size_t n = 0; n < m.dim(); ++n) s.add(n % 2 == 0 ? m.probs[n] : -m.probs[n]);
  const double mass = m.total();
  require(mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  return s.value() / mass;
}

Herald herald(const JointDist& j, Arm herald_arm, std::size_t h) {
  const bool on_idler = herald_arm == Arm::Idler;
  const std::size_t herald_dim = on_idler ? j.dim_i() : j.dim_s();
  const std::size_t out_dim = on_idler ? j.dim_s() : j.dim_i();
  require(h < herald_dim, ErrorKind::EmptyHerald, "herald outcome outside the support");

  Herald out;
  out.dist.probs.resize(out_dim);
  CompensatedSum mass;
  for (std::size_t k = 0; k < out_dim; ++k) {
    const double p = on_idler ? j(k, h) : j(h, k);
    out.dist.probs[k] = p;
    mass.add(p);
  }
  const double joint_mass = j.total();
  out.probability = mass.value() / joint_mass;
  require(out.probability > 0.0, ErrorKind::EmptyHerald,
          "herald outcome " + std::to_string(h) + " has zero probability");
  for (double& p : out.dist.probs) p /= mass.value();
  out.dist.truncated_mass = 0.0;
  if (j.n_events()) {
    out.dist.n_events = static_cast<std::uint64_t>(
        std::llround(mass.value() * static_cast<double>(*j.n_events())));
  }
  return out;
}

double effective_mode_number(const MarginalDist& m) {
  const double g2 = g_n(m, 2);
  require(g2 > 1.0, ErrorKind::UndefinedK, "effective mode number needs g2 > 1");
  return 1.0 / (g2 - 1.0);
}

std::vector<double> symmetric_eigenvalues(std::vector<double> a, std::size_t n) {
  require(a.size() == n * n, ErrorKind::DimMismatch, "matrix storage does not match n");
  auto at = [&](std::size_t r, std::size_t c) -> double& { return a[r * n + c]; };
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < n; ++c) {
        if (r != c) s += at(r, c) * at(r, c);
      }
    }
    return std::sqrt(s);
  };
  double scale = 0.0;
  for (std::size_t r = 0; r < n; ++r) scale += std::abs(at(r, r));
  for (double v : a) scale = std::max(scale, std::abs(v));

  for (int sweep = 0; sweep < 100 && off_norm() > 1e-14 * scale; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = at(p, q);
        if (apq == 0.0) continue;
        const double theta = (at(q, q) - at(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = at(k, p);
          const double akq = at(k, q);
          at(k, p) = c * akp - s * akq;
          at(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = at(p, k);
          const double aqk = at(q, k);
          at(p, k) = c * apk - s * aqk;
          at(q, k) = s * apk + c * aqk;
        }
        at(p, q) = 0.0;
        at(q, p) = 0.0;
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t r = 0; r < n; ++r) eig[r] = at(r, r);
  std::sort(eig.begin(), eig.end());
  return eig;
}

MomentMatrix nonclassicality_matrix(const JointDist& j, int order, TailCheck check) {
  require(order >= 1, ErrorKind::InvalidParameter, "moment matrix order must be >= 1");
  MomentMatrix mm;
  mm.order = order;
  for (int d = 0; d <= order; ++d) {
    for (int p = d; p >= 0; --p) mm.basis.emplace_back(p, d - p);
  }
  const int top = 2 * order;
  const double mass = j.total();
  require(mass > 0.0, ErrorKind::InvalidData, "distribution has no mass");
  const bool guard = guard_active(check, j.truncated_mass(), j.n_events().has_value());

  // Normally ordered moments of (a^dag a / 2)^a (b^dag b / 2)^b.
  std::vector<std::vector<double>> ts(static_cast<std::size_t>(top) + 1);
  std::vector<std::vector<double>> ti(static_cast<std::size_t>(top) + 1);
  for (int o = 0; o <= top; ++o) {
    ts[static_cast<std::size_t>(o)] = log_ff_table(j.dim_s(), o);
    ti[static_cast<std::size_t>(o)] = log_ff_table(j.dim_i(), o);
  }
  std::vector<double> f = weighted_grid(j, ts, ti, guard, "moment matrix entry", static_cast<std::size_t>(top));
  for (int a = 0; a <= top; ++a) {
    for (int b = 0; b <= top; ++b) {
      double& v = f[static_cast<std::size_t>(a * (top + 1) + b)];
      v = std::ldexp(v / mass, -(a + b));
    }
  }
  const std::size_t n = mm.basis.size();
  mm.entries.assign(n * n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < n; ++c) {
      const int a = mm.basis[r].first + mm.basis[c].first;
      const int b = mm.basis[r].second + mm.basis[c].second;
      mm.entries[r * n + c] = f[static_cast<std::size_t>(a * (top + 1) + b)];
    }
  }
  mm.entries[0] = 1.0;
  mm.min_eigenvalue = symmetric_eigenvalues(mm.entries, n).front();
  return mm;
}

Squeezing squeezing_db(double r, double eta) {
  require(r >= 0.0 && std::isfinite(r), ErrorKind::InvalidParameter, "squeezing parameter must be >= 0");
  require(eta >= 0.0 && eta <= 1.0, ErrorKind::InvalidParameter, "efficiency must lie in [0, 1]");
  Squeezing s;
  s.potential_db = 20.0 * r / std::numbers::ln10;
  s.measurable_db = -10.0 * std::log10(eta * std::exp(-2.0 * r) + 1.0 - eta);
  return s;
}

Statistic make_statistic(std::string_view spec) {
  const auto parts = split(spec, ':');
  const std::string_view kind = parts[0];
  Statistic st;
  st.name = std::string(spec);
  auto need = [&](std::size_t n) {
    require(parts.size() == n, ErrorKind::InvalidParameter,
            "malformed statistic '" + std::string(spec) + "'");
  };

  if (kind == "mean" || kind == "g2" || kind == "k" || kind == "parity" || kind == "gn") {
    need(kind == "gn" ? 3 : 2);
    const Arm arm = parse_arm(parts[1]);
    const int order = kind == "gn" ? parse_int(parts[2]) : 2;
    const std::string k(kind);
    st.labels = {st.name};
    st.eval = [arm, order, k](const JointDist& j) {
      const auto ms = marginals(j);
      const MarginalDist& m = pick(ms, arm);
      if (k == "mean") return std::vector<double>{mean(m)};
      if (k == "k") return std::vector<double>{effective_mode_number(m)};
      if (k == "parity") return std::vector<double>{parity(m)};
      return std::vector<double>{g_n(m, order)};
    };
    return st;
  }
  if (kind == "nrf") {
    need(1);
    st.labels = {st.name};
    st.eval = [](const JointDist& j) { return std::vector<double>{nrf(j)}; };
    return st;
  }
  if (kind == "gmn" || kind == "gsurface") {
    need(2);
    const auto mn = split(parts[1], ',');
    require(mn.size() == 2, ErrorKind::InvalidParameter, "expected M,N in '" + std::string(spec) + "'");
    const int m = parse_int(mn[0]);
    const int n = parse_int(mn[1]);
    if (kind == "gmn") {
      st.labels = {st.name};
      st.eval = [m, n](const JointDist& j) { return std::vector<double>{g_mn(j, m, n)}; };
    } else {
      for (int a = 1; a <= m; ++a) {
        for (int b = 1; b <= n; ++b) st.labels.push_back("g(" + std::to_string(a) + "," + std::to_string(b) + ")");
      }
      st.eval = [m, n](const JointDist& j) { return g_surface(j, m, n); };
    }
    return st;
  }
  if (kind == "mineig") {
    need(2);
    const int order = parse_int(parts[1]);
    st.labels = {st.name};
    st.eval = [order](const JointDist& j) {
      return std::vector<double>{nonclassicality_matrix(j, order).min_eigenvalue};
    };
    return st;
  }
  if (kind == "herald-g2" || kind == "herald-parity") {
    need(3);
    const Arm arm = parse_arm(parts[1]);
    const int h = parse_int(parts[2]);
    require(h >= 0, ErrorKind::InvalidParameter, "herald must be >= 0");
    const bool want_g2 = kind == "herald-g2";
    st.labels = {st.name};
    st.eval = [arm, h, want_g2](const JointDist& j) {
      const Herald hd = herald(j, arm, static_cast<std::size_t>(h));
      return std::vector<double>{want_g2 ? g_n(hd.dist, 2) : parity(hd.dist)};
    };
    return st;
  }
  throw Error(ErrorKind::InvalidParameter, "unknown statistic '" + std::string(spec) + "'");
}

}  // namespace squeezelab
