#include "defectlab/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "defectlab/error.hpp"
#include "defectlab/forms.hpp"
#include "defectlab/spectral.hpp"
#include "json.hpp"

namespace defectlab {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
// Mismatch, relative to the size of the form, below which an identity is taken
// as exact on that mesh.
constexpr double kRoundoff = 1e-11;

double max_edge(const Profile& p) { return *std::max_element(p.grid.h.begin(), p.grid.h.end()); }

double rel(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale > 0.0 ? std::abs(a - b) / scale : 0.0;
}

// Natural size of a quadratic form in f: s+^2 times the discrete H1 norm squared.
double form_scale(const Profile& p, std::span<const double> f) {
  double s = 0.0;
  for (int i = 0; i < p.nodes(); ++i) s += p.grid.w[i] * f[i] * f[i];
  for (int e = 0; e + 1 < p.nodes(); ++e)
    s += p.grid.rmid[e] / p.grid.h[e] * std::pow(f[e + 1] - f[e], 2);
  return p.s_plus * p.s_plus * s;
}

// Length scale for test-function placement on short domains.
double placement_scale(const Profile& p) { return std::min(1.0, p.r().back() / 40.0); }

// Order estimate and verdict of a ladder of errors. All-roundoff ladders have no order.
struct Ladder {
  double order = kNaN;
  bool roundoff = false;
};

Ladder ladder_of(const std::vector<double>& h, const std::vector<double>& err,
                 const std::vector<double>& scale) {
  Ladder l;
  bool all_small = true;
  for (size_t j = 0; j < err.size(); ++j)
    if (err[j] > kRoundoff * scale[j]) all_small = false;
  if (all_small) {
    l.roundoff = true;
    return l;
  }
  l.order = convergence_order(h, err);
  return l;
}

bool order_ok(const Ladder& l, double min_order) {
  return l.roundoff || (std::isfinite(l.order) && l.order >= min_order);
}

struct Bump {
  double center, width;
};

std::vector<Bump> identity_bumps(double s) {
  return {{5.0 * s, 1.5 * s}, {8.0 * s, 2.0 * s}, {12.0 * s, 3.0 * s}};
}

void identity_checks(const std::vector<Profile>& ladder, const VerifyOptions& opts,
                     std::vector<CheckResult>& out) {
  const double s = placement_scale(ladder.back());
  const auto bumps = identity_bumps(s);
  const Identity ids[] = {Identity::A, Identity::B, Identity::C, Identity::D, Identity::E};
  for (size_t b = 0; b < bumps.size(); ++b)
    for (Identity id : ids) {
      std::vector<double> h, err, scale;
      IdentityPair last;
      for (const auto& p : ladder) {
        const auto eta =
            TestFunction::gaussian_bump(p.grid, bumps[b].center, bumps[b].width, 2.0 * s, 30.0 * s);
        last = identity_pair(p, id, eta);
        h.push_back(max_edge(p));
        err.push_back(std::abs(last.lhs.value - last.rhs.value));
        scale.push_back(std::max({std::abs(last.lhs.value), std::abs(last.rhs.value),
                                  form_scale(p, eta.span())}));
      }
      const Ladder l = ladder_of(h, err, scale);
      CheckResult c;
      c.name = std::string("identity.") + to_string(id) + ".bump" + std::to_string(b + 1);
      c.lhs = last.lhs.value;
      c.rhs = last.rhs.value;
      c.abs_err = err.back();
      c.rel_err = rel(c.lhs, c.rhs);
      c.order_estimate = l.order;
      c.pass = order_ok(l, opts.min_order) && c.abs_err <= opts.abs_tol;
      out.push_back(c);
    }
}

void sos_checks(const std::vector<Profile>& ladder, const VerifyOptions& opts,
                std::vector<CheckResult>& out) {
  const double s = placement_scale(ladder.back());
  std::vector<SosVariant> variants = {SosVariant::B};
  if (std::abs(ladder.back().params.k) == 1) variants.push_back(SosVariant::A1);
  for (SosVariant var : variants) {
    const std::string tag = var == SosVariant::B ? "B" : "A1";
    std::vector<double> h, err, scale;
    std::vector<double> min_density;
    SosResult last;
    for (const auto& p : ladder) {
      const auto zeta = TestFunction::gaussian_bump(p.grid, 6.0 * s, 2.0 * s, 1.0 * s, 20.0 * s);
      const auto eta = TestFunction::gaussian_bump(p.grid, 9.0 * s, 3.0 * s, 2.0 * s, 25.0 * s);
      const auto xi = TestFunction::gaussian_bump(p.grid, 4.0 * s, 2.0 * s, 1.0 * s, 20.0 * s);
      if (var == SosVariant::B) {
        const std::span<const double> in[2] = {zeta.span(), eta.span()};
        last = sos_forms(p, var, in);
      } else {
        const std::span<const double> in[3] = {xi.span(), eta.span(), zeta.span()};
        last = sos_forms(p, var, in);
      }
      h.push_back(max_edge(p));
      err.push_back(std::abs(last.direct.value - last.sos.value));
      const double fs = form_scale(p, zeta.span()) + form_scale(p, eta.span()) +
                        (var == SosVariant::A1 ? form_scale(p, xi.span()) : 0.0);
      scale.push_back(std::max({std::abs(last.direct.value), std::abs(last.sos.value), fs}));
      if (min_density.empty()) min_density = last.min_densities;
      for (size_t q = 0; q < min_density.size(); ++q)
        min_density[q] = std::min(min_density[q], last.min_densities[q]);
    }
    const Ladder l = ladder_of(h, err, scale);
    CheckResult c;
    c.name = "sos." + tag;
    c.lhs = last.direct.value;
    c.rhs = last.sos.value;
    c.abs_err = err.back();
    c.rel_err = rel(c.lhs, c.rhs);
    c.order_estimate = l.order;
    c.pass = order_ok(l, opts.min_order);
    out.push_back(c);
    for (size_t q = 0; q < min_density.size(); ++q) {
      CheckResult d;
      d.name = "sos." + tag + ".summand" + std::to_string(q + 1) + ".min_density";
      d.lhs = min_density[q];
      d.rhs = opts.sos_floor;
      d.abs_err = std::max(0.0, opts.sos_floor - min_density[q]);
      d.rel_err = kNaN;
      d.order_estimate = kNaN;
      d.pass = min_density[q] >= opts.sos_floor;
      out.push_back(d);
    }
  }
}

// Squared H1-type size of a polar field: nodal values plus radial differences.
double polar_norm_sq(const Profile& p, const PolarField& V) {
  const double dphi = 2.0 * M_PI / V.n_phi;
  double s = 0.0;
  for (int i = 0; i < V.nodes; ++i)
    for (int j = 0; j < V.n_phi; ++j) s += p.grid.w[i] * V.at(i, j).frobenius_sq() * dphi;
  for (int e = 0; e + 1 < V.nodes; ++e)
    for (int j = 0; j < V.n_phi; ++j)
      s += p.grid.rmid[e] / p.grid.h[e] * (V.at(e + 1, j) - V.at(e, j)).frobenius_sq() * dphi;
  return s;
}

void oracle_checks(const Profile& p, const VerifyOptions& opts, std::vector<CheckResult>& out) {
  const double r_max = p.r().back();
  const double h = max_edge(p);
  for (int set = 0; set < opts.oracle_sets; ++set) {
    const ModeCoefficients c = random_coefficients(p, opts.oracle_modes, opts.oracle_modes,
                                                   opts.seed + set, 0.5 * placement_scale(p),
                                                   0.75 * r_max);
    const int n_phi = 8 * std::max({c.max_mode(), std::abs(p.params.k), 1});
    const PolarField V = synthesize(p, c, n_phi);
    const double blocks = evaluate_I_blocks(p, c).value;
    const DirectValue direct = evaluate_I_direct(p, V);
    const double norm = polar_norm_sq(p, V);
    const double tol = std::max(1e-8, 10.0 * h * h * norm);
    CheckResult r;
    r.name = "oracle.set" + std::to_string(set + 1);
    r.lhs = blocks;
    r.rhs = direct.value.value;
    r.abs_err = std::max(std::abs(blocks - direct.value.value),
                         std::abs(blocks - direct.coordinate_value));
    r.rel_err = norm > 0.0 ? r.abs_err / norm : 0.0;
    r.order_estimate = kNaN;
    r.pass = r.abs_err <= tol;
    out.push_back(r);
  }
}

void residual_checks(const std::vector<Profile>& ladder, const VerifyOptions& opts,
                     std::vector<CheckResult>& out) {
  for (int q : {0, 1}) {
    std::vector<double> h, err, scale;
    for (const auto& p : ladder) {
      const double r_max = p.r().back();
      const KernelVectors kv = kernel_vectors(p, r_max);
      const ModeCoefficients& c = kv.tapered[q];
      const PolarField V = synthesize(p, c, 8 * std::max({c.max_mode(), std::abs(p.params.k), 1}));
      const PolarField R = linearized_residual(p, V);
      // Interior window where the taper is identically one.
      h.push_back(max_edge(p));
      err.push_back(max_norm(p, R, 2.0 * placement_scale(p), 0.5 * r_max));
      scale.push_back(p.s_plus * p.s_plus);
    }
    const Ladder l = ladder_of(h, err, scale);
    CheckResult c;
    c.name = "residual.V" + std::to_string(q);
    c.lhs = err.back();
    c.rhs = 0.0;
    c.abs_err = err.back();
    c.rel_err = err.back() / scale.back();
    c.order_estimate = l.order;
    c.pass = order_ok(l, opts.min_order);
    out.push_back(c);
  }
}

void kernel_checks(const Profile& p, const VerifyOptions& opts, std::vector<CheckResult>& out) {
  if (std::abs(p.params.k) != 1) return;
  SweepOptions so;
  so.n_max = opts.n_max;
  so.m_max = opts.m_max;
  so.seed = opts.seed;
  const SpectralReport rep = stability_sweep(p, so);
  const KernelMatch km = kernel_match(p, rep);

  CheckResult layout;
  layout.name = "kernel.layout";
  layout.lhs = km.total;
  layout.rhs = 5.0;
  layout.abs_err = std::abs(km.total - 5.0);
  layout.rel_err = layout.abs_err / 5.0;
  layout.order_estimate = kNaN;
  layout.pass = km.expected_layout;
  out.push_back(layout);

  for (const auto& s : km.scores) {
    CheckResult c;
    c.name = "kernel.similarity.V" + std::to_string(s.vector);
    c.lhs = s.similarity;
    c.rhs = 1.0;
    c.abs_err = 1.0 - s.similarity;
    c.rel_err = c.abs_err;
    c.order_estimate = kNaN;
    c.pass = s.similarity >= 0.99;
    out.push_back(c);
  }

  if (!opts.kernel_decay) return;
  EigenOptions eo;
  eo.seed = opts.seed;
  for (const auto& d : kernel_decay(p.params, p.mesh, eo)) {
    CheckResult c;
    c.name = "kernel.decay." + d.block + "." + std::to_string(d.index);
    c.lhs = d.lambda_base;
    c.rhs = d.lambda_doubled;
    c.abs_err = std::abs(d.lambda_base - d.lambda_doubled);
    c.rel_err = d.ratio > 0.0 ? 1.0 / d.ratio : kNaN;
    c.order_estimate = kNaN;
    c.pass = d.ratio >= 2.0;
    out.push_back(c);
  }
}

bool wants(const VerifyOptions& opts, const std::string& g) {
  return std::find(opts.groups.begin(), opts.groups.end(), g) != opts.groups.end();
}

}  // namespace

const std::vector<std::string>& check_groups() {
  static const std::vector<std::string> groups = {"identities", "sos", "oracle", "residual",
                                                  "kernel"};
  return groups;
}

std::vector<std::string> parse_check_list(const std::string& list) {
  if (list == "all") return check_groups();
  if (!list.empty() && list.back() == ',') throw UsageError("empty entry in check list");
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) throw UsageError("empty entry in check list");
    const auto& g = check_groups();
    if (std::find(g.begin(), g.end(), item) == g.end())
      throw UsageError("unknown check group '" + item + "'");
    if (std::find(out.begin(), out.end(), item) == out.end()) out.push_back(item);
  }
  if (out.empty()) throw UsageError("check list is empty");
  return out;
}

bool VerifyReport::all_pass() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.pass; });
}

std::vector<Profile> refinement_ladder(const Profile& finest, int levels) {
  if (levels < 2) throw PreconditionError("refinement needs at least two levels");
  if (!finest.has_derivatives()) throw PreconditionError("refinement needs a differentiated profile");
  std::vector<Profile> out(static_cast<size_t>(levels));
  out.back() = finest;
  const SolverOptions so;
  for (int j = 1; j < levels; ++j) {
    MeshSpec m = finest.mesh;
    const int factor = 1 << j;
    if (m.intervals % factor != 0)
      throw PreconditionError("interval count is not divisible by " + std::to_string(factor));
    m.intervals /= factor;
    // Coarsening a geometric mesh by 2 squares its growth ratio.
    if (m.grading == Grading::geometric) m.ratio = std::pow(m.ratio, factor);
    out[static_cast<size_t>(levels - 1 - j)] = solve_profile(finest.params, m, so);
  }
  return out;
}

double convergence_order(const std::vector<double>& h, const std::vector<double>& err) {
  if (h.size() != err.size() || h.size() < 2) throw PreconditionError("order fit needs two points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(h.size());
  for (size_t j = 0; j < h.size(); ++j) {
    if (!(err[j] > 0.0)) return kNaN;
    const double x = std::log(h[j]);
    const double y = std::log(err[j]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

VerifyReport run_verification(const Profile& p, const VerifyOptions& opts) {
  if (opts.groups.empty()) throw UsageError("check list is empty");
  VerifyReport rep;
  rep.params = p.params;
  rep.mesh = p.mesh;
  const bool refine = wants(opts, "identities") || wants(opts, "sos") || wants(opts, "residual");
  std::vector<Profile> ladder;
  if (refine) {
    ladder = refinement_ladder(p, opts.levels);
    for (const auto& q : ladder) rep.level_intervals.push_back(q.grid.intervals());
  }
  if (wants(opts, "identities")) identity_checks(ladder, opts, rep.checks);
  if (wants(opts, "sos")) sos_checks(ladder, opts, rep.checks);
  if (wants(opts, "oracle")) oracle_checks(p, opts, rep.checks);
  if (wants(opts, "residual")) residual_checks(ladder, opts, rep.checks);
  if (wants(opts, "kernel")) kernel_checks(p, opts, rep.checks);
  return rep;
}

std::string verification_json(const VerifyReport& rep) {
  using json = nlohmann::ordered_json;
  auto num = [](double x) { return std::isfinite(x) ? json(x) : json(nullptr); };
  json j;
  json params;
  params["t"] = rep.params.t;
  params["k"] = rep.params.k;
  params["r_max"] = rep.mesh.r_max;
  params["nodes"] = rep.mesh.intervals;
  params["grading"] = to_string(rep.mesh.grading);
  params["ratio"] = rep.mesh.ratio;
  j["params"] = params;
  j["levels"] = rep.level_intervals;
  j["all_pass"] = rep.all_pass();
  j["checks"] = json::array();
  for (const auto& c : rep.checks) {
    json x;
    x["name"] = c.name;
    x["lhs"] = num(c.lhs);
    x["rhs"] = num(c.rhs);
    x["abs_err"] = num(c.abs_err);
    x["rel_err"] = num(c.rel_err);
    x["order_estimate"] = num(c.order_estimate);
    x["pass"] = c.pass;
    j["checks"].push_back(x);
  }
  return j.dump(1) + "\n";
}

}  // namespace defectlab
