#include "defectlab/io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <unistd.h>

#include "defectlab/error.hpp"
#include "json.hpp"

namespace defectlab {

using json = nlohmann::ordered_json;

std::string format_double(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

ProfileDocument make_document(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("profile document needs derivatives");
  ProfileDocument d;
  d.params = p.params;
  d.mesh = p.mesh;
  d.s_plus = p.s_plus;
  d.solver = {p.converged, p.iterations, p.residual_norm, p.continuation_steps, p.h1_warning};
  d.r = p.r();
  d.u = p.u;
  d.v = p.v;
  d.du = p.du;
  d.dv = p.dv;
  d.properties = check_properties(p);
  return d;
}

Profile profile_of(const ProfileDocument& doc) {
  Profile p;
  p.params = doc.params;
  p.params.validate();
  p.mesh = doc.mesh;
  p.grid = RadialGrid::from_nodes(doc.r);
  p.s_plus = doc.s_plus;
  p.u = doc.u;
  p.v = doc.v;
  p.du = doc.du;
  p.dv = doc.dv;
  p.residual_norm = doc.solver.residual_norm;
  p.iterations = doc.solver.iterations;
  p.continuation_steps = doc.solver.continuation_steps;
  p.converged = doc.solver.converged;
  p.h1_warning = doc.solver.h1_warning;
  return p;
}

namespace {

json params_json(const BulkParams& b, const MeshSpec& m) {
  json j;
  j["t"] = b.t;
  j["k"] = b.k;
  j["r_max"] = m.r_max;
  j["nodes"] = m.intervals;
  j["grading"] = to_string(m.grading);
  j["ratio"] = m.ratio;
  return j;
}

json check_json(const PropertyCheck& c) {
  json j;
  j["name"] = c.name;
  j["satisfied"] = c.satisfied;
  j["boundary"] = c.boundary;
  j["margin"] = c.margin;
  j["node"] = c.node;
  j["r"] = c.r;
  return j;
}

json report_json(const PropertyReport& rep) {
  json j;
  j["regime"] = to_string(rep.regime);
  j["all_satisfied"] = rep.all_satisfied();
  j["checks"] = json::array();
  for (const auto& c : rep.checks) j["checks"].push_back(check_json(c));
  return j;
}

// Access helpers that insist on the exact key set.
void expect_keys(const json& j, const std::vector<std::string>& keys, const std::string& where) {
  if (!j.is_object()) throw IoError(where + ": expected an object");
  const std::set<std::string> want(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!want.count(k)) throw IoError(where + ": unknown key '" + k + "'");
  for (const auto& k : keys)
    if (!j.contains(k)) throw IoError(where + ": missing key '" + k + "'");
}

template <class T>
T get(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw IoError(where + "." + key + ": " + e.what());
  }
}

double get_number(const json& j, const std::string& key, const std::string& where) {
  const json& x = j.at(key);
  if (!x.is_number()) throw IoError(where + "." + key + ": expected a number");
  return x.get<double>();
}

std::vector<double> get_array(const json& j, const std::string& key) {
  const json& a = j.at(key);
  if (!a.is_array()) throw IoError(key + ": expected an array");
  std::vector<double> out;
  out.reserve(a.size());
  for (const auto& x : a) {
    if (!x.is_number()) throw IoError(key + ": non-numeric entry");
    out.push_back(x.get<double>());
  }
  return out;
}

}  // namespace

std::string to_json(const ProfileDocument& doc) {
  json j;
  j["schema_version"] = doc.schema_version;
  j["params"] = params_json(doc.params, doc.mesh);
  j["s_plus"] = doc.s_plus;
  json s;
  s["converged"] = doc.solver.converged;
  s["iterations"] = doc.solver.iterations;
  s["residual_norm"] = doc.solver.residual_norm;
  s["continuation_steps"] = doc.solver.continuation_steps;
  s["h1_warning"] = doc.solver.h1_warning;
  j["solver"] = s;
  j["r"] = doc.r;
  j["u"] = doc.u;
  j["v"] = doc.v;
  j["du"] = doc.du;
  j["dv"] = doc.dv;
  j["property_report"] = report_json(doc.properties);
  return j.dump(1) + "\n";
}

ProfileDocument profile_document_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw IoError(std::string("profile document is not valid JSON: ") + e.what());
  }
  expect_keys(j, {"schema_version", "params", "s_plus", "solver", "r", "u", "v", "du", "dv",
                  "property_report"},
              "document");
  ProfileDocument d;
  d.schema_version = get<std::string>(j, "schema_version", "document");
  if (d.schema_version != "1") throw IoError("unsupported schema_version " + d.schema_version);

  const json& p = j["params"];
  expect_keys(p, {"t", "k", "r_max", "nodes", "grading", "ratio"}, "params");
  d.params.t = get_number(p, "t", "params");
  d.params.k = get<int>(p, "k", "params");
  d.mesh.r_max = get_number(p, "r_max", "params");
  d.mesh.intervals = get<int>(p, "nodes", "params");
  try {
    d.mesh.grading = grading_from_string(get<std::string>(p, "grading", "params"));
  } catch (const std::exception& e) {
    throw IoError(std::string("params.grading: ") + e.what());
  }
  d.mesh.ratio = get_number(p, "ratio", "params");
  d.s_plus = get_number(j, "s_plus", "document");

  const json& s = j["solver"];
  expect_keys(s, {"converged", "iterations", "residual_norm", "continuation_steps", "h1_warning"},
              "solver");
  d.solver.converged = get<bool>(s, "converged", "solver");
  d.solver.iterations = get<int>(s, "iterations", "solver");
  d.solver.residual_norm = get_number(s, "residual_norm", "solver");
  d.solver.continuation_steps = get<int>(s, "continuation_steps", "solver");
  d.solver.h1_warning = get<bool>(s, "h1_warning", "solver");

  d.r = get_array(j, "r");
  d.u = get_array(j, "u");
  d.v = get_array(j, "v");
  d.du = get_array(j, "du");
  d.dv = get_array(j, "dv");
  const size_t n = d.r.size();
  if (d.u.size() != n || d.v.size() != n || d.du.size() != n || d.dv.size() != n)
    throw IoError("profile arrays have different lengths");
  if (static_cast<int>(n) != d.mesh.intervals + 1)
    throw IoError("array length does not match params.nodes + 1");

  const json& pr = j["property_report"];
  expect_keys(pr, {"regime", "all_satisfied", "checks"}, "property_report");
  const std::string regime = get<std::string>(pr, "regime", "property_report");
  bool found = false;
  for (Regime r : {Regime::below_third, Regime::third, Regime::above_third})
    if (regime == to_string(r)) {
      d.properties.regime = r;
      found = true;
    }
  if (!found) throw IoError("property_report.regime: unknown value " + regime);
  if (!pr["checks"].is_array()) throw IoError("property_report.checks: expected an array");
  for (const auto& c : pr["checks"]) {
    expect_keys(c, {"name", "satisfied", "boundary", "margin", "node", "r"}, "check");
    PropertyCheck pc;
    pc.name = get<std::string>(c, "name", "check");
    pc.satisfied = get<bool>(c, "satisfied", "check");
    pc.boundary = get<bool>(c, "boundary", "check");
    pc.margin = get_number(c, "margin", "check");
    pc.node = get<int>(c, "node", "check");
    pc.r = get_number(c, "r", "check");
    d.properties.checks.push_back(pc);
  }
  if (get<bool>(pr, "all_satisfied", "property_report") != d.properties.all_satisfied())
    throw IoError("property_report.all_satisfied disagrees with its checks");
  return d;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path);
  return ss.str();
}

void write_file_atomic(const std::string& path, const std::string& content) {
  const std::string tmp = path + ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot create " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::remove(tmp.c_str());
      throw IoError("error writing " + tmp);
    }
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) {
    std::remove(tmp.c_str());
    throw IoError("cannot rename " + tmp + " to " + path);
  }
}

ProfileDocument load_profile(const std::string& path) {
  return profile_document_from_json(read_file(path));
}

void save_profile(const std::string& path, const ProfileDocument& doc) {
  write_file_atomic(path, to_json(doc));
}

std::string properties_json(const PropertyReport& rep, const MonotonicityReport& mono) {
  json j = report_json(rep);
  json m;
  m["u_strictly_increasing"] = mono.u_strictly_increasing;
  m["min_du"] = mono.min_du;
  m["v_direction"] = to_string(mono.v_direction);
  m["v_strict"] = mono.v_strict;
  m["min_dv"] = mono.min_dv;
  m["max_dv"] = mono.max_dv;
  m["v_direction_consistent"] = mono.v_direction_consistent;
  j["monotonicity"] = m;
  return j.dump(1) + "\n";
}

std::string energy_json(const Profile& p, const EnergyReport& e, const AsymptoticFit* fit) {
  json j;
  j["params"] = params_json(p.params, p.mesh);
  j["s_plus"] = p.s_plus;
  j["truncated_energy"] = e.truncated_energy;
  j["shifted_energy"] = e.shifted_energy;
  j["core_energy"] = e.core_energy;
  j["gradient"] = e.gradient;
  j["centrifugal"] = e.centrifugal;
  j["potential"] = e.potential;
  j["shifted_potential"] = e.shifted_potential;
  j["far_field_density"] = e.far_field_density;
  j["min_shifted_density"] = e.min_shifted_density;
  j["discrete_energy"] = discrete_energy(p);
  if (fit) {
    json f;
    f["origin_exponent"] = fit->origin_exponent;
    f["origin_coeff"] = fit->origin_coeff;
    f["tail_defect_u"] = fit->tail_defects[0];
    f["tail_defect_v"] = fit->tail_defects[1];
    f["window_nodes"] = fit->window_nodes;
    j["asymptotics"] = f;
  } else {
    j["asymptotics"] = nullptr;
  }
  return j.dump(1) + "\n";
}

namespace {

int block_index(const BlockSpec& s) {
  switch (s.sector) {
    case Sector::A_n: return s.n;
    case Sector::B_pair: return s.pair_index();
    default: return 0;
  }
}

}  // namespace

std::string spectra_csv(const SpectralReport& rep) {
  std::string out = "block,sector,index,eig_rank,eigenvalue,residual,inertia_below_shift\n";
  for (const auto& b : rep.blocks)
    for (size_t j = 0; j < b.eig.values.size(); ++j) {
      out += b.spec.name() + "," + to_string(b.spec.sector) + "," +
             std::to_string(block_index(b.spec)) + "," + std::to_string(j) + "," +
             format_double(b.eig.values[j]) + "," + format_double(b.eig.residuals[j]) + "," +
             std::to_string(b.inertia_below_shift) + "\n";
    }
  return out;
}

std::string spectral_summary_json(const SpectralReport& rep, const KernelMatch* km,
                                  std::uint64_t seed) {
  json j;
  j["params"] = params_json(rep.params, rep.mesh);
  j["s_plus"] = rep.s_plus;
  j["shift"] = rep.shift;
  j["n_max"] = rep.n_max;
  j["m_max"] = rep.m_max;
  j["seed"] = seed;
  j["verdict"] = to_string(rep.verdict);
  j["negative_total"] = rep.negative_total;
  j["monotone_in_n"] = rep.monotone_in_n;
  j["monotone_in_m"] = rep.monotone_in_m;
  j["blocks"] = json::array();
  for (const auto& b : rep.blocks) {
    json x;
    x["block"] = b.spec.name();
    x["sector"] = to_string(b.spec.sector);
    x["index"] = block_index(b.spec);
    x["dimension"] = b.dimension;
    x["inertia_below_shift"] = b.inertia_below_shift;
    x["converged"] = b.eig.converged;
    x["eigenvalues"] = b.eig.values;
    x["residuals"] = b.eig.residuals;
    j["blocks"].push_back(x);
  }
  if (km) {
    json k;
    k["total_near_zero"] = km->total;
    k["expected_layout"] = km->expected_layout;
    json nz = json::array();
    for (const auto& [name, c] : km->near_zero) nz.push_back({{"block", name}, {"count", c}});
    k["near_zero"] = nz;
    json sc = json::array();
    for (const auto& s : km->scores)
      sc.push_back({{"vector", "V" + std::to_string(s.vector)},
                    {"block", s.block},
                    {"similarity", s.similarity},
                    {"angle", s.angle}});
    k["scores"] = sc;
    j["kernel"] = k;
  } else {
    j["kernel"] = nullptr;
  }
  return j.dump(1) + "\n";
}

std::string profile_csv(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("profile_csv needs derivatives");
  std::string out = "r,u,v,du,dv\n";
  for (int i = 0; i < p.nodes(); ++i)
    out += format_double(p.r()[i]) + "," + format_double(p.u[i]) + "," + format_double(p.v[i]) +
           "," + format_double(p.du[i]) + "," + format_double(p.dv[i]) + "\n";
  return out;
}

std::string margins_csv(const Profile& p) {
  if (!p.has_derivatives()) throw PreconditionError("margins_csv needs derivatives");
  const double s = p.s_plus;
  std::string out = "r,u,minus_v,minus_u_plus_3v,norm_bound,v_plus_s6,p,q\n";
  for (int i = 0; i < p.nodes(); ++i) {
    const double u = p.u[i];
    const double v = p.v[i];
    out += format_double(p.r()[i]) + "," + format_double(u) + "," + format_double(-v) + "," +
           format_double(-(u + 3.0 * v)) + "," + format_double(s * s / 3.0 - u * u - 3.0 * v * v) +
           "," + format_double(v + s / 6.0) + "," + format_double(u * p.du[i]) + "," +
           format_double(-p.dv[i] * (1.0 + 6.0 * v)) + "\n";
  }
  return out;
}

}  // namespace defectlab
