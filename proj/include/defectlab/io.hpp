#pragma once

// Documents and tables written by the command-line tool. Structured output is
// JSON with a fixed key order, tables are CSV; files are replaced atomically.

#include <cstdint>
#include <string>
#include <vector>

#include "defectlab/profile.hpp"
#include "defectlab/properties.hpp"
#include "defectlab/spectral.hpp"

namespace defectlab {

struct SolverInfo {
  bool converged = false;
  int iterations = 0;
  double residual_norm = 0.0;
  int continuation_steps = 0;
  bool h1_warning = false;
};

struct ProfileDocument {
  std::string schema_version = "1";
  BulkParams params;
  MeshSpec mesh;
  double s_plus = 0.0;
  SolverInfo solver;
  std::vector<double> r, u, v, du, dv;
  PropertyReport properties;
};

ProfileDocument make_document(const Profile& p);
// Profile carried by a document (grid rebuilt from the stored nodes).
Profile profile_of(const ProfileDocument& doc);

std::string to_json(const ProfileDocument& doc);
// Rejects unknown or missing keys and inconsistent arrays (IoError).
ProfileDocument profile_document_from_json(const std::string& text);

std::string read_file(const std::string& path);
// Writes to a sibling temporary file, then renames over `path`.
void write_file_atomic(const std::string& path, const std::string& content);

ProfileDocument load_profile(const std::string& path);
void save_profile(const std::string& path, const ProfileDocument& doc);

std::string properties_json(const PropertyReport& rep, const MonotonicityReport& mono);
std::string energy_json(const Profile& p, const EnergyReport& e, const AsymptoticFit* fit);

// block,sector,index,eig_rank,eigenvalue,residual,inertia_below_shift
std::string spectra_csv(const SpectralReport& rep);
std::string spectral_summary_json(const SpectralReport& rep, const KernelMatch* km,
                                  std::uint64_t seed);

// r,u,v,du,dv
std::string profile_csv(const Profile& p);
// r, H1 quantities, the regime quantity v + s+/6, p = u du, q = -dv (1 + 6v)
std::string margins_csv(const Profile& p);

// Shortest round-trip decimal form of a double (as used in the JSON output).
std::string format_double(double x);

}  // namespace defectlab
