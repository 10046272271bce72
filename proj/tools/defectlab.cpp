// defectlab: radial point-defect profiles and the stability of their second variation.
//
// Exit codes: 0 ok, 1 usage or domain error, 2 solver failure, 3 verification
// or stability contract failure, 4 IO failure.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "defectlab/error.hpp"
#include "defectlab/io.hpp"
#include "defectlab/profile.hpp"
#include "defectlab/properties.hpp"
#include "defectlab/spectral.hpp"
#include "defectlab/verify.hpp"

namespace fs = std::filesystem;
using namespace defectlab;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSolver = 2, kContract = 3, kIo = 4 };

struct Config {
  double t = 0.0;
  int k = 0;
  double r_max = 40.0;
  int nodes = 4096;
  std::string grading = "uniform";
  double ratio = 1.0;
  std::string out;
  std::string profile;
  int n_max = 8;
  int m_max = 8;
  int eigs = 4;
  double shift = -1e-6;
  std::string checks = "all";
  std::uint64_t seed = 0;
};

// Writes to `path`, or to stdout when empty.
void emit(const std::string& path, const std::string& text) {
  if (path.empty()) {
    std::cout << text;
    return;
  }
  write_file_atomic(path, text);
}

Profile load(const Config& c) {
  if (!fs::exists(c.profile)) throw UsageError("profile not found: " + c.profile);
  Profile p = profile_of(load_profile(c.profile));
  if (!p.converged) std::cerr << "warning: profile was not converged\n";
  return p;
}

int cmd_solve(const Config& c) {
  MeshSpec mesh;
  mesh.r_max = c.r_max;
  mesh.intervals = c.nodes;
  mesh.grading = grading_from_string(c.grading);
  mesh.ratio = c.ratio;
  mesh.validate();
  const BulkParams params{c.t, c.k};
  params.validate();
  SolverOptions so;
  so.throw_on_failure = false;
  const Profile p = solve_profile(params, mesh, so);
  save_profile(c.out, make_document(p));
  if (!p.converged) {
    std::cerr << "solver did not converge (residual " << format_double(p.residual_norm) << ")\n";
    return kSolver;
  }
  return kOk;
}

int cmd_stability(const Config& c) {
  const Profile p = load(c);
  SweepOptions so;
  so.n_max = c.n_max;
  so.m_max = c.m_max;
  so.count = c.eigs;
  so.shift_scaled = c.shift;
  so.seed = c.seed;
  if (c.eigs < 1) throw UsageError("--eigs must be >= 1");
  const SpectralReport rep = stability_sweep(p, so);

  KernelMatch km;
  const bool with_kernel = std::abs(p.params.k) == 1;
  if (with_kernel) km = kernel_match(p, rep);

  const fs::path out(c.out);
  fs::path csv = out;
  csv.replace_extension(".csv");
  write_file_atomic(out.string(), spectral_summary_json(rep, with_kernel ? &km : nullptr, c.seed));
  write_file_atomic(csv.string(), spectra_csv(rep));

  const double tol = EigenOptions{}.tol;
  bool certified = true;
  for (const auto& b : rep.blocks) {
    if (!b.eig.converged) certified = false;
    for (double r : b.eig.residuals)
      if (!(r <= tol)) certified = false;
  }
  std::cout << "verdict " << to_string(rep.verdict) << "\n";
  if (!certified) {
    std::cerr << "eigenpair residual contract violated\n";
    return kContract;
  }
  return kOk;
}

int cmd_verify(const Config& c) {
  VerifyOptions vo;
  vo.groups = parse_check_list(c.checks);
  vo.seed = c.seed;
  vo.n_max = c.n_max;
  vo.m_max = c.m_max;
  const Profile p = load(c);
  const VerifyReport rep = run_verification(p, vo);
  emit(c.out, verification_json(rep));
  for (const auto& ch : rep.checks)
    if (!ch.pass) std::cerr << "failed: " << ch.name << "\n";
  return rep.all_pass() ? kOk : kContract;
}

int cmd_properties(const Config& c) {
  const Profile p = load(c);
  const PropertyReport rep = check_properties(p);
  emit(c.out, properties_json(rep, strict_monotonicity(p)));
  return rep.all_satisfied() ? kOk : kContract;
}

int cmd_energy(const Config& c) {
  const Profile p = load(c);
  const AsymptoticFit fit = asymptotic_fit(p);
  emit(c.out, energy_json(p, reduced_energy(p), &fit));
  return kOk;
}

int cmd_plotdata(const Config& c) {
  const Profile p = load(c);
  const fs::path dir(c.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  write_file_atomic((dir / "profile.csv").string(), profile_csv(p));
  write_file_atomic((dir / "margins.csv").string(), margins_csv(p));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Radial point defects of the 2-D Landau-de Gennes model and their stability"};
  app.require_subcommand(1);
  Config c;

  auto mesh_flags = [&](CLI::App* s) {
    s->add_option("--rmax", c.r_max, "Truncation radius")->capture_default_str();
    s->add_option("--nodes", c.nodes, "Number of mesh intervals")->capture_default_str();
    s->add_option("--grading", c.grading, "uniform or geometric")->capture_default_str();
    s->add_option("--ratio", c.ratio, "Cell growth factor for geometric grading")
        ->capture_default_str();
  };
  auto profile_flag = [&](CLI::App* s) {
    s->add_option("--profile", c.profile, "Profile document")->required();
  };
  auto sweep_flags = [&](CLI::App* s) {
    s->add_option("--nmax", c.n_max, "Largest A_n index")->capture_default_str();
    s->add_option("--mmax", c.m_max, "Largest B pair index")->capture_default_str();
    s->add_option("--seed", c.seed, "Seed for randomized internals")->capture_default_str();
  };

  CLI::App* solve = app.add_subcommand("solve", "Solve the radial profile");
  solve->add_option("--t", c.t, "Reduced temperature (> 0)")->required();
  solve->add_option("--k", c.k, "Winding number (nonzero)")->required();
  mesh_flags(solve);
  solve->add_option("--out", c.out, "Output profile document")->required();

  CLI::App* stab = app.add_subcommand("stability", "Block spectra of the second variation");
  profile_flag(stab);
  sweep_flags(stab);
  stab->add_option("--eigs", c.eigs, "Eigenvalues per block")->capture_default_str();
  stab->add_option("--shift", c.shift, "Inertia shift in units of s+^2")->capture_default_str();
  stab->add_option("--out", c.out, "Summary JSON (spectra CSV uses the same stem)")->required();

  CLI::App* ver = app.add_subcommand("verify", "Numerical verification checks");
  profile_flag(ver);
  sweep_flags(ver);
  ver->add_option("--checks", c.checks,
                  "all, or a comma list of identities,sos,oracle,residual,kernel")
      ->capture_default_str();
  ver->add_option("--out", c.out, "Report JSON (stdout if omitted)");

  CLI::App* prop = app.add_subcommand("properties", "Qualitative profile properties");
  profile_flag(prop);
  prop->add_option("--out", c.out, "Report JSON (stdout if omitted)");

  CLI::App* en = app.add_subcommand("energy", "Reduced energy and asymptotics");
  profile_flag(en);
  en->add_option("--out", c.out, "Report JSON (stdout if omitted)");

  CLI::App* plot = app.add_subcommand("plotdata", "CSV tables for plotting");
  profile_flag(plot);
  plot->add_option("--out", c.out, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*solve) return cmd_solve(c);
    if (*stab) return cmd_stability(c);
    if (*ver) return cmd_verify(c);
    if (*prop) return cmd_properties(c);
    if (*en) return cmd_energy(c);
    if (*plot) return cmd_plotdata(c);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    std::cerr << "domain error: " << e.what() << "\n";
    return kUsage;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << "\n";
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kContract;
  }
  return kUsage;
}
