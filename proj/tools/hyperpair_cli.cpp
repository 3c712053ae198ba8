// Command-line front end: state construction, coincidence simulation,
// tomography, metrics, and CHSH analysis over the documented file formats.
// Exit codes: 0 success, 2 validation, 3 I/O, 4 numerical failure.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "hyperpair/io.hpp"

namespace fs = std::filesystem;
using namespace hyperpair;

namespace {

struct GlobalArgs {
  std::optional<std::uint64_t> seed;
  int threads = 1;
  fs::path out_dir = ".";
  std::optional<fs::path> config_path;
};

fs::path resolve_out(const GlobalArgs& global, const fs::path& name) {
  return name.is_absolute() ? name : global.out_dir / name;
}

SourceConfig effective_config(const GlobalArgs& global) {
  SourceConfig cfg;
  if (global.config_path) cfg = read_config_file(*global.config_path);
  if (global.seed) cfg.seed = *global.seed;
  return cfg;
}

// Everything a command emits goes through here: outputs land atomically and
// the manifest is written next to the primary output as the last step.
struct RunContext {
  explicit RunContext(std::string command, const GlobalArgs& global)
      : start(std::chrono::steady_clock::now()) {
    manifest.command = std::move(command);
    manifest.seed = global.seed.value_or(0);
    fs::create_directories(global.out_dir);
  }

  void note_input(const fs::path& path) { manifest.inputs.push_back(path.string()); }

  void write_output(const fs::path& path, const std::string& text) {
    detail::write_text_atomic(path, text);
    manifest.outputs.push_back(path.string());
    if (primary.empty()) primary = path;
  }

  void finish() {
    manifest.wall_time_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!primary.empty())
      write_manifest(fs::path(primary.string() + ".manifest.json"), manifest);
  }

  std::chrono::steady_clock::time_point start;
  RunManifest manifest;
  fs::path primary;
};

// --- make-state ---------------------------------------------------------------

int run_make_state(const GlobalArgs& global, const std::string& name, const fs::path& out_name) {
  RunContext run("make-state", global);
  const SourceConfig cfg = effective_config(global);
  if (global.config_path) run.note_input(*global.config_path);

  DensityOperator rho;
  if (!name.empty()) {
    rho = make_named_state(name);
    run.manifest.config = Json{{"name", name}};
  } else {
    rho = build_hyper_state(cfg);
    run.manifest.config = source_config_to_json(cfg);
  }

  fs::path out = out_name;
  if (out.empty()) out = name.empty() ? fs::path("state.json") : fs::path(name + ".json");
  const fs::path path = resolve_out(global, out);
  run.write_output(path, detail::dump_json(state_to_json(rho)));
  run.finish();

  std::cout << "dimension " << rho.dim() << "\n";
  std::cout << "purity " << detail::format_double(purity(rho.matrix)) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

// --- simulate -------------------------------------------------------------------

int run_simulate(const GlobalArgs& global, const fs::path& state_path,
                 const fs::path& settings_path, double duration, const fs::path& out_name) {
  RunContext run("simulate", global);
  run.note_input(state_path);
  run.note_input(settings_path);
  if (global.config_path) run.note_input(*global.config_path);

  const DensityOperator rho = read_density_file(state_path);
  const std::vector<SettingsEntry> settings = read_settings_file(settings_path);
  const SourceConfig cfg = effective_config(global);
  const std::vector<CountRecord> records = simulate_counts(rho, settings, cfg, duration);

  Json snapshot = source_config_to_json(cfg);
  snapshot["duration"] = duration;
  run.manifest.config = std::move(snapshot);

  const fs::path path = resolve_out(global, out_name);
  run.write_output(path, counts_to_csv(records));
  run.finish();

  std::cout << "rows " << records.size() << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

// --- reconstruct ---------------------------------------------------------------

int run_reconstruct(const GlobalArgs& global, const fs::path& counts_path,
                    const fs::path& settings_path, const std::optional<fs::path>& options_path,
                    const std::optional<std::string>& method_flag,
                    const std::optional<int>& max_iter_flag,
                    const std::optional<double>& tolerance_flag, const fs::path& out_name) {
  RunContext run("reconstruct", global);
  run.note_input(counts_path);
  run.note_input(settings_path);

  ReconstructionRequest request;
  if (options_path) {
    run.note_input(*options_path);
    request = reconstruction_request_from_json(
        detail::parse_json(detail::read_text_file(*options_path), options_path->string()));
  }
  if (method_flag) {
    if (*method_flag == "mle") request.method = TomographyMethod::Mle;
    else if (*method_flag == "linear") request.method = TomographyMethod::Linear;
    else throw ValidationError("reconstruct: unknown method '" + *method_flag + "'");
  }
  if (max_iter_flag) request.options.max_iterations = *max_iter_flag;
  if (tolerance_flag) request.options.tolerance = *tolerance_flag;

  TomographyProblem problem;
  problem.set = projector_set_from_settings(read_settings_file(settings_path));
  problem.counts = read_counts_file(counts_path);
  problem.method = request.method;
  problem.options = request.options;

  const TomographyResult result = reconstruct(problem);

  run.manifest.config = reconstruction_request_to_json(request);
  const std::string rho_text = detail::dump_json(state_to_json(result.rho));
  const std::string diag_text = detail::dump_json(diagnostics_to_json(result));
  const fs::path rho_path = resolve_out(global, out_name);
  run.write_output(rho_path, rho_text);
  run.write_output(resolve_out(global, "diagnostics.json"), diag_text);
  run.finish();

  std::cout << "iterations " << result.iterations << "\n";
  std::cout << "converged " << (result.converged ? "true" : "false") << "\n";
  if (!result.log_likelihood.empty())
    std::cout << "log_likelihood " << detail::format_double(result.log_likelihood.back()) << "\n";
  std::cout << "intensity " << detail::format_double(result.intensity) << "\n";
  std::cout << "wrote " << rho_path.string() << "\n";
  if (!result.converged)
    std::cerr << "warning: fit stopped at the iteration cap before meeting tolerance\n";
  return 0;
}

// --- metrics --------------------------------------------------------------------

int run_metrics(const GlobalArgs& global, const std::optional<fs::path>& state_path,
                const std::optional<fs::path>& target_path,
                const std::optional<fs::path>& fringe_path, const fs::path& out_name) {
  if (!state_path && !fringe_path)
    throw ValidationError("metrics: provide --state and/or --fringe");
  RunContext run("metrics", global);

  Json j = Json::object();
  if (state_path) {
    run.note_input(*state_path);
    const DensityOperator rho = read_density_file(*state_path);
    std::optional<DensityOperator> target;
    if (target_path) {
      run.note_input(*target_path);
      target = read_density_file(*target_path);
    }
    j = metric_report_to_json(metric_report(rho, target));
  }
  if (fringe_path) {
    run.note_input(*fringe_path);
    j["visibility"] = visibility(fringe_from_csv(detail::read_text_file(*fringe_path)));
  }

  const fs::path path = resolve_out(global, out_name);
  run.write_output(path, detail::dump_json(j));
  run.finish();

  for (const auto& [key, value] : j.items())
    std::cout << key << " " << detail::format_double(value.get<double>()) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

// --- bell -----------------------------------------------------------------------

// Projection request: {"a": <analyzer setting>|null, "b": ...}. Projected
// DOFs are measured destructively; the remaining subsystems carry the Bell
// test.
DensityOperator apply_projection(const DensityOperator& rho, const Json& request) {
  if (!request.is_object()) throw ValidationError("projection: expected a JSON object");
  std::vector<std::pair<int, Vector>> projections;
  const auto add_photon = [&](const char* key, Party party) {
    const auto it = request.find(key);
    if (it == request.end() || it->is_null()) return;
    const AnalyzerSetting s = analyzer_setting_from_json(*it, std::string("projection.") + key);
    if (s.ket)
      throw ValidationError("projection: raw kets are not supported; project per DOF");
    for (int i : rho.layout.party_indices(party)) {
      const int d = rho.layout.dim_of(i);
      switch (rho.layout.sub(i).dof) {
        case Dof::Poln:
          if (s.poln) projections.emplace_back(i, poln_projector(*s.poln));
          break;
        case Dof::Spatial:
          if (s.spatial) {
            const double n = s.spatial->ket.norm();
            if (s.spatial->ket.size() != d || std::abs(n - 1.0) > 1e-6)
              throw ValidationError("projection: spatial ket must be unit norm of dimension " +
                                    std::to_string(d));
            projections.emplace_back(i, (s.spatial->ket / n).eval());
          }
          break;
        case Dof::Etime:
          if (s.etime) projections.emplace_back(i, etime_projector(*s.etime));
          break;
        case Dof::Generic:
          break;
      }
    }
  };
  add_photon("a", Party::A);
  add_photon("b", Party::B);
  if (projections.empty())
    throw ValidationError("projection: no DOF of the state matches the request");
  return subspace_project(rho, projections);
}

std::vector<FringePoint> fringe_scan(const DensityOperator& rho, int points) {
  if (points < 4) throw ValidationError("bell: fringe scan needs at least 4 points");
  const Vector plus = (basis_ket(2, 0) + basis_ket(2, 1)) / std::numbers::sqrt2;
  const Matrix pb = plus * plus.adjoint();
  std::vector<FringePoint> out;
  for (int k = 0; k < points; ++k) {
    const double phase = 2.0 * std::numbers::pi * k / points;
    Vector ka(2);
    ka << 1.0, std::exp(Complex(0.0, phase));
    ka /= std::numbers::sqrt2;
    const Matrix element = kron(ka * ka.adjoint(), pb);
    out.push_back({phase, std::max((rho.matrix * element).trace().real(), 0.0)});
  }
  return out;
}

int run_bell(const GlobalArgs& global, const std::optional<fs::path>& state_path,
             const std::optional<fs::path>& counts_path, bool optimize,
             const std::optional<fs::path>& chsh_path, const std::optional<fs::path>& project_path,
             const std::optional<fs::path>& fringe_out, int fringe_points,
             const fs::path& out_name) {
  if (state_path == std::nullopt && counts_path == std::nullopt)
    throw ValidationError("bell: provide --state or --counts");
  if (state_path && counts_path)
    throw ValidationError("bell: --state and --counts are mutually exclusive");
  RunContext run("bell", global);

  BellResult result;
  std::optional<ChshSettings> settings;

  if (state_path) {
    if (optimize == bool(chsh_path))
      throw ValidationError("bell: state mode needs exactly one of --optimize or --chsh");
    run.note_input(*state_path);
    DensityOperator rho = read_density_file(*state_path);
    if (project_path) {
      run.note_input(*project_path);
      rho = apply_projection(
          rho, detail::parse_json(detail::read_text_file(*project_path), project_path->string()));
    }
    if (optimize) {
      settings = optimal_chsh(rho).settings;
    } else {
      run.note_input(*chsh_path);
      settings = chsh_settings_from_json(
          detail::parse_json(detail::read_text_file(*chsh_path), chsh_path->string()));
    }
    result = chsh_from_state(rho, *settings);
    if (fringe_out) {
      const fs::path path = resolve_out(global, *fringe_out);
      run.write_output(path, fringe_to_csv(fringe_scan(rho, fringe_points)));
    }
  } else {
    if (optimize || chsh_path || project_path || fringe_out)
      throw ValidationError("bell: counts mode only evaluates the recorded settings");
    run.note_input(*counts_path);
    result = chsh_from_counts(read_counts_file(*counts_path));
  }

  const fs::path path = resolve_out(global, out_name);
  run.write_output(path, detail::dump_json(bell_result_to_json(result, settings)));
  run.finish();

  std::cout << "S " << detail::format_double(result.S) << "\n";
  if (result.sigma) std::cout << "sigma " << detail::format_double(*result.sigma) << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

// --- settings-gen ----------------------------------------------------------------

std::vector<SettingsEntry> canonical_poln_entries() {
  const std::vector<std::pair<std::string, std::string>> names = {
      {"b0", "H"}, {"b1", "V"}, {"s0_1", "D"}, {"i0_1", "L"}};
  std::vector<SettingsEntry> entries;
  for (const auto& [id_a, name_a] : names) {
    for (const auto& [id_b, name_b] : names) {
      SettingsEntry e;
      e.id_a = id_a;
      e.id_b = id_b;
      e.a.poln = named_poln_setting(name_a);
      e.b.poln = named_poln_setting(name_b);
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

std::vector<SettingsEntry> canonical_entries_from_set(const ProjectorSet& set, bool spatial) {
  std::vector<SettingsEntry> entries;
  for (const ProjectorKet& a : set.kets) {
    for (const ProjectorKet& b : set.kets) {
      SettingsEntry e;
      e.id_a = a.id;
      e.id_b = b.id;
      if (spatial) {
        e.a.spatial = SpatialSetting{a.ket};
        e.b.spatial = SpatialSetting{b.ket};
      } else {
        e.a.ket = a.ket;
        e.b.ket = b.ket;
      }
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

std::vector<SettingsEntry> chsh_entries(const ChshSettings& s) {
  const std::array<Vector, 4> kets_a = {s.a.ket, s.a.perp, s.a_prime.ket, s.a_prime.perp};
  const std::array<Vector, 4> kets_b = {s.b.ket, s.b.perp, s.b_prime.ket, s.b_prime.perp};
  std::vector<SettingsEntry> entries;
  for (size_t i = 0; i < 4; ++i) {
    for (size_t j = 0; j < 4; ++j) {
      SettingsEntry e;
      e.id_a = chsh_ids_a()[i];
      e.id_b = chsh_ids_b()[j];
      e.a.ket = kets_a[i];
      e.b.ket = kets_b[j];
      entries.push_back(std::move(e));
    }
  }
  return entries;
}

int run_settings_gen(const GlobalArgs& global, const std::string& mode, const std::string& dof,
                     const std::optional<fs::path>& state_path,
                     const std::optional<fs::path>& chsh_out, const fs::path& out_name) {
  RunContext run("settings-gen", global);
  std::vector<SettingsEntry> entries;
  std::optional<ChshSettings> settings;

  if (mode == "canonical") {
    if (dof == "poln") {
      entries = canonical_poln_entries();
    } else if (dof == "spatial") {
      entries = canonical_entries_from_set(canonical_set(3), true);
    } else if (dof == "poln_spa") {
      entries = canonical_entries_from_set(canonical_set(6), false);
    } else if (dof == "etime") {
      throw ValidationError(
          "settings-gen: energy-time analyzers only reach phase settings, which cannot form a "
          "complete tomography family");
    } else {
      throw ValidationError("settings-gen: unknown --dof '" + dof + "'");
    }
    run.manifest.config = Json{{"mode", mode}, {"dof", dof}};
  } else if (mode == "chsh") {
    if (!state_path) throw ValidationError("settings-gen: chsh mode needs --state");
    run.note_input(*state_path);
    settings = optimal_chsh(read_density_file(*state_path)).settings;
    entries = chsh_entries(*settings);
    run.manifest.config = Json{{"mode", mode}};
  } else {
    throw ValidationError("settings-gen: unknown --mode '" + mode + "'");
  }

  const std::string entries_text = detail::dump_json(settings_to_json(entries));
  const fs::path path = resolve_out(global, out_name);
  run.write_output(path, entries_text);
  if (settings && chsh_out)
    run.write_output(resolve_out(global, *chsh_out),
                     detail::dump_json(chsh_settings_to_json(*settings)));
  run.finish();

  std::cout << "entries " << entries.size() << "\n";
  std::cout << "wrote " << path.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperentangled photon-pair simulation and reconstruction"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  GlobalArgs global;
  app.add_option("--seed", global.seed, "override the RNG seed");
  app.add_option("--threads", global.threads, "worker thread cap (results are thread-invariant)")
      ->check(CLI::PositiveNumber);
  app.add_option("--out-dir", global.out_dir, "directory for output files");
  app.add_option("--config", global.config_path, "source configuration JSON");

  // make-state
  auto* make_state = app.add_subcommand("make-state", "write a catalog or configured state");
  std::string ms_name;
  fs::path ms_out;
  make_state->add_option("--name", ms_name, "catalog state name");
  make_state->add_option("--out", ms_out, "output state JSON path");

  // simulate
  auto* simulate = app.add_subcommand("simulate", "simulate coincidence counts");
  fs::path sim_state, sim_settings, sim_out = "counts.csv";
  double sim_duration = 1.0;
  simulate->add_option("--state", sim_state, "state JSON")->required();
  simulate->add_option("--settings", sim_settings, "settings JSON")->required();
  simulate->add_option("--duration", sim_duration, "acquisition seconds per setting");
  simulate->add_option("--out", sim_out, "output counts CSV path");

  // reconstruct
  auto* reconstruct_cmd = app.add_subcommand("reconstruct", "fit a density matrix to counts");
  fs::path rec_counts, rec_settings, rec_out = "rho.json";
  std::optional<fs::path> rec_options;
  std::optional<std::string> rec_method;
  std::optional<int> rec_max_iter;
  std::optional<double> rec_tolerance;
  reconstruct_cmd->add_option("--counts", rec_counts, "counts CSV")->required();
  reconstruct_cmd->add_option("--settings", rec_settings, "settings JSON")->required();
  reconstruct_cmd->add_option("--options", rec_options, "reconstruction options JSON");
  reconstruct_cmd->add_option("--method", rec_method, "mle or linear");
  reconstruct_cmd->add_option("--max-iterations", rec_max_iter, "iteration cap");
  reconstruct_cmd->add_option("--tolerance", rec_tolerance, "log-likelihood gain floor");
  reconstruct_cmd->add_option("--out", rec_out, "output state JSON path");

  // metrics
  auto* metrics_cmd = app.add_subcommand("metrics", "entanglement and mixedness measures");
  std::optional<fs::path> met_state, met_target, met_fringe;
  fs::path met_out = "metrics.json";
  metrics_cmd->add_option("--state", met_state, "state JSON");
  metrics_cmd->add_option("--target", met_target, "fidelity target state JSON");
  metrics_cmd->add_option("--fringe", met_fringe, "fringe CSV for visibility");
  metrics_cmd->add_option("--out", met_out, "output metrics JSON path");

  // bell
  auto* bell_cmd = app.add_subcommand("bell", "CHSH analysis of a state or counts");
  std::optional<fs::path> bell_state, bell_counts, bell_chsh, bell_project, bell_fringe;
  bool bell_optimize = false;
  int bell_fringe_points = 24;
  fs::path bell_out = "bell.json";
  bell_cmd->add_option("--state", bell_state, "state JSON");
  bell_cmd->add_option("--counts", bell_counts, "counts CSV with CHSH setting ids");
  bell_cmd->add_flag("--optimize", bell_optimize, "search for the optimal settings");
  bell_cmd->add_option("--chsh", bell_chsh, "CHSH settings JSON");
  bell_cmd->add_option("--project", bell_project, "projection request JSON");
  bell_cmd->add_option("--fringe", bell_fringe, "write a phase-scan fringe CSV here");
  bell_cmd->add_option("--fringe-points", bell_fringe_points, "fringe scan sample count");
  bell_cmd->add_option("--out", bell_out, "output Bell JSON path");

  // settings-gen
  auto* gen = app.add_subcommand("settings-gen", "generate analyzer settings files");
  std::string gen_mode, gen_dof;
  std::optional<fs::path> gen_state, gen_chsh_out;
  fs::path gen_out = "settings.json";
  gen->add_option("--mode", gen_mode, "canonical or chsh")->required();
  gen->add_option("--dof", gen_dof, "canonical mode: poln, spatial, or poln_spa");
  gen->add_option("--state", gen_state, "chsh mode: state JSON to optimize for");
  gen->add_option("--chsh-out", gen_chsh_out, "chsh mode: also write CHSH settings JSON");
  gen->add_option("--out", gen_out, "output settings JSON path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    if (err.get_exit_code() == 0) return app.exit(err);
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  }

  try {
    if (*make_state) return run_make_state(global, ms_name, ms_out);
    if (*simulate) return run_simulate(global, sim_state, sim_settings, sim_duration, sim_out);
    if (*reconstruct_cmd)
      return run_reconstruct(global, rec_counts, rec_settings, rec_options, rec_method,
                             rec_max_iter, rec_tolerance, rec_out);
    if (*metrics_cmd) return run_metrics(global, met_state, met_target, met_fringe, met_out);
    if (*bell_cmd)
      return run_bell(global, bell_state, bell_counts, bell_optimize, bell_chsh, bell_project,
                      bell_fringe, bell_fringe_points, bell_out);
    if (*gen) return run_settings_gen(global, gen_mode, gen_dof, gen_state, gen_chsh_out, gen_out);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ValidationError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 3;
  } catch (const NumericalError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 4;
  }
}
