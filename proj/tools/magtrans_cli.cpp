// Command-line front end: synthesize sweep files and run the analysis
// stages on measured or synthetic sweeps.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "magtrans/magtrans.hpp"

namespace fs = std::filesystem;
using namespace magtrans;

namespace {

struct GlobalOptions {
  std::string config_path;
  std::string out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::string fit_window;
  std::optional<double> h_min;
  std::optional<double> anchor;
  std::optional<double> kappa_per_nm;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& bytes) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path.string());
  out << bytes;
}

AnalysisConfig build_config(const GlobalOptions& g) {
  AnalysisConfig cfg;
  if (!g.config_path.empty()) cfg = analysis_config_from_json(Json::parse(read_file(g.config_path)));
  if (!g.fit_window.empty()) {
    const auto comma = g.fit_window.find(',');
    double lo = 0.0, hi = 0.0;
    if (comma == std::string::npos || !detail::parse_double(std::string_view(g.fit_window).substr(0, comma), lo) ||
        !detail::parse_double(std::string_view(g.fit_window).substr(comma + 1), hi))
      throw InputError("--fit-window expects Bmin,Bmax in tesla");
    cfg.fit_min = lo;
    cfg.fit_max = hi;
  }
  if (g.h_min) cfg.h_min = *g.h_min;
  if (g.anchor) cfg.anchor_T = *g.anchor;
  if (g.kappa_per_nm) cfg.kappa = *g.kappa_per_nm * 1e9;
  validate(cfg);
  return cfg;
}

std::vector<Dataset> load(const std::vector<std::string>& files, const AnalysisConfig& cfg) {
  std::vector<SweepRecord> sweeps;
  std::vector<std::string> warnings;
  std::vector<std::pair<std::string, InputSource>> owners;  // sample id -> file
  for (const auto& f : files) {
    const std::string bytes = read_file(f);
    std::istringstream in(bytes);
    auto parsed = parse_sweep_csv(in, f, &warnings);
    const InputSource src{f, fnv1a_hex(bytes)};
    for (const auto& s : parsed)
      if (std::none_of(owners.begin(), owners.end(),
                       [&](auto& o) { return o.first == s.sample_id && o.second.path == f; }))
        owners.emplace_back(s.sample_id, src);
    sweeps.insert(sweeps.end(), parsed.begin(), parsed.end());
  }
  auto sets = group_by_sample(sweeps, cfg);
  for (auto& d : sets) {
    for (const auto& [id, src] : owners)
      if (id == d.sample_id) d.sources.push_back(src);
    for (const auto& w : warnings)
      if (w.find("sweep " + d.sample_id + " ") != std::string::npos) d.warnings.push_back(w);
  }
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';
  return sets;
}

const char* stage_file(StageLimit limit) {
  switch (limit) {
    case StageLimit::Hall: return "hall.json";
    case StageLimit::Wl: return "fit-wl.json";
    case StageLimit::Collapse: return "collapse.json";
    case StageLimit::All: return "report.json";
  }
  return "report.json";
}

std::string summary(const Report& r) {
  std::ostringstream s;
  s << r.sample_id << ": hall " << to_string(r.hall.state.status);
  if (r.hall.state.ok()) s << " (n = " << r.hall.n_2d.value << " m^-2, kF l = " << r.hall.kf_l.value << ")";
  s << "; wl " << to_string(r.wl.state.status);
  if (r.wl.state.ok()) s << " (delta = " << r.wl.delta.value << " m)";
  s << "; powerlaw " << to_string(r.powerlaw.state.status);
  if (r.powerlaw.state.ok()) s << " (p = " << r.powerlaw.fit.exponent << ")";
  s << "; collapse " << to_string(r.collapse.state.status);
  if (r.collapse.state.ok()) s << " (F = " << r.collapse.result.aa.F << ")";
  for (const StageState* st : {&r.hall.state, &r.wl.state, &r.powerlaw.state, &r.collapse.state})
    if (st->status == StageStatus::Error) s << "\n  error: " << st->message;
  return s.str();
}

int analyze(const GlobalOptions& g, const std::vector<std::string>& files, StageLimit limit) {
  const AnalysisConfig cfg = build_config(g);
  const auto sets = load(files, cfg);
  // Samples are independent and write to their own directories.
  std::vector<std::future<std::pair<Report, std::string>>> jobs;
  for (const auto& d : sets)
    jobs.push_back(std::async(std::launch::async, [&g, &d, limit] {
      Report r = run_analysis(d, limit);
      const fs::path dir = fs::path(g.out_dir) / d.sample_id;
      write_file(dir / stage_file(limit), report_to_json(r).dump(2) + "\n");
      if (limit == StageLimit::All) write_plot_files(r, dir);
      return std::pair{std::move(r), dir.string()};
    }));
  int status = 0;
  for (auto& j : jobs) {
    const auto [r, dir] = j.get();
    std::cout << summary(r) << "\n  -> " << dir << '\n';
    if (r.has_error()) status = 1;
  }
  return status;
}

int synthesize(const GlobalOptions& g, const std::string& config_path) {
  SynthConfig cfg = synth_config_from_json(Json::parse(read_file(config_path)));
  if (g.seed) cfg.seed = *g.seed;
  const auto sweeps = generate_dataset(cfg);
  std::ostringstream csv;
  write_sweep_csv(csv, sweeps);
  const fs::path dir = fs::path(g.out_dir) / cfg.sample_id;
  write_file(dir / "sweeps.csv", csv.str());

  AnalysisConfig a;
  a.geometry = cfg.geometry;
  a.g_factor = cfg.g_factor;
  write_file(dir / "analysis.json", to_json(a).dump(2) + "\n");
  std::cout << "wrote " << sweeps.size() << " sweeps to " << (dir / "sweeps.csv").string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Magnetotransport analysis: Hall, weak localization, interaction collapse"};
  app.set_version_flag("--version", std::string("magtrans ") + kToolVersion);
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions g;
  app.add_option("--config", g.config_path, "Analysis configuration (JSON)")->check(CLI::ExistingFile);
  app.add_option("--out", g.out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", g.seed, "Noise seed for synth (overrides the config)");
  app.add_option("--fit-window", g.fit_window, "Field window of the WL fit, Bmin,Bmax in T");
  app.add_option("--h-min", g.h_min, "Lowest reduced field used for F");
  app.add_option("--anchor", g.anchor, "Bath temperature (K) of the collapse anchor");
  app.add_option("--kappa", g.kappa_per_nm, "r_s constant g_v/a_B in 1/nm");

  std::vector<std::string> files;
  std::string synth_config;
  auto add_analysis = [&](const char* name, const char* help) {
    auto* sub = app.add_subcommand(name, help);
    sub->add_option("files", files, "Sweep CSV files")->required()->check(CLI::ExistingFile);
    return sub;
  };
  auto* hall = add_analysis("hall", "Carrier density, mobility and derived parameters");
  auto* fit_wl = add_analysis("fit-wl", "Hall plus weak-localization fits and the coherence power law");
  auto* collapse = add_analysis("collapse", "Everything up to the effective-temperature collapse");
  auto* report = add_analysis("report", "Full analysis with plot data");
  auto* synth = app.add_subcommand("synth", "Generate synthetic sweep files");
  synth->add_option("config", synth_config, "Generator configuration (JSON)")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) return synthesize(g, synth_config);
    if (*hall) return analyze(g, files, StageLimit::Hall);
    if (*fit_wl) return analyze(g, files, StageLimit::Wl);
    if (*collapse) return analyze(g, files, StageLimit::Collapse);
    if (*report) return analyze(g, files, StageLimit::All);
  } catch (const std::exception& e) {
    std::cerr << "magtrans: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
