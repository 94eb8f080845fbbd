// oos: command-line front end (model, freqresp, synth, mu, traj).

#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "oos/analysis.hpp"
#include "oos/io.hpp"

using namespace oos;
namespace fs = std::filesystem;

namespace {

enum Exit { ok = 0, usage = 2, validation = 3, numerical = 4 };

struct Common {
  std::string config = default_mission_path();
  std::string out = "out";
  std::string waypoints;
  std::uint64_t seed = 1;
};

MissionConfig load(const Common& o) {
  auto c = load_mission(o.config);
  if (!o.waypoints.empty()) apply_waypoint_overrides(c, read_json_file(o.waypoints));
  return c;
}

io::RunManifest manifest(const std::string& cmd, const Common& o, std::map<std::string, std::string> ov) {
  fs::create_directories(o.out);
  io::RunManifest m;
  m.command = cmd;
  m.config = o.config;
  m.out = o.out;
  m.seed = o.seed;
  if (!o.waypoints.empty()) ov["waypoints"] = o.waypoints;
  m.overrides = std::move(ov);
  return m;
}

// "lo:hi" in Hz
std::pair<double, double> parse_band(const std::string& s) {
  const auto k = s.find(':');
  try {
    if (k == std::string::npos) throw std::invalid_argument(s);
    const double lo = std::stod(s.substr(0, k)), hi = std::stod(s.substr(k + 1));
    if (!(lo > 0.0 && hi > lo)) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw CLI::ValidationError("--band", "expected lo:hi with 0 < lo < hi (Hz), got '" + s + "'");
  }
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> v;
  std::stringstream ss(s);
  std::string t;
  while (std::getline(ss, t, sep))
    if (!t.empty()) v.push_back(t);
  return v;
}

// ---------------------------------------------------------------------------

int cmd_model(const Common& o, const std::string& mode_s, std::optional<double> t) {
  const auto c = load(o);
  const PlantMode mode = parse_mode(mode_s);
  const auto tr = mission_trajectory(c);
  LfrModel m;
  if (!t) {
    m = assemble_plant(c, mode, {true, {}, {}});
  } else if (mode == PlantMode::switched) {
    m = plant_at(assemble_plant(c, mode, {true, {}, {}}), pose_at(tr, *t), phase_at(c, *t), true);
  } else {
    const Pose p = pose_at(tr, *t);
    AssemblyOptions a;
    a.theta = p.theta;
    if (mode == PlantMode::dock7) a.alpha = p.alpha;
    m = assemble_plant(c, mode, a);
  }
  auto man = manifest("model", o, {{"mode", mode_s}});
  if (t) man.overrides["time"] = io::num(*t);
  io::save_model(m, o.out + "/model.json");
  io::write_text(o.out + "/structure.txt", io::structure_audit(m));
  man.save();
  std::cout << io::structure_audit(m);
  return ok;
}

int cmd_freqresp(const Common& o, const std::string& model, const std::string& channels, const std::string& band) {
  const auto m = io::load_model(model);
  const auto G = nominal(m);
  std::vector<std::pair<std::string, std::string>> pairs;
  if (channels.empty()) {
    for (auto& i : G.inputs())
      for (auto& y : G.outputs()) pairs.push_back({i, y});
  } else {
    for (auto& c : split(channels, ',')) {
      const auto k = c.find('>');
      if (k == std::string::npos) throw CLI::ValidationError("--channels", "expected in>out, got '" + c + "'");
      pairs.push_back({c.substr(0, k), c.substr(k + 1)});
    }
  }
  for (auto& [i, y] : pairs) {
    if (!G.find_input(i)) throw Error(Errc::unknown_channel, "input '" + i + "'");
    if (!G.find_output(y)) throw Error(Errc::unknown_channel, "output '" + y + "'");
  }
  const auto [lo, hi] = parse_band(band);
  const auto f = logspace(lo, hi, static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * 100.0)) + 1);
  io::Csv csv;
  csv.header = {"freq_hz"};
  for (auto& [i, y] : pairs) {
    csv.header.push_back(i + ">" + y + ".mag_db");
    csv.header.push_back(i + ">" + y + ".phase_deg");
  }
  FrequencyEvaluator ev(G);
  for (double hz : f) {
    const CMatrix H = ev(Complex(0.0, kTwoPi * hz));
    std::vector<double> row{hz};
    for (auto& [i, y] : pairs) {
      const Complex h = H(G.output_index(y), G.input_index(i));
      row.push_back(20.0 * std::log10(std::abs(h)));
      row.push_back(std::arg(h) * 180.0 / M_PI);
    }
    csv.add(row);
  }
  auto man = manifest("freqresp", o, {{"model", model}, {"band", band}, {"channels", channels}});
  csv.save(o.out + "/freqresp.csv");
  man.save();
  std::cout << "wrote " << pairs.size() << " channels x " << f.size() << " frequencies\n";
  return ok;
}

int cmd_synth(const Common& o, std::size_t grid, std::size_t budget, const std::string& initial) {
  const auto c = load(o);
  const auto tr = mission_trajectory(c);
  const auto K0 = initial.empty() ? mission_baseline(c) : io::load_gains(initial);
  const auto samples = grid_samples(c, tr, grid);
  const auto models = model_grid(assemble_plant(c, PlantMode::switched, {true, {}, {}}), samples, true);
  const DesignFrame frame(c.weights, c.sensors);
  SynthesisOptions so;
  so.budget = budget;
  so.seed = o.seed;
  const auto r = synthesize(models, frame, K0, so);

  auto man = manifest("synth", o, {{"grid", std::to_string(grid)}, {"budget", std::to_string(budget)}});
  if (!initial.empty()) man.overrides["initial"] = initial;
  io::save_gains(r.gains, o.out + "/gains.json");
  io::Csv csv;
  csv.header = {"t", "phase", "gamma", "gamma_nominal", "gamma_initial"};
  for (std::size_t i = 0; i < models.size(); ++i)
    csv.add({io::num(samples[i].t), phase_name(samples[i].phase), io::num(r.model_gamma[i]),
             io::num(r.model_gamma_nominal[i]), io::num(r.model_gamma_initial[i])});
  csv.save(o.out + "/model_norms.csv");
  std::ostringstream rep;
  rep << "models " << models.size() << ", design pairs " << r.pairs << ", evaluations " << r.evaluations
      << (r.budget_exhausted ? " (budget exhausted)" : "") << "\n"
      << "gamma initial " << io::num(r.gamma_initial) << " (nominal " << io::num(r.gamma_initial_nominal) << ")\n"
      << "gamma final   " << io::num(r.gamma) << " (nominal " << io::num(r.gamma_nominal) << ")\n"
      << "K =\n" << r.gains.K << "\n";
  io::write_text(o.out + "/report.txt", rep.str());
  man.save();
  std::cout << rep.str();
  return r.gamma < 1.0 ? ok : numerical;
}

int cmd_mu(const Common& o, const std::string& experiment, const std::string& gains, std::size_t grid,
           const std::string& band, const std::string& channels, std::size_t per_decade) {
  const auto c = load(o);
  const auto tr = mission_trajectory(c);
  const auto K = gains.empty() ? mission_baseline(c) : io::load_gains(gains);
  const DesignFrame frame(c.weights, c.sensors);
  const auto aug = AugmentedUncertainty::from(c.augmentation);
  const auto [lo, hi] = parse_band(band);
  const auto sym = assemble_plant(c, PlantMode::switched, {true, {}, {}});
  MuOptions mo;
  mo.lower_opt.seed = o.seed;
  auto man = manifest("mu", o, {{"experiment", experiment}, {"band", band}, {"per_decade", std::to_string(per_decade)}});
  if (!gains.empty()) man.overrides["gains"] = gains;
  std::ostringstream rep;

  auto modal = [&](const StateSpaceModel& G) { return modal_frequencies_hz(G); };
  if (experiment == "mission") {
    const std::size_t n = grid ? grid : 330;
    man.overrides["grid"] = std::to_string(n);
    const auto samples = grid_samples(c, tr, n);
    const auto plants = model_grid(sym, samples, true);
    std::vector<LfrModel> loops;
    std::vector<double> fm;
    for (auto& p : plants) {
      loops.push_back(robust_loop(p, frame, K, aug));
      for (double f : modal(nominal(p))) fm.push_back(f);
    }
    std::sort(fm.begin(), fm.end());
    fm.erase(std::unique(fm.begin(), fm.end(), [](double a, double b) { return std::abs(a - b) < 1e-3 * b; }), fm.end());
    const auto w = mu_frequency_grid(fm, lo, hi, static_cast<int>(per_decade));
    const auto s = robust_stability_sweep(loops, w, mo);
    io::Csv csv;
    csv.header = {"t", "freq_hz", "mu_upper", "mu_lower"};
    for (std::size_t i = 0; i < s.size(); ++i)
      for (std::size_t k = 0; k < w.size(); ++k)
        csv.add(std::vector<double>{samples[i].t, w[k] / kTwoPi, s[i].upper[k], s[i].lower[k]});
    csv.save(o.out + "/mu_mission.csv");
    const auto pk = surface_peak(s);
    rep << "mission sweep: " << n << " models x " << w.size() << " frequencies\n"
        << "peak mu " << io::num(pk.mu) << " at t = " << io::num(samples[pk.model].t) << " s, "
        << io::num(pk.omega / kTwoPi) << " Hz (tolerable inflation " << io::num(1.0 / pk.mu) << ")\n"
        << "reference peak reported in the literature: 0.79 (informational)\n";
  } else if (experiment == "docking") {
    const std::size_t n = grid ? grid : 300;
    man.overrides["grid"] = std::to_string(n);
    const auto k = logspace(0.1, 1e5, n);
    const Pose pose = pose_at(tr, c.timeline.first_dock);
    AssemblyOptions a;
    a.theta = pose.theta;
    a.alpha = pose.alpha;
    const auto d7 = assemble_plant(c, PlantMode::dock7, a);
    const auto w = mu_frequency_grid(modal(nominal(substitute(d7, spring_sample(d7, 2.5e3, 100.0)))), lo, hi,
                                     static_cast<int>(per_decade));
    const auto r = docking_stability_sweep(c, K, k, 100.0, w, mo);
    io::Csv csv;
    csv.header = {"stiffness", "freq_hz", "mu_upper", "mu_lower"};
    for (std::size_t i = 0; i < k.size(); ++i)
      for (std::size_t j = 0; j < w.size(); ++j)
        csv.add(std::vector<double>{k[i], w[j] / kTwoPi, r.mu[i].upper[j], r.mu[i].lower[j]});
    csv.save(o.out + "/mu_docking.csv");
    std::size_t unstable = 0;
    for (char u : r.unstable) unstable += u != 0;
    rep << "docking sweep: " << n << " stiffness samples x " << w.size() << " frequencies, " << unstable
        << " nominally unstable\n"
        << "peak mu " << io::num(r.mu[r.peak_index].peak_mu) << " at K = " << io::num(k[r.peak_index]) << ", "
        << io::num(r.mu[r.peak_index].peak_omega / kTwoPi) << " Hz\n"
        << "switch-coupled reference mu " << io::num(r.reference.peak_mu) << "\n"
        << "reference peak reported in the literature: 1.04 (informational)\n";
  } else if (experiment == "worstcase") {
    const std::size_t n = grid ? grid : 20;
    man.overrides["grid"] = std::to_string(n);
    const std::string ch = channels.empty() ? "e.act" : channels;
    if (ch != "e.act" && ch != "e.point") throw CLI::ValidationError("--channels", "worstcase takes e.act or e.point");
    man.overrides["channels"] = ch;
    const auto samples = grid_samples(c, tr, n);
    const auto plants = model_grid(sym, samples, true);
    std::vector<LfrModel> loops;
    for (auto& p : plants) loops.push_back(robust_loop(p, frame, K, aug));
    const auto w = logspace(lo, hi, static_cast<std::size_t>(std::ceil(std::log10(hi / lo) * per_decade)) + 1);
    std::vector<double> wr(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) wr[i] = kTwoPi * w[i];
    const auto r = worst_case_gain(loops, design::axes(ch), wr, mo);
    io::Csv csv;
    csv.header = {"freq_hz", "channel", "bound", "nominal"};
    for (std::size_t i = 0; i < w.size(); ++i) csv.add({io::num(w[i]), ch, io::num(r.bound[i]), io::num(r.nominal[i])});
    csv.save(o.out + "/worstcase.csv");
    rep << "worst-case gain on " << ch << ": " << n << " models x " << w.size() << " frequencies, peak bound "
        << io::num(*std::max_element(r.bound.begin(), r.bound.end())) << "\n";
  } else {
    throw CLI::ValidationError("--experiment", "expected mission, docking or worstcase");
  }
  io::write_text(o.out + "/report.txt", rep.str());
  man.save();
  std::cout << rep.str();
  return ok;
}

int cmd_traj(const Common& o, double step) {
  const auto c = load(o);
  const auto tr = mission_trajectory(c);
  const auto n = static_cast<std::size_t>(std::llround(c.timeline.horizon / step)) + 1;
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = i + 1 == n ? c.timeline.horizon : step * static_cast<double>(i);
  io::Csv pos;
  pos.header = {"t"};
  for (auto j : kJointNames) pos.header.push_back(j);
  for (double ti : t) {
    const Pose p = pose_at(tr, ti);
    std::vector<double> row{ti};
    row.insert(row.end(), p.alpha.begin(), p.alpha.end());
    row.insert(row.end(), p.theta.begin(), p.theta.end());
    pos.add(row);
  }
  const auto J = inertia_evolution(c, tr, t);
  io::Csv in;
  in.header = {"t", "Jxx", "Jyy", "Jzz", "Jxy", "Jxz", "Jyz", "mass", "phase"};
  for (std::size_t i = 0; i < n; ++i) {
    const auto& I = J[i].inertia;
    in.add({io::num(t[i]), io::num(I(0, 0)), io::num(I(1, 1)), io::num(I(2, 2)), io::num(I(0, 1)), io::num(I(0, 2)),
            io::num(I(1, 2)), io::num(J[i].mass), phase_name(phase_at(c, t[i]))});
  }
  auto man = manifest("traj", o, {{"step", io::num(step)}});
  pos.save(o.out + "/trajectory.csv");
  in.save(o.out + "/inertia.csv");
  man.save();
  std::cout << "wrote " << n << " samples\n";
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-spacecraft servicing: LFR models, mu analysis and attitude synthesis"};
  app.require_subcommand(1);
  Common o;
  auto common = [&](CLI::App* s) {
    s->add_option("--config", o.config, "mission configuration (JSON)")->check(CLI::ExistingFile);
    s->add_option("--out", o.out, "output directory");
    s->add_option("--seed", o.seed, "seed for sampled analyses");
    s->add_option("--waypoints", o.waypoints, "waypoint override file (JSON)")->check(CLI::ExistingFile);
  };

  std::string mode = "switched", model, channels, band = "0.01:100", gains, experiment, initial;
  std::optional<double> time;
  std::size_t grid = 200, budget = 20000, mu_grid = 0, per_decade = 60;
  double step = 1.0;

  auto* m = app.add_subcommand("model", "assemble a plant LFR and list its channels and uncertainty structure");
  common(m);
  m->add_option("--mode", mode, "switched | dock7 | dock8");
  m->add_option("--time", time, "mission time (s): fixes geometry and switches");

  auto* f = app.add_subcommand("freqresp", "nominal frequency response of a saved model");
  common(f);
  f->add_option("--model", model, "model file written by 'model'")->required()->check(CLI::ExistingFile);
  f->add_option("--channels", channels, "comma list of in>out (default: all)");
  f->add_option("--band", band, "lo:hi in Hz");

  auto* s = app.add_subcommand("synth", "multimodel static attitude-gain synthesis");
  common(s);
  s->add_option("--grid", grid, "grid models over the mission")->check(CLI::Range(2, 100000));
  s->add_option("--budget", budget, "objective evaluations");
  s->add_option("--gains", initial, "initial gains (default: baseline)")->check(CLI::ExistingFile);

  auto* u = app.add_subcommand("mu", "robustness analysis");
  common(u);
  u->add_option("--experiment", experiment, "mission | docking | worstcase")->required();
  u->add_option("--gains", gains, "controller gains (default: baseline)")->check(CLI::ExistingFile);
  u->add_option("--grid", mu_grid, "models (mission, worstcase) or stiffness samples (docking)");
  u->add_option("--band", band, "lo:hi in Hz");
  u->add_option("--per-decade", per_decade, "frequency points per decade")->check(CLI::Range(1, 10000));
  u->add_option("--channels", channels, "worstcase channel: e.act | e.point");

  auto* t = app.add_subcommand("traj", "joint trajectories and composite inertia");
  common(t);
  t->add_option("--step", step, "sampling step (s)")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
    if (m->parsed()) return cmd_model(o, mode, time);
    if (f->parsed()) return cmd_freqresp(o, model, channels, band);
    if (s->parsed()) return cmd_synth(o, grid, budget, initial);
    if (u->parsed()) return cmd_mu(o, experiment, gains, mu_grid, band, channels, per_decade);
    if (t->parsed()) return cmd_traj(o, step);
  } catch (const CLI::ParseError& e) {
    const int r = app.exit(e);
    return r == 0 ? ok : usage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    if (e.code() == Errc::invalid_mode) return usage;
    return is_validation(e.code()) ? validation : numerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return numerical;
  }
  return usage;
}
