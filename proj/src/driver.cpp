#include "dwr/driver.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dwr {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> words(const std::string& s) {
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string w; in >> w;) out.push_back(w);
  return out;
}

double to_double(const std::string& s) {
  std::size_t pos = 0;
  const double v = std::stod(s, &pos);
  if (pos != s.size()) throw std::invalid_argument("trailing characters in '" + s + "'");
  return v;
}

std::vector<double> numbers(const std::vector<std::string>& w, std::size_t from, std::size_t count) {
  if (w.size() != from + count)
    throw std::invalid_argument("expected " + std::to_string(count) + " numbers after '" + w[0] + "'");
  std::vector<double> out;
  for (std::size_t i = from; i < w.size(); ++i) out.push_back(to_double(w[i]));
  return out;
}

bool to_bool(const std::string& s) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw std::invalid_argument("expected a boolean, got '" + s + "'");
}

OutputLevels to_levels(const std::string& s) {
  if (s == "all") return OutputLevels::all;
  if (s == "last") return OutputLevels::last;
  if (s == "none") return OutputLevels::none;
  throw std::invalid_argument("expected all|last|none, got '" + s + "'");
}

Goal parse_goal(const std::string& value) {
  const auto w = words(value);
  if (w.empty()) throw std::invalid_argument("empty goal");
  Goal g;
  if (w[0] == "point_value") {
    const auto v = numbers(w, 1, 2);
    g = Goal::point_value({v[0], v[1]});
  } else if (w[0] == "point_product") {
    const auto v = numbers(w, 1, 4);
    g = Goal::point_product({v[0], v[1]}, {v[2], v[3]});
  } else if (w[0] == "mean_deviation_squared") {
    const auto v = numbers(w, 1, 2);
    g = Goal::mean_deviation_squared({v[0], v[1]});
  } else if (w[0] == "subdomain_integral") {
    const auto v = numbers(w, 1, 4);
    g = Goal::subdomain_integral({v[0], v[1], v[2], v[3]});
  } else {
    throw std::invalid_argument("unknown goal kind '" + w[0] + "'");
  }
  return g;
}

void set_source(StudyConfig& cfg, const std::string& value) {
  const auto w = words(value);
  const bool ok = (w.size() == 1 && w[0] == "manufactured") || (w.size() == 2 && w[0] == "constant");
  if (!ok) {
    throw std::invalid_argument("source must be 'manufactured' or 'constant <value>'");
  }
  if (w[0] == "constant") to_double(w[1]);
  cfg.source = value;
}

// Builds the source and boundary functions once p and eps are final.
void finish(StudyConfig& cfg) {
  const auto w = words(cfg.source);
  const double p = cfg.problem.p, eps = cfg.problem.eps;
  if (w[0] == "manufactured") {
    cfg.problem = Problem::manufactured(p, eps);
  } else {
    cfg.problem = Problem::constant_source(p, eps, to_double(w[1]));
  }
  if (cfg.goals.goals.size() > 1)
    for (std::size_t i = 0; i < cfg.goals.goals.size(); ++i) cfg.goals.goals[i].name = "J" + std::to_string(i + 1);
}

}  // namespace

StudyConfig experiment_defaults(const std::string& name, const std::filesystem::path& data_dir) {
  StudyConfig cfg;
  cfg.experiment = name;
  if (name == "example1") {
    cfg.problem.p = 4.0;
    cfg.problem.eps = 1e-10;
    cfg.source = "manufactured";
    cfg.domain = DomainSpec::rectangle(-1.0, -1.0, 1.0, 1.0);
    cfg.initial_refinements = 1;
    cfg.goals.goals = {Goal::point_value({0.0, 0.0}, "J")};
    cfg.reference = ReferenceKind::exact;
    cfg.reference_values = {0.0};
    cfg.adapt.max_dofs = 200000;
    cfg.adapt.tol_dis = 1e-12;
  } else if (name == "example2") {
    cfg.problem.p = 4.0;
    cfg.problem.eps = 1e-10;
    cfg.source = "constant 1";
    cfg.domain = DomainSpec::from_file(data_dir / "example2_domain.mesh");
    cfg.initial_refinements = 1;
    cfg.goals.goals = {Goal::point_product({2.9, 2.1}, {2.1, 2.9}), Goal::mean_deviation_squared({2.5, 2.5}),
                       Goal::subdomain_integral({2.0, 2.0, 3.0, 3.0}), Goal::point_value({0.6, 0.6})};
    cfg.reference = ReferenceKind::none;
    cfg.adapt.max_dofs = 50000;
    cfg.adapt.tol_dis = 1e-12;
  } else if (name == "custom") {
    cfg.problem.p = 2.0;
    cfg.problem.eps = 1.0;
    cfg.goals.goals = {Goal::point_value({0.5, 0.5})};
  } else {
    throw ConfigError("unknown experiment '" + name + "'");
  }
  finish(cfg);
  return cfg;
}

StudyConfig parse_config(const std::string& text, const std::filesystem::path& base_dir,
                         const std::filesystem::path& data_dir) {
  struct Entry {
    int line;
    std::string key, value;
  };
  std::vector<Entry> entries;
  {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
      line = trim(line);
      if (line.empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
      entries.push_back({lineno, trim(line.substr(0, eq)), trim(line.substr(eq + 1))});
    }
  }
  std::string experiment = "custom";
  for (const auto& e : entries)
    if (e.key == "experiment") experiment = e.value;

  StudyConfig cfg;
  try {
    cfg = experiment_defaults(experiment, data_dir);
  } catch (const std::exception& ex) {
    int line = 0;
    for (const auto& e : entries)
      if (e.key == "experiment") line = e.line;
    throw ConfigError("config line " + std::to_string(line) + ": " + ex.what());
  }

  bool goals_reset = false;
  for (const auto& e : entries) {
    try {
      const auto& k = e.key;
      const auto& v = e.value;
      if (k == "experiment") {
      } else if (k == "p") {
        cfg.problem.p = to_double(v);
      } else if (k == "eps") {
        cfg.problem.eps = to_double(v);
      } else if (k == "source") {
        set_source(cfg, v);
      } else if (k == "domain") {
        const auto w = words(v);
        if (w.size() == 5 && w[0] == "rectangle") {
          const auto n = numbers(w, 1, 4);
          cfg.domain = DomainSpec::rectangle(n[0], n[1], n[2], n[3]);
        } else if (w.size() == 2 && w[0] == "file") {
          std::filesystem::path p = w[1];
          cfg.domain = DomainSpec::from_file(p.is_absolute() ? p : base_dir / p);
        } else {
          throw std::invalid_argument("domain must be 'rectangle x0 y0 x1 y1' or 'file <path>'");
        }
      } else if (k == "initial_refinements") {
        cfg.initial_refinements = std::stoi(v);
        if (cfg.initial_refinements < 0) throw std::invalid_argument("initial_refinements must be >= 0");
      } else if (k == "goal") {
        if (!goals_reset) {
          cfg.goals.goals.clear();
          cfg.goals.weights.clear();
          goals_reset = true;
        }
        cfg.goals.goals.push_back(parse_goal(v));
      } else if (k == "weights") {
        cfg.goals.weights.clear();
        for (const auto& w : words(v)) cfg.goals.weights.push_back(to_double(w));
      } else if (k == "reference") {
        const auto w = words(v);
        if (w.size() == 1 && w[0] == "none") {
          cfg.reference = ReferenceKind::none;
        } else if (w.size() >= 2 && w[0] == "exact") {
          cfg.reference = ReferenceKind::exact;
          cfg.reference_values = numbers(w, 1, w.size() - 1);
        } else if (w.size() == 2 && w[0] == "file") {
          cfg.reference = ReferenceKind::file;
          std::filesystem::path p = w[1];
          cfg.reference_file = p.is_absolute() ? p : base_dir / p;
        } else {
          throw std::invalid_argument("reference must be 'none', 'exact <values>' or 'file <path>'");
        }
      } else if (k == "tol") {
        cfg.adapt.tol_dis = to_double(v);
      } else if (k == "max_dofs") {
        cfg.adapt.max_dofs = static_cast<std::size_t>(to_double(v));
      } else if (k == "max_levels") {
        cfg.adapt.max_levels = std::stoi(v);
      } else if (k == "refine_fraction") {
        cfg.adapt.marking.refine_fraction = to_double(v);
        if (cfg.adapt.marking.refine_fraction < 0.0 || cfg.adapt.marking.refine_fraction > 1.0)
          throw std::invalid_argument("refine_fraction must lie in [0,1]");
      } else if (k == "coarsen_fraction") {
        cfg.adapt.marking.coarsen_fraction = to_double(v);
      } else if (k == "mode") {
        if (v != "adaptive" && v != "uniform") throw std::invalid_argument("mode must be adaptive or uniform");
        cfg.adapt.uniform = v == "uniform";
      } else if (k == "s_points") {
        cfg.adapt.estimator.s_points = std::stoi(v);
      } else if (k == "s_panels") {
        cfg.adapt.estimator.s_panels = std::stoi(v);
      } else if (k == "remainder") {
        if (v != "quadrature" && v != "closed_form")
          throw std::invalid_argument("remainder must be quadrature or closed_form");
        cfg.adapt.estimator.closed_form_when_cubic = v == "closed_form";
      } else if (k == "compare_sigma_newton") {
        cfg.adapt.compare_sigma_newton = to_bool(v);
      } else if (k == "newton_tol") {
        cfg.adapt.newton.tol = to_double(v);
      } else if (k == "newton_max_iter") {
        cfg.adapt.newton.max_iter = std::stoi(v);
      } else if (k == "output") {
        std::filesystem::path p = v;
        cfg.output_dir = p.is_absolute() ? p : base_dir / p;
      } else if (k == "write_indicators") {
        cfg.indicators = to_levels(v);
      } else if (k == "write_solutions") {
        cfg.solutions = to_levels(v);
      } else if (k == "reference_max_dofs") {
        cfg.reference_max_dofs = static_cast<std::size_t>(to_double(v));
      } else if (k == "verbose") {
        cfg.verbose = to_bool(v);
      } else {
        throw std::invalid_argument("unknown key '" + k + "'");
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& ex) {
      throw ConfigError("config line " + std::to_string(e.line) + ": " + ex.what());
    }
  }
  try {
    finish(cfg);
    cfg.problem.validate();
    cfg.goals.validate();
    if (cfg.reference == ReferenceKind::exact && cfg.reference_values.size() != cfg.goals.goals.size())
      throw std::invalid_argument("reference value count does not match goal count");
    if (!(cfg.adapt.tol_dis > 0.0)) throw std::invalid_argument("tol must be positive");
  } catch (const std::exception& ex) {
    throw ConfigError(std::string("config: ") + ex.what());
  }
  return cfg;
}

StudyConfig load_config(const std::filesystem::path& path, const std::filesystem::path& data_dir) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), path.parent_path(), data_dir);
}

std::vector<double> read_reference_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing reference file " + path.string());
  std::vector<double> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = trim(line);
    if (line.empty()) continue;
    try {
      out.push_back(to_double(line));
    } catch (const std::exception&) {
      throw ConfigError("reference file line " + std::to_string(lineno) + ": expected a number");
    }
  }
  return out;
}

void write_reference_file(const std::filesystem::path& path, const std::vector<double>& values,
                          const std::string& comment) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "# " << comment << '\n' << std::setprecision(17);
  for (double v : values) out << v << '\n';
}

void resolve_reference(StudyConfig& cfg) {
  if (cfg.reference == ReferenceKind::file) {
    cfg.reference_values = read_reference_file(cfg.reference_file);
    if (cfg.reference_values.size() != cfg.goals.goals.size())
      throw ConfigError("reference file " + cfg.reference_file.string() + " has " +
                        std::to_string(cfg.reference_values.size()) + " values for " +
                        std::to_string(cfg.goals.goals.size()) + " goals");
  }
  cfg.adapt.J_ref = cfg.reference == ReferenceKind::none ? std::vector<double>{} : cfg.reference_values;
}

std::vector<double> compute_reference(const StudyConfig& cfg, std::size_t max_dofs, std::ostream* log) {
  auto mesh = std::make_shared<const Mesh>(Mesh::build(cfg.domain, cfg.initial_refinements));
  std::optional<FeFunction> u;
  for (;;) {
    auto V2 = std::make_shared<const Space>(mesh, 2);
    FeFunction init = u ? transfer(*u, V2) : FeFunction(V2);
    apply_dirichlet(cfg.problem, init);
    const Assembler as(V2, default_quadrature(2));
    try {
      u = newton_solve(cfg.problem, as, init, cfg.adapt.newton).first;
    } catch (const std::exception& e) {
      throw SolverFailure(std::string("reference solve failed: ") + e.what());
    }
    if (log) *log << "reference: " << V2->n_dofs() << " Q2 dofs\n";
    auto next = std::make_shared<const Mesh>(mesh->refine_all());
    // Q2 dofs on the refined mesh equal the Q1 dofs after one more refinement.
    if (Space(next, 2).n_dofs() > max_dofs) break;
    mesh = next;
  }
  return goal_values(cfg.goals, *u);
}

const char* const kLevelsHeader =
    "level,dofs,J_tilde,J_enriched,eta2,eta_h2,eta_k,eta_R,I_eff,I_eff_gamma,I_eff_p,I_eff_a,newton_base,newton_"
    "enriched,exact_error";

void write_levels_csv(const std::vector<LevelRecord>& records, std::ostream& out) {
  out << kLevelsHeader << '\n' << std::setprecision(17);
  for (const auto& r : records) {
    out << r.level << ',' << r.dofs << ',' << r.J_tilde << ',' << r.J_enriched << ',' << r.eta2 << ',' << r.eta_h2
        << ',' << r.eta_k << ',' << r.eta_R << ',' << r.I_eff << ',' << r.I_eff_gamma << ',' << r.I_eff_p << ','
        << r.I_eff_a << ',' << r.newton_base << ',' << r.newton_enriched << ',' << r.exact_error << '\n';
  }
}

std::vector<LevelRecord> read_levels_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kLevelsHeader) throw std::runtime_error("levels.csv: bad header");
  std::vector<LevelRecord> out;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 15) throw std::runtime_error("levels.csv: wrong field count");
    auto num = [](const std::string& s) { return s == "nan" || s == "-nan" ? std::nan("") : std::stod(s); };
    LevelRecord r;
    r.level = std::stoi(f[0]);
    r.dofs = std::stoul(f[1]);
    r.J_tilde = num(f[2]);
    r.J_enriched = num(f[3]);
    r.eta2 = num(f[4]);
    r.eta_h2 = num(f[5]);
    r.eta_k = num(f[6]);
    r.eta_R = num(f[7]);
    r.I_eff = num(f[8]);
    r.I_eff_gamma = num(f[9]);
    r.I_eff_p = num(f[10]);
    r.I_eff_a = num(f[11]);
    r.newton_base = std::stoi(f[12]);
    r.newton_enriched = std::stoi(f[13]);
    r.exact_error = num(f[14]);
    out.push_back(r);
  }
  return out;
}

double slope(const std::vector<double>& dofs, const std::vector<double>& errors, std::size_t window) {
  const std::size_t n = std::min(dofs.size(), errors.size());
  const std::size_t start = n > window ? n - window : 0;
  std::vector<double> x, y;
  for (std::size_t i = start; i < n; ++i)
    if (errors[i] > 0.0 && dofs[i] > 0.0) {
      x.push_back(std::log(dofs[i]));
      y.push_back(std::log(errors[i]));
    }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (m * sxy - sx * sy) / (m * sxx - sx * sx);
}

namespace {

void write_plot_script(const std::filesystem::path& dir, bool multi, std::size_t n_goals) {
  std::ofstream gp(dir / "plot.gp");
  gp << "set datafile separator ','\n"
        "set logscale xy\n"
        "set key top right\n"
        "set xlabel 'DOFs'\n"
        "set terminal pngcairo size 900,650\n"
        "set output 'error.png'\n"
        "set ylabel 'error'\n"
        "plot 'levels.csv' u 2:(abs($15)) w lp lw 2 title '|J(u)-J(u~)|',\\\n"
        "     'levels.csv' u 2:(abs($5)) w lp lw 2 title '|eta^(2)|',\\\n"
        "     'levels.csv' u 2:(abs($6)) w lp lw 2 title '|eta_h^(2)|',\\\n"
        "     'levels.csv' u 2:(abs($7)) w lp lw 2 title '|eta_k|',\\\n"
        "     'levels.csv' u 2:(abs($8)) w lp lw 2 title '|eta_R|',\\\n"
        "     'levels.csv' u 2:(1.0/$2) w l dt 2 title 'O(DOFs^{-1})',\\\n"
        "     'levels.csv' u 2:(1.0/sqrt($2)) w l dt 3 title 'O(DOFs^{-1/2})'\n"
        "set output 'effectivity.png'\n"
        "unset logscale y\n"
        "set ylabel 'effectivity'\n"
        "plot 'levels.csv' u 2:9 w lp lw 2 title 'I_eff',\\\n"
        "     'levels.csv' u 2:10 w lp lw 2 title 'I_eff,gamma',\\\n"
        "     'levels.csv' u 2:11 w lp lw 2 title 'I_eff,p',\\\n"
        "     'levels.csv' u 2:12 w lp lw 2 title 'I_eff,a'\n";
  if (multi) {
    gp << "set output 'goals.png'\nset logscale xy\nset ylabel 'relative error'\nplot ";
    for (std::size_t i = 0; i < n_goals; ++i)
      gp << (i ? ",\\\n     " : "") << "'goals.csv' u 2:" << 3 + 3 * n_goals + i << " w lp lw 2 title 'J_" << i + 1
         << "'";
    gp << '\n';
  }
}

void write_goals_csv(const std::filesystem::path& path, const std::vector<LevelRecord>& records, std::size_t n) {
  std::ofstream out(path);
  out << "level,dofs";
  for (std::size_t i = 0; i < n; ++i) out << ",J" << i + 1 << "_tilde";
  for (std::size_t i = 0; i < n; ++i) out << ",J" << i + 1 << "_enriched";
  out << ",combined_error";
  for (std::size_t i = 0; i < n; ++i) out << ",J" << i + 1 << "_rel_error";
  out << ",b_h_hat,no_cancellation\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.level << ',' << r.dofs;
    for (double v : r.goal_tilde) out << ',' << v;
    for (double v : r.goal_enriched) out << ',' << v;
    out << ',' << r.exact_error;
    if (r.goal_error.empty())
      for (std::size_t i = 0; i < n; ++i) out << ",nan";
    for (double v : r.goal_error) out << ',' << v;
    out << ',' << r.b_h_hat << ',' << (r.no_cancellation ? 1 : 0) << '\n';
  }
}

}  // namespace

std::vector<LevelRecord> run_study(const StudyConfig& cfg, std::ostream* log) {
  std::filesystem::create_directories(cfg.output_dir);
  auto mesh = std::make_shared<const Mesh>(Mesh::build(cfg.domain, cfg.initial_refinements));
  AdaptOptions opt = cfg.adapt;
  opt.log = log;
  if (cfg.verbose) opt.newton.log = log;

  struct Pending {
    int level;
    std::string indicators, solution;
  };
  std::optional<Pending> last;
  auto dump = [&](const Pending& p) {
    if (!p.indicators.empty()) std::ofstream(cfg.output_dir / ("indicators_" + std::to_string(p.level) + ".csv")) << p.indicators;
    if (!p.solution.empty()) std::ofstream(cfg.output_dir / ("solution_" + std::to_string(p.level) + ".csv")) << p.solution;
  };
  auto on_level = [&](const LevelData& d) {
    Pending p{d.record.level, {}, {}};
    if (cfg.indicators != OutputLevels::none) {
      std::ostringstream os;
      os << std::setprecision(17) << "# eta2=" << d.estimate.eta2 << " eta_h2=" << d.estimate.eta_h2
         << " eta_k=" << d.estimate.eta_k << " eta_R=" << d.estimate.eta_R << '\n'
         << "cell_id,level,eta_K,eta_R_K\n";
      const Mesh& m = d.ut.space().mesh();
      const auto active = m.active_cells();
      for (std::size_t k = 0; k < active.size(); ++k)
        os << active[k] << ',' << m.cell(active[k]).level << ',' << d.estimate.element_indicators[k] << ','
           << d.estimate.remainder_per_cell[k] << '\n';
      p.indicators = os.str();
    }
    if (cfg.solutions != OutputLevels::none) {
      std::ostringstream os;
      write_csv(d.ut, os);
      p.solution = os.str();
    }
    if (cfg.indicators == OutputLevels::all || cfg.solutions == OutputLevels::all) {
      Pending now = p;
      if (cfg.indicators != OutputLevels::all) now.indicators.clear();
      if (cfg.solutions != OutputLevels::all) now.solution.clear();
      dump(now);
    }
    last = p;
  };

  const AdaptResult res = run_adaptive(cfg.problem, cfg.goals, mesh, opt, std::nullopt, on_level);
  if (last) {
    Pending p = *last;
    if (cfg.indicators != OutputLevels::last) p.indicators.clear();
    if (cfg.solutions != OutputLevels::last) p.solution.clear();
    dump(p);
  }
  {
    std::ofstream out(cfg.output_dir / "levels.csv");
    write_levels_csv(res.records, out);
  }
  write_goals_csv(cfg.output_dir / "goals.csv", res.records, cfg.goals.goals.size());
  write_plot_script(cfg.output_dir, cfg.goals.goals.size() > 1, cfg.goals.goals.size());
  if (res.failed) throw SolverFailure(res.failure);
  return res.records;
}

}  // namespace dwr
