#include "pdgd/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <string>
#include <vector>

namespace {

using nlohmann::json;

enum class Kind { Real, Int, Uint, Text, Bool, NegBool, RealList, TextList };

struct Binding {
  std::string key;
  Kind kind;
  CLI::Option* opt = nullptr;
  std::string value;
  std::vector<std::string> values;
  bool flag = false;
};

struct Command {
  std::string problem;
  std::string config;
  std::vector<Binding> bindings;
};

void add_options(CLI::App* app, Command& cmd) {
  app->set_help_flag("--help", "print this help message and exit");
  app->add_option("problem", cmd.problem, "problem JSON")->required();
  app->add_option("--config", cmd.config, "run config JSON; flags override it");
  struct Spec {
    const char* name;
    const char* key;
    Kind kind;
    const char* help;
  };
  static const Spec specs[] = {
      {"--out", "out_dir", Kind::Text, "output directory"},
      {"--eps", "eps", Kind::RealList, "epsilon value(s), comma separated"},
      {"--sweep-eps", "sweep_eps", Kind::Bool, "sweep epsilon over 0.5,1,1.5 unless --eps is given"},
      {"--h", "h", Kind::Real, "delay bound h (s)"},
      {"--d", "d", Kind::Real, "delay rate bound d in [0, 1]"},
      {"--no-collapse", "collapse", Kind::NegBool, "keep one edge per delayed channel"},
      {"--tie-edges", "tie_edges", Kind::Bool, "share R, Q, S across edges"},
      {"--min-gain", "minimize_gain", Kind::Bool, "minimize the gain size after feasibility"},
      {"--alpha1", "alpha1", Kind::Real, "weight on kappa_X"},
      {"--alpha2", "alpha2", Kind::Real, "weight on kappa_P"},
      {"--margin", "margin", Kind::Real, "required LMI margin"},
      {"--gap-tol", "gap_tol", Kind::Real, "SDP gap tolerance"},
      {"--feas-tol", "feas_tol", Kind::Real, "SDP feasibility tolerance"},
      {"--max-iter", "max_iter", Kind::Int, "SDP iteration limit"},
      {"--no-early-exit", "early_exit", Kind::NegBool, "solve feasibility problems to convergence"},
      {"--h-lo", "h_lo", Kind::Real, "bisection lower bound"},
      {"--h-hi", "h_hi", Kind::Real, "bisection upper bound"},
      {"--tol", "tol", Kind::Real, "bisection grid"},
      {"--dynamics", "dynamics", Kind::Text, "standard or augmented"},
      {"--cert", "cert", Kind::Text, "certificate JSON"},
      {"--delay", "delays", Kind::TextList, "delay signal, once or per edge"},
      {"--T", "T", Kind::Real, "simulation horizon (s)"},
      {"--dt", "dt", Kind::Real, "integration step (s)"},
      {"--stride", "record_stride", Kind::Int, "record every n-th step"},
      {"--seed", "seed", Kind::Uint, "random seed"},
      {"--spread", "spread", Kind::Real, "initial perturbation half-width"},
      {"--phi-samples", "phi_samples", Kind::Int, "verify: random states for Phi"},
      {"--lkf-T", "lkf_T", Kind::Real, "verify: LKF simulation horizon"},
      {"--lkf-slack", "lkf_slack", Kind::Real, "verify: relative LKF slack"},
      {"--stress-runs", "stress_runs", Kind::Int, "verify: random initial conditions"},
      {"--stress-T", "stress_T", Kind::Real, "verify: stress horizon"},
      {"--stress-tol", "stress_tol", Kind::Real, "verify: convergence ratio"},
  };
  cmd.bindings.reserve(std::size(specs));
  for (const auto& s : specs) {
    cmd.bindings.push_back({s.key, s.kind});
    Binding& b = cmd.bindings.back();
    switch (s.kind) {
      case Kind::Bool:
      case Kind::NegBool: b.opt = app->add_flag(s.name, b.flag, s.help); break;
      case Kind::RealList: b.opt = app->add_option(s.name, b.values, s.help)->delimiter(','); break;
      case Kind::TextList: b.opt = app->add_option(s.name, b.values, s.help); break;
      default: b.opt = app->add_option(s.name, b.value, s.help); break;
    }
  }
}

json number(const std::string& key, const std::string& v, Kind kind) {
  try {
    std::size_t used = 0;
    json out;
    if (kind == Kind::Real) out = std::stod(v, &used);
    else if (kind == Kind::Int) out = std::stoi(v, &used);
    else out = std::stoull(v, &used);
    if (used == v.size()) return out;
  } catch (const std::exception&) {
  }
  throw pdgd::ConfigError("schema error: '" + v + "' is not a valid value for " + key);
}

json to_json(const std::string& name, const Command& cmd) {
  json j = json::object();
  if (!cmd.config.empty()) {
    std::ifstream in(cmd.config);
    if (!in) throw std::runtime_error("cannot read " + cmd.config);
    try {
      j = json::parse(in);
    } catch (const json::parse_error& e) {
      throw pdgd::ConfigError(std::string("schema error: ") + cmd.config + ": " + e.what());
    }
    if (!j.is_object()) throw pdgd::ConfigError("schema error: config must be a JSON object");
  }
  j["command"] = name;
  j["problem"] = cmd.problem;
  for (const auto& b : cmd.bindings) {
    if (b.opt->count() == 0) continue;
    switch (b.kind) {
      case Kind::Bool: j[b.key] = true; break;
      case Kind::NegBool: j[b.key] = false; break;
      case Kind::Text: j[b.key] = b.value; break;
      case Kind::TextList: j[b.key] = b.values; break;
      case Kind::RealList: {
        json arr = json::array();
        for (const auto& v : b.values) arr.push_back(number(b.key, v, Kind::Real));
        j[b.key] = arr;
        break;
      }
      default: j[b.key] = number(b.key, b.value, b.kind); break;
    }
  }
  return j;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Delay-robust augmented primal-dual gradient dynamics"};
  app.require_subcommand(1);
  const std::vector<std::pair<std::string, std::string>> names{
      {"synthesize", "certify a gain for given delay bounds"},
      {"madub", "bisect the largest certified delay bound"},
      {"simulate", "integrate the delayed dynamics"},
      {"verify", "re-check a certificate"},
      {"dump", "write the KKT point and structure matrices"},
      {"export-sdp", "write the LMI program in sparse text form"}};
  std::vector<Command> cmds(names.size());
  std::vector<CLI::App*> subs;
  for (std::size_t i = 0; i < names.size(); ++i) {
    subs.push_back(app.add_subcommand(names[i].first, names[i].second));
    add_options(subs.back(), cmds[i]);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : pdgd::kExitFault;
  }
  for (std::size_t i = 0; i < subs.size(); ++i) {
    if (!subs[i]->parsed()) continue;
    try {
      const pdgd::RunConfig cfg = pdgd::run_config_from_json(to_json(names[i].first, cmds[i]));
      return pdgd::run_command(cfg, std::cout);
    } catch (const std::exception& e) {
      std::cerr << e.what() << "\n";
      return pdgd::kExitFault;
    }
  }
  return pdgd::kExitFault;
}
