#pragma once

// End-to-end run: closed-form sampling, oracle cross-check, optional
// certification, CSV/JSON emission and exit-code mapping.

#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "platoon/errors.hpp"
#include "platoon/io.hpp"
#include "platoon/oracle.hpp"
#include "platoon/scenario.hpp"

namespace platoon {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitCollision = 2,
  kExitNumerical = 3,
  kExitIo = 4,
};

// Largest closed-form vs RK4 state deviation accepted by --verify.
inline constexpr double kOracleTolerance = 1e-6;

struct RunOutputs {
  std::string csv_path;
  std::string report_path;
  std::optional<std::string> plot_script_path;
  bool verify = false;
};

struct RunResult {
  int exit_code = kExitOk;
  std::vector<TrajectorySample> samples;
  RunReport report;
  Json report_json;
};

// Everything except file output; exceptions from the numerics propagate.
inline RunResult evaluate_run(const PlatoonConfig& config, bool verify) {
  RunResult result;
  auto eval = std::make_shared<const StrategyEvaluator>(config);
  result.samples = eval->sample_grid(config.dt_output);
  for (const auto& s : result.samples) {
    for (const auto& x : s.states) {
      if (!all_finite(x)) throw DivergenceError("non-finite closed-form state", 0, s.t);
    }
  }
  result.report = analyze(result.samples, config);

  const OracleDeviation dev = oracle_deviation(eval, config.dt_oracle);
  const bool oracle_ok = dev.max_deviation <= kOracleTolerance;

  Json j;
  j["config"] = config_json(config);
  j["report"] = to_json(result.report);
  j["oracle"] = {{"dt", config.dt_oracle},
                 {"max_deviation", dev.max_deviation},
                 {"time", dev.time},
                 {"follower", dev.follower},
                 {"tolerance", kOracleTolerance},
                 {"passed", oracle_ok}};

  bool verified = true;
  if (verify) {
    verified = oracle_ok;
    Json cert;
    if (config.strategy == Strategy::nash) {
      const ControlLaw law = control_law(eval);
      BestResponseOptions opt;
      opt.dt = config.dt_oracle;
      Json per = Json::array();
      for (std::size_t i = 1; i <= config.size(); ++i) {
        const auto br = best_response_check(i, law, config, opt);
        verified = verified && br.passed();
        per.push_back(to_json(br));
      }
      cert["best_response"] = per;
    } else {
      cert["best_response"] = "not applicable: estimated strategy is not an exact equilibrium";
    }
    cert["passed"] = verified;
    j["verification"] = cert;
  }

  if (!verified) {
    result.exit_code = kExitNumerical;
  } else if (!result.report.collision_events.empty()) {
    result.exit_code = kExitCollision;
  }
  j["exit_code"] = result.exit_code;
  result.report_json = std::move(j);
  return result;
}

// Returns the process exit code; diagnostics go to `log`.
inline int run(const PlatoonConfig& config, const RunOutputs& outputs, std::ostream& log) {
  RunResult result;
  try {
    result = evaluate_run(config, outputs.verify);
  } catch (const SingularMatrix& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const DivergenceError& e) {
    log << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  }

  auto write = [&](const std::string& path, auto&& emit) {
    std::ofstream out(path, std::ios::binary);
    if (!out) return false;
    emit(out);
    out.flush();
    return static_cast<bool>(out);
  };

  if (!write(outputs.csv_path,
             [&](std::ostream& o) { write_csv(o, result.samples, config.size()); })) {
    log << "cannot write CSV to '" << outputs.csv_path << "'\n";
    return kExitIo;
  }
  if (!write(outputs.report_path,
             [&](std::ostream& o) { o << result.report_json.dump(2) << '\n'; })) {
    log << "cannot write report to '" << outputs.report_path << "'\n";
    return kExitIo;
  }
  if (outputs.plot_script_path &&
      !write(*outputs.plot_script_path,
             [&](std::ostream& o) { o << plot_script(outputs.csv_path, config.size()); })) {
    log << "cannot write plot script to '" << *outputs.plot_script_path << "'\n";
    return kExitIo;
  }

  for (const auto& e : result.report.collision_events) {
    log << "collision: follower " << e.follower << " closer than r from t = " << e.entry << '\n';
  }
  if (result.exit_code == kExitNumerical) log << "verification failed; see report\n";
  return result.exit_code;
}

}  // namespace platoon
