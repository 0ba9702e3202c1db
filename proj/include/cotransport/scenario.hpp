#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cotransport/canonical_json.hpp"
#include "cotransport/errors.hpp"
#include "cotransport/estimator.hpp"
#include "cotransport/flightsim.hpp"
#include "cotransport/formation.hpp"
#include "cotransport/payload_model.hpp"

namespace cotransport {

struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  Json payload_spec;  // as given, echoed into reports
  PayloadModel payload;
  PhysicalParams theta_true;
  GridSpec grid;
  EstimatorConfig estimator;
  FormationConfig formation;
  FlightConfig flight;
  double success_tolerance = 0.1;  // final distance to the flight target (m)

  // Throws ConfigError naming the offending field.
  void validate() const;
};

/// Field-path and line aware config failure. what() reads like
/// "scenario.json:14: formation.epsilon: expected a number".
class ScenarioError : public ConfigError {
 public:
  ScenarioError(const std::string& source, int line, const std::string& field, const std::string& message);
  int line() const { return line_; }
  const std::string& field() const { return field_; }

 private:
  int line_;
  std::string field_;
};

Scenario scenario_from_json(const Json& j, const std::string& source = "<json>", const std::string& text = "");
Scenario parse_scenario(const std::string& text, const std::string& source = "<string>");
Scenario load_scenario_file(const std::string& path);
// Built-in name or path to a JSON file.
Scenario resolve_scenario(const std::string& name_or_path);

std::vector<std::string> builtin_scenario_names();
Scenario builtin_scenario(const std::string& name);
Json scenario_to_json(const Scenario& s);

}  // namespace cotransport
