#pragma once

// Declarative experiment runner: JSON config in, a ResultTable out, emitted as
// CSV or JSON. Decibel quantities are accepted only inside the config's
// "units" block and converted to linear values once, at parse time.

#include <array>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dirtytx/core_model.hpp"
#include "dirtytx/exec.hpp"
#include "dirtytx/nmse.hpp"
#include "dirtytx/precoding.hpp"
#include "json.hpp"

namespace dirtytx {

// Schema or value problem in an experiment config.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class OutputFormat { csv, json };

OutputFormat parse_format(const std::string& s);

struct ExperimentInfo {
  const char* kind;
  const char* description;
};

const std::vector<ExperimentInfo>& experiment_kinds();

struct ExperimentConfig {
  std::string kind;
  std::uint64_t seed = 1;
  std::string hash;  // FNV-1a 64 of the canonical config text

  HardwareConfig hw;
  std::array<double, 2> kappa_phase{0.0, 0.0};  // rad
  SignalSpec signal;                             // p_x unused

  std::vector<double> p_x;                          // W
  std::vector<std::array<double, 2>> kappa2_db;     // |κ1|², |κ2|² sweep, dB
  std::vector<double> gamma2_db;                    // power-gain sweep, dB
  std::vector<double> inv_sigma_n2_db;              // 1/σ_n² sweep, dB
  double sigma_n2 = 1.0;                            // W

  std::size_t n_samples = 10000;
  std::size_t n_channels = 1000;
  std::optional<CVec2> channel;

  EtaGridOptions eta;
  GridOptions nmse_grid;
  int phase_points = 37;
  std::vector<double> scales;

  std::string output_path;
  OutputFormat format = OutputFormat::csv;
  bool record_wall_time = false;

  // Hardware with |κℓ|² from the given dB pair and the configured phases.
  HardwareConfig hardware_with_kappa(const std::array<double, 2>& k2_db) const;
  // Hardware with γℓ² = g2_db for both branches.
  HardwareConfig hardware_with_gain(const HardwareConfig& base, double g2_db) const;
};

// Parse and validate. seed_override replaces the config's seed before hashing.
ExperimentConfig parse_config(const nlohmann::json& j,
                              std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig parse_config_text(const std::string& text,
                                   std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::string& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);

std::uint64_t fnv1a64(const std::string& s);

struct Column {
  std::string name;
  std::string unit;
};

struct ResultTable {
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::pair<std::string, std::string>> metadata;

  // Throws NumericalError on a NaN entry or a width mismatch.
  void add_row(std::vector<double> row);
  void set_meta(const std::string& key, const std::string& value);
  std::optional<std::string> meta(const std::string& key) const;
  std::vector<double> column(const std::string& name) const;
};

ResultTable run_experiment(const ExperimentConfig& cfg, Exec exec = Exec::parallel);

// RFC-4180 style, header "name [unit]", numbers as %.17g.
std::string to_csv(const ResultTable& t);
// {"metadata": {...}, "columns": [{"name", "unit", "values"}]}.
std::string to_json(const ResultTable& t);
std::string emit(const ResultTable& t, OutputFormat f);

// Shortest %.17g rendering used by the emitters.
std::string format_number(double v);

}  // namespace dirtytx
