// aefe_synth: writes a planted-pair click log as CSV.

#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "aefe/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Generate a synthetic click log with one planted field pair"};
  aefe::PlantedConfig c;
  std::string out;
  app.add_option("--out", out, "CSV file to write")->required();
  app.add_option("--rows", c.n)->capture_default_str();
  app.add_option("--fields", c.m)->capture_default_str();
  app.add_option("--cardinality", c.cardinality)->capture_default_str();
  app.add_option("--days", c.days)->capture_default_str();
  app.add_option("--field-a", c.field_a)->capture_default_str();
  app.add_option("--field-b", c.field_b)->capture_default_str();
  app.add_option("--hot-fraction", c.hot_fraction)->capture_default_str();
  app.add_option("--hot-rate", c.hot_rate)->capture_default_str();
  app.add_option("--base-rate", c.base_rate)->capture_default_str();
  app.add_flag("!--single-pair", c.interaction_only, "plant only the code pair (v0, v0)");
  app.add_option("--seed", c.seed)->capture_default_str();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }
  try {
    const auto d = aefe::make_planted(c);
    std::ofstream f(out, std::ios::binary);
    if (!f) {
      std::cerr << "cannot write " << out << '\n';
      return 3;
    }
    aefe::write_dataset_csv(f, d);
  } catch (const aefe::Error& e) {
    std::cerr << e.what() << '\n';
    return e.exit_code();
  }
  return 0;
}
