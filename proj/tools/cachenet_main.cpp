#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "cachenet/errors.hpp"
#include "cachenet/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Load-state probabilities and packet loss of cache-enabled cellular networks"};
  app.set_version_flag("--version", std::string(cachenet::kVersion));
  app.require_subcommand(1, 1);

  std::string config_path;
  cachenet::CliOverrides flags;
  std::uint64_t seed = 0;
  double noise_figure = 0.0;
  std::string edge, out_dir, format;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--seed", seed, "Master seed for the simulator");
    sub->add_option("--set", flags.sets, "Override one setting, key=value (repeatable)")->take_all();
    sub->add_option("--out", out_dir, "Output directory");
    sub->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--no-cancellation", flags.no_cancellation, "Disable cached-packet interference cancellation");
    sub->add_option("--noise-figure", noise_figure, "Receiver noise figure in dB (enables thermal noise)");
    sub->add_option("--edge", edge, "Edge handling of the simulated square")->check(CLI::IsMember({"torus", "guard"}));
  };

  std::string command;
  for (const auto& [name, help] :
       {std::pair{"analyze", "Analytic load probabilities and loss rates"},
        std::pair{"simulate", "Monte Carlo estimates with standard errors"},
        std::pair{"compare", "Analytic and simulated results side by side"},
        std::pair{"sweep", "Analytic and simulated results over a parameter sweep"}}) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    sub->callback([&command, sub] { command = sub->get_name(); });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  for (auto* sub : app.get_subcommands()) {
    if (sub->count("--seed")) flags.seed = seed;
    if (sub->count("--noise-figure")) flags.noise_figure_db = noise_figure;
    if (sub->count("--edge")) flags.edge = edge;
    if (sub->count("--out")) flags.out_dir = out_dir;
    if (sub->count("--format")) flags.format = format;
  }

  try {
    std::optional<std::filesystem::path> path;
    if (!config_path.empty()) path = config_path;
    const auto spec = cachenet::parse_config(path, flags);
    for (const auto& p : cachenet::run_command(command, spec)) std::cout << p.string() << '\n';
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cachenet::exit_code_for(e);
  }
}
