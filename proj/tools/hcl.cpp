#include <CLI11.hpp>

#include <iostream>
#include <map>

#include "hcl/cli.hpp"

int main(int argc, char** argv) {
  CLI::App app{"hcl: complex Hessian equation laboratory"};
  app.require_subcommand(1);
  hcl::RunConfig rc;
  std::uint64_t seed = 0;
  const std::map<std::string, std::string> about{
      {"lemma-check", "bordered-matrix eigenvalue localisation battery"},
      {"cone-check", "sub-cone membership by three criteria"},
      {"subsol-check", "epsilon-dichotomy samples and the product subsolution"},
      {"solve-closed", "closed-manifold solve for (u, c)"},
      {"solve-dirichlet", "Dirichlet solve on a product domain"},
      {"degenerate-sweep", "regularised solves along an epsilon ladder and a stability pair"},
      {"exhaustion", "solves on nested sublevel sub-domains"},
      {"estimate-report", "second-order and boundary ratios over a psi-amplitude sweep"}};
  std::vector<CLI::App*> subs;
  for (const auto& name : hcl::cli_commands()) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", rc.config_path, "JSON run configuration");
    sub->add_option("--out", rc.out_dir, "output directory")->capture_default_str();
    sub->add_option("--seed", seed, "random seed (overrides the config)");
    sub->add_flag("--quiet", rc.quiet, "suppress the summary line");
    subs.push_back(sub);
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return hcl::exit_config;
  }
  for (auto* sub : subs) {
    if (!sub->parsed()) continue;
    rc.command = sub->get_name();
    if (sub->count("--seed")) rc.seed = seed;
  }
  return hcl::run(rc);
}
