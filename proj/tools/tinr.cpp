// tinr: command-line front end. Each verb maps onto one cmd_* function;
// exit status follows the error category (2 config, 3 data format,
// 4 numerical failure).

#include <malloc.h>

#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "tinr/commands.hpp"

namespace {

void add_common(CLI::App* cmd, tinr::CommonOptions& o, const char* out_help) {
  cmd->add_option("--config", o.config, "JSON run configuration");
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("--out", o.out, out_help);
}

}  // namespace

int main(int argc, char** argv) {
  // Training allocates and frees the same large buffers every step; keep them
  // in the heap instead of round-tripping through mmap.
  mallopt(M_MMAP_THRESHOLD, 32 << 20);
  mallopt(M_TRIM_THRESHOLD, 256 << 20);

  CLI::App app{"Implicit neural representations of spatiotemporal traffic fields"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  tinr::SynthOptions synth;
  auto* c_synth = app.add_subcommand("synth", "generate LWR traffic fields (Grid CSV)");
  add_common(c_synth, synth.common, "output directory (default: synth)");
  c_synth->add_option("--family", synth.family, "number of instances");
  c_synth->add_option("--S", synth.cells, "spatial cells");
  c_synth->add_option("--T", synth.steps, "time snapshots");
  c_synth->add_option("--mask", synth.mask, "also write masks: random, column-drop, block, sensor-subset");
  c_synth->add_option("--density", synth.density, "kept fraction for --mask");

  tinr::FitOptions fit;
  auto* c_fit = app.add_subcommand("fit", "train one inr, factorized or mf model");
  add_common(c_fit, fit.common, "output directory (default: fit)");
  c_fit->add_option("--kind", fit.kind, "inr, factorized or mf (overrides the config)");
  c_fit->add_option("--data", fit.data, "Grid CSV to fit");
  c_fit->add_option("--mask", fit.mask, "observation mask CSV");
  c_fit->add_option("--steps", fit.steps, "training steps (ALS sweeps for mf)");

  tinr::MetaFitOptions meta;
  auto* c_meta = app.add_subcommand("meta-fit", "meta-train a generalizable model on an instance family");
  add_common(c_meta, meta.common, "output directory (default: meta-fit)");
  c_meta->add_option("--data", meta.data, "family directory (instance_<n>.csv)");
  c_meta->add_option("--epochs", meta.epochs, "passes over the family");

  tinr::AdaptOptions adapt;
  auto* c_adapt = app.add_subcommand("adapt", "fit a latent code for an unseen instance");
  add_common(c_adapt, adapt.common, "output directory (default: adapt)");
  c_adapt->add_option("--checkpoint", adapt.checkpoint, "meta-fit checkpoint")->required();
  c_adapt->add_option("--data", adapt.data, "instance Grid CSV")->required();
  c_adapt->add_option("--mask", adapt.mask, "observation mask CSV");
  c_adapt->add_option("--steps", adapt.steps, "inner steps (default: the trained K)");
  c_adapt->add_option("--id", adapt.id, "instance id written to the code file");

  tinr::QueryOptions query;
  auto* c_query = app.add_subcommand("query", "evaluate a model on a regular grid");
  add_common(c_query, query.common, "output Grid CSV (default: query.csv)");
  c_query->add_option("--checkpoint", query.checkpoint, "model checkpoint")->required();
  c_query->add_option("--code", query.code, "latent code file (ginr models)");
  c_query->add_option("--x-res", query.x_res, "samples along x");
  c_query->add_option("--t-res", query.t_res, "samples along t");
  c_query->add_option("--like", query.like, "use the axes of this Grid CSV");
  c_query->add_option("--x-min", query.x_min, "x range start (default: training domain)");
  c_query->add_option("--x-max", query.x_max, "x range end");
  c_query->add_option("--t-min", query.t_min, "t range start");
  c_query->add_option("--t-max", query.t_max, "t range end");

  tinr::EvalOptions eval;
  auto* c_eval = app.add_subcommand("eval", "error metrics of a prediction grid");
  add_common(c_eval, eval.common, "output metrics CSV (default: metrics.csv)");
  c_eval->add_option("--pred", eval.prediction, "predicted Grid CSV")->required();
  c_eval->add_option("--truth", eval.truth, "ground-truth Grid CSV")->required();
  c_eval->add_option("--mask", eval.mask, "observation mask CSV");
  c_eval->add_option("--scope", eval.scope, "observed, unobserved or all");

  tinr::BaselineOptions base;
  auto* c_base = app.add_subcommand("baseline", "low-rank ALS imputation baseline");
  add_common(c_base, base.common, "output directory (default: baseline)");
  c_base->add_option("--data", base.data, "Grid CSV");
  c_base->add_option("--mask", base.mask, "observation mask CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (c_synth->parsed()) tinr::cmd_synth(synth, std::cerr);
    if (c_fit->parsed()) tinr::cmd_fit(fit, std::cerr);
    if (c_meta->parsed()) tinr::cmd_meta_fit(meta, std::cerr);
    if (c_adapt->parsed()) tinr::cmd_adapt(adapt, std::cerr);
    if (c_query->parsed()) tinr::cmd_query(query, std::cerr);
    if (c_eval->parsed()) tinr::cmd_eval(eval, std::cerr);
    if (c_base->parsed()) tinr::cmd_baseline(base, std::cerr);
  } catch (const tinr::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
