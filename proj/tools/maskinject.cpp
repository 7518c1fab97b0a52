#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "maskinject.hpp"

namespace mi = maskinject;

namespace {

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

std::ofstream open_csv(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw mi::Error("cannot open '" + path + "' for writing");
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Applies `key = value` pairs from a config file to options of `app` that
/// were not given on the command line. Keys are long option names; '_' and
/// '-' are interchangeable.
void apply_config(CLI::App* app, const std::string& path) {
  for (const auto& [key, value] : mi::load_config(path)) {
    std::string name = key;
    for (auto& c : name)
      if (c == '_') c = '-';
    if (name == "config") throw mi::Error(path + ": config files cannot include other config files");
    CLI::Option* opt = app->get_option_no_throw("--" + name);
    if (!opt) throw mi::Error(path + ": unknown key '" + key + "' for " + app->get_name());
    if (opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

std::uint64_t g_default_seed = 0;

void add_common(CLI::App* app, Common& c, bool with_threads = false) {
  c.seed = g_default_seed;
  app->add_option("--config", c.config, "key=value file; command-line flags take precedence");
  app->add_option("--seed", c.seed, "random seed (default: MASKINJECT_SEED or 0)");
  if (with_threads) app->add_option("--threads", c.threads, "worker threads (0 = all cores)");
}

struct SceneOpts {
  mi::SceneConfig cfg;
  std::string shape = "mixed";
};

void add_scene_options(CLI::App* app, SceneOpts& s) {
  app->add_option("--width", s.cfg.width, "canvas width in pixels");
  app->add_option("--height", s.cfg.height, "canvas height in pixels");
  app->add_option("--objects", s.cfg.n_objects, "number of objects");
  app->add_option("--classes", s.cfg.classes, "number of classes K");
  app->add_option("--shape", s.shape, "rectangles | ellipses | blobs | mixed");
  app->add_option("--noise", s.cfg.noise, "cost-map noise amplitude");
  app->add_option("--split-min", s.cfg.split_min, "min sub-patches per object");
  app->add_option("--split-max", s.cfg.split_max, "max sub-patches per object");
  app->add_option("--cost-factor", s.cfg.cost_factor, "image pixels per cost-map cell");
  app->add_option("--min-extent", s.cfg.min_extent, "min object box side");
  app->add_option("--max-extent", s.cfg.max_extent, "max object box side");
  app->add_option("--max-retries", s.cfg.max_retries, "placement attempts per object");
}

mi::SceneConfig scene_config(SceneOpts& s, std::uint64_t seed) {
  s.cfg.shape = mi::parse_shape_family(s.shape);
  s.cfg.seed = seed;
  return s.cfg;
}

struct SuiteOpts {
  int scenes = 20;
  int min_objects = 1;
  int max_objects = 12;
};

void add_suite_options(CLI::App* app, SuiteOpts& s) {
  app->add_option("--scenes", s.scenes, "scenes in the suite");
  app->add_option("--min-objects", s.min_objects, "min objects per scene");
  app->add_option("--max-objects", s.max_objects, "max objects per scene");
}

mi::SuiteConfig suite_config(SceneOpts& scene, const SuiteOpts& s, std::uint64_t seed) {
  mi::SuiteConfig c;
  c.scene = scene_config(scene, seed);
  c.scenes = s.scenes;
  c.min_objects = s.min_objects;
  c.max_objects = s.max_objects;
  c.seed = seed;
  return c;
}

struct SamplerOpts {
  int gp = 5;
  int mp = 10;
  bool area_in_pixels = false;
};

void add_sampler_options(CLI::App* app, SamplerOpts& s) {
  app->add_option("--gp", s.gp, "mask area per expected point");
  app->add_option("--mp", s.mp, "max expected points per mask");
  app->add_flag("--area-in-pixels", s.area_in_pixels, "count mask area in pixels instead of grid cells");
}

mi::SamplerConfig sampler_config(const SamplerOpts& s, int grid_h, int grid_w) {
  mi::SamplerConfig c;
  c.g_p = s.gp;
  c.m_p = s.mp;
  c.grid_h = grid_h;
  c.grid_w = grid_w;
  c.area_in_pixels = s.area_in_pixels;
  c.validate();
  return c;
}

struct PipelineOpts {
  double alpha = 0.5;
  double eps = 1e-6;
  bool no_smagg = false;
  bool no_inject = false;
  std::string prompts = "target";
  std::string head;
  int channels = 16;
  double text_threshold = 0.0;
};

void add_pipeline_options(CLI::App* app, PipelineOpts& p) {
  app->add_option("--alpha", p.alpha, "aggregation threshold in [0, 1)");
  app->add_option("--eps", p.eps, "aggregation score epsilon");
  app->add_flag("--no-smagg", p.no_smagg, "pass proposals through without aggregation");
  app->add_flag("--no-inject", p.no_inject, "skip mask injection (cost argmax readout)");
  app->add_option("--prompts", p.prompts, "head | target");
  app->add_option("--head", p.head, "trained head parameters (FGRID); zero head if omitted");
  app->add_option("--channels", p.channels, "head embedding channels");
  app->add_option("--text-threshold", p.text_threshold, "cost level a class must exceed to count");
}

mi::PipelineConfig pipeline_config(const PipelineOpts& p, const SamplerOpts& s, const mi::SceneConfig& scene,
                                   std::uint64_t seed) {
  mi::PipelineConfig c;
  c.sampler = sampler_config(s, scene.cost_h(), scene.cost_w());
  c.split_min = scene.split_min;
  c.split_max = scene.split_max;
  c.smagg.alpha = p.alpha;
  c.smagg.eps = p.eps;
  c.use_smagg = !p.no_smagg;
  c.inject = !p.no_inject;
  c.prompts = mi::parse_prompt_source(p.prompts);
  c.text_threshold = p.text_threshold;
  c.seed = seed;
  return c;
}

mi::TsppHeadParams load_head(const std::string& path, int classes, int channels, int gh, int gw) {
  auto p = mi::TsppHeadParams::zeros(classes, channels, gh, gw);
  if (path.empty()) return p;
  const auto g = mi::io::read_fgrid(path);
  if (g.values.size() != p.weights.size())
    throw mi::Error("'" + path + "' holds " + std::to_string(g.values.size()) + " values; a head with K=" +
                    std::to_string(classes) + ", C=" + std::to_string(channels) + " needs " +
                    std::to_string(p.weights.size()));
  const auto v = mi::io::to_doubles(g);
  p.weights.assign(v);
  return p;
}

mi::io::FGrid cost_grid(const mi::CostMap& c) { return mi::io::to_fgrid({c.classes, c.height, c.width}, c.values); }

mi::MaskSet masks_at(const mi::MaskSet& m, int w, int h) {
  if (m.width == w && m.height == h) return m;
  if (m.width % w != 0 || m.height % h != 0 || m.width / w != m.height / h)
    throw mi::Error("masks are " + std::to_string(m.width) + "x" + std::to_string(m.height) +
                    " and cannot be reduced to " + std::to_string(w) + "x" + std::to_string(h));
  return mi::downsample_masks(m, m.width / w);
}

}  // namespace

int main(int argc, char** argv) {
  try {
    g_default_seed = mi::env_seed().value_or(0);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  CLI::App app{"Sparse point prompting, mask aggregation and mask injection toolkit"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "show help for all subcommands");

  // gen-scene
  Common gs_c;
  SceneOpts gs_s;
  std::string gs_labels, gs_semantic, gs_cost, gs_objects;
  auto* gs = app.add_subcommand("gen-scene", "generate a synthetic scene and its cost map");
  add_common(gs, gs_c);
  add_scene_options(gs, gs_s);
  gs->add_option("--out-labels", gs_labels, "instance label map (PGM)");
  gs->add_option("--out-semantic", gs_semantic, "class label map (PGM, class k as k+1)");
  gs->add_option("--out-cost", gs_cost, "cost map K x h x w (FGRID)");
  gs->add_option("--out-objects", gs_objects, "object,class table (CSV)");

  // tspp-target
  Common tt_c;
  SamplerOpts tt_s;
  std::string tt_labels, tt_out, tt_skipped;
  int tt_grid = 32;
  bool tt_raw = false;
  auto* tt = app.add_subcommand("tspp-target", "sampling-probability target from a label map");
  add_common(tt, tt_c);
  add_sampler_options(tt, tt_s);
  tt->add_option("--labels", tt_labels, "label map (PGM), one mask per nonzero label")->required();
  tt->add_option("--grid", tt_grid, "grid side");
  tt->add_option("--out", tt_out, "probabilities (FGRID grid x grid)")->required();
  tt->add_flag("--raw", tt_raw, "write unclamped mass instead of probabilities");
  tt->add_option("--report", tt_skipped, "per-mask label,expected_points,sigma,skipped (CSV)");

  // sample-points
  Common sp_c;
  std::string sp_probs, sp_out;
  int sp_w = 512, sp_h = 512;
  auto* sp = app.add_subcommand("sample-points", "Bernoulli point prompts from a probability grid");
  add_common(sp, sp_c);
  sp->add_option("--probs", sp_probs, "probabilities (FGRID h x w)")->required();
  sp->add_option("--width", sp_w, "image width in pixels");
  sp->add_option("--height", sp_h, "image height in pixels");
  sp->add_option("--out", sp_out, "points (CSV x,y,prob)")->required();

  // smagg
  Common sm_c;
  std::string sm_sam, sm_text, sm_out, sm_report, sm_res = "text-grid";
  double sm_alpha = 0.5, sm_eps = 1e-6;
  auto* sm = app.add_subcommand("smagg", "merge proposal masks by overlap with class masks");
  add_common(sm, sm_c);
  sm->add_option("--sam", sm_sam, "proposal label map (PGM), one proposal per nonzero label")->required();
  sm->add_option("--text", sm_text, "class label map (PGM), class k as k+1")->required();
  sm->add_option("--alpha", sm_alpha, "merge threshold in [0, 1)");
  sm->add_option("--eps", sm_eps, "score epsilon");
  sm->add_option("--resolution", sm_res, "text-grid | full");
  sm->add_option("--out", sm_out, "merged label map (PGM)")->required();
  sm->add_option("--report", sm_report, "output_index,class,source_indices (CSV)");

  // dmi-forward
  Common dm_c;
  std::string dm_features, dm_masks, dm_mode = "low", dm_params, dm_out;
  int dm_tag_cap = 4;
  auto* dm = app.add_subcommand("dmi-forward", "low- or high-frequency mask injection");
  add_common(dm, dm_c);
  dm->add_option("--features", dm_features, "features D x h x w (FGRID)")->required();
  dm->add_option("--masks", dm_masks, "mask label map (PGM); reduced to the feature grid by majority")->required();
  dm->add_option("--mode", dm_mode, "low | high");
  dm->add_option("--params", dm_params, "high-frequency parameters (FGRID); random from --seed if omitted");
  dm->add_option("--tag-cap", dm_tag_cap, "presence-bit channels in the mask summary");
  dm->add_option("--out", dm_out, "injected features (FGRID)")->required();

  // gradcheck
  Common gc_c;
  std::string gc_op = "high-freq", gc_out;
  double gc_tol = 1e-4, gc_step = 1e-5;
  int gc_instances = 1;
  auto* gc = app.add_subcommand("gradcheck", "compare analytic gradients with central differences");
  add_common(gc, gc_c);
  gc->add_option("--op", gc_op, "linear | cross-attention | low-freq | high-freq | tspp");
  gc->add_option("--tol", gc_tol, "relative-error tolerance");
  gc->add_option("--step", gc_step, "finite-difference step");
  gc->add_option("--instances", gc_instances, "random instances, seeds seed..seed+n-1");
  gc->add_option("--out", gc_out, "per-block report (CSV)");

  // train-head
  Common th_c;
  SceneOpts th_s;
  SuiteOpts th_u;
  SamplerOpts th_p;
  mi::TrainConfig th_cfg;
  std::string th_opt = "adam", th_out, th_trace;
  int th_channels = 16;
  auto* th = app.add_subcommand("train-head", "train the point-prompt head on a synthetic suite");
  add_common(th, th_c, true);
  add_scene_options(th, th_s);
  add_suite_options(th, th_u);
  add_sampler_options(th, th_p);
  th->add_option("--steps", th_cfg.steps, "gradient steps");
  th->add_option("--lr", th_cfg.learning_rate, "learning rate");
  th->add_option("--lambda-mse", th_cfg.lambda_mse, "weight of the probability loss");
  th->add_option("--optimizer", th_opt, "adam | sgd");
  th->add_option("--channels", th_channels, "embedding channels");
  th->add_option("--out", th_out, "parameters (FGRID)")->required();
  th->add_option("--trace", th_trace, "step,loss,ce,mse (CSV)");

  // pipeline
  Common pl_c;
  SceneOpts pl_s;
  SamplerOpts pl_p;
  PipelineOpts pl_o;
  std::string pl_out, pl_merged, pl_report, pl_points;
  auto* pl = app.add_subcommand("pipeline", "run the full chain on one synthetic scene");
  add_common(pl, pl_c);
  add_scene_options(pl, pl_s);
  add_sampler_options(pl, pl_p);
  add_pipeline_options(pl, pl_o);
  pl->add_option("--out", pl_out, "predicted grid labels (PGM)")->required();
  pl->add_option("--merged", pl_merged, "aggregated masks as a label map (PGM)");
  pl->add_option("--points", pl_points, "sampled prompts (CSV x,y,prob)");
  pl->add_option("--report", pl_report, "diagnostics (CSV key,value)");

  // bench
  Common bn_c;
  SceneOpts bn_s;
  SuiteOpts bn_u;
  SamplerOpts bn_p;
  std::string bn_strategies = "grid32,random-k,tspp-target", bn_head, bn_out;
  int bn_repeats = 1, bn_channels = 16;
  auto* bn = app.add_subcommand("bench", "prompt counts and coverage per sampling strategy");
  add_common(bn, bn_c, true);
  add_scene_options(bn, bn_s);
  add_suite_options(bn, bn_u);
  add_sampler_options(bn, bn_p);
  bn->add_option("--strategies", bn_strategies, "comma list of grid32, random-k, tspp-target, tspp-head");
  bn->add_option("--repeats", bn_repeats, "sampling repeats per scene");
  bn->add_option("--head", bn_head, "head parameters for tspp-head (FGRID)");
  bn->add_option("--channels", bn_channels, "head embedding channels");
  bn->add_option("--out", bn_out, "report (CSV)")->required();

  // alpha-sweep
  Common as_c;
  SceneOpts as_s;
  SuiteOpts as_u;
  SamplerOpts as_p;
  PipelineOpts as_o;
  std::string as_alphas = "0.3,0.5,0.7", as_out;
  auto* as = app.add_subcommand("alpha-sweep", "pipeline quality and merge counts across alpha");
  add_common(as, as_c, true);
  add_scene_options(as, as_s);
  add_suite_options(as, as_u);
  add_sampler_options(as, as_p);
  add_pipeline_options(as, as_o);
  as->add_option("--alphas", as_alphas, "comma list of alpha values");
  as->add_option("--out", as_out, "report (CSV)")->required();

  // render
  Common rd_c;
  std::string rd_in, rd_mask, rd_field = "skeleton", rd_out, rd_save;
  int rd_channel = 0, rd_scale = 1;
  auto* rd = app.add_subcommand("render", "heatmap of a grid or a mask distance field");
  add_common(rd, rd_c);
  rd->add_option("--input", rd_in, "grid (FGRID h x w, or c x h x w with --channel)");
  rd->add_option("--channel", rd_channel, "channel of a 3-D input");
  rd->add_option("--mask", rd_mask, "binary mask (PGM) whose distance field to render");
  rd->add_option("--field", rd_field, "skeleton | interior | exterior");
  rd->add_option("--save-field", rd_save, "also write the field (FGRID)");
  rd->add_option("--scale", rd_scale, "pixels per value");
  rd->add_option("--out", rd_out, "image (PPM)")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    for (auto* sub : app.get_subcommands()) {
      auto* cfg = sub->get_option_no_throw("--config");
      if (cfg && cfg->count() > 0) apply_config(sub, cfg->as<std::string>());
    }

    if (gs->parsed()) {
      const auto scene = mi::gen_scene(scene_config(gs_s, gs_c.seed));
      if (!gs_labels.empty()) mi::io::write_labels(gs_labels, scene.instances);
      if (!gs_semantic.empty()) mi::io::write_labels(gs_semantic, scene.semantic);
      if (!gs_cost.empty()) mi::io::write_fgrid(gs_cost, cost_grid(scene.cost));
      if (!gs_objects.empty()) {
        auto out = open_csv(gs_objects);
        out << "object,class,area\n";
        for (std::size_t i = 0; i < scene.object_class.size(); ++i) {
          std::size_t area = 0;
          for (auto l : scene.instances.labels) area += l == i + 1;
          out << i + 1 << ',' << scene.object_class[i] << ',' << area << '\n';
        }
      }
      std::cout << "objects: " << scene.object_class.size() << "\n";
    } else if (tt->parsed()) {
      const auto lm = mi::io::read_labels(tt_labels);
      const auto masks = mi::masks_from_labelmap(lm);
      const auto cfg = sampler_config(tt_s, tt_grid, tt_grid);
      const auto t = mi::probability_target(masks, cfg);
      mi::io::write_fgrid(tt_out, mi::io::to_fgrid({tt_grid, tt_grid}, tt_raw ? t.grid.raw : t.grid.probs));
      if (!tt_skipped.empty()) {
        const auto ids = mi::labels_present(lm);
        auto out = open_csv(tt_skipped);
        out << "label,expected_points,sigma,skipped\n";
        for (std::size_t k = 0; k < ids.size(); ++k) {
          const bool skipped = std::find(t.skipped.begin(), t.skipped.end(), k) != t.skipped.end();
          out << ids[k] << ',' << t.expected[k] << ',' << num(t.sigma[k]) << ',' << (skipped ? 1 : 0) << '\n';
        }
      }
      std::cout << "expected points: " << num(t.grid.expected_count()) << "\n";
    } else if (sp->parsed()) {
      const auto g = mi::io::read_fgrid(sp_probs);
      if (g.dims.size() != 2) throw mi::Error("'" + sp_probs + "' must be a 2-D grid");
      mi::ProbabilityGrid p(g.dims[0], g.dims[1]);
      p.probs = mi::io::to_doubles(g);
      for (double v : p.probs)
        if (!(v >= 0 && v <= 1)) throw mi::Error("'" + sp_probs + "' holds a value outside [0, 1]");
      p.raw = p.probs;
      const auto pts = mi::sample_points(p, sp_c.seed, sp_w, sp_h);
      auto out = open_csv(sp_out);
      out << "x,y,prob\n";
      for (const auto& q : pts.points) out << num(q.x) << ',' << num(q.y) << ',' << num(q.prob) << '\n';
      std::cout << "points: " << pts.count() << "\n";
    } else if (sm->parsed()) {
      const auto sam = mi::masks_from_labelmap(mi::io::read_labels(sm_sam));
      const auto text_lm = mi::io::read_labels(sm_text);
      const auto text = mi::class_masks(text_lm, static_cast<int>(text_lm.max_label()));
      mi::SmaggConfig cfg{sm_alpha, sm_eps,
                          sm_res == "full" ? mi::MatchResolution::full : mi::MatchResolution::text_grid};
      if (sm_res != "full" && sm_res != "text-grid") throw mi::Error("--resolution must be text-grid or full");
      const auto agg = mi::aggregate(sam, text, cfg);
      mi::LabelMap merged(sam.width, sam.height);
      for (std::size_t i = 0; i < agg.masks.size(); ++i)
        for (std::size_t p = 0; p < merged.labels.size(); ++p)
          if (agg.masks[i][p]) merged.labels[p] = static_cast<std::uint32_t>(i + 1);
      mi::io::write_labels(sm_out, merged);
      if (!sm_report.empty()) {
        auto out = open_csv(sm_report);
        out << "output_index,class,source_indices\n";
        for (std::size_t i = 0; i < agg.masks.size(); ++i) {
          out << i << ',' << (agg.class_of[i] ? std::to_string(*agg.class_of[i]) : std::string()) << ',';
          for (std::size_t j = 0; j < agg.provenance[i].size(); ++j)
            out << (j ? " " : "") << agg.provenance[i][j];
          out << '\n';
        }
      }
      std::cout << "proposals: " << sam.size() << "  merged: " << agg.masks.size() << "\n";
    } else if (dm->parsed()) {
      const auto g = mi::io::read_fgrid(dm_features);
      if (g.dims.size() != 3) throw mi::Error("'" + dm_features + "' must be D x h x w");
      mi::FeatureMap f(g.dims[0], g.dims[1], g.dims[2]);
      f.values = mi::io::to_doubles(g);
      const auto masks = masks_at(mi::masks_from_labelmap(mi::io::read_labels(dm_masks)), f.width, f.height);
      mi::FeatureMap out;
      if (dm_mode == "low") {
        out = mi::low_freq_inject(f, masks);
      } else if (dm_mode == "high") {
        mi::HighFreqParams p;
        if (dm_params.empty()) {
          p = mi::HighFreqParams::init(f.channels, dm_c.seed, false, dm_tag_cap);
        } else {
          const auto v = mi::io::to_doubles(mi::io::read_fgrid(dm_params));
          p = mi::HighFreqParams::from_flat(f.channels, v, dm_tag_cap);
        }
        out = mi::high_freq_inject(f, masks, p);
      } else {
        throw mi::Error("--mode must be low or high");
      }
      mi::io::write_fgrid(dm_out, mi::io::to_fgrid({out.channels, out.height, out.width}, out.values));
    } else if (gc->parsed()) {
      const auto op = mi::parse_grad_op(gc_op);
      bool ok = true;
      std::optional<std::ofstream> out;
      if (!gc_out.empty()) {
        out = open_csv(gc_out);
        *out << "op,seed,block,size,max_abs_error,rel_error,passed\n";
      }
      for (int i = 0; i < gc_instances; ++i) {
        const std::uint64_t seed = gc_c.seed + static_cast<std::uint64_t>(i);
        const auto rep = mi::gradcheck(op, seed, gc_tol, gc_step);
        for (const auto& b : rep.blocks) {
          std::cout << rep.op << " seed " << seed << " " << b.name << ": rel " << num(b.rel_error)
                    << (b.rel_error < gc_tol ? "" : "  FAIL") << "\n";
          if (out)
            *out << rep.op << ',' << seed << ',' << b.name << ',' << b.size << ',' << num(b.max_abs_error) << ','
                 << num(b.rel_error) << ',' << (b.rel_error < gc_tol ? 1 : 0) << '\n';
        }
        ok = ok && rep.passed();
      }
      std::cout << (ok ? "PASS" : "FAIL") << "\n";
      return ok ? 0 : 1;
    } else if (th->parsed()) {
      const auto suite = mi::gen_suite(suite_config(th_s, th_u, th_c.seed), th_c.threads);
      const auto& sc = th_s.cfg;
      const auto sampler = sampler_config(th_p, sc.cost_h(), sc.cost_w());
      std::vector<mi::TrainingItem> data(suite.size());
      mi::parallel_for(suite.size(), th_c.threads,
                       [&](std::size_t i) { data[i] = mi::make_training_item(suite[i], sampler); });
      if (th_opt == "adam") th_cfg.optimizer = mi::Optimizer::adam;
      else if (th_opt == "sgd") th_cfg.optimizer = mi::Optimizer::sgd;
      else throw mi::Error("--optimizer must be adam or sgd");
      const auto init = mi::TsppHeadParams::init(sc.classes, th_channels, sc.cost_h(), sc.cost_w(),
                                                 mi::derive_seed(th_c.seed, 0x4eadull));
      const auto r = mi::train_head(data, init, th_cfg);
      mi::io::write_fgrid(th_out, mi::io::to_fgrid({static_cast<int>(r.params.weights.size())},
                                                   {r.params.weights.data().begin(), r.params.weights.data().end()}));
      if (!th_trace.empty()) {
        auto out = open_csv(th_trace);
        out << "step,loss,ce,mse\n";
        for (std::size_t i = 0; i < r.loss.size(); ++i)
          out << i << ',' << num(r.loss[i]) << ',' << num(r.ce[i]) << ',' << num(r.mse[i]) << '\n';
      }
      std::cout << "loss " << num(r.loss.front()) << " -> " << num(r.loss.back()) << "\n";
    } else if (pl->parsed()) {
      const auto sc = scene_config(pl_s, pl_c.seed);
      const auto scene = mi::gen_scene(sc);
      const auto cfg = pipeline_config(pl_o, pl_p, sc, mi::derive_seed(pl_c.seed, 0x919eull));
      const auto head = load_head(pl_o.head, sc.classes, pl_o.channels, sc.cost_h(), sc.cost_w());
      const auto r = mi::run_pipeline(scene, head, cfg);
      mi::io::write_labels(pl_out, r.semantic);
      if (!pl_merged.empty()) {
        mi::LabelMap lm(sc.width, sc.height);
        for (std::size_t i = 0; i < r.aggregated.masks.size(); ++i)
          for (std::size_t p = 0; p < lm.labels.size(); ++p)
            if (r.aggregated.masks[i][p]) lm.labels[p] = static_cast<std::uint32_t>(i + 1);
        mi::io::write_labels(pl_merged, lm);
      }
      if (!pl_points.empty()) {
        auto out = open_csv(pl_points);
        out << "x,y,prob\n";
        for (const auto& q : r.points.points) out << num(q.x) << ',' << num(q.y) << ',' << num(q.prob) << '\n';
      }
      if (!pl_report.empty()) {
        auto out = open_csv(pl_report);
        out << "key,value\n"
            << "points," << r.diag.n_points << "\nproposals," << r.diag.n_proposals << "\nmerged,"
            << r.diag.n_merged << "\ninjected," << r.diag.n_injected << "\nconserved," << (r.diag.conserved ? 1 : 0)
            << "\nmiou," << num(r.diag.miou) << "\n";
      }
      std::cout << "N_p " << r.diag.n_points << "  N_s " << r.diag.n_proposals << "  N_m " << r.diag.n_merged
                << "  mIoU " << num(r.diag.miou) << "\n";
      for (const auto& t : r.diag.timings) std::cerr << "time " << t.stage << " " << num(t.seconds) << " s\n";
    } else if (bn->parsed()) {
      const auto suite = mi::gen_suite(suite_config(bn_s, bn_u, bn_c.seed), bn_c.threads);
      const auto& sc = bn_s.cfg;
      mi::BenchConfig cfg;
      cfg.sampler = sampler_config(bn_p, sc.cost_h(), sc.cost_w());
      cfg.strategies.clear();
      for (const auto& s : split_list(bn_strategies)) cfg.strategies.push_back(mi::parse_strategy(s));
      cfg.repeats = bn_repeats;
      cfg.seed = mi::derive_seed(bn_c.seed, 0xbe4cull);
      cfg.threads = bn_c.threads;
      std::optional<mi::TsppHeadParams> head;
      if (!bn_head.empty()) head = load_head(bn_head, sc.classes, bn_channels, sc.cost_h(), sc.cost_w());
      const auto rep = mi::bench_sampling(suite, cfg, head);
      auto out = open_csv(bn_out);
      const double grid = static_cast<double>(cfg.sampler.grid_h) * cfg.sampler.grid_w;
      out << "strategy,images,mean_points,recall,masks_hit,masks,reduction_vs_grid\n";
      for (const auto& s : rep.strategies) {
        out << s.name << ',' << rep.images * static_cast<std::size_t>(rep.repeats) << ',' << num(s.mean_points) << ','
            << num(s.recall) << ',' << s.hits << ',' << s.masks << ',' << num(1.0 - s.mean_points / grid) << '\n';
        std::cout << s.name << ": " << num(s.mean_points) << " points, recall " << num(s.recall) << ", "
                  << num(s.seconds_per_image * 1e3) << " ms/image\n";
      }
      using P = mi::PublishedReference;
      out << "reference:grid32,,," << P::grid_points << ",,,0\n"
          << "reference:tspp-ade150,,," << P::tspp_points_ade150 << ",,,"
          << num(1.0 - P::tspp_points_ade150 / 1024.0) << '\n'
          << "reference:tspp-pc59,,," << P::tspp_points_pc59 << ",,," << num(1.0 - P::tspp_points_pc59 / 1024.0)
          << '\n'
          << "reference:reduction,,,,,," << num(P::reduction_percent / 100.0) << '\n';
    } else if (as->parsed()) {
      const auto suite = mi::gen_suite(suite_config(as_s, as_u, as_c.seed), as_c.threads);
      const auto& sc = as_s.cfg;
      const auto cfg = pipeline_config(as_o, as_p, sc, mi::derive_seed(as_c.seed, 0x919eull));
      const auto head = load_head(as_o.head, sc.classes, as_o.channels, sc.cost_h(), sc.cost_w());
      std::vector<double> alphas;
      for (const auto& a : split_list(as_alphas)) alphas.push_back(std::stod(a));
      const auto rep = mi::alpha_sweep(suite, alphas, head, cfg, as_c.threads);
      auto out = open_csv(as_out);
      out << "alpha,mean_miou,mean_merged,total_merged,total_proposals\n";
      for (const auto& r : rep.rows) {
        out << num(r.alpha) << ',' << num(r.mean_miou) << ',' << num(r.mean_merged) << ',' << r.total_merged << ','
            << r.total_proposals << '\n';
        std::cout << "alpha " << num(r.alpha) << ": mIoU " << num(r.mean_miou) << ", N_m " << num(r.mean_merged)
                  << "\n";
      }
      std::cout << "N_m monotone in alpha: " << (rep.monotone ? "yes" : "no") << "\n";
      return rep.monotone ? 0 : 1;
    } else if (rd->parsed()) {
      if (rd_in.empty() == rd_mask.empty()) throw mi::Error("render needs exactly one of --input or --mask");
      std::vector<double> values;
      int w = 0, h = 0;
      if (!rd_in.empty()) {
        const auto g = mi::io::read_fgrid(rd_in);
        if (g.dims.size() == 2) {
          h = g.dims[0];
          w = g.dims[1];
          values = mi::io::to_doubles(g);
        } else if (g.dims.size() == 3) {
          if (rd_channel < 0 || rd_channel >= g.dims[0]) throw mi::Error("--channel out of range");
          h = g.dims[1];
          w = g.dims[2];
          const std::size_t plane = static_cast<std::size_t>(h) * w;
          values.assign(g.values.begin() + static_cast<std::ptrdiff_t>(rd_channel * plane),
                        g.values.begin() + static_cast<std::ptrdiff_t>((rd_channel + 1) * plane));
        } else {
          throw mi::Error("'" + rd_in + "' must be 2-D or 3-D");
        }
      } else {
        const auto m = mi::io::read_mask(rd_mask);
        mi::DistanceField f;
        if (rd_field == "skeleton") f = mi::skeleton_distance_field(m);
        else if (rd_field == "interior") f = mi::euclidean_distance_transform(m, mi::Reference::unset_pixels);
        else if (rd_field == "exterior") f = mi::euclidean_distance_transform(m, mi::Reference::set_pixels);
        else throw mi::Error("--field must be skeleton, interior or exterior");
        w = f.width;
        h = f.height;
        values = f.values;
      }
      if (!rd_save.empty()) mi::io::write_fgrid(rd_save, mi::io::to_fgrid({h, w}, values));
      mi::render_heatmap(values, w, h, rd_out, rd_scale);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
