#include "splinestroke/eval/suites.hpp"
#include "splinestroke/io/image.hpp"
#include "splinestroke/planner/planner.hpp"
#include "splinestroke/render/training.hpp"
#include "splinestroke/synthetic/synthetic.hpp"
#include "splinestroke/trajectory/io.hpp"
#include "splinestroke/vae/trajvae.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace splinestroke;

namespace {

/// Thrown for bad invocations; exits with status 2.
struct UsageError : Error {
  using Error::Error;
};

std::string flag_name(const std::string& key) {
  std::string out = "--";
  for (char c : key) out += c == '_' ? '-' : c;
  return out;
}

/// Parses a flag value against the type of its default.
json parse_value(const std::string& key, const std::string& text, const json& like) {
  if (like.is_string()) return text;
  json v;
  try {
    v = json::parse(text);
  } catch (const json::parse_error&) {
    if (!like.is_array()) throw UsageError(flag_name(key) + ": cannot parse '" + text + "'");
    v = json::parse("[" + text + "]");
  }
  return v;
}

bool same_kind(const json& a, const json& b) {
  if (a.is_number() && b.is_number()) return true;
  return a.type() == b.type();
}

/// Defaults, then the --config file, then flags. Unknown keys are rejected.
class Settings {
 public:
  Settings(CLI::App* app, json defaults) : defaults_(std::move(defaults)) {
    app->add_option("--config", config_path_, "JSON file of settings");
    for (const auto& [key, value] : defaults_.items()) {
      app->add_option(flag_name(key), flags_[key], "default " + value.dump());
    }
  }

  json resolve() const {
    json out = defaults_;
    std::optional<json> file;
    if (!config_path_.empty()) {
      std::ifstream is(config_path_);
      if (!is) throw UsageError("cannot open config " + config_path_);
      try {
        file = json::parse(is);
      } catch (const json::parse_error& e) {
        throw UsageError("config " + config_path_ + ": " + e.what());
      }
      if (!file->is_object()) throw UsageError("config " + config_path_ + " must hold a JSON object");
      for (const auto& [key, value] : file->items()) {
        if (!defaults_.contains(key)) throw UsageError("config " + config_path_ + ": unknown key '" + key + "'");
        if (!same_kind(value, defaults_[key])) {
          throw UsageError("config " + config_path_ + ": '" + key + "' should look like " + defaults_[key].dump());
        }
        out[key] = value;
      }
    }
    bool seed_given = file && file->contains("seed");
    for (const auto& [key, text] : flags_) {
      if (!text) continue;
      const json v = parse_value(key, *text, defaults_[key]);
      if (!same_kind(v, defaults_[key])) {
        throw UsageError(flag_name(key) + ": expected a value like " + defaults_[key].dump());
      }
      out[key] = v;
      seed_given = seed_given || key == "seed";
    }
    if (out.contains("seed") && !seed_given) {
      if (const char* env = std::getenv("SPLINE_SEED")) {
        try {
          out["seed"] = std::stoull(env);
        } catch (const std::exception&) {
          throw UsageError("SPLINE_SEED must be a non-negative integer, got '" + std::string(env) + "'");
        }
      }
    }
    return out;
  }

 private:
  json defaults_;
  std::string config_path_;
  std::map<std::string, std::optional<std::string>> flags_;
};

void write_config(const fs::path& path, const std::string& command, const json& config) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw Error("cannot write " + path.string());
  os << json{{"command", command}, {"config", config}}.dump(2) << "\n";
}

/// Config echo for commands whose output is a single file.
void write_config_beside(const fs::path& output, const std::string& command, const json& config) {
  write_config(fs::path(output.string() + ".config.json"), command, config);
}

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

render::RendererParams params_from(const json& c) {
  return render::RendererParams{c.at("m_x"), c.at("m_y"), c.at("b_x"), c.at("b_y"),
                                c.at("alpha"), c.at("beta"), c.at("c")};
}

json params_defaults(const render::RendererParams& p) {
  return {{"m_x", p.m_x}, {"m_y", p.m_y}, {"b_x", p.b_x}, {"b_y", p.b_y}, {"alpha", p.alpha}, {"beta", p.beta}, {"c", p.c}};
}

vae::VaeTrainConfig vae_config(const json& c, bool with_hidden) {
  vae::VaeTrainConfig cfg;
  cfg.epochs = c.at("epochs");
  cfg.lr = c.at("lr");
  cfg.kl_weight = c.at("kl_weight");
  cfg.batch_size = c.at("batch_size");
  cfg.seed = c.at("seed");
  if (with_hidden) cfg.hidden_sizes = c.at("hidden_sizes").get<std::vector<std::size_t>>();
  cfg.on_epoch = [](std::size_t epoch, double loss) { std::cout << "epoch " << epoch << " loss " << loss << "\n"; };
  return cfg;
}

std::vector<trajectory::Trajectory> load_dataset(const std::string& path) {
  auto data = trajectory::read_dataset(fs::path(path));
  if (data.empty()) throw Error("dataset " + path + " is empty");
  return data;
}

render::RendererParams load_renderer(const std::string& ref) {
  if (ref.empty()) throw Error("plan has no renderer checkpoint reference");
  if (!fs::exists(ref)) throw Error("renderer checkpoint '" + ref + "' not found");
  return render::RendererParams::load(ref);
}

vae::TrajVae load_vae(const std::string& ref) {
  if (ref.empty()) throw Error("no VAE checkpoint given");
  if (!fs::exists(ref)) throw Error("VAE checkpoint '" + ref + "' not found");
  return vae::TrajVae::load(ref);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trajectory-latent stroke planning: ingest, train, plan, render, evaluate."};
  app.require_subcommand(1);
  std::string command;

  // ingest
  auto* ingest = app.add_subcommand("ingest", "Pose stream JSONL -> standardized trajectory dataset");
  std::string ingest_in, ingest_out;
  ingest->add_option("stream", ingest_in, "pose-stream JSONL")->required();
  ingest->add_option("out", ingest_out, "output dataset JSONL")->required();
  Settings ingest_s(ingest, {{"contact_threshold", trajectory::kDefaultContactThreshold},
                             {"n", trajectory::kDefaultPointCount},
                             {"min_samples", trajectory::kDefaultMinSamples},
                             {"pen_length", 0.15}});

  // train-vae / finetune-vae
  const vae::VaeTrainConfig vd;
  auto* train_vae = app.add_subcommand("train-vae", "Train a trajectory VAE");
  std::string tv_data, tv_out;
  train_vae->add_option("dataset", tv_data, "trajectory dataset JSONL")->required();
  train_vae->add_option("out", tv_out, "output checkpoint")->required();
  Settings train_vae_s(train_vae, {{"epochs", vd.epochs},
                                   {"lr", vd.lr},
                                   {"kl_weight", vd.kl_weight},
                                   {"hidden_sizes", vd.hidden_sizes},
                                   {"batch_size", vd.batch_size},
                                   {"seed", 0}});

  auto* finetune_vae = app.add_subcommand("finetune-vae", "Continue training a VAE on new trajectories");
  std::string ft_data, ft_out, ft_base;
  finetune_vae->add_option("dataset", ft_data, "trajectory dataset JSONL")->required();
  finetune_vae->add_option("out", ft_out, "output checkpoint")->required();
  finetune_vae->add_option("--base-checkpoint", ft_base, "checkpoint to start from");
  Settings finetune_s(finetune_vae, {{"epochs", 300},
                                     {"lr", vd.lr},
                                     {"kl_weight", vd.kl_weight},
                                     {"batch_size", vd.batch_size},
                                     {"seed", 0}});

  // train-renderer
  const render::RendererTrainConfig rd;
  auto* train_renderer = app.add_subcommand("train-renderer", "Fit the stroke renderer to (trajectory, before, after) triples");
  std::string tr_dir, tr_out;
  train_renderer->add_option("triples", tr_dir, "directory of triples")->required();
  train_renderer->add_option("out", tr_out, "output parameter file")->required();
  json tr_defaults = params_defaults(rd.init);
  tr_defaults.update(json{{"epochs", rd.epochs}, {"lr", rd.lr}, {"stroke_weight", rd.stroke_weight}, {"min_scale", rd.min_scale}});
  Settings train_renderer_s(train_renderer, tr_defaults);

  // plan
  const planner::OptimizeConfig od;
  const planner::LossSpec ld = planner::default_loss();
  auto* plan = app.add_subcommand("plan", "Optimize a stroke plan toward a target image");
  std::string pl_target, pl_out, pl_vae, pl_renderer;
  plan->add_option("target", pl_target, "target PNG")->required();
  plan->add_option("out", pl_out, "output directory")->required();
  plan->add_option("--vae", pl_vae, "VAE checkpoint")->required();
  plan->add_option("--renderer", pl_renderer, "renderer parameter file")->required();
  Settings plan_s(plan, {{"strokes", 400},
                         {"iterations", od.iterations},
                         {"lr", od.lr},
                         {"batch_size", od.batch_size},
                         {"n_colors", od.n_colors},
                         {"discretize_at", od.discretize_at},
                         {"height_min", od.heights.min},
                         {"height_max", od.heights.max},
                         {"position_lr", od.position_lr},
                         {"latent_lr", od.latent_lr},
                         {"color_lr", od.color_lr},
                         {"latent_prior", od.latent_prior},
                         {"latent_free", od.latent_free},
                         {"decay_start", od.decay_start},
                         {"loss", "l2"},
                         {"blur_sigmas", ld.blur_sigmas},
                         {"blur_weight_power", ld.blur_weight_power},
                         {"canvas_height", 128},
                         {"canvas_width", 128},
                         {"background", {1.0, 1.0, 1.0}},
                         {"seed", 0}});

  // render
  auto* render_cmd = app.add_subcommand("render", "Render an exported plan to PNG");
  std::string rn_plan, rn_out, rn_renderer;
  render_cmd->add_option("plan", rn_plan, "plan JSON")->required();
  render_cmd->add_option("out", rn_out, "output PNG")->required();
  render_cmd->add_option("--renderer", rn_renderer, "override the plan's renderer reference");
  Settings render_s(render_cmd, json::object());

  // make-synthetic
  auto* synth = app.add_subcommand("make-synthetic", "Generate synthetic trajectories, pose streams or triples");
  std::string sy_kind, sy_out;
  synth->add_option("kind", sy_kind, "arcs | zigzags | circles | mixed | streams | triples")
      ->required()
      ->check(CLI::IsMember({"arcs", "zigzags", "circles", "mixed", "streams", "triples"}));
  synth->add_option("out", sy_out, "output file (directory for triples)")->required();
  json sy_defaults = params_defaults({1.0, 1.0, 0.0, 0.0, 0.3, 0.01, 1.5});
  sy_defaults.update(json{{"count", 200}, {"n", trajectory::kDefaultPointCount}, {"max_height", 0.02},
                          {"height", 128}, {"width", 128}, {"seed", 0}});
  Settings synth_s(synth, sy_defaults);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "Run an evaluation suite: gradcheck, recovery or selfrecon");
  std::string ev_suite, ev_vae, ev_out;
  eval_cmd->add_option("suite", ev_suite, "gradcheck | recovery | selfrecon")->required();
  eval_cmd->add_option("--vae", ev_vae, "VAE checkpoint for selfrecon (trained on synthetic strokes when absent)");
  eval_cmd->add_option("--out", ev_out, "directory for report.txt and config.json");
  const eval::GradcheckConfig gd;
  const eval::RecoveryConfig rcd;
  const eval::SelfReconConfig sd;
  Settings eval_s(eval_cmd, {{"configs", gd.configs},
                             {"grid", gd.height},
                             {"points", gd.points},
                             {"step", gd.step},
                             {"tolerance", gd.tolerance},
                             {"edge_margin", gd.edge_margin},
                             {"distance_margin", gd.distance_margin},
                             {"triples", rcd.triples},
                             {"epochs", rcd.epochs},
                             {"perturbation", rcd.perturbation},
                             {"strokes", sd.strokes},
                             {"iterations", sd.iterations},
                             {"max_ratio", sd.max_ratio},
                             {"canvas", sd.canvas},
                             {"plan_lr", sd.optimize.lr},
                             {"latent_lr", sd.optimize.latent_lr},
                             {"latent_prior", sd.optimize.latent_prior},
                             {"latent_free", sd.optimize.latent_free},
                             {"decay_start", sd.optimize.decay_start},
                             {"seed", 0}});

  // dump-latents
  auto* dump = app.add_subcommand("dump-latents", "Encode a dataset and write mu/logvar per trajectory");
  std::string dl_data, dl_vae, dl_out;
  dump->add_option("dataset", dl_data, "trajectory dataset JSONL")->required();
  dump->add_option("out", dl_out, "output JSONL")->required();
  dump->add_option("--vae", dl_vae, "VAE checkpoint")->required();
  Settings dump_s(dump, json::object());

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", "usage"}, {"message", e.what()}}.dump() << "\n";
    return 2;
  }

  const auto* active = app.get_subcommands().front();
  command = active->get_name();
  try {
    if (active == ingest) {
      const json c = ingest_s.resolve();
      trajectory::IngestOptions opt;
      opt.extract.contact_threshold = c.at("contact_threshold");
      opt.extract.min_samples = c.at("min_samples");
      opt.n = c.at("n");
      opt.pen_length = c.at("pen_length");
      const auto strokes = trajectory::ingest(trajectory::read_pose_stream(fs::path(ingest_in)), opt);
      ensure_parent(ingest_out);
      trajectory::write_dataset(fs::path(ingest_out), strokes);
      write_config_beside(ingest_out, command, c);
      double mean = 0.0;
      for (const auto& t : strokes) mean += trajectory::arc_length(t) / static_cast<double>(strokes.size());
      std::cout << "strokes " << strokes.size() << " mean_length " << mean << "\n";
    } else if (active == train_vae) {
      const json c = train_vae_s.resolve();
      const auto data = load_dataset(tv_data);
      const auto model = vae::train_vae(data, vae_config(c, true));
      ensure_parent(tv_out);
      model.save(tv_out);
      write_config_beside(tv_out, command, c);
      std::cout << "reconstruction_mse " << vae::reconstruction_mse(model, data) << "\n";
    } else if (active == finetune_vae) {
      if (ft_base.empty()) throw UsageError("finetune-vae requires --base-checkpoint");
      const json c = finetune_s.resolve();
      const auto base = load_vae(ft_base);
      const auto data = load_dataset(ft_data);
      const double before = vae::reconstruction_mse(base, data);
      const auto model = vae::finetune(base, data, vae_config(c, false));
      ensure_parent(ft_out);
      model.save(ft_out);
      json echo = c;
      echo["base_checkpoint"] = ft_base;
      write_config_beside(ft_out, command, echo);
      std::cout << "reconstruction_mse " << before << " -> " << vae::reconstruction_mse(model, data) << "\n";
    } else if (active == train_renderer) {
      const json c = train_renderer_s.resolve();
      const auto data = render::load_triples(tr_dir);
      render::RendererTrainConfig cfg;
      cfg.epochs = c.at("epochs");
      cfg.lr = c.at("lr");
      cfg.stroke_weight = c.at("stroke_weight");
      cfg.min_scale = c.at("min_scale");
      cfg.init = params_from(c);
      cfg.on_epoch = [](std::size_t epoch, double loss) {
        if (epoch % 100 == 0) std::cout << "epoch " << epoch << " loss " << loss << "\n";
      };
      const auto result = render::train_renderer(data, cfg);
      ensure_parent(tr_out);
      result.params.save(tr_out);
      write_config_beside(tr_out, command, c);
      const auto v = result.params.values();
      for (std::size_t k = 0; k < render::kParamCount; ++k) std::cout << render::kParamNames[k] << " " << v[k] << "\n";
    } else if (active == plan) {
      const json c = plan_s.resolve();
      const auto model = load_vae(pl_vae);
      const auto params = load_renderer(pl_renderer);
      planner::Canvas canvas;
      canvas.height = c.at("canvas_height");
      canvas.width = c.at("canvas_width");
      const auto bg = c.at("background").get<std::vector<double>>();
      if (bg.size() != 3) throw UsageError("--background needs 3 values");
      canvas.background = Eigen::Vector3d(bg[0], bg[1], bg[2]);
      const auto target = io::resize_bilinear(io::read_png(pl_target), canvas.height, canvas.width);

      planner::LossSpec loss;
      loss.kind = planner::parse_loss_kind(c.at("loss"));
      if (loss.kind == planner::LossKind::Feature) throw UsageError("the feature loss needs a model and is library-only");
      loss.blur_sigmas = c.at("blur_sigmas").get<std::vector<double>>();
      loss.blur_weight_power = c.at("blur_weight_power");

      planner::OptimizeConfig oc;
      oc.iterations = c.at("iterations");
      oc.lr = c.at("lr");
      oc.batch_size = c.at("batch_size");
      oc.n_colors = c.at("n_colors");
      oc.discretize_at = c.at("discretize_at");
      oc.heights = {c.at("height_min"), c.at("height_max")};
      oc.position_lr = c.at("position_lr");
      oc.latent_lr = c.at("latent_lr");
      oc.color_lr = c.at("color_lr");
      oc.latent_prior = c.at("latent_prior");
      oc.latent_free = c.at("latent_free");
      oc.decay_start = c.at("decay_start");
      oc.seed = c.at("seed");
      oc.on_iteration = [](std::size_t it, double value) {
        if (it % 50 == 0) std::cout << "iteration " << it << " loss " << value << "\n";
      };

      std::mt19937_64 rng(c.at("seed").get<std::uint64_t>());
      const std::size_t strokes = c.at("strokes");
      auto init = planner::init_plan(strokes, canvas, model.n(), rng, oc.heights);
      init.vae_ref = fs::absolute(pl_vae).string();
      init.renderer_ref = fs::absolute(pl_renderer).string();
      const auto result = planner::optimize(init, target, loss, model, params, oc);

      const fs::path dir(pl_out);
      fs::create_directories(dir);
      const auto exported = planner::export_plan(result.plan, model, params);
      planner::write_plan(dir / "plan.json", exported);
      const auto preview = planner::render_exported(exported, params);
      io::write_png(dir / "preview.png", preview);
      std::ofstream(dir / "palette.txt") << planner::palette_report(result.plan.palette);
      write_config(dir / "config.json", command, c);
      std::cout << "initial_loss " << result.initial_loss << " best_loss " << result.best_loss << " best_iteration "
                << result.best_iteration << "\n";
      std::cout << "pixel_l2 " << planner::pixel_l2(preview, target) << "\n";
    } else if (active == render_cmd) {
      const json c = render_s.resolve();
      const auto exported = planner::read_plan(rn_plan);
      const auto params = load_renderer(rn_renderer.empty() ? exported.plan.renderer_ref : rn_renderer);
      ensure_parent(rn_out);
      io::write_png(rn_out, planner::render_exported(exported, params));
      json echo = c;
      echo["renderer"] = rn_renderer.empty() ? exported.plan.renderer_ref : rn_renderer;
      write_config_beside(rn_out, command, echo);
      std::cout << "strokes " << exported.plan.actions.size() << "\n";
    } else if (active == synth) {
      const json c = synth_s.resolve();
      synthetic::Rng rng(c.at("seed").get<std::uint64_t>());
      const std::size_t count = c.at("count");
      const std::size_t n = c.at("n");
      const double max_height = c.at("max_height");
      if (sy_kind == "triples") {
        const fs::path dir(sy_out);
        fs::create_directories(dir);
        const auto params = params_from(c);
        const auto data = synthetic::triples(count, c.at("height"), c.at("width"), params, rng);
        for (std::size_t i = 0; i < data.size(); ++i) render::save_triple(dir, i, data[i]);
        params.save(dir / "truth.json");
        write_config(dir / "config.json", command, c);
        std::cout << "triples " << data.size() << "\n";
      } else if (sy_kind == "streams") {
        ensure_parent(sy_out);
        trajectory::write_pose_stream(fs::path(sy_out), synthetic::pose_stream(count, rng));
        write_config_beside(sy_out, command, c);
        std::cout << "strokes " << count << "\n";
      } else {
        const auto kind = sy_kind == "arcs"      ? synthetic::Family::Arcs
                          : sy_kind == "zigzags" ? synthetic::Family::Zigzags
                          : sy_kind == "circles" ? synthetic::Family::Circles
                                                 : synthetic::Family::Mixed;
        ensure_parent(sy_out);
        trajectory::write_dataset(fs::path(sy_out), synthetic::family(kind, count, rng, n, max_height));
        write_config_beside(sy_out, command, c);
        std::cout << "trajectories " << count << "\n";
      }
    } else if (active == eval_cmd) {
      const json c = eval_s.resolve();
      const auto log = [](const std::string& line) { std::cerr << line << "\n"; };
      eval::Report report;
      if (ev_suite == "gradcheck") {
        eval::GradcheckConfig g;
        g.configs = c.at("configs");
        g.height = g.width = c.at("grid");
        g.points = c.at("points");
        g.step = c.at("step");
        g.tolerance = c.at("tolerance");
        g.edge_margin = c.at("edge_margin");
        g.distance_margin = c.at("distance_margin");
        g.seed = c.at("seed");
        report = eval::gradcheck(g, log);
      } else if (ev_suite == "recovery") {
        eval::RecoveryConfig r;
        r.triples = c.at("triples");
        r.epochs = c.at("epochs");
        r.perturbation = c.at("perturbation");
        r.seed = c.at("seed");
        report = eval::recovery(r, log);
      } else if (ev_suite == "selfrecon") {
        synthetic::Rng rng(c.at("seed").get<std::uint64_t>());
        const auto shapes = synthetic::family(synthetic::Family::Mixed, 200, rng);
        std::optional<vae::TrajVae> model;
        if (!ev_vae.empty()) {
          model.emplace(load_vae(ev_vae));
        } else {
          log("training a VAE on 200 synthetic strokes");
          vae::VaeTrainConfig vc;
          vc.seed = c.at("seed");
          model.emplace(vae::train_vae(shapes, vc));
        }
        eval::SelfReconConfig s;
        s.strokes = c.at("strokes");
        s.iterations = c.at("iterations");
        s.max_ratio = c.at("max_ratio");
        s.canvas = c.at("canvas");
        s.loss = planner::default_loss(s.canvas);
        s.optimize.lr = c.at("plan_lr");
        s.optimize.latent_lr = c.at("latent_lr");
        s.optimize.latent_prior = c.at("latent_prior");
        s.optimize.latent_free = c.at("latent_free");
        s.optimize.decay_start = c.at("decay_start");
        s.seed = c.at("seed");
        report = eval::selfrecon(*model, shapes, s, log);
      } else {
        throw UsageError("unknown suite '" + ev_suite + "' (suites: gradcheck, recovery, selfrecon)");
      }
      std::cout << report.format() << "checks " << report.checks.size() << " failed " << report.failures() << " seconds "
                << report.seconds << "\n";
      if (!ev_out.empty()) {
        fs::create_directories(ev_out);
        std::ofstream(fs::path(ev_out) / "report.txt") << report.format();
        write_config(fs::path(ev_out) / "config.json", command + " " + ev_suite, c);
      }
      if (!report.passed()) throw Error(ev_suite + ": " + std::to_string(report.failures()) + " check(s) failed");
    } else if (active == dump) {
      const json c = dump_s.resolve();
      const auto model = load_vae(dl_vae);
      const auto data = load_dataset(dl_data);
      ensure_parent(dl_out);
      std::ofstream os(dl_out);
      if (!os) throw Error("cannot write " + dl_out);
      grad::NoGradGuard ng;
      for (const auto& t : data) {
        const auto e = model.encode(t);
        const auto& mu = e.mu.value();
        const auto& lv = e.logvar.value();
        os << json{{"mu", std::vector<double>(mu.data(), mu.data() + mu.size())},
                   {"logvar", std::vector<double>(lv.data(), lv.data() + lv.size())}}
                  .dump()
           << "\n";
      }
      json echo = c;
      echo["vae"] = dl_vae;
      write_config_beside(dl_out, command, echo);
      std::cout << "latents " << data.size() << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << json{{"error", "usage"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "failed"}, {"command", command}, {"message", e.what()}}.dump() << "\n";
    return 1;
  }
  return 0;
}
