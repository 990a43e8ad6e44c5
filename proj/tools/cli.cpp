#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "muse/diagnostics.hpp"
#include "muse/errors.hpp"
#include "muse/graph_io.hpp"
#include "muse/manifold.hpp"
#include "muse/report.hpp"
#include "muse/training.hpp"
#include "synth.hpp"

namespace muse::tools {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

const std::map<std::string, Activation> kFinalActivations{{"relu", Activation::kRelu},
                                                          {"identity", Activation::kIdentity}};
const std::map<std::string, Activation> kFuseActivations{{"relu", Activation::kRelu},
                                                         {"sigmoid", Activation::kSigmoid},
                                                         {"identity", Activation::kIdentity}};

struct TrainFlags {
  std::string dataset;
  std::string out;
  std::string final_activation = "relu";
  std::string fuse_activation = "relu";
  std::vector<std::string> variants;
  bool cold_start = false;
  bool no_cache = false;
  TrainConfig cfg;
};

void add_train_flags(CLI::App* app, TrainFlags& f, bool with_variant) {
  TrainConfig& c = f.cfg;
  app->add_option("--dataset", f.dataset, "dataset directory")->required();
  app->add_option("--per-class", c.per_class, "labeled nodes per class")->capture_default_str();
  app->add_option("--trials", c.trials, "number of trials")->capture_default_str();
  app->add_option("--seed", c.seed, "base seed; trial t uses seed + t")->capture_default_str();
  app->add_option("--lambda-p", c.lambda_p, "prototypical loss weight")->capture_default_str();
  app->add_option("--hidden", c.hidden, "hidden units")->capture_default_str();
  app->add_option("--k-hop", c.k_hop, "naive subgraph radius")->capture_default_str();
  app->add_option("--tau", c.tau, "latent cosine threshold")->capture_default_str();
  app->add_option("--mask-steps", c.mask_steps, "mask optimizer steps per epoch")->capture_default_str();
  app->add_option("--mask-lr", c.mask_lr, "mask optimizer step size")->capture_default_str();
  app->add_option("--isomap-k", c.isomap_k, "Isomap neighbors")->capture_default_str();
  app->add_option("--d-prime", c.d_prime, "latent dimension")->capture_default_str();
  app->add_option("--epochs", c.epochs, "maximum epochs")->capture_default_str();
  app->add_option("--patience", c.patience, "early-stopping patience")->capture_default_str();
  app->add_option("--dropout", c.dropout, "dropout rate")->capture_default_str();
  app->add_option("--lr", c.lr, "Adam learning rate")->capture_default_str();
  app->add_option("--weight-decay", c.weight_decay, "decoupled weight decay")->capture_default_str();
  app->add_option("--final-activation", f.final_activation, "second GCN layer activation")
      ->check(CLI::IsMember({"relu", "identity"}))
      ->capture_default_str();
  app->add_option("--fuse-activation", f.fuse_activation, "fusion layer activation")
      ->check(CLI::IsMember({"relu", "sigmoid", "identity"}))
      ->capture_default_str();
  app->add_flag("--cold-start-masks", f.cold_start, "reinitialise masks every epoch");
  app->add_flag("--row-normalize-features,!--no-row-normalize-features", c.row_normalize_features,
                "L1 row-normalize GCN input features (default on)");
  app->add_flag("--no-cache", f.no_cache, "skip the Isomap cache");
  app->add_option("--out", f.out, "report path");
  if (with_variant) {
    app->add_option("--variant", f.variants, "ablation variant(s), comma separated, or 'all'")
        ->delimiter(',');
  }
}

TrainConfig finish_config(TrainFlags& f) {
  TrainConfig c = f.cfg;
  c.final_activation = kFinalActivations.at(f.final_activation);
  c.fuse_activation = kFuseActivations.at(f.fuse_activation);
  c.warm_start_masks = !f.cold_start;
  c.use_cache = !f.no_cache;
  validate(c);
  return c;
}

std::optional<fs::path> cache_dir_for(const std::string& dataset, const TrainConfig& cfg) {
  if (!cfg.use_cache) return std::nullopt;
  return fs::path(dataset) / ".muse_cache";
}

std::string summary_line(const TrialReport& r) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << variant_name(r.config.variant) << ": accuracy " << r.mean << " ± " << r.std << " over "
     << r.per_trial.size() << " trial(s)\n";
  return os.str();
}

void emit(const std::string& body, const std::string& out_path, const std::string& summary,
          std::ostream& out) {
  if (out_path.empty()) {
    out << body;
  } else {
    write_text_atomic(out_path, body);
    out << summary;
  }
}

std::string variant_path(const std::string& out, Variant v) {
  if (out.empty()) return out;
  fs::path p(out);
  fs::path name = p.stem();
  name += std::string(".") + variant_name(v);
  name += p.extension();
  return (p.parent_path() / name).string();
}

int cmd_train(TrainFlags& f, bool baseline, std::ostream& out) {
  TrainConfig cfg = finish_config(f);
  if (!f.variants.empty()) cfg.variant = parse_variant(f.variants.front());
  if (baseline) cfg.variant = Variant::kGcnRaw;
  const GraphDataset ds = load_dataset(f.dataset);
  const PreparedData data = prepare(ds, cfg, cache_dir_for(f.dataset, cfg));
  const TrialReport r = baseline ? baseline_gcn(data, cfg) : run_trials(data, cfg);
  emit(report_json(r), f.out, summary_line(r), out);
  return kOk;
}

int cmd_ablate(TrainFlags& f, std::ostream& out) {
  TrainConfig cfg = finish_config(f);
  std::vector<Variant> variants;
  if (f.variants.empty()) throw ConfigError("ablate: --variant is required");
  for (const std::string& name : f.variants) {
    if (name == "all") {
      for (Variant v : all_variants()) variants.push_back(v);
    } else {
      variants.push_back(parse_variant(name));
    }
  }
  std::vector<Variant> unique;
  for (Variant v : variants) {
    if (std::find(unique.begin(), unique.end(), v) == unique.end()) unique.push_back(v);
  }
  const GraphDataset ds = load_dataset(f.dataset);
  for (Variant v : unique) {
    TrainConfig vc = cfg;
    vc.variant = v;
    const PreparedData data = prepare(ds, vc, cache_dir_for(f.dataset, vc));
    const TrialReport r = run_trials(data, vc);
    const std::string path = unique.size() == 1 ? f.out : variant_path(f.out, v);
    emit(report_json(r), path, summary_line(r), out);
  }
  return kOk;
}

struct IsomapFlags {
  std::string dataset;
  std::string out;
  IsomapOptions opts;
  bool no_cache = false;
};

std::vector<double> read_manifold_param(const fs::path& file, std::size_t n) {
  std::ifstream in(file);
  if (!in) throw DatasetError("cannot read " + file.string());
  std::vector<double> param(n, 0.0);
  std::vector<bool> seen(n, false);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::size_t node = 0;
    double value = 0.0;
    if (!(ls >> node >> value) || node >= n) {
      throw DatasetError(file.string() + ": malformed line '" + line + "'");
    }
    param[node] = value;
    seen[node] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) {
    throw DatasetError(file.string() + ": missing nodes");
  }
  return param;
}

int cmd_isomap(IsomapFlags& f, std::ostream& out) {
  if (f.opts.latent_dim < 1) throw ConfigError("isomap: --d-prime must be ≥ 1");
  if (f.opts.k_iso < 1) throw ConfigError("isomap: --isomap-k must be ≥ 1");
  const GraphDataset ds = load_dataset(f.dataset);
  std::optional<fs::path> cache;
  if (!f.no_cache) cache = fs::path(f.dataset) / ".muse_cache";
  const LatentGraph g = latent_graph_cached(ds.features, f.opts, cache);

  ordered_json j{{"schema", kReportSchema},
                 {"version", kVersion},
                 {"dataset", ds.name},
                 {"nodes", ds.node_count},
                 {"isomap_k", f.opts.k_iso},
                 {"d_prime", f.opts.latent_dim},
                 {"cached", g.cached}};
  if (cache) j["cache_dir"] = cache->string();
  const std::size_t head = std::min<std::size_t>(10, g.eigenvalues.size());
  j["eigenvalues_head"] = std::vector<double>(g.eigenvalues.begin(), g.eigenvalues.begin() + head);
  j["max_residual"] = g.residuals.empty() ? 0.0 : *std::max_element(g.residuals.begin(), g.residuals.end());
  j["repair_edges"] = g.repair_edges;
  const fs::path param_file = fs::path(f.dataset) / "manifold_param.tsv";
  if (fs::exists(param_file)) {
    const std::vector<double> param = read_manifold_param(param_file, ds.node_count);
    std::vector<double> first(ds.node_count);
    for (std::size_t i = 0; i < ds.node_count; ++i) first[i] = g.coords(i, 0);
    j["spearman"] = std::abs(spearman(first, param));
  }
  std::ostringstream summary;
  summary << "isomap: " << (g.cached ? "cached" : "computed") << ", " << g.repair_edges
          << " repair edge(s)";
  if (j.contains("spearman")) summary << ", spearman " << j["spearman"].get<double>();
  summary << '\n';
  emit(j.dump(2) + "\n", f.out, summary.str(), out);
  return kOk;
}

struct BoundFlags {
  BoundInputs in;
  std::vector<double> caps;
};

int cmd_bound(BoundFlags& f, std::ostream& out) {
  BoundInputs in = f.in;
  in.norm_caps = f.caps.empty() ? std::vector<double>(in.depth, 1.0) : f.caps;
  const BoundTerms t = bound_terms(in);
  ordered_json j{{"empirical", t.empirical},
                 {"complexity", t.complexity},
                 {"confidence", t.confidence},
                 {"bound", t.total()}};
  out << j.dump(2) << '\n';
  return kOk;
}

struct SynthFlags {
  std::string kind = "sbm";
  std::string out;
  std::string format = "csv";
  SbmOptions sbm;
  std::size_t points = 40;
  double width = 0.0;
};

int cmd_synth(SynthFlags& f, std::ostream& out) {
  const FeatureFormat format = f.format == "f32" ? FeatureFormat::kF32 : FeatureFormat::kCsv;
  GraphDataset ds;
  std::vector<double> param;
  if (f.kind == "sbm") {
    ds = make_sbm(f.sbm);
  } else if (f.kind == "scurve") {
    ds = make_scurve(f.points, f.sbm.seed, &param, f.width);
  } else {
    ds = make_circle(f.points);
  }
  save_dataset(ds, f.out, format);
  if (!param.empty()) {
    std::ostringstream os;
    os.precision(17);
    for (std::size_t i = 0; i < param.size(); ++i) os << i << '\t' << param[i] << '\n';
    write_text_atomic(fs::path(f.out) / "manifold_param.tsv", os.str());
  }
  out << "synth: " << f.kind << " with " << ds.node_count << " nodes, " << ds.adjacency.nnz() / 2
      << " edges written to " << f.out << '\n';
  return kOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-view subgraph GCN for scarce-label node classification", "muse"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  TrainFlags train_flags;
  TrainFlags baseline_flags;
  TrainFlags ablate_flags;
  auto* train = app.add_subcommand("train", "run Muse trials and write a report");
  add_train_flags(train, train_flags, true);
  auto* baseline = app.add_subcommand("baseline", "run the single-branch GCN baseline");
  add_train_flags(baseline, baseline_flags, false);
  auto* ablate = app.add_subcommand("ablate", "run ablation variants, one report each");
  add_train_flags(ablate, ablate_flags, true);

  IsomapFlags iso;
  auto* isomap = app.add_subcommand("isomap", "build or load the latent graph and summarise it");
  isomap->add_option("--dataset", iso.dataset, "dataset directory")->required();
  isomap->add_option("--isomap-k", iso.opts.k_iso, "Isomap neighbors")->capture_default_str();
  isomap->add_option("--d-prime", iso.opts.latent_dim, "latent dimension")->capture_default_str();
  isomap->add_flag("--no-cache", iso.no_cache, "skip the cache");
  isomap->add_option("--out", iso.out, "summary path");

  BoundFlags bf;
  auto* bound = app.add_subcommand("bound", "evaluate the generalization bound");
  bound->add_option("--empirical-risk", bf.in.empirical_risk)->required();
  bound->add_option("--input-bound", bf.in.input_bound)->required();
  bound->add_option("--depth", bf.in.depth)->capture_default_str();
  bound->add_option("--norm-caps", bf.caps, "per-layer norm caps, comma separated")->delimiter(',');
  bound->add_option("--samples", bf.in.samples)->required();
  bound->add_option("--views", bf.in.views)->capture_default_str();
  bound->add_option("--delta", bf.in.delta)->capture_default_str();
  bound->add_option("--range-a", bf.in.range_a)->capture_default_str();
  bound->add_option("--range-b", bf.in.range_b)->capture_default_str();

  SynthFlags sf;
  auto* synth = app.add_subcommand("synth", "write a synthetic dataset");
  synth->add_option("--kind", sf.kind)->check(CLI::IsMember({"sbm", "scurve", "circle"}))->capture_default_str();
  synth->add_option("--classes", sf.sbm.classes)->capture_default_str();
  synth->add_option("--per-block", sf.sbm.per_block)->capture_default_str();
  synth->add_option("--p-in", sf.sbm.p_in)->capture_default_str();
  synth->add_option("--p-out", sf.sbm.p_out)->capture_default_str();
  synth->add_option("--feat-dim", sf.sbm.feat_dim)->capture_default_str();
  synth->add_option("--feat-noise", sf.sbm.feat_noise)->capture_default_str();
  synth->add_option("--seed", sf.sbm.seed)->capture_default_str();
  synth->add_option("--points", sf.points, "point count for scurve/circle")->capture_default_str();
  synth->add_option("--width", sf.width, "S-curve sheet width; 0 gives a curve")->capture_default_str();
  synth->add_option("--format", sf.format)->check(CLI::IsMember({"csv", "f32"}))->capture_default_str();
  synth->add_option("--out", sf.out, "output dataset directory")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::CallForVersion&) {
    out << kVersion << '\n';
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "muse: " << e.what() << '\n';
    return kConfigExit;
  }

  try {
    if (train->parsed()) return cmd_train(train_flags, false, out);
    if (baseline->parsed()) return cmd_train(baseline_flags, true, out);
    if (ablate->parsed()) return cmd_ablate(ablate_flags, out);
    if (isomap->parsed()) return cmd_isomap(iso, out);
    if (bound->parsed()) return cmd_bound(bf, out);
    if (synth->parsed()) return cmd_synth(sf, out);
  } catch (const std::invalid_argument& e) {
    err << "muse: configuration error: " << e.what() << '\n';
    return kConfigExit;
  } catch (const DatasetError& e) {
    err << "muse: dataset error: " << e.what() << '\n';
    return kDatasetExit;
  } catch (const fs::filesystem_error& e) {
    err << "muse: dataset error: " << e.what() << '\n';
    return kDatasetExit;
  } catch (const NumericError& e) {
    err << "muse: numeric failure: " << e.what() << '\n';
    return kNumericExit;
  }
  return kConfigExit;
}

}  // namespace muse::tools
