#include "gestauth/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "gestauth/classifiers.hpp"
#include "gestauth/dataset.hpp"
#include "gestauth/distances.hpp"
#include "gestauth/error.hpp"
#include "gestauth/eval.hpp"
#include "gestauth/experiments.hpp"
#include "gestauth/features.hpp"
#include "gestauth/generative.hpp"
#include "gestauth/svg.hpp"

namespace gestauth::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

const std::vector<KeyInfo>& config_keys() {
  static const std::vector<KeyInfo> keys{
      // general
      {"name", "run", "run name; outputs go to <out>/run-<name>"},
      {"out", "", "output directory (ingest/simulate: corpus dir, default 'corpus'; others: parent of run-<name>, default '.')"},
      {"seed", "0", "random seed"},
      {"seeds", "0,1,2,3,4", "comma-separated seeds for repeated experiments"},
      {"jobs", "1", "parallel experiment units (users or seeds)"},
      {"plots", "true", "write SVG plots"},
      // data
      {"raw", "", "directory of <user>.csv sensor files and <user>.json manifests"},
      {"corpus", "corpus", "corpus directory (corpus.jsonl, split.json) or .jsonl file"},
      {"split", "", "split JSON overriding the corpus directory's split"},
      {"filter_cutoff_hz", "10", "low-pass cutoff applied at ingestion"},
      {"filter_order", "2", "Butterworth order applied at ingestion"},
      {"trainval_fraction", "0.6666666666666666", "earliest fraction of each user's data used for train+validation"},
      {"val_fraction", "0.2", "validation share of the train+validation part"},
      {"users", "8", "simulated users"},
      {"gestures_per_user", "60", "simulated gestures per user"},
      {"nongestures", "160", "simulated non-gesture windows"},
      {"user_spread", "0.15", "simulated between-user variation"},
      {"noise_sigma", "0.3", "simulated within-user noise"},
      // authentication classifiers
      {"arch", "complexmix", "mlp, convnet, gru, simplemix, complexmix or rf"},
      {"target", "", "target user (empty: every user)"},
      {"lr", "1e-4", "classifier learning rate"},
      {"pos_weight", "4", "positive-class weight in the cross-entropy"},
      {"patience", "150", "classifier early-stopping patience (epochs)"},
      {"max_epochs", "2000", "classifier epoch limit"},
      {"batch_size", "32", "classifier batch size"},
      {"limited_fraction", "1", "fraction of the target's training gestures kept"},
      {"n_trees", "100", "random-forest trees"},
      {"min_samples_leaf", "1", "random-forest minimum leaf size"},
      // autoencoder
      {"vae", "", "autoencoder checkpoint stem (empty: train one)"},
      {"reg", "vae", "latent regulariser: vae, wae or none"},
      {"beta", "", "regulariser weight (empty: 1e-4 for vae, 1e-3 for wae, 0 for none)"},
      {"alpha", "0.01", "approximate-MRR weight"},
      {"loss", "klb_mod_feature", "reconstruction loss: mse, soft_dtw, klb_mod, mse_feature, klb_mod_feature"},
      {"loss_base_weight", "", "override of the base-loss weight"},
      {"loss_feature_weight", "", "override of the feature-loss weight"},
      {"loss_gamma", "0.1", "soft-DTW smoothing"},
      {"wae_distance", "euclidean", "energy-distance kernel: euclidean or squared"},
      {"mrr_temperature", "1", "approximate-rank temperature"},
      {"vae_lr", "1e-4", "autoencoder learning rate"},
      {"vae_batch_size", "32", "autoencoder batch size"},
      {"vae_max_epochs", "2000", "autoencoder epoch limit"},
      {"vae_patience", "150", "autoencoder early-stopping patience"},
      {"vae_val_fraction", "0.2", "random validation share for the autoencoder"},
      {"beta_warmup_epochs", "0", "linear beta warm-up length"},
      {"nongesture_pretrain_epochs", "0", "reconstruction-only epochs on non-gestures"},
      // synthetic data and TSTR
      {"mode", "auth", "tstr mode: auth or intent"},
      {"holdout", "", "held-out user for tstr auth and sweep"},
      {"strategy", "adversarial", "neighbourhood, self_mixed, adversarial, same_user or none"},
      {"mix_weight", "0.85", "weight of target latents in mixed strategies"},
      {"mix_components", "3", "latents mixed per synthetic sample"},
      {"n_synthetic", "500", "synthetic gestures per authentication run"},
      {"intent_synthetic", "240", "reconstructed gestures per intent run"},
      {"per_terminal", "2", "real enrolment gestures per terminal"},
      {"terminals", "7", "terminal positions"},
      {"real_negatives", "false", "add other users' real gestures to the negative class"},
      {"counts", "1,2,3,4", "gestures-per-terminal values for the sweep"},
      // evaluate and loss
      {"scores", "", "score CSV (score,label) for evaluate"},
      {"a", "", "first gesture key (user/gesture) for loss"},
      {"b", "", "second gesture key (user/gesture) for loss"},
  };
  return keys;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool known_key(const std::string& key) {
  for (const auto& k : config_keys())
    if (key == k.key) return true;
  return false;
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos == v.size() && std::isfinite(d)) return d;
  } catch (const std::exception&) {
  }
  throw InputError("config key '" + key + "': '" + v + "' is not a finite number");
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  if (v.empty() || !std::all_of(v.begin(), v.end(), [](unsigned char c) { return std::isdigit(c); })) {
    throw InputError("config key '" + key + "': '" + v + "' is not a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw InputError("config key '" + key + "': '" + v + "' is out of range");
  }
}

}  // namespace

RunConfig::RunConfig() {
  for (const auto& k : config_keys()) values_[k.key] = k.default_value;
}

void RunConfig::set(const std::string& key, const std::string& value) {
  if (!known_key(key)) throw InputError("unknown config key '" + key + "'");
  values_[key] = value;
}

const std::string& RunConfig::str(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw InputError("unknown config key '" + key + "'");
  return it->second;
}

double RunConfig::real(const std::string& key) const { return parse_real(key, str(key)); }

std::size_t RunConfig::count(const std::string& key) const { return static_cast<std::size_t>(u64(key)); }

std::uint64_t RunConfig::u64(const std::string& key) const { return parse_u64(key, str(key)); }

bool RunConfig::flag(const std::string& key) const {
  const auto& v = str(key);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw InputError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<std::uint64_t> RunConfig::u64_list(const std::string& key) const {
  std::vector<std::uint64_t> out;
  std::stringstream ss(str(key));
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_u64(key, trim(item)));
  if (out.empty()) throw InputError("config key '" + key + "' needs at least one value");
  return out;
}

void apply_config_text(RunConfig& cfg, const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(ss, line)) {
    ++n;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw InputError("config line " + std::to_string(n) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (!known_key(key)) throw InputError("config line " + std::to_string(n) + ": unknown key '" + key + "'");
    cfg.set(key, trim(line.substr(eq + 1)));
  }
}

void apply_env(RunConfig& cfg, const EnvLookup& getenv) {
  if (!getenv) return;
  for (const auto& k : config_keys()) {
    std::string name = "GESTAUTH_";
    for (const char* c = k.key; *c; ++c) name += static_cast<char>(std::toupper(static_cast<unsigned char>(*c)));
    if (const char* v = getenv(name.c_str())) cfg.set(k.key, v);
  }
}

std::string config_to_json(const RunConfig& cfg, const std::string& command) {
  ordered_json j;
  j["command"] = command;
  for (const auto& [k, v] : cfg.values()) j[k] = v;
  return j.dump(2) + "\n";
}

namespace {

// ---------------------------------------------------------------------------
// Plumbing

template <class F>
void parallel_for(std::size_t n, std::size_t jobs, F&& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < std::min(jobs, n); ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw InputError("cannot open " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InputError("cannot write " + p.string());
  out << text;
}

std::string safe_name(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
  return out;
}

struct RunDir {
  fs::path root;
  bool plots = true;
  fs::path curves() const { return root / "curves"; }
  fs::path plot(const std::string& name) const { return root / "plots" / name; }
  fs::path checkpoint(const std::string& name) const { return root / "checkpoints" / name; }
};

RunDir open_run(const RunConfig& c, const std::string& command) {
  const fs::path parent = c.str("out").empty() ? fs::path(".") : fs::path(c.str("out"));
  RunDir r{parent / ("run-" + c.str("name")), c.flag("plots")};
  for (const char* sub : {"curves", "plots", "checkpoints"}) fs::create_directories(r.root / sub);
  write_text(r.root / "config.json", config_to_json(c, command));
  return r;
}

void write_metrics(const RunDir& r, const ordered_json& j) { write_text(r.root / "metrics.json", j.dump(2) + "\n"); }

ordered_json metrics_json(const eval::MetricsReport& m) {
  ordered_json j;
  j["auroc"] = m.auroc;
  j["eer_lower"] = m.eer.lower;
  j["eer_upper"] = m.eer.upper;
  j["far_at_zero"] = m.far_at_zero;
  j["n_genuine"] = m.n_genuine;
  j["n_impostor"] = m.n_impostor;
  return j;
}

ordered_json summary_json(const std::vector<eval::MetricsReport>& ms, bool use_median) {
  std::vector<double> a, lo, hi, f;
  for (const auto& m : ms) {
    a.push_back(m.auroc);
    lo.push_back(m.eer.lower);
    hi.push_back(m.eer.upper);
    f.push_back(m.far_at_zero);
  }
  auto agg = [&](const std::vector<double>& v) {
    if (use_median) return eval::median(v);
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  ordered_json j;
  j["auroc"] = agg(a);
  j["eer_lower"] = agg(lo);
  j["eer_upper"] = agg(hi);
  j["far_at_zero"] = agg(f);
  return j;
}

void write_roc(const RunDir& r, const std::string& stem, const eval::MetricsReport& m, const std::string& title) {
  std::ofstream csv(r.curves() / (stem + ".csv"));
  eval::write_roc_csv(csv, m.roc);
  if (r.plots) write_text(r.plot(stem + ".svg"), plot::roc_svg(m.roc, title));
}

void check_finite(const eval::MetricsReport& m, const std::string& what) {
  if (!std::isfinite(m.auroc) || !std::isfinite(m.eer.lower) || !std::isfinite(m.eer.upper) ||
      !std::isfinite(m.far_at_zero)) {
    throw NumericalError(what + ": non-finite metric");
  }
}

// ---------------------------------------------------------------------------
// Inputs

dataset::SplitOptions split_options(const RunConfig& c) {
  dataset::SplitOptions o;
  o.trainval_fraction = c.real("trainval_fraction");
  o.val_fraction = c.real("val_fraction");
  o.seed = c.u64("seed");
  return o;
}

struct Inputs {
  std::vector<dataset::Gesture> corpus;
  dataset::SplitSpec split;
};

Inputs load_inputs(const RunConfig& c) {
  const fs::path p = c.str("corpus");
  const bool dir = fs::is_directory(p);
  const fs::path file = dir ? p / "corpus.jsonl" : p;
  if (!fs::exists(file)) throw InputError("corpus not found: " + file.string());
  Inputs in;
  in.corpus = dataset::load_corpus(file);
  if (in.corpus.empty()) throw InputError("corpus is empty: " + file.string());
  if (!c.str("split").empty()) {
    in.split = dataset::split_from_json(read_text(c.str("split")));
  } else if (dir && fs::exists(p / "split.json")) {
    in.split = dataset::split_from_json(read_text(p / "split.json"));
  } else {
    in.split = dataset::temporal_split(in.corpus, split_options(c));
  }
  return in;
}

std::vector<dataset::Gesture> parts(const Inputs& in, std::initializer_list<dataset::Part> keep) {
  const dataset::SplitIndex index(in.split);
  std::vector<dataset::Gesture> out;
  for (const auto& g : in.corpus) {
    const auto p = index.part_of(g);
    if (std::find(keep.begin(), keep.end(), p) != keep.end()) out.push_back(g);
  }
  return out;
}

void write_corpus_dir(const fs::path& dir, const std::vector<dataset::Gesture>& corpus, const RunConfig& c) {
  const auto split = dataset::temporal_split(corpus, split_options(c));
  const dataset::SplitIndex index(split);
  std::vector<dataset::Gesture> train;
  for (const auto& g : corpus)
    if (g.is_gesture && index.part_of(g) == dataset::Part::train) train.push_back(g);
  if (train.empty()) throw InputError("no training gestures after splitting");
  fs::create_directories(dir);
  dataset::save_corpus(dir / "corpus.jsonl", corpus);
  write_text(dir / "split.json", dataset::split_to_json(split) + "\n");
  write_text(dir / "norm.json", dataset::norm_stats_to_json(dataset::fit_norm_stats(train)) + "\n");
  write_text(dir / "config.json", config_to_json(c, "corpus"));
}

generative::VaeConfig vae_config(const RunConfig& c) {
  auto v = generative::VaeConfig::defaults(generative::reg_kind_from_string(c.str("reg")));
  if (!c.str("beta").empty()) v.beta = c.real("beta");
  v.alpha = c.real("alpha");
  v.loss = distances::LossSpec::defaults(distances::loss_kind_from_string(c.str("loss")));
  if (!c.str("loss_base_weight").empty()) v.loss.base_weight = c.real("loss_base_weight");
  if (!c.str("loss_feature_weight").empty()) v.loss.feature_weight = c.real("loss_feature_weight");
  v.loss.gamma = c.real("loss_gamma");
  const auto& d = c.str("wae_distance");
  if (d == "euclidean") {
    v.wae_distance = generative::WaeDistance::euclidean;
  } else if (d == "squared") {
    v.wae_distance = generative::WaeDistance::squared;
  } else {
    throw InputError("unknown wae_distance '" + d + "'");
  }
  v.mrr_temperature = c.real("mrr_temperature");
  v.learning_rate = c.real("vae_lr");
  v.batch_size = c.count("vae_batch_size");
  v.max_epochs = c.count("vae_max_epochs");
  v.patience = c.count("vae_patience");
  v.beta_warmup_epochs = c.count("beta_warmup_epochs");
  v.nongesture_pretrain_epochs = c.count("nongesture_pretrain_epochs");
  generative::validate(v);
  return v;
}

generative::SampleStrategy sample_strategy(const RunConfig& c) {
  generative::SampleStrategy s;
  s.kind = generative::sample_kind_from_string(c.str("strategy"));
  s.mix_weight = c.real("mix_weight");
  s.mix_components = c.count("mix_components");
  generative::validate(s);
  return s;
}

void vae_plots(const RunDir& r, generative::VaeModel& model, const std::vector<Series>& xs,
               const std::vector<std::string>& users) {
  if (!r.plots || xs.empty()) return;
  std::vector<std::vector<double>> mus;
  for (const auto& e : generative::encode_all(model, xs)) mus.emplace_back(e.mu.begin(), e.mu.end());
  write_text(r.plot("latent.svg"), plot::scatter_svg(plot::pca2(mus), users, "Latent means (PCA)"));
  const auto recon = generative::decode(model, generative::encode(model, xs[0]).mu);
  write_text(r.plot("reconstruction.svg"), plot::overlay_svg(xs[0], recon, "Reconstruction of " + users[0]));
}

/// Loads the configured checkpoint, or trains an autoencoder on the train and
/// validation parts of the corpus without the excluded user.
std::unique_ptr<generative::VaeModel> obtain_vae(const RunConfig& c, const Inputs& in, const std::string& exclude,
                                                 const RunDir& r, std::ostream& out) {
  if (!c.str("vae").empty()) {
    auto model = generative::load_vae(c.str("vae"));
    if (!exclude.empty() && std::find(model->users.begin(), model->users.end(), exclude) != model->users.end()) {
      throw InputError("checkpoint was trained on held-out user '" + exclude + "'");
    }
    return model;
  }
  auto vcfg = vae_config(c);
  if (!exclude.empty()) vcfg.exclude_users.push_back(exclude);
  const auto pool = parts(in, {dataset::Part::train, dataset::Part::validation});
  dataset::NormStats norm;
  const auto data = generative::prepare_vae_data(pool, vcfg, c.real("vae_val_fraction"), c.u64("seed"), norm);
  const std::set<std::string> distinct(data.train_users.begin(), data.train_users.end());
  auto model = std::make_unique<generative::VaeModel>(distinct.size(), c.u64("seed"));
  model->norm = norm;
  const auto hist = generative::train_vae(*model, data, vcfg, c.u64("seed"));
  generative::save_vae(r.checkpoint("vae"), *model, vcfg);
  std::ofstream csv(r.curves() / "vae_training.csv");
  csv.precision(17);
  csv << "epoch,train_loss,val_loss\n";
  for (std::size_t e = 0; e < hist.train_loss.size(); ++e) {
    csv << e << ',' << hist.train_loss[e] << ',' << (e < hist.val_loss.size() ? hist.val_loss[e] : NAN) << '\n';
  }
  out << "autoencoder trained on " << data.train.size() << " gestures, best epoch " << hist.best_epoch << "\n";
  return model;
}

// ---------------------------------------------------------------------------
// Commands

void cmd_ingest(const RunConfig& c, std::ostream& out) {
  const fs::path raw = c.str("raw");
  if (raw.empty() || !fs::is_directory(raw)) throw InputError("ingest needs --raw <directory>");
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(raw))
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw InputError("no <user>.csv files in " + raw.string());
  const auto cutoff = c.real("filter_cutoff_hz");
  const auto order = static_cast<int>(c.count("filter_order"));
  std::vector<dataset::Gesture> corpus;
  for (const auto& f : files) {
    const auto user = f.stem().string();
    const auto manifest_path = raw / (user + ".json");
    if (!fs::exists(manifest_path)) throw InputError("missing manifest for user " + user + ": " + manifest_path.string());
    const auto manifest = dataset::read_manifest(manifest_path);
    for (auto& g : dataset::assemble_user(dataset::parse_user_file(f, manifest.user_id), manifest)) {
      corpus.push_back(dataset::lowpass_filter(g, cutoff, order));
    }
  }
  const fs::path dir = c.str("out").empty() ? fs::path("corpus") : fs::path(c.str("out"));
  write_corpus_dir(dir, corpus, c);
  const auto n = std::count_if(corpus.begin(), corpus.end(), [](const auto& g) { return g.is_gesture; });
  out << "ingested " << n << " gestures and " << corpus.size() - static_cast<std::size_t>(n) << " non-gestures from "
      << files.size() << " users into " << dir.string() << "\n";
}

void cmd_simulate(const RunConfig& c, std::ostream& out) {
  dataset::ProfileOptions po;
  po.user_spread = c.real("user_spread");
  po.noise_sigma = c.real("noise_sigma");
  const auto profiles = dataset::random_profiles(c.count("users"), c.u64("seed"), po);
  auto corpus = dataset::simulate_corpus(profiles, c.count("gestures_per_user"), c.count("nongestures"), c.u64("seed"));
  // Simulated windows go through the same low-pass stage as ingested ones.
  const auto cutoff = c.real("filter_cutoff_hz");
  const auto order = static_cast<int>(c.count("filter_order"));
  for (auto& g : corpus) g = dataset::lowpass_filter(g, cutoff, order);
  const fs::path dir = c.str("out").empty() ? fs::path("corpus") : fs::path(c.str("out"));
  write_corpus_dir(dir, corpus, c);
  out << "simulated " << corpus.size() << " windows for " << profiles.size() << " users into " << dir.string() << "\n";
}

void cmd_train_auth(const RunConfig& c, std::ostream& out) {
  const auto in = load_inputs(c);
  const auto r = open_run(c, "train-auth");
  const auto& arch_name = c.str("arch");
  const bool rf = arch_name == "rf";
  const auto arch = rf ? classifiers::Arch::mlp : classifiers::arch_from_string(arch_name);
  classifiers::TrainConfig tc;
  tc.learning_rate = c.real("lr");
  tc.pos_weight = c.real("pos_weight");
  tc.patience = c.count("patience");
  tc.max_epochs = c.count("max_epochs");
  tc.batch_size = c.count("batch_size");
  tc.seed = c.u64("seed");
  tc.limited_fraction = c.real("limited_fraction");
  classifiers::validate(tc);

  std::vector<std::string> targets;
  if (!c.str("target").empty()) {
    targets.push_back(c.str("target"));
  } else {
    for (const auto& u : dataset::user_ids(in.corpus)) {
      if (std::any_of(in.corpus.begin(), in.corpus.end(), [&](const auto& g) { return g.user_id == u && g.is_gesture; }))
        targets.push_back(u);
    }
  }
  std::vector<eval::MetricsReport> reports(targets.size());
  parallel_for(targets.size(), c.count("jobs"), [&](std::size_t i) {
    const auto& target = targets[i];
    const auto task = classifiers::prepare_auth_task(in.corpus, in.split, target, tc.limited_fraction);
    const auto stem = safe_name(target);
    std::vector<double> scores;
    if (rf) {
      std::vector<std::vector<double>> x, tx;
      std::vector<int> y;
      for (const auto* set : {&task.train, &task.validation}) {
        for (std::size_t k = 0; k < set->x.size(); ++k) {
          const auto f = features::extract_features(set->x[k]);
          x.emplace_back(f.values.begin(), f.values.end());
          y.push_back(set->y[k]);
        }
      }
      for (const auto& s : task.test.x) {
        const auto f = features::extract_features(s);
        tx.emplace_back(f.values.begin(), f.values.end());
      }
      classifiers::ForestSpec fs_spec;
      fs_spec.n_trees = c.count("n_trees");
      fs_spec.min_samples_leaf = c.count("min_samples_leaf");
      fs_spec.seed = c.u64("seed");
      const auto forest = classifiers::train_random_forest(fs_spec, x, y);
      write_text(r.checkpoint("rf_" + stem + ".json"), classifiers::forest_to_json(forest));
      scores = classifiers::rf_predict(forest, tx);
    } else {
      auto model = classifiers::build_architecture(arch, c.u64("seed"));
      const auto hist = classifiers::train_classifier(*model, task.train, task.validation, tc);
      std::ofstream csv(r.curves() / ("training_" + stem + ".csv"));
      csv.precision(17);
      csv << "epoch,train_loss,val_loss\n";
      for (std::size_t e = 0; e < hist.train_loss.size(); ++e) {
        csv << e << ',' << hist.train_loss[e] << ',' << hist.val_loss[e] << '\n';
      }
      ordered_json extra;
      extra["target"] = target;
      extra["norm"] = ordered_json::parse(dataset::norm_stats_to_json(task.norm));
      extra["best_epoch"] = hist.best_epoch;
      nn::save_checkpoint(r.checkpoint(arch_name + "_" + stem), *model, classifiers::to_string(arch), extra.dump());
      scores = classifiers::predict_proba(*model, task.test.x);
    }
    eval::ScoreSet s;
    s.scores = scores;
    for (int y : task.test.y) s.labels.push_back(y == 1);
    reports[i] = eval::compute_metrics(s);
    check_finite(reports[i], "user " + target);
    std::ofstream sc(r.curves() / ("scores_" + stem + ".csv"));
    eval::write_score_csv(sc, s);
    write_roc(r, "roc_" + stem, reports[i], arch_name + " ROC, user " + target);
  });
  ordered_json j;
  j["arch"] = arch_name;
  j["users"] = ordered_json::object();
  for (std::size_t i = 0; i < targets.size(); ++i) {
    j["users"][targets[i]] = metrics_json(reports[i]);
    out << targets[i] << ": auroc " << reports[i].auroc << ", eer [" << reports[i].eer.lower << ", "
        << reports[i].eer.upper << "], far@0 " << reports[i].far_at_zero << "\n";
  }
  j["mean"] = summary_json(reports, false);
  write_metrics(r, j);
  out << "report written to " << r.root.string() << "\n";
}

void cmd_train_vae(const RunConfig& c, std::ostream& out) {
  const auto in = load_inputs(c);
  const auto r = open_run(c, "train-vae");
  auto vcfg = vae_config(c);
  if (!c.str("holdout").empty()) vcfg.exclude_users.push_back(c.str("holdout"));
  const auto pool = parts(in, {dataset::Part::train, dataset::Part::validation});
  dataset::NormStats norm;
  const auto data = generative::prepare_vae_data(pool, vcfg, c.real("vae_val_fraction"), c.u64("seed"), norm);
  const std::set<std::string> distinct(data.train_users.begin(), data.train_users.end());
  generative::VaeModel model(distinct.size(), c.u64("seed"));
  model.norm = norm;
  const auto hist = generative::train_vae(model, data, vcfg, c.u64("seed"), [&](std::size_t e, double tl, double vl) {
    if (e % 50 == 0) out << "epoch " << e << ": train " << tl << ", validation " << vl << "\n";
  });
  generative::save_vae(r.checkpoint("vae"), model, vcfg);
  {
    std::ofstream csv(r.curves() / "vae_training.csv");
    csv.precision(17);
    csv << "epoch,train_loss,val_loss,val_recon,val_mrr\n";
    for (std::size_t e = 0; e < hist.train_loss.size(); ++e) {
      auto at = [&](const std::vector<double>& v) { return e < v.size() ? v[e] : NAN; };
      csv << e << ',' << hist.train_loss[e] << ',' << at(hist.val_loss) << ',' << at(hist.val_recon) << ','
          << at(hist.val_mrr) << '\n';
    }
  }
  ordered_json j;
  j["best_epoch"] = hist.best_epoch;
  j["stopped_early"] = hist.stopped_early;
  j["epochs"] = hist.train_loss.size();
  if (!hist.val_loss.empty()) {
    j["val_loss"] = hist.val_loss[hist.best_epoch];
    j["val_recon"] = hist.val_recon[hist.best_epoch];
    j["val_mrr"] = hist.val_mrr[hist.best_epoch];
  }
  j["n_train"] = data.train.size();
  j["n_validation"] = data.validation.size();
  j["users"] = model.users;
  write_metrics(r, j);
  vae_plots(r, model, data.validation.empty() ? data.train : data.validation,
            data.validation.empty() ? data.train_users : data.validation_users);
  out << "autoencoder written to " << r.checkpoint("vae").string() << "\n";
}

void cmd_generate(const RunConfig& c, std::ostream& out) {
  if (c.str("vae").empty()) throw InputError("generate needs --vae <checkpoint stem>");
  if (c.str("target").empty()) throw InputError("generate needs --target <user>");
  const auto in = load_inputs(c);
  const auto r = open_run(c, "generate");
  auto model = generative::load_vae(c.str("vae"));
  const auto& target = c.str("target");
  std::vector<Series> targets;
  std::vector<Series> others;
  for (const auto& g : parts(in, {dataset::Part::train})) {
    if (!g.is_gesture) continue;
    (g.user_id == target ? targets : others).push_back(dataset::apply_norm(g.series, model->norm));
  }
  if (targets.empty()) throw InputError("target user '" + target + "' has no training gestures");
  const auto other_embs = generative::encode_all(*model, others);
  auto synth = generative::generate_synthetic(*model, sample_strategy(c), targets, other_embs, c.count("n_synthetic"),
                                              c.u64("seed"), target);
  for (auto& g : synth) g.series = dataset::invert_norm(g.series, model->norm);
  dataset::save_corpus(r.root / "synthetic.jsonl", synth);
  ordered_json j;
  j["target"] = target;
  j["strategy"] = c.str("strategy");
  j["n_synthetic"] = synth.size();
  j["n_targets"] = targets.size();
  write_metrics(r, j);
  if (r.plots && !synth.empty()) {
    write_text(r.plot("synthetic.svg"),
               plot::overlay_svg(dataset::invert_norm(targets[0], model->norm), synth[0].series,
                                 "Enrolment gesture vs synthetic sample, " + target));
  }
  out << "wrote " << synth.size() << " synthetic gestures to " << (r.root / "synthetic.jsonl").string() << "\n";
}

void cmd_evaluate(const RunConfig& c, std::ostream& out) {
  if (c.str("scores").empty()) throw InputError("evaluate needs --scores <csv>");
  std::ifstream f(c.str("scores"));
  if (!f) throw InputError("cannot open " + c.str("scores"));
  const auto s = eval::read_score_csv(f);
  const auto r = open_run(c, "evaluate");
  const auto m = eval::compute_metrics(s);
  check_finite(m, "evaluate");
  write_metrics(r, metrics_json(m));
  write_roc(r, "roc", m, "ROC");
  out << "auroc " << m.auroc << ", eer [" << m.eer.lower << ", " << m.eer.upper << "], far@0 " << m.far_at_zero
      << "\n";
}

eval::AuthTstrConfig auth_config(const RunConfig& c) {
  eval::AuthTstrConfig a;
  a.use_synthetic = c.str("strategy") != "none";
  if (a.use_synthetic) a.strategy = sample_strategy(c);
  a.n_synthetic = c.count("n_synthetic");
  a.per_terminal = c.count("per_terminal");
  a.terminals = c.count("terminals");
  a.n_trees = c.count("n_trees");
  a.real_negatives = c.flag("real_negatives");
  return a;
}

ordered_json seed_table(const std::vector<std::uint64_t>& seeds, const std::vector<eval::MetricsReport>& ms) {
  ordered_json j;
  j["seeds"] = ordered_json::array();
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    auto row = metrics_json(ms[i]);
    row["seed"] = seeds[i];
    j["seeds"].push_back(row);
  }
  j["median"] = summary_json(ms, true);
  return j;
}

void cmd_tstr(const RunConfig& c, std::ostream& out) {
  const auto& mode = c.str("mode");
  if (mode != "auth" && mode != "intent") throw InputError("tstr mode must be 'auth' or 'intent'");
  const auto& holdout = c.str("holdout");
  if (mode == "auth" && holdout.empty()) throw InputError("tstr --mode auth needs --holdout <user>");
  const auto in = load_inputs(c);
  const auto r = open_run(c, "tstr");
  auto model = obtain_vae(c, in, mode == "auth" ? holdout : "", r, out);
  const auto seeds = c.u64_list("seeds");
  ordered_json j;
  j["mode"] = mode;

  auto record = [&](const std::string& label, const std::vector<eval::MetricsReport>& ms) {
    for (std::size_t i = 0; i < seeds.size(); ++i) check_finite(ms[i], label);
    j["runs"][label] = seed_table(seeds, ms);
    write_roc(r, "roc_" + label, ms[0], label + " (seed " + std::to_string(seeds[0]) + ")");
    const auto med = j["runs"][label]["median"];
    out << label << ": median auroc " << med["auroc"].get<double>() << ", eer upper "
        << med["eer_upper"].get<double>() << ", far@0 " << med["far_at_zero"].get<double>() << "\n";
  };

  if (mode == "intent") {
    const dataset::SplitIndex index(in.split);
    eval::IntentData data;
    for (const auto& g : in.corpus) {
      const auto p = index.part_of(g);
      const auto s = dataset::apply_norm(g.series, model->norm);
      if (p == dataset::Part::train) {
        (g.is_gesture ? data.train_gestures : data.train_nongestures).push_back(s);
      } else if (p == dataset::Part::test) {
        (g.is_gesture ? data.test_gestures : data.test_nongestures).push_back(s);
      }
    }
    for (bool recon : {true, false}) {
      eval::IntentConfig ic;
      ic.n_synthetic = c.count("intent_synthetic");
      ic.n_trees = c.count("n_trees");
      ic.use_reconstruction = recon;
      std::vector<eval::MetricsReport> ms(seeds.size());
      parallel_for(seeds.size(), c.count("jobs"),
                   [&](std::size_t i) { ms[i] = eval::tstr_intent(model.get(), data, ic, seeds[i]); });
      record(recon ? "reconstruction" : "no_reconstruction", ms);
    }
  } else {
    j["holdout"] = holdout;
    const auto ctx = eval::prepare_auth_context(*model, in.corpus, in.split, holdout);
    auto cfg = auth_config(c);
    std::vector<std::pair<std::string, eval::AuthTstrConfig>> runs{{c.str("strategy"), cfg}};
    if (cfg.use_synthetic) {
      auto base = cfg;
      base.use_synthetic = false;
      runs.emplace_back("none", base);
    }
    for (const auto& [label, rc] : runs) {
      std::vector<eval::MetricsReport> ms(seeds.size());
      parallel_for(seeds.size(), c.count("jobs"),
                   [&](std::size_t i) { ms[i] = eval::tstr_auth(*model, ctx, rc, seeds[i]); });
      record(label, ms);
    }
  }
  write_metrics(r, j);
  out << "report written to " << r.root.string() << "\n";
}

void cmd_sweep(const RunConfig& c, std::ostream& out) {
  const auto& holdout = c.str("holdout");
  if (holdout.empty()) throw InputError("sweep needs --holdout <user>");
  const auto in = load_inputs(c);
  const auto r = open_run(c, "sweep");
  auto model = obtain_vae(c, in, holdout, r, out);
  const auto ctx = eval::prepare_auth_context(*model, in.corpus, in.split, holdout);
  auto cfg = auth_config(c);
  if (!cfg.use_synthetic) throw InputError("sweep compares against synthetic data; choose a strategy other than none");
  std::vector<std::size_t> counts;
  for (auto v : c.u64_list("counts")) counts.push_back(static_cast<std::size_t>(v));
  const auto seeds = c.u64_list("seeds");
  std::vector<std::vector<eval::SweepRow>> per_seed(seeds.size());
  parallel_for(seeds.size(), c.count("jobs"),
               [&](std::size_t i) { per_seed[i] = eval::enrolment_sweep(*model, ctx, counts, cfg, {seeds[i]}); });
  std::vector<eval::SweepRow> rows;
  for (const auto& v : per_seed) rows.insert(rows.end(), v.begin(), v.end());
  std::stable_sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) {
    return std::tie(a.per_terminal, a.synthetic) < std::tie(b.per_terminal, b.synthetic);
  });
  {
    std::ofstream csv(r.curves() / "sweep.csv");
    eval::write_sweep_csv(csv, rows);
  }
  ordered_json j;
  j["holdout"] = holdout;
  j["strategy"] = c.str("strategy");
  j["medians"] = ordered_json::array();
  std::vector<double> xs;
  std::array<std::vector<double>, 2> auroc, eer, far0;
  std::ofstream med(r.curves() / "sweep_median.csv");
  med.precision(17);
  med << "per_terminal,synthetic,auroc,eer_upper,far_at_zero\n";
  for (auto count : counts) {
    xs.push_back(static_cast<double>(count));
    for (int syn = 0; syn < 2; ++syn) {
      std::vector<double> a, e, f;
      for (const auto& row : rows) {
        if (row.per_terminal != count || row.synthetic != (syn == 1)) continue;
        a.push_back(row.auroc);
        e.push_back(row.eer_upper);
        f.push_back(row.far_at_zero);
      }
      auroc[syn].push_back(eval::median(a));
      eer[syn].push_back(eval::median(e));
      far0[syn].push_back(eval::median(f));
      med << count << ',' << syn << ',' << auroc[syn].back() << ',' << eer[syn].back() << ',' << far0[syn].back()
          << '\n';
      j["medians"].push_back({{"per_terminal", count},
                              {"synthetic", syn == 1},
                              {"auroc", auroc[syn].back()},
                              {"eer_upper", eer[syn].back()},
                              {"far_at_zero", far0[syn].back()}});
      out << count << " per terminal" << (syn ? " + synthetic" : "") << ": auroc " << auroc[syn].back()
          << ", eer upper " << eer[syn].back() << ", far@0 " << far0[syn].back() << "\n";
    }
  }
  write_metrics(r, j);
  if (r.plots) {
    auto lines = [&](const std::array<std::vector<double>, 2>& v) {
      return std::vector<plot::NamedLine>{{"real only", v[0]}, {"real + synthetic", v[1]}};
    };
    write_text(r.plot("sweep_auroc.svg"), plot::line_svg(xs, lines(auroc), "AUROC vs gestures per terminal"));
    write_text(r.plot("sweep_eer_upper.svg"), plot::line_svg(xs, lines(eer), "EER upper bound vs gestures per terminal"));
    write_text(r.plot("sweep_far_at_zero.svg"), plot::line_svg(xs, lines(far0), "FAR@0 vs gestures per terminal"));
  }
  out << "report written to " << r.root.string() << "\n";
}

void cmd_loss(const RunConfig& c, std::ostream& out) {
  if (c.str("a").empty() || c.str("b").empty()) throw InputError("loss needs --a and --b gesture keys (user/gesture)");
  const auto in = load_inputs(c);
  const dataset::Gesture* a = nullptr;
  const dataset::Gesture* b = nullptr;
  for (const auto& g : in.corpus) {
    const auto key = dataset::gesture_key(g);
    if (key == c.str("a")) a = &g;
    if (key == c.str("b")) b = &g;
  }
  if (!a) throw InputError("gesture '" + c.str("a") + "' not in corpus");
  if (!b) throw InputError("gesture '" + c.str("b") + "' not in corpus");
  const auto spec = vae_config(c).loss;
  const auto res = distances::combined_loss(spec, a->series, b->series);
  if (!std::isfinite(res.value)) throw NumericalError("loss is not finite");
  ordered_json j;
  j["loss"] = distances::to_string(spec.kind);
  j["base_weight"] = spec.base_weight;
  j["feature_weight"] = spec.feature_weight;
  j["a"] = c.str("a");
  j["b"] = c.str("b");
  j["value"] = res.value;
  out << j.dump(2) << "\n";
}

using Command = void (*)(const RunConfig&, std::ostream&);

struct CommandInfo {
  const char* name;
  const char* help;
  Command fn;
};

const std::vector<CommandInfo>& commands() {
  static const std::vector<CommandInfo> cmds{
      {"ingest", "window, filter and split raw sensor files into a corpus", cmd_ingest},
      {"simulate", "write a simulated multi-user corpus", cmd_simulate},
      {"train-auth", "train per-user authentication classifiers and report test metrics", cmd_train_auth},
      {"train-vae", "train the gesture autoencoder", cmd_train_vae},
      {"generate", "sample synthetic gestures for a user", cmd_generate},
      {"evaluate", "compute metrics for a score CSV", cmd_evaluate},
      {"tstr", "train-synthetic test-real experiments (auth or intent)", cmd_tstr},
      {"sweep", "enrolment-size sweep with and without synthetic data", cmd_sweep},
      {"loss", "evaluate a reconstruction loss between two corpus gestures", cmd_loss},
  };
  return cmds;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const EnvLookup& getenv) {
  CLI::App app{"Smartwatch payment-gesture authentication toolkit", "gestauth"};
  app.require_subcommand(1);
  std::string config_file;
  std::map<std::string, std::string> flag_values;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;
  for (const auto& cmd : commands()) {
    auto* sub = app.add_subcommand(cmd.name, cmd.help);
    sub->add_option("--config", config_file, "key = value configuration file");
    for (const auto& k : config_keys()) {
      std::string key = k.key;
      std::string names = "--" + key;
      if (key.find('_') != std::string::npos) {
        std::string dashed = key;
        std::replace(dashed.begin(), dashed.end(), '_', '-');
        names = "--" + dashed + ",--" + key;
      }
      auto* opt = sub->add_option(names, flag_values[key], std::string(k.help) + " [" + k.default_value + "]");
      options[cmd.name].emplace_back(key, opt);
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitInput;
  }
  const auto* chosen = app.get_subcommands().front();
  const auto name = chosen->get_name();
  try {
    RunConfig cfg;
    if (!config_file.empty()) apply_config_text(cfg, read_text(config_file));
    apply_env(cfg, getenv);
    for (const auto& [key, opt] : options[name])
      if (opt->count() > 0) cfg.set(key, flag_values[key]);
    for (const auto& cmd : commands())
      if (name == cmd.name) cmd.fn(cfg, out);
    return kExitOk;
  } catch (const NumericalError& e) {
    err << "gestauth " << name << ": numerical error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InputError& e) {
    err << "gestauth " << name << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const fs::filesystem_error& e) {
    err << "gestauth " << name << ": " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "gestauth " << name << ": error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

int run(int argc, const char* const* argv) {
  return run(argc, argv, std::cout, std::cerr, [](const char* n) -> const char* { return std::getenv(n); });
}

}  // namespace gestauth::cli
