#include "gestauth/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_map>

#include <json.hpp>

#include "gestauth/error.hpp"

namespace gestauth::dataset {

using nlohmann::json;

std::string gesture_key(const Gesture& g) { return g.user_id + "/" + g.gesture_id; }

void validate_gesture(const Gesture& g) {
  if (g.series.rows() != kTimesteps || g.series.cols() != kChannels) {
    throw InputError("gesture " + gesture_key(g) + " is not 200x6");
  }
  if (!g.series.all_finite()) throw InputError("gesture " + gesture_key(g) + " has non-finite values");
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* name) {
  T value{};
  const char* first = field.data();
  const char* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw ParseError(line, std::string("invalid ") + name + " '" + std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::vector<RawRecord> parse_user_csv(std::istream& in, const std::string& user_id) {
  std::vector<RawRecord> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      if (line != "gesture_id,sensor,t_ms,x,y,z") {
        throw ParseError(line_no, "expected header 'gesture_id,sensor,t_ms,x,y,z'");
      }
      header_seen = true;
      continue;
    }
    auto fields = split_fields(line);
    if (fields.size() != 6) {
      throw ParseError(line_no, "expected 6 fields, found " + std::to_string(fields.size()));
    }
    RawRecord r;
    r.user_id = user_id;
    r.gesture_id = std::string(fields[0]);
    if (r.gesture_id.empty()) throw ParseError(line_no, "empty gesture_id");
    if (fields[1] == "acc") {
      r.sensor = Sensor::accelerometer;
    } else if (fields[1] == "gyr") {
      r.sensor = Sensor::gyroscope;
    } else {
      throw ParseError(line_no, "rejected record: unknown sensor tag '" + std::string(fields[1]) + "'");
    }
    r.t_ms = parse_number<std::int64_t>(fields[2], line_no, "t_ms");
    if (r.t_ms < 0) throw ParseError(line_no, "negative t_ms");
    r.x = parse_number<double>(fields[3], line_no, "x");
    r.y = parse_number<double>(fields[4], line_no, "y");
    r.z = parse_number<double>(fields[5], line_no, "z");
    if (!std::isfinite(r.x) || !std::isfinite(r.y) || !std::isfinite(r.z)) {
      throw ParseError(line_no, "non-finite sensor value");
    }
    out.push_back(std::move(r));
  }
  if (!header_seen) throw ParseError(line_no, "missing header");
  return out;
}

std::vector<RawRecord> parse_user_file(const std::filesystem::path& path, const std::string& user_id) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path.string());
  return parse_user_csv(in, user_id);
}

Manifest parse_manifest(std::istream& in) {
  json j;
  try {
    in >> j;
    Manifest m;
    m.user_id = j.at("user_id").get<std::string>();
    for (const auto& e : j.at("gestures")) {
      ManifestEntry entry;
      entry.gesture_id = e.at("gesture_id").get<std::string>();
      entry.is_gesture = e.value("is_gesture", true);
      if (e.contains("nfc_t_ms") && !e["nfc_t_ms"].is_null()) entry.nfc_t_ms = e["nfc_t_ms"].get<std::int64_t>();
      if (e.contains("terminal") && !e["terminal"].is_null()) entry.terminal = e["terminal"].get<int>();
      if (entry.is_gesture && !entry.nfc_t_ms) {
        throw InputError("manifest gesture " + entry.gesture_id + " lacks nfc_t_ms");
      }
      if (entry.terminal && (*entry.terminal < 1 || *entry.terminal > 7)) {
        throw InputError("manifest gesture " + entry.gesture_id + " has terminal outside 1..7");
      }
      m.gestures.push_back(std::move(entry));
    }
    return m;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed manifest: ") + e.what());
  }
}

Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open manifest " + path.string());
  return parse_manifest(in);
}

// ---------------------------------------------------------------------------
// Alignment

namespace {

struct Sample {
  std::int64_t t;
  std::array<double, 3> v;
};

std::vector<Sample> sensor_samples(const std::vector<RawRecord>& records, Sensor s) {
  std::vector<Sample> out;
  for (const auto& r : records) {
    if (r.sensor == s) out.push_back({r.t_ms, {r.x, r.y, r.z}});
  }
  std::stable_sort(out.begin(), out.end(), [](const Sample& a, const Sample& b) { return a.t < b.t; });
  return out;
}

const char* sensor_name(Sensor s) { return s == Sensor::accelerometer ? "accelerometer" : "gyroscope"; }

// Fills channels [offset, offset+3) of `out` with the resampled sensor.
void resample_into(const std::vector<Sample>& samples, Sensor sensor, std::int64_t start_ms,
                   std::int64_t end_ms, const WindowOptions& opts, Series& out, std::size_t offset) {
  if (samples.empty()) throw InputError(std::string("insufficient coverage: no ") + sensor_name(sensor) + " samples");
  if (samples.front().t - start_ms > opts.max_gap_ms || end_ms - samples.back().t > opts.max_gap_ms) {
    throw InputError(std::string("insufficient coverage: ") + sensor_name(sensor) +
                     " does not span the window");
  }
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto a = samples[i - 1].t;
    const auto b = samples[i].t;
    if (b > start_ms && a < end_ms && b - a > opts.max_gap_ms) {
      throw InputError(std::string("insufficient coverage: ") + sensor_name(sensor) + " gap of " +
                       std::to_string(b - a) + " ms");
    }
  }
  std::size_t hi = 0;
  for (std::size_t k = 0; k < opts.timesteps; ++k) {
    const auto t = start_ms + static_cast<std::int64_t>(k) * opts.period_ms;
    while (hi < samples.size() && samples[hi].t < t) ++hi;
    std::array<double, 3> v{};
    if (hi == 0) {
      v = samples.front().v;
    } else if (hi == samples.size()) {
      v = samples.back().v;
    } else {
      const auto& a = samples[hi - 1];
      const auto& b = samples[hi];
      if (b.t == a.t) {
        v = b.v;
      } else {
        const double w = static_cast<double>(t - a.t) / static_cast<double>(b.t - a.t);
        for (int c = 0; c < 3; ++c) v[c] = a.v[c] + w * (b.v[c] - a.v[c]);
      }
    }
    for (std::size_t c = 0; c < 3; ++c) out(k, offset + c) = v[c];
  }
}

}  // namespace

Gesture align_and_window(const std::vector<RawRecord>& records, std::int64_t nfc_t_ms,
                         const WindowOptions& opts) {
  if (records.empty()) throw InputError("no records to window");
  Gesture g;
  g.user_id = records.front().user_id;
  g.gesture_id = records.front().gesture_id;
  g.nfc_t_ms = nfc_t_ms;
  g.timestamp_ms = nfc_t_ms;
  g.series = Series(opts.timesteps, kChannels);
  const std::int64_t start = nfc_t_ms - static_cast<std::int64_t>(opts.timesteps - 1) * opts.period_ms;
  resample_into(sensor_samples(records, Sensor::accelerometer), Sensor::accelerometer, start, nfc_t_ms,
                opts, g.series, 0);
  resample_into(sensor_samples(records, Sensor::gyroscope), Sensor::gyroscope, start, nfc_t_ms, opts,
                g.series, 3);
  return g;
}

std::vector<Gesture> window_nongesture(const std::vector<RawRecord>& records, const WindowOptions& opts) {
  std::vector<Gesture> out;
  if (records.empty()) return out;
  auto acc = sensor_samples(records, Sensor::accelerometer);
  auto gyr = sensor_samples(records, Sensor::gyroscope);
  if (acc.empty() || gyr.empty()) return out;
  const auto first = std::max(acc.front().t, gyr.front().t);
  const auto last = std::min(acc.back().t, gyr.back().t);
  const auto span = static_cast<std::int64_t>(opts.timesteps) * opts.period_ms;
  for (std::int64_t k = 0;; ++k) {
    const auto end = first + k * span + span - opts.period_ms;
    if (end > last) break;
    Gesture g;
    g.user_id = records.front().user_id;
    g.gesture_id = records.front().gesture_id + "#" + std::to_string(k);
    g.is_gesture = false;
    g.timestamp_ms = end;
    g.series = Series(opts.timesteps, kChannels);
    try {
      resample_into(acc, Sensor::accelerometer, end - span + opts.period_ms, end, opts, g.series, 0);
      resample_into(gyr, Sensor::gyroscope, end - span + opts.period_ms, end, opts, g.series, 3);
    } catch (const InputError&) {
      continue;  // windows straddling a recording gap are dropped
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<Gesture> assemble_user(const std::vector<RawRecord>& records, const Manifest& manifest,
                                   const WindowOptions& opts) {
  std::map<std::string, std::vector<RawRecord>> by_id;
  for (const auto& r : records) by_id[r.gesture_id].push_back(r);
  std::vector<Gesture> out;
  std::map<std::string, bool> used;
  for (const auto& entry : manifest.gestures) {
    auto it = by_id.find(entry.gesture_id);
    if (it == by_id.end()) {
      throw InputError("manifest gesture " + entry.gesture_id + " has no sensor records");
    }
    used[entry.gesture_id] = true;
    if (entry.is_gesture) {
      Gesture g = align_and_window(it->second, *entry.nfc_t_ms, opts);
      g.user_id = manifest.user_id;
      g.terminal = entry.terminal;
      out.push_back(std::move(g));
    } else {
      for (auto& g : window_nongesture(it->second, opts)) {
        g.user_id = manifest.user_id;
        out.push_back(std::move(g));
      }
    }
  }
  for (const auto& [id, recs] : by_id) {
    if (!used.count(id)) throw InputError("gesture " + id + " is not listed in the manifest");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalisation

NormStats fit_norm_stats(const std::vector<Gesture>& train) {
  if (train.empty()) throw InputError("cannot fit normalisation on an empty corpus");
  NormStats s;
  std::array<double, kChannels> sum{};
  std::size_t n = 0;
  for (const auto& g : train) {
    for (std::size_t t = 0; t < g.series.rows(); ++t)
      for (std::size_t c = 0; c < kChannels; ++c) sum[c] += g.series(t, c);
    n += g.series.rows();
  }
  for (std::size_t c = 0; c < kChannels; ++c) s.mean[c] = sum[c] / static_cast<double>(n);
  std::array<double, kChannels> ss{};
  for (const auto& g : train) {
    for (std::size_t t = 0; t < g.series.rows(); ++t)
      for (std::size_t c = 0; c < kChannels; ++c) {
        const double d = g.series(t, c) - s.mean[c];
        ss[c] += d * d;
      }
  }
  for (std::size_t c = 0; c < kChannels; ++c) {
    s.std[c] = std::sqrt(ss[c] / static_cast<double>(n));
    if (!(s.std[c] > 1e-12 * std::max(1.0, std::abs(s.mean[c])))) {
      throw InputError("degenerate corpus: channel " + std::to_string(c) + " has zero variance");
    }
  }
  return s;
}

Series apply_norm(const Series& s, const NormStats& stats) {
  Series out = s;
  for (std::size_t t = 0; t < s.rows(); ++t)
    for (std::size_t c = 0; c < s.cols(); ++c) out(t, c) = (s(t, c) - stats.mean[c]) / stats.std[c];
  return out;
}

Gesture apply_norm(const Gesture& g, const NormStats& stats) {
  Gesture out = g;
  out.series = apply_norm(g.series, stats);
  return out;
}

Series invert_norm(const Series& s, const NormStats& stats) {
  Series out = s;
  for (std::size_t t = 0; t < s.rows(); ++t)
    for (std::size_t c = 0; c < s.cols(); ++c) out(t, c) = s(t, c) * stats.std[c] + stats.mean[c];
  return out;
}

// ---------------------------------------------------------------------------
// Splitting

SplitSpec temporal_split(const std::vector<Gesture>& corpus, const SplitOptions& opts) {
  if (!(opts.trainval_fraction > 0.0 && opts.trainval_fraction <= 1.0) ||
      !(opts.val_fraction >= 0.0 && opts.val_fraction < 1.0)) {
    throw InputError("split fractions out of range");
  }
  // Ordered map keeps the group iteration (and so the RNG stream) stable.
  std::map<std::pair<std::string, bool>, std::vector<const Gesture*>> groups;
  for (const auto& g : corpus) groups[{g.user_id, g.is_gesture}].push_back(&g);

  SplitSpec spec;
  spec.seed = opts.seed;
  std::mt19937_64 rng(opts.seed);
  for (auto& [key, members] : groups) {
    const auto& [user, is_gesture] = key;
    if (is_gesture && members.size() < 3) {
      throw InputError("user " + user + " has fewer than 3 gestures");
    }
    std::stable_sort(members.begin(), members.end(),
                     [](const Gesture* a, const Gesture* b) { return a->timestamp_ms < b->timestamp_ms; });
    const std::size_t n = members.size();
    const auto n_trval = static_cast<std::size_t>(std::floor(opts.trainval_fraction * n + 1e-9));
    std::size_t n_val = static_cast<std::size_t>(std::floor(opts.val_fraction * n_trval + 1e-9));
    if (opts.val_fraction > 0.0 && n_val == 0 && n_trval >= 2) n_val = 1;

    std::vector<std::size_t> idx(n_trval);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    std::vector<bool> is_val(n_trval, false);
    for (std::size_t i = 0; i < n_val; ++i) is_val[idx[i]] = true;
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = gesture_key(*members[i]);
      if (i >= n_trval) {
        spec.test.push_back(k);
      } else if (is_val[i]) {
        spec.validation.push_back(k);
      } else {
        spec.train.push_back(k);
      }
    }
  }
  return spec;
}

SplitIndex::SplitIndex(const SplitSpec& spec) {
  for (const auto& k : spec.train) sorted_.emplace_back(k, Part::train);
  for (const auto& k : spec.validation) sorted_.emplace_back(k, Part::validation);
  for (const auto& k : spec.test) sorted_.emplace_back(k, Part::test);
  std::sort(sorted_.begin(), sorted_.end());
}

Part SplitIndex::part_of(const Gesture& g) const {
  const auto key = gesture_key(g);
  auto it = std::lower_bound(sorted_.begin(), sorted_.end(), key,
                             [](const auto& e, const std::string& k) { return e.first < k; });
  if (it == sorted_.end() || it->first != key) return Part::none;
  return it->second;
}

std::vector<Gesture> SplitIndex::select(const std::vector<Gesture>& corpus, Part p) const {
  std::vector<Gesture> out;
  for (const auto& g : corpus) {
    if (part_of(g) == p) out.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialisation

namespace {

json gesture_to_json(const Gesture& g) {
  json j;
  j["user_id"] = g.user_id;
  j["gesture_id"] = g.gesture_id;
  j["terminal"] = g.terminal ? json(*g.terminal) : json(nullptr);
  j["is_gesture"] = g.is_gesture;
  if (g.nfc_t_ms) j["nfc_t_ms"] = *g.nfc_t_ms;
  j["timestamp_ms"] = g.timestamp_ms;
  if (g.synthetic) {
    j["synthetic"] = true;
    j["strategy"] = g.strategy;
  }
  json rows = json::array();
  for (std::size_t t = 0; t < g.series.rows(); ++t) {
    json row = json::array();
    for (std::size_t c = 0; c < g.series.cols(); ++c) row.push_back(g.series(t, c));
    rows.push_back(std::move(row));
  }
  j["series"] = std::move(rows);
  return j;
}

Gesture gesture_from_json(const json& j) {
  Gesture g;
  g.user_id = j.at("user_id").get<std::string>();
  g.gesture_id = j.at("gesture_id").get<std::string>();
  if (j.contains("terminal") && !j["terminal"].is_null()) g.terminal = j["terminal"].get<int>();
  g.is_gesture = j.value("is_gesture", true);
  if (j.contains("nfc_t_ms") && !j["nfc_t_ms"].is_null()) g.nfc_t_ms = j["nfc_t_ms"].get<std::int64_t>();
  g.timestamp_ms = j.value("timestamp_ms", g.nfc_t_ms.value_or(0));
  g.synthetic = j.value("synthetic", false);
  g.strategy = j.value("strategy", std::string());
  const auto& rows = j.at("series");
  g.series = Series(rows.size(), rows.empty() ? 0 : rows[0].size());
  for (std::size_t t = 0; t < rows.size(); ++t) {
    if (rows[t].size() != g.series.cols()) throw InputError("ragged series in " + gesture_key(g));
    for (std::size_t c = 0; c < rows[t].size(); ++c) g.series(t, c) = rows[t][c].get<double>();
  }
  validate_gesture(g);
  return g;
}

}  // namespace

void write_corpus_jsonl(std::ostream& out, const std::vector<Gesture>& corpus) {
  for (const auto& g : corpus) out << gesture_to_json(g).dump() << '\n';
}

std::vector<Gesture> read_corpus_jsonl(std::istream& in) {
  std::vector<Gesture> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(gesture_from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw ParseError(line_no, e.what());
    }
  }
  return out;
}

void save_corpus(const std::filesystem::path& path, const std::vector<Gesture>& corpus) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path.string());
  write_corpus_jsonl(out, corpus);
}

std::vector<Gesture> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open corpus " + path.string());
  return read_corpus_jsonl(in);
}

std::string norm_stats_to_json(const NormStats& s) {
  json j;
  j["mean"] = s.mean;
  j["std"] = s.std;
  return j.dump(2);
}

NormStats norm_stats_from_json(const std::string& text) {
  try {
    auto j = json::parse(text);
    NormStats s;
    s.mean = j.at("mean").get<std::array<double, kChannels>>();
    s.std = j.at("std").get<std::array<double, kChannels>>();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed norm stats: ") + e.what());
  }
}

std::string split_to_json(const SplitSpec& s) {
  json j;
  j["seed"] = s.seed;
  j["train"] = s.train;
  j["validation"] = s.validation;
  j["test"] = s.test;
  return j.dump(2);
}

SplitSpec split_from_json(const std::string& text) {
  try {
    auto j = json::parse(text);
    SplitSpec s;
    s.seed = j.at("seed").get<std::uint64_t>();
    s.train = j.at("train").get<std::vector<std::string>>();
    s.validation = j.at("validation").get<std::vector<std::string>>();
    s.test = j.at("test").get<std::vector<std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed split spec: ") + e.what());
  }
}

std::vector<std::string> user_ids(const std::vector<Gesture>& corpus) {
  std::vector<std::string> out;
  for (const auto& g : corpus) {
    if (std::find(out.begin(), out.end(), g.user_id) == out.end()) out.push_back(g.user_id);
  }
  return out;
}

}  // namespace gestauth::dataset
