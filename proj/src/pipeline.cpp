#include "influence/pipeline.hpp"

#include <chrono>
#include <condition_variable>
#include <ctime>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>
#include <variant>

#include "influence/parser.hpp"
#include "text_util.hpp"

namespace influence {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr int kFormatVersion = 1;
constexpr std::uint64_t kDesignStream = 0x1de5;
constexpr std::uint64_t kBackendStream = 0xbacc;
constexpr std::uint64_t kCompletionStream = 0xc0de;
constexpr std::uint64_t kBaseMeanStream = 0xba5e;
constexpr std::uint64_t kProfileStream = 0x9f11;

// ---------------------------------------------------------------------------
// Strict JSON object reading

class Keys {
 public:
  Keys(const json& j, std::string where) : j_(j), where_(std::move(where)) {
    if (!j.is_object()) throw ConfigError(where_ + ": expected an object");
  }

  template <class T>
  void get(const char* key, T& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end()) return;
    try {
      out = it->template get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(path(key) + ": " + e.what());
    }
  }

  template <class T>
  void get(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    auto it = j_.find(key);
    if (it == j_.end() || it->is_null()) return;
    T v{};
    get(key, v);
    out = v;
  }

  const json* sub(const char* key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  std::string path(std::string_view key) const { return where_.empty() ? std::string(key) : where_ + "." + std::string(key); }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.count(k)) throw ConfigError("unknown config key " + path(k));
  }

 private:
  const json& j_;
  std::string where_;
  std::set<std::string> seen_;
};

BackendConfig backend_from_json(const json& j, const std::string& where) {
  BackendConfig b;
  Keys k(j, where);
  k.get("kind", b.kind);
  k.get("url", b.url);
  k.get("api_key_env", b.api_key_env);
  k.get("model", b.model);
  k.get("temperature", b.temperature);
  k.get("max_tokens", b.max_tokens);
  k.get("concurrency", b.concurrency);
  k.get("query_cap", b.query_cap);
  k.get("max_retries", b.max_retries);
  k.get("timeout_s", b.timeout_s);
  k.finish();
  if (b.kind != "synthetic" && b.kind != "remote") throw ConfigError(where + ".kind must be synthetic or remote");
  if (!(b.temperature >= 0.0 && b.temperature <= 2.0)) throw ConfigError(where + ".temperature must be in [0, 2]");
  if (b.concurrency == 0) throw ConfigError(where + ".concurrency must be >= 1");
  if (b.max_retries < 0) throw ConfigError(where + ".max_retries must be >= 0");
  return b;
}

json to_json(const BackendConfig& b) {
  return {{"kind", b.kind},
          {"url", b.url},
          {"api_key_env", b.api_key_env},
          {"model", b.model},
          {"temperature", b.temperature},
          {"max_tokens", b.max_tokens},
          {"concurrency", b.concurrency},
          {"query_cap", b.query_cap ? json(*b.query_cap) : json(nullptr)},
          {"max_retries", b.max_retries},
          {"timeout_s", b.timeout_s}};
}

json optional_json(const std::optional<std::uint64_t>& v) { return v ? json(*v) : json(nullptr); }

PfnOutcomeSettings outcome_from_json(const json& j, const std::string& where) {
  PfnOutcomeSettings o;
  Keys k(j, where);
  k.get("intercept", o.intercept);
  auto& c = o.coefficients;
  k.get("E", c.e);
  k.get("I", c.i);
  k.get("ExI", c.ei);
  k.get("D", c.d);
  k.get("DxE", c.de);
  k.get("DxI", c.di);
  k.get("DxExI", c.dei);
  k.get("country_effects", o.country_effects);
  k.finish();
  return o;
}

json to_json(const PfnOutcomeSettings& o) {
  const auto& c = o.coefficients;
  return {{"intercept", o.intercept}, {"E", c.e},     {"I", c.i},       {"ExI", c.ei},
          {"D", c.d},                 {"DxE", c.de},  {"DxI", c.di},    {"DxExI", c.dei},
          {"country_effects", o.country_effects}};
}

// ---------------------------------------------------------------------------
// Files and hashes

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + p.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::string hash_path(const fs::path& p) {
  if (!fs::is_directory(p)) return hex64(fnv1a(read_file(p)));
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(p))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string blob;
  for (const auto& f : files) {
    blob += f.filename().string();
    blob += '\0';
    blob += read_file(f);
    blob += '\0';
  }
  return hex64(fnv1a(blob));
}

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_atomically(const fs::path& p, const std::string& content) {
  const fs::path tmp = p.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw RunError("cannot write " + tmp.string());
    out << content;
  }
  fs::rename(tmp, p);
}

// ---------------------------------------------------------------------------
// Ordered parallel execution: work runs on up to `concurrency` threads, sink
// sees results strictly in index order on the calling thread.

template <class Result>
void ordered_for(std::size_t begin, std::size_t end, unsigned concurrency,
                 const std::function<Result(std::size_t)>& work,
                 const std::function<void(std::size_t, Result&)>& sink) {
  if (begin >= end) return;
  concurrency = std::max(1u, concurrency);
  const std::size_t window = 4 * static_cast<std::size_t>(concurrency);
  using Slot = std::variant<Result, std::exception_ptr>;

  std::mutex mu;
  std::condition_variable cv;
  std::map<std::size_t, Slot> done;
  std::size_t next_claim = begin, next_sink = begin;
  bool stop = false;

  auto worker = [&] {
    for (;;) {
      std::size_t i;
      {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return stop || next_claim >= end || next_claim < next_sink + window; });
        if (stop || next_claim >= end) return;
        i = next_claim++;
      }
      Slot slot;
      try {
        slot = work(i);
      } catch (...) {
        slot = std::current_exception();
      }
      {
        std::lock_guard lk(mu);
        done.emplace(i, std::move(slot));
      }
      cv.notify_all();
    }
  };

  std::vector<std::thread> threads;
  const auto n_threads = std::min<std::size_t>(concurrency, end - begin);
  for (std::size_t t = 0; t < n_threads; ++t) threads.emplace_back(worker);

  std::exception_ptr failure;
  try {
    for (std::size_t i = begin; i < end; ++i) {
      Slot slot;
      {
        std::unique_lock lk(mu);
        cv.wait(lk, [&] { return done.count(i) > 0; });
        slot = std::move(done.at(i));
        done.erase(i);
      }
      if (auto* e = std::get_if<std::exception_ptr>(&slot)) {
        failure = *e;
        break;
      }
      sink(i, std::get<Result>(slot));
      {
        std::lock_guard lk(mu);
        next_sink = i + 1;
      }
      cv.notify_all();
    }
  } catch (...) {
    failure = std::current_exception();
  }
  {
    std::lock_guard lk(mu);
    stop = true;
  }
  cv.notify_all();
  for (auto& t : threads) t.join();
  if (failure) std::rethrow_exception(failure);
}

// ---------------------------------------------------------------------------
// Data file: header line, then per participant one "participant" line followed
// by its n_ratings "rating" lines.

struct ParticipantOutcome {
  json line;
  std::vector<RatingRecord> ratings;
  std::size_t attempts = 0;
};

std::string group_text(const ParticipantOutcome& o) {
  std::string s = o.line.dump();
  s += '\n';
  for (const auto& r : o.ratings) {
    s += to_json(r).dump();
    s += '\n';
  }
  return s;
}

/// Number of complete participant groups at the start of the data file after
/// truncating anything past them. The header must match exactly.
std::size_t prepare_data_file(const fs::path& data, const std::string& header_line, bool resume) {
  if (!fs::exists(data)) {
    std::ofstream out(data, std::ios::binary);
    if (!out) throw RunError("cannot create " + data.string());
    out << header_line << '\n';
    return 0;
  }
  if (!resume) throw RunError(data.string() + " already exists; resume the run or choose another output directory");

  const std::string content = read_file(data);
  std::size_t pos = content.find('\n');
  if (pos == std::string::npos || content.substr(0, pos) != header_line)
    throw RunError(data.string() + " was written by a different configuration or input set");
  std::size_t good_end = pos + 1;
  std::size_t complete = 0;
  std::size_t cursor = good_end;

  auto next_line = [&](std::string& line) {
    const auto nl = content.find('\n', cursor);
    if (nl == std::string::npos) return false;
    line = content.substr(cursor, nl - cursor);
    cursor = nl + 1;
    return true;
  };

  std::string line;
  while (next_line(line)) {
    json p = json::parse(line, nullptr, false);
    if (p.is_discarded() || p.value("type", "") != "participant" || p.value("id", ~0u) != complete) break;
    const std::size_t n = p.value("n_ratings", std::size_t{0});
    std::size_t k = 0;
    for (; k < n && next_line(line); ++k) {
      json r = json::parse(line, nullptr, false);
      if (r.is_discarded() || r.value("type", "") != "rating") break;
    }
    if (k != n) break;
    ++complete;
    good_end = cursor;
  }
  if (good_end < content.size()) fs::resize_file(data, good_end);
  return complete;
}

struct RunContext {
  std::string study;
  json config;
  json header;
  json inputs;
  std::size_t planned = 0;
  std::uint64_t backend_seed = 0;
};

json manifest_json(const RunContext& ctx, const RunOptions& options, const CompletionBackend& backend,
                   const BackendConfig& bc, std::size_t complete, const std::string& started,
                   const fs::path& data, bool finished) {
  json backend_j = {{"kind", bc.kind}, {"name", backend.name()}, {"model", bc.model},
                    {"temperature", bc.temperature}};
  if (bc.kind == "remote") backend_j["url"] = bc.url;
  return {{"run_id", hex64(fnv1a(ctx.header.dump()))},
          {"study", ctx.study},
          {"config", ctx.config},
          {"data_dir", fs::absolute(options.data_dir).string()},
          {"backend", backend_j},
          {"seeds", {{"run", ctx.config.at("seed")}, {"backend", ctx.backend_seed}}},
          {"counts", {{"participants_planned", ctx.planned}, {"participants_complete", complete}}},
          {"inputs", ctx.inputs},
          {"data_file", data.filename().string()},
          {"data_hash", hex64(fnv1a(read_file(data)))},
          {"status", finished && complete == ctx.planned ? "complete" : "partial"},
          {"started_at", started},
          {"updated_at", utc_now()}};
}

RunSummary execute(const RunContext& ctx, const RunOptions& options, CompletionBackend& backend,
                   const BackendConfig& bc, const std::function<ParticipantOutcome(std::size_t)>& work) {
  if (options.out_dir.empty()) throw ConfigError("no output directory given");
  fs::create_directories(options.out_dir);
  RunSummary summary;
  summary.data = options.out_dir / "data.jsonl";
  summary.manifest = options.out_dir / "manifest.json";

  const std::string started = utc_now();
  const std::size_t done = prepare_data_file(summary.data, ctx.header.dump(), options.resume);
  summary.resumed_from = done;
  summary.participants = done;
  std::size_t end = ctx.planned;
  if (options.stop_after) end = std::min(end, done + *options.stop_after);
  if (options.log && done > 0) options.log("resuming after " + std::to_string(done) + " participants");

  auto write_manifest = [&](bool finished) {
    write_atomically(summary.manifest,
                     manifest_json(ctx, options, backend, bc, summary.participants, started, summary.data, finished)
                             .dump(2) +
                         "\n");
  };
  write_manifest(false);

  std::ofstream out(summary.data, std::ios::binary | std::ios::app);
  if (!out) throw RunError("cannot append to " + summary.data.string());
  const std::function<void(std::size_t, ParticipantOutcome&)> sink = [&](std::size_t i, ParticipantOutcome& o) {
    out << group_text(o);
    out.flush();
    if (!out) throw RunError("write failed on " + summary.data.string());
    summary.participants = i + 1;
    summary.attempts += o.attempts;
    if (options.log && (i + 1) % 100 == 0) options.log(std::to_string(i + 1) + " participants");
  };
  try {
    ordered_for<ParticipantOutcome>(done, end, bc.concurrency, work, sink);
  } catch (...) {
    out.close();
    write_manifest(false);
    throw;
  }
  out.close();
  summary.queries = backend.queries();
  write_manifest(true);
  return summary;
}

std::string rejection_text(const ParseResult& r) { return r.error_summary(); }

CompletionParams params_for(const BackendConfig& bc, const PromptText& prompt, std::uint64_t seed) {
  CompletionParams p;
  p.temperature = bc.temperature;
  p.model_name = bc.model;
  p.max_tokens = bc.max_tokens ? bc.max_tokens : std::max<std::size_t>(prompt.completion_token_estimate, 16);
  p.seed = seed;
  return p;
}

std::string complete_for(CompletionBackend& backend, const PromptText& prompt, const CompletionParams& params,
                         std::uint32_t pid) {
  try {
    return backend.complete(prompt, params);
  } catch (const BackendError& e) {
    throw BackendError(e.kind(), "participant " + std::to_string(pid) + ": " + e.what());
  }
}

std::uint64_t backend_seed(std::uint64_t run_seed, const std::optional<std::uint64_t>& explicit_seed) {
  return explicit_seed ? *explicit_seed : derive_seed(run_seed, kBackendStream);
}

std::shared_ptr<CompletionBackend> make_remote(const BackendConfig& bc) {
  RemoteOptions ro;
  ro.url = bc.url;
  ro.api_key_env = bc.api_key_env;
  ro.max_retries = bc.max_retries;
  ro.timeout_s = bc.timeout_s;
  return std::make_shared<RemoteBackend>(ro);
}

void check_common(std::size_t max_attempts, std::size_t count, const char* what) {
  if (max_attempts == 0) throw ConfigError("max_attempts must be >= 1");
  if (count == 0) throw ConfigError(std::string(what) + " must be >= 1");
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

IteConfig ite_config_from_json(const json& j) {
  IteConfig c;
  Keys k(j, "");
  std::string study = "ite";
  k.get("study", study);
  if (study != "ite") throw ConfigError("study must be ite");
  k.get("bank", c.bank);
  k.get("templates", c.templates);
  k.get("blocks", c.blocks);
  k.get("seed", c.seed);
  k.get("max_attempts", c.max_attempts);
  k.get("token_budget", c.token_budget);
  if (const auto* b = k.sub("backend")) c.backend = backend_from_json(*b, "backend");
  if (const auto* s = k.sub("synthetic")) {
    Keys ks(*s, "synthetic");
    auto& sy = c.synthetic;
    ks.get("noise_sd", sy.noise_sd);
    ks.get("offset", sy.offset);
    ks.get("tilt", sy.tilt);
    ks.get("effect", sy.effect);
    ks.get("base_mean_lo", sy.base_mean_lo);
    ks.get("base_mean_hi", sy.base_mean_hi);
    ks.get("seed", sy.seed);
    ks.finish();
    if (sy.effect != "mixed-truth" && sy.effect != "none") throw ConfigError("synthetic.effect must be mixed-truth or none");
    if (!(sy.noise_sd >= 0.0)) throw ConfigError("synthetic.noise_sd must be >= 0");
    if (!(sy.base_mean_lo >= 1.0 && sy.base_mean_hi <= 6.0 && sy.base_mean_lo <= sy.base_mean_hi))
      throw ConfigError("synthetic base mean range must lie within [1, 6]");
  }
  k.finish();
  check_common(c.max_attempts, c.blocks, "blocks");
  return c;
}

json to_json(const IteConfig& c) {
  const auto& s = c.synthetic;
  return {{"study", "ite"},
          {"bank", c.bank},
          {"templates", c.templates},
          {"blocks", c.blocks},
          {"seed", c.seed},
          {"max_attempts", c.max_attempts},
          {"token_budget", c.token_budget},
          {"backend", to_json(c.backend)},
          {"synthetic",
           {{"noise_sd", s.noise_sd},
            {"offset", s.offset},
            {"tilt", s.tilt},
            {"effect", s.effect},
            {"base_mean_lo", s.base_mean_lo},
            {"base_mean_hi", s.base_mean_hi},
            {"seed", optional_json(s.seed)}}}};
}

PfnConfig pfn_config_from_json(const json& j) {
  PfnConfig c;
  Keys k(j, "");
  std::string study = "pfn";
  k.get("study", study);
  if (study != "pfn") throw ConfigError("study must be pfn");
  k.get("countries", c.countries);
  k.get("articles", c.articles);
  k.get("probes", c.probes);
  k.get("deprivation", c.deprivation);
  k.get("templates", c.templates);
  k.get("participants", c.participants);
  k.get("seed", c.seed);
  k.get("max_attempts", c.max_attempts);
  k.get("deprivation_mean", c.deprivation_mean);
  k.get("deprivation_sd", c.deprivation_sd);
  k.get("equal_target", c.equal_target);
  k.get("perturb_sd", c.perturb_sd);
  if (const auto* b = k.sub("backend")) c.backend = backend_from_json(*b, "backend");
  if (const auto* s = k.sub("synthetic")) {
    Keys ks(*s, "synthetic");
    auto& sy = c.synthetic;
    ks.get("noise_sd", sy.noise_sd);
    ks.get("nested", sy.nested);
    ks.get("seed", sy.seed);
    if (const auto* p = ks.sub("persuasion")) sy.persuasion = outcome_from_json(*p, "synthetic.persuasion");
    if (const auto* m = ks.sub("mobilization")) sy.mobilization = outcome_from_json(*m, "synthetic.mobilization");
    ks.finish();
    if (!(sy.noise_sd >= 0.0)) throw ConfigError("synthetic.noise_sd must be >= 0");
  }
  k.finish();
  check_common(c.max_attempts, c.participants, "participants");
  if (!(c.deprivation_sd > 0.0)) throw ConfigError("deprivation_sd must be > 0");
  if (!(c.equal_target > 0.0 && c.equal_target <= 1.0)) throw ConfigError("equal_target must be in (0, 1]");
  if (c.perturb_sd && !(*c.perturb_sd >= 0.0)) throw ConfigError("perturb_sd must be >= 0");
  return c;
}

json to_json(const PfnConfig& c) {
  const auto& s = c.synthetic;
  return {{"study", "pfn"},
          {"countries", c.countries},
          {"articles", c.articles},
          {"probes", c.probes},
          {"deprivation", c.deprivation},
          {"templates", c.templates},
          {"participants", c.participants},
          {"seed", c.seed},
          {"max_attempts", c.max_attempts},
          {"deprivation_mean", c.deprivation_mean},
          {"deprivation_sd", c.deprivation_sd},
          {"equal_target", c.equal_target},
          {"perturb_sd", c.perturb_sd ? json(*c.perturb_sd) : json(nullptr)},
          {"backend", to_json(c.backend)},
          {"synthetic",
           {{"noise_sd", s.noise_sd},
            {"nested", s.nested},
            {"seed", optional_json(s.seed)},
            {"persuasion", to_json(s.persuasion)},
            {"mobilization", to_json(s.mobilization)}}}};
}

json load_config_json(const fs::path& path) {
  const std::string text = read_file(path);
  json j = json::parse(text, nullptr, false, /*ignore_comments=*/true);
  if (j.is_discarded()) throw ConfigError(path.string() + ": not valid JSON");
  if (!j.is_object()) throw ConfigError(path.string() + ": expected a JSON object");
  return j;
}

// ---------------------------------------------------------------------------
// Backends

std::shared_ptr<CompletionBackend> make_ite_backend(const IteConfig& config, const StatementBank& bank) {
  if (config.backend.kind == "remote") return make_remote(config.backend);
  const auto seed = backend_seed(config.seed, config.synthetic.seed);
  const auto& s = config.synthetic;
  auto cfg = SyntheticIteConfig::random_means(bank, derive_seed(seed, kBaseMeanStream), s.base_mean_lo,
                                              s.base_mean_hi);
  cfg.noise_sd = s.noise_sd;
  cfg.effect_offset = s.offset;
  cfg.effect_tilt = s.tilt;
  cfg.effect_applies = s.effect == "none" ? no_effect_mask() : default_effect_mask();
  return std::make_shared<SyntheticIteBackend>(bank, std::move(cfg), seed);
}

SyntheticPfnConfig synthetic_pfn_config(const SyntheticPfnSettings& s, double mean_deprivation) {
  auto coefficients = [&](const PfnOutcomeSettings& o) {
    PfnCoefficients c;
    if (s.nested) {
      c = plant_nested_targets(o.coefficients, mean_deprivation, o.intercept);
    } else {
      const auto& t = o.coefficients;
      c.intercept = o.intercept;
      c.e = t.e;
      c.i = t.i;
      c.ei = t.ei;
      c.d = t.d;
      c.de = t.de;
      c.di = t.di;
      c.dei = t.dei;
    }
    c.country = o.country_effects;
    return c;
  };
  SyntheticPfnConfig cfg;
  cfg.persuasion = coefficients(s.persuasion);
  cfg.mobilization = coefficients(s.mobilization);
  cfg.noise_sd = s.noise_sd;
  cfg.check();
  return cfg;
}

std::shared_ptr<CompletionBackend> make_pfn_backend(const PfnConfig& config, const PfnContext& ctx,
                                                    double mean_deprivation) {
  if (config.backend.kind == "remote") return make_remote(config.backend);
  return std::make_shared<SyntheticPfnBackend>(ctx, synthetic_pfn_config(config.synthetic, mean_deprivation),
                                               backend_seed(config.seed, config.synthetic.seed));
}

// ---------------------------------------------------------------------------
// Runs

RunSummary run_ite(const IteConfig& config, const RunOptions& options, std::shared_ptr<CompletionBackend> backend) {
  const fs::path bank_path = resolve(options.data_dir, config.bank);
  const fs::path templates_path = resolve(options.data_dir, config.templates);
  const StatementBank bank = load_bank(bank_path);
  PromptOptions po;
  po.token_budget = config.token_budget;
  const PromptBuilder builder(bank, load_templates(templates_path), po);

  const DesignGeometry geometry{};
  std::vector<ParticipantDesign> designs;
  designs.reserve(config.blocks * geometry.n);
  for (std::uint32_t b = 0; b < config.blocks; ++b) {
    auto block = build_block(bank, b, derive_seed(config.seed, kDesignStream), geometry);
    for (auto& d : block.designs) designs.push_back(std::move(d));
  }

  if (!backend) backend = make_ite_backend(config, bank);
  backend->set_query_cap(config.backend.query_cap);

  RunContext ctx;
  ctx.study = "ite";
  ctx.config = to_json(config);
  ctx.planned = designs.size();
  ctx.backend_seed = backend_seed(config.seed, config.synthetic.seed);
  ctx.inputs = {{"bank", hash_path(bank_path)}, {"templates", hash_path(templates_path)}};
  json ids = json::array();
  for (const auto& s : bank.statements()) ids.push_back(s.id);
  ctx.header = {{"type", "header"},       {"study", "ite"},      {"format", kFormatVersion},
                {"config", ctx.config},   {"inputs", ctx.inputs}, {"statement_ids", ids}};

  const std::uint64_t completion_root = derive_seed(config.seed, kCompletionStream);
  const auto& bc = config.backend;
  auto work = [&](std::size_t i) {
    const auto& design = designs[i];
    const auto pid = design.participant_id;
    ParticipantOutcome o;
    json rejections = json::array();
    for (std::size_t attempt = 1; attempt <= config.max_attempts; ++attempt) {
      o.attempts = attempt;
      const auto seed = derive_seed(completion_root, pid, attempt);
      const PromptText exposure = builder.exposure_prompt(design);
      const auto first = parse_ite_completion(
          complete_for(*backend, exposure, params_for(bc, exposure, seed), pid), exposure, pid);
      if (!first.ok()) {
        rejections.push_back({{"attempt", attempt}, {"phase", "ite_exposure"}, {"errors", rejection_text(first)}});
        continue;
      }
      const PromptText test = builder.test_prompt(design, first.records);
      const auto second =
          parse_ite_completion(complete_for(*backend, test, params_for(bc, test, seed), pid), test, pid);
      if (!second.ok()) {
        rejections.push_back({{"attempt", attempt}, {"phase", "ite_test"}, {"errors", rejection_text(second)}});
        continue;
      }
      o.ratings = first.records;
      o.ratings.insert(o.ratings.end(), second.records.begin(), second.records.end());
      o.line = {{"type", "participant"}, {"id", pid},           {"block", design.block_id},
                {"attempts", attempt},   {"rejections", rejections}, {"n_ratings", o.ratings.size()}};
      return o;
    }
    throw RunError("participant " + std::to_string(pid) + " rejected " + std::to_string(config.max_attempts) +
                   " times; last: " + rejections.back().at("errors").get<std::string>());
  };
  return execute(ctx, options, *backend, bc, work);
}

RunSummary run_pfn(const PfnConfig& config, const RunOptions& options, std::shared_ptr<CompletionBackend> backend) {
  const fs::path countries_path = resolve(options.data_dir, config.countries);
  const fs::path articles_path = resolve(options.data_dir, config.articles);
  const fs::path probes_path = resolve(options.data_dir, config.probes);
  const fs::path deprivation_path = resolve(options.data_dir, config.deprivation);
  const fs::path templates_path = resolve(options.data_dir, config.templates);

  const CountryTable table = load_country_table(countries_path);
  const PfnContext pfn{load_deprivation_statements(deprivation_path), load_articles(articles_path),
                       load_probes(probes_path), load_templates(templates_path)};

  const CalibrationOptions calib{};
  const double perturb = config.perturb_sd
                             ? *config.perturb_sd
                             : calibrate_perturbation(config.deprivation_mean, config.deprivation_sd,
                                                      config.equal_target, calib)
                                   .perturb_sd;
  const double mean_d =
      mean_deprivation_score(config.deprivation_mean, config.deprivation_sd, perturb, calib.draws, calib.seed);

  if (!backend) backend = make_pfn_backend(config, pfn, mean_d);
  backend->set_query_cap(config.backend.query_cap);

  RunContext ctx;
  ctx.study = "pfn";
  ctx.config = to_json(config);
  ctx.planned = config.participants;
  ctx.backend_seed = backend_seed(config.seed, config.synthetic.seed);
  ctx.inputs = {{"countries", hash_path(countries_path)},
                {"articles", hash_path(articles_path)},
                {"probes", hash_path(probes_path)},
                {"deprivation", hash_path(deprivation_path)},
                {"templates", hash_path(templates_path)}};
  json probes = json::array();
  for (const auto& p : pfn.probes.probes())
    probes.push_back({{"id", p.id}, {"kind", probe_kind_name(p.kind)}, {"text", p.text}});
  ctx.header = {{"type", "header"},     {"study", "pfn"},       {"format", kFormatVersion},
                {"config", ctx.config}, {"inputs", ctx.inputs}, {"probes", probes},
                {"perturb_sd", perturb}};

  const std::uint64_t completion_root = derive_seed(config.seed, kCompletionStream);
  const std::uint64_t profile_root = derive_seed(config.seed, kProfileStream);
  const auto& bc = config.backend;
  auto work = [&](std::size_t i) {
    const auto pid = static_cast<std::uint32_t>(i);
    Rng rng(derive_seed(profile_root, pid));
    const DemographicProfile profile = sample_profile(table, rng);
    const DeprivationTriple dep = sample_deprivation(config.deprivation_mean, config.deprivation_sd, perturb, rng);
    const ArticleKind article = kArticleKinds[std::uniform_int_distribution<std::size_t>(0, 3)(rng)];

    ParticipantOutcome o;
    json rejections = json::array();
    const auto& probe_list = pfn.probes.probes();
    for (std::size_t k = 0; k < probe_list.size(); ++k) {
      const PromptText prompt = build_pfn_prompt(pfn, profile, dep, article, probe_list[k]);
      bool accepted = false;
      for (std::size_t attempt = 1; attempt <= config.max_attempts && !accepted; ++attempt) {
        ++o.attempts;
        const auto seed = derive_seed(derive_seed(completion_root, pid), k, attempt);
        const auto parsed = parse_pfn_completion(
            complete_for(*backend, prompt, params_for(bc, prompt, seed), pid), prompt, pid, true);
        if (parsed.ok()) {
          o.ratings.push_back(parsed.records.front());
          accepted = true;
        } else {
          rejections.push_back({{"probe", probe_list[k].id}, {"attempt", attempt}, {"errors", rejection_text(parsed)}});
        }
      }
      if (!accepted)
        throw RunError("participant " + std::to_string(pid) + " probe " + probe_list[k].id + " rejected " +
                       std::to_string(config.max_attempts) + " times");
    }
    o.line = {{"type", "participant"},
              {"id", pid},
              {"attempts", o.attempts},
              {"rejections", rejections},
              {"country", profile.country},
              {"gender", gender_name(profile.gender)},
              {"age", profile.age},
              {"education", profile.education},
              {"political_interest", profile.political_interest},
              {"ideology", profile.ideology},
              {"deprivation", dep.ratings},
              {"article", article_kind_name(article)},
              {"n_ratings", o.ratings.size()}};
    return o;
  };
  return execute(ctx, options, *backend, bc, work);
}

RunSummary resume_run(const fs::path& out_dir, const RunOptions& options) {
  const json manifest = load_config_json(out_dir / "manifest.json");
  RunOptions o = options;
  o.out_dir = out_dir;
  o.resume = true;
  if (o.data_dir.empty()) o.data_dir = manifest.at("data_dir").get<std::string>();
  const auto study = manifest.at("study").get<std::string>();
  if (study == "ite") return run_ite(ite_config_from_json(manifest.at("config")), o);
  if (study == "pfn") return run_pfn(pfn_config_from_json(manifest.at("config")), o);
  throw ConfigError("manifest names unknown study " + study);
}

// ---------------------------------------------------------------------------
// Reading data files

json to_json(const RatingRecord& r) {
  json j = {{"type", "rating"},       {"participant_id", r.participant_id},
            {"phase", phase_name(r.phase)}, {"item_id", r.item_id},
            {"value", r.value},       {"scale_max", r.scale_max},
            {"raw_line", r.raw_line}};
  if (r.attribute) j["attribute"] = attribute_name(*r.attribute);
  return j;
}

RatingRecord rating_from_json(const json& j) {
  RatingRecord r;
  r.participant_id = j.at("participant_id").get<std::uint32_t>();
  const auto phase = phase_from_name(j.at("phase").get<std::string>());
  if (!phase) throw DataError("unknown phase " + j.at("phase").dump());
  r.phase = *phase;
  r.item_id = j.at("item_id").get<std::string>();
  if (auto it = j.find("attribute"); it != j.end()) {
    const auto a = attribute_from_name(it->get<std::string>());
    if (!a) throw DataError("unknown attribute " + it->dump());
    r.attribute = *a;
  }
  r.value = j.at("value").get<int>();
  r.scale_max = j.at("scale_max").get<int>();
  r.raw_line = j.value("raw_line", "");
  return r;
}

namespace {

json parse_line(const std::string& line, std::size_t line_no) {
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DataError("line " + std::to_string(line_no) + ": not a JSON object");
  return j;
}

/// Calls `on_group` with each participant line and its ratings.
void read_groups(std::istream& in, const std::function<void(const json&, std::vector<RatingRecord>)>& on_group) {
  std::string line;
  std::size_t line_no = 1;
  std::optional<json> current;
  std::vector<RatingRecord> ratings;
  auto flush = [&] {
    if (!current) return;
    const auto n = current->at("n_ratings").get<std::size_t>();
    if (ratings.size() != n)
      throw DataError("incomplete dataset: participant " + current->at("id").dump() + " has " +
                      std::to_string(ratings.size()) + " of " + std::to_string(n) + " ratings");
    on_group(*current, std::move(ratings));
    ratings.clear();
    current.reset();
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (txt::trim(line).empty()) continue;
    json j = parse_line(line, line_no);
    const auto type = j.value("type", "");
    try {
      if (type == "participant") {
        flush();
        current = std::move(j);
      } else if (type == "rating") {
        if (!current) throw DataError("rating before any participant");
        auto r = rating_from_json(j);
        if (r.participant_id != current->at("id").get<std::uint32_t>())
          throw DataError("rating for participant " + std::to_string(r.participant_id) + " inside another group");
        ratings.push_back(std::move(r));
      } else {
        throw DataError("unexpected record type '" + type + "'");
      }
    } catch (const json::exception& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  flush();
}

}  // namespace

StudyHeader read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty data file");
  json j = parse_line(line, 1);
  if (j.value("type", "") != "header") throw DataError("first line is not a run header");
  if (j.value("format", 0) != kFormatVersion) throw DataError("unsupported data format " + j.value("format", json()).dump());
  return {j.at("study").get<std::string>(), std::move(j)};
}

IteDataset read_ite_dataset(std::istream& in) {
  const auto header = read_header(in);
  if (header.study != "ite") throw DataError("data file holds a " + header.study + " run, not ite");
  IteDataset data;
  data.statement_ids = header.json.at("statement_ids").get<std::vector<std::string>>();
  read_groups(in, [&](const json& p, std::vector<RatingRecord> ratings) {
    IteParticipant part;
    part.id = p.at("id").get<std::uint32_t>();
    part.block = p.at("block").get<std::uint32_t>();
    part.attempts = p.at("attempts").get<std::uint32_t>();
    for (auto& r : ratings) (r.phase == Phase::ite_exposure ? part.exposure : part.test).push_back(std::move(r));
    data.participants.push_back(std::move(part));
  });
  return data;
}

PfnDataset read_pfn_dataset(std::istream& in) {
  const auto header = read_header(in);
  if (header.study != "pfn") throw DataError("data file holds a " + header.study + " run, not pfn");
  PfnDataset data;
  for (const auto& p : header.json.at("probes")) {
    const auto kind = p.at("kind").get<std::string>();
    if (kind != "persuasion" && kind != "mobilization") throw DataError("unknown probe kind " + kind);
    data.probe_kinds[p.at("id").get<std::string>()] =
        kind == "persuasion" ? ProbeKind::persuasion : ProbeKind::mobilization;
  }
  read_groups(in, [&](const json& p, std::vector<RatingRecord> ratings) {
    PfnParticipant part;
    part.id = p.at("id").get<std::uint32_t>();
    part.attempts = p.at("attempts").get<std::uint32_t>();
    part.profile.country = p.at("country").get<std::string>();
    part.profile.gender = p.at("gender").get<std::string>() == gender_name(Gender::male) ? Gender::male : Gender::female;
    part.profile.age = p.at("age").get<int>();
    part.profile.education = p.at("education").get<int>();
    part.profile.political_interest = p.at("political_interest").get<int>();
    part.profile.ideology = p.at("ideology").get<int>();
    part.deprivation.ratings = p.at("deprivation").get<std::array<int, 3>>();
    const auto article = article_kind_from_name(p.at("article").get<std::string>());
    if (!article) throw DataError("unknown article kind " + p.at("article").dump());
    part.article = *article;
    part.ratings = std::move(ratings);
    data.participants.push_back(std::move(part));
  });
  return data;
}

std::string detect_study(const fs::path& data_file) {
  std::ifstream in(data_file, std::ios::binary);
  if (!in) throw DataError("cannot read " + data_file.string());
  return read_header(in).study;
}

}  // namespace influence
