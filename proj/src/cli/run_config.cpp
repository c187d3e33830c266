#include "cli/run_config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "advloss/error.hpp"
#include "advloss/gradcheck.hpp"

namespace advloss::cli {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* want) {
  throw Error(ErrorCode::config, "key '" + key + "': expected " + want + ", got '" + value + "'");
}

template <typename T>
T parse_number(const std::string& key, const std::string& value, const char* want) {
  T out{};
  const char* first = value.data();
  const char* last = first + value.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last || value.empty()) bad_value(key, value, want);
  return out;
}

std::string join(const std::vector<std::size_t>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void add_attack_keys(std::vector<KeySpec>& k) {
  const AttackSpec d;
  k.push_back({"norm", norm_name(d.norm), "perturbation norm: linf or l2"});
  k.push_back({"eps", round_trip(d.epsilon), "perturbation budget"});
  k.push_back({"steps", std::to_string(d.steps), "PGD iterations"});
  k.push_back({"step_size", "", "PGD step size (empty: 2.5 * eps / steps)"});
  k.push_back({"random_start", "true", "uniform random start inside the ball"});
}

}  // namespace

std::string round_trip(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

RunConfig::RunConfig(std::vector<KeySpec> keys) : keys_(std::move(keys)) {
  for (const auto& k : keys_) {
    values_[k.key] = k.default_value;
    sources_[k.key] = ValueSource::Default;
  }
}

void RunConfig::apply_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw Error(ErrorCode::config,
                  origin + ":" + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(t).substr(0, eq));
    if (!has_key(key))
      throw Error(ErrorCode::config,
                  origin + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    set(key, trim(std::string_view(t).substr(eq + 1)), ValueSource::File);
  }
}

void RunConfig::apply_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open config file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  apply_text(ss.str(), path.string());
}

void RunConfig::set(const std::string& key, const std::string& value, ValueSource source) {
  if (!has_key(key)) throw Error(ErrorCode::config, "unknown key '" + key + "'");
  values_[key] = value;
  sources_[key] = source;
}

bool RunConfig::has_key(const std::string& key) const { return values_.count(key) != 0; }

const std::string& RunConfig::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::config, "unknown key '" + key + "'");
  return it->second;
}

ValueSource RunConfig::source_of(const std::string& key) const {
  get(key);
  return sources_.at(key);
}

std::int64_t RunConfig::get_int(const std::string& key) const {
  return parse_number<std::int64_t>(key, get(key), "an integer");
}

std::uint64_t RunConfig::get_uint(const std::string& key) const {
  return parse_number<std::uint64_t>(key, get(key), "a non-negative integer");
}

double RunConfig::get_double(const std::string& key) const {
  return parse_number<double>(key, get(key), "a number");
}

bool RunConfig::get_bool(const std::string& key) const {
  const std::string& v = get(key);
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "true or false");
}

std::vector<std::size_t> RunConfig::get_size_list(const std::string& key) const {
  std::vector<std::size_t> out;
  const std::string& v = get(key);
  if (trim(v).empty()) return out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ','))
    out.push_back(parse_number<std::size_t>(key, trim(item), "a comma-separated count list"));
  return out;
}

std::string RunConfig::dump() const {
  std::string s;
  for (const auto& k : keys_) s += k.key + " = " + values_.at(k.key) + "\n";
  return s;
}

std::vector<std::string> command_names() {
  return {"gen-data", "train", "search", "eval", "landscape", "gradcheck", "simplify"};
}

std::vector<KeySpec> command_keys(std::string_view command) {
  std::vector<KeySpec> k;
  if (command == "gen-data") {
    k = {{"kind", "blobs", "blobs, rings or mnist_subset_file"},
         {"n", "1000", "number of samples"},
         {"dims", "2", "input dimension"},
         {"classes", "3", "number of classes"},
         {"spread", "0.08", "per-coordinate noise scale"},
         {"images", "", "IDX image file (mnist_subset_file)"},
         {"labels", "", "IDX label file (mnist_subset_file)"}};
  } else if (command == "train") {
    const TrainConfig d;
    k = {{"data", "", "training dataset file"},
         {"hidden", join(d.hidden), "hidden layer widths"},
         {"epochs", std::to_string(d.epochs), "training epochs"},
         {"learning_rate", round_trip(d.learning_rate), "SGD learning rate"},
         {"batch_size", std::to_string(d.batch_size), "minibatch size"},
         {"at_mode", "none", "adversarial training: none or fgsm"},
         {"at_epsilon", round_trip(d.at_epsilon), "FGSM budget (L-inf)"}};
  } else if (command == "search") {
    const SearchConfig d;
    k = {{"model", "", "model file"},
         {"data", "", "dataset file"},
         {"best_out", "", "best expression file (default: <out>.expr)"},
         {"generations", std::to_string(d.generations), "GP generations"},
         {"max_depth", std::to_string(d.max_depth), "tree depth limit"},
         {"population_size", std::to_string(d.population_size), "population size"},
         {"tournament_size", std::to_string(d.tournament_size), "tournament size"},
         {"crossover_rate", round_trip(d.crossover_rate), "crossover probability per pair"},
         {"mutation_rate", round_trip(d.mutation_rate), "mutation probability per individual"},
         {"fitness_samples", std::to_string(d.fitness_samples), "fitness slice size"}};
    add_attack_keys(k);
  } else if (command == "eval") {
    k = {{"model", "", "model file"},
         {"data", "", "dataset file"},
         {"loss", "ce", "catalog loss name or expression file"},
         {"samples", "0", "use the first N samples (0: all)"},
         {"batch_size", std::to_string(ExecPolicy{}.batch_size), "attack batch size"}};
    add_attack_keys(k);
  } else if (command == "landscape") {
    k = {{"model", "", "model file"},
         {"data", "", "dataset file"},
         {"hc_loss", "ce", "handcrafted anchor loss"},
         {"bs_loss", "bs5", "searched anchor loss (name or expression file)"},
         {"losses", "ce,cw,dlr,zero_one,bs5", "losses recorded on the grid"},
         {"resolution", "21", "grid points per axis"}};
    add_attack_keys(k);
  } else if (command == "gradcheck") {
    const GradCheckOptions d;
    k = {{"op_trials", std::to_string(d.op_trials), "random inputs per op"},
         {"trees", std::to_string(d.trees), "random trees"},
         {"tree_max_depth", std::to_string(d.tree_max_depth), "random tree depth bound"},
         {"model_points", std::to_string(d.model_points), "input points per loss"},
         {"tolerance", round_trip(d.tolerance), "relative error bound"}};
  } else if (command == "simplify") {
    k = {{"in", "", "expression file"}};
  } else {
    throw Error(ErrorCode::invalid_argument, "unknown command '" + std::string(command) + "'");
  }
  k.push_back({"seed", "0", "master seed"});
  k.push_back({"workers", "1", "worker threads"});
  k.push_back({"out", "", "output path"});
  return k;
}

AttackSpec attack_from(const RunConfig& c) {
  AttackSpec s;
  s.norm = norm_from_name(c.get("norm"));
  s.epsilon = c.get_double("eps");
  s.steps = static_cast<int>(c.get_int("steps"));
  if (!c.get("step_size").empty()) s.step_size = c.get_double("step_size");
  s.random_start = c.get_bool("random_start");
  s.seed = derive_seed(c.get_uint("seed"), {stream::attack});
  s.validate();
  return s;
}

SearchConfig search_config_from(const RunConfig& c) {
  SearchConfig s;
  s.generations = static_cast<int>(c.get_int("generations"));
  s.max_depth = static_cast<int>(c.get_int("max_depth"));
  s.population_size = c.get_uint("population_size");
  s.tournament_size = c.get_uint("tournament_size");
  s.crossover_rate = c.get_double("crossover_rate");
  s.mutation_rate = c.get_double("mutation_rate");
  s.fitness_samples = c.get_uint("fitness_samples");
  s.attack = attack_from(c);
  s.seed = c.get_uint("seed");
  s.validate();
  return s;
}

TrainConfig train_config_from(const RunConfig& c) {
  TrainConfig t;
  t.hidden = c.get_size_list("hidden");
  t.epochs = c.get_uint("epochs");
  t.learning_rate = c.get_double("learning_rate");
  t.batch_size = c.get_uint("batch_size");
  const std::string& mode = c.get("at_mode");
  if (mode == "none") {
    t.at_mode = AdvTrainingMode::None;
  } else if (mode == "fgsm") {
    t.at_mode = AdvTrainingMode::Fgsm;
  } else {
    throw Error(ErrorCode::config, "key 'at_mode': expected none or fgsm, got '" + mode + "'");
  }
  t.at_epsilon = c.get_double("at_epsilon");
  t.seed = c.get_uint("seed");
  return t;
}

}  // namespace advloss::cli
