#include "cli/commands.hpp"

#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <sstream>

#include <CLI11.hpp>

#include "advloss/csv.hpp"
#include "advloss/datagen.hpp"
#include "advloss/error.hpp"
#include "advloss/gradcheck.hpp"
#include "advloss/riskeval.hpp"
#include "advloss/search.hpp"

namespace advloss::cli {

namespace {

std::filesystem::path required_path(const RunConfig& c, const std::string& key) {
  const std::string& v = c.get(key);
  if (v.empty()) throw Error(ErrorCode::config, "missing required key '" + key + "'");
  return v;
}

ExecPolicy exec_from(const RunConfig& c) {
  ExecPolicy e;
  const auto w = c.get_int("workers");
  if (w < 1) throw Error(ErrorCode::config, "key 'workers': must be >= 1");
  e.workers = static_cast<int>(w);
  if (c.has_key("batch_size") && c.has_key("loss")) e.batch_size = c.get_uint("batch_size");
  return e;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw Error(ErrorCode::io, "write failed: " + path.string());
}

// Output to the `out` path when set, otherwise to the stream.
void emit(const RunConfig& c, std::ostream& out, const std::string& text) {
  if (c.get("out").empty()) {
    out << text;
  } else {
    write_text(c.get("out"), text);
  }
}

std::string quote(const std::string& s) {
  std::string q = "\"";
  for (char ch : s) {
    if (ch == '"' || ch == '\\') q += '\\';
    q += ch == '\n' ? ' ' : ch;
  }
  return q + "\"";
}

}  // namespace

ExprTree read_expression_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorCode::io, "cannot open expression file " + path.string());
  std::string text, line;
  while (std::getline(f, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] == '#') continue;
    text += line + "\n";
  }
  return parse(text);
}

void write_expression_file(const ExprTree& tree, const std::filesystem::path& path) {
  write_text(path, print(tree) + "\n");
}

SurrogateLoss resolve_loss(const std::string& spec) {
  try {
    return find_loss(spec);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::not_found) throw;
  }
  std::error_code ec;
  if (!std::filesystem::is_regular_file(spec, ec))
    throw Error(ErrorCode::not_found,
                "loss '" + spec + "' is neither a catalog name nor an expression file");
  return SurrogateLoss(std::filesystem::path(spec).stem().string(), read_expression_file(spec));
}

void cmd_gen_data(const RunConfig& c, std::ostream& out) {
  const auto path = required_path(c, "out");
  const std::string& kind = c.get("kind");
  const std::size_t n = c.get_uint("n"), dims = c.get_uint("dims"), classes = c.get_uint("classes");
  const auto seed = c.get_uint("seed");
  Dataset data;
  if (kind == "blobs") {
    data = make_blobs(n, dims, classes, c.get_double("spread"), seed);
  } else if (kind == "rings") {
    data = make_rings(n, dims, classes, c.get_double("spread"), seed);
  } else if (kind == "mnist_subset_file") {
    data = load_idx_subset(required_path(c, "images"), required_path(c, "labels"), n, classes);
  } else {
    throw Error(ErrorCode::config,
                "key 'kind': expected blobs, rings or mnist_subset_file, got '" + kind + "'");
  }
  save_dataset(data, path);
  out << "n_samples=" << data.size() << " input_dim=" << data.input_dim()
      << " num_classes=" << data.num_classes << " path=" << path.string() << "\n";
}

void cmd_train(const RunConfig& c, std::ostream& out) {
  const auto path = required_path(c, "out");
  const Dataset data = load_dataset(required_path(c, "data"));
  const TrainResult r = train(data, train_config_from(c));
  save_model(r.model, path);
  const double final_loss = r.curve.empty() ? 0.0 : r.curve.back().mean_loss;
  out << "epochs=" << r.curve.size() << " final_loss=" << format_fixed(final_loss)
      << " clean_accuracy=" << format_fixed(clean_accuracy(r.model, data)) << "\n";
}

void cmd_search(const RunConfig& c, std::ostream& out) {
  const auto log_path = required_path(c, "out");
  const std::filesystem::path best_path =
      c.get("best_out").empty() ? log_path.string() + ".expr" : c.get("best_out");
  const SearchConfig config = search_config_from(c);
  const MlpModel model = load_model(required_path(c, "model"));
  const Dataset data = load_dataset(required_path(c, "data"));
  const SearchResult r = run_search(config, model, data, exec_from(c));
  save_csv(search_log_table(config, r.log), log_path);
  write_expression_file(r.best, best_path);
  out << "best_fitness=" << format_fixed(r.best_fitness) << " best_expression=" << print(r.best)
      << "\n";
}

void cmd_eval(const RunConfig& c, std::ostream& out) {
  const MlpModel model = load_model(required_path(c, "model"));
  Dataset data = load_dataset(required_path(c, "data"));
  if (const auto n = c.get_uint("samples"); n > 0) data = data.head(n);
  const SurrogateLoss loss = resolve_loss(c.get("loss"));
  const RiskReport r = approx_risk(model, loss, data, attack_from(c), exec_from(c));
  emit(c, out, to_csv_string(report_table({r})));
}

void cmd_landscape(const RunConfig& c, std::ostream& out) {
  const auto dir = required_path(c, "out");
  const MlpModel model = load_model(required_path(c, "model"));
  const Dataset data = load_dataset(required_path(c, "data"));
  const AttackSpec spec = attack_from(c);
  const SurrogateLoss hc = resolve_loss(c.get("hc_loss"));
  const SurrogateLoss bs = resolve_loss(c.get("bs_loss"));
  const LandscapeAnchors a = find_landscape_anchors(model, data, hc, bs, spec);

  std::vector<SurrogateLoss> losses;
  std::istringstream names(c.get("losses"));
  for (std::string name; std::getline(names, name, ',');)
    if (!name.empty()) losses.push_back(resolve_loss(name));
  if (losses.empty()) throw Error(ErrorCode::config, "key 'losses': empty list");
  std::vector<const SurrogateLoss*> ptrs;
  for (const auto& l : losses) ptrs.push_back(&l);

  const std::uint32_t label[] = {a.label};
  const auto grids =
      landscape_grid(model, ptrs, a.x, label, a.x_hc, a.x_bs, c.get_uint("resolution"));
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < losses.size(); ++i)
    save_csv(landscape_table(grids[i]), dir / ("landscape_" + losses[i].name() + ".csv"));
  out << "anchor_index=" << a.index << " label=" << a.label
      << " property_holds=" << (a.property_holds ? 1 : 0) << " files=" << losses.size() << "\n";
}

void cmd_gradcheck(const RunConfig& c, std::ostream& out) {
  GradCheckOptions o;
  o.op_trials = c.get_uint("op_trials");
  o.trees = c.get_uint("trees");
  o.tree_max_depth = static_cast<int>(c.get_int("tree_max_depth"));
  o.model_points = c.get_uint("model_points");
  o.tolerance = c.get_double("tolerance");
  o.seed = c.get_uint("seed");
  const GradCheckReport r = run_gradcheck(o);
  CsvTable t;
  t.header = {"check", "cases", "resampled", "max_rel_err", "pass"};
  for (const auto& i : r.items)
    t.rows.push_back({i.name, std::to_string(i.cases), std::to_string(i.resampled),
                      format_fixed(i.max_rel_err), i.pass ? "1" : "0"});
  emit(c, out, to_csv_string(t));
  if (!r.all_pass()) throw Error(ErrorCode::invalid_value, "gradient check failed");
}

void cmd_simplify(const RunConfig& c, std::ostream& out) {
  const ExprTree s = simplify(read_expression_file(required_path(c, "in")));
  emit(c, out, print(s) + "\n");
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  auto fail = [&](std::string_view code, const std::string& message, int status) {
    err << "error code=" << code << " message=" << quote(message) << "\n";
    return status;
  };

  CLI::App app{"Adversarial surrogate-loss search and robustness evaluation"};
  app.require_subcommand(1);
  std::map<std::string, std::map<std::string, std::string>> given;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, bool> no_random_start;
  std::map<std::string, CLI::App*> subs;
  std::map<std::string, std::vector<std::pair<std::string, CLI::Option*>>> options;

  const std::map<std::string, std::string> about = {
      {"gen-data", "generate or import a dataset file"},
      {"train", "train an MLP classifier, optionally with FGSM adversarial training"},
      {"search", "run the GP surrogate-loss search"},
      {"eval", "PGD robustness report for one loss"},
      {"landscape", "loss grids over the plane of two adversarial directions"},
      {"gradcheck", "analytic vs finite-difference gradient table"},
      {"simplify", "simplify an expression file"}};
  for (const auto& name : command_names()) {
    CLI::App* sub = app.add_subcommand(name, about.at(name));
    subs[name] = sub;
    sub->add_option("--config", config_paths[name], "key = value config file");
    for (const auto& k : command_keys(name)) {
      if (k.key == "random_start") {
        no_random_start[name] = false;
        options[name].emplace_back(
            k.key, sub->add_flag("--no-random-start", no_random_start[name], "start PGD at x"));
        continue;
      }
      std::string flag = "--" + k.key;
      std::replace(flag.begin(), flag.end(), '_', '-');
      std::string help = k.help;
      if (!k.default_value.empty()) help += " (default " + k.default_value + ")";
      options[name].emplace_back(k.key, sub->add_option(flag, given[name][k.key], help));
    }
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    return fail("invalid_argument", e.what(), 2);
  }

  std::string command;
  for (const auto& [name, sub] : subs)
    if (sub->parsed()) command = name;

  try {
    RunConfig config(command_keys(command));
    if (!config_paths[command].empty()) config.apply_file(config_paths[command]);
    for (const auto& [key, opt] : options[command]) {
      if (opt->count() == 0) continue;
      config.set(key, key == "random_start" ? "false" : given[command][key], ValueSource::Cli);
    }

    if (command == "gen-data") cmd_gen_data(config, out);
    else if (command == "train") cmd_train(config, out);
    else if (command == "search") cmd_search(config, out);
    else if (command == "eval") cmd_eval(config, out);
    else if (command == "landscape") cmd_landscape(config, out);
    else if (command == "gradcheck") cmd_gradcheck(config, out);
    else if (command == "simplify") cmd_simplify(config, out);
  } catch (const Error& e) {
    return fail(error_code_name(e.code()), e.what(), e.code() == ErrorCode::config ? 2 : 1);
  } catch (const std::exception& e) {
    return fail("internal", e.what(), 1);
  }
  return 0;
}

}  // namespace advloss::cli
