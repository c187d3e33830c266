#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>

#include "advloss/expr.hpp"
#include "advloss/losses.hpp"
#include "cli/run_config.hpp"

namespace advloss::cli {

// Whole-file expression text; lines starting with '#' are ignored.
ExprTree read_expression_file(const std::filesystem::path& path);
void write_expression_file(const ExprTree& tree, const std::filesystem::path& path);

// Catalog name first, then an expression file named by `spec`.
SurrogateLoss resolve_loss(const std::string& spec);

void cmd_gen_data(const RunConfig& config, std::ostream& out);
void cmd_train(const RunConfig& config, std::ostream& out);
void cmd_search(const RunConfig& config, std::ostream& out);
void cmd_eval(const RunConfig& config, std::ostream& out);
void cmd_landscape(const RunConfig& config, std::ostream& out);
void cmd_gradcheck(const RunConfig& config, std::ostream& out);
void cmd_simplify(const RunConfig& config, std::ostream& out);

// Parses argv and dispatches. Failures print one line
//   error code=<code> message="<text>"
// to `err` and return a nonzero status (2 for usage errors, 1 otherwise).
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace advloss::cli
