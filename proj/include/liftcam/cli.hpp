#pragma once

#include <ostream>

namespace liftcam {

/// Entry point of the `liftcam` command line (subcommands: explain, evaluate,
/// generate, check). Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace liftcam
