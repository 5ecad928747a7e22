#pragma once

// Command-line front end: run, compare, sweep, serve.

#include <iosfwd>

namespace rydemu {

/// Process exit codes.
enum ExitCode : int {
  kExitOk = 0,
  kExitFailure = 1,     // anything not listed below
  kExitIo = 2,          // unreadable input, unwritable output
  kExitSyntax = 3,      // malformed JSON
  kExitSchema = 4,      // missing, ill-typed or unknown field
  kExitValidation = 5,  // invariant or device-limit violation
  kExitTooLarge = 6,    // register too large for the requested solver
  kExitSolver = 7,      // Krylov, SVD or MPO compression failure
  kExitUsage = 64,      // bad command line
};

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace rydemu
