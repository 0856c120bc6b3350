#pragma once

namespace scenefit {

/// Command-line entry point: subcommands fit, eval, synth, inspect.
/// Returns 0 on success, 2 on usage errors, 1 on runtime failures.
int cli_main(int argc, const char* const* argv);

}  // namespace scenefit
