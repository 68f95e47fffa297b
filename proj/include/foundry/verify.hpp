#pragma once

namespace foundry {

/// Fast invariant suite behind `foundry verify`. Prints one line per check
/// and returns the number of failures.
int run_verification();

}  // namespace foundry
