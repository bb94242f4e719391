// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wardseq::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kUsage = 2,
    kIo = 3,
    kInvalidInput = 4,  // config validation, schema or parse errors
    kShape = 5,
    kNumeric = 6,       // non-finite training, or a failed gradient check
    kMetric = 7,
};

/// Runs one subcommand. Errors are reported on `err` as a single line
/// `error: code=<name> exit=<n> message="<text>"`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wardseq::cli
