#pragma once

#include <string>
#include <vector>

namespace wce {

/// Collects non-fatal warnings emitted by numerical routines. Callers that
/// pass nullptr simply drop the messages; the CLI attaches one per run and
/// stores the result in the output record.
struct Diagnostics {
    std::vector<std::string> warnings;

    void warn(std::string msg) { warnings.push_back(std::move(msg)); }
    bool empty() const { return warnings.empty(); }
};

inline void diag_warn(Diagnostics* diag, std::string msg) {
    if (diag != nullptr) diag->warn(std::move(msg));
}

}  // namespace wce
