#pragma once

#include <stdexcept>
#include <string>

namespace covidcare {

// Internal failure: bad shapes, broken invariants, unreadable files.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Caller mistake: bad config keys, missing prerequisites, invalid CLI usage.
// The CLI maps these to exit code 2.
struct UserError : Error {
    using Error::Error;
};

}  // namespace covidcare
