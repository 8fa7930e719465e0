#pragma once

#include <stdexcept>
#include <string>

namespace faceedit {

// Invalid or inconsistent user data: unreadable files, shape mismatches,
// out-of-range values, unknown symbols. Maps to CLI exit code 2.
class DataError : public std::runtime_error {
public:
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Unrecoverable runtime failure (non-finite loss, I/O failure mid-run).
// Maps to CLI exit code 3.
class RuntimeAbort : public std::runtime_error {
public:
    explicit RuntimeAbort(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace faceedit
